use ddsolve::linalg::dense::{diff_norm_inf, norm_inf};
use ddsolve::nonlinear_schwarz::{reference_solution, NonlinearProblem};
use ddsolve::problems::{Forchheimer, NonlinearDiffusion};

fn fd_jacobian_error(p: &dyn NonlinearProblem, u: &[f64]) -> f64 {
    let j = p.jacobian(u).unwrap();
    let n = p.size();
    let mut worst: f64 = 0.0;
    for d in 0..5 {
        let w: Vec<f64> = (0..n).map(|i| ((i * (2 * d + 3) + d) % 7) as f64 / 7.0 - 0.4).collect();
        let eps = 1e-6;
        let plus: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - eps * b).collect();
        let fd: Vec<f64> =
            p.residual(&plus).unwrap().iter().zip(p.residual(&minus).unwrap()).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let jw = j.matvec(&w).unwrap();
        worst = worst.max(diff_norm_inf(&jw, &fd) / norm_inf(&jw));
    }
    worst
}

#[test]
fn forchheimer_jacobian_matches_differences() {
    let p = Forchheimer::standard(199, 1.0).unwrap();
    // monotone, so no face flux sits at the kink of |y|
    let u: Vec<f64> = (0..199).map(|i| 1.2 + 1.3 * (i as f64 / 198.0) + 0.002 * (i as f64 * 0.11).sin()).collect();
    let e = fd_jacobian_error(&p, &u);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn nldiffusion_jacobian_matches_differences() {
    let p = NonlinearDiffusion::new(15).unwrap();
    let u: Vec<f64> = (0..p.size()).map(|i| (i as f64 * 0.37).cos()).collect();
    let e = fd_jacobian_error(&p, &u);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn nldiffusion_is_second_order() {
    let err = |n: usize| {
        let p = NonlinearDiffusion::new(n).unwrap();
        let u = reference_solution(&p, &vec![0.0; p.size()], 1e-14).unwrap();
        diff_norm_inf(&u, &p.exact_solution())
    };
    let (e1, e2) = (err(15), err(31));
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn forchheimer_boundary_cells_approach_dirichlet_data() {
    let gap = |cells: usize| {
        let p = Forchheimer::standard(cells, 1.0).unwrap();
        let u = reference_solution(&p, &vec![0.0; cells], 1e-14).unwrap();
        assert!(norm_inf(&p.residual(&u).unwrap()) < 1e-6);
        (u[0] - 1.0).abs().max((u[cells - 1] - std::f64::consts::E).abs())
    };
    let (coarse, fine) = (gap(99), gap(999));
    assert!(fine < 0.2 * coarse, "{coarse} {fine}");
}
