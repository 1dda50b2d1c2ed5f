use std::sync::Arc;

use proptest::prelude::*;

use ddsolve::decomp::{build_grid, Layout};
use ddsolve::linalg::dense::diff_norm_inf;
use ddsolve::linalg::GmresOptions;
use ddsolve::linear_schwarz::LinearSchwarz;
use ddsolve::problems::assemble_poisson;

fn instance(points: &[usize], counts: &[usize], overlap: usize) -> Option<LinearSchwarz> {
    let g = build_grid(points.len(), points, 1.0 / (points[0] as f64 + 1.0)).ok()?;
    let (a, f) = assemble_poisson(&g);
    let layout = Layout::build(&g, counts, overlap, &a).ok()?;
    LinearSchwarz::new(a, f, Arc::new(layout)).ok()
}

fn config() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    prop_oneof![
        (20usize..80, 2usize..6, 1usize..4).prop_map(|(n, c, o)| (vec![n], vec![c], o)),
        (8usize..20, 8usize..20, 1usize..3, 1usize..3, 1usize..3).prop_map(|(nx, ny, cx, cy, o)| (vec![nx, ny], vec![cx, cy], o)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_of_unity_and_skeleton_definition((points, counts, overlap) in config()) {
        let Some(ls) = instance(&points, &counts, overlap) else { return Ok(()) };
        let layout = ls.layout();
        prop_assert!(layout.transfer.partition_of_unity_holds());
        prop_assert!(layout.transfer.restriction_inverts_prolongation());
        // skeleton: every unknown outside a subdomain that one of its rows reads
        let a = ls.matrix();
        let mut expect = Vec::new();
        for k in 0..ls.n_global() {
            let read = layout.decomposition.overlap_sets().iter().any(|set| {
                !set.contains(&k) && set.iter().any(|&i| a.row(i).0.contains(&k))
            });
            if read {
                expect.push(k);
            }
        }
        prop_assert_eq!(layout.skeleton.indices(), expect.as_slice());
    }

    #[test]
    fn ras_and_sras_iterates_agree((points, counts, overlap) in config(), seed in 0u64..1000) {
        let Some(ls) = instance(&points, &counts, overlap) else { return Ok(()) };
        let sk = &ls.layout().skeleton;
        let mut u: Vec<f64> = (0..ls.n_global()).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let mut v = sk.restrict(&u);
        for _ in 0..10 {
            u = ls.ras_step(&u).unwrap();
            v = ls.sras_step(&v).unwrap();
            prop_assert!(diff_norm_inf(&sk.restrict(&u), &v) < 1e-11);
        }
    }

    #[test]
    fn gmres_bounds_hold((points, counts, overlap) in config()) {
        let Some(ls) = instance(&points, &counts, overlap) else { return Ok(()) };
        let nbar = ls.n_skeleton();
        let opts = GmresOptions { rtol: 1e-10, maxit: 500, ..Default::default() };
        let s = ls.gmres_sras(&vec![0.0; nbar], &opts).unwrap();
        prop_assert!(s.converged && s.iterations <= nbar.max(1));
        let r = ls.gmres_ras(&vec![0.0; ls.n_global()], &opts).unwrap();
        prop_assert!(r.converged || r.breakdown);
        // one extra step can be lost to rounding on the last Krylov direction
        prop_assert!(r.iterations <= nbar + 2, "{} > {} + 2", r.iterations, nbar);
    }
}
