use proptest::prelude::*;
use tree_stable::potential::{exit_distribution, green_function, killed_generator, mean_exit_time_radial};
use tree_stable::process::build_jump_law;
use tree_stable::subordinator::StableParams;
use tree_stable::{distance, TreeParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn green_function_invariants(alpha in 0.4f64..1.8, q in 2u32..4, r in 1usize..5) {
        let p = TreeParams::new(q).unwrap();
        let s = StableParams::new(alpha).unwrap();
        let law = build_jump_law(&p, &s, 2 * r + 8).unwrap();
        let gen = killed_generator(&p, &law, r).unwrap();
        let gm = green_function(&gen).unwrap();
        let n = gen.ball.len();
        prop_assert!(gm.solve_residual < 1e-10);
        for i in 0..n {
            for j in 0..n {
                prop_assert!(gm.values[(i, j)] > 0.0);
                prop_assert!((gm.values[(i, j)] - gm.values[(j, i)]).abs() <= 1e-12 * gm.values[(i, i)]);
            }
            // the diagonal dominates its row and column
            prop_assert!(gm.values[(i, i)] >= gm.values.row(i).max());
        }
        // mean exit times depend only on the distance to the centre
        let dense = gm.mean_exit_times();
        let radial = mean_exit_time_radial(&p, &law, r).unwrap();
        for (i, x) in gen.ball.vertices.iter().enumerate() {
            let d = distance(x, &gen.ball.center);
            prop_assert!((dense[i] / radial[d] - 1.0).abs() < 1e-9);
        }
        for d in 1..=r {
            prop_assert!(radial[d] < radial[d - 1]);
        }
        let ed = exit_distribution(&p, &gen, &gm, &law, 0, 4).unwrap();
        prop_assert!((ed.total - 1.0).abs() < 1e-9);
        prop_assert!(ed.probs.iter().all(|&x| x >= 0.0));
    }
}
