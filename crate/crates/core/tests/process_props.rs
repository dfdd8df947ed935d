use std::sync::OnceLock;

use proptest::prelude::*;
use rand::Rng;
use tree_stable::process::{build_jump_law, jump_radial, sample_rng, walk_distance, JumpLaw};
use tree_stable::subordinator::StableParams;
use tree_stable::TreeParams;

fn law() -> &'static JumpLaw {
    static L: OnceLock<JumpLaw> = OnceLock::new();
    L.get_or_init(|| build_jump_law(&TreeParams::new(2).unwrap(), &StableParams::new(1.0).unwrap(), 64).unwrap())
}

proptest! {
    #[test]
    fn radial_jump_respects_the_triangle_inequality(q in 2u32..6, a in 0usize..60, n in 0usize..60, seed in any::<u64>()) {
        let mut rng = sample_rng(seed, 0);
        let d = jump_radial(q, a, n, &mut rng);
        prop_assert!(d >= a.abs_diff(n) && d <= a + n);
        prop_assert_eq!((d + a + n) % 2, 0);
    }

    #[test]
    fn walk_distance_parity(q in 2u32..6, steps in 0u64..500, seed in any::<u64>()) {
        let d = walk_distance(q, steps, &mut sample_rng(seed, 1));
        prop_assert!(d as u64 <= steps);
        prop_assert_eq!((d as u64 + steps) % 2, 0);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), i in any::<u64>()) {
        let a: [u64; 4] = sample_rng(seed, i).random();
        let b: [u64; 4] = sample_rng(seed, i).random();
        prop_assert_eq!(a, b);
        let c: [u64; 4] = sample_rng(seed, i.wrapping_add(1)).random();
        prop_assert_ne!(a, c);
    }

    #[test]
    fn sampled_distances_are_valid(seed in any::<u64>()) {
        let l = law();
        let mut rng = sample_rng(seed, 2);
        for _ in 0..50 {
            prop_assert!(l.sample_distance(&mut rng) >= 1);
        }
        let d = l.sample_far(&mut rng);
        prop_assert!(d > l.n_jump);
    }
}

#[test]
fn jump_law_tables_are_consistent() {
    let p = TreeParams::new(2).unwrap();
    let l = law();
    assert_eq!(l.distance_cdf[0], 0.0);
    for w in l.distance_cdf.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!((1.0 - l.distance_cdf[l.n_jump] - l.eps_tail).abs() < 1e-15);
    for n in 1..l.n_jump {
        assert!(l.nu[n + 1] < l.nu[n]);
        assert!(l.cone_rate(n) < l.cone_rate(n - 1));
    }
    let q = p.q as f64;
    // the q + 1 cones behind the neighbours hold every jump longer than 1
    let beyond_one = l.total_rate - p.sphere_size_f64(1) * l.nu[1];
    assert!(((q + 1.0) * l.cone_rate(1) / beyond_one - 1.0).abs() < 1e-12);
    // a cone behind a vertex at distance j holds q^{n-j} of the m(n) targets at distance n
    for j in [2usize, 5, 9] {
        let direct: f64 = (j + 1..=l.n_jump).map(|n| q.powi((n - j) as i32) * l.nu[n]).sum::<f64>()
            + l.eps_tail * l.total_rate * q.powi(1 - j as i32) / (q + 1.0);
        assert!((l.cone_rate(j) / direct - 1.0).abs() < 1e-12, "j = {j}");
    }
}
