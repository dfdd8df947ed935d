use proptest::prelude::*;
use tree_stable::special::{bessel_i_ratios, ln_bessel_i, ln_bessel_i_range, ln_bessel_i_scaled, ln_bessel_i_series};

proptest! {
    #[test]
    fn three_term_recurrence(nu in 1.0f64..200.0, lz in -2.0f64..3.0) {
        // I_{nu-1} - I_{nu+1} = (2 nu / z) I_nu, divided through by I_nu
        let z = 10f64.powf(lz);
        let l = ln_bessel_i(nu, z);
        let down = (ln_bessel_i(nu - 1.0, z) - l).exp();
        let up = (ln_bessel_i(nu + 1.0, z) - l).exp();
        let rhs = 2.0 * nu / z;
        prop_assert!((down - up - rhs).abs() <= 1e-9 * down.max(rhs), "nu={nu} z={z}: {down} - {up} vs {rhs}");
    }

    #[test]
    fn decreasing_in_order(nu in 0.0f64..300.0, lz in -2.0f64..3.5) {
        let z = 10f64.powf(lz);
        prop_assert!(ln_bessel_i(nu + 0.5, z) < ln_bessel_i(nu, z));
    }

    #[test]
    fn scaled_form_is_consistent(nu in 0.0f64..300.0, lz in -2.0f64..2.5) {
        let z = 10f64.powf(lz);
        let a = ln_bessel_i_scaled(nu, z);
        let b = ln_bessel_i(nu, z) - z;
        prop_assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0));
    }

    #[test]
    fn agrees_with_series(nu in 0.0f64..120.0, lz in -2.0f64..2.7) {
        let z = 10f64.powf(lz);
        let a = ln_bessel_i(nu, z);
        prop_assert!((a - ln_bessel_i_series(nu, z)).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn range_matches_pointwise(lz in -1.0f64..3.0, lo in 0usize..50, len in 1usize..600) {
        let z = 10f64.powf(lz);
        let hi = lo + len;
        let range = ln_bessel_i_range(z, lo, hi);
        for k in [lo, (lo + hi) / 2, hi] {
            let direct = ln_bessel_i(k as f64, z);
            prop_assert!((range[k - lo] - direct).abs() <= 1e-10 * direct.abs().max(1.0), "k={k} z={z}");
        }
    }

    #[test]
    fn ratios_lie_in_unit_interval(lz in -2.0f64..3.0, hi in 1usize..400) {
        let z = 10f64.powf(lz);
        for r in bessel_i_ratios(z, 1, hi) {
            prop_assert!(r > 0.0 && r < 1.0);
        }
    }
}
