use std::sync::OnceLock;

use proptest::prelude::*;
use tree_stable::heat::{heat_kernel_exact, HeatFlow, SpectralData};
use tree_stable::stable::{exterior_mass, stable_kernel_exact, stable_kernel_from_spectral};
use tree_stable::subordinator::StableParams;
use tree_stable::TreeParams;

fn p2() -> TreeParams {
    TreeParams::new(2).unwrap()
}

fn spec() -> &'static SpectralData {
    static S: OnceLock<SpectralData> = OnceLock::new();
    S.get_or_init(|| SpectralData::new(&p2(), 200).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_kernel_is_a_decreasing_probability(t in 0.01f64..40.0) {
        let p = p2();
        let h = heat_kernel_exact(&p, t, 0, 300);
        let mass: f64 = h.iter().enumerate().map(|(n, v)| v * p.sphere_size_f64(n)).sum();
        prop_assert!(mass <= 1.0 + 1e-12 && mass > 1.0 - 1e-9, "mass {mass}");
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn exact_heat_kernel_solves_the_radial_ode(t in 0.05f64..20.0) {
        let p = p2();
        let flow = HeatFlow::new(&p, 200, 20.0);
        let ode = flow.kernel_at(t);
        let exact = heat_kernel_exact(&p, t, 0, 40);
        for n in 0..=40 {
            if exact[n] > 1e-200 {
                prop_assert!((ode[n] / exact[n] - 1.0).abs() < 1e-8, "t={t} n={n}");
            }
        }
    }

    #[test]
    fn stable_kernel_is_a_decreasing_subprobability(alpha in 0.3f64..1.9, t in 0.2f64..20.0) {
        let p = p2();
        let s = StableParams::new(alpha).unwrap();
        let k = stable_kernel_from_spectral(&p, spec(), &s, t).unwrap();
        let r = k.resolved_to;
        prop_assert!(r >= 5);
        for n in 0..r {
            prop_assert!(k.values[n] > 0.0);
            prop_assert!(k.values[n + 1] <= k.values[n] * (1.0 + 1e-9));
        }
        let inside = k.mass(&p);
        prop_assert!(inside < 1.0 + 1e-9);
        // the law outside the resolved ball closes the mass
        let outside = exterior_mass(&p, &s, t, r).unwrap();
        prop_assert!((inside + outside - 1.0).abs() < 1e-6, "{inside} + {outside}");
    }

    #[test]
    fn exact_and_spectral_kernels_agree(alpha in 0.3f64..1.9, t in 0.2f64..20.0) {
        let p = p2();
        let s = StableParams::new(alpha).unwrap();
        let k = stable_kernel_from_spectral(&p, spec(), &s, t).unwrap();
        let hi = k.resolved_to.min(20);
        let e = stable_kernel_exact(&p, &s, t, 0, hi).unwrap();
        for n in 0..=hi {
            prop_assert!((e[n] / k.values[n] - 1.0).abs() < 1e-6, "n={n}: {} vs {}", e[n], k.values[n]);
        }
    }
}
