//! One line per acceptance criterion, then a single verdict.

use std::time::Instant;

use rayon::prelude::*;
use tree_stable::heat::{HeatFlow, SpectralData};
use tree_stable::potential::{check_poisson_bounds, exit_distribution, green_function, killed_generator, mean_exit_time_radial};
use tree_stable::process::{build_jump_law, estimate_exit, ExitOptions};
use tree_stable::special::{branch, ln_bessel_i, ln_bessel_i_series, BesselBranch};
use tree_stable::stable::{
    check_levy_envelope, check_ptx_envelopes, heat_horizon, levy_measure_limit, linear_fit, mass_repartition,
    maximize, outer_exponent, stable_kernel_from_spectral, stable_kernel_quadrature_parts,
};
use tree_stable::stats::total_variation;
use tree_stable::subordinator::{
    branch_cut_min_x, eta1_branch_cut, eta_closed_form, laplace_transform, ln_eta1_zolotarev, StableParams,
};
use tree_stable::tree::check_volume_conditions;
use tree_stable::{TreeParams, Vertex};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(k: usize, name: &str, start: Instant, o: &Outcome) {
    println!(
        "criterion {k:>2} {:<4} {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
}

fn q2() -> TreeParams {
    TreeParams::new(2).unwrap()
}

fn dual_oracle(spec: &SpectralData) -> Outcome {
    let start = Instant::now();
    let p = q2();
    let flow = HeatFlow::new(&p, 400, heat_horizon(&p, 400));
    let mut worst = 0.0f64;
    for a in [0.5, 1.0, 1.5] {
        let s = StableParams::new(a).unwrap();
        let rows: Vec<f64> = [0.5, 1.0, 2.0, 5.0]
            .par_iter()
            .map(|&t| {
                let sp = stable_kernel_from_spectral(&p, spec, &s, t).unwrap();
                let qk = stable_kernel_quadrature_parts(&p, &s, t, &flow, 15, 1.0).unwrap();
                (0..=15).map(|n| (qk.kernel.values[n] / sp.values[n] - 1.0).abs()).fold(0.0, f64::max)
            })
            .collect();
        worst = rows.into_iter().fold(worst, f64::max);
    }
    Outcome {
        pass: worst <= 1e-6 && start.elapsed().as_secs() <= 120,
        detail: format!("max relative gap {worst:.2e} (tol 1e-6)"),
    }
}

fn closed_form_subordinator() -> Outcome {
    let s = StableParams::new(1.0).unwrap();
    let xmin = branch_cut_min_x(&s);
    let (mut wz, mut wb, mut unresolved, mut skipped) = (0.0f64, 0.0f64, 0usize, 0usize);
    let mut points = 0;
    for &t in &[0.5, 1.0, 5.0] {
        let mut u = 1e-2;
        while u <= 1e3 * (1.0 + 1e-12) {
            let exact = eta_closed_form(t, u);
            let x = u / (t * t);
            let scale = 1.0 / (t * t);
            let z = ln_eta1_zolotarev(&s, x).unwrap().exp() * scale;
            wz = wz.max((z / exact - 1.0).abs());
            if x < xmin {
                skipped += 1;
            } else {
                match eta1_branch_cut(&s, x) {
                    Ok(b) => wb = wb.max((b * scale / exact - 1.0).abs()),
                    Err(_) => unresolved += 1,
                }
            }
            points += 1;
            u *= 10f64.powf(0.125);
        }
    }
    let mut wl = 0.0f64;
    for &t in &[0.5, 1.0, 5.0] {
        for &lambda in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            let lt = laplace_transform(&s, t, lambda).unwrap();
            wl = wl.max((lt / (-t * lambda.sqrt()).exp() - 1.0).abs());
        }
    }
    Outcome {
        pass: wz <= 1e-6 && wb <= 1e-6 && unresolved == 0 && wl <= 1e-6,
        detail: format!(
            "{points} points: Zolotarev {wz:.1e}, branch cut {wb:.1e} ({unresolved} unresolved, {skipped} below its range x >= {xmin:.3}), Laplace {wl:.1e}"
        ),
    }
}

fn inner_regime(spec: &SpectralData) -> Outcome {
    let p = q2();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [1.0, 1.5] {
        let s = StableParams::new(a).unwrap();
        let r = check_ptx_envelopes(&p, &s, spec, 1.0, 1.0).unwrap();
        pass &= r.decay_rate_ok() && r.prefactor_ok();
        parts.push(format!(
            "alpha={a}: rate {:.6} vs {:.6} ({:+.2}%), exponent {:.3}",
            r.decay_rate_fit,
            r.decay_rate_target,
            100.0 * (r.decay_rate_fit / r.decay_rate_target - 1.0),
            r.prefactor_exponent_fit
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn outer_regime(spec: &SpectralData) -> Outcome {
    let p = q2();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.5, 1.0, 1.5] {
        let s = StableParams::new(a).unwrap();
        let r = check_ptx_envelopes(&p, &s, spec, 1.0, 1.0).unwrap();
        pass &= r.outer.points > 0 && r.outer.spread() <= 20.0;
        parts.push(format!("alpha={a} spread {:.2}", r.outer.spread()));
    }
    let (u0, pu0) = maximize(|u| outer_exponent(&p, u), 1e-2, 1e3, 1e-13);
    let ok = (u0 - 3.0).abs() <= 1e-6 && (pu0 + (4.0f64 / 3.0).ln()).abs() <= 1e-6;
    pass &= ok;
    parts.push(format!("u0 = {u0:.8}, p(u0) = {pu0:.8}"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn jump_measure() -> Outcome {
    let p = q2();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.5, 1.0, 1.5] {
        let s = StableParams::new(a).unwrap();
        let (band, nu) = check_levy_envelope(&p, &s, 40).unwrap();
        let lim = levy_measure_limit(&p, &s, 40).unwrap();
        let gap = (1..=40).map(|n| (lim[n] / nu[n] - 1.0).abs()).fold(0.0, f64::max);
        pass &= band.spread() <= 10.0 && gap <= 1e-3;
        parts.push(format!("alpha={a} spread {:.2}, limit gap {gap:.1e}", band.spread()));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn repartition() -> Outcome {
    let p = q2();
    let s = StableParams::new(1.0).unwrap();
    let ts: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
    let masses: Vec<f64> = ts.par_iter().map(|&t| mass_repartition(&p, &s, t, 0.5, 2.0, 2.0).unwrap().mass).collect();
    let inside = masses.iter().all(|&m| m > 0.01 && m < 0.99);
    let (mlo, mhi) = masses.iter().fold((1.0f64, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    let wide = mass_repartition(&p, &s, 50.0, 0.01, 100.0, 2.0).unwrap().mass;
    let off = mass_repartition(&p, &s, 100.0, 0.5, 2.0, 1.0).unwrap().mass;
    // mass * t against t on a log-log scale over [20, 100]
    let (x, y): (Vec<f64>, Vec<f64>) = ts.iter().zip(&masses).filter(|(t, _)| **t >= 20.0).map(|(t, m)| (t.ln(), (m * t).ln())).unzip();
    let (_, slope) = linear_fit(&x, &y);
    let slope_ok = (slope + 1.0).abs() <= 0.1;
    Outcome {
        pass: inside && wide >= 0.9 && off <= 0.05 && slope_ok,
        detail: format!(
            "mass in [{mlo:.4}, {mhi:.4}] on t in [10, 100]; (0.01, 100) at t=50: {wide:.4}; exponent 1 at t=100: {off:.4}; slope of mass*t {slope:.3} (target -1 +/- 0.1)"
        ),
    }
}

fn exit_times() -> Outcome {
    let start = Instant::now();
    let p = q2();
    let s = StableParams::new(1.0).unwrap();
    let law = build_jump_law(&p, &s, 64).unwrap();
    let o = Vertex::root();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, r) in [4usize, 6, 8].into_iter().enumerate() {
        let gen = killed_generator(&p, &law, r).unwrap();
        let gm = green_function(&gen).unwrap();
        let exact = gm.mean_exit_times()[0];
        let st = estimate_exit(&p, &law, &o, &o, r, 100_000, 7_000 + i as u64, &ExitOptions::default()).unwrap();
        let z = st.exit_time.z_score(exact);
        pass &= z <= 3.0;
        parts.push(format!("r={r}: {:.4} +/- {:.4} vs {exact:.4} ({z:.2} SE)", st.exit_time.mean, st.exit_time.std_error));
    }
    let ratios: Vec<f64> = (4..=12).map(|r| mean_exit_time_radial(&p, &law, r).unwrap()[0] / (r as f64).sqrt()).collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    pass &= spread <= 4.0 && start.elapsed().as_secs() <= 300;
    parts.push(format!("E tau / r^(1/2) spread {spread:.3} on r in [4, 12]"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn ikeda_watanabe() -> Outcome {
    let p = q2();
    let s = StableParams::new(1.0).unwrap();
    let law = build_jump_law(&p, &s, 64).unwrap();
    let k = 4;
    let gen = killed_generator(&p, &law, 4).unwrap();
    let gm = green_function(&gen).unwrap();
    let d = exit_distribution(&p, &gen, &gm, &law, 0, k).unwrap();
    let o = Vertex::root();
    let n = 1_000_000u64;
    let st = estimate_exit(&p, &law, &o, &o, 4, n, 8_000, &ExitOptions { max_excess: k, ..Default::default() }).unwrap();
    let emp: Vec<f64> = st.histogram.iter().map(|&c| c as f64 / n as f64).collect();
    let tv = total_variation(&d.probs, &emp);
    Outcome {
        pass: (d.total - 1.0).abs() <= 1e-6 && tv <= 0.01,
        detail: format!("total mass {:.12}, TV {tv:.4} over {} classes", d.total, d.probs.len()),
    }
}

fn poisson_bounds() -> Outcome {
    let p = q2();
    let law = build_jump_law(&p, &StableParams::new(1.0).unwrap(), 64).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [2, 4] {
        let rep = check_poisson_bounds(&p, &law, r).unwrap();
        pass &= rep.pass();
        parts.push(format!(
            "r={r}: upper {:.4} <= {:.4}, lower {:.2} >= {:.2}",
            rep.upper_ratio, rep.upper_constant, rep.lower_ratio, rep.lower_constant
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn infrastructure(spec: &SpectralData) -> Outcome {
    let p = q2();
    let flow = HeatFlow::new(&p, 400, 60.0);
    let (mut worst, mut compared) = (0.0f64, 0);
    for &t in &[0.05, 0.5, 3.0, 17.3, 60.0] {
        let h = flow.kernel_at(t);
        let (hs, floor) = spec.heat_kernel(t);
        for n in 0..=400 {
            if h[n] > 1e-30 && hs[n] > 1e9 * floor[n] {
                worst = worst.max((hs[n] / h[n] - 1.0).abs());
                compared += 1;
            }
        }
    }
    // the positive series is slow but accurate everywhere, so it checks the other expansions
    let mut bessel = 0.0f64;
    let mut by_branch = [0usize; 3];
    for &nu in &[0.0, 0.5, 1.0, 2.5, 7.0, 20.0, 45.0, 50.0, 80.0, 150.0, 300.0] {
        for &z in &[0.01, 0.3, 1.0, 4.0, 12.0, 25.0, 31.0, 60.0, 150.0, 400.0, 900.0] {
            let i = match branch(nu, z) {
                BesselBranch::Series => 0,
                BesselBranch::LargeArgument => 1,
                _ => 2,
            };
            by_branch[i] += 1;
            let a = ln_bessel_i(nu, z);
            bessel = bessel.max((a - ln_bessel_i_series(nu, z)).abs() / a.abs().max(1.0));
        }
    }
    let bottom = (spec.lambda_min() - (1.0 - 2.0 * 2f64.sqrt() / 3.0)).abs();
    let vol = check_volume_conditions(&p, 20).unwrap();
    Outcome {
        pass: compared > 50 && worst <= 1e-8 && bessel <= 1e-10 && by_branch.iter().all(|&c| c > 0) && bottom <= 1e-3 && vol.pass && vol.c1 < 1.0,
        detail: format!(
            "heat ODE vs spectral {worst:.1e} over {compared} points; Bessel vs series {bessel:.1e} (series/large-z/uniform points {:?}); |lambda_min - b2| {bottom:.2e}; volume c1 {:.4}",
            by_branch, vol.c1
        ),
    }
}

#[test]
fn acceptance() {
    let spec = SpectralData::new(&q2(), 400).unwrap();
    let mut all = true;
    let mut run = |k: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        report(k, name, start, &o);
        all &= o.pass;
    };
    run(1, "dual-oracle kernel", &|| dual_oracle(&spec));
    run(2, "alpha = 1 subordinator", &closed_form_subordinator);
    run(3, "inner regime decay", &|| inner_regime(&spec));
    run(4, "outer regime envelope", &|| outer_regime(&spec));
    run(5, "jump measure", &jump_measure);
    run(6, "mass repartition", &repartition);
    run(7, "exit times", &exit_times);
    run(8, "exit distribution", &ikeda_watanabe);
    run(9, "exit kernel bounds", &poisson_bounds);
    run(10, "infrastructure", &|| infrastructure(&spec));
    assert!(all, "some acceptance criteria failed, see the lines above");
}
