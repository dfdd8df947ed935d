//! The stable semigroup `e^{-t Delta^{alpha/2}}` on the tree, built three ways:
//! spectrally from the truncated generator, by subordinating the
//! time-stepped heat kernel, and by subordinating the infinite-tree closed
//! form (used for distances far beyond any truncation).

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::band::{EnvelopeBand, Regime};
use crate::error::{Error, Result};
use crate::heat::{distance_law_exact, heat_kernel_exact, ln_phi0, truncate_unresolved, HeatFlow, RadialVector, SpectralData};
use crate::quad::{integrate_points, integrate_to_infinity, integrate_vec, integrate_vec_to_infinity, QuadOptions};
use crate::subordinator::{eta_density, richardson3, subordinator_levy_density, StableParams};
use crate::tree::TreeParams;

/// Relative rounding floor below which spectral entries are kept.
pub const SPECTRAL_RESOLUTION: f64 = 1e-8;

fn radial_mass(p: &TreeParams, values: &[f64]) -> f64 {
    values.iter().enumerate().map(|(n, v)| v * p.ln_sphere_size(n).exp()).sum()
}

/// `p_t(n) = sum_k e^{-t lambda_k^beta} psi_k(0) psi_k(n)`, cut where the
/// sum is no longer resolved. `tail_mass_bound` is `1 - sum m(n) p_t(n)`
/// over the kept entries, i.e. the mass at larger distances.
pub fn stable_kernel_from_spectral(p: &TreeParams, spec: &SpectralData, s: &StableParams, t: f64) -> Result<RadialVector> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    let (mut values, floors) = spec.radial_function(|l| (-t * l.max(0.0).powf(s.beta)).exp());
    let resolved_to = if t == 0.0 {
        values.iter_mut().enumerate().for_each(|(n, v)| *v = if n == 0 { 1.0 } else { 0.0 });
        0
    } else {
        truncate_unresolved(&mut values, &floors, SPECTRAL_RESOLUTION)
    };
    let tail = (1.0 - radial_mass(p, &values)).max(0.0);
    Ok(RadialVector {
        t,
        values,
        n_max: spec.n_max,
        resolved_to,
        tail_mass_bound: tail,
    })
}

pub fn stable_kernel_spectral(p: &TreeParams, s: &StableParams, t: f64, n_max: usize) -> Result<RadialVector> {
    let spec = SpectralData::new(p, n_max)?;
    stable_kernel_from_spectral(p, &spec, s, t)
}

/// Split of the subordination integral at `u = c0 t^{2/alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureKernel {
    pub kernel: RadialVector,
    pub split: f64,
    /// `int_0^split h_u(n) eta_t(u) du`
    pub head: Vec<f64>,
    /// `int_split^inf h_u(n) eta_t(u) du`
    pub tail: Vec<f64>,
    pub evaluations: usize,
}

/// Horizon for [`HeatFlow`] checkpoints so that the subordination tail of
/// every entry up to `n_max` has decayed.
pub fn heat_horizon(p: &TreeParams, n_max: usize) -> f64 {
    60.0 / p.b2 + 3.0 * n_max as f64 / p.r0
}

/// `p_t(n) = int_0^inf h_u(n) eta_t(u) du` with `h_u` from time stepping,
/// for `n = 0..=n_out`.
pub fn stable_kernel_quadrature_parts(
    p: &TreeParams,
    s: &StableParams,
    t: f64,
    flow: &HeatFlow,
    n_out: usize,
    c0: f64,
) -> Result<QuadratureKernel> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let n_out = n_out.min(flow.n_max());
    let dim = n_out + 1;
    let split = c0 * t.powf(1.0 / s.beta);
    let mut err: Option<Error> = None;
    let mut integrand = |u: f64, out: &mut [f64]| {
        if u <= 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let eta = match eta_density(s, t, u) {
            Ok(e) => e.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        if eta == 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let h = flow.kernel_at(u);
        for n in 0..dim {
            out[n] = h[n] * eta;
        }
    };
    let opts = QuadOptions::rel(1e-10);
    let mut pts = vec![0.0];
    for k in (1..=40).rev() {
        pts.push(split * 0.5f64.powi(k));
    }
    pts.push(split);
    let head = integrate_vec(&mut integrand, dim, &pts, &opts)?;
    let tail_start = heat_horizon(p, n_out).min(flow.horizon());
    let tail = integrate_vec_to_infinity(&mut integrand, dim, split, split.max(1.0), tail_start, &opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    let values: Vec<f64> = head.values.iter().zip(&tail.values).map(|(a, b)| a + b).collect();
    let mass = radial_mass(p, &values);
    Ok(QuadratureKernel {
        kernel: RadialVector {
            t,
            values,
            n_max: n_out,
            resolved_to: n_out,
            tail_mass_bound: (1.0 - mass).max(0.0),
        },
        split,
        head: head.values,
        tail: tail.values,
        evaluations: head.evaluations + tail.evaluations,
    })
}

pub fn stable_kernel_quadrature(p: &TreeParams, s: &StableParams, t: f64, n_max: usize) -> Result<RadialVector> {
    let flow = HeatFlow::new(p, n_max, heat_horizon(p, n_max));
    Ok(stable_kernel_quadrature_parts(p, s, t, &flow, n_max, 1.0)?.kernel)
}

/// `p_t(n)` for `n = lo..=hi` on the infinite tree, subordinating the
/// closed-form heat kernel. Accurate far below the spectral floor.
pub fn stable_kernel_exact(p: &TreeParams, s: &StableParams, t: f64, lo: usize, hi: usize) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if lo > hi {
        return Err(Error::param("n", format!("empty range {lo}..={hi}")));
    }
    let dim = hi - lo + 1;
    let mut err: Option<Error> = None;
    let mut integrand = |u: f64, out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        if u <= 0.0 {
            return;
        }
        let eta = match eta_density(s, t, u) {
            Ok(e) => e.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        if eta == 0.0 {
            return;
        }
        let h = heat_kernel_exact(p, u, lo, hi);
        for i in 0..dim {
            out[i] = h[i] * eta;
        }
    };
    let split = t.powf(1.0 / s.beta);
    let mut pts = vec![0.0];
    for k in (1..=40).rev() {
        pts.push(split * 0.5f64.powi(k));
    }
    pts.push(split);
    let opts = QuadOptions::rel(1e-10);
    let head = integrate_vec(&mut integrand, dim, &pts, &opts)?;
    let tail = integrate_vec_to_infinity(&mut integrand, dim, split, split.max(1.0), heat_horizon(p, hi), &opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(head.values.iter().zip(&tail.values).map(|(a, b)| a + b).collect())
}

/// `P(|X_t| > r)` on the infinite tree, `1 - int P(|Y_u| <= r) eta_t(u) du`.
pub fn exterior_mass(p: &TreeParams, s: &StableParams, t: f64, r: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Ok(0.0);
    }
    let mut err: Option<Error> = None;
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let eta = match eta_density(s, t, u) {
            Ok(e) => e.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        if eta == 0.0 {
            return 0.0;
        }
        let inside: f64 = distance_law_exact(p, u, 0, r).iter().sum();
        inside.min(1.0) * eta
    };
    let split = t.powf(1.0 / s.beta);
    let mut pts = vec![0.0];
    for k in (1..=40).rev() {
        pts.push(split * 0.5f64.powi(k));
    }
    pts.push(split);
    let opts = QuadOptions::rel(1e-11).with_abs(1e-14);
    let mut f = f;
    let head = integrate_points(&mut f, &pts, &opts)?;
    let tail = integrate_to_infinity(&mut f, split, split.max(1.0), 60.0 / p.b2 + 3.0 * r as f64 / p.r0, &opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((1.0 - head.value - tail.value).max(0.0))
}

/// `nu(n) = int_0^inf h_u(n) rho(u) du` for `n = 1..=n_hi`, with the
/// infinite-tree heat kernel; entry 0 is left at 0.
pub fn levy_measure_table(p: &TreeParams, s: &StableParams, n_hi: usize) -> Result<Vec<f64>> {
    if n_hi < 1 {
        return Err(Error::param("n", "the jump measure is defined for n >= 1"));
    }
    let dim = n_hi;
    let mut integrand = |u: f64, out: &mut [f64]| {
        if u <= 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let rho = subordinator_levy_density(s, u);
        let h = heat_kernel_exact(p, u, 1, n_hi);
        for i in 0..dim {
            out[i] = h[i] * rho;
        }
    };
    let mut pts = vec![0.0];
    for k in (1..=60).rev() {
        pts.push(0.5f64.powi(k));
    }
    pts.push(1.0);
    let opts = QuadOptions::rel(1e-10);
    let head = integrate_vec(&mut integrand, dim, &pts, &opts)?;
    let tail = integrate_vec_to_infinity(&mut integrand, dim, 1.0, 1.0, 60.0 / p.b2 + 3.0 * n_hi as f64 / p.r0, &opts)?;
    let mut out = vec![0.0; n_hi + 1];
    for i in 0..dim {
        out[i + 1] = head.values[i] + tail.values[i];
    }
    Ok(out)
}

pub fn levy_measure(p: &TreeParams, s: &StableParams, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::param("n", "the jump measure is defined for n >= 1"));
    }
    Ok(levy_measure_table(p, s, n)?[n])
}

/// `-(L^beta)_{0n}` from the spectral decomposition, `n >= 1`.
pub fn levy_measure_spectral(spec: &SpectralData, s: &StableParams) -> (Vec<f64>, Vec<f64>) {
    let (mut v, f) = spec.radial_function(|l| -(l.max(0.0).powf(s.beta)));
    v[0] = 0.0;
    (v, f)
}

/// `p_t(n) / t` for `n >= 1` from the spectral decomposition, written with
/// `expm1` so that it stays accurate as `t -> 0`.
pub fn kernel_over_t_spectral(spec: &SpectralData, s: &StableParams, t: f64) -> Vec<f64> {
    let (mut v, _) = spec.radial_function(|l| (-t * l.max(0.0).powf(s.beta)).exp_m1() / t);
    v[0] = 0.0;
    v
}

/// `lim_{t -> 0} p_t(n) / t` for `n = 1..=n_hi` by Richardson extrapolation
/// over `t in {1e-2, 1e-3, 1e-4}`, with [`stable_kernel_exact`].
pub fn levy_measure_limit(p: &TreeParams, s: &StableParams, n_hi: usize) -> Result<Vec<f64>> {
    if n_hi < 1 {
        return Err(Error::param("n", "the jump measure is defined for n >= 1"));
    }
    let ts = [1e-2, 1e-3, 1e-4];
    let rows: Vec<Result<Vec<f64>>> = ts.par_iter().map(|&t| stable_kernel_exact(p, s, t, 1, n_hi)).collect();
    let mut f = Vec::with_capacity(3);
    for (r, t) in rows.into_iter().zip(ts) {
        f.push(r?.into_iter().map(|v| v / t).collect::<Vec<f64>>());
    }
    let mut out = vec![0.0; n_hi + 1];
    for i in 0..n_hi {
        out[i + 1] = richardson3(f[0][i], f[1][i], f[2][i], 10.0);
    }
    Ok(out)
}

fn lookup(table: &[(u32, f64, (f64, f64))], q: u32, alpha: f64) -> (f64, f64) {
    table
        .iter()
        .find(|(tq, ta, _)| *tq == q && (ta - alpha).abs() < 1e-12)
        .map(|&(_, _, (lo, hi))| (lo / 1.25, hi * 1.25))
        .unwrap_or((0.0, f64::INFINITY))
}

const LEVY_BANDS: [(u32, f64, (f64, f64)); 6] = [
    (2, 0.5, (0.1085, 0.2011)),
    (2, 1.0, (0.1167, 0.3690)),
    (2, 1.5, (0.0669, 0.5205)),
    (3, 0.5, (0.1325, 0.2135)),
    (3, 1.0, (0.1564, 0.4029)),
    (3, 1.5, (0.0982, 0.5790)),
];

/// Frozen band for `nu(n) n^{1+alpha/2} q^n` over `n in [1, 40]`, measured
/// and widened by 1.25. Unlisted `(q, alpha)` get an open band.
pub fn levy_band(q: u32, alpha: f64) -> (f64, f64) {
    lookup(&LEVY_BANDS, q, alpha)
}

pub fn check_levy_envelope(p: &TreeParams, s: &StableParams, n_hi: usize) -> Result<(EnvelopeBand, Vec<f64>)> {
    let nu = levy_measure_table(p, s, n_hi)?;
    let mut band = EnvelopeBand::new(Regime::Global, format!("n in [1, {n_hi}]"), levy_band(p.q, s.alpha));
    let ln_q = (p.q as f64).ln();
    for n in 1..=n_hi {
        let nf = n as f64;
        band.record((nu[n].ln() + (1.0 + 0.5 * s.alpha) * nf.ln() + nf * ln_q).exp());
    }
    Ok((band, nu))
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn maximize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `sqrt(1 + gamma^2 u^2) - u + ln u - ln(1 + sqrt(1 + gamma^2 u^2))`.
pub fn outer_exponent(p: &TreeParams, u: f64) -> f64 {
    let r = (1.0 + p.gamma * p.gamma * u * u).sqrt();
    r - u + u.ln() - (1.0 + r).ln()
}

/// Least squares `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtxReport {
    pub q: u32,
    pub alpha: f64,
    pub inner: EnvelopeBand,
    pub outer: EnvelopeBand,
    /// `(1 - gamma)^{alpha/2}`
    pub decay_rate_target: f64,
    /// slope of `-ln(p_t(0) t^{3/2})` against `t` on `[20, 60]`
    pub decay_rate_fit: f64,
    /// exponent `e` in `ln p_t(0) + t (1-gamma)^{alpha/2} = c + e ln t` on `[20, 60]`
    pub prefactor_exponent_fit: f64,
    /// slope of `-ln p_t(0)` against `t` without removing the power prefactor
    pub raw_decay_rate_fit: f64,
    /// maximiser of `-c1 v^{-beta/(1-beta)} - (1-gamma) v` and its value
    pub inner_saddle: (f64, f64),
    pub inner_saddle_formula: (f64, f64),
    /// maximiser of [`outer_exponent`] and its value
    pub outer_saddle: (f64, f64),
    pub outer_saddle_formula: (f64, f64),
    /// `(t, n, p_t(n))` between the two regimes; computed, not checked
    pub intermediate: Vec<(f64, usize, f64)>,
}

impl PtxReport {
    pub fn decay_rate_ok(&self) -> bool {
        (self.decay_rate_fit / self.decay_rate_target - 1.0).abs() <= 0.02
    }

    pub fn prefactor_ok(&self) -> bool {
        (self.prefactor_exponent_fit + 1.5).abs() <= 0.15
    }

    pub fn saddles_ok(&self) -> bool {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() <= 1e-6 * b.0.abs().max(1.0) && (a.1 - b.1).abs() <= 1e-6;
        close(self.inner_saddle, self.inner_saddle_formula) && close(self.outer_saddle, self.outer_saddle_formula)
    }
}

const INNER_BANDS: [(u32, f64, (f64, f64)); 6] = [
    (2, 0.5, (0.4646, 1.7249)),
    (2, 1.0, (0.5165, 1.6176)),
    (2, 1.5, (0.5896, 2.3523)),
    (3, 0.5, (0.4053, 2.5509)),
    (3, 1.0, (0.4633, 1.7823)),
    (3, 1.5, (0.5018, 1.9716)),
];

const OUTER_BANDS: [(u32, f64, (f64, f64)); 6] = [
    (2, 0.5, (0.1633, 0.2749)),
    (2, 1.0, (0.2625, 0.3257)),
    (2, 1.5, (0.1881, 0.3462)),
    (3, 0.5, (0.1297, 0.2265)),
    (3, 1.0, (0.2347, 0.2980)),
    (3, 1.5, (0.1898, 0.3643)),
];

/// Frozen bands for the inner and outer regimes of the kernel estimate,
/// measured with `K = M = 1` and widened by 1.25.
pub fn ptx_bands(q: u32, alpha: f64) -> ((f64, f64), (f64, f64)) {
    (lookup(&INNER_BANDS, q, alpha), lookup(&OUTER_BANDS, q, alpha))
}

pub const INNER_TIMES: (f64, f64) = (5.0, 60.0);
pub const OUTER_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
pub const OUTER_DISTANCES: (usize, usize) = (5, 50);
pub const FIT_TIMES: (f64, f64) = (20.0, 60.0);

/// Ratios against the inner and outer envelopes, the decay-rate fit and the
/// two saddle points. The inner regime and the fit use the spectral kernel at
/// depth `spec.n_max`; the outer regime, whose values lie below the spectral
/// floor, uses [`stable_kernel_exact`].
pub fn check_ptx_envelopes(p: &TreeParams, s: &StableParams, spec: &SpectralData, k: f64, m: f64) -> Result<PtxReport> {
    if !(k > 0.0 && m > 0.0) {
        return Err(Error::param("K, M", format!("must be positive, got K={k}, M={m}")));
    }
    let (inner_band, outer_band) = ptx_bands(p.q, s.alpha);
    let rate = p.b2.powf(s.beta);
    let ln_q = (p.q as f64).ln();

    let inner_times: Vec<f64> = (0..=55).map(|i| INNER_TIMES.0 + i as f64).collect();
    let kernels: Vec<Result<RadialVector>> = inner_times.par_iter().map(|&t| stable_kernel_from_spectral(p, spec, s, t)).collect();
    let mut inner = EnvelopeBand::new(
        Regime::Inner,
        format!("t in [{}, {}] step 1, n < {k} sqrt(t)", INNER_TIMES.0, INNER_TIMES.1),
        inner_band,
    );
    let mut intermediate = Vec::new();
    let (mut fx, mut fy, mut fr) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, kern) in inner_times.iter().zip(kernels) {
        let kern = kern?;
        let mut n = 0;
        while (n as f64) < k * t.sqrt() {
            let v = if n <= kern.resolved_to { kern.values[n] } else { stable_kernel_exact(p, s, t, n, n)?[0] };
            let env = ln_phi0(p, n) - 1.5 * t.ln() - t * rate;
            inner.record((v.ln() - env).exp());
            n += 1;
        }
        let upper = (m * t.powf(1.0 / s.beta)).ceil() as usize;
        for j in n..upper.min(kern.resolved_to + 1) {
            intermediate.push((t, j, kern.values[j]));
        }
        if t >= FIT_TIMES.0 && t <= FIT_TIMES.1 {
            fx.push(t);
            fy.push(kern.values[0].ln() + 1.5 * t.ln());
            fr.push(kern.values[0].ln());
        }
    }
    let (_, slope) = linear_fit(&fx, &fy);
    let (_, raw_slope) = linear_fit(&fx, &fr);
    let lx: Vec<f64> = fx.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = fx.iter().zip(&fr).map(|(t, y)| y + t * rate).collect();
    let (_, expo) = linear_fit(&lx, &ly);

    let mut outer = EnvelopeBand::new(
        Regime::Outer,
        format!("t in {:?}, n in [{}, {}], n > {m} t^(2/alpha)", OUTER_TIMES, OUTER_DISTANCES.0, OUTER_DISTANCES.1),
        outer_band,
    );
    for &t in &OUTER_TIMES {
        let lo = OUTER_DISTANCES.0.max((m * t.powf(1.0 / s.beta)).floor() as usize + 1);
        if lo > OUTER_DISTANCES.1 {
            continue;
        }
        let vals = stable_kernel_exact(p, s, t, lo, OUTER_DISTANCES.1)?;
        for (i, v) in vals.iter().enumerate() {
            let nf = (lo + i) as f64;
            let env = ln_phi0(p, lo + i) + t.ln() - (2.0 + 0.5 * s.alpha) * nf.ln() - 0.5 * nf * ln_q;
            outer.record((v.ln() - env).exp());
        }
    }

    let b = s.beta;
    let inner_fn = |v: f64| -s.c1_alpha * v.powf(-b / (1.0 - b)) - p.b2 * v;
    let v_formula = b / p.b2.powf(1.0 - b);
    let inner_saddle = maximize(inner_fn, 1e-3, 1e3 * v_formula.max(1.0), 1e-13);
    let outer_saddle = maximize(|u| outer_exponent(p, u), 1e-2, 1e3, 1e-13);
    let qf = p.q as f64;
    Ok(PtxReport {
        q: p.q,
        alpha: s.alpha,
        inner,
        outer,
        decay_rate_target: rate,
        decay_rate_fit: -slope,
        prefactor_exponent_fit: expo,
        raw_decay_rate_fit: -raw_slope,
        inner_saddle,
        inner_saddle_formula: (v_formula, -rate),
        outer_saddle,
        outer_saddle_formula: ((qf + 1.0) / (qf - 1.0), -(p.gamma * qf.sqrt()).ln()),
        intermediate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusMass {
    pub t: f64,
    pub a1: f64,
    pub a2: f64,
    pub beta_exponent: f64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub mass: f64,
}

/// `P(|Y_u| in [lo, hi])` on the infinite tree, summed over a window that
/// holds all but a negligible part of the law.
fn annulus_law(p: &TreeParams, u: f64, lo: usize, hi: usize) -> f64 {
    let centre = p.r0 * u;
    let spread = 40.0 * u.sqrt() + 60.0;
    let w_lo = ((centre - spread).max(0.0) as usize).max(lo);
    let w_hi = ((centre + spread) as usize).min(hi);
    if w_lo > w_hi {
        return 0.0;
    }
    distance_law_exact(p, u, w_lo, w_hi).iter().sum()
}

/// Mass of the stable kernel on distances `[floor(A1 t^b), ceil(A2 t^b)]`.
pub fn mass_repartition(p: &TreeParams, s: &StableParams, t: f64, a1: f64, a2: f64, beta_exponent: f64) -> Result<AnnulusMass> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if !(a1 > 0.0 && a2 > a1) {
        return Err(Error::param("A1, A2", format!("need 0 < A1 < A2, got A1={a1}, A2={a2}")));
    }
    let scale = t.powf(beta_exponent);
    let n_lo = (a1 * scale).floor() as usize;
    let n_hi = (a2 * scale).ceil() as usize;
    if n_hi > 50_000_000 {
        return Err(Error::Truncation(format!("annulus reaches distance {n_hi}")));
    }
    let mut err: Option<Error> = None;
    let mut f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let eta = match eta_density(s, t, u) {
            Ok(e) => e.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        if eta == 0.0 {
            return 0.0;
        }
        annulus_law(p, u, n_lo, n_hi) * eta
    };
    // the walk sits near r0 u, so the annulus is visited for u in [lo, hi] / r0
    let u_lo = n_lo as f64 / p.r0;
    let u_hi = n_hi as f64 / p.r0;
    let split = t.powf(1.0 / s.beta);
    let mut pts = vec![0.0];
    for k in (1..=30).rev() {
        pts.push(split * 0.5f64.powi(k));
    }
    pts.push(split);
    for x in [0.5 * u_lo, u_lo, u_hi, 2.0 * u_hi] {
        if x > *pts.last().unwrap() {
            pts.push(x);
        }
    }
    let opts = QuadOptions::rel(1e-8).with_abs(1e-13);
    let head = integrate_points(&mut f, &pts, &opts)?;
    let last = *pts.last().unwrap();
    let tail = integrate_to_infinity(&mut f, last, last.max(1.0), 4.0 * last, &opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(AnnulusMass {
        t,
        a1,
        a2,
        beta_exponent,
        n_lo,
        n_hi,
        mass: head.value + tail.value,
    })
}

/// `(2/alpha) (A1^{-alpha/2} - A2^{-alpha/2})`.
pub fn levy_tail_factor(s: &StableParams, a1: f64, a2: f64) -> f64 {
    (a1.powf(-s.beta) - a2.powf(-s.beta)) / s.beta
}

/// `beta / Gamma(1 - beta)`, the constant of the subordinator jump density.
pub fn levy_constant(s: &StableParams) -> f64 {
    s.beta / gamma(1.0 - s.beta)
}

/// One row of an exported kernel table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub q: u32,
    pub alpha: f64,
    pub t: f64,
    pub n: usize,
    pub p_spectral: f64,
    pub p_quadrature: f64,
    pub envelope_value: f64,
    pub ratio: f64,
    pub regime: String,
}

/// Spectral and quadrature kernels side by side for `n = 0..=n_out`, with
/// the envelope for whichever regime `n` falls in.
pub fn kernel_table(p: &TreeParams, s: &StableParams, times: &[f64], n_max: usize, n_out: usize) -> Result<Vec<KernelRow>> {
    let spec = SpectralData::new(p, n_max)?;
    let flow = HeatFlow::new(p, n_max, heat_horizon(p, n_max));
    let rate = p.b2.powf(s.beta);
    let ln_q = (p.q as f64).ln();
    let per_t: Vec<Result<Vec<KernelRow>>> = times
        .par_iter()
        .map(|&t| {
            let sp = stable_kernel_from_spectral(p, &spec, s, t)?;
            let qk = stable_kernel_quadrature_parts(p, s, t, &flow, n_out, 1.0)?;
            Ok((0..=n_out.min(n_max))
                .map(|n| {
                    let nf = n as f64;
                    let (regime, ln_env) = if nf < t.sqrt() {
                        ("inner", ln_phi0(p, n) - 1.5 * t.ln() - t * rate)
                    } else if nf > t.powf(1.0 / s.beta) && n >= 1 {
                        ("outer", ln_phi0(p, n) + t.ln() - (2.0 + 0.5 * s.alpha) * nf.ln() - 0.5 * nf * ln_q)
                    } else {
                        ("intermediate", f64::NAN)
                    };
                    let env = ln_env.exp();
                    let p_spec = if n <= sp.resolved_to { sp.values[n] } else { f64::NAN };
                    KernelRow {
                        q: p.q,
                        alpha: s.alpha,
                        t,
                        n,
                        p_spectral: p_spec,
                        p_quadrature: qk.kernel.values[n],
                        envelope_value: env,
                        ratio: qk.kernel.values[n] / env,
                        regime: regime.to_string(),
                    }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_t {
        rows.extend(r?);
    }
    Ok(rows)
}
