//! One-sided stable subordinator of index `beta = alpha / 2`.
//!
//! Everything is reduced to time 1 through `eta_t(u) = t^{-1/beta} eta_1(u t^{-1/beta})`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate_points, integrate_to_infinity, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    /// `((2 - alpha) / 2) (alpha / 2)^{alpha / (2 - alpha)}`.
    pub c1_alpha: f64,
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 2), got {alpha}")));
        }
        let beta = 0.5 * alpha;
        let c1_alpha = (1.0 - beta) * beta.powf(beta / (1.0 - beta));
        Ok(StableParams { alpha, beta, c1_alpha })
    }

    /// `x = u t^{-1/beta}`, the time-1 argument.
    pub fn reduced(&self, t: f64, u: f64) -> f64 {
        u * t.powf(-1.0 / self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    BranchCut,
    Zolotarev,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEval {
    pub t: f64,
    pub u: f64,
    pub value: f64,
    pub method: DensityMethod,
}

/// Below this reduced argument the dispatcher uses the finite-interval
/// representation.
pub const ZOLOTAREV_SWITCH: f64 = 1.0;

fn quad_opts() -> QuadOptions {
    QuadOptions::rel(1e-11)
}

fn check_tu(t: f64, u: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    Ok(())
}

/// `t u^{-3/2} e^{-t^2/(4u)} / (2 sqrt(pi))`, the `alpha = 1` density.
pub fn eta_closed_form(t: f64, u: f64) -> f64 {
    t * u.powf(-1.5) * (-t * t / (4.0 * u)).exp() / (2.0 * PI.sqrt())
}

/// `A(phi)` written in `psi = pi - phi` so that the blow-up at `phi = pi`
/// is evaluated without cancellation.
fn kanter_a(beta: f64, psi: f64) -> f64 {
    let phi = PI - psi;
    let s1 = (beta * phi).sin();
    let s2 = ((1.0 - beta) * PI - (1.0 - beta) * psi).sin();
    let s = psi.sin();
    (s1.powf(beta) * s2.powf(1.0 - beta) / s).powf(1.0 / (1.0 - beta))
}

fn kanter_a_phi(beta: f64, phi: f64) -> f64 {
    let s1 = (beta * phi).sin();
    let s2 = ((1.0 - beta) * phi).sin();
    (s1.powf(beta) * s2.powf(1.0 - beta) / phi.sin()).powf(1.0 / (1.0 - beta))
}

/// `ln(sin y / y)` for `|y| < 0.2`.
fn ln_sinc_small(y: f64) -> f64 {
    let y2 = y * y;
    -y2 * (1.0 / 6.0 + y2 * (1.0 / 180.0 + y2 * (1.0 / 2835.0 + y2 * (1.0 / 37800.0 + y2 / 467775.0))))
}

/// `(A, A - c1)` at `phi <= pi/2`, with the difference accurate near `phi = 0`.
fn kanter_pair_low(p: &StableParams, phi: f64) -> (f64, f64) {
    let b = p.beta;
    if phi < 0.2 {
        let d = (b * ln_sinc_small(b * phi) + (1.0 - b) * ln_sinc_small((1.0 - b) * phi) - ln_sinc_small(phi)) / (1.0 - b);
        let diff = p.c1_alpha * d.exp_m1();
        (p.c1_alpha + diff, diff)
    } else {
        let a = kanter_a_phi(b, phi);
        (a, a - p.c1_alpha)
    }
}

/// Breakpoints on `(0, pi/2)`, geometric towards 0 and reaching below
/// `finest`.
fn half_points(finest: f64) -> Vec<f64> {
    let levels = ((0.5 * PI / finest).log2().ceil() as i32).clamp(60, 1000);
    let mut pts = vec![0.0];
    for k in (1..=levels).rev() {
        pts.push(0.5 * PI * 0.5f64.powi(k));
    }
    pts.push(0.5 * PI);
    pts
}

/// `int_0^pi g(A(phi), A(phi) - c1) dphi`, split at `pi/2` so that both
/// endpoints are resolved in their own variable. `finest` is the smallest
/// feature of `g` near `phi = 0`.
fn zolotarev_integral(
    p: &StableParams,
    g: impl Fn(f64, f64) -> f64,
    finest: f64,
    opts: &QuadOptions,
) -> Result<crate::quad::QuadResult> {
    let guard = |v: f64| if v.is_finite() { v } else { 0.0 };
    let pts = half_points(finest);
    let low = integrate_points(
        |phi| {
            let (a, d) = kanter_pair_low(p, phi);
            guard(g(a, d))
        },
        &pts,
        opts,
    )?;
    let pts = half_points(1.0);
    let high = integrate_points(
        |psi| {
            let a = kanter_a(p.beta, psi);
            if a.is_finite() {
                guard(g(a, a - p.c1_alpha))
            } else {
                0.0
            }
        },
        &pts,
        opts,
    )?;
    Ok(crate::quad::QuadResult {
        value: low.value + high.value,
        error: low.error + high.error,
        evaluations: low.evaluations + high.evaluations,
    })
}

/// `ln eta_1(x)` from the finite-interval representation.
pub fn ln_eta1_zolotarev(p: &StableParams, x: f64) -> Result<f64> {
    let b = p.beta;
    let xi = x.powf(-b / (1.0 - b));
    let c1 = p.c1_alpha;
    // A - c1 ~ c1 beta phi^2 / 2 near 0, so the integrand is a spike of
    // width (c1 beta xi / 2)^{-1/2} there
    let width = (0.5 * c1 * b * xi).sqrt().recip();
    let r = zolotarev_integral(p, |a, diff| a * (-diff * xi).exp(), 1e-3 * width, &QuadOptions::rel(1e-10))?;
    if !(r.value > 0.0) {
        return Err(Error::Quadrature {
            value: r.value,
            error: r.error,
            tolerance: quad_opts().rel_tol,
        });
    }
    Ok((b / (1.0 - b)).ln() - x.ln() / (1.0 - b) - PI.ln() - c1 * xi + r.value.ln())
}

/// Smallest reduced argument at which the branch-cut integral is trusted:
/// the answer must not be dwarfed by the oscillating integrand.
pub fn branch_cut_min_x(p: &StableParams) -> f64 {
    let b = p.beta;
    let cancel = (p.c1_alpha / 8.0).powf((1.0 - b) / b);
    let c = (PI * b).cos();
    if c >= 0.0 {
        return cancel;
    }
    let growth = ((1.0 - b) * (b * -c).powf(1.0 / (1.0 - b)) / b).powf((1.0 - b) / b);
    cancel.max(growth)
}

/// `eta_1(x)` from the inverse Laplace transform along the branch cut.
pub fn eta1_branch_cut(p: &StableParams, x: f64) -> Result<f64> {
    let b = p.beta;
    let tau = x.powf(-b);
    if tau < 0.1 {
        return Ok(branch_cut_series(b, x, tau));
    }
    let (sn, cs) = (PI * b).sin_cos();
    let integrand = |s: f64| {
        let sb = tau * s.powf(b);
        (-s - sb * cs).exp() * (sb * sn).sin()
    };
    // location of the exponential peak when cos(pi beta) < 0
    let peak = if cs < 0.0 { (b * tau * -cs).powf(1.0 / (1.0 - b)) } else { 0.0 };
    let tail = 60.0f64.max(4.0 * peak);
    // size of the integrand, which bounds the attainable absolute accuracy
    let scale = if cs < 0.0 { (peak * (1.0 - b) / b).exp() } else { 1.0 };
    let opts = quad_opts().with_abs(1e-15 * scale);
    let r = integrate_to_infinity(integrand, 0.0, 1.0, tail, &opts)?;
    if r.error > 1e-8 * r.value.abs() || !(r.value > 0.0) {
        return Err(Error::Quadrature {
            value: r.value / (PI * x),
            error: r.error / (PI * x),
            tolerance: 1e-8,
        });
    }
    Ok(r.value / (PI * x))
}

/// The branch-cut integral with `e^{-t r^beta cos} sin(t r^beta sin)` expanded
/// in powers of `tau = x^{-beta}`:
/// `(1/(pi x)) sum_k (-1)^{k+1} Gamma(k beta + 1) sin(pi k beta) tau^k / k!`.
fn branch_cut_series(b: f64, x: f64, tau: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let mut sum = 0.0;
    let mut ln_fact = 0.0;
    for k in 1..=60 {
        let kf = k as f64;
        ln_fact += kf.ln();
        let mag = (ln_gamma(kf * b + 1.0) - ln_fact + kf * tau.ln()).exp();
        let term = mag * (PI * kf * b).sin();
        sum += if k % 2 == 1 { term } else { -term };
        if mag < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (PI * x)
}

pub fn eta_density_with(p: &StableParams, t: f64, u: f64, method: DensityMethod) -> Result<DensityEval> {
    check_tu(t, u)?;
    let x = p.reduced(t, u);
    let scale = t.powf(-1.0 / p.beta);
    let value = match method {
        DensityMethod::ClosedForm => {
            if p.alpha != 1.0 {
                return Err(Error::Precondition(format!("closed form needs alpha = 1, got {}", p.alpha)));
            }
            eta_closed_form(t, u)
        }
        DensityMethod::Zolotarev => scale * ln_eta1_zolotarev(p, x)?.exp(),
        DensityMethod::BranchCut => scale * eta1_branch_cut(p, x)?,
    };
    Ok(DensityEval { t, u, value, method })
}

/// Density of the subordinator at time `t`.
pub fn eta_density(p: &StableParams, t: f64, u: f64) -> Result<DensityEval> {
    check_tu(t, u)?;
    let method = if p.alpha == 1.0 {
        DensityMethod::ClosedForm
    } else if p.reduced(t, u) < ZOLOTAREV_SWITCH.max(branch_cut_min_x(p)) {
        DensityMethod::Zolotarev
    } else {
        DensityMethod::BranchCut
    };
    eta_density_with(p, t, u, method)
}

/// `ln eta_t(u)`, finite even where the density underflows.
pub fn ln_eta_density(p: &StableParams, t: f64, u: f64) -> Result<f64> {
    check_tu(t, u)?;
    let x = p.reduced(t, u);
    let ln_scale = -t.ln() / p.beta;
    if p.alpha == 1.0 {
        return Ok(t.ln() - 1.5 * u.ln() - t * t / (4.0 * u) - (2.0 * PI.sqrt()).ln());
    }
    if x < ZOLOTAREV_SWITCH.max(branch_cut_min_x(p)) {
        Ok(ln_scale + ln_eta1_zolotarev(p, x)?)
    } else {
        Ok(ln_scale + eta1_branch_cut(p, x)?.ln())
    }
}

/// `P(S_t <= u)`.
pub fn subordinator_cdf(p: &StableParams, t: f64, u: f64) -> Result<f64> {
    check_tu(t, u)?;
    let b = p.beta;
    let xi = p.reduced(t, u).powf(-b / (1.0 - b));
    let r = zolotarev_integral(p, |a, _| (-a * xi).exp(), 1.0, &quad_opts().with_abs(1e-15))?;
    Ok((r.value / PI).clamp(0.0, 1.0))
}

/// One draw of `S_t` by Kanter's representation.
pub fn sample_subordinator_increment<R: Rng + ?Sized>(p: &StableParams, t: f64, rng: &mut R) -> f64 {
    let b = p.beta;
    loop {
        let psi = PI * rng.random::<f64>();
        let e: f64 = Exp1.sample(rng);
        let a = kanter_a(b, psi);
        let s1 = (a / e).powf((1.0 - b) / b);
        let s = t.powf(1.0 / b) * s1;
        if s > 0.0 && s.is_finite() {
            return s;
        }
    }
}

/// `beta / Gamma(1 - beta) * u^{-1-beta}`.
pub fn subordinator_levy_density(p: &StableParams, u: f64) -> f64 {
    p.beta / gamma(1.0 - p.beta) * u.powf(-1.0 - p.beta)
}

/// `lim_{t -> 0} eta_t(u) / t` by Richardson extrapolation over
/// `t in {1e-2, 1e-3, 1e-4}`.
pub fn levy_density_limit(p: &StableParams, u: f64) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(eta_density(p, t, u)?.value / t) };
    let (f2, f3, f4) = (f(1e-2)?, f(1e-3)?, f(1e-4)?);
    Ok(richardson3(f2, f3, f4, 10.0))
}

/// Two Richardson levels for `f(h) = f0 + c1 h + c2 h^2 + ...` sampled at
/// `h, h/r, h/r^2`.
pub fn richardson3(f0: f64, f1: f64, f2: f64, r: f64) -> f64 {
    let a = (r * f1 - f0) / (r - 1.0);
    let b = (r * f2 - f1) / (r - 1.0);
    (r * r * b - a) / (r * r - 1.0)
}

/// `int_0^inf w(u) eta_t(u) du`, split where the density changes
/// representation.
pub fn integrate_against_density(p: &StableParams, t: f64, weight: impl Fn(f64) -> f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let seam = ZOLOTAREV_SWITCH.max(branch_cut_min_x(p)) * t.powf(1.0 / p.beta);
    let mut err = None;
    let mut f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        match eta_density(p, t, u) {
            Ok(e) => e.value * weight(u),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let mut pts = vec![0.0];
    for k in (1..=30).rev() {
        pts.push(seam * 0.5f64.powi(k));
    }
    pts.push(seam);
    let head = integrate_points(&mut f, &pts, &QuadOptions::rel(1e-10))?.value;
    let tail = integrate_to_infinity(&mut f, seam, seam, 1e3 * seam, &QuadOptions::rel(1e-10).with_abs(1e-12))?.value;
    match err {
        Some(e) => Err(e),
        None => Ok(head + tail),
    }
}

/// `int e^{-lambda u} eta_t(u) du`, which should equal `e^{-t lambda^beta}`.
pub fn laplace_transform(p: &StableParams, t: f64, lambda: f64) -> Result<f64> {
    integrate_against_density(p, t, |u| (-lambda * u).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaEnvelopeReport {
    pub alpha: f64,
    pub c: f64,
    /// min/max of `eta / small-u envelope` where `t^{-2/alpha} u < c`.
    pub small_regime: (f64, f64),
    /// min/max of `eta / (t u^{-1-alpha/2})` where `t^{-2/alpha} u > c`.
    pub large_regime: (f64, f64),
    pub small_band: (f64, f64),
    pub large_band: (f64, f64),
    pub points: usize,
    pub pass: bool,
}

/// `ln` of `t^{1/(2-alpha)} u^{-(4-alpha)/(4-2alpha)} exp(-c1 t^{2/(2-alpha)} u^{-alpha/(2-alpha)})`.
pub fn ln_small_envelope(p: &StableParams, t: f64, u: f64) -> f64 {
    let a = p.alpha;
    t.ln() / (2.0 - a) - (4.0 - a) / (4.0 - 2.0 * a) * u.ln() - p.c1_alpha * t.powf(2.0 / (2.0 - a)) * u.powf(-a / (2.0 - a))
}

pub fn ln_large_envelope(p: &StableParams, t: f64, u: f64) -> f64 {
    t.ln() - (1.0 + 0.5 * p.alpha) * u.ln()
}

/// Frozen bands for the two envelope ratios, keyed by `alpha`; they were
/// measured on `t in [0.1, 100]`, reduced argument in `[1e-3, 1e3]`, `c = 1`
/// and then widened by a factor 1.25 on each side.
pub fn eta_envelope_bands(p: &StableParams) -> ((f64, f64), (f64, f64)) {
    let (small, large) = measured_eta_bands(p.alpha);
    ((small.0 / 1.25, small.1 * 1.25), (large.0 / 1.25, large.1 * 1.25))
}

fn measured_eta_bands(alpha: f64) -> ((f64, f64), (f64, f64)) {
    // interpolation between the measured alphas is not meaningful; unknown
    // alphas get the union of the measured bands
    const TABLE: &[(f64, (f64, f64), (f64, f64))] = &[
        (0.5, (0.1569, 0.1778), (0.0958, 0.1801)),
        (1.0, (0.2820, 0.2821), (0.2196, 0.2821)),
        (1.5, (0.4488, 0.4666), (0.2080, 0.4550)),
    ];
    for &(a, s, l) in TABLE {
        if (a - alpha).abs() < 1e-12 {
            return (s, l);
        }
    }
    let lo_s = TABLE.iter().map(|r| r.1 .0).fold(f64::INFINITY, f64::min);
    let hi_s = TABLE.iter().map(|r| r.1 .1).fold(0.0, f64::max);
    let lo_l = TABLE.iter().map(|r| r.2 .0).fold(f64::INFINITY, f64::min);
    let hi_l = TABLE.iter().map(|r| r.2 .1).fold(0.0, f64::max);
    ((lo_s, hi_s), (lo_l, hi_l))
}

/// Ratios of `eta_t(u)` to the small-u and large-u envelopes on a grid.
pub fn check_eta_envelopes(p: &StableParams, c: f64) -> Result<EtaEnvelopeReport> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    let mut small = (f64::INFINITY, 0.0f64);
    let mut large = (f64::INFINITY, 0.0f64);
    let mut points = 0;
    for i in 0..=6 {
        let t = 0.1 * 10f64.powf(i as f64 * 0.5);
        for j in 0..=24 {
            let x = 1e-3 * 10f64.powf(j as f64 * 0.25);
            let u = x * t.powf(1.0 / p.beta);
            let ln_eta = ln_eta_density(p, t, u)?;
            if x < c {
                let r = (ln_eta - ln_small_envelope(p, t, u)).exp();
                small = (small.0.min(r), small.1.max(r));
            } else {
                let r = (ln_eta - ln_large_envelope(p, t, u)).exp();
                large = (large.0.min(r), large.1.max(r));
            }
            points += 1;
        }
    }
    let (small_band, large_band) = eta_envelope_bands(p);
    let inside = |m: (f64, f64), b: (f64, f64)| m.0 > m.1 || (m.0 >= b.0 && m.1 <= b.1);
    let pass = inside(small, small_band) && inside(large, large_band);
    Ok(EtaEnvelopeReport {
        alpha: p.alpha,
        c,
        small_regime: small,
        large_regime: large,
        small_band,
        large_band,
        points,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params() {
        let p = StableParams::new(1.0).unwrap();
        assert_eq!(p.beta, 0.5);
        assert!((p.c1_alpha - 0.25).abs() < 1e-15);
        assert!(StableParams::new(0.0).is_err());
        assert!(StableParams::new(2.0).is_err());
        for a in [0.3, 0.5, 1.5, 1.9] {
            let p = StableParams::new(a).unwrap();
            assert!(p.c1_alpha > 0.0 && p.beta > 0.0 && p.beta < 1.0);
            // A(0+) equals c1
            assert!((kanter_a_phi(p.beta, 1e-7) / p.c1_alpha - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_examples() {
        let p = StableParams::new(1.0).unwrap();
        let v = eta_density(&p, 1.0, 1.0).unwrap();
        assert_eq!(v.method, DensityMethod::ClosedForm);
        assert!((v.value - 0.219696).abs() < 1e-6);
        // 2 e^{-1} / (2 sqrt(pi))
        assert!((eta_density(&p, 2.0, 1.0).unwrap().value - 0.207554).abs() < 1e-6);
        assert!(eta_density(&p, 0.0, 1.0).is_err());
        assert!(eta_density(&p, 1.0, -1.0).is_err());
    }

    #[test]
    fn representations_match_closed_form() {
        let p = StableParams::new(1.0).unwrap();
        let xmin = branch_cut_min_x(&p);
        let mut x = 1e-3;
        while x < 1e5 {
            let exact = eta_closed_form(1.0, x);
            let z = ln_eta1_zolotarev(&p, x).unwrap().exp();
            assert!((z / exact - 1.0).abs() < 1e-8, "zolotarev x={x}: {z} vs {exact}");
            if x >= xmin {
                let b = eta1_branch_cut(&p, x).unwrap();
                assert!((b / exact - 1.0).abs() < 1e-7, "branch cut x={x}: {b} vs {exact}");
            }
            x *= 1.37;
        }
    }

    #[test]
    fn representations_agree_on_overlap() {
        for a in [0.5, 0.8, 1.2, 1.5, 1.8] {
            let p = StableParams::new(a).unwrap();
            let lo = branch_cut_min_x(&p).max(0.1);
            let mut x = lo;
            while x < 30.0 {
                let z = ln_eta1_zolotarev(&p, x).unwrap().exp();
                let b = eta1_branch_cut(&p, x).unwrap();
                assert!((z / b - 1.0).abs() < 1e-6, "alpha={a} x={x}: {z} vs {b}");
                x *= 1.5;
            }
        }
    }

    #[test]
    fn scaling_identity() {
        let p = StableParams::new(1.5).unwrap();
        for &(t, u) in &[(0.3, 0.7), (2.0, 5.0), (7.0, 40.0)] {
            let lhs = eta_density(&p, t, u).unwrap().value;
            let k = t.powf(-2.0 / p.alpha);
            let rhs = k * eta_density(&p, 1.0, k * u).unwrap().value;
            assert!((lhs / rhs - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cdf_matches_alpha_one_law() {
        // S_1 = 1/(4G), G ~ Gamma(1/2): P(S <= x) = erfc(1/(2 sqrt x))
        use statrs::function::erf::erfc;
        let p = StableParams::new(1.0).unwrap();
        for &x in &[0.01, 0.1, 1.0, 10.0, 1000.0] {
            let f = subordinator_cdf(&p, 1.0, x).unwrap();
            let exact = erfc(0.5 / x.sqrt());
            assert!((f - exact).abs() < 1e-10, "x={x}: {f} vs {exact}");
        }
    }

    #[test]
    fn sampler_alpha_one_matches_gamma_oracle() {
        use statrs::distribution::{ContinuousCDF, Gamma};
        let p = StableParams::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 1.7;
        let n = 20_000;
        // t^2/(4S) ~ Gamma(1/2, 1)
        let g = Gamma::new(0.5, 1.0).unwrap();
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                let s = sample_subordinator_increment(&p, t, &mut rng);
                assert!(s > 0.0);
                t * t / (4.0 * s)
            })
            .collect();
        v.sort_by(f64::total_cmp);
        let d = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = g.cdf(x);
                (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn levy_density_values() {
        let p = StableParams::new(1.0).unwrap();
        assert!((subordinator_levy_density(&p, 1.0) - 0.282095).abs() < 1e-6);
        assert!((subordinator_levy_density(&p, 4.0) - 0.035262).abs() < 1e-6);
    }

    #[test]
    fn envelope_alpha_one_is_exact() {
        let p = StableParams::new(1.0).unwrap();
        for &(t, u) in &[(1.0, 0.01), (3.0, 0.5), (50.0, 1.0)] {
            let r = (ln_eta_density(&p, t, u).unwrap() - ln_small_envelope(&p, t, u)).exp();
            assert!((r - 0.5 / PI.sqrt()).abs() < 1e-12);
        }
        let r = (ln_eta_density(&p, 1.0, 100.0).unwrap() - ln_large_envelope(&p, 1.0, 100.0)).exp();
        assert!((r / 0.28209 - 1.0).abs() < 0.01);
    }

    fn integrate_density(p: &StableParams, t: f64, weight: impl Fn(f64) -> f64) -> f64 {
        integrate_against_density(p, t, weight).unwrap()
    }

    #[test]
    fn normalization() {
        for a in [0.5, 1.0, 1.5] {
            let p = StableParams::new(a).unwrap();
            let mass = integrate_density(&p, 1.0, |_| 1.0);
            assert!((mass - 1.0).abs() < 1e-6, "alpha={a}: {mass}");
        }
    }

    #[test]
    fn laplace_round_trip() {
        for a in [0.5, 1.0, 1.5] {
            let p = StableParams::new(a).unwrap();
            for &t in &[0.5, 1.0, 5.0] {
                for &lambda in &[0.5, 1.0, 2.0] {
                    let lt = integrate_density(&p, t, |u| (-lambda * u).exp());
                    let exact = (-t * lambda.powf(p.beta)).exp();
                    assert!((lt / exact - 1.0).abs() < 1e-6, "alpha={a} t={t} lambda={lambda}: {lt} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn zolotarev_resolves_the_spike_at_tiny_x() {
        // Laplace's method: int A e^{-(A - c1) xi} ~ c1 sqrt(pi / (2 c1 beta xi));
        // xi stays small enough for c1 xi to cancel exactly below
        for a in [1.5, 1.8, 1.95] {
            let p = StableParams::new(a).unwrap();
            let b = p.beta;
            for xi in [1e6, 1e7, 1e8] {
                let x = f64::powf(xi, -(1.0 - b) / b);
                let prefix = (b / (1.0 - b)).ln() - x.ln() / (1.0 - b) - PI.ln() - p.c1_alpha * xi;
                let ln_r = ln_eta1_zolotarev(&p, x).unwrap() - prefix;
                let ln_asym = (p.c1_alpha * (PI / (2.0 * p.c1_alpha * b * xi)).sqrt()).ln();
                assert!((ln_r - ln_asym).abs() < 1e-3, "alpha={a} x={x}: {ln_r} vs {ln_asym}");
            }
            // far beyond, the density underflows cleanly
            let x = f64::powf(1e40, -(1.0 - b) / b);
            assert_eq!(eta_density(&p, 1.0, x).unwrap().value, 0.0);
        }
    }

    #[test]
    fn levy_density_is_small_time_limit() {
        for a in [0.5, 1.0, 1.5] {
            let p = StableParams::new(a).unwrap();
            for &u in &[0.5, 1.0, 5.0] {
                let lim = levy_density_limit(&p, u).unwrap();
                let exact = subordinator_levy_density(&p, u);
                assert!((lim / exact - 1.0).abs() < 1e-3, "alpha={a} u={u}: {lim} vs {exact}");
            }
        }
    }

    #[test]
    fn envelope_bands_hold() {
        for a in [0.5, 1.0, 1.5] {
            let p = StableParams::new(a).unwrap();
            let r = check_eta_envelopes(&p, 1.0).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.small_regime.0 > 0.0 && r.large_regime.0 > 0.0);
        }
        let p = StableParams::new(0.5).unwrap();
        let r = (ln_eta_density(&p, 1.0, 1e3).unwrap() - ln_large_envelope(&p, 1.0, 1e3)).exp();
        let (_, band) = eta_envelope_bands(&p);
        assert!(r >= band.0 && r <= band.1);
        assert!(check_eta_envelopes(&p, 0.0).is_err());
    }

    #[test]
    fn sampler_matches_cdf() {
        for a in [0.5, 1.5] {
            let p = StableParams::new(a).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let n = 100_000;
            let mut v: Vec<f64> = (0..n).map(|_| sample_subordinator_increment(&p, 1.0, &mut rng)).collect();
            v.sort_by(f64::total_cmp);
            // CDF is monotone; evaluate on every 50th order statistic and bracket
            let mut d = 0.0f64;
            for i in (0..n).step_by(50) {
                let c = subordinator_cdf(&p, 1.0, v[i]).unwrap();
                d = d.max((c - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - c).abs());
            }
            // 1% critical value plus the gap from thinning
            assert!(d < 1.63 / (n as f64).sqrt() + 50.0 / n as f64, "alpha={a}: KS {d}");
        }
    }

    #[test]
    fn sampler_scaling_two_sample() {
        let p = StableParams::new(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = 3.0;
        let n = 20_000;
        let mut a: Vec<f64> = (0..n).map(|_| sample_subordinator_increment(&p, t, &mut rng)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| t.powf(2.0 / p.alpha) * sample_subordinator_increment(&p, 1.0, &mut rng)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        assert!(d < 1.63 * (2.0 / n as f64).sqrt(), "two-sample KS {d}");
    }
}
