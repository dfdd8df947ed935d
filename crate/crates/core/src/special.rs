//! Modified Bessel function of the first kind, evaluated in log space, and
//! the three envelope comparisons for `I_nu` used by the kernel estimates.
//!
//! Branches:
//! - ascending power series for `z < max(30, nu^2 / 2)` and `nu < DEBYE_MIN_ORDER`,
//!   summed with a running rescale so it never overflows;
//! - the large-argument expansion `e^z / sqrt(2 pi z) * sum (-1)^k a_k(nu) / z^k`
//!   above that seam;
//! - the uniform (Debye) expansion in `nu` for orders `>= DEBYE_MIN_ORDER`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Orders at or above this use the uniform expansion.
pub const DEBYE_MIN_ORDER: f64 = 50.0;
const DEBYE_TERMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub nu: f64,
    pub z: f64,
    /// `e^{-z} I_nu(z)`.
    pub scaled_value: f64,
    /// `ln I_nu(z)`; `-inf` when `I_nu(z) = 0`.
    pub log_value: f64,
}

/// Which expansion [`ln_bessel_i`] uses for `(nu, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselBranch {
    Zero,
    Series,
    LargeArgument,
    Uniform,
}

pub fn series_seam(nu: f64) -> f64 {
    (0.5 * nu * nu).max(30.0)
}

pub fn branch(nu: f64, z: f64) -> BesselBranch {
    if z == 0.0 {
        BesselBranch::Zero
    } else if nu >= DEBYE_MIN_ORDER {
        BesselBranch::Uniform
    } else if z < series_seam(nu) {
        BesselBranch::Series
    } else {
        BesselBranch::LargeArgument
    }
}

pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<BesselEval> {
    if !(nu >= 0.0) || !(z >= 0.0) || !nu.is_finite() || !z.is_finite() {
        return Err(Error::Domain(format!("I_nu(z) needs nu >= 0 and z >= 0, got nu={nu}, z={z}")));
    }
    let log_value = ln_bessel_i(nu, z);
    Ok(BesselEval {
        nu,
        z,
        scaled_value: (log_value - z).exp(),
        log_value,
    })
}

/// `ln I_nu(z)` for `nu >= 0`, `z >= 0`. No domain checks.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    match branch(nu, z) {
        BesselBranch::Zero => {
            if nu == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        BesselBranch::Series => ln_bessel_i_series(nu, z),
        BesselBranch::LargeArgument => ln_bessel_i_large_z(nu, z),
        BesselBranch::Uniform => ln_bessel_i_uniform(nu, z),
    }
}

/// `ln(e^{-z} I_nu(z))`, computed without forming `ln I_nu` when the
/// argument dominates.
pub fn ln_bessel_i_scaled(nu: f64, z: f64) -> f64 {
    match branch(nu, z) {
        BesselBranch::LargeArgument => ln_large_z_scaled(nu, z),
        BesselBranch::Uniform => ln_uniform_scaled(nu, z),
        _ => ln_bessel_i(nu, z) - z,
    }
}

/// Power series `sum_k (z/2)^{2k+nu} / (k! Gamma(k+nu+1))`; all terms are
/// positive so the relative error stays at a few ulps per term.
pub fn ln_bessel_i_series(nu: f64, z: f64) -> f64 {
    let x = 0.25 * z * z;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut ln_scale = 0.0f64;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= x / (k * (k + nu));
        sum += term;
        if sum > 1e280 {
            term *= 1e-280;
            sum *= 1e-280;
            ln_scale += 280.0 * std::f64::consts::LN_10;
        }
        // past the peak the ratio is < 1 and decreasing
        if term < 1e-17 * sum && x < k * (k + nu) {
            break;
        }
    }
    nu * (0.5 * z).ln() - ln_gamma(nu + 1.0) + sum.ln() + ln_scale
}

fn large_z_sum(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * z);
        if term == 0.0 {
            break;
        }
        if term.abs() >= prev {
            // asymptotic series started to diverge
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn ln_large_z_scaled(nu: f64, z: f64) -> f64 {
    -0.5 * (2.0 * PI * z).ln() + large_z_sum(nu, z).ln()
}

fn ln_bessel_i_large_z(nu: f64, z: f64) -> f64 {
    z + ln_large_z_scaled(nu, z)
}

fn debye_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        // u_{k+1}(p) = p^2 (1 - p^2) u_k'(p) / 2 + (1/8) int_0^p (1 - 5 t^2) u_k(t) dt
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            for (j, &c) in u.iter().enumerate() {
                if j >= 1 {
                    let d = c * j as f64;
                    // d p^{j-1} * (p^2 - p^4) / 2
                    next[j + 1] += 0.5 * d;
                    next[j + 3] -= 0.5 * d;
                }
                // (1/8) int (c t^j - 5 c t^{j+2})
                next[j + 1] += c / (8.0 * (j as f64 + 1.0));
                next[j + 3] -= 5.0 * c / (8.0 * (j as f64 + 3.0));
            }
            polys.push(next);
        }
        polys
    })
}

fn poly_eval(c: &[f64], p: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * p + a)
}

/// `ln(e^{-z} I_nu(z))` from the uniform expansion in the order.
fn ln_uniform_scaled(nu: f64, z: f64) -> f64 {
    let w = z / nu;
    let root = (1.0 + w * w).sqrt();
    let p = 1.0 / root;
    // nu * eta - z with eta = sqrt(1+w^2) + ln(w / (1 + sqrt(1+w^2)));
    // sqrt(nu^2+z^2) - z written without cancellation
    let rz = nu * nu / ((nu * nu + z * z).sqrt() + z);
    let exponent = rz + nu * (w / (1.0 + root)).ln();
    let polys = debye_polynomials();
    let mut sum = 0.0;
    let mut pow = 1.0;
    for u in polys.iter() {
        sum += poly_eval(u, p) * pow;
        pow /= nu;
    }
    exponent - 0.5 * (2.0 * PI * nu).ln() - 0.5 * root.ln() + sum.ln()
}

fn ln_bessel_i_uniform(nu: f64, z: f64) -> f64 {
    ln_uniform_scaled(nu, z) + z
}

/// Ratios `I_k(z) / I_{k-1}(z)` for `k = lo..=hi` by backward recurrence
/// started well above `hi`.
pub fn bessel_i_ratios(z: f64, lo: usize, hi: usize) -> Vec<f64> {
    assert!(lo >= 1 && hi >= lo && z > 0.0);
    // errors contract by about exp(-(start^2 - hi^2) / z)
    let start = hi + 30 + (7.0 * z.sqrt()) as usize;
    let mut r = 0.0f64;
    let mut out = vec![0.0; hi - lo + 1];
    for k in (lo..=start).rev() {
        r = 1.0 / (2.0 * k as f64 / z + r);
        if k <= hi {
            out[k - lo] = r;
        }
    }
    out
}

/// `ln I_k(z)` for `k = lo..=hi`: the ratio recurrence between direct
/// evaluations every `RANGE_BLOCK` orders, which caps the drift from
/// accumulating `ln(I_k / I_{k-1})`.
pub fn ln_bessel_i_range(z: f64, lo: usize, hi: usize) -> Vec<f64> {
    const RANGE_BLOCK: usize = 512;
    let mut out = Vec::with_capacity(hi - lo + 1);
    let ratios = if hi > lo { bessel_i_ratios(z, lo + 1, hi) } else { Vec::new() };
    let mut acc = 0.0;
    for k in lo..=hi {
        if (k - lo) % RANGE_BLOCK == 0 {
            acc = ln_bessel_i(k as f64, z);
        } else {
            acc += ratios[k - lo - 1].ln();
        }
        out.push(acc);
    }
    out
}

/// `I_nu(z) <= C z^{-1/2} e^z` with `C = 1`.
pub const ILEQ_CONSTANT: f64 = 1.0;

pub fn check_ileq(nu: f64, z: f64) -> Result<bool> {
    if !(nu > 0.0 && z > 0.0) {
        return Err(Error::Precondition(format!("need nu > 0 and z > 0, got nu={nu}, z={z}")));
    }
    let lhs = ln_bessel_i_scaled(nu, z) + 0.5 * z.ln();
    Ok(lhs <= ILEQ_CONSTANT.ln())
}

/// Measured range of [`check_iequiv`] over `nu in [1, 50]`, `z in [1e-2, 1e6]`.
pub const IEQUIV_BAND: (f64, f64) = (0.35, 0.5);

/// Band for [`check_ieq`]: `[e^{-1/(2a)} / (2 sqrt(2 pi)), 0.4]`.
pub fn ieq_band(a: f64) -> (f64, f64) {
    let inv = 1.0 / (2.0 * PI).sqrt();
    (0.5 * (-0.5 / a).exp() * inv, 0.4)
}

/// `I_nu(z)` divided by `e^{sqrt(nu^2+z^2)} (z / (nu + sqrt(nu^2+z^2)))^nu / sqrt(z+nu)`.
pub fn check_iequiv(nu: f64, z: f64) -> Result<f64> {
    if !(nu >= 1.0 && z > 0.0) {
        return Err(Error::Precondition(format!("need nu >= 1 and z > 0, got nu={nu}, z={z}")));
    }
    let s = (nu * nu + z * z).sqrt();
    // sqrt(nu^2+z^2) - z
    let excess = nu * nu / (s + z);
    let ln_env_scaled = excess + nu * (z / (nu + s)).ln() - 0.5 * (z + nu).ln();
    Ok((ln_bessel_i_scaled(nu, z) - ln_env_scaled).exp())
}

/// `I_nu(z) / (z^{-1/2} e^z)` in the regime `z > max(1, a nu^2)`.
pub fn check_ieq(nu: f64, z: f64, a: f64) -> Result<f64> {
    if !(nu >= 1.0) || !(a > 0.0 && a < 1.0) {
        return Err(Error::Precondition(format!("need nu >= 1 and 0 < a < 1, got nu={nu}, a={a}")));
    }
    if !(z > 1f64.max(a * nu * nu)) {
        return Err(Error::Precondition(format!(
            "z = {z} is outside the regime z > max(1, a nu^2) = {}",
            1f64.max(a * nu * nu)
        )));
    }
    Ok((ln_bessel_i_scaled(nu, z) + 0.5 * z.ln()).exp())
}
