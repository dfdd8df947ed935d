//! Heat kernel `h_t = e^{-t Delta}` of the nearest-neighbour Laplacian,
//! as a radial function of the distance to the starting vertex.
//!
//! Three computations are kept deliberately separate:
//! - [`HeatFlow`]: the distance process of the walk, stepped in time on the
//!   chain `0..=N` with mass leaving past `N` dropped;
//! - [`SpectralData`]: eigendecomposition of the same truncated generator;
//! - [`heat_kernel_exact`]: the closed form on the infinite tree,
//!   `h_t(n) = e^{-t} q^{-n/2} (2/z) sum_k q^{-k} (n+2k+1) I_{n+2k+1}(z)`, `z = gamma t`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::band::{EnvelopeBand, Regime};
use crate::error::{Error, Result};
use crate::special::{ln_bessel_i, ln_bessel_i_range, ln_bessel_i_scaled};
use crate::tree::TreeParams;

/// `(1 + n (q-1)/(q+1)) q^{-n/2}`.
pub fn phi0(p: &TreeParams, n: usize) -> f64 {
    ln_phi0(p, n).exp()
}

pub fn ln_phi0(p: &TreeParams, n: usize) -> f64 {
    let nf = n as f64;
    (1.0 + nf * p.r0).ln() - 0.5 * nf * (p.q as f64).ln()
}

/// `e^{-t} I_{|j|}(t)`, the continuous-time walk on the integers.
pub fn heat_kernel_1d(t: f64, j: i64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    Ok(ln_bessel_i_scaled(j.unsigned_abs() as f64, t).exp())
}

/// Tridiagonal radial Laplacian on `0..=n_max` with `f(n_max + 1) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGenerator {
    pub q: u32,
    pub n_max: usize,
    pub diag: Vec<f64>,
    /// coefficient of `f(n+1)` in row `n`
    pub off_upper: Vec<f64>,
    /// coefficient of `f(n-1)` in row `n`; entry 0 is unused
    pub off_lower: Vec<f64>,
    pub weights: Vec<f64>,
    pub ln_weights: Vec<f64>,
}

impl RadialGenerator {
    pub fn new(p: &TreeParams, n_max: usize) -> Self {
        let qf = p.q as f64;
        let len = n_max + 1;
        let mut off_upper = vec![-qf / (qf + 1.0); len];
        off_upper[0] = -1.0;
        let mut off_lower = vec![-1.0 / (qf + 1.0); len];
        off_lower[0] = 0.0;
        let ln_weights: Vec<f64> = (0..len).map(|n| p.ln_sphere_size(n)).collect();
        RadialGenerator {
            q: p.q,
            n_max,
            diag: vec![1.0; len],
            off_upper,
            off_lower,
            weights: ln_weights.iter().map(|w| w.exp()).collect(),
            ln_weights,
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n_max;
        (0..=n)
            .map(|i| {
                let mut v = self.diag[i] * f[i];
                if i > 0 {
                    v += self.off_lower[i] * f[i - 1];
                }
                if i < n {
                    v += self.off_upper[i] * f[i + 1];
                }
                v
            })
            .collect()
    }

    /// Off-diagonal of `D^{1/2} L D^{-1/2}`.
    pub fn symmetric_off_diagonal(&self) -> Vec<f64> {
        (0..self.n_max)
            .map(|i| -(self.off_upper[i] * self.off_lower[i + 1]).sqrt())
            .collect()
    }
}

/// Eigendecomposition of the symmetrised truncated generator. Column `k`
/// of `vectors` is `v_k`; the `m`-orthonormal eigenfunction is
/// `psi_k(n) = v_k(n) / sqrt(m(n))`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n_max: usize,
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    ln_weights: Vec<f64>,
}

impl SpectralData {
    pub fn new(p: &TreeParams, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::param("n_max", "truncation depth must be at least 1"));
        }
        let gen = RadialGenerator::new(p, n_max);
        let off = gen.symmetric_off_diagonal();
        let len = n_max + 1;
        let mut s = DMatrix::<f64>::zeros(len, len);
        for i in 0..len {
            s[(i, i)] = gen.diag[i];
            if i < n_max {
                s[(i, i + 1)] = off[i];
                s[(i + 1, i)] = off[i];
            }
        }
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(len, len, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(SpectralData {
            n_max,
            eigenvalues,
            vectors,
            ln_weights: gen.ln_weights,
        })
    }

    pub fn psi(&self, k: usize, n: usize) -> f64 {
        self.vectors[(n, k)] * (-0.5 * self.ln_weights[n]).exp()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `max |S - V diag(lambda) V^T| / max |S|`.
    pub fn reconstruction_residual(&self, p: &TreeParams) -> f64 {
        let gen = RadialGenerator::new(p, self.n_max);
        let off = gen.symmetric_off_diagonal();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        let rec = &self.vectors * lam * self.vectors.transpose();
        let mut worst = 0.0f64;
        let mut norm = 0.0f64;
        for i in 0..=self.n_max {
            for j in 0..=self.n_max {
                let s = if i == j {
                    gen.diag[i]
                } else if j == i + 1 {
                    off[i]
                } else if i == j + 1 {
                    off[j]
                } else {
                    0.0
                };
                worst = worst.max((rec[(i, j)] - s).abs());
                norm = norm.max(s.abs());
            }
        }
        worst / norm
    }

    /// Radial kernel of `f(L)` at the root: `sum_k f(lambda_k) psi_k(0) psi_k(n)`,
    /// together with a rounding-noise floor per entry.
    pub fn radial_function(&self, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let len = self.n_max + 1;
        let coeff: Vec<f64> = (0..len).map(|k| f(self.eigenvalues[k]) * self.vectors[(0, k)]).collect();
        let mut values = vec![0.0; len];
        let mut floors = vec![0.0; len];
        for n in 0..len {
            let mut s = 0.0;
            let mut a = 0.0;
            for (k, c) in coeff.iter().enumerate() {
                let term = c * self.vectors[(n, k)];
                s += term;
                a += term.abs();
            }
            let scale = (-0.5 * self.ln_weights[n]).exp();
            values[n] = s * scale;
            floors[n] = 2.0 * (len as f64).sqrt() * f64::EPSILON * a * scale;
        }
        (values, floors)
    }

    /// `h_t(n)` for `n = 0..=N`, with the per-entry noise floor.
    pub fn heat_kernel(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        self.radial_function(|l| (-t * l).exp())
    }
}

/// Radial function with its time tag and a bound on the mass it does not
/// account for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialVector {
    pub t: f64,
    pub values: Vec<f64>,
    pub n_max: usize,
    /// Entries past this index are unresolved and stored as 0.
    pub resolved_to: usize,
    pub tail_mass_bound: f64,
}

impl RadialVector {
    /// `sum_n m(n) values(n)`.
    pub fn mass(&self, p: &TreeParams) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| v * p.ln_sphere_size(n).exp())
            .sum()
    }
}

/// Forward equation of the distance process, `P_t(n) = m(n) h_t(n)`, with
/// checkpoints so that many times can be queried cheaply.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    q: f64,
    n_max: usize,
    spacing: f64,
    checkpoints: Vec<Vec<f64>>,
    ln_weights: Vec<f64>,
}

const TAYLOR_TERMS: usize = 5000;

impl HeatFlow {
    pub fn new(p: &TreeParams, n_max: usize, t_max: f64) -> Self {
        let spacing = 1.0;
        let mut start = vec![0.0; n_max + 1];
        start[0] = 1.0;
        let mut flow = HeatFlow {
            q: p.q as f64,
            n_max,
            spacing,
            checkpoints: vec![start],
            ln_weights: (0..=n_max).map(|n| p.ln_sphere_size(n)).collect(),
        };
        flow.extend_to(t_max);
        flow
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Largest checkpointed time.
    pub fn horizon(&self) -> f64 {
        (self.checkpoints.len() - 1) as f64 * self.spacing
    }

    fn extend_to(&mut self, t: f64) {
        while (self.checkpoints.len() - 1) as f64 * self.spacing < t {
            let last = self.checkpoints.last().expect("non-empty");
            let next = self.step(last, self.spacing);
            self.checkpoints.push(next);
        }
    }

    /// `P B` where `B` holds the jump probabilities of the distance chain.
    fn jump(&self, v: &[f64], out: &mut [f64]) {
        let up = self.q / (self.q + 1.0);
        let down = 1.0 / (self.q + 1.0);
        let n = self.n_max;
        for i in 0..=n {
            let mut s = 0.0;
            if i == 1 {
                s += v[0];
            } else if i >= 2 {
                s += up * v[i - 1];
            }
            if i == 0 && n >= 1 {
                s += down * v[1];
            } else if i >= 1 && i < n {
                s += down * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// `P e^{-delta} e^{delta B}` by its Taylor series, which has only
    /// non-negative terms.
    fn step(&self, v: &[f64], delta: f64) -> Vec<f64> {
        if delta == 0.0 {
            return v.to_vec();
        }
        let mut sum = v.to_vec();
        let mut term = v.to_vec();
        let mut next = vec![0.0; v.len()];
        for k in 1..=TAYLOR_TERMS {
            self.jump(&term, &mut next);
            let f = delta / k as f64;
            let mut any = false;
            for i in 0..next.len() {
                term[i] = next[i] * f;
                sum[i] += term[i];
                // stop only once every representable entry has converged
                any |= term[i] > 1e-300 && term[i] > 1e-17 * sum[i];
            }
            if !any {
                break;
            }
        }
        let decay = (-delta).exp();
        sum.iter_mut().for_each(|x| *x *= decay);
        sum
    }

    /// `P(|X_t| = n)` for `n = 0..=N`.
    pub fn distance_law(&mut self, t: f64) -> Vec<f64> {
        assert!(t >= 0.0);
        self.extend_to(t);
        let k = ((t / self.spacing).floor() as usize).min(self.checkpoints.len() - 1);
        let delta = t - k as f64 * self.spacing;
        self.step(&self.checkpoints[k], delta)
    }

    /// Same as [`HeatFlow::distance_law`] without growing the checkpoint list.
    pub fn distance_law_at(&self, t: f64) -> Vec<f64> {
        assert!(t >= 0.0);
        let last = self.checkpoints.len() - 1;
        let k = ((t / self.spacing).floor() as usize).min(last);
        let mut v = self.checkpoints[k].clone();
        let mut s = k as f64 * self.spacing;
        while t - s > self.spacing {
            v = self.step(&v, self.spacing);
            s += self.spacing;
        }
        self.step(&v, t - s)
    }

    /// `h_t(n)` for `n = 0..=N`.
    pub fn kernel_at(&self, t: f64) -> Vec<f64> {
        self.to_kernel(&self.distance_law_at(t))
    }

    pub fn to_kernel(&self, law: &[f64]) -> Vec<f64> {
        law.iter()
            .zip(&self.ln_weights)
            .map(|(&pv, &lw)| if pv > 0.0 { (pv.ln() - lw).exp() } else { 0.0 })
            .collect()
    }
}

/// Default truncation for time `t`.
pub fn default_depth(t: f64) -> usize {
    400usize.max((4.0 * t + 100.0).ceil() as usize)
}

/// `h_t(n)` for `n = 0..=N` by time stepping, with `N` doubled until the
/// mass lost through the truncation is at most `1e-8`.
pub fn heat_kernel_radial(p: &TreeParams, t: f64, n_max: usize) -> Result<RadialVector> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    let mut n = n_max.max(1);
    for _ in 0..6 {
        let flow = HeatFlow::new(p, n, 0.0);
        let law = flow.distance_law_at(t);
        let deficit = (1.0 - law.iter().sum::<f64>()).max(0.0);
        if deficit <= 1e-8 {
            return Ok(RadialVector {
                t,
                values: flow.to_kernel(&law),
                n_max: n,
                resolved_to: n,
                tail_mass_bound: deficit,
            });
        }
        n *= 2;
    }
    Err(Error::Truncation(format!("heat kernel at t = {t} still loses more than 1e-8 of its mass at depth {n}")))
}

/// Keep the leading entries whose rounding floor is below `rel` of their
/// value; zero the rest. Returns the last kept index.
pub fn truncate_unresolved(values: &mut [f64], floors: &[f64], rel: f64) -> usize {
    let mut last = 0;
    let mut ok = true;
    for n in 0..values.len() {
        ok &= values[n] > 0.0 && floors[n] <= rel * values[n];
        if ok {
            last = n;
        } else {
            values[n] = 0.0;
        }
    }
    last
}

/// `h_t(n)` from the spectral decomposition, cut where the sum stops being
/// resolved to relative `1e-9`; `tail_mass_bound` is the mass outside.
pub fn heat_kernel_spectral(p: &TreeParams, spec: &SpectralData, t: f64) -> RadialVector {
    let (mut values, floors) = spec.heat_kernel(t);
    let resolved_to = truncate_unresolved(&mut values, &floors, 1e-9);
    let mut v = RadialVector {
        t,
        values,
        n_max: spec.n_max,
        resolved_to,
        tail_mass_bound: 0.0,
    };
    v.tail_mass_bound = (1.0 - v.mass(p)).max(0.0);
    v
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln h_t(n)` on the infinite tree for `n in lo..=hi`.
pub fn ln_heat_kernel_exact(p: &TreeParams, t: f64, lo: usize, hi: usize) -> Vec<f64> {
    assert!(hi >= lo);
    if t == 0.0 {
        return (lo..=hi).map(|n| if n == 0 { 0.0 } else { f64::NEG_INFINITY }).collect();
    }
    let ln_q = (p.q as f64).ln();
    let terms = (42.0 / ln_q).ceil() as usize + 1;
    let z = p.gamma * t;
    let first = lo + 1;
    let last = hi + 1 + 2 * terms;
    let ln_i = ln_bessel_i_range(z, first, last);
    let mut buf = Vec::with_capacity(terms + 1);
    (lo..=hi)
        .map(|n| {
            buf.clear();
            for k in 0..=terms {
                let m = n + 2 * k + 1;
                buf.push(((m as f64).ln() + ln_i[m - first]) - k as f64 * ln_q);
            }
            -t - 0.5 * n as f64 * ln_q + std::f64::consts::LN_2 - z.ln() + log_sum_exp(&buf)
        })
        .collect()
}

pub fn heat_kernel_exact(p: &TreeParams, t: f64, lo: usize, hi: usize) -> Vec<f64> {
    ln_heat_kernel_exact(p, t, lo, hi).into_iter().map(f64::exp).collect()
}

/// `P(|X_t| = n)` on the infinite tree for `n in lo..=hi`.
pub fn distance_law_exact(p: &TreeParams, t: f64, lo: usize, hi: usize) -> Vec<f64> {
    ln_heat_kernel_exact(p, t, lo, hi)
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l + p.ln_sphere_size(lo + i)).exp())
        .collect()
}

/// `ln[(e^{-t}/t) phi0(n) I_{1+n}(gamma t)]`.
pub fn ln_hk_envelope(p: &TreeParams, t: f64, n: usize) -> f64 {
    -t - t.ln() + ln_phi0(p, n) + ln_bessel_i(1.0 + n as f64, p.gamma * t)
}

/// Frozen band for `h_t(n)` against the envelope above, measured on
/// `t in [1, 50]`, `n in [0, 60]` for `q in {2, 3}` and widened by 1.25.
pub fn hk_band(q: u32) -> (f64, f64) {
    let (lo, hi) = match q {
        2 => (2.234, 9.067),
        3 => (2.379, 5.879),
        _ => (0.5, 4.0),
    };
    (lo / 1.25, hi * 1.25)
}

/// Ratio of the time-stepped `h_t(n)` to its envelope over the grid.
pub fn check_hk_envelope(p: &TreeParams, t_grid: &[f64], n_grid: &[usize]) -> Result<EnvelopeBand> {
    let n_top = n_grid.iter().copied().max().unwrap_or(0);
    let t_top = t_grid.iter().cloned().fold(0.0, f64::max);
    let depth = default_depth(t_top).max(n_top + 100);
    let flow = HeatFlow::new(p, depth, t_top);
    let mut band = EnvelopeBand::new(
        Regime::Global,
        format!("t in {:?}, n in {:?}", t_grid, n_grid),
        hk_band(p.q),
    );
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("envelope grid needs t > 0, got {t}")));
        }
        let h = flow.kernel_at(t);
        for &n in n_grid {
            let r = (h[n].ln() - ln_hk_envelope(p, t, n)).exp();
            band.record(r);
        }
    }
    Ok(band)
}
