//! The process killed on leaving a ball: Green function, mean exit times
//! and the exit distribution.
//!
//! Exterior vertices of `B(c, r)` are grouped by their gate `w`, the vertex
//! at distance `r` from `c` on the geodesic to `z`, and by the excess
//! `k = d(c, z) - r`. Every path from inside the ball to `z` runs through
//! `w`, so `d(y, z) = d(y, w) + k` and the exit law is constant on each of
//! the `q^k` vertices of a class.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{ball_gates, exit_class_index, JumpLaw};
use crate::tree::{distance, enumerate_ball_with_budget, Ball, TreeParams, Vertex};

/// Vertex budget for dense Green matrices.
pub const DENSE_BUDGET: usize = 3000;

#[derive(Debug, Clone)]
pub struct KilledGenerator {
    pub ball: Ball,
    /// `lambda*` on the diagonal, `-nu(d(x, y))` off it
    pub matrix: DMatrix<f64>,
    /// `sum_{z outside} nu(d(x, z))` from the cone rates
    pub killing: Vec<f64>,
    /// largest relative gap between `killing` and the row sums
    pub killing_mismatch: f64,
}

fn count_in_class(q: u32, r: usize, k: usize) -> f64 {
    let q = q as f64;
    if r == 0 {
        (q + 1.0) * q.powi(k as i32 - 1)
    } else {
        q.powi(k as i32)
    }
}

/// Jump rate from `y` into all classes behind gate `w`, `d(y, w) = j`.
fn gate_rate(law: &JumpLaw, r: usize, j: usize) -> f64 {
    if r == 0 {
        law.total_rate
    } else {
        law.cone_rate(j)
    }
}

/// Balls around the root; the generator is invariant under translation.
pub fn killed_generator(p: &TreeParams, law: &JumpLaw, r: usize) -> Result<KilledGenerator> {
    if law.q != p.q {
        return Err(Error::param("law", "jump law built for a different tree"));
    }
    if law.n_jump < 2 * r {
        return Err(Error::Precondition(format!("jump table to {} is shorter than the diameter {}", law.n_jump, 2 * r)));
    }
    let ball = enumerate_ball_with_budget(p, r, DENSE_BUDGET)?;
    let n = ball.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        law.total_rate
                    } else {
                        -law.nu[distance(&ball.vertices[i], &ball.vertices[j])]
                    }
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let gates = ball_gates(p, &ball.center, r)?;
    let mut killing = vec![0.0; n];
    let mut mismatch: f64 = 0.0;
    for i in 0..n {
        let y = &ball.vertices[i];
        killing[i] = gates.iter().map(|w| gate_rate(law, r, distance(y, w))).sum();
        let row: f64 = matrix.row(i).sum();
        mismatch = mismatch.max((row / killing[i] - 1.0).abs());
    }
    Ok(KilledGenerator {
        ball,
        matrix,
        killing,
        killing_mismatch: mismatch,
    })
}

#[derive(Debug, Clone)]
pub struct GreenMatrix {
    pub values: DMatrix<f64>,
    /// `max |A G - I|`
    pub solve_residual: f64,
    /// `||A||_1 ||G||_1`
    pub condition: f64,
}

impl GreenMatrix {
    /// `E_x tau_D = sum_y G(x, y)`.
    pub fn mean_exit_times(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.sum()).collect()
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn green_function(gen: &KilledGenerator) -> Result<GreenMatrix> {
    let a = &gen.matrix;
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("killed generator on {} vertices is not positive definite", a.nrows())))?;
    let g = chol.inverse();
    let n = a.nrows();
    let residual = (a * &g - DMatrix::<f64>::identity(n, n)).amax();
    Ok(GreenMatrix {
        condition: norm1(a) * norm1(&g),
        values: g,
        solve_residual: residual,
    })
}

/// `int_0^T p^D_t(x, .) dt` by classical Runge-Kutta on `v' = -A v`.
pub fn green_row_by_time_stepping(gen: &KilledGenerator, x: usize, t_max: f64, dt: f64) -> Vec<f64> {
    let a = &gen.matrix;
    let n = a.nrows();
    let mut v = DVector::<f64>::zeros(n);
    v[x] = 1.0;
    let mut acc = DVector::<f64>::zeros(n);
    let steps = (t_max / dt).ceil() as usize;
    let h = t_max / steps as f64;
    for _ in 0..steps {
        // the integral is carried as a second component of the state
        let k1 = -(a * &v);
        let v2 = &v + &k1 * (0.5 * h);
        let k2 = -(a * &v2);
        let v3 = &v + &k2 * (0.5 * h);
        let k3 = -(a * &v3);
        let v4 = &v + &k3 * h;
        let k4 = -(a * &v4);
        acc += (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    acc.iter().copied().collect()
}

/// Mean exit time of `B(c, r)` as a function of `d(c, x)`, `0..=r`, from the
/// radial reduction of the killed generator.
pub fn mean_exit_time_radial(p: &TreeParams, law: &JumpLaw, r: usize) -> Result<Vec<f64>> {
    if law.n_jump < 2 * r {
        return Err(Error::Precondition(format!("jump table to {} is shorter than the diameter {}", law.n_jump, 2 * r)));
    }
    let m = DMatrix::from_fn(r + 1, r + 1, |a, b| {
        let off: f64 = p
            .sphere_profile(a, b)
            .iter()
            .filter(|(d, _)| *d > 0)
            .map(|&(d, c)| c * law.nu[d])
            .sum();
        if a == b {
            law.total_rate - off
        } else {
            -off
        }
    });
    let rhs = DVector::from_element(r + 1, 1.0);
    m.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Singular(format!("radial killed generator for r = {r}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitDistribution {
    pub start: Vertex,
    pub radius: usize,
    pub gates: Vec<Vertex>,
    pub max_excess: usize,
    /// probability of each exit class, see [`exit_class_index`]
    pub probs: Vec<f64>,
    pub total: f64,
}

impl ExitDistribution {
    /// `P_x[X_tau = z]` for a single vertex `z` in class `(gate, k)`.
    pub fn point_mass(&self, q: u32, gate: usize, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.max_excess);
        self.probs[exit_class_index(gate, Some(k), self.max_excess)] / count_in_class(q, self.radius, k)
    }
}

/// `P_x[X_tau = z] = sum_y G(x, y) nu(d(y, z))`, collected by class.
pub fn exit_distribution(
    p: &TreeParams,
    gen: &KilledGenerator,
    gm: &GreenMatrix,
    law: &JumpLaw,
    x: usize,
    max_excess: usize,
) -> Result<ExitDistribution> {
    let r = gen.ball.radius;
    if law.n_jump < 2 * r + max_excess {
        return Err(Error::Precondition(format!(
            "jump table to {} cannot resolve excess {max_excess} from radius {r}",
            law.n_jump
        )));
    }
    let gates = ball_gates(p, &gen.ball.center, r)?;
    let width = max_excess + 1;
    let mut probs = vec![0.0; gates.len() * width];
    for (wi, w) in gates.iter().enumerate() {
        for (yi, y) in gen.ball.vertices.iter().enumerate() {
            let g = gm.values[(x, yi)];
            let j = distance(y, w);
            let mut near = 0.0;
            for k in 1..=max_excess {
                let rate = count_in_class(p.q, r, k) * law.nu[j + k];
                probs[wi * width + k - 1] += g * rate;
                near += rate;
            }
            probs[wi * width + max_excess] += g * (gate_rate(law, r, j) - near);
        }
    }
    let total = probs.iter().sum();
    Ok(ExitDistribution {
        start: gen.ball.vertices[x].clone(),
        radius: r,
        gates,
        max_excess,
        probs,
        total,
    })
}

/// Frozen constants for the two exit-kernel envelopes, `(C, c)`, measured
/// for `q = 2`, `alpha = 1`, `r in {2, 3, 4}` and widened by 1.25.
pub fn poisson_constants(q: u32, alpha: f64) -> (f64, f64) {
    match (q, alpha) {
        (2, a) if (a - 1.0).abs() < 1e-12 => (0.0243 * 1.25, 25.6 / 1.25),
        _ => (f64::INFINITY, 0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonReport {
    pub radius: usize,
    pub max_distance: usize,
    /// largest `P_D(x, z) d^{1+alpha/2} V(d) / (r^{alpha/2} V(2r))` over
    /// `x in D`, `d(x0, z) > 3r`
    pub upper_ratio: f64,
    /// smallest `P_D(x, z) V(2r) d^{1+alpha/2} V(d) / r^{alpha/2}` over
    /// `x in B(x0, r/2)`, `z` outside `D`
    pub lower_ratio: f64,
    pub upper_constant: f64,
    pub lower_constant: f64,
    pub upper_points: usize,
    pub lower_points: usize,
    /// largest deviation of a total exit mass from 1
    pub mass_error: f64,
}

impl PoissonReport {
    pub fn pass(&self) -> bool {
        self.upper_points > 0 && self.lower_points > 0 && self.upper_ratio <= self.upper_constant && self.lower_ratio >= self.lower_constant
    }
}

/// Exit kernel of `B(x0, r)` against its upper envelope far away and its
/// lower envelope from the inner half ball, for exterior distances up to
/// `3r + 12` from the centre.
pub fn check_poisson_bounds(p: &TreeParams, law: &JumpLaw, r: usize) -> Result<PoissonReport> {
    if r < 2 {
        return Err(Error::param("r", format!("need r >= 2, got {r}")));
    }
    let max_distance = 3 * r + 12;
    let max_excess = max_distance - r;
    let gen = killed_generator(p, law, r)?;
    let gm = green_function(&gen)?;
    let (upper_constant, lower_constant) = poisson_constants(p.q, law.alpha);
    let h = 0.5 * law.alpha;
    let v = |d: usize| p.ball_volume_f64(d);
    let scale = (r as f64).powf(h);
    let v2r = v(2 * r);
    let per_x: Vec<Result<(f64, f64, usize, usize, f64)>> = (0..gen.ball.len())
        .into_par_iter()
        .map(|xi| {
            let dist = exit_distribution(p, &gen, &gm, law, xi, max_excess)?;
            let x = &gen.ball.vertices[xi];
            let inner = 2 * x.depth() <= r;
            let (mut up, mut lo, mut nu, mut nl) = (0.0f64, f64::INFINITY, 0, 0);
            for (wi, w) in dist.gates.iter().enumerate() {
                let dxw = distance(x, w);
                for k in 1..=max_excess {
                    let pz = dist.point_mass(p.q, wi, k);
                    let d = dxw + k;
                    let shape = (d as f64).powf(1.0 + h) * v(d);
                    if r + k > 3 * r {
                        up = up.max(pz * shape / (scale * v2r));
                        nu += 1;
                    }
                    if inner {
                        lo = lo.min(pz * v2r * shape / scale);
                        nl += 1;
                    }
                }
            }
            Ok((up, lo, nu, nl, (dist.total - 1.0).abs()))
        })
        .collect();
    let mut report = PoissonReport {
        radius: r,
        max_distance,
        upper_ratio: 0.0,
        lower_ratio: f64::INFINITY,
        upper_constant,
        lower_constant,
        upper_points: 0,
        lower_points: 0,
        mass_error: 0.0,
    };
    for item in per_x {
        let (up, lo, nu, nl, me) = item?;
        report.upper_ratio = report.upper_ratio.max(up);
        report.lower_ratio = report.lower_ratio.min(lo);
        report.upper_points += nu;
        report.lower_points += nl;
        report.mass_error = report.mass_error.max(me);
    }
    Ok(report)
}
