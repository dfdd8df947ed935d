//! The stable process as a continuous-time jump chain on the tree.
//!
//! From any vertex the process jumps to each vertex at distance `n` with
//! rate `nu(n)`, so it waits an exponential time of rate
//! `lambda* = sum m(n) nu(n)` and then picks a distance from
//! `m(n) nu(n) / lambda*` and a uniform target on that sphere. Distances up
//! to `n_jump` come from a table. Longer jumps have polynomially small mass
//! and are drawn exactly by subordination: a jump of the subordinator of
//! size `u` moves the walker to `Y_u`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::heat::{distance_law_exact, heat_kernel_exact};
use crate::quad::{integrate_points, QuadOptions};
use crate::stable::levy_measure_table;
use crate::stats::MeanEstimate;
use crate::subordinator::{sample_subordinator_increment, subordinator_levy_density, StableParams};
use crate::tree::{distance, enumerate_ball, TreeParams, Vertex};

/// `lambda* = int (1 - h_u(0)) rho(u) du`, the total jump rate.
pub fn total_jump_rate(p: &TreeParams, s: &StableParams) -> Result<f64> {
    let opts = QuadOptions::rel(1e-11);
    // below u = 1 the complement 1 - h_u(0) is summed directly
    let mut near = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let moved: f64 = distance_law_exact(p, u, 1, 60).iter().sum();
        moved * subordinator_levy_density(s, u)
    };
    let mut pts: Vec<f64> = (1..=60).rev().map(|k| 0.5f64.powi(k)).collect();
    pts.insert(0, 0.0);
    pts.push(1.0);
    let a = integrate_points(&mut near, &pts, &opts)?;
    let upper = 40.0 / p.b2;
    let mut far = |u: f64| (1.0 - heat_kernel_exact(p, u, 0, 0)[0]) * subordinator_levy_density(s, u);
    let mut pts = vec![1.0];
    while *pts.last().unwrap() < upper {
        let next = (2.0 * pts.last().unwrap()).min(upper);
        pts.push(next);
    }
    let b = integrate_points(&mut far, &pts, &opts)?;
    // past `upper`, h_u(0) < e^{-40} and rho integrates in closed form
    let c = upper.powf(-s.beta) / gamma(1.0 - s.beta);
    Ok(a.value + b.value + c)
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpLaw {
    pub q: u32,
    pub alpha: f64,
    pub n_jump: usize,
    pub total_rate: f64,
    /// `nu(n)` for `n = 0..=n_jump`, `nu(0) = 0`
    pub nu: Vec<f64>,
    /// `P(jump distance <= n)` for `n = 0..=n_jump`
    pub distance_cdf: Vec<f64>,
    /// `P(jump distance > n_jump)`
    pub eps_tail: f64,
    #[serde(skip)]
    stable: StableParams,
}

pub fn build_jump_law(p: &TreeParams, s: &StableParams, n_jump: usize) -> Result<JumpLaw> {
    if n_jump < 1 {
        return Err(Error::param("n_jump", "need at least one tabulated distance"));
    }
    let nu = levy_measure_table(p, s, n_jump)?;
    let total_rate = total_jump_rate(p, s)?;
    let mut distance_cdf = vec![0.0; n_jump + 1];
    let mut acc = 0.0;
    for n in 1..=n_jump {
        acc += p.sphere_size_f64(n) * nu[n];
        distance_cdf[n] = acc / total_rate;
    }
    let eps_tail = 1.0 - distance_cdf[n_jump];
    if eps_tail < -1e-9 {
        return Err(Error::Truncation(format!(
            "tabulated jump mass exceeds the total rate by {:e}",
            -eps_tail
        )));
    }
    Ok(JumpLaw {
        q: p.q,
        alpha: s.alpha,
        n_jump,
        total_rate,
        nu,
        distance_cdf,
        eps_tail: eps_tail.max(0.0),
        stable: *s,
    })
}

/// A jump distance, or the fact that it exceeds the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpDistance {
    Near(usize),
    Far,
}

impl JumpLaw {
    /// `sum_{n > r} m(n) nu(n)` for `r <= n_jump`.
    pub fn tail_rate(&self, r: usize) -> f64 {
        self.total_rate * (1.0 - self.distance_cdf[r])
    }

    /// Jump rate from a vertex `y` into the cone behind a vertex `w` with
    /// `d(y, w) = j`, i.e. the vertices `z` with `d(y, z) = j + d(w, z) > j`
    /// reached through `w`: `q^{1-j} / (q+1) * sum_{n > j} m(n) nu(n)`.
    pub fn cone_rate(&self, j: usize) -> f64 {
        let q = self.q as f64;
        q.powi(1 - j as i32) / (q + 1.0) * self.tail_rate(j)
    }

    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R) -> JumpDistance {
        let u: f64 = rng.random();
        if u < self.distance_cdf[self.n_jump] {
            let n = self.distance_cdf.partition_point(|&c| c <= u);
            JumpDistance::Near(n.clamp(1, self.n_jump))
        } else {
            JumpDistance::Far
        }
    }

    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.sample_class(rng) {
            JumpDistance::Near(n) => n,
            JumpDistance::Far => self.sample_far(rng),
        }
    }

    /// A jump distance conditioned to exceed `n_jump`. Draws `u` from the
    /// subordinator jump density restricted to `u > 1` and accepts the
    /// walker's displacement after time `u` when it is long enough; jumps
    /// with `u < 1` reach beyond `n_jump` with probability below
    /// `1 / (n_jump + 1)!`, which is ignored.
    pub fn sample_far<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let b = self.stable.beta;
        loop {
            let v: f64 = 1.0 - rng.random::<f64>();
            let u = v.powf(-1.0 / b);
            let steps = poisson(u, rng);
            if steps <= self.n_jump as u64 {
                continue;
            }
            let d = walk_distance(self.q, steps, rng);
            if d > self.n_jump {
                return d;
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 1e18 {
        // beyond the sampler's range the relative spread is below 1e-9
        return mean as u64;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(mean as u64)
}

/// Level above which the walk is treated as never returning to the root;
/// the neglected probability is `q^{-LEVEL}`.
const ESCAPE_LEVEL: usize = 64;

/// Distance from the start after `steps` steps of the simple random walk.
pub fn walk_distance<R: Rng + ?Sized>(q: u32, steps: u64, rng: &mut R) -> usize {
    let up = q as f64 / (q as f64 + 1.0);
    let mut d = 0usize;
    let mut k = 0u64;
    while k < steps {
        if d >= ESCAPE_LEVEL {
            let rest = steps - k;
            let ups = Binomial::new(rest, up).map(|b| b.sample(rng)).unwrap_or(rest);
            return (d as i64 + 2 * ups as i64 - rest as i64).max(0) as usize;
        }
        if d == 0 || rng.random::<f64>() < up {
            d += 1;
        } else {
            d -= 1;
        }
        k += 1;
    }
    d
}

/// Distance to the root after a jump of length `n` from distance `a`.
/// The target path first goes `j` steps towards the root and then only
/// away from it.
pub fn jump_radial<R: Rng + ?Sized>(q: u32, a: usize, n: usize, rng: &mut R) -> usize {
    let qf = q as f64;
    let mut j = 0;
    if a > 0 && n > 0 && rng.random::<f64>() < 1.0 / (qf + 1.0) {
        j = 1;
        while j < a.min(n) && rng.random::<f64>() < 1.0 / qf {
            j += 1;
        }
    }
    a + n - 2 * j
}

/// Independent stream `i` of the master seed.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(i);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    /// jump times, starting with 0
    pub times: Vec<f64>,
    /// position from each jump time on
    pub vertices: Vec<Vertex>,
}

impl Path {
    pub fn at(&self, t: f64) -> &Vertex {
        let k = self.times.partition_point(|&s| s <= t);
        &self.vertices[k.saturating_sub(1)]
    }
}

/// Full path up to `t_max`. Every target is materialised, so memory grows
/// with the length of the longest jump.
pub fn simulate_path<R: Rng + ?Sized>(p: &TreeParams, law: &JumpLaw, x0: &Vertex, t_max: f64, rng: &mut R) -> Path {
    let hold = Exp::new(law.total_rate).expect("positive rate");
    let mut path = Path {
        times: vec![0.0],
        vertices: vec![x0.clone()],
    };
    let mut t = hold.sample(rng);
    while t <= t_max {
        let n = law.sample_distance(rng);
        let next = crate::tree::uniform_sphere_vertex(p, path.vertices.last().unwrap(), n, rng);
        path.times.push(t);
        path.vertices.push(next);
        t += hold.sample(rng);
    }
    path
}

/// Distance from the start at time `t` and the number of jumps made.
pub fn simulate_radial<R: Rng + ?Sized>(law: &JumpLaw, t: f64, rng: &mut R) -> (usize, usize) {
    let hold = Exp::new(law.total_rate).expect("positive rate");
    let mut d = 0;
    let mut jumps = 0;
    let mut s = hold.sample(rng);
    while s <= t {
        let n = law.sample_distance(rng);
        d = jump_radial(law.q, d, n, rng);
        jumps += 1;
        s += hold.sample(rng);
    }
    (d, jumps)
}

/// Distance at time `t` of the walk run for a subordinator time `S_t`.
pub fn sample_subordinated_distance<R: Rng + ?Sized>(p: &TreeParams, s: &StableParams, t: f64, rng: &mut R) -> usize {
    let u = sample_subordinator_increment(s, t, rng);
    walk_distance(p.q, poisson(u, rng), rng)
}

/// Counts of the distance at time `t` in `0..=n_max`, with a final cell
/// for larger distances, from the jump chain.
pub fn distance_histogram(law: &JumpLaw, t: f64, n_max: usize, n_samples: u64, seed: u64) -> Vec<u64> {
    histogram(n_max, n_samples, seed, |rng| simulate_radial(law, t, rng).0)
}

/// Same as [`distance_histogram`] with the subordinated walk.
pub fn subordinated_histogram(p: &TreeParams, s: &StableParams, t: f64, n_max: usize, n_samples: u64, seed: u64) -> Vec<u64> {
    histogram(n_max, n_samples, seed, |rng| sample_subordinated_distance(p, s, t, rng))
}

fn histogram(n_max: usize, n_samples: u64, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> usize + Sync) -> Vec<u64> {
    (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u64; n_max + 2],
            |mut h, i| {
                let d = f(&mut sample_rng(seed, i));
                h[d.min(n_max + 1)] += 1;
                h
            },
        )
        .reduce(
            || vec![0u64; n_max + 2],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: f64,
    pub r: usize,
    /// Monte Carlo `P(d(X_0, X_t) > r)`
    pub probability: MeanEstimate,
}

/// `P_x[X_t not in B(x, r)]` by simulation; by homogeneity the start is
/// irrelevant.
pub fn estimate_tail(law: &JumpLaw, t: f64, r: usize, n_samples: u64, seed: u64) -> Result<TailEstimate> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let h = distance_histogram(law, t, r, n_samples, seed);
    let hits = h[r + 1] as f64;
    let n = n_samples as f64;
    let pr = hits / n;
    Ok(TailEstimate {
        t,
        r,
        probability: MeanEstimate {
            n: n_samples,
            mean: pr,
            std_error: (pr * (1.0 - pr) / (n - 1.0).max(1.0)).sqrt(),
        },
    })
}

/// Where a jump leaving `B(c, r)` goes: the last vertex `gate` of the
/// ball on the way out, and `excess = d(c, z) - r` if known.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpOutcome {
    Landed(Vertex),
    Exited {
        gate: Vertex,
        excess: Option<usize>,
        target: Option<Vertex>,
    },
}

/// Longest jump whose exit target is materialised.
pub const MATERIALIZE_LIMIT: usize = 256;

/// Jump from `y` in `B(c, r)` to a uniform vertex at distance `n`
/// (unresolved for [`JumpDistance::Far`]), built one edge at a time and
/// stopped once it has left the ball, after which it only moves away from
/// `c`.
pub fn ball_jump<R: Rng + ?Sized>(p: &TreeParams, c: &Vertex, r: usize, y: &Vertex, n: JumpDistance, rng: &mut R) -> JumpOutcome {
    let total = match n {
        JumpDistance::Near(n) => n,
        JumpDistance::Far => usize::MAX,
    };
    let mut v = y.clone();
    let mut dc = distance(c, y);
    let mut prev: Option<u32> = None;
    let mut s = 0;
    while s < total {
        let col = next_colour(p.q, prev, rng);
        let before = dc;
        let last = v.clone();
        v.step(col);
        prev = Some(col);
        s += 1;
        dc = distance(c, &v);
        if dc == r + 1 && before == r {
            let rest = total - s;
            let (excess, target) = match n {
                JumpDistance::Near(_) => {
                    let target = if rest + dc <= MATERIALIZE_LIMIT {
                        for _ in 0..rest {
                            let col = next_colour(p.q, prev, rng);
                            v.step(col);
                            prev = Some(col);
                        }
                        Some(v)
                    } else {
                        None
                    };
                    (Some(1 + rest), target)
                }
                JumpDistance::Far => (None, None),
            };
            return JumpOutcome::Exited { gate: last, excess, target };
        }
    }
    JumpOutcome::Landed(v)
}

fn next_colour<R: Rng + ?Sized>(q: u32, prev: Option<u32>, rng: &mut R) -> u32 {
    match prev {
        None => rng.random_range(0..=q),
        Some(back) => {
            let c = rng.random_range(0..q);
            if c >= back {
                c + 1
            } else {
                c
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitRecord {
    /// stream index under the master seed
    pub seed: u64,
    pub exit_time: f64,
    pub gate: usize,
    /// `d(center, X_tau)`, unknown for jumps beyond the table
    pub exit_distance: Option<usize>,
    pub exit_vertex: Option<Vertex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitOptions {
    /// times at which `P(tau < t)` is reported
    pub survival_times: Vec<f64>,
    /// exits with `d(center, z) - r <= max_excess` are binned exactly
    pub max_excess: usize,
    pub keep_records: bool,
}

impl Default for ExitOptions {
    fn default() -> Self {
        ExitOptions {
            survival_times: Vec::new(),
            max_excess: 4,
            keep_records: false,
        }
    }
}

/// Exit classes of `B(c, r)`: gate `w` on the sphere of radius `r` and
/// excess `k = d(c, z) - r` in `1..=K`, plus one class per gate for
/// `k > K`. Index `w * (K + 1) + (k - 1)`, tail class at `w * (K + 1) + K`.
pub fn exit_class_index(gate: usize, excess: Option<usize>, max_excess: usize) -> usize {
    match excess {
        Some(k) if k <= max_excess => gate * (max_excess + 1) + k - 1,
        _ => gate * (max_excess + 1) + max_excess,
    }
}

/// The vertices at distance exactly `r` from `center`, in ball order.
pub fn ball_gates(p: &TreeParams, center: &Vertex, r: usize) -> Result<Vec<Vertex>> {
    let ball = enumerate_ball(p, r)?;
    Ok(ball
        .vertices
        .iter()
        .filter(|v| v.depth() == r)
        .map(|v| translate(center, v))
        .collect())
}

/// The image of `v` under the tree automorphism taking the root to `c`
/// that acts on words by concatenation.
fn translate(c: &Vertex, v: &Vertex) -> Vertex {
    let mut out = c.clone();
    for &col in v.word() {
        out.step(col);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitStatistics {
    pub radius: usize,
    pub start: Vertex,
    pub center: Vertex,
    pub exit_time: MeanEstimate,
    /// `(t, P(tau < t))`
    pub survival: Vec<(f64, f64)>,
    pub gates: Vec<Vertex>,
    pub max_excess: usize,
    /// counts per exit class, see [`exit_class_index`]
    pub histogram: Vec<u64>,
    pub records: Vec<ExitRecord>,
}

fn exit_once<R: Rng + ?Sized>(
    p: &TreeParams,
    law: &JumpLaw,
    center: &Vertex,
    r: usize,
    x: &Vertex,
    gates: &HashMap<Vertex, usize>,
    rng: &mut R,
) -> (f64, usize, Option<usize>, Option<Vertex>) {
    let hold = Exp::new(law.total_rate).expect("positive rate");
    let mut y = x.clone();
    let mut t = 0.0;
    loop {
        t += hold.sample(rng);
        let n = law.sample_class(rng);
        match ball_jump(p, center, r, &y, n, rng) {
            JumpOutcome::Landed(v) => y = v,
            JumpOutcome::Exited { gate, excess, target } => {
                return (t, gates[&gate], excess.map(|k| r + k), target);
            }
        }
    }
}

/// Exit time and exit position of `B(center, r)` started from `x`.
pub fn estimate_exit(
    p: &TreeParams,
    law: &JumpLaw,
    x: &Vertex,
    center: &Vertex,
    r: usize,
    n_samples: u64,
    seed: u64,
    opts: &ExitOptions,
) -> Result<ExitStatistics> {
    if distance(x, center) > r {
        return Err(Error::Precondition(format!("start is outside B(center, {r})")));
    }
    if law.n_jump < 2 * r + opts.max_excess + 1 {
        return Err(Error::Precondition(format!(
            "jump table to {} cannot resolve exits from radius {r} with excess {}",
            law.n_jump, opts.max_excess
        )));
    }
    let gates = ball_gates(p, center, r)?;
    let index: HashMap<Vertex, usize> = gates.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let records: Vec<ExitRecord> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let (exit_time, gate, exit_distance, exit_vertex) = exit_once(p, law, center, r, x, &index, &mut rng);
            ExitRecord {
                seed: i,
                exit_time,
                gate,
                exit_distance,
                exit_vertex,
            }
        })
        .collect();
    let k = opts.max_excess;
    let mut histogram = vec![0u64; gates.len() * (k + 1)];
    for rec in &records {
        histogram[exit_class_index(rec.gate, rec.exit_distance.map(|d| d - r), k)] += 1;
    }
    let exit_time = MeanEstimate::from_samples(records.iter().map(|r| r.exit_time));
    let survival = opts
        .survival_times
        .iter()
        .map(|&t| (t, records.iter().filter(|r| r.exit_time < t).count() as f64 / n_samples as f64))
        .collect();
    Ok(ExitStatistics {
        radius: r,
        start: x.clone(),
        center: center.clone(),
        exit_time,
        survival,
        gates,
        max_excess: k,
        histogram,
        records: if opts.keep_records { records } else { Vec::new() },
    })
}

fn calibrated(q: u32, alpha: f64, lo: f64, hi: f64) -> (f64, f64) {
    if q == 2 && (alpha - 1.0).abs() < 1e-12 {
        (lo / 1.25, hi * 1.25)
    } else {
        (0.0, f64::INFINITY)
    }
}

/// Band for `P(d(X_0, X_t) > r) / (t r^{-alpha/2})`, measured for `q = 2`,
/// `alpha = 1`, `t = 0.5`, `r in {4, 8, ..., 20}` and widened by 1.25.
pub fn tail_band(q: u32, alpha: f64) -> (f64, f64) {
    calibrated(q, alpha, 0.3372, 0.3656)
}

/// Band for `P(tau_{B(x, r)} < t) / (t r^{-alpha/2})` with `r > t^{2/alpha}`,
/// measured for `q = 2`, `alpha = 1`, `r in {4, 6, ..., 12}`.
pub fn survival_band(q: u32, alpha: f64) -> (f64, f64) {
    calibrated(q, alpha, 0.3322, 0.3689)
}

/// Band for `E_y tau_{B(x, r)} / r^{alpha/2}`, measured for `q = 2`,
/// `alpha = 1`, `r in [4, 12]`; the upper end holds for every `y` in the
/// ball, the lower end for `y = x`.
pub fn exit_time_band(q: u32, alpha: f64) -> (f64, f64) {
    calibrated(q, alpha, 1.8724, 1.9154)
}
