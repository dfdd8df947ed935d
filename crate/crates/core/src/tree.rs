//! Homogeneous tree of degree `q + 1`.
//!
//! Every edge carries one of `q + 1` colours so that each vertex sees each
//! colour exactly once. A vertex is then the reduced word of colours read
//! along the path from the root `o`: consecutive letters differ, and the
//! word length is the distance to the root. Moving along colour `c` either
//! appends `c` or, if the word already ends in `c`, pops it.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Vertex budget for ball enumeration; dense solves are cubic in the count.
pub const DEFAULT_VERTEX_BUDGET: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub q: u32,
    /// `2 sqrt(q) / (q + 1)`, the spectral radius of the simple random walk.
    pub gamma: f64,
    /// `1 - gamma`, bottom of the L2 spectrum of the Laplacian.
    pub b2: f64,
    /// `(q - 1) / (q + 1)`, speed of the distance of the random walk.
    pub r0: f64,
}

impl TreeParams {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::param("q", format!("branching number must be >= 2, got {q}")));
        }
        let qf = q as f64;
        let gamma = 2.0 * qf.sqrt() / (qf + 1.0);
        Ok(TreeParams {
            q,
            gamma,
            b2: 1.0 - gamma,
            r0: (qf - 1.0) / (qf + 1.0),
        })
    }

    pub fn degree(&self) -> u32 {
        self.q + 1
    }

    /// Number of vertices at distance `n` from a fixed vertex, saturating at
    /// `u128::MAX`.
    pub fn sphere_size(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let q = self.q as u128;
        let mut s = q + 1;
        for _ in 1..n {
            s = s.saturating_mul(q);
        }
        s
    }

    /// Natural log of [`sphere_size`](Self::sphere_size), exact for any `n`.
    pub fn ln_sphere_size(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            (self.q as f64 + 1.0).ln() + (n - 1) as f64 * (self.q as f64).ln()
        }
    }

    pub fn sphere_size_f64(&self, n: usize) -> f64 {
        self.ln_sphere_size(n).exp()
    }

    /// Volume of a ball of radius `r`, saturating.
    pub fn ball_volume(&self, r: usize) -> u128 {
        (0..=r).fold(0u128, |acc, n| acc.saturating_add(self.sphere_size(n)))
    }

    pub fn ball_volume_f64(&self, r: usize) -> f64 {
        // 1 + (q+1)(q^r - 1)/(q - 1)
        let q = self.q as f64;
        if r == 0 {
            return 1.0;
        }
        1.0 + (q + 1.0) * (q.powi(r as i32) - 1.0) / (q - 1.0)
    }

    /// Number of vertices `y` with `|y| = k` and `d(x, y) = d` for a vertex
    /// `x` with `|x| = n`, as `(d, count)` pairs with `count > 0`.
    pub fn sphere_profile(&self, n: usize, k: usize) -> Vec<(usize, f64)> {
        let q = self.q as f64;
        let mut out = Vec::with_capacity(n.min(k) + 1);
        for j in (0..=n.min(k)).rev() {
            let d = n + k - 2 * j;
            let count = if j == k {
                1.0
            } else {
                let branches = match (j, j < n) {
                    (0, true) => q,
                    (0, false) => q + 1.0,
                    (_, true) => q - 1.0,
                    (_, false) => q,
                };
                branches * q.powi((k - j - 1) as i32)
            };
            if count > 0.0 {
                out.push((d, count));
            }
        }
        out
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct Vertex {
    word: Vec<u32>,
}

impl Vertex {
    pub fn root() -> Self {
        Vertex { word: Vec::new() }
    }

    pub fn from_word(p: &TreeParams, word: Vec<u32>) -> Result<Self> {
        for (i, &c) in word.iter().enumerate() {
            if c > p.q {
                return Err(Error::param("word", format!("label {c} exceeds q = {}", p.q)));
            }
            if i > 0 && word[i - 1] == c {
                return Err(Error::param("word", format!("backtracking at position {i}")));
            }
        }
        Ok(Vertex { word })
    }

    pub fn word(&self) -> &[u32] {
        &self.word
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }

    pub fn is_root(&self) -> bool {
        self.word.is_empty()
    }

    pub fn parent(&self) -> Option<Vertex> {
        if self.word.is_empty() {
            None
        } else {
            Some(Vertex {
                word: self.word[..self.word.len() - 1].to_vec(),
            })
        }
    }

    /// Move along the edge of colour `c`.
    pub fn step(&mut self, c: u32) {
        if self.word.last() == Some(&c) {
            self.word.pop();
        } else {
            self.word.push(c);
        }
    }

    pub fn neighbors(&self, p: &TreeParams) -> Vec<Vertex> {
        (0..=p.q)
            .map(|c| {
                let mut v = self.clone();
                v.step(c);
                v
            })
            .collect()
    }

    /// Children in lexicographic label order.
    pub fn children(&self, p: &TreeParams) -> impl Iterator<Item = Vertex> + '_ {
        let last = self.word.last().copied();
        (0..=p.q).filter(move |&c| Some(c) != last).map(move |c| {
            let mut word = Vec::with_capacity(self.word.len() + 1);
            word.extend_from_slice(&self.word);
            word.push(c);
            Vertex { word }
        })
    }

    pub fn is_adjacent(&self, other: &Vertex) -> bool {
        let (a, b) = (&self.word, &other.word);
        (a.len() + 1 == b.len() && b.starts_with(a)) || (b.len() + 1 == a.len() && a.starts_with(b))
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "o");
        }
        write!(f, "o")?;
        for c in &self.word {
            write!(f, ".{c}")?;
        }
        Ok(())
    }
}

fn common_prefix(u: &[u32], v: &[u32]) -> usize {
    u.iter().zip(v).take_while(|(a, b)| a == b).count()
}

pub fn distance(u: &Vertex, v: &Vertex) -> usize {
    let j = common_prefix(&u.word, &v.word);
    u.word.len() + v.word.len() - 2 * j
}

/// Vertices within `radius` of the root, breadth-first by depth and
/// lexicographic within a depth.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vertex,
    pub radius: usize,
    pub vertices: Vec<Vertex>,
    index_of: HashMap<Vertex, usize>,
}

#[derive(Serialize)]
struct BallEntry {
    index: usize,
    parent: Option<usize>,
    depth: usize,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.index_of.get(v).copied()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        distance(&self.center, v) <= self.radius
    }

    /// Debug dump: one record per vertex with its parent index and depth.
    pub fn to_json(&self) -> String {
        let entries: Vec<BallEntry> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(index, v)| BallEntry {
                index,
                parent: v.parent().and_then(|p| self.index_of(&p)),
                depth: v.depth(),
            })
            .collect();
        serde_json::to_string(&entries).expect("ball entries serialize")
    }
}

pub fn enumerate_ball(p: &TreeParams, radius: usize) -> Result<Ball> {
    enumerate_ball_with_budget(p, radius, DEFAULT_VERTEX_BUDGET)
}

pub fn enumerate_ball_with_budget(p: &TreeParams, radius: usize, budget: usize) -> Result<Ball> {
    let required = p.ball_volume(radius);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded {
            radius,
            required,
            budget,
        });
    }
    let mut vertices = Vec::with_capacity(required as usize);
    vertices.push(Vertex::root());
    let mut start = 0;
    for _ in 0..radius {
        let end = vertices.len();
        for i in start..end {
            let children: Vec<Vertex> = vertices[i].children(p).collect();
            vertices.extend(children);
        }
        start = end;
    }
    let index_of = vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    Ok(Ball {
        center: Vertex::root(),
        radius,
        vertices,
        index_of,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeReport {
    pub r_max: usize,
    /// Shift in the doubling-type condition `V(r) <= c1 V(r + shift)`.
    pub shift: usize,
    /// Largest observed `V(r) / V(r + shift)`.
    pub c1: f64,
    /// Smallest and largest observed `V(r + 1) / V(r)`.
    pub growth_band: (f64, f64),
    pub pass: bool,
}

/// Checks `V(r) <= c1 V(r + 1)` with `c1 < 1` for `1 <= r <= r_max` and
/// records the band of one-step growth ratios.
pub fn check_volume_conditions(p: &TreeParams, r_max: usize) -> Result<VolumeReport> {
    if r_max < 2 {
        return Err(Error::param("r_max", "must be at least 2"));
    }
    let mut c1 = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for r in 1..=r_max {
        let ratio = p.ball_volume_f64(r) / p.ball_volume_f64(r + 1);
        c1 = c1.max(ratio);
        let growth = 1.0 / ratio;
        lo = lo.min(growth);
        hi = hi.max(growth);
    }
    let qf = p.q as f64;
    Ok(VolumeReport {
        r_max,
        shift: 1,
        c1,
        growth_band: (lo, hi),
        pass: c1 < 1.0 && lo > 1.0 && hi <= qf + 1.0,
    })
}

/// A uniformly distributed vertex at distance exactly `n` from `x`.
pub fn uniform_sphere_vertex<R: Rng + ?Sized>(p: &TreeParams, x: &Vertex, n: usize, rng: &mut R) -> Vertex {
    let mut v = x.clone();
    let mut prev: Option<u32> = None;
    for _ in 0..n {
        let c = match prev {
            None => rng.random_range(0..=p.q),
            Some(back) => {
                // uniform over the q colours other than the one just used
                let c = rng.random_range(0..p.q);
                if c >= back {
                    c + 1
                } else {
                    c
                }
            }
        };
        v.step(c);
        prev = Some(c);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree(q: u32) -> TreeParams {
        TreeParams::new(q).unwrap()
    }

    #[test]
    fn params_invariants() {
        assert!(TreeParams::new(1).is_err());
        for q in 2..20 {
            let p = tree(q);
            assert!(p.gamma > 0.0 && p.gamma < 1.0);
            assert!(p.b2 > 0.0 && p.b2 < 1.0);
            assert!(p.r0 > 0.0 && p.r0 < 1.0);
        }
        let p = tree(2);
        assert!((p.b2 - (1.0 - 2.0 * 2f64.sqrt() / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let p = tree(2);
        let o = Vertex::root();
        assert_eq!(distance(&o, &o), 0);
        let v = Vertex::from_word(&p, vec![0, 1, 0]).unwrap();
        assert_eq!(distance(&o, &v), 3);
        let a = Vertex::from_word(&p, vec![0]).unwrap();
        let b = Vertex::from_word(&p, vec![2]).unwrap();
        assert_eq!(distance(&a, &b), 2);
        assert!(Vertex::from_word(&p, vec![1, 1]).is_err());
        assert!(Vertex::from_word(&p, vec![3]).is_err());
    }

    #[test]
    fn sphere_and_ball_counts() {
        let p = tree(2);
        assert_eq!(p.sphere_size(0), 1);
        assert_eq!(p.sphere_size(1), 3);
        assert_eq!(p.sphere_size(2), 6);
        assert_eq!(p.ball_volume(0), 1);
        assert_eq!(p.ball_volume(2), 10);
        assert_eq!(p.ball_volume(3), 22);
        for n in 1..60 {
            assert_eq!(p.sphere_size(n + 1), 2 * p.sphere_size(n));
        }
        assert_eq!(p.sphere_size(500), u128::MAX);
        assert!((p.ball_volume_f64(10) - 3070.0).abs() < 1e-9);
    }

    #[test]
    fn ball_enumeration() {
        assert_eq!(enumerate_ball(&tree(2), 1).unwrap().len(), 4);
        assert_eq!(enumerate_ball(&tree(2), 10).unwrap().len(), 3070);
        assert_eq!(enumerate_ball(&tree(3), 2).unwrap().len(), 17);
        match enumerate_ball(&tree(2), 20) {
            Err(Error::BudgetExceeded { required, .. }) => assert_eq!(required, 3_145_726),
            other => panic!("expected budget error, got {other:?}"),
        }
        let ball = enumerate_ball(&tree(2), 3).unwrap();
        for (i, v) in ball.vertices.iter().enumerate() {
            assert_eq!(ball.index_of(v), Some(i));
            assert!(v.depth() <= 3);
        }
        for w in ball.vertices.windows(2) {
            assert!((w[0].depth(), &w[0]) < (w[1].depth(), &w[1]));
        }
        let json: serde_json::Value = serde_json::from_str(&ball.to_json()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 22);
        assert_eq!(json[0]["parent"], serde_json::Value::Null);
        assert_eq!(json[5]["parent"], 1);
    }

    #[test]
    fn metric_on_small_balls() {
        let p = tree(2);
        for r in 0..=5 {
            let ball = enumerate_ball(&p, r).unwrap();
            let vs = &ball.vertices;
            for a in vs {
                for b in vs {
                    let dab = distance(a, b);
                    assert_eq!(dab, distance(b, a));
                    assert_eq!(dab == 0, a == b);
                    assert_eq!(dab == 1, a.is_adjacent(b));
                }
            }
            if r == 3 {
                for a in vs {
                    for b in vs {
                        for c in vs {
                            assert!(distance(a, c) <= distance(a, b) + distance(b, c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_profile_matches_enumeration() {
        for q in [2u32, 3] {
            let p = tree(q);
            let ball = enumerate_ball(&p, 6).unwrap();
            for x in ball.vertices.iter().filter(|v| v.depth() <= 3) {
                for k in 0..=3 {
                    let mut counts: HashMap<usize, f64> = HashMap::new();
                    for y in ball.vertices.iter().filter(|v| v.depth() == k) {
                        *counts.entry(distance(x, y)).or_default() += 1.0;
                    }
                    let profile: HashMap<usize, f64> = p.sphere_profile(x.depth(), k).into_iter().collect();
                    assert_eq!(counts, profile, "q={q} x={x:?} k={k}");
                }
            }
        }
    }

    #[test]
    fn volume_condition_holds() {
        let rep = check_volume_conditions(&tree(2), 20).unwrap();
        assert!(rep.pass);
        // V(r+1) = 2 V(r) + 1 for q = 2
        assert!(rep.c1 <= 0.5 + 1e-12, "{rep:?}");
        assert!((rep.growth_band.1 / 2.0 - 1.0).abs() < 0.5);
        assert!(check_volume_conditions(&tree(3), 10).unwrap().pass);
        let p = tree(2);
        let late = p.ball_volume_f64(40) / p.ball_volume_f64(39);
        assert!((late - 2.0).abs() < 1e-9);
        assert!(check_volume_conditions(&p, 1).is_err());
    }

    #[test]
    fn sphere_sampler_lands_on_sphere() {
        let p = tree(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Vertex::from_word(&p, vec![1, 2, 0]).unwrap();
        for n in 1..12 {
            for _ in 0..50 {
                let y = uniform_sphere_vertex(&p, &x, n, &mut rng);
                assert_eq!(distance(&x, &y), n);
            }
        }
    }

    /// Pearson statistic of `counts` against the uniform law.
    fn chi_square_uniform(counts: &HashMap<Vertex, usize>, cells: usize, draws: usize) -> f64 {
        let e = draws as f64 / cells as f64;
        assert_eq!(counts.len(), cells);
        counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum()
    }

    #[test]
    fn sphere_sampler_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in [2u32, 3] {
            let p = tree(q);
            let x = Vertex::from_word(&p, vec![0, 1]).unwrap();
            let ball = enumerate_ball(&p, 6).unwrap();
            for n in 1..=4 {
                let sphere: Vec<&Vertex> = ball.vertices.iter().filter(|v| distance(&x, v) == n).collect();
                assert_eq!(sphere.len() as u128, p.sphere_size(n));
                let draws = 100_000;
                let mut counts: HashMap<Vertex, usize> = HashMap::new();
                for _ in 0..draws {
                    *counts.entry(uniform_sphere_vertex(&p, &x, n, &mut rng)).or_default() += 1;
                }
                let stat = chi_square_uniform(&counts, sphere.len(), draws);
                let df = (sphere.len() - 1) as f64;
                let pval = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
                assert!(pval > 1e-3, "q={q} n={n} chi2={stat} p={pval}");
            }
        }
    }

    #[test]
    fn sphere_two_cells_within_three_sigma() {
        // exhaustive oracle: the six vertices at distance 2 from o for q = 2
        let p = tree(2);
        let o = Vertex::root();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 60_000usize;
        let mut counts: HashMap<Vertex, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(uniform_sphere_vertex(&p, &o, 2, &mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let pr = 1.0 / 6.0;
        let sigma = (draws as f64 * pr * (1.0 - pr)).sqrt();
        for c in counts.values() {
            assert!((*c as f64 - draws as f64 * pr).abs() < 3.0 * sigma);
        }
    }
}
