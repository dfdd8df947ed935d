//! Goodness-of-fit helpers for comparing simulations with exact laws.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

fn p_value(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|c| c.sf(stat)).unwrap_or(f64::NAN)
}

/// Pearson test of `counts` against `probs`. Cells with expected count
/// below 5 are pooled into a remainder cell together with the mass that
/// `probs` leaves unassigned.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], total: u64) -> ChiSquare {
    assert_eq!(counts.len(), probs.len());
    let n = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut rest_obs, mut rest_p) = (total as f64, 1.0);
    let (mut pool_obs, mut pool_p) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        rest_obs -= c as f64;
        rest_p -= p;
        if n * p < 5.0 {
            pool_obs += c as f64;
            pool_p += p;
            continue;
        }
        let e = n * p;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    pool_obs += rest_obs;
    pool_p += rest_p.max(0.0);
    if n * pool_p >= 5.0 {
        let e = n * pool_p;
        stat += (pool_obs - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    ChiSquare {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
    }
}

/// Two-sample chi-square homogeneity test on binned counts; sparse bins
/// (combined count below 10) are pooled.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pa, mut pb) = (0.0, 0.0);
    let mut add = |x: f64, y: f64| {
        stat += (ka * x - kb * y).powi(2) / (x + y);
        cells += 1;
    };
    for (&x, &y) in a.iter().zip(b) {
        if x + y < 10 {
            pa += x as f64;
            pb += y as f64;
        } else {
            add(x as f64, y as f64);
        }
    }
    if pa + pb > 0.0 {
        add(pa, pb);
    }
    let dof = cells.saturating_sub(1);
    ChiSquare {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
    }
}

/// `sum |p_i - q_i| / 2`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Running mean and standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub n: u64,
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        MeanEstimate {
            n,
            mean,
            std_error: (var / n.max(1) as f64).sqrt(),
        }
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gof_exact_counts() {
        let r = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5], 1000);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[400, 100, 500], &[0.25, 0.25, 0.5], 1000);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn gof_pools_unassigned_mass() {
        // half the mass is outside the listed cells
        let r = chi_square_gof(&[250, 250], &[0.25, 0.25], 1000);
        assert_eq!(r.dof, 2);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn two_sample_identical() {
        let r = chi_square_two_sample(&[10, 20, 30, 40], &[20, 40, 60, 80]);
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn tv_and_mean() {
        assert!((total_variation(&[0.5, 0.5], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let m = MeanEstimate::from_samples([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.n, 4);
        assert!((m.mean - 2.5).abs() < 1e-15);
        assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
