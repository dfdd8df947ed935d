//! Adaptive Gauss-Kronrod (10/21 point) quadrature for scalar and
//! vector-valued integrands, with a panel-doubling variant for `[a, inf)`.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208005048620,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Absolute tolerance floor; integrals this small carry no relative precision.
const UNDERFLOW_FLOOR: f64 = 1e-280;

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
}

/// One 21-point Kronrod panel on `[a, b]`, error estimated as `|K21 - G10|`
/// floored at a few ulps of the absolute integral.
fn kronrod<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> (Vec<f64>, Vec<f64>)
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut abs = vec![0.0; dim];

    f(c, buf);
    for i in 0..dim {
        k[i] = WGK[10] * buf[i];
        abs[i] = WGK[10] * buf[i].abs();
    }
    for j in 0..10 {
        let dx = h * XGK[j];
        for &x in &[c - dx, c + dx] {
            f(x, buf);
            for i in 0..dim {
                k[i] += WGK[j] * buf[i];
                abs[i] += WGK[j] * buf[i].abs();
                if j % 2 == 1 {
                    g[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let mut err = vec![0.0; dim];
    for i in 0..dim {
        k[i] *= h;
        g[i] *= h;
        let floor = 50.0 * f64::EPSILON * (abs[i] * h.abs());
        err[i] = (k[i] - g[i]).abs().max(floor);
    }
    (k, err)
}

/// Adaptive integration of a vector-valued integrand over consecutive
/// intervals delimited by `points` (sorted, at least two entries).
pub fn integrate_vec<F>(mut f: F, dim: usize, points: &[f64], opts: &QuadOptions) -> Result<VecQuadResult>
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(points.len() >= 2, "need at least one interval");
    let mut buf = vec![0.0; dim];
    let mut segs: Vec<Segment> = Vec::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (values, errors) = kronrod(&mut f, w[0], w[1], dim, &mut buf);
        evaluations += 21;
        segs.push(Segment {
            a: w[0],
            b: w[1],
            values,
            errors,
        });
    }
    if segs.is_empty() {
        return Ok(VecQuadResult {
            values: vec![0.0; dim],
            errors: vec![0.0; dim],
            evaluations,
        });
    }
    let mut total = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for s in &segs {
        for i in 0..dim {
            total[i] += s.values[i];
            total_err[i] += s.errors[i];
        }
    }
    loop {
        let tol: Vec<f64> = total.iter().map(|v| opts.abs_tol.max(opts.rel_tol * v.abs()).max(UNDERFLOW_FLOOR)).collect();
        let converged = (0..dim).all(|i| total_err[i] <= tol[i]);
        if converged {
            return Ok(VecQuadResult {
                values: total,
                errors: total_err,
                evaluations,
            });
        }
        if segs.len() >= opts.max_subdivisions {
            let worst = (0..dim)
                .max_by(|&i, &j| {
                    let ri = total_err[i] / tol[i].max(f64::MIN_POSITIVE);
                    let rj = total_err[j] / tol[j].max(f64::MIN_POSITIVE);
                    ri.total_cmp(&rj)
                })
                .unwrap_or(0);
            return Err(Error::Quadrature {
                value: total[worst],
                error: total_err[worst],
                tolerance: tol[worst],
            });
        }
        // bisect the segment contributing most to the worst violated component
        let badness = |s: &Segment| -> f64 {
            (0..dim)
                .map(|i| s.errors[i] / tol[i].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        };
        let (idx, _) = segs
            .iter()
            .enumerate()
            .map(|(i, s)| (i, badness(s)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty");
        let s = segs.swap_remove(idx);
        for i in 0..dim {
            total[i] -= s.values[i];
            total_err[i] -= s.errors[i];
        }
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval cannot be split further in floating point
            return Err(Error::Quadrature {
                value: s.values[0],
                error: s.errors[0],
                tolerance: tol[0],
            });
        }
        for (a, b) in [(s.a, mid), (mid, s.b)] {
            let (values, errors) = kronrod(&mut f, a, b, dim, &mut buf);
            evaluations += 21;
            for i in 0..dim {
                total[i] += values[i];
                total_err[i] += errors[i];
            }
            segs.push(Segment { a, b, values, errors });
        }
    }
}

pub fn integrate_points<F>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), 1, points, opts)?;
    Ok(QuadResult {
        value: r.values[0],
        error: r.errors[0],
        evaluations: r.evaluations,
    })
}

pub fn integrate<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate_points(f, &[a, b], opts)
}

/// Vector integral over `[a, inf)` as a sum of panels of doubling width.
///
/// Panels are added until the panel start passes `tail_start` and two
/// consecutive panels contribute less than the tolerance in every component.
pub fn integrate_vec_to_infinity<F>(
    mut f: F,
    dim: usize,
    a: f64,
    first_width: f64,
    tail_start: f64,
    opts: &QuadOptions,
) -> Result<VecQuadResult>
where
    F: FnMut(f64, &mut [f64]),
{
    const MAX_PANELS: usize = 200;
    let mut total = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    let mut evaluations = 0;
    let mut lo = a;
    let mut width = first_width;
    let mut quiet = 0;
    for _ in 0..MAX_PANELS {
        let hi = lo + width;
        let panel = integrate_vec(&mut f, dim, &[lo, hi], opts)?;
        evaluations += panel.evaluations;
        let mut negligible = true;
        for i in 0..dim {
            total[i] += panel.values[i];
            errors[i] += panel.errors[i];
            let tol = opts.abs_tol.max(opts.rel_tol * total[i].abs()).max(UNDERFLOW_FLOOR);
            if panel.values[i].abs() > tol {
                negligible = false;
            }
        }
        lo = hi;
        width *= 2.0;
        if negligible && lo >= tail_start {
            quiet += 1;
            if quiet >= 2 {
                return Ok(VecQuadResult {
                    values: total,
                    errors,
                    evaluations,
                });
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Quadrature {
        value: total[0],
        error: f64::INFINITY,
        tolerance: opts.rel_tol,
    })
}

pub fn integrate_to_infinity<F>(mut f: F, a: f64, first_width: f64, tail_start: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec_to_infinity(|x, out: &mut [f64]| out[0] = f(x), 1, a, first_width, tail_start, opts)?;
    Ok(QuadResult {
        value: r.values[0],
        error: r.errors[0],
        evaluations: r.evaluations,
    })
}
