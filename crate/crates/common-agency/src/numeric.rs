//! Floating-point helpers for the continuous models: type distributions,
//! parametric curves, grids, bisection and trapezoid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A type distribution on a closed interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    /// Density linear between `f_lo` at `lo` and `f_hi` at `hi`, normalized.
    Linear { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// Tabulated density (linearly interpolated); the cdf is integrated by
    /// trapezoid when not supplied.
    Sampled {
        t: Vec<f64>,
        f: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cdf: Option<Vec<f64>>,
    },
}

impl Distribution {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Distribution::Uniform { lo, hi }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::Uniform { lo, hi } | Distribution::Linear { lo, hi, .. } => (*lo, *hi),
            Distribution::Sampled { t, .. } => (t[0], t[t.len() - 1]),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Distribution::Sampled { .. })
    }

    /// Default comparison tolerance: tight for analytic presets.
    pub fn default_tolerance(&self) -> f64 {
        if self.is_analytic() {
            1e-9
        } else {
            1e-6
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Schema(format!("bad support [{lo}, {hi}]")));
                }
            }
            Distribution::Linear { lo, hi, f_lo, f_hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Schema(format!("bad support [{lo}, {hi}]")));
                }
                if !(*f_lo > 0.0 && *f_hi > 0.0) {
                    return Err(Error::Schema("linear density must be strictly positive".into()));
                }
            }
            Distribution::Sampled { t, f, cdf } => {
                if t.len() < 2 || t.len() != f.len() {
                    return Err(Error::Schema("sampled density needs matching t and f arrays (>= 2 points)".into()));
                }
                if t.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Schema("sampled grid must be strictly increasing".into()));
                }
                if f.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::Schema("sampled density must be strictly positive".into()));
                }
                let total = trapezoid(t, f);
                if (total - 1.0).abs() > 1e-3 {
                    return Err(Error::Schema(format!("sampled density integrates to {total}")));
                }
                if let Some(c) = cdf {
                    if c.len() != t.len() {
                        return Err(Error::Schema("cdf array length mismatch".into()));
                    }
                    if c[0].abs() > 1e-6 || (c[c.len() - 1] - 1.0).abs() > 1e-6 {
                        return Err(Error::Schema("cdf must run from 0 to 1".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => 1.0 / (hi - lo),
            Distribution::Linear { lo, hi, f_lo, f_hi } => {
                let s = (x - lo) / (hi - lo);
                let z = 0.5 * (f_lo + f_hi) * (hi - lo);
                (f_lo + (f_hi - f_lo) * s) / z
            }
            Distribution::Sampled { t, f, .. } => interp(t, f, x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match self {
            Distribution::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Distribution::Linear { lo, hi, f_lo, f_hi } => {
                let w = hi - lo;
                let s = (x - lo) / w;
                let z = 0.5 * (f_lo + f_hi);
                (f_lo * s + 0.5 * (f_hi - f_lo) * s * s) / z
            }
            Distribution::Sampled { t, f, cdf } => match cdf {
                Some(c) => interp(t, c, x),
                None => {
                    let k = t.partition_point(|&v| v <= x) - 1;
                    let head = trapezoid(&t[..=k], &f[..=k]);
                    head + 0.5 * (f[k] + interp(t, f, x)) * (x - t[k])
                }
            },
        }
    }

    /// Inverse hazard rate (1 − F)/f.
    pub fn inverse_hazard(&self, x: f64) -> f64 {
        (1.0 - self.cdf(x)) / self.pdf(x)
    }
}

/// Linear interpolation on a sorted grid, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + s * (ys[k + 1] - ys[k])
}

/// A real function of the type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    /// Σ coeffs[k]·t^k.
    Polynomial { coeffs: Vec<f64> },
    /// Right-continuous: piece k applies on [breaks[k-1], breaks[k]).
    Piecewise { breaks: Vec<f64>, pieces: Vec<Curve> },
    Sampled { t: Vec<f64>, values: Vec<f64> },
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve::Constant { value }
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        Curve::Linear { intercept, slope }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Linear { intercept, slope } => intercept + slope * x,
            Curve::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Curve::Piecewise { breaks, pieces } => pieces[breaks.partition_point(|&b| b <= x)].eval(x),
            Curve::Sampled { t, values } => interp(t, values, x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Curve::Piecewise { breaks, pieces } => {
                if pieces.len() != breaks.len() + 1 {
                    return Err(Error::Schema("piecewise curve needs one more piece than breaks".into()));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Schema("piecewise breaks must increase".into()));
                }
                pieces.iter().try_for_each(Curve::validate)
            }
            Curve::Sampled { t, values } => {
                if t.len() < 2 || t.len() != values.len() || t.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Schema("sampled curve needs increasing t and matching values".into()));
                }
                Ok(())
            }
            Curve::Polynomial { coeffs } if coeffs.is_empty() => Err(Error::Schema("empty polynomial".into())),
            _ => Ok(()),
        }
    }
}

/// `n` equally spaced points on [lo, hi].
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs two points");
    (0..n).map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// Uniform grid with extra points inserted (duplicates within 1e-12 merged).
pub fn grid_with(lo: f64, hi: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut g = uniform_grid(lo, hi, n);
    g.extend(extra.iter().copied().filter(|x| *x > lo && *x < hi));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

/// Composite trapezoid rule.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (b[0] + b[1]) * (a[1] - a[0])).sum()
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..x.len() {
        acc += 0.5 * (y[k - 1] + y[k]) * (x[k] - x[k - 1]);
        out.push(acc);
    }
    out
}

/// Root of `f` on [lo, hi] by bisection, assuming `f(lo)` and `f(hi)` have
/// opposite signs (or one is zero).
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numeric(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Central differences, one-sided at the ends.
pub fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if k == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                (y[k + 1] - y[k - 1]) / (x[k + 1] - x[k - 1])
            }
        })
        .collect()
}
