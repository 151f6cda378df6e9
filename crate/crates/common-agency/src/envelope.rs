//! Upper envelopes of sampled C¹ families: active sets, kink slopes,
//! Lipschitz bounds and the envelope-formula integral identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{derivative, interp};
use crate::par;

/// Members sampled on a shared grid. Missing derivatives are filled by
/// central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledFamily {
    pub t: Vec<f64>,
    pub members: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<Vec<Vec<f64>>>,
}

impl SampledFamily {
    pub fn new(t: Vec<f64>, members: Vec<Vec<f64>>) -> Self {
        SampledFamily { t, members, derivatives: None }
    }

    /// Sample closures `f` and `df` on `t`.
    pub fn from_fns<F: Fn(f64) -> f64>(t: &[f64], fns: &[(F, F)]) -> Self {
        SampledFamily {
            t: t.to_vec(),
            members: fns.iter().map(|(f, _)| t.iter().map(|&x| f(x)).collect()).collect(),
            derivatives: Some(fns.iter().map(|(_, d)| t.iter().map(|&x| d(x)).collect()).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.len() < 2 {
            return Err(Error::Schema("family grid needs at least two points".into()));
        }
        if self.t.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Schema("family grid must be strictly increasing".into()));
        }
        if self.members.is_empty() {
            return Err(Error::Schema("family has no members".into()));
        }
        if self.members.iter().any(|m| m.len() != self.t.len()) {
            return Err(Error::Schema("member length does not match the grid".into()));
        }
        if let Some(d) = &self.derivatives {
            if d.len() != self.members.len() || d.iter().any(|m| m.len() != self.t.len()) {
                return Err(Error::Schema("derivative arrays do not align with members".into()));
            }
        }
        Ok(())
    }

    pub fn slopes(&self) -> Vec<Vec<f64>> {
        match &self.derivatives {
            Some(d) => d.clone(),
            None => self.members.iter().map(|m| derivative(&self.t, m)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Kink {
    pub at: f64,
    pub from: usize,
    pub to: usize,
    pub left_slope: f64,
    pub right_slope: f64,
    pub upward: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeAudit {
    pub sense: Sense,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub active: Vec<Vec<usize>>,
    /// Member tracked through each grid point (continuing through ties).
    pub leader: Vec<usize>,
    pub kinks: Vec<Kink>,
    /// Slope comparisons are made up to this much.
    pub tolerance: f64,
    pub lipschitz: LipschitzReport,
    /// 𝔤(t) − 𝔤(t̲) − ∫ leader slope, per grid point.
    pub integral_residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// Largest adjacent difference quotient of the envelope.
    pub quotient: f64,
    /// Largest member slope magnitude on the grid.
    pub member_bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn upper_envelope(family: &SampledFamily) -> Result<EnvelopeAudit> {
    pointwise_envelope(family, Sense::Max)
}

/// Pointwise max (or min) with active sets and kinks where the tracked member
/// changes between adjacent grid points.
pub fn pointwise_envelope(family: &SampledFamily, sense: Sense) -> Result<EnvelopeAudit> {
    family.validate()?;
    let t = &family.t;
    let n = t.len();
    let m = family.members.len();
    let slopes = family.slopes();
    let better = |a: f64, b: f64| match sense {
        Sense::Max => a > b,
        Sense::Min => a < b,
    };
    let scale = family.members.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
    let tie = 1e-12 * scale;
    let rows: Vec<(f64, Vec<usize>)> = par::map_range(n, |k| {
        let mut best = family.members[0][k];
        for j in 1..m {
            if better(family.members[j][k], best) {
                best = family.members[j][k];
            }
        }
        let active = (0..m).filter(|&j| (family.members[j][k] - best).abs() <= tie).collect();
        (best, active)
    });
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let active: Vec<Vec<usize>> = rows.into_iter().map(|r| r.1).collect();

    // among ties keep the current member, else the one heading the right way
    let pick = |set: &[usize], k: usize, prev: Option<usize>| -> usize {
        if let Some(p) = prev.filter(|p| set.contains(p)) {
            return p;
        }
        *set
            .iter()
            .reduce(|a, b| if better(slopes[*b][k], slopes[*a][k]) { b } else { a })
            .expect("nonempty active set")
    };
    let mut leader = Vec::with_capacity(n);
    for k in 0..n {
        let prev = leader.last().copied();
        leader.push(pick(&active[k], k, prev));
    }

    // slope tolerance: how much a member slope can move within one cell
    let drift = slopes
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[1] - w[0]).abs()))
        .fold(0.0f64, f64::max);
    let slope_scale = slopes.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
    let tolerance = drift + 1e-9 * slope_scale;

    let mut kinks = Vec::new();
    for k in 0..n - 1 {
        let (a, b) = (leader[k], leader[k + 1]);
        if a == b {
            continue;
        }
        let at = crossing(t, &family.members[a], &family.members[b], k);
        let left_slope = interp(t, &slopes[a], at);
        let right_slope = interp(t, &slopes[b], at);
        kinks.push(Kink { at, from: a, to: b, left_slope, right_slope, upward: right_slope >= left_slope - tolerance });
    }

    let quotient = (0..n - 1)
        .map(|k| ((values[k + 1] - values[k]) / (t[k + 1] - t[k])).abs())
        .fold(0.0, f64::max);
    let member_bound = slopes.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let lipschitz = LipschitzReport { quotient, member_bound, tolerance, pass: quotient <= member_bound + tolerance };

    let integral_residual = kink_aware_residual(t, &values, &leader, &slopes, &kinks);
    Ok(EnvelopeAudit { sense, t: t.clone(), values, active, leader, kinks, tolerance, lipschitz, integral_residual })
}

/// Where members `a` and `b` cross inside cell `k` (linear interpolation of
/// their difference).
fn crossing(t: &[f64], a: &[f64], b: &[f64], k: usize) -> f64 {
    let d0 = a[k] - b[k];
    let d1 = a[k + 1] - b[k + 1];
    if d0 == d1 {
        return t[k];
    }
    let s = (d0 / (d0 - d1)).clamp(0.0, 1.0);
    t[k] + s * (t[k + 1] - t[k])
}

/// Trapezoid integral of the leader's slope, split at each kink inside a cell.
fn kink_aware_residual(t: &[f64], values: &[f64], leader: &[usize], slopes: &[Vec<f64>], kinks: &[Kink]) -> Vec<f64> {
    let n = t.len();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut kinks = kinks.iter().peekable();
    out.push(0.0);
    for k in 0..n - 1 {
        let (a, b) = (leader[k], leader[k + 1]);
        if a == b {
            acc += 0.5 * (slopes[a][k] + slopes[a][k + 1]) * (t[k + 1] - t[k]);
        } else {
            let kink = kinks.next().expect("one kink per leader change");
            let (x, sa, sb) = (kink.at, interp(t, &slopes[a], kink.at), interp(t, &slopes[b], kink.at));
            acc += 0.5 * (slopes[a][k] + sa) * (x - t[k]);
            acc += 0.5 * (sb + slopes[b][k + 1]) * (t[k + 1] - x);
        }
        out.push(values[k + 1] - values[0] - acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KinkAudit {
    pub pass: bool,
    pub kinks: usize,
    /// First downward kink.
    pub failure: Option<Kink>,
}

/// Passes iff every kink is upward within tolerance.
pub fn kink_audit(audit: &EnvelopeAudit) -> KinkAudit {
    let failure = audit.kinks.iter().find(|k| !k.upward).cloned();
    KinkAudit { pass: failure.is_none(), kinks: audit.kinks.len(), failure }
}

/// Max |𝔙(t) − 𝔙(t̲) − ∫ slope| over the grid.
pub fn envelope_integral_check(audit: &EnvelopeAudit) -> f64 {
    audit.integral_residual.iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// Plain trapezoid version for a value function and a sampled integrand
/// supplied by the caller.
pub fn integral_residual(t: &[f64], value: &[f64], integrand: &[f64]) -> Result<Vec<f64>> {
    if t.len() != value.len() || t.len() != integrand.len() || t.len() < 2 {
        return Err(Error::Schema("value and integrand must align with the grid".into()));
    }
    let acc = crate::numeric::cumulative_trapezoid(t, integrand);
    Ok(value.iter().zip(&acc).map(|(v, a)| v - value[0] - a).collect())
}

pub fn lipschitz_audit(audit: &EnvelopeAudit) -> &LipschitzReport {
    &audit.lipschitz
}
