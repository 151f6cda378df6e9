//! Quadratic-loss delegation with two principals: regime condition checks,
//! equilibrium menu construction, and cross-validation against the finite
//! solver on discretized instances.
//!
//! Agent utility is −(t − o₁ − o₂)², principal i's is −r_i(t)(o_i − o_i*(t))².

use serde::{Deserialize, Serialize};

use crate::assembly::{best_response_iteration, check_compatibility, IterationOutcome, Variant};
use crate::error::{Error, Result};
use crate::game::{Choice, FiniteGame, Selection};
use crate::numeric::{cumulative_trapezoid, grid_with, Curve, Distribution};
use crate::par;
use crate::rational::Rational;
use crate::screening::ScreeningOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalSpec {
    /// r_i(t) > 0.
    pub weight: Curve,
    /// o_i*(t).
    pub ideal: Curve,
    /// O_i = [lo, hi].
    pub outcomes: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelegationModel {
    pub distribution: Distribution,
    pub principals: [PrincipalSpec; 2],
    /// Default grid size for checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl DelegationModel {
    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        for (k, p) in self.principals.iter().enumerate() {
            p.weight.validate()?;
            p.ideal.validate()?;
            if !(p.outcomes[0] <= p.outcomes[1]) {
                return Err(Error::Schema(format!("outcome interval of principal {} is empty", k + 1)));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        self.distribution.support()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or_else(|| self.distribution.default_tolerance())
    }

    pub fn grid_size(&self) -> usize {
        self.grid.unwrap_or(1001)
    }

    /// κ = min_t r_d(t) / 2 over the grid.
    pub fn kappa(&self, d: usize, grid: &[f64]) -> f64 {
        grid.iter().map(|&t| self.principals[d].weight.eval(t)).fold(f64::INFINITY, f64::min) / 2.0
    }
}

/// Which equilibrium regime to certify. Principals are numbered 1 and 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegimeSpec {
    /// `principal` grants full discretion; the other has a constant ideal.
    FullDelegation { principal: u8 },
    /// `principal` implements its own ideal; the other has a constant ideal.
    NoCompromise { principal: u8 },
    BothNoCompromise,
    /// Principal 1 offers `levels` on the segments cut at `cutpoints`;
    /// principal 2 fully delegates within each segment.
    Piecewise { cutpoints: Vec<f64>, levels: Vec<f64> },
}

fn roles(principal: u8) -> Result<(usize, usize)> {
    match principal {
        1 => Ok((1, 0)),
        2 => Ok((0, 1)),
        _ => Err(Error::Invalid(format!("principal must be 1 or 2, got {principal}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    /// Worst sampled margin; the condition passes when it is ≥ −tolerance.
    pub margin: Option<f64>,
    /// Where the worst margin occurred.
    pub at: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    pub tolerance: f64,
    pub grid_points: usize,
    pub kappa: Option<f64>,
    pub conditions: Vec<Condition>,
    /// Assembled multiplier samples (t, Λ(t)).
    pub multiplier: Vec<[f64; 2]>,
    /// Worst adjacent increment of the assembled multiplier.
    pub multiplier_margin: Option<f64>,
    /// Estimated quadrature error of the integral identity.
    pub quadrature_error: Option<f64>,
}

fn condition(name: &str, margin: Option<f64>, at: Option<f64>, tol: f64, detail: impl Into<String>) -> Condition {
    Condition { name: name.into(), pass: margin.is_none_or(|m| m >= -tol), margin, at, detail: detail.into() }
}

/// Worst value and its location.
fn worst(items: impl Iterator<Item = (f64, f64)>) -> (Option<f64>, Option<f64>) {
    let mut m: Option<(f64, f64)> = None;
    for (v, t) in items {
        if m.is_none_or(|(b, _)| v < b) {
            m = Some((v, t));
        }
    }
    (m.map(|x| x.0), m.map(|x| x.1))
}

/// Index of the segment containing t: segment x covers [c_{x-1}, c_x), the
/// last one is closed.
fn segment_of(cutpoints: &[f64], t: f64) -> usize {
    cutpoints.partition_point(|&c| c <= t)
}

/// Check the conditions of a regime on a grid of `n` points (cutpoints added).
pub fn check_regime(model: &DelegationModel, spec: &RegimeSpec, n: usize) -> Result<ConditionReport> {
    model.validate()?;
    if n < 3 {
        return Err(Error::Invalid("grid needs at least 3 points".into()));
    }
    match spec {
        RegimeSpec::FullDelegation { principal } => {
            let (p, d) = roles(*principal)?;
            let (lo, _) = model.support();
            let level = model.principals[p].ideal.eval(lo);
            check_segments(model, p, d, &[], &[level], n)
        }
        RegimeSpec::Piecewise { cutpoints, levels } => check_segments(model, 0, 1, cutpoints, levels, n),
        RegimeSpec::NoCompromise { principal } => {
            let (p, d) = roles(*principal)?;
            check_no_compromise(model, p, d, n)
        }
        RegimeSpec::BothNoCompromise => {
            let (lo, hi) = model.support();
            let tol = model.tolerance();
            let grid = grid_with(lo, hi, n, &[]);
            let (margin, at) = worst(grid.iter().map(|&t| {
                let s = model.principals[0].ideal.eval(t) + model.principals[1].ideal.eval(t);
                (-(s - t).abs(), t)
            }));
            let c = condition("ideals sum to the type", margin, at, tol, "max |o1*(t) + o2*(t) - t|");
            Ok(ConditionReport {
                pass: c.pass,
                tolerance: tol,
                grid_points: grid.len(),
                kappa: None,
                conditions: vec![c],
                multiplier: Vec::new(),
                multiplier_margin: None,
                quadrature_error: None,
            })
        }
    }
}

fn check_segments(model: &DelegationModel, p: usize, d: usize, cutpoints: &[f64], levels: &[f64], n: usize) -> Result<ConditionReport> {
    let (lo, hi) = model.support();
    let tol = model.tolerance();
    if levels.len() != cutpoints.len() + 1 {
        return Err(Error::Invalid("need one level per segment".into()));
    }
    if cutpoints.windows(2).any(|w| !(w[0] < w[1])) || cutpoints.iter().any(|&c| !(c > lo && c < hi)) {
        return Err(Error::Invalid("cutpoints must increase strictly inside the type interval".into()));
    }
    let [olo, ohi] = model.principals[p].outcomes;
    if let Some(l) = levels.iter().find(|&&l| l < olo - tol || l > ohi + tol) {
        return Err(Error::Invalid(format!("level {l} outside O{} = [{olo}, {ohi}]", p + 1)));
    }
    let grid = grid_with(lo, hi, n, cutpoints);
    let seg: Vec<usize> = grid.iter().map(|&t| segment_of(cutpoints, t)).collect();
    for x in 0..levels.len() {
        let count = seg.iter().filter(|&&s| s == x).count();
        if count < 3 {
            return Err(Error::Invalid(format!("grid too coarse: segment {} has {count} points", x + 1)));
        }
    }
    let dist = &model.distribution;
    let kappa = model.kappa(d, &grid);
    let pd = &model.principals[d];
    let lam = |level: f64, t: f64| kappa * dist.cdf(t) + 2.0 * pd.weight.eval(t) * (t - level - pd.ideal.eval(t)) * dist.pdf(t);
    let level_at = |k: usize| levels[seg[k]];
    let mut conditions = Vec::new();

    let (m, at) = worst(grid.iter().enumerate().map(|(k, &t)| (-(model.principals[p].ideal.eval(t) - level_at(k)).abs(), t)));
    conditions.push(condition("constant ideal matches the regime level", m, at, tol, format!("principal {} ideal vs levels", p + 1)));

    let [dlo, dhi] = pd.outcomes;
    let (m, at) = worst(grid.iter().enumerate().map(|(k, &t)| {
        let o = t - level_at(k);
        ((o - dlo).min(dhi - o), t)
    }));
    conditions.push(condition("delegated choice lies in the outcome set", m, at, tol, format!("t - level within O{}", d + 1)));

    // (i) per-segment monotonicity; the last segment includes the right end
    let values: Vec<f64> = par::map_range(grid.len(), |k| lam(level_at(k), grid[k]));
    let (m, at) = worst((1..grid.len()).filter(|&k| seg[k] == seg[k - 1]).map(|k| (values[k] - values[k - 1], grid[k])));
    conditions.push(condition("(i) multiplier increasing within segments", m, at, tol, "min adjacent increment"));

    // (ii) upward jumps; left limits by linear extrapolation of the two
    // nearest samples strictly left of the cutpoint
    let jumps = cutpoints.iter().enumerate().map(|(x, &c)| {
        let b = grid.iter().rposition(|&t| t < c).expect("segment has points");
        let (ta, tb) = (grid[b - 1], grid[b]);
        let (la, lb) = (lam(levels[x], ta), lam(levels[x], tb));
        let left = lb + (lb - la) / (tb - ta) * (c - tb);
        (lam(levels[x + 1], c) - left, c)
    });
    let (m, at) = worst(jumps);
    conditions.push(condition(
        "(ii) upward multiplier jumps at cutpoints",
        m,
        at,
        tol,
        if cutpoints.is_empty() { "no cutpoints" } else { "right value minus extrapolated left limit" },
    ));

    let low = lo - levels[0] - pd.ideal.eval(lo);
    conditions.push(condition("(iii) lower boundary equality", Some(-low.abs()), Some(lo), tol, format!("residual {low:e}")));
    let high = hi - levels[levels.len() - 1] - pd.ideal.eval(hi);
    conditions.push(condition("(iii) upper boundary inequality", Some(-high), Some(hi), tol, format!("residual {high:e}")));

    // assembled multiplier: segment formula on [lo, hi), κF at hi
    let mut multiplier: Vec<[f64; 2]> = grid.iter().zip(&values).map(|(&t, &v)| [t, v]).collect();
    let last = multiplier.len() - 1;
    multiplier[last][1] = kappa * dist.cdf(hi);
    let (mm, _) = worst(multiplier.windows(2).map(|w| (w[1][1] - w[0][1], w[1][0])));

    Ok(ConditionReport {
        pass: conditions.iter().all(|c| c.pass),
        tolerance: tol,
        grid_points: grid.len(),
        kappa: Some(kappa),
        conditions,
        multiplier,
        multiplier_margin: mm,
        quadrature_error: None,
    })
}

fn check_no_compromise(model: &DelegationModel, p: usize, d: usize, n: usize) -> Result<ConditionReport> {
    let (lo, hi) = model.support();
    let tol = model.tolerance();
    let grid = grid_with(lo, hi, n, &[]);
    let op = model.principals[p].ideal.eval(lo);
    let mut conditions = Vec::new();
    let (m, at) = worst(grid.iter().map(|&t| (-(model.principals[p].ideal.eval(t) - op).abs(), t)));
    conditions.push(condition("constant ideal matches the regime level", m, at, tol, format!("principal {} ideal is constant", p + 1)));
    let od: Vec<f64> = grid.iter().map(|&t| model.principals[d].ideal.eval(t)).collect();
    let [dlo, dhi] = model.principals[d].outcomes;
    let (m, at) = worst(grid.iter().zip(&od).map(|(&t, &o)| ((o - dlo).min(dhi - o), t)));
    conditions.push(condition("ideal lies in the outcome set", m, at, tol, format!("o{}* within O{}", d + 1, d + 1)));
    let integral = cumulative_trapezoid(&grid, &od);
    // the same integral on every other point estimates the quadrature error
    let coarse_x: Vec<f64> = grid.iter().step_by(2).copied().collect();
    let coarse_y: Vec<f64> = od.iter().step_by(2).copied().collect();
    let coarse = cumulative_trapezoid(&coarse_x, &coarse_y);
    let qerr = coarse.iter().enumerate().map(|(k, c)| (c - integral[2 * k]).abs() / 3.0).fold(0.0, f64::max);
    let base = od[0] * od[0] / 2.0 - (lo - op) * od[0];
    let residual: Vec<(f64, f64)> = grid
        .iter()
        .zip(&od)
        .zip(&integral)
        .map(|((&t, &o), &i)| ((t - op) * o - o * o / 2.0 + base - i, t))
        .collect();
    let (m, at) = worst(residual.iter().map(|&(r, t)| (-(r.abs() - qerr).max(0.0), t)));
    conditions.push(condition("integral identity", m, at, tol, format!("quadrature error estimate {qerr:e}")));
    Ok(ConditionReport {
        pass: conditions.iter().all(|c| c.pass),
        tolerance: tol,
        grid_points: grid.len(),
        kappa: None,
        conditions,
        multiplier: Vec::new(),
        multiplier_margin: None,
        quadrature_error: Some(qerr),
    })
}

// ---------------------------------------------------------------------------
// Construction

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MenuShape {
    Finite { items: Vec<f64> },
    /// ⋃ {s − offset : s ∈ [from, to)} (last piece closed).
    Intervals { pieces: Vec<IntervalPiece> },
    /// The image {o*(s)} of an ideal-point curve, sampled on the grid.
    Image { samples: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalPiece {
    pub from: f64,
    pub to: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelegationProfile {
    /// Menus of principal 1 and 2.
    pub menus: [MenuShape; 2],
    /// Grid sample of principal 2's menu.
    pub menu2_samples: Vec<f64>,
    /// (t, o₁(t), o₂(t)).
    pub allocation: Vec<[f64; 3]>,
    /// max |t − o₁ − o₂|; only for regimes where the agent reaches the bliss point.
    pub bliss_residual: Option<f64>,
    /// max |Ξ(t)| of the envelope slack, same scope.
    pub slack: Option<f64>,
}

/// Closed-form allocation t ↦ (o₁, o₂) of a regime.
pub fn closed_allocation(model: &DelegationModel, spec: &RegimeSpec, t: f64) -> Result<[f64; 2]> {
    let (lo, _) = model.support();
    let ideal = |i: usize, t: f64| model.principals[i].ideal.eval(t);
    Ok(match spec {
        RegimeSpec::FullDelegation { principal } => {
            let (p, d) = roles(*principal)?;
            let mut o = [0.0; 2];
            o[p] = ideal(p, lo);
            o[d] = t - o[p];
            o
        }
        RegimeSpec::NoCompromise { principal } => {
            let (p, d) = roles(*principal)?;
            let mut o = [0.0; 2];
            o[p] = ideal(p, lo);
            o[d] = ideal(d, t);
            o
        }
        RegimeSpec::BothNoCompromise => [ideal(0, t), ideal(1, t)],
        RegimeSpec::Piecewise { cutpoints, levels } => {
            let l = levels[segment_of(cutpoints, t)];
            [l, t - l]
        }
    })
}

/// Nearest point of a sorted finite set; ties go to the smaller element.
pub fn project(set: &[f64], z: f64) -> f64 {
    let k = set.partition_point(|&v| v < z);
    if k == 0 {
        return set[0];
    }
    if k == set.len() {
        return set[k - 1];
    }
    let (a, b) = (set[k - 1], set[k]);
    if z - a <= b - z {
        a
    } else {
        b
    }
}

/// Build the equilibrium menus of a regime that passed [`check_regime`].
pub fn build_delegation_profile(model: &DelegationModel, spec: &RegimeSpec, report: &ConditionReport) -> Result<DelegationProfile> {
    if !report.pass {
        return Err(Error::Precondition("regime conditions did not pass".into()));
    }
    let (lo, hi) = model.support();
    let cuts: &[f64] = match spec {
        RegimeSpec::Piecewise { cutpoints, .. } => cutpoints,
        _ => &[],
    };
    let grid = grid_with(lo, hi, report.grid_points.max(3), cuts);
    let alloc: Vec<[f64; 3]> = grid
        .iter()
        .map(|&t| closed_allocation(model, spec, t).map(|[a, b]| [t, a, b]))
        .collect::<Result<_>>()?;
    let image = |i: usize| MenuShape::Image { samples: grid.iter().map(|&t| model.principals[i].ideal.eval(t)).collect() };
    let intervals = |cutpoints: &[f64], levels: &[f64]| {
        let mut bounds = vec![lo];
        bounds.extend_from_slice(cutpoints);
        bounds.push(hi);
        MenuShape::Intervals {
            pieces: levels.iter().enumerate().map(|(x, &l)| IntervalPiece { from: bounds[x], to: bounds[x + 1], offset: l }).collect(),
        }
    };
    // (menus, peaked principal, its finite menu) per regime
    let (menus, finite_set): ([MenuShape; 2], Option<(usize, Vec<f64>)>) = match spec {
        RegimeSpec::FullDelegation { principal } => {
            let (p, _) = roles(*principal)?;
            let level = model.principals[p].ideal.eval(lo);
            let fin = MenuShape::Finite { items: vec![level] };
            let int = intervals(&[], &[level]);
            (if p == 0 { [fin, int] } else { [int, fin] }, Some((p, vec![level])))
        }
        RegimeSpec::Piecewise { cutpoints, levels } => {
            let mut items = levels.clone();
            items.sort_by(f64::total_cmp);
            items.dedup();
            ([MenuShape::Finite { items: items.clone() }, intervals(cutpoints, levels)], Some((0, items)))
        }
        RegimeSpec::NoCompromise { principal } => {
            let (p, d) = roles(*principal)?;
            let fin = MenuShape::Finite { items: vec![model.principals[p].ideal.eval(lo)] };
            (if p == 0 { [fin, image(d)] } else { [image(d), fin] }, None)
        }
        RegimeSpec::BothNoCompromise => {
            let mut s: Vec<f64> = grid.iter().map(|&t| model.principals[0].ideal.eval(t)).collect();
            s.sort_by(f64::total_cmp);
            s.dedup();
            ([image(0), image(1)], Some((0, s)))
        }
    };
    let menu2_samples: Vec<f64> = alloc.iter().map(|a| a[2]).collect();
    let (bliss_residual, slack) = match (spec, finite_set) {
        (RegimeSpec::NoCompromise { .. }, _) | (_, None) => (None, None),
        (_, Some((p, set))) => {
            let d = 1 - p;
            let bliss = alloc.iter().map(|a| (a[0] - a[1] - a[2]).abs()).fold(0.0, f64::max);
            // Ξ(t) with the agent's projected choice from the peaked principal's menu
            let z: Vec<f64> = alloc.iter().map(|a| project(&set, a[0] - a[1 + d]) + a[1 + d]).collect();
            let psi: Vec<f64> = alloc.iter().zip(&z).map(|(a, &z)| a[0] * z - z * z / 2.0).collect();
            let integral = cumulative_trapezoid(&grid, &z);
            let xi = psi.iter().zip(&integral).map(|(ps, i)| (ps - psi[0] - i).abs()).fold(0.0, f64::max);
            (Some(bliss), Some(xi))
        }
    };
    Ok(DelegationProfile { menus, menu2_samples, allocation: alloc, bliss_residual, slack })
}

// ---------------------------------------------------------------------------
// Discretized cross-validation

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XvalReport {
    pub n_types: usize,
    pub n_outcomes: usize,
    /// Largest outcome-grid step of the two principals.
    pub outcome_step: f64,
    /// A mutual screening profile was reached by best responses.
    pub found: bool,
    pub rounds: usize,
    pub upr: Option<bool>,
    pub sup_distance: Option<f64>,
    /// (t, o₁, o₂) from the finite solver.
    pub finite_allocation: Vec<[f64; 3]>,
    pub closed_allocation: Vec<[f64; 3]>,
    pub note: Option<String>,
}

fn rational(x: f64) -> Result<Rational> {
    Rational::from_f64(x).ok_or_else(|| Error::Numeric(format!("non-finite value {x}")))
}

fn rational_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<Rational>> {
    let (lo, hi) = (rational(lo)?, rational(hi)?);
    Ok((0..n).map(|k| &lo + &(&(&hi - &lo) * &Rational::new(k as i64, n as i64 - 1))).collect())
}

/// The finite game obtained by sampling types and outcomes on uniform grids.
pub fn discretize(model: &DelegationModel, n_types: usize, n_outcomes: usize) -> Result<FiniteGame> {
    model.validate()?;
    if n_types < 2 || n_outcomes < 2 {
        return Err(Error::Invalid("discretization needs at least two points".into()));
    }
    let (lo, hi) = model.support();
    let types = rational_grid(lo, hi, n_types)?;
    let outs = [
        rational_grid(model.principals[0].outcomes[0], model.principals[0].outcomes[1], n_outcomes)?,
        rational_grid(model.principals[1].outcomes[0], model.principals[1].outcomes[1], n_outcomes)?,
    ];
    let weights: Vec<Rational> = types.iter().map(|t| rational(model.distribution.pdf(t.to_f64()))).collect::<Result<_>>()?;
    let total: Rational = weights.iter().sum();
    let type_labels: Vec<String> = types.iter().map(|t| format!("t={t}")).collect();
    let out_labels: Vec<Vec<String>> = outs.iter().map(|o| o.iter().map(|x| x.to_string()).collect()).collect();
    let type_args: Vec<(&str, Rational)> = type_labels.iter().zip(&weights).map(|(l, w)| (l.as_str(), w / &total)).collect();
    let o1: Vec<&str> = out_labels[0].iter().map(String::as_str).collect();
    let o2: Vec<&str> = out_labels[1].iter().map(String::as_str).collect();
    let mut own: Vec<Vec<Vec<Rational>>> = Vec::new();
    for (i, grid) in outs.iter().enumerate() {
        let spec = &model.principals[i];
        let rows = grid
            .iter()
            .map(|o| {
                types
                    .iter()
                    .map(|t| {
                        let tf = t.to_f64();
                        let gap = o - &rational(spec.ideal.eval(tf))?;
                        Ok(-(rational(spec.weight.eval(tf))? * &(&gap * &gap)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        own.push(rows);
    }
    FiniteGame::independent(
        &["1", "2"],
        &[&o1, &o2],
        &type_args,
        |p, t| {
            let gap = &(&types[t] - &outs[0][p[0]]) - &outs[1][p[1]];
            -(&gap * &gap)
        },
        |i, o, t| own[i][o][t].clone(),
    )
}

/// Compare the finite solver's allocation with the closed form.
pub fn cross_validate_discretized(
    model: &DelegationModel,
    spec: &RegimeSpec,
    n_types: usize,
    n_outcomes: usize,
) -> Result<XvalReport> {
    if n_types < 5 || n_outcomes < 5 {
        return Err(Error::Invalid("discretization sizes must be at least 5".into()));
    }
    let report = check_regime(model, spec, model.grid_size())?;
    if !report.pass {
        return Err(Error::Precondition("regime conditions did not pass".into()));
    }
    let game = discretize(model, n_types, n_outcomes)?;
    let step = (0..2)
        .map(|i| (model.principals[i].outcomes[1] - model.principals[i].outcomes[0]) / (n_outcomes - 1) as f64)
        .fold(0.0, f64::max);
    let (lo, hi) = model.support();
    let ts: Vec<f64> = rational_grid(lo, hi, n_types)?.iter().map(Rational::to_f64).collect();
    let closed: Vec<[f64; 3]> = ts
        .iter()
        .map(|&t| closed_allocation(model, spec, t).map(|[a, b]| [t, a, b]))
        .collect::<Result<_>>()?;
    let iter = best_response_iteration(&game, game.full_profile(), 32, ScreeningOptions::default())?;
    let rounds = iter.rounds;
    let IterationOutcome::FixedPoint(fp) = iter.outcome else {
        return Ok(XvalReport {
            n_types,
            n_outcomes,
            outcome_step: step,
            found: false,
            rounds,
            upr: None,
            sup_distance: None,
            finite_allocation: Vec::new(),
            closed_allocation: closed,
            note: Some("best responses did not settle on a mutual screening profile".into()),
        });
    };
    let upr = check_compatibility(&game, &fp.mechanisms, Variant::Upr, None)?;
    let value = |i: usize, o: usize| game.outcome_labels(i)[o].parse::<Rational>().map(|r| r.to_f64());
    let mut finite = Vec::with_capacity(n_types);
    for (t, &tf) in ts.iter().enumerate() {
        let pair = match upr.witnesses.get(t).cloned().flatten() {
            Some(Selection::Profile(p)) => (p[0], p[1]),
            _ => {
                let pick = |i: usize| match fp.mechanisms[i].map[t] {
                    Choice::Outcome(o) => o,
                    Choice::Quit => 0,
                };
                (pick(0), pick(1))
            }
        };
        let a = value(0, pair.0).map_err(|e| Error::Numeric(e.to_string()))?;
        let b = value(1, pair.1).map_err(|e| Error::Numeric(e.to_string()))?;
        finite.push([tf, a, b]);
    }
    let sup = finite
        .iter()
        .zip(&closed)
        .map(|(f, c)| (f[1] - c[1]).abs().max((f[2] - c[2]).abs()))
        .fold(0.0, f64::max);
    Ok(XvalReport {
        n_types,
        n_outcomes,
        outcome_step: step,
        found: true,
        rounds,
        upr: Some(upr.pass),
        sup_distance: Some(sup),
        finite_allocation: finite,
        closed_allocation: closed,
        note: None,
    })
}
