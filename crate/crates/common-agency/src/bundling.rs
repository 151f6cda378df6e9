//! Duopoly bundling under intrinsic common agency: cutoff types, jointly
//! optimal bundle pairs, market-splitting checks and base-plus-upgrade menus.
//!
//! Bundles are bitmasks over `goods` goods. The consumer pays both firms and
//! either buys from both or from neither.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, derivative, grid_with, interp, Distribution};
use crate::par;

pub type Bundle = u32;

pub const MAX_GOODS: usize = 6;

/// Gross valuation U((b₁, b₂), t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Valuation {
    /// t · g(b₁ ∪ b₂).
    Union { g: Vec<f64> },
    /// t · [g(b₁ ∪ b₂) − g(b₁ ∩ b₂)].
    UnionMinusIntersection { g: Vec<f64> },
    /// t · g(b₁ ∪ b₂) + premium(b₂) · t · (t − t̲): the second firm's larger
    /// bundles gain value faster for high types.
    UpgradePremium { g: Vec<f64>, premium: Vec<f64> },
    /// `values[b₁ · 2^r + b₂][k]` on the grid `t`; U_t by central differences.
    Tabulated { t: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundlingModel {
    pub goods: usize,
    pub valuation: Valuation,
    pub distribution: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Relative tie tolerance for argmax sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_tolerance: Option<f64>,
}

/// Bundle as a sorted list of 1-based goods, e.g. `{1,2}` → "12", ∅ → "∅".
pub fn bundle_label(b: Bundle) -> String {
    if b == 0 {
        return "∅".into();
    }
    (0..32).filter(|k| b >> k & 1 == 1).map(|k| (k + 1).to_string()).collect::<Vec<_>>().join("")
}

pub fn parse_bundle(s: &str, goods: usize) -> Result<Bundle> {
    let s = s.trim();
    if s == "∅" || s.is_empty() || s == "{}" {
        return Ok(0);
    }
    let mut b = 0;
    for c in s.trim_matches(|c| c == '{' || c == '}').chars().filter(|c| *c != ',') {
        let k = c.to_digit(10).ok_or_else(|| Error::Schema(format!("bad bundle {s:?}")))? as usize;
        if k == 0 || k > goods {
            return Err(Error::UnknownLabel(format!("good {k} in bundle {s:?}")));
        }
        b |= 1 << (k - 1);
    }
    Ok(b)
}

impl BundlingModel {
    pub fn n_bundles(&self) -> usize {
        1 << self.goods
    }

    pub fn full(&self) -> Bundle {
        (self.n_bundles() - 1) as Bundle
    }

    pub fn complement(&self, b: Bundle) -> Bundle {
        self.full() & !b
    }

    pub fn grid_size(&self) -> usize {
        self.grid.unwrap_or(2001)
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance.unwrap_or(1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        if self.goods > MAX_GOODS {
            return Err(Error::BoundExceeded { what: "goods", limit: MAX_GOODS, got: self.goods });
        }
        self.distribution.validate()?;
        let n = self.n_bundles();
        let check_g = |g: &[f64]| -> Result<()> {
            if g.len() != n {
                return Err(Error::Schema(format!("g table needs {n} entries (one per bundle bitmask)")));
            }
            for a in 0..n {
                for b in 0..n {
                    if a != b && a & b == a && !(g[a] < g[b]) {
                        return Err(Error::Schema(format!(
                            "g must be strictly increasing in inclusion: g({}) >= g({})",
                            bundle_label(a as Bundle),
                            bundle_label(b as Bundle)
                        )));
                    }
                }
            }
            Ok(())
        };
        match &self.valuation {
            Valuation::Union { g } | Valuation::UnionMinusIntersection { g } => check_g(g)?,
            Valuation::UpgradePremium { g, premium } => {
                check_g(g)?;
                if premium.len() != n || premium.iter().any(|p| *p < 0.0) {
                    return Err(Error::Schema(format!("premium table needs {n} nonnegative entries")));
                }
            }
            Valuation::Tabulated { t, values } => {
                if values.len() != n * n || values.iter().any(|v| v.len() != t.len()) || t.len() < 3 {
                    return Err(Error::Schema("tabulated valuation needs one row per bundle pair on a shared grid".into()));
                }
                let (lo, hi) = self.distribution.support();
                if (t[0] - lo).abs() > 1e-12 || (t[t.len() - 1] - hi).abs() > 1e-12 {
                    return Err(Error::Schema("tabulated grid must span the type interval".into()));
                }
            }
        }
        if let Some(cap) = self.price_cap {
            if !(cap > 0.0) {
                return Err(Error::Schema("price cap must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn u(&self, b1: Bundle, b2: Bundle, t: f64) -> f64 {
        let (u, i) = (b1 | b2, b1 & b2);
        match &self.valuation {
            Valuation::Union { g } => t * g[u as usize],
            Valuation::UnionMinusIntersection { g } => t * (g[u as usize] - g[i as usize]),
            Valuation::UpgradePremium { g, premium } => {
                let lo = self.distribution.support().0;
                t * g[u as usize] + premium[b2 as usize] * t * (t - lo)
            }
            Valuation::Tabulated { t: ts, values } => interp(ts, &values[self.pair_index(b1, b2)], t),
        }
    }

    pub fn u_t(&self, b1: Bundle, b2: Bundle, t: f64) -> f64 {
        let (u, i) = (b1 | b2, b1 & b2);
        match &self.valuation {
            Valuation::Union { g } => g[u as usize],
            Valuation::UnionMinusIntersection { g } => g[u as usize] - g[i as usize],
            Valuation::UpgradePremium { g, premium } => {
                let lo = self.distribution.support().0;
                g[u as usize] + premium[b2 as usize] * (2.0 * t - lo)
            }
            Valuation::Tabulated { t: ts, values } => interp(ts, &derivative(ts, &values[self.pair_index(b1, b2)]), t),
        }
    }

    fn pair_index(&self, b1: Bundle, b2: Bundle) -> usize {
        b1 as usize * self.n_bundles() + b2 as usize
    }

    /// U − (1−F)/f · U_t.
    pub fn virtual_surplus(&self, b1: Bundle, b2: Bundle, t: f64) -> f64 {
        self.u(b1, b2, t) - self.distribution.inverse_hazard(t) * self.u_t(b1, b2, t)
    }

    pub fn pairs(&self) -> Vec<(Bundle, Bundle)> {
        let n = self.n_bundles() as Bundle;
        (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect()
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.distribution.support();
        grid_with(lo, hi, self.grid_size(), &[])
    }

    fn ties(&self, values: &[f64]) -> Vec<usize> {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = self.tie_tolerance() * max.abs().max(1.0);
        (0..values.len()).filter(|&k| values[k] >= max - tol).collect()
    }
}

// ---------------------------------------------------------------------------
// Cutoff type

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TStarVariant {
    /// ½ max U = max U − (1−F)/f · U_t at the maximizing pair.
    MarketSplit,
    /// ½ U((b, b^∁)) = (1−F)/f · U_t((b, b^∁)).
    Base { bundle: Bundle },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TStar {
    pub t: f64,
    /// (1−F)/f · U_t − ½ U at t.
    pub residual: f64,
    pub half_value: f64,
    pub rent_term: f64,
    /// The root sits at the lower end of the type interval.
    pub boundary: bool,
}

fn tstar_parts(model: &BundlingModel, variant: TStarVariant, t: f64) -> (f64, f64) {
    let (b1, b2) = match variant {
        TStarVariant::Base { bundle } => (bundle, model.complement(bundle)),
        TStarVariant::MarketSplit => {
            let mut best = (0, 0);
            let mut v = f64::NEG_INFINITY;
            for (a, b) in model.pairs() {
                let u = model.u(a, b, t);
                if u > v {
                    v = u;
                    best = (a, b);
                }
            }
            best
        }
    };
    (0.5 * model.u(b1, b2, t), model.distribution.inverse_hazard(t) * model.u_t(b1, b2, t))
}

pub fn find_tstar(model: &BundlingModel, variant: TStarVariant) -> Result<TStar> {
    model.validate()?;
    if let TStarVariant::Base { bundle } = variant {
        if bundle as usize >= model.n_bundles() {
            return Err(Error::UnknownLabel(format!("bundle {}", bundle_label(bundle))));
        }
    }
    let (lo, hi) = model.distribution.support();
    let residual = |t: f64| {
        let (h, r) = tstar_parts(model, variant, t);
        r - h
    };
    // the defining function must be monotone on the grid
    let grid = model.grid();
    let vals: Vec<f64> = par::map(&grid, |&t| residual(t));
    let tol = 1e-9 * vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let up = vals.windows(2).all(|w| w[1] >= w[0] - tol);
    let down = vals.windows(2).all(|w| w[1] <= w[0] + tol);
    if !up && !down {
        return Err(Error::Numeric("cutoff equation is not monotone in the type".into()));
    }
    let at = |t: f64, boundary: bool| {
        let (h, r) = tstar_parts(model, variant, t);
        TStar { t, residual: r - h, half_value: h, rent_term: r, boundary }
    };
    let (rlo, rhi) = (residual(lo), residual(hi));
    if rlo <= 0.0 {
        return Ok(at(lo, true));
    }
    if rhi > 0.0 {
        return Err(Error::Numeric(format!(
            "no sign change of the cutoff equation on [{lo}, {hi}]: equilibrium construction inapplicable"
        )));
    }
    let t = bisect(residual, lo, hi, 1e-13)?;
    Ok(at(t, false))
}

// ---------------------------------------------------------------------------
// Jointly optimal pairs and market splitting

/// Pairs maximizing both U and the virtual surplus at every grid type.
pub fn jointly_optimal_pairs(model: &BundlingModel) -> Result<Vec<(Bundle, Bundle)>> {
    model.validate()?;
    let pairs = model.pairs();
    let grid = model.grid();
    let per_t: Vec<Vec<bool>> = par::map(&grid, |&t| {
        let u: Vec<f64> = pairs.iter().map(|&(a, b)| model.u(a, b, t)).collect();
        let v: Vec<f64> = pairs.iter().map(|&(a, b)| model.virtual_surplus(a, b, t)).collect();
        let mut keep = vec![false; pairs.len()];
        let tu = model.ties(&u);
        let tv = model.ties(&v);
        for k in tu {
            keep[k] = true;
        }
        let mut both = vec![false; pairs.len()];
        for k in tv {
            both[k] = keep[k];
        }
        both
    });
    Ok(pairs
        .iter()
        .enumerate()
        .filter(|(k, _)| per_t.iter().all(|row| row[*k]))
        .map(|(_, p)| *p)
        .collect())
}

/// Number of distinct unordered pairs in a set of ordered pairs.
pub fn unordered_count(pairs: &[(Bundle, Bundle)]) -> usize {
    let mut s: Vec<(Bundle, Bundle)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    s.sort();
    s.dedup();
    s.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricedItem {
    #[serde(serialize_with = "ser_bundle", deserialize_with = "de_bundle")]
    pub bundle: Bundle,
    pub price: f64,
}

fn ser_bundle<S: serde::Serializer>(b: &Bundle, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&bundle_label(*b))
}

fn de_bundle<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Bundle, D::Error> {
    let s = String::deserialize(d)?;
    parse_bundle(&s, MAX_GOODS).map_err(serde::de::Error::custom)
}

pub type PricedMenu = Vec<PricedItem>;

fn validate_menu(model: &BundlingModel, menu: &PricedMenu, name: &str) -> Result<()> {
    if menu.is_empty() {
        return Err(Error::Invalid(format!("{name} is empty")));
    }
    for (k, item) in menu.iter().enumerate() {
        if item.bundle as usize >= model.n_bundles() {
            return Err(Error::UnknownLabel(format!("bundle {} in {name}", bundle_label(item.bundle))));
        }
        if menu[..k].iter().any(|x| x.bundle == item.bundle) {
            return Err(Error::Invalid(format!("bundle {} appears twice in {name}", bundle_label(item.bundle))));
        }
        if item.price < 0.0 || model.price_cap.is_some_and(|c| item.price > c) || !item.price.is_finite() {
            return Err(Error::Invalid(format!("price {} in {name} outside [0, cap]", item.price)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitReport {
    pub pass: bool,
    pub tstar: f64,
    /// ½ max U(·, t*).
    pub price: f64,
    pub jointly_optimal: Vec<(String, String)>,
    pub violation: Option<String>,
}

/// Cross-matching into the jointly optimal pairs plus equal prices at ½ max U(t*).
pub fn check_market_splitting(model: &BundlingModel, menu1: &PricedMenu, menu2: &PricedMenu) -> Result<SplitReport> {
    validate_menu(model, menu1, "menu 1")?;
    validate_menu(model, menu2, "menu 2")?;
    let ts = find_tstar(model, TStarVariant::MarketSplit)?;
    let price = ts.half_value;
    let star = jointly_optimal_pairs(model)?;
    let tol = 1e-9 * price.abs().max(1.0);
    let mut violation = None;
    if star.is_empty() {
        violation = Some("no jointly optimal bundle pairs".to_string());
    }
    for item in menu1 {
        if violation.is_none() && !menu2.iter().any(|j| star.contains(&(item.bundle, j.bundle))) {
            violation = Some(format!("firm 1 bundle {} has no jointly optimal match in menu 2", bundle_label(item.bundle)));
        }
    }
    for item in menu2 {
        if violation.is_none() && !menu1.iter().any(|i| star.contains(&(i.bundle, item.bundle))) {
            violation = Some(format!("firm 2 bundle {} has no jointly optimal match in menu 1", bundle_label(item.bundle)));
        }
    }
    for (name, menu) in [("menu 1", menu1), ("menu 2", menu2)] {
        for item in menu {
            if violation.is_none() && (item.price - price).abs() > tol {
                violation = Some(format!("{name} prices {} at {} instead of {price}", bundle_label(item.bundle), item.price));
            }
        }
    }
    Ok(SplitReport {
        pass: violation.is_none(),
        tstar: ts.t,
        price,
        jointly_optimal: star.iter().map(|&(a, b)| (bundle_label(a), bundle_label(b))).collect(),
        violation,
    })
}

/// Price both bundle lists at ½ max U(t*).
pub fn build_market_split(model: &BundlingModel, bundles1: &[Bundle], bundles2: &[Bundle]) -> Result<(PricedMenu, PricedMenu)> {
    let ts = find_tstar(model, TStarVariant::MarketSplit)?;
    let price = |bs: &[Bundle]| bs.iter().map(|&bundle| PricedItem { bundle, price: ts.half_value }).collect();
    Ok((price(bundles1), price(bundles2)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticipationAudit {
    pub pass: bool,
    /// Grid types where the cutoff rule fails.
    pub violations: Vec<f64>,
}

/// Types at or above the cutoff weakly gain from buying; lower types strictly lose.
pub fn participation_audit(model: &BundlingModel, menu1: &PricedMenu, menu2: &PricedMenu, tstar: f64) -> ParticipationAudit {
    let grid = model.grid();
    let best = |t: f64| {
        menu1
            .iter()
            .flat_map(|a| menu2.iter().map(move |b| model.u(a.bundle, b.bundle, t) - a.price - b.price))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let tol = 1e-7;
    let violations: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&t| {
            let v = best(t);
            if t >= tstar + tol {
                v < -tol
            } else if t <= tstar - tol {
                v >= tol
            } else {
                false
            }
        })
        .collect();
    ParticipationAudit { pass: violations.is_empty(), violations }
}

// ---------------------------------------------------------------------------
// Base plus upgrades

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MdStarReport {
    pub pass: bool,
    pub scope: &'static str,
    /// (b, b', worst reversal) for pairs whose surplus difference is not monotone.
    pub violations: Vec<(String, String, f64)>,
    pub worst_reversal: f64,
    /// Every single virtual surplus is itself monotone in t.
    pub surplus_monotone: bool,
}

fn reversal(d: &[f64]) -> f64 {
    // largest drop (against nondecreasing) and largest rise (against nonincreasing)
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut drop, mut rise) = (0.0f64, 0.0f64);
    for &v in d {
        hi = hi.max(v);
        lo = lo.min(v);
        drop = drop.max(hi - v);
        rise = rise.max(v - lo);
    }
    drop.min(rise)
}

/// Monotone differences of the virtual surplus φ^{base}(b, ·) over
/// deterministic bundle pairs (a necessary condition for the lottery version).
pub fn check_md_star(model: &BundlingModel, base: Bundle) -> Result<MdStarReport> {
    model.validate()?;
    let grid = model.grid();
    let n = model.n_bundles() as Bundle;
    let phi: Vec<Vec<f64>> = (0..n).map(|b| grid.iter().map(|&t| model.virtual_surplus(base, b, t)).collect()).collect();
    let scale = phi.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let pairs: Vec<(Bundle, Bundle)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let rev = par::map(&pairs, |&(a, b)| {
        let d: Vec<f64> = phi[a as usize].iter().zip(&phi[b as usize]).map(|(x, y)| x - y).collect();
        reversal(&d)
    });
    let worst = rev.iter().copied().fold(0.0, f64::max);
    let violations: Vec<(String, String, f64)> = pairs
        .iter()
        .zip(&rev)
        .filter(|(_, r)| **r > tol)
        .map(|(&(a, b), &r)| (bundle_label(a), bundle_label(b), r))
        .collect();
    let surplus_monotone = phi.iter().all(|p| reversal(p) <= tol);
    Ok(MdStarReport {
        pass: violations.is_empty(),
        scope: "necessary, deterministic-pair scope",
        violations,
        worst_reversal: worst,
        surplus_monotone,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Singleton,
    Nested,
    Tree,
    /// Neither a chain nor rooted by inclusion.
    Unstructured,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpgradeMenus {
    pub base_menu: PricedMenu,
    pub upgrade_menu: PricedMenu,
    pub breakpoints: Vec<f64>,
    pub structure: Structure,
    pub tstar: f64,
    /// On the grid, each participating type's favourite upgrade is the one assigned.
    pub ic_pass: bool,
    /// Types below the cutoff stay out, types above buy.
    pub ir_pass: bool,
}

fn structure_of(bundles: &[Bundle]) -> Structure {
    if bundles.len() == 1 {
        return Structure::Singleton;
    }
    let sub = |a: Bundle, b: Bundle| a & b == a;
    let chain = bundles.iter().all(|&a| bundles.iter().all(|&b| sub(a, b) || sub(b, a)));
    if chain {
        return Structure::Nested;
    }
    let root = bundles[0];
    if bundles.iter().all(|&b| sub(root, b)) {
        Structure::Tree
    } else {
        Structure::Unstructured
    }
}

/// Firm 1 sells `base` alone; firm 2 screens with upgrades along the
/// pointwise argmax of the virtual surplus above the cutoff.
pub fn build_base_plus_upgrades(model: &BundlingModel, base: Bundle) -> Result<UpgradeMenus> {
    let md = check_md_star(model, base)?;
    if !md.pass {
        let (a, b, r) = &md.violations[0];
        return Err(Error::Precondition(format!("MD* fails for ({a}, {b}) with reversal {r:e}")));
    }
    let ts = find_tstar(model, TStarVariant::Base { bundle: base })?;
    let (_, hi) = model.distribution.support();
    let n = model.n_bundles() as Bundle;
    // ties prefer fewer goods, then lower index
    let mut order: Vec<Bundle> = (0..n).collect();
    order.sort_by_key(|b| (b.count_ones(), *b));
    let argmax = |t: f64| -> Bundle {
        let vals: Vec<f64> = order.iter().map(|&b| model.virtual_surplus(base, b, t)).collect();
        order[model.ties(&vals)[0]]
    };
    let grid = grid_with(ts.t, hi, model.grid_size(), &[]);
    let alloc: Vec<Bundle> = par::map(&grid, |&t| argmax(t));
    let root = alloc[0];
    if root != model.complement(base) {
        return Err(Error::Precondition(format!(
            "root bundle {} at the cutoff is not the complement {} of the base",
            bundle_label(root),
            bundle_label(model.complement(base))
        )));
    }
    let mut seq = vec![root];
    let mut breakpoints = Vec::new();
    for k in 1..grid.len() {
        let (prev, cur) = (alloc[k - 1], alloc[k]);
        if prev == cur {
            continue;
        }
        if seq.contains(&cur) {
            return Err(Error::Precondition(format!("allocation returns to {} (non-monotone)", bundle_label(cur))));
        }
        let diff = |t: f64| model.virtual_surplus(base, cur, t) - model.virtual_surplus(base, prev, t);
        let tau = bisect(diff, grid[k - 1], grid[k], 1e-14).unwrap_or(grid[k]);
        breakpoints.push(tau);
        seq.push(cur);
    }
    let p_root = ts.half_value;
    let mut prices = vec![p_root];
    for (k, &tau) in breakpoints.iter().enumerate() {
        let p = prices[k] + model.u(base, seq[k + 1], tau) - model.u(base, seq[k], tau);
        prices.push(p);
    }
    let upgrade_menu: PricedMenu = seq.iter().zip(&prices).map(|(&bundle, &price)| PricedItem { bundle, price }).collect();
    let base_menu = vec![PricedItem { bundle: base, price: p_root }];
    // audits on the grid
    let tol = 1e-7 * prices.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let full_grid = model.grid();
    let mut ic_pass = true;
    let mut ir_pass = true;
    for &t in &full_grid {
        let net: Vec<f64> = upgrade_menu.iter().map(|it| model.u(base, it.bundle, t) - it.price - p_root).collect();
        let best = net.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if t < ts.t - 1e-9 {
            ir_pass &= best < tol;
            continue;
        }
        ir_pass &= best >= -tol;
        // the intended item is the last one whose breakpoint lies below t
        let k = breakpoints.partition_point(|&b| b <= t);
        ic_pass &= net[k] >= best - tol;
    }
    Ok(UpgradeMenus {
        base_menu,
        structure: structure_of(&seq),
        upgrade_menu,
        breakpoints,
        tstar: ts.t,
        ic_pass,
        ir_pass,
    })
}
