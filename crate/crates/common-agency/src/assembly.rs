//! Assembling per-principal screening optima into equilibrium candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    product, AgentStrategy, Choice, DirectMechanism, FiniteGame, Menu, MenuProfile, Mode, Profile, Selection,
};
use crate::linear;
use crate::par;
use crate::rational::Rational;
use crate::screening::{candidate_menus, optimal_for_menu, solve_screening_with, ScreeningOptions, ScreeningProblem, ScreeningSolution};

/// Which compatibility condition to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Upr,
    UprI,
    UprD,
    Men,
}

impl Variant {
    /// The UPR variant matching a game's outside-option mode.
    pub fn for_mode(mode: Mode) -> Variant {
        match mode {
            Mode::Plain => Variant::Upr,
            Mode::Intrinsic => Variant::UprI,
            Mode::Delegated => Variant::UprD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub variant: Variant,
    pub pass: bool,
    /// Per-type utility-preserving selection (UPR variants, when passing).
    pub witnesses: Vec<Option<Selection>>,
    pub violation: Option<Violation>,
    /// MEN only: per principal, (payoff at the full profile, payoff with own singleton replacements).
    pub men: Vec<(Rational, Rational)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub type_: usize,
    /// The agent's full argmax at the violating type.
    pub argmax: Vec<Profile>,
    /// `gaps[k][i] = u_i(argmax[k]_i, t) − u_i(φ_i(t), t)`.
    pub gaps: Vec<Vec<Rational>>,
    pub reason: String,
}

/// Check that independently optimal mechanisms can be glued together.
pub fn check_compatibility(
    game: &FiniteGame,
    mechanisms: &[DirectMechanism],
    variant: Variant,
    strategy: Option<&AgentStrategy>,
) -> Result<CompatibilityReport> {
    validate_mechanisms(game, mechanisms)?;
    if variant == Variant::Men {
        let strategy = strategy.ok_or_else(|| Error::Precondition("MEN needs an agent strategy".into()))?;
        return check_men(game, mechanisms, strategy);
    }
    if !game.is_independent() {
        return Err(Error::Precondition("UPR variants need independent principal payoffs".into()));
    }
    let expected = Variant::for_mode(game.mode());
    if variant != expected {
        return Err(Error::Precondition(format!("variant {variant:?} does not match the game's outside options ({expected:?})")));
    }
    let nt = game.n_types();
    let ranges: MenuProfile = mechanisms.iter().map(|m| m.range()).collect();
    let mut witnesses = Vec::with_capacity(nt);
    for t in 0..nt {
        let target: Vec<Rational> = mechanisms
            .iter()
            .map(|m| game.own_choice_value(m.principal, m.map[t], t))
            .collect::<Result<_>>()?;
        let opt = game.agent_optimum(&ranges, t);
        let all_quit = mechanisms.iter().all(|m| m.map[t] == Choice::Quit);
        if variant == Variant::UprI && opt.argmax.is_empty() {
            // the agent must quit; so must every mechanism
            if all_quit {
                witnesses.push(Some(Selection::Quit));
                continue;
            }
            return Ok(fail(variant, witnesses, t, Vec::new(), Vec::new(), "agent's best participation value is negative but not every principal assigns quit"));
        }
        let found = opt.argmax.iter().find(|p| {
            p.iter().enumerate().all(|(i, &o)| game.own_value(i, o, t).is_ok_and(|v| *v == target[i]))
        });
        match found {
            Some(p) => witnesses.push(Some(Selection::Profile(p.clone()))),
            None if opt.quit && target.iter().all(|v| v.is_zero()) => witnesses.push(Some(Selection::Quit)),
            None => {
                let gaps = opt
                    .argmax
                    .iter()
                    .map(|p| {
                        p.iter()
                            .enumerate()
                            .map(|(i, &o)| game.own_value(i, o, t).map(|v| v - &target[i]))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                return Ok(fail(variant, witnesses, t, opt.argmax.clone(), gaps, "no agent-optimal profile preserves every principal's utility"));
            }
        }
    }
    Ok(CompatibilityReport { variant, pass: true, witnesses, violation: None, men: Vec::new() })
}

fn fail(
    variant: Variant,
    mut witnesses: Vec<Option<Selection>>,
    t: usize,
    argmax: Vec<Profile>,
    gaps: Vec<Vec<Rational>>,
    reason: &str,
) -> CompatibilityReport {
    witnesses.push(None);
    CompatibilityReport {
        variant,
        pass: false,
        witnesses,
        violation: Some(Violation { type_: t, argmax, gaps, reason: reason.into() }),
        men: Vec::new(),
    }
}

fn check_men(game: &FiniteGame, mechanisms: &[DirectMechanism], strategy: &AgentStrategy) -> Result<CompatibilityReport> {
    let ranges: MenuProfile = mechanisms.iter().map(|m| m.range()).collect();
    let mut men = Vec::new();
    let mut violation = None;
    for (i, m) in mechanisms.iter().enumerate() {
        let mut full = Rational::zero();
        let mut replaced = Rational::zero();
        for t in 0..game.n_types() {
            let e = strategy.at(game, &ranges, t)?;
            for (s, w) in &e.dist {
                full += game.prob(t) * &(w * &game.selection_value(i, s, t));
            }
            let Choice::Outcome(o) = m.map[t] else {
                return Err(Error::Precondition("MEN is defined for mechanisms without quit".into()));
            };
            let mut alt = ranges.clone();
            alt[i] = Menu::singleton(o);
            let e = strategy.at(game, &alt, t)?;
            for (s, w) in &e.dist {
                replaced += game.prob(t) * &(w * &game.selection_value(i, s, t));
            }
        }
        if full < replaced && violation.is_none() {
            violation = Some(Violation {
                type_: 0,
                argmax: Vec::new(),
                gaps: Vec::new(),
                reason: format!("principal {} is harmed by its own menu expansion ({full} < {replaced})", game.principals()[i]),
            });
        }
        men.push((full, replaced));
    }
    Ok(CompatibilityReport { variant: Variant::Men, pass: violation.is_none(), witnesses: Vec::new(), violation, men })
}

fn validate_mechanisms(game: &FiniteGame, mechanisms: &[DirectMechanism]) -> Result<()> {
    if mechanisms.len() != game.n() {
        return Err(Error::Invalid("one mechanism per principal required".into()));
    }
    for (i, m) in mechanisms.iter().enumerate() {
        if m.principal != i || m.map.len() != game.n_types() {
            return Err(Error::Invalid(format!("malformed mechanism for principal {}", game.principals()[i])));
        }
        for c in &m.map {
            match c {
                Choice::Outcome(o) if *o >= game.n_outcomes(i) => {
                    return Err(Error::Invalid(format!("mechanism of {} references outcome #{o}", game.principals()[i])))
                }
                Choice::Quit if game.mode() != Mode::Intrinsic => {
                    return Err(Error::Invalid("quit requires intrinsic outside options".into()))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sufficient conditions

#[derive(Clone, Copy, Debug)]
pub enum SufficiencyInput<'a> {
    Profile(&'a [Menu]),
    Mechanisms(&'a [DirectMechanism]),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SufficiencyFlags {
    pub non_indifference_global: bool,
    pub non_indifference_profile: bool,
    pub additive_separable: bool,
    /// `decomposition[t][i][o] = v^i(o, t)` with `v^1(first outcome, t) = 0`
    /// whenever there are two or more principals.
    pub decomposition: Option<Vec<Vec<Vec<Rational>>>>,
    pub weakly_separable: bool,
    pub singleton_structure: bool,
    /// Only meaningful for mechanisms under intrinsic options.
    pub quit_alignment: Option<bool>,
}

pub fn check_sufficiency(game: &FiniteGame, input: SufficiencyInput<'_>) -> Result<SufficiencyFlags> {
    let profile: MenuProfile = match input {
        SufficiencyInput::Profile(p) => p.to_vec(),
        SufficiencyInput::Mechanisms(ms) => {
            validate_mechanisms(game, ms)?;
            ms.iter().map(|m| m.range()).collect()
        }
    };
    let nt = game.n_types();
    let distinct = |menus: &[Menu]| {
        (0..nt).all(|t| {
            let mut seen = BTreeSet::new();
            product(menus).all(|p| seen.insert(game.agent_value(&p, t).clone()))
        })
    };
    let non_indifference_global = distinct(&game.full_profile());
    let non_indifference_profile = distinct(&game.effective_menus(&profile));
    let decomposition = additive_decomposition(game);
    let weakly_separable = weakly_separable(game);
    let n = game.n();
    let singletons = profile.iter().filter(|m| m.len() == 1).count();
    let singleton_structure = singletons + 1 >= n;
    let quit_alignment = match input {
        SufficiencyInput::Mechanisms(ms) if game.mode() == Mode::Intrinsic => {
            let quits: Vec<Vec<bool>> = ms.iter().map(|m| m.map.iter().map(|c| *c == Choice::Quit).collect()).collect();
            let same = quits.windows(2).all(|w| w[0] == w[1]);
            Some(same && singleton_structure)
        }
        _ => None,
    };
    Ok(SufficiencyFlags {
        non_indifference_global,
        non_indifference_profile,
        additive_separable: decomposition.is_some(),
        decomposition,
        weakly_separable,
        singleton_structure,
        quit_alignment,
    })
}

/// Solve V(o, t) = Σ_i v^i(o_i, t) exactly, type by type.
pub fn additive_decomposition(game: &FiniteGame) -> Option<Vec<Vec<Vec<Rational>>>> {
    let n = game.n();
    let offsets: Vec<usize> = (0..n).scan(0, |acc, i| {
        let o = *acc;
        *acc += game.n_outcomes(i);
        Some(o)
    }).collect();
    let cols: usize = (0..n).map(|i| game.n_outcomes(i)).sum();
    let profiles = game.all_profiles();
    let mut out = Vec::with_capacity(game.n_types());
    for t in 0..game.n_types() {
        let mut a = Vec::with_capacity(profiles.len() + 1);
        let mut b = Vec::with_capacity(profiles.len() + 1);
        for p in &profiles {
            let mut row = vec![Rational::zero(); cols];
            for (i, &o) in p.iter().enumerate() {
                row[offsets[i] + o] = Rational::one();
            }
            a.push(row);
            b.push(game.agent_value(p, t).clone());
        }
        // pin v^1 at its first outcome; with one principal there is no
        // constant to shift, so nothing is pinned
        if n >= 2 {
            let mut pin = vec![Rational::zero(); cols];
            pin[0] = Rational::one();
            a.push(pin);
            b.push(Rational::zero());
        }
        let x = linear::solve(a, b)?;
        out.push((0..n).map(|i| x[offsets[i]..offsets[i] + game.n_outcomes(i)].to_vec()).collect());
    }
    Some(out)
}

/// For all i, t, o_i, o_i', o_-i, o_-i': V(o_i,o_-i) > V(o_i',o_-i) ⇒ V(o_i,o_-i') > V(o_i',o_-i').
pub fn weakly_separable(game: &FiniteGame) -> bool {
    let n = game.n();
    for i in 0..n {
        let mut rivals = game.full_profile();
        rivals[i] = Menu::singleton(0);
        let rival_profiles: Vec<Profile> = product(&rivals).collect();
        for t in 0..game.n_types() {
            for a in 0..game.n_outcomes(i) {
                for b in 0..game.n_outcomes(i) {
                    if a == b {
                        continue;
                    }
                    let strict: Vec<bool> = rival_profiles
                        .iter()
                        .map(|r| {
                            let mut pa = r.clone();
                            pa[i] = a;
                            let mut pb = r.clone();
                            pb[i] = b;
                            game.agent_value(&pa, t) > game.agent_value(&pb, t)
                        })
                        .collect();
                    if strict.iter().any(|&s| s) && !strict.iter().all(|&s| s) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Profile search

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Largest number of menu profiles the exhaustive search may visit.
    pub bound: usize,
    pub screening: ScreeningOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { bound: 1 << 20, screening: ScreeningOptions::default() }
    }
}

/// A mutual best-response profile with its compatibility verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedProfile {
    pub menus: MenuProfile,
    pub mechanisms: Vec<DirectMechanism>,
    pub report: CompatibilityReport,
}

fn rival_key(profile: &[Menu], i: usize) -> MenuProfile {
    let mut k = profile.to_vec();
    k[i] = Menu::EMPTY;
    k
}

/// Every menu profile in which each menu is an optimal screening menu against
/// the others, with canonical mechanisms and the mode's UPR verdict.
/// Passing profiles are listed first, each group in canonical order.
pub fn find_p3_induced_profiles(game: &FiniteGame, opts: SearchOptions) -> Result<Vec<InducedProfile>> {
    if !game.is_independent() {
        return Err(Error::Precondition("profile search needs independent principal payoffs".into()));
    }
    let n = game.n();
    let cands: Vec<Vec<Menu>> = (0..n).map(|i| candidate_menus(game, i)).collect();
    let total = cands.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len())).unwrap_or(usize::MAX);
    if total > opts.bound {
        return Err(Error::BoundExceeded { what: "menu profiles (use best-response iteration)", limit: opts.bound, got: total });
    }
    // optimal menus of principal i against every rival profile
    let mut solutions: Vec<HashMap<MenuProfile, ScreeningSolution>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rivals: Vec<MenuProfile> = vec![Vec::new()];
        for (j, c) in cands.iter().enumerate() {
            let opts_j: Vec<Menu> = if j == i { vec![Menu::EMPTY] } else { c.clone() };
            rivals = rivals
                .into_iter()
                .flat_map(|r| opts_j.iter().map(move |m| {
                    let mut r = r.clone();
                    r.push(*m);
                    r
                }))
                .collect();
        }
        let solved: Vec<Result<Option<ScreeningSolution>>> = par::map(&rivals, |r| {
            match solve_screening_with(&ScreeningProblem::new(game, i, r.clone()), opts.screening) {
                Ok(s) => Ok(Some(s)),
                Err(Error::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        });
        let mut map = HashMap::new();
        for (r, s) in rivals.into_iter().zip(solved) {
            if let Some(s) = s? {
                map.insert(r, s);
            }
        }
        solutions.push(map);
    }
    let mut fixed = Vec::new();
    let mut profile: MenuProfile = cands.iter().map(|c| c[0]).collect();
    let mut idx = vec![0usize; n];
    'outer: loop {
        for (j, k) in idx.iter().enumerate() {
            profile[j] = cands[j][*k];
        }
        if (0..n).all(|i| solutions[i].get(&rival_key(&profile, i)).is_some_and(|s| s.is_optimal_menu(profile[i]))) {
            fixed.push(profile.clone());
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < cands[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    let mut out: Vec<InducedProfile> = fixed
        .into_iter()
        .map(|menus| assemble(game, menus, opts.screening))
        .collect::<Result<_>>()?;
    out.sort_by_key(|p| !p.report.pass);
    Ok(out)
}

fn assemble(game: &FiniteGame, menus: MenuProfile, _opts: ScreeningOptions) -> Result<InducedProfile> {
    let mechanisms = (0..game.n())
        .map(|i| {
            optimal_for_menu(&ScreeningProblem::new(game, i, menus.clone()), menus[i])?
                .ok_or_else(|| Error::Infeasible(format!("menu of principal {} has no mechanism", game.principals()[i])))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = check_compatibility(game, &mechanisms, Variant::for_mode(game.mode()), None)?;
    Ok(InducedProfile { menus, mechanisms, report })
}

#[derive(Clone, Debug, PartialEq)]
pub enum IterationOutcome {
    FixedPoint(InducedProfile),
    /// Profiles at round boundaries forming the cycle, first repeated profile first.
    Cycle(Vec<MenuProfile>),
    RoundLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub outcome: IterationOutcome,
    pub rounds: usize,
    /// Profile at the end of every round, starting with the initial one.
    pub trajectory: Vec<MenuProfile>,
}

/// Round-robin best responses from `start`; a principal keeps its menu while
/// it remains optimal, otherwise switches to the minimal optimal menu.
pub fn best_response_iteration(
    game: &FiniteGame,
    start: MenuProfile,
    max_rounds: usize,
    opts: ScreeningOptions,
) -> Result<IterationReport> {
    if start.len() != game.n() {
        return Err(Error::Invalid("start profile has wrong length".into()));
    }
    let mut profile = start;
    let mut trajectory = vec![profile.clone()];
    for round in 1..=max_rounds {
        let mut changed = false;
        for i in 0..game.n() {
            let sol = solve_screening_with(&ScreeningProblem::new(game, i, profile.clone()), opts)?;
            if !sol.is_optimal_menu(profile[i]) {
                profile[i] = sol.optimal_menus[0];
                changed = true;
            }
        }
        if !changed {
            let fp = assemble(game, profile, opts)?;
            return Ok(IterationReport { outcome: IterationOutcome::FixedPoint(fp), rounds: round, trajectory });
        }
        if let Some(k) = trajectory.iter().position(|p| *p == profile) {
            let cycle = trajectory[k..].to_vec();
            trajectory.push(profile);
            return Ok(IterationReport { outcome: IterationOutcome::Cycle(cycle), rounds: round, trajectory });
        }
        trajectory.push(profile.clone());
    }
    Ok(IterationReport { outcome: IterationOutcome::RoundLimit, rounds: max_rounds, trajectory })
}

// ---------------------------------------------------------------------------
// Classification and Pareto comparison

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub p3_induced: bool,
    /// Per principal: menu items never chosen on path.
    pub unused_items: Vec<Vec<usize>>,
    /// Set when the non-indifference hypothesis was not verified.
    pub heuristic: bool,
}

/// Is every menu item chosen on path by some type?
pub fn classify_pbe(game: &FiniteGame, profile: &[Menu], strategy: &AgentStrategy, strict: bool) -> Result<Classification> {
    let nt = game.n_types();
    let globally_strict = (0..nt).all(|t| {
        let mut seen = BTreeSet::new();
        game.all_profiles().iter().all(|p| seen.insert(game.agent_value(p, t).clone()))
    });
    if strict && !globally_strict {
        return Err(Error::Precondition("classification requires the agent never to be indifferent".into()));
    }
    let mut used: Vec<Menu> = vec![Menu::EMPTY; game.n()];
    for t in 0..nt {
        let e = strategy.at(game, profile, t)?;
        for s in e.support() {
            if let Selection::Profile(p) = s {
                for (i, &o) in p.iter().enumerate() {
                    used[i] = used[i].with(o);
                }
            }
        }
    }
    let unused_items: Vec<Vec<usize>> = profile.iter().zip(&used).map(|(m, u)| Menu(m.0 & !u.0).indices()).collect();
    Ok(Classification {
        p3_induced: unused_items.iter().all(|u| u.is_empty()),
        unused_items,
        heuristic: !globally_strict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoReport {
    pub payoffs: Vec<Vec<Rational>>,
    /// `(a, b)`: entry a dominates entry b.
    pub dominance: Vec<(usize, usize)>,
    pub frontier: Vec<usize>,
    pub single_type: bool,
    /// Principals whose favourite outcome does not depend on the type.
    pub type_independent_peaked: Vec<usize>,
}

pub fn dominates(a: &[Rational], b: &[Rational]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

pub fn pareto_compare(game: &FiniteGame, entries: &[(MenuProfile, AgentStrategy)]) -> Result<ParetoReport> {
    let payoffs: Vec<Vec<Rational>> = entries
        .iter()
        .map(|(p, s)| (0..game.n()).map(|i| crate::game::expected_principal_payoff(game, i, s, p)).collect())
        .collect::<Result<_>>()?;
    let mut dominance = Vec::new();
    for a in 0..payoffs.len() {
        for b in 0..payoffs.len() {
            if a != b && dominates(&payoffs[a], &payoffs[b]) {
                dominance.push((a, b));
            }
        }
    }
    let frontier = (0..payoffs.len()).filter(|b| !dominance.iter().any(|&(_, d)| d == *b)).collect();
    let type_independent_peaked = if game.is_independent() {
        (0..game.n())
            .filter(|&i| {
                (0..game.n_outcomes(i)).any(|o| {
                    (0..game.n_types()).all(|t| {
                        let v = game.own_value(i, o, t).expect("independent");
                        (0..game.n_outcomes(i)).all(|x| game.own_value(i, x, t).expect("independent") <= v)
                    })
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ParetoReport { payoffs, dominance, frontier, single_type: game.n_types() == 1, type_independent_peaked })
}

/// Label-keyed summary of an induced profile for reports.
pub fn describe_profile(game: &FiniteGame, p: &InducedProfile) -> BTreeMap<String, serde_json::Value> {
    let mut m = BTreeMap::new();
    m.insert("menus".into(), serde_json::to_value(crate::game::profile_to_doc(game, &p.menus)).expect("json"));
    m.insert("mechanisms".into(), serde_json::to_value(crate::game::mechanism_to_doc(game, &p.mechanisms)).expect("json"));
    m.insert("report".into(), report_json(game, &p.report));
    m
}

/// Compatibility report with outcome labels.
pub fn report_json(game: &FiniteGame, r: &CompatibilityReport) -> serde_json::Value {
    let witnesses: Vec<serde_json::Value> = r
        .witnesses
        .iter()
        .enumerate()
        .map(|(t, w)| {
            serde_json::json!({
                "type": game.types()[t],
                "witness": w.as_ref().map(|s| game.selection_labels(s)),
            })
        })
        .collect();
    let violation = r.violation.as_ref().map(|v| {
        serde_json::json!({
            "type": game.types().get(v.type_).cloned().unwrap_or_default(),
            "argmax": v.argmax.iter().map(|p| game.profile_labels(p)).collect::<Vec<_>>(),
            "gaps": v.gaps,
            "reason": v.reason,
        })
    });
    serde_json::json!({
        "variant": r.variant,
        "pass": r.pass,
        "witnesses": witnesses,
        "violation": violation,
        "men": r.men.iter().enumerate().map(|(i, (a, b))| serde_json::json!({
            "principal": game.principals()[i], "full": a, "singleton_replacement": b
        })).collect::<Vec<_>>(),
    })
}
