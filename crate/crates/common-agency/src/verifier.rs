//! Brute-force equilibrium verification and exact support feasibility.

use std::borrow::Cow;

use serde::Serialize;

use crate::assembly::{check_compatibility, Variant};
use crate::error::{Error, Result};
use crate::fm::{self, Certificate, Constraint};
use crate::game::{
    audit_entry, node_label, AgentStrategy, DirectMechanism, FiniteGame, Menu, MenuProfile, Mode, Selection,
    SelectionRule, StrategyEntry, TieBreak,
};
use crate::par;
use crate::rational::Rational;
use crate::screening::candidate_menus;

/// Every unilateral deviation `(principal, menu)` from `profile`.
pub fn deviations(game: &FiniteGame, profile: &[Menu]) -> Vec<(usize, Menu)> {
    (0..game.n())
        .flat_map(|i| {
            candidate_menus(game, i).into_iter().filter(move |&s| s != profile[i]).map(move |s| (i, s))
        })
        .collect()
}

fn replaced(profile: &[Menu], i: usize, s: Menu) -> MenuProfile {
    let mut p = profile.to_vec();
    p[i] = s;
    p
}

pub fn validate_profile(game: &FiniteGame, profile: &[Menu]) -> Result<()> {
    if profile.len() != game.n() {
        return Err(Error::Invalid("menu profile has wrong length".into()));
    }
    for (i, m) in profile.iter().enumerate() {
        if !m.is_subset(game.full_menu(i)) {
            return Err(Error::Invalid(format!("menu of {} references unknown outcomes", game.principals()[i])));
        }
        if m.is_empty() && game.mode() != Mode::Intrinsic {
            return Err(Error::Invalid(format!("empty menu for {}", game.principals()[i])));
        }
    }
    Ok(())
}

/// Agent strategy supporting the profile of mechanism ranges: the
/// utility-preserving selection on path, the deviator's least favourite
/// agent-optimal selection after a unilateral deviation, lexicographic
/// choice elsewhere.
pub fn construct_agent_strategy(game: &FiniteGame, mechanisms: &[DirectMechanism]) -> Result<AgentStrategy> {
    let report = check_compatibility(game, mechanisms, Variant::for_mode(game.mode()), None)?;
    if !report.pass {
        let v = report.violation.expect("failing report has a violation");
        return Err(Error::Precondition(format!(
            "mechanisms are not compatible at type {}: {}",
            game.types()[v.type_],
            v.reason
        )));
    }
    let ranges: MenuProfile = mechanisms.iter().map(|m| m.range()).collect();
    let mut strategy = adversarial_strategy(game, &ranges)?;
    for (t, w) in report.witnesses.into_iter().enumerate() {
        let s = w.expect("passing report has witnesses");
        strategy.insert(ranges.clone(), t, StrategyEntry::pure(s, TieBreak::OnPathUpr));
    }
    Ok(strategy)
}

/// Lexicographic agent choice on path, deviator-adverse choice after every
/// unilateral deviation. Works for any profile, compatible or not.
pub fn adversarial_strategy(game: &FiniteGame, profile: &[Menu]) -> Result<AgentStrategy> {
    validate_profile(game, profile)?;
    let ranges = profile.to_vec();
    let mut strategy = AgentStrategy::rule(SelectionRule::Lexicographic);
    let devs = deviations(game, &ranges);
    let entries = par::map(&devs, |&(i, s)| {
        let node = replaced(&ranges, i, s);
        let picks: Vec<StrategyEntry> = (0..game.n_types())
            .map(|t| {
                let opt = game.agent_optimum(&node, t);
                let mut best: Option<(Rational, Selection)> = None;
                for sel in opt.selections() {
                    let v = game.selection_value(i, &sel, t);
                    if best.as_ref().is_none_or(|(b, _)| v < *b) {
                        best = Some((v, sel));
                    }
                }
                let (_, sel) = best.expect("nonempty menus give an optimum");
                StrategyEntry::pure(sel, TieBreak::AdversarialToDeviator)
            })
            .collect();
        (node, picks)
    });
    for (node, picks) in entries {
        for (t, e) in picks.into_iter().enumerate() {
            strategy.insert(node.clone(), t, e);
        }
    }
    Ok(strategy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationRecord {
    pub principal: usize,
    pub menu: Menu,
    pub payoff: Rational,
    /// Deviation payoff minus equilibrium payoff.
    pub gain: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pbe,
    /// First profitable deviation in canonical order.
    NotPbe { principal: usize, menu: Menu, gain: Rational },
    InvalidStrategy { node: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCertificate {
    pub profile: MenuProfile,
    pub payoffs: Vec<Rational>,
    pub deviations: Vec<DeviationRecord>,
    pub verdict: Verdict,
}

impl EquilibriumCertificate {
    pub fn is_pbe(&self) -> bool {
        self.verdict == Verdict::Pbe
    }
}

enum NodeError {
    Invalid(String, String),
    Hard(Error),
}

fn node_payoffs(game: &FiniteGame, strategy: &AgentStrategy, profile: &[Menu]) -> std::result::Result<Vec<Rational>, NodeError> {
    let mut out = vec![Rational::zero(); game.n()];
    for t in 0..game.n_types() {
        let e: Cow<'_, StrategyEntry> = match strategy.at(game, profile, t) {
            Ok(e) => e,
            Err(Error::StrategyUndefined(node)) => return Err(NodeError::Invalid(node, "no strategy entry".into())),
            Err(e) => return Err(NodeError::Hard(e)),
        };
        if let Err(e) = audit_entry(game, profile, t, &e) {
            return Err(NodeError::Invalid(node_label(game, profile, t), e.to_string()));
        }
        for (i, acc) in out.iter_mut().enumerate() {
            for (s, w) in &e.dist {
                *acc += game.prob(t) * &(w * &game.selection_value(i, s, t));
            }
        }
    }
    Ok(out)
}

/// Check every unilateral deviation from `profile` under `strategy`,
/// auditing agent optimality at each consulted node.
pub fn verify_pbe(game: &FiniteGame, profile: &[Menu], strategy: &AgentStrategy) -> Result<EquilibriumCertificate> {
    validate_profile(game, profile)?;
    let invalid = |node, reason| EquilibriumCertificate {
        profile: profile.to_vec(),
        payoffs: Vec::new(),
        deviations: Vec::new(),
        verdict: Verdict::InvalidStrategy { node, reason },
    };
    let payoffs = match node_payoffs(game, strategy, profile) {
        Ok(p) => p,
        Err(NodeError::Invalid(n, r)) => return Ok(invalid(n, r)),
        Err(NodeError::Hard(e)) => return Err(e),
    };
    let devs = deviations(game, profile);
    let results = par::map(&devs, |&(i, s)| {
        node_payoffs(game, strategy, &replaced(profile, i, s)).map(|p| p[i].clone())
    });
    let mut records = Vec::with_capacity(devs.len());
    let mut verdict = Verdict::Pbe;
    for ((i, s), r) in devs.into_iter().zip(results) {
        let payoff = match r {
            Ok(p) => p,
            Err(NodeError::Invalid(n, r)) => return Ok(invalid(n, r)),
            Err(NodeError::Hard(e)) => return Err(e),
        };
        let gain = &payoff - &payoffs[i];
        if gain.is_positive() && verdict == Verdict::Pbe {
            verdict = Verdict::NotPbe { principal: i, menu: s, gain: gain.clone() };
        }
        records.push(DeviationRecord { principal: i, menu: s, payoff, gain });
    }
    Ok(EquilibriumCertificate { profile: profile.to_vec(), payoffs, deviations: records, verdict })
}

// ---------------------------------------------------------------------------
// Support feasibility

#[derive(Clone, Copy, Debug)]
pub struct FeasibilityOptions {
    /// Largest number of tie weights handed to elimination.
    pub max_vars: usize,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions { max_vars: 32 }
    }
}

/// An agent-optimal tie at one node, with selections grouped into classes
/// that give the relevant principals identical payoffs.
#[derive(Clone, Debug, PartialEq)]
pub struct TieNode {
    pub profile: MenuProfile,
    #[doc(alias = "type")]
    pub type_: usize,
    /// `None` on path; the deviating principal otherwise.
    pub deviator: Option<usize>,
    pub classes: Vec<Vec<Selection>>,
    /// Weights of classes `0..k-1` are variables `first_var..`; the last class
    /// takes the remaining mass.
    pub first_var: usize,
}

impl TieNode {
    pub fn n_vars(&self) -> usize {
        self.classes.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilitySystem {
    /// Nodes with at least one free weight.
    pub nodes: Vec<TieNode>,
    pub n_vars: usize,
    pub constraints: Vec<LabeledConstraint>,
}

impl FeasibilitySystem {
    pub fn variable_label(&self, game: &FiniteGame, v: usize) -> String {
        for n in &self.nodes {
            if v >= n.first_var && v < n.first_var + n.n_vars() {
                let class = &n.classes[v - n.first_var];
                let sel: Vec<String> = class.iter().map(|s| game.selection_labels(s).join(",")).collect();
                return format!("w{} at {} on [{}]", v, node_label(game, &n.profile, n.type_), sel.join(" | "));
            }
        }
        format!("w{v}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible { system: FeasibilitySystem, weights: Vec<Rational>, strategy: AgentStrategy },
    Infeasible { system: FeasibilitySystem, certificate: Certificate },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn system(&self) -> &FeasibilitySystem {
        match self {
            Feasibility::Feasible { system, .. } | Feasibility::Infeasible { system, .. } => system,
        }
    }
}

struct NodeSpec {
    profile: MenuProfile,
    deviator: Option<usize>,
}

/// Affine expression `coeffs · w + constant`.
#[derive(Clone)]
struct Affine {
    coeffs: Vec<Rational>,
    constant: Rational,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Affine { coeffs: vec![Rational::zero(); n], constant: Rational::zero() }
    }

    fn add_scaled(&mut self, other: &Affine, k: &Rational) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += k * b;
        }
        self.constant += k * &other.constant;
    }
}

fn classes(game: &FiniteGame, profile: &[Menu], t: usize, relevant: &[usize]) -> Vec<Vec<Selection>> {
    let mut out: Vec<(Vec<Rational>, Vec<Selection>)> = Vec::new();
    for s in game.agent_optimum(profile, t).selections() {
        let key: Vec<Rational> = relevant.iter().map(|&i| game.selection_value(i, &s, t)).collect();
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(s),
            None => out.push((key, vec![s])),
        }
    }
    out.into_iter().map(|(_, v)| v).collect()
}

/// Is there any agent tie-breaking (possibly mixed) that makes `profile` an
/// equilibrium? Decided exactly by Fourier–Motzkin elimination.
pub fn support_feasibility(game: &FiniteGame, profile: &[Menu], opts: FeasibilityOptions) -> Result<Feasibility> {
    validate_profile(game, profile)?;
    let nt = game.n_types();
    let all: Vec<usize> = (0..game.n()).collect();
    let mut specs = vec![NodeSpec { profile: profile.to_vec(), deviator: None }];
    for (i, s) in deviations(game, profile) {
        specs.push(NodeSpec { profile: replaced(profile, i, s), deviator: Some(i) });
    }
    // every (node, type) tie, on path first
    let ties: Vec<Vec<Vec<Vec<Selection>>>> = par::map(&specs, |spec| {
        let relevant: &[usize] = match spec.deviator {
            None => &all,
            Some(i) => std::slice::from_ref(&all[i]),
        };
        (0..nt).map(|t| classes(game, &spec.profile, t, relevant)).collect()
    });
    let mut nodes_all: Vec<TieNode> = Vec::new();
    let mut n_vars = 0;
    // deviation weights are eliminated first, so they get the low indices
    for (spec, per_t) in specs.iter().zip(&ties).skip(1).chain(specs.iter().zip(&ties).take(1)) {
        for (t, cl) in per_t.iter().enumerate() {
            if cl.is_empty() {
                return Err(Error::Invalid(format!("no agent optimum at {}", node_label(game, &spec.profile, t))));
            }
            let node = TieNode { profile: spec.profile.clone(), type_: t, deviator: spec.deviator, classes: cl.clone(), first_var: n_vars };
            n_vars += node.n_vars();
            nodes_all.push(node);
        }
    }
    if n_vars > opts.max_vars {
        return Err(Error::BoundExceeded { what: "tie weights", limit: opts.max_vars, got: n_vars });
    }
    // payoff of principal i at a node as an affine function of the weights
    let payoff = |node: &TieNode, i: usize| -> Affine {
        let mut a = Affine::zero(n_vars);
        let k = node.classes.len();
        let value = |c: usize| game.selection_value(i, &node.classes[c][0], node.type_);
        let last = value(k - 1);
        a.constant = last.clone();
        for c in 0..k - 1 {
            a.coeffs[node.first_var + c] = value(c) - &last;
        }
        a
    };
    let mut constraints = Vec::new();
    for node in &nodes_all {
        let k = node.n_vars();
        if k == 0 {
            continue;
        }
        let lbl = node_label(game, &node.profile, node.type_);
        let mut sum = vec![Rational::zero(); n_vars];
        for c in 0..k {
            let mut co = vec![Rational::zero(); n_vars];
            co[node.first_var + c] = Rational::one();
            sum[node.first_var + c] = -Rational::one();
            constraints.push(LabeledConstraint { label: format!("w{} >= 0 at {lbl}", node.first_var + c), constraint: Constraint::new(co, Rational::zero()) });
        }
        constraints.push(LabeledConstraint { label: format!("weights at {lbl} sum to at most 1"), constraint: Constraint::new(sum, Rational::one()) });
    }
    let on_path: Vec<&TieNode> = nodes_all.iter().filter(|n| n.deviator.is_none()).collect();
    let mut k = 0;
    while k < nodes_all.len() {
        let Some(i) = nodes_all[k].deviator else {
            k += 1;
            continue;
        };
        let group = &nodes_all[k..k + nt];
        let mut diff = Affine::zero(n_vars);
        for t in 0..nt {
            diff.add_scaled(&payoff(on_path[t], i), game.prob(t));
            diff.add_scaled(&payoff(&group[t], i), &-game.prob(t));
        }
        let dev = group[0].profile[i];
        constraints.push(LabeledConstraint {
            label: format!("{} does not gain by offering {{{}}}", game.principals()[i], game.menu_labels(i, dev).join(",")),
            constraint: Constraint::new(diff.coeffs, diff.constant),
        });
        k += nt;
    }
    let raw: Vec<Constraint> = constraints.iter().map(|c| c.constraint.clone()).collect();
    let order: Vec<usize> = (0..n_vars).collect();
    let outcome = fm::solve(n_vars, &raw, &order);
    let nodes: Vec<TieNode> = nodes_all.iter().filter(|n| n.n_vars() > 0).cloned().collect();
    let system = FeasibilitySystem { nodes, n_vars, constraints };
    Ok(match outcome {
        fm::Outcome::Infeasible(certificate) => Feasibility::Infeasible { system, certificate },
        fm::Outcome::Feasible(weights) => {
            let mut strategy = AgentStrategy::new();
            for node in &nodes_all {
                let k = node.classes.len();
                let mut dist = Vec::new();
                let mut rest = Rational::one();
                for c in 0..k - 1 {
                    let w = weights[node.first_var + c].clone();
                    rest -= &w;
                    if w.is_positive() {
                        dist.push((node.classes[c][0].clone(), w));
                    }
                }
                if rest.is_positive() {
                    dist.push((node.classes[k - 1][0].clone(), rest));
                }
                let policy = if k > 1 { TieBreak::Supported } else { TieBreak::Lexicographic };
                strategy.insert(node.profile.clone(), node.type_, StrategyEntry { dist, policy });
            }
            Feasibility::Feasible { system, weights, strategy }
        }
    })
}

// ---------------------------------------------------------------------------
// Independence of irrelevant alternatives

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IiaViolation {
    /// 1: support stays available ⇒ same distribution; 2: conditional (Luce) consistency.
    pub axiom: u8,
    #[serde(skip)]
    pub larger: MenuProfile,
    #[serde(skip)]
    pub smaller: MenuProfile,
    #[serde(rename = "type")]
    pub type_: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IiaReport {
    pub iia1: bool,
    pub iia2: bool,
    pub violations: Vec<IiaViolation>,
}

fn weight_of(dist: &[(Selection, Rational)], s: &Selection) -> Rational {
    dist.iter().filter(|(x, _)| x == s).map(|(_, w)| w.clone()).sum()
}

fn available(menus: &[Menu], s: &Selection) -> bool {
    match s {
        Selection::Quit => true,
        Selection::Profile(p) => p.iter().zip(menus).all(|(&o, m)| m.contains(o)),
    }
}

/// Check both IIA axioms over every nested pair of explicit strategy nodes.
/// The conditional axiom is checked on atoms, which implies it for every
/// event.
pub fn check_iia(game: &FiniteGame, strategy: &AgentStrategy) -> IiaReport {
    let mut violations = Vec::new();
    let nodes: Vec<(&(MenuProfile, usize), &StrategyEntry)> = strategy.entries.iter().collect();
    for (big_key, big) in &nodes {
        for (small_key, small) in &nodes {
            let (big_p, t) = (&big_key.0, big_key.1);
            let (small_p, ts) = (&small_key.0, small_key.1);
            if t != ts || big_p == small_p || !small_p.iter().zip(big_p.iter()).all(|(s, b)| s.is_subset(*b)) {
                continue;
            }
            let eff = game.effective_menus(small_p);
            let describe = || format!("{} within {}", node_label(game, small_p, t), node_label(game, big_p, t));
            let mut atoms: Vec<&Selection> = big.dist.iter().chain(&small.dist).map(|(s, _)| s).collect();
            atoms.sort();
            atoms.dedup();
            // axiom 1
            if big.support().all(|s| available(&eff, s)) {
                if let Some(s) = atoms.iter().find(|s| weight_of(&big.dist, s) != weight_of(&small.dist, s)) {
                    violations.push(IiaViolation {
                        axiom: 1,
                        larger: big_p.clone(),
                        smaller: small_p.clone(),
                        type_: t,
                        detail: format!("{}: weight on {:?} changes", describe(), game.selection_labels(s)),
                    });
                }
            }
            // axiom 2
            let mass: Rational = big.dist.iter().filter(|(s, _)| available(&eff, s)).map(|(_, w)| w.clone()).sum();
            if mass.is_positive() {
                let bad = atoms.iter().filter(|s| available(&eff, s)).find(|s| {
                    weight_of(&small.dist, s) != weight_of(&big.dist, s) / mass.clone()
                });
                if let Some(s) = bad {
                    violations.push(IiaViolation {
                        axiom: 2,
                        larger: big_p.clone(),
                        smaller: small_p.clone(),
                        type_: t,
                        detail: format!(
                            "{}: weight on {:?} should be {}",
                            describe(),
                            game.selection_labels(s),
                            weight_of(&big.dist, s) / mass.clone()
                        ),
                    });
                }
            }
        }
    }
    IiaReport {
        iia1: !violations.iter().any(|v| v.axiom == 1),
        iia2: !violations.iter().any(|v| v.axiom == 2),
        violations,
    }
}
