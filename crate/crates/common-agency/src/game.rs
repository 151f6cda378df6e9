//! Finite common-agency games with exact payoff tables.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// An outcome profile: one outcome index per principal.
pub type Profile = Vec<usize>;

/// Hard cap on outcomes per principal (menus are `u64` bitmasks).
pub const MAX_OUTCOMES: usize = 64;

/// A menu: a subset of one principal's outcomes, as a bitmask over indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Menu(pub u64);

impl Menu {
    pub const EMPTY: Menu = Menu(0);

    pub fn singleton(o: usize) -> Menu {
        Menu(1u64 << o)
    }

    pub fn full(n: usize) -> Menu {
        if n >= 64 {
            Menu(u64::MAX)
        } else {
            Menu((1u64 << n) - 1)
        }
    }

    pub fn from_indices(items: impl IntoIterator<Item = usize>) -> Menu {
        Menu(items.into_iter().fold(0, |m, o| m | (1u64 << o)))
    }

    pub fn contains(self, o: usize) -> bool {
        o < 64 && self.0 >> o & 1 == 1
    }

    pub fn with(self, o: usize) -> Menu {
        Menu(self.0 | 1u64 << o)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: Menu) -> bool {
        self.0 & !other.0 == 0
    }

    /// Indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let o = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(o)
            }
        })
    }

    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// One menu per principal.
pub type MenuProfile = Vec<Menu>;

/// What a mechanism assigns to a type: an outcome or the quit action.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Choice {
    Outcome(usize),
    Quit,
}

impl Choice {
    pub fn outcome(self) -> Option<usize> {
        match self {
            Choice::Outcome(o) => Some(o),
            Choice::Quit => None,
        }
    }
}

/// What the agent ends up with at a node: a full outcome profile, or quit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Selection {
    Profile(Profile),
    Quit,
}

/// Outside-option configuration.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum OutsideOptions {
    #[default]
    None,
    /// The agent accepts all contracts or none; quitting is worth 0 to everyone.
    Intrinsic,
    /// Per-principal outside outcome the agent may fall back to.
    Delegated(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Intrinsic,
    Delegated,
}

/// Principal payoffs.
#[derive(Clone, Debug, PartialEq)]
pub enum PrincipalUtility {
    /// `[i][o_i][t]`: principal i cares only about its own outcome.
    Independent(Vec<Vec<Vec<Rational>>>),
    /// `[i][profile_index * |T| + t]`.
    General(Vec<Vec<Rational>>),
}

/// A validated finite game. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGame {
    principals: Vec<String>,
    outcomes: Vec<Vec<String>>,
    types: Vec<String>,
    probs: Vec<Rational>,
    strides: Vec<usize>,
    n_profiles: usize,
    agent: Vec<Rational>,
    principal: PrincipalUtility,
    outside: OutsideOptions,
}

/// A direct mechanism of one principal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectMechanism {
    pub principal: usize,
    pub map: Vec<Choice>,
}

impl DirectMechanism {
    /// The induced menu: range minus quit.
    pub fn range(&self) -> Menu {
        Menu::from_indices(self.map.iter().filter_map(|c| c.outcome()))
    }
}

impl FiniteGame {
    /// Build a game with independent principal payoffs from closures.
    pub fn independent(
        principals: &[&str],
        outcomes: &[&[&str]],
        types: &[(&str, Rational)],
        agent: impl Fn(&[usize], usize) -> Rational,
        own: impl Fn(usize, usize, usize) -> Rational,
    ) -> Result<FiniteGame> {
        let mut g = Self::skeleton(principals, outcomes, types)?;
        g.fill_agent(agent);
        let table = (0..g.n())
            .map(|i| {
                (0..g.outcomes[i].len())
                    .map(|o| (0..g.n_types()).map(|t| own(i, o, t)).collect())
                    .collect()
            })
            .collect();
        g.principal = PrincipalUtility::Independent(table);
        Ok(g)
    }

    /// Build a game whose principal payoffs may depend on the whole profile.
    pub fn general(
        principals: &[&str],
        outcomes: &[&[&str]],
        types: &[(&str, Rational)],
        agent: impl Fn(&[usize], usize) -> Rational,
        payoff: impl Fn(usize, &[usize], usize) -> Rational,
    ) -> Result<FiniteGame> {
        let mut g = Self::skeleton(principals, outcomes, types)?;
        g.fill_agent(agent);
        let nt = g.n_types();
        let profiles = g.all_profiles();
        let table = (0..g.n())
            .map(|i| {
                let mut v = vec![Rational::zero(); g.n_profiles * nt];
                for p in &profiles {
                    let k = g.profile_index(p);
                    for t in 0..nt {
                        v[k * nt + t] = payoff(i, p, t);
                    }
                }
                v
            })
            .collect();
        g.principal = PrincipalUtility::General(table);
        Ok(g)
    }

    fn skeleton(principals: &[&str], outcomes: &[&[&str]], types: &[(&str, Rational)]) -> Result<FiniteGame> {
        if principals.is_empty() {
            return Err(Error::Schema("at least one principal required".into()));
        }
        if outcomes.len() != principals.len() {
            return Err(Error::Schema("one outcome set per principal required".into()));
        }
        if types.is_empty() {
            return Err(Error::Schema("at least one type required".into()));
        }
        for (i, os) in outcomes.iter().enumerate() {
            if os.is_empty() {
                return Err(Error::Schema(format!("principal {} has no outcomes", principals[i])));
            }
            if os.len() > MAX_OUTCOMES {
                return Err(Error::BoundExceeded { what: "outcomes per principal", limit: MAX_OUTCOMES, got: os.len() });
            }
            check_unique(os.iter().copied(), "outcome")?;
        }
        check_unique(principals.iter().copied(), "principal")?;
        check_unique(types.iter().map(|t| t.0), "type")?;
        let probs: Vec<Rational> = types.iter().map(|t| t.1.clone()).collect();
        validate_probs(&probs)?;
        let mut strides = vec![1; outcomes.len()];
        let mut n_profiles = 1usize;
        for i in (0..outcomes.len()).rev() {
            strides[i] = n_profiles;
            n_profiles = n_profiles
                .checked_mul(outcomes[i].len())
                .ok_or_else(|| Error::Schema("profile space too large".into()))?;
        }
        Ok(FiniteGame {
            principals: principals.iter().map(|s| s.to_string()).collect(),
            outcomes: outcomes.iter().map(|os| os.iter().map(|s| s.to_string()).collect()).collect(),
            types: types.iter().map(|t| t.0.to_string()).collect(),
            probs,
            strides,
            n_profiles,
            agent: Vec::new(),
            principal: PrincipalUtility::General(Vec::new()),
            outside: OutsideOptions::None,
        })
    }

    fn fill_agent(&mut self, agent: impl Fn(&[usize], usize) -> Rational) {
        let nt = self.n_types();
        let mut v = vec![Rational::zero(); self.n_profiles * nt];
        for p in self.all_profiles() {
            let k = self.profile_index(&p);
            for t in 0..nt {
                v[k * nt + t] = agent(&p, t);
            }
        }
        self.agent = v;
    }

    /// Attach outside options.
    pub fn with_outside(mut self, outside: OutsideOptions) -> Result<FiniteGame> {
        if let OutsideOptions::Delegated(opts) = &outside {
            if opts.len() != self.n() {
                return Err(Error::Schema("delegated options need one outcome per principal".into()));
            }
            for (i, &o) in opts.iter().enumerate() {
                if o >= self.outcomes[i].len() {
                    return Err(Error::UnknownLabel(format!("outside option {o} of principal {}", self.principals[i])));
                }
            }
        }
        if matches!(outside, OutsideOptions::Intrinsic) && !self.is_independent() {
            return Err(Error::Schema("intrinsic outside options require independent principal payoffs".into()));
        }
        self.outside = outside;
        Ok(self)
    }

    /// Replace the type distribution.
    pub fn with_probs(mut self, probs: Vec<Rational>) -> Result<FiniteGame> {
        if probs.len() != self.n_types() {
            return Err(Error::Schema("one probability per type required".into()));
        }
        validate_probs(&probs)?;
        self.probs = probs;
        Ok(self)
    }

    /// Set Pr(first type) = p, rescaling the remaining types proportionally
    /// (uniformly when they currently carry no mass).
    pub fn with_first_prob(self, p: Rational) -> Result<FiniteGame> {
        let nt = self.n_types();
        if nt == 1 {
            return self.with_probs(vec![p]);
        }
        let rest: Rational = self.probs[1..].iter().sum();
        let remaining = Rational::one() - &p;
        let mut probs = vec![p];
        for q in &self.probs[1..] {
            if rest.is_zero() {
                probs.push(&remaining / &Rational::int(nt as i64 - 1));
            } else {
                probs.push(&(&remaining * q) / &rest);
            }
        }
        self.with_probs(probs)
    }

    pub fn n(&self) -> usize {
        self.principals.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_outcomes(&self, i: usize) -> usize {
        self.outcomes[i].len()
    }

    pub fn n_profiles(&self) -> usize {
        self.n_profiles
    }

    pub fn principals(&self) -> &[String] {
        &self.principals
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn outcome_labels(&self, i: usize) -> &[String] {
        &self.outcomes[i]
    }

    pub fn prob(&self, t: usize) -> &Rational {
        &self.probs[t]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn outside(&self) -> &OutsideOptions {
        &self.outside
    }

    pub fn mode(&self) -> Mode {
        match self.outside {
            OutsideOptions::None => Mode::Plain,
            OutsideOptions::Intrinsic => Mode::Intrinsic,
            OutsideOptions::Delegated(_) => Mode::Delegated,
        }
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.principal, PrincipalUtility::Independent(_))
    }

    pub fn principal_utility(&self) -> &PrincipalUtility {
        &self.principal
    }

    pub fn full_menu(&self, i: usize) -> Menu {
        Menu::full(self.n_outcomes(i))
    }

    pub fn full_profile(&self) -> MenuProfile {
        (0..self.n()).map(|i| self.full_menu(i)).collect()
    }

    pub fn profile_index(&self, p: &[usize]) -> usize {
        p.iter().zip(&self.strides).map(|(o, s)| o * s).sum()
    }

    pub fn profile_at(&self, mut k: usize) -> Profile {
        self.strides
            .iter()
            .map(|s| {
                let o = k / s;
                k %= s;
                o
            })
            .collect()
    }

    pub fn all_profiles(&self) -> Vec<Profile> {
        (0..self.n_profiles).map(|k| self.profile_at(k)).collect()
    }

    /// V(o, t).
    pub fn agent_value(&self, p: &[usize], t: usize) -> &Rational {
        &self.agent[self.profile_index(p) * self.n_types() + t]
    }

    /// u_i(o, t).
    pub fn principal_value(&self, i: usize, p: &[usize], t: usize) -> &Rational {
        match &self.principal {
            PrincipalUtility::Independent(tab) => &tab[i][p[i]][t],
            PrincipalUtility::General(tab) => &tab[i][self.profile_index(p) * self.n_types() + t],
        }
    }

    /// u_i(o_i, t) in independent mode.
    pub fn own_value(&self, i: usize, o: usize, t: usize) -> Result<&Rational> {
        match &self.principal {
            PrincipalUtility::Independent(tab) => Ok(&tab[i][o][t]),
            PrincipalUtility::General(_) => {
                Err(Error::Precondition("own-outcome payoff requested in general-payoff mode".into()))
            }
        }
    }

    /// u_i of a mechanism assignment; quit is worth 0.
    pub fn own_choice_value(&self, i: usize, c: Choice, t: usize) -> Result<Rational> {
        match c {
            Choice::Quit => Ok(Rational::zero()),
            Choice::Outcome(o) => self.own_value(i, o, t).cloned(),
        }
    }

    /// u_i of a selection; quit is worth 0.
    pub fn selection_value(&self, i: usize, s: &Selection, t: usize) -> Rational {
        match s {
            Selection::Quit => Rational::zero(),
            Selection::Profile(p) => self.principal_value(i, p, t).clone(),
        }
    }

    pub fn principal_index(&self, label: &str) -> Result<usize> {
        self.principals
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn type_index(&self, label: &str) -> Result<usize> {
        self.types.iter().position(|p| p == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn outcome_index(&self, i: usize, label: &str) -> Result<usize> {
        self.outcomes[i]
            .iter()
            .position(|p| p == label)
            .ok_or_else(|| Error::UnknownLabel(format!("{label} (principal {})", self.principals[i])))
    }

    pub fn menu_from_labels(&self, i: usize, labels: &[impl AsRef<str>]) -> Result<Menu> {
        labels.iter().try_fold(Menu::EMPTY, |m, l| Ok(m.with(self.outcome_index(i, l.as_ref())?)))
    }

    pub fn menu_labels(&self, i: usize, m: Menu) -> Vec<String> {
        m.iter().map(|o| self.outcomes[i][o].clone()).collect()
    }

    pub fn profile_labels(&self, p: &[usize]) -> Vec<String> {
        p.iter().enumerate().map(|(i, &o)| self.outcomes[i][o].clone()).collect()
    }

    pub fn choice_label(&self, i: usize, c: Choice) -> String {
        match c {
            Choice::Quit => "quit".into(),
            Choice::Outcome(o) => self.outcomes[i][o].clone(),
        }
    }

    pub fn selection_labels(&self, s: &Selection) -> Vec<String> {
        match s {
            Selection::Quit => vec!["quit".into()],
            Selection::Profile(p) => self.profile_labels(p),
        }
    }

    /// The menus the agent effectively chooses from: under delegated options
    /// every menu is augmented with its principal's outside outcome.
    pub fn effective_menus(&self, profile: &[Menu]) -> MenuProfile {
        match &self.outside {
            OutsideOptions::Delegated(opts) => profile.iter().zip(opts).map(|(m, &o)| m.with(o)).collect(),
            _ => profile.to_vec(),
        }
    }

    /// The agent's optimal selections at a menu profile.
    pub fn agent_optimum(&self, profile: &[Menu], t: usize) -> AgentOptimum {
        let menus = self.effective_menus(profile);
        let mut best: Option<Rational> = None;
        let mut argmax = Vec::new();
        for p in product(&menus) {
            let v = self.agent_value(&p, t);
            match &best {
                Some(b) if v < b => {}
                Some(b) if v == b => argmax.push(p),
                _ => {
                    best = Some(v.clone());
                    argmax.clear();
                    argmax.push(p);
                }
            }
        }
        let quit_optimal = matches!(self.outside, OutsideOptions::Intrinsic)
            && best.as_ref().is_none_or(|b| !b.is_positive());
        let participation_optimal = match (&self.outside, &best) {
            (_, None) => false,
            (OutsideOptions::Intrinsic, Some(b)) => !b.is_negative(),
            _ => true,
        };
        if !participation_optimal {
            argmax.clear();
        }
        AgentOptimum { value: best, argmax, quit: quit_optimal }
    }

    /// Outcome-profile document for serialization (and round trips).
    pub fn to_document(&self) -> GameDocument {
        let nt = self.n_types();
        let mut agent_rows = Vec::with_capacity(self.n_profiles * nt);
        for p in self.all_profiles() {
            for t in 0..nt {
                agent_rows.push(Row {
                    profile: self.profile_labels(&p),
                    type_: self.types[t].clone(),
                    value: self.agent_value(&p, t).clone(),
                });
            }
        }
        let (mode, tables) = match &self.principal {
            PrincipalUtility::Independent(tab) => {
                let mut m = BTreeMap::new();
                for (i, rows) in tab.iter().enumerate() {
                    let mut v = Vec::new();
                    for (o, per_t) in rows.iter().enumerate() {
                        for (t, val) in per_t.iter().enumerate() {
                            v.push(Row {
                                profile: vec![self.outcomes[i][o].clone()],
                                type_: self.types[t].clone(),
                                value: val.clone(),
                            });
                        }
                    }
                    m.insert(self.principals[i].clone(), v);
                }
                (PayoffMode::Independent, m)
            }
            PrincipalUtility::General(_) => {
                let mut m = BTreeMap::new();
                for i in 0..self.n() {
                    let mut v = Vec::new();
                    for p in self.all_profiles() {
                        for t in 0..nt {
                            v.push(Row {
                                profile: self.profile_labels(&p),
                                type_: self.types[t].clone(),
                                value: self.principal_value(i, &p, t).clone(),
                            });
                        }
                    }
                    m.insert(self.principals[i].clone(), v);
                }
                (PayoffMode::General, m)
            }
        };
        GameDocument {
            principals: self.principals.clone(),
            types: self
                .types
                .iter()
                .zip(&self.probs)
                .map(|(l, p)| TypeDoc { label: l.clone(), prob: p.clone() })
                .collect(),
            outcomes: self.principals.iter().cloned().zip(self.outcomes.iter().cloned()).collect(),
            agent_utility: agent_rows,
            principal_utility: PrincipalDoc { mode, tables },
            outside: match &self.outside {
                OutsideOptions::None => None,
                OutsideOptions::Intrinsic => Some(OutsideDoc::Intrinsic),
                OutsideOptions::Delegated(opts) => Some(OutsideDoc::Delegated {
                    options: opts
                        .iter()
                        .enumerate()
                        .map(|(i, &o)| (self.principals[i].clone(), self.outcomes[i][o].clone()))
                        .collect(),
                }),
            },
        }
    }
}

/// The agent's optimal behaviour at one (menu profile, type) node.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentOptimum {
    /// Best value over the (effective) menu product; `None` when it is empty.
    pub value: Option<Rational>,
    /// All maximizing profiles, in index order; empty when participating is not optimal.
    pub argmax: Vec<Profile>,
    /// Quitting is optimal (intrinsic options only).
    pub quit: bool,
}

impl AgentOptimum {
    /// Every optimal selection, quit last.
    pub fn selections(&self) -> Vec<Selection> {
        let mut v: Vec<Selection> = self.argmax.iter().cloned().map(Selection::Profile).collect();
        if self.quit {
            v.push(Selection::Quit);
        }
        v
    }

    pub fn admits(&self, s: &Selection) -> bool {
        match s {
            Selection::Quit => self.quit,
            Selection::Profile(p) => self.argmax.contains(p),
        }
    }
}

/// Iterate the Cartesian product of menus in lexicographic index order.
pub fn product(menus: &[Menu]) -> impl Iterator<Item = Profile> {
    let lists: Vec<Vec<usize>> = menus.iter().map(|m| m.indices()).collect();
    let empty = lists.iter().any(|l| l.is_empty());
    let mut idx = vec![0usize; lists.len()];
    let mut done = empty;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out: Profile = idx.iter().zip(&lists).map(|(&k, l)| l[k]).collect();
        let mut pos = lists.len();
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < lists[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
        Some(out)
    })
}

fn check_unique<'a>(items: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for s in items {
        if !seen.insert(s) {
            return Err(Error::Schema(format!("duplicate {what} label {s:?}")));
        }
    }
    Ok(())
}

fn validate_probs(probs: &[Rational]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| p.is_negative()) {
        return Err(Error::Schema(format!("negative probability {p}")));
    }
    let s: Rational = probs.iter().sum();
    if s != Rational::one() {
        return Err(Error::Distribution(s));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Agent strategies

/// How the entry at a node was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    OnPathUpr,
    AdversarialToDeviator,
    Lexicographic,
    /// Weights recovered from a feasibility witness.
    Supported,
    /// Supplied by the caller.
    Given,
}

/// A distribution over selections at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyEntry {
    pub dist: Vec<(Selection, Rational)>,
    pub policy: TieBreak,
}

impl StrategyEntry {
    pub fn pure(s: Selection, policy: TieBreak) -> Self {
        StrategyEntry { dist: vec![(s, Rational::one())], policy }
    }

    pub fn is_pure(&self) -> bool {
        self.dist.iter().filter(|(_, w)| !w.is_zero()).count() == 1
    }

    /// Support (selections with positive weight).
    pub fn support(&self) -> impl Iterator<Item = &Selection> {
        self.dist.iter().filter(|(_, w)| w.is_positive()).map(|(s, _)| s)
    }
}

/// Rule used at nodes without an explicit entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    /// First agent-optimal selection in index order (participation before quit).
    Lexicographic,
    /// Agent-optimal, ties resolved for principal `i`'s benefit, then lexicographically.
    FavorPrincipal(usize),
}

/// Partial map (menu profile, type) → distribution, with an optional rule
/// for everything else.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AgentStrategy {
    pub entries: BTreeMap<(MenuProfile, usize), StrategyEntry>,
    pub fallback: Option<SelectionRule>,
}

impl AgentStrategy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(rule: SelectionRule) -> Self {
        AgentStrategy { entries: BTreeMap::new(), fallback: Some(rule) }
    }

    pub fn insert(&mut self, profile: MenuProfile, t: usize, entry: StrategyEntry) {
        self.entries.insert((profile, t), entry);
    }

    /// The distribution at a node.
    pub fn at<'a>(&'a self, game: &FiniteGame, profile: &[Menu], t: usize) -> Result<Cow<'a, StrategyEntry>> {
        if let Some(e) = self.entries.get(&(profile.to_vec(), t)) {
            return Ok(Cow::Borrowed(e));
        }
        let rule = self.fallback.ok_or_else(|| Error::StrategyUndefined(node_label(game, profile, t)))?;
        Ok(Cow::Owned(apply_rule(game, rule, profile, t)?))
    }

    /// Check weights and agent optimality at every explicit node.
    pub fn audit(&self, game: &FiniteGame) -> Result<()> {
        for ((profile, t), e) in &self.entries {
            audit_entry(game, profile, *t, e)?;
        }
        Ok(())
    }
}

pub(crate) fn audit_entry(game: &FiniteGame, profile: &[Menu], t: usize, e: &StrategyEntry) -> Result<()> {
    let total: Rational = e.dist.iter().map(|(_, w)| w).sum();
    if total != Rational::one() || e.dist.iter().any(|(_, w)| w.is_negative()) {
        return Err(Error::Invalid(format!("weights at {} do not form a distribution", node_label(game, profile, t))));
    }
    let opt = game.agent_optimum(profile, t);
    for s in e.support() {
        if !opt.admits(s) {
            return Err(Error::Invalid(format!(
                "selection {:?} at {} is not agent-optimal",
                game.selection_labels(s),
                node_label(game, profile, t)
            )));
        }
    }
    Ok(())
}

pub(crate) fn apply_rule(game: &FiniteGame, rule: SelectionRule, profile: &[Menu], t: usize) -> Result<StrategyEntry> {
    let opt = game.agent_optimum(profile, t);
    let cands = opt.selections();
    let pick = match rule {
        SelectionRule::Lexicographic => cands.into_iter().next(),
        SelectionRule::FavorPrincipal(i) => {
            let mut best: Option<(Rational, Selection)> = None;
            for s in cands {
                let v = game.selection_value(i, &s, t);
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, s));
                }
            }
            best.map(|(_, s)| s)
        }
    };
    let s = pick.ok_or_else(|| Error::StrategyUndefined(node_label(game, profile, t)))?;
    Ok(StrategyEntry::pure(s, TieBreak::Lexicographic))
}

pub fn node_label(game: &FiniteGame, profile: &[Menu], t: usize) -> String {
    let menus: Vec<String> = profile
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{{{}}}", game.menu_labels(i, *m).join(",")))
        .collect();
    format!("({}; {})", menus.join(" x "), game.types()[t])
}

/// E_t[u_i(σ_A(profile, t), t)].
pub fn expected_principal_payoff(
    game: &FiniteGame,
    i: usize,
    strategy: &AgentStrategy,
    profile: &[Menu],
) -> Result<Rational> {
    let mut total = Rational::zero();
    for t in 0..game.n_types() {
        let e = strategy.at(game, profile, t)?;
        for (s, w) in &e.dist {
            total += game.prob(t) * &(w * &game.selection_value(i, s, t));
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub principals: Vec<String>,
    pub types: Vec<TypeDoc>,
    pub outcomes: BTreeMap<String, Vec<String>>,
    pub agent_utility: Vec<Row>,
    pub principal_utility: PrincipalDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outside: Option<OutsideDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDoc {
    pub label: String,
    pub prob: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub profile: Vec<String>,
    #[serde(rename = "type")]
    pub type_: String,
    pub value: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffMode {
    Independent,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalDoc {
    pub mode: PayoffMode,
    /// Rows per principal.
    pub tables: BTreeMap<String, Vec<Row>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OutsideDoc {
    Intrinsic,
    Delegated { options: BTreeMap<String, String> },
}

/// Parse and validate a game description.
pub fn load_game(text: &str) -> Result<FiniteGame> {
    let doc: GameDocument = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    from_document(&doc)
}

pub fn from_document(doc: &GameDocument) -> Result<FiniteGame> {
    let principals: Vec<&str> = doc.principals.iter().map(String::as_str).collect();
    let mut outcome_sets = Vec::new();
    for p in &doc.principals {
        let os = doc
            .outcomes
            .get(p)
            .ok_or_else(|| Error::Schema(format!("no outcome set for principal {p:?}")))?;
        outcome_sets.push(os.iter().map(String::as_str).collect::<Vec<_>>());
    }
    if doc.outcomes.len() != doc.principals.len() {
        return Err(Error::Schema("outcome sets listed for unknown principals".into()));
    }
    let outcome_refs: Vec<&[&str]> = outcome_sets.iter().map(|v| v.as_slice()).collect();
    let types: Vec<(&str, Rational)> = doc.types.iter().map(|t| (t.label.as_str(), t.prob.clone())).collect();
    let mut g = FiniteGame::skeleton(&principals, &outcome_refs, &types)?;
    let nt = g.n_types();

    let lookup_profile = |g: &FiniteGame, labels: &[String]| -> Result<Profile> {
        if labels.len() != g.n() {
            return Err(Error::Schema(format!("profile {labels:?} has wrong length")));
        }
        labels.iter().enumerate().map(|(i, l)| g.outcome_index(i, l)).collect()
    };

    let agent = fill_table(&g, &doc.agent_utility, "agent_utility", |r| {
        Ok((g.profile_index(&lookup_profile(&g, &r.profile)?), g.type_index(&r.type_)?))
    })?;
    g.agent = agent;

    if doc.principal_utility.tables.len() != g.n()
        || doc.principal_utility.tables.keys().any(|k| !doc.principals.contains(k))
    {
        return Err(Error::Schema("principal_utility needs exactly one table per principal".into()));
    }
    match doc.principal_utility.mode {
        PayoffMode::General => {
            let mut tabs = Vec::new();
            for p in &doc.principals {
                let rows = &doc.principal_utility.tables[p];
                tabs.push(fill_table(&g, rows, &format!("principal_utility[{p}]"), |r| {
                    Ok((g.profile_index(&lookup_profile(&g, &r.profile)?), g.type_index(&r.type_)?))
                })?);
            }
            g.principal = PrincipalUtility::General(tabs);
        }
        PayoffMode::Independent => {
            let mut tabs = Vec::new();
            for (i, p) in doc.principals.iter().enumerate() {
                let rows = &doc.principal_utility.tables[p];
                let short = rows.first().is_none_or(|r| r.profile.len() == 1);
                let flat = if short && g.n() > 1 {
                    let n_o = g.n_outcomes(i);
                    let mut tab: Vec<Option<Rational>> = vec![None; n_o * nt];
                    for r in rows {
                        if r.profile.len() != 1 {
                            return Err(Error::Schema(format!("mixed row shapes in table of {p}")));
                        }
                        let k = g.outcome_index(i, &r.profile[0])? * nt + g.type_index(&r.type_)?;
                        if tab[k].replace(r.value.clone()).is_some() {
                            return Err(Error::Schema(format!("duplicate row {:?}/{} in table of {p}", r.profile, r.type_)));
                        }
                    }
                    complete(tab, |k| format!("principal_utility[{p}] at ({}, {})", g.outcomes[i][k / nt], g.types[k % nt]))?
                } else {
                    // Full-profile rows: must not vary with rival outcomes.
                    let full = fill_table(&g, rows, &format!("principal_utility[{p}]"), |r| {
                        Ok((g.profile_index(&lookup_profile(&g, &r.profile)?), g.type_index(&r.type_)?))
                    })?;
                    let mut tab: Vec<Option<Rational>> = vec![None; g.n_outcomes(i) * nt];
                    for prof in g.all_profiles() {
                        for t in 0..nt {
                            let v = &full[g.profile_index(&prof) * nt + t];
                            let slot = &mut tab[prof[i] * nt + t];
                            match slot {
                                None => *slot = Some(v.clone()),
                                Some(prev) if prev != v => {
                                    return Err(Error::NotIndependent {
                                        principal: p.clone(),
                                        detail: format!("{:?}/{}", g.profile_labels(&prof), g.types[t]),
                                    })
                                }
                                _ => {}
                            }
                        }
                    }
                    tab.into_iter().map(|v| v.expect("filled")).collect()
                };
                tabs.push((0..g.n_outcomes(i)).map(|o| flat[o * nt..(o + 1) * nt].to_vec()).collect());
            }
            g.principal = PrincipalUtility::Independent(tabs);
        }
    }

    let outside = match &doc.outside {
        None => OutsideOptions::None,
        Some(OutsideDoc::Intrinsic) => OutsideOptions::Intrinsic,
        Some(OutsideDoc::Delegated { options }) => {
            let mut v = Vec::new();
            for (i, p) in doc.principals.iter().enumerate() {
                let l = options.get(p).ok_or_else(|| Error::Schema(format!("no outside option for {p:?}")))?;
                v.push(g.outcome_index(i, l)?);
            }
            OutsideOptions::Delegated(v)
        }
    };
    g.with_outside(outside)
}

fn fill_table(
    g: &FiniteGame,
    rows: &[Row],
    what: &str,
    key: impl Fn(&Row) -> Result<(usize, usize)>,
) -> Result<Vec<Rational>> {
    let nt = g.n_types();
    let mut tab: Vec<Option<Rational>> = vec![None; g.n_profiles * nt];
    for r in rows {
        let (k, t) = key(r)?;
        if tab[k * nt + t].replace(r.value.clone()).is_some() {
            return Err(Error::Schema(format!("duplicate row {:?}/{} in {what}", r.profile, r.type_)));
        }
    }
    complete(tab, |k| format!("{what} at ({:?}, {})", g.profile_labels(&g.profile_at(k / nt)), g.types[k % nt]))
}

fn complete(tab: Vec<Option<Rational>>, describe: impl Fn(usize) -> String) -> Result<Vec<Rational>> {
    tab.into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| Error::MissingEntry(describe(k))))
        .collect()
}

/// Label-keyed mechanism description: principal → (type → outcome or "quit").
pub type MechanismDoc = BTreeMap<String, BTreeMap<String, String>>;

pub fn mechanisms_from_doc(game: &FiniteGame, doc: &MechanismDoc) -> Result<Vec<DirectMechanism>> {
    let mut out = Vec::new();
    for (i, p) in game.principals().iter().enumerate() {
        let m = doc.get(p).ok_or_else(|| Error::Schema(format!("no mechanism for principal {p:?}")))?;
        let mut map = Vec::new();
        for t in game.types() {
            let l = m.get(t).ok_or_else(|| Error::MissingEntry(format!("mechanism of {p} at type {t}")))?;
            if l == "quit" {
                if game.mode() != Mode::Intrinsic {
                    return Err(Error::Schema("quit requires intrinsic outside options".into()));
                }
                map.push(Choice::Quit);
            } else {
                map.push(Choice::Outcome(game.outcome_index(i, l)?));
            }
        }
        out.push(DirectMechanism { principal: i, map });
    }
    Ok(out)
}

pub fn mechanism_to_doc(game: &FiniteGame, mechs: &[DirectMechanism]) -> MechanismDoc {
    mechs
        .iter()
        .map(|m| {
            let i = m.principal;
            (
                game.principals()[i].clone(),
                m.map.iter().enumerate().map(|(t, c)| (game.types()[t].clone(), game.choice_label(i, *c))).collect(),
            )
        })
        .collect()
}

/// Label-keyed menu profile: principal → outcome labels.
pub type MenuProfileDoc = BTreeMap<String, Vec<String>>;

pub fn profile_from_doc(game: &FiniteGame, doc: &MenuProfileDoc) -> Result<MenuProfile> {
    if let Some(k) = doc.keys().find(|k| !game.principals().contains(k)) {
        return Err(Error::UnknownLabel(k.clone()));
    }
    game.principals()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let labels = doc.get(p).ok_or_else(|| Error::Schema(format!("no menu for principal {p:?}")))?;
            let m = game.menu_from_labels(i, labels)?;
            if m.is_empty() && game.mode() != Mode::Intrinsic {
                return Err(Error::Schema(format!("empty menu for principal {p:?}")));
            }
            Ok(m)
        })
        .collect()
}

pub fn profile_to_doc(game: &FiniteGame, profile: &[Menu]) -> MenuProfileDoc {
    profile.iter().enumerate().map(|(i, m)| (game.principals()[i].clone(), game.menu_labels(i, *m))).collect()
}

/// Serializable strategy entry keyed by labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntryDoc {
    pub menus: MenuProfileDoc,
    #[serde(rename = "type")]
    pub type_: String,
    /// Selections as outcome-label profiles (`["quit"]` for quitting) with weights.
    pub dist: Vec<(Vec<String>, Rational)>,
    pub policy: TieBreak,
}

pub fn strategy_to_doc(game: &FiniteGame, s: &AgentStrategy) -> Vec<StrategyEntryDoc> {
    s.entries
        .iter()
        .map(|((profile, t), e)| StrategyEntryDoc {
            menus: profile_to_doc(game, profile),
            type_: game.types()[*t].clone(),
            dist: e.dist.iter().map(|(sel, w)| (game.selection_labels(sel), w.clone())).collect(),
            policy: e.policy,
        })
        .collect()
}

pub fn strategy_from_doc(game: &FiniteGame, docs: &[StrategyEntryDoc]) -> Result<AgentStrategy> {
    let mut s = AgentStrategy::new();
    for d in docs {
        let profile = profile_from_doc(game, &d.menus)?;
        let t = game.type_index(&d.type_)?;
        let mut dist = Vec::new();
        for (labels, w) in &d.dist {
            let sel = if labels.len() == 1 && labels[0] == "quit" && game.n() > 0 && game.outcome_index(0, "quit").is_err()
            {
                Selection::Quit
            } else {
                if labels.len() != game.n() {
                    return Err(Error::Schema(format!("selection {labels:?} has wrong length")));
                }
                Selection::Profile(labels.iter().enumerate().map(|(i, l)| game.outcome_index(i, l)).collect::<Result<_>>()?)
            };
            dist.push((sel, w.clone()));
        }
        s.insert(profile, t, StrategyEntry { dist, policy: d.policy });
    }
    Ok(s)
}

/// Count of rows indexed by label, used by tests.
pub fn agent_row_count(game: &FiniteGame) -> usize {
    game.n_profiles() * game.n_types()
}
