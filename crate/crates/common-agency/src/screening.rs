//! Single-principal screening against fixed rival menus.
//!
//! The solver enumerates candidate menus S ⊆ O_i (by cardinality, then
//! lexicographically). For each S, incentive compatibility pins every type to
//! its agent-optimal elements of S; among those the principal takes its
//! favourite, and S is feasible only if some such assignment has range
//! exactly S (decided by bipartite matching).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::game::{AgentStrategy, Choice, DirectMechanism, FiniteGame, Menu, MenuProfile, Mode, Selection};
use crate::indirect::indirect_utility;
use crate::par;
use crate::rational::Rational;

/// How the principal evaluates a mechanism.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// u_i depends on the own outcome only; ties in the agent's argmax go the principal's way.
    Independent,
    /// u_i depends on the whole profile; the agent's selection comes from σ_A.
    General(&'a AgentStrategy),
}

#[derive(Clone, Debug)]
pub struct ScreeningProblem<'a> {
    pub game: &'a FiniteGame,
    pub principal: usize,
    /// One menu per principal; the entry of `principal` is ignored.
    pub rival_menus: MenuProfile,
    pub objective: Objective<'a>,
}

impl<'a> ScreeningProblem<'a> {
    pub fn new(game: &'a FiniteGame, principal: usize, rival_menus: MenuProfile) -> Self {
        ScreeningProblem { game, principal, rival_menus, objective: Objective::Independent }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScreeningOptions {
    /// Maximum number of optimal mechanisms listed.
    pub cap: usize,
    /// Refuse to enumerate menus of principals with more outcomes than this.
    pub max_enumerated_outcomes: usize,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        ScreeningOptions { cap: 64, max_enumerated_outcomes: 22 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningSolution {
    pub value: Rational,
    /// Optimal mechanisms in menu order (capped).
    pub mechanisms: Vec<DirectMechanism>,
    /// Induced menu of each listed mechanism.
    pub menus: Vec<Menu>,
    /// Every menu attaining the optimum, minimal first.
    pub optimal_menus: Vec<Menu>,
    pub truncated: bool,
}

impl ScreeningSolution {
    pub fn is_optimal_menu(&self, m: Menu) -> bool {
        self.optimal_menus.binary_search_by(|x| menu_order(*x, m)).is_ok()
    }
}

/// Canonical menu order: cardinality, then lexicographic on sorted indices.
pub fn menu_order(a: Menu, b: Menu) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        // lexicographic on increasing index lists: the first differing bit
        // decides; the menu holding the smaller index comes first
        let diff = a.0 ^ b.0;
        if diff == 0 {
            Ordering::Equal
        } else if a.0 >> diff.trailing_zeros() & 1 == 1 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    })
}

/// All candidate menus of a principal in canonical order.
pub fn candidate_menus(game: &FiniteGame, i: usize) -> Vec<Menu> {
    let n = game.n_outcomes(i);
    let start = if game.mode() == Mode::Intrinsic { 0 } else { 1 };
    let mut out: Vec<Menu> = (start..(1u64 << n)).map(Menu).collect();
    out.sort_by(|a, b| menu_order(*a, *b));
    out
}

/// What IC/IR leave open for one type facing a candidate menu.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    /// Must take one of these outcomes.
    Outcomes(u64),
    /// Indifferent at zero between these outcomes and quitting.
    OutcomesOrQuit(u64),
    Quit,
}

impl Slot {
    fn outcomes(self) -> u64 {
        match self {
            Slot::Outcomes(b) | Slot::OutcomesOrQuit(b) => b,
            Slot::Quit => 0,
        }
    }
}

/// Precomputed per-type orderings so that candidate evaluation is bit twiddling.
struct Prepared<'a> {
    game: &'a FiniteGame,
    i: usize,
    nt: usize,
    mode: Mode,
    /// Agent tie groups per type, best first: (sign of value vs 0, IR ok, mask).
    agent_groups: Vec<Vec<(Ordering, bool, u64)>>,
    /// Principal tie groups per type, best first (independent objective).
    own_groups: Vec<Vec<(Ordering, u64)>>,
    /// p_t · u_i(o, t) (independent objective).
    weighted: Vec<Vec<Rational>>,
    objective: Objective<'a>,
    rival_menus: MenuProfile,
}

impl<'a> Prepared<'a> {
    fn new(p: &ScreeningProblem<'a>) -> Result<Self> {
        let game = p.game;
        let i = p.principal;
        let mode = game.mode();
        if let Objective::General(_) = p.objective {
            if mode != Mode::Plain {
                return Err(Error::Precondition("general-payoff screening supports games without outside options".into()));
            }
        } else if !game.is_independent() {
            return Err(Error::Precondition("independent objective on a general-payoff game".into()));
        }
        let effective = game.effective_menus(&p.rival_menus);
        let tab = indirect_utility(game, i, &effective)?;
        let nt = game.n_types();
        let n_o = game.n_outcomes(i);
        let ir_floor: Option<Vec<Option<Rational>>> = match game.outside() {
            crate::game::OutsideOptions::Delegated(opts) => {
                Some((0..nt).map(|t| tab.values[opts[i]][t].clone()).collect())
            }
            _ => None,
        };
        let mut agent_groups = Vec::with_capacity(nt);
        for t in 0..nt {
            let mut idx: Vec<usize> = (0..n_o).collect();
            idx.sort_by(|&a, &b| tab.values[b][t].cmp(&tab.values[a][t]).then(a.cmp(&b)));
            let mut groups: Vec<(Ordering, bool, u64)> = Vec::new();
            let mut last: Option<&Option<Rational>> = None;
            for &o in &idx {
                let v = &tab.values[o][t];
                if last == Some(v) {
                    groups.last_mut().expect("group").2 |= 1u64 << o;
                } else {
                    let sign = match v {
                        None => Ordering::Less,
                        Some(x) => x.cmp(&Rational::zero()),
                    };
                    let ir = match &ir_floor {
                        Some(f) => v >= &f[t],
                        None => true,
                    };
                    groups.push((sign, ir, 1u64 << o));
                    last = Some(v);
                }
            }
            agent_groups.push(groups);
        }
        let (own_groups, weighted) = if game.is_independent() {
            let mut og = Vec::with_capacity(nt);
            let mut w = Vec::with_capacity(nt);
            for t in 0..nt {
                let vals: Vec<&Rational> = (0..n_o).map(|o| game.own_value(i, o, t)).collect::<Result<_>>()?;
                let mut idx: Vec<usize> = (0..n_o).collect();
                idx.sort_by(|&a, &b| vals[b].cmp(vals[a]).then(a.cmp(&b)));
                let mut groups: Vec<(Ordering, u64)> = Vec::new();
                let mut last: Option<&Rational> = None;
                for &o in &idx {
                    if last == Some(vals[o]) {
                        groups.last_mut().expect("group").1 |= 1u64 << o;
                    } else {
                        groups.push((vals[o].cmp(&Rational::zero()), 1u64 << o));
                        last = Some(vals[o]);
                    }
                }
                og.push(groups);
                w.push(vals.iter().map(|v| game.prob(t) * *v).collect());
            }
            (og, w)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Prepared { game, i, nt, mode, agent_groups, own_groups, weighted, objective: p.objective, rival_menus: p.rival_menus.clone() })
    }

    /// Agent-optimal elements of S at t, with their sign and IR status.
    fn agent_best(&self, s: u64, t: usize) -> Option<(Ordering, bool, u64)> {
        self.agent_groups[t].iter().find(|g| g.2 & s != 0).map(|&(sign, ir, m)| (sign, ir, m & s))
    }

    /// Per-type slots for candidate S, or `None` when IR fails (delegated).
    fn slots(&self, s: u64) -> Option<Vec<Slot>> {
        let mut out = Vec::with_capacity(self.nt);
        for t in 0..self.nt {
            let best = self.agent_best(s, t);
            let slot = match self.mode {
                Mode::Intrinsic => match best {
                    None => Slot::Quit,
                    Some((Ordering::Less, _, _)) => Slot::Quit,
                    Some((sign, _, a)) => {
                        let (usign, b) = self.own_best(a, t);
                        match (sign, usign) {
                            (Ordering::Equal, Ordering::Less) => Slot::Quit,
                            (Ordering::Equal, Ordering::Equal) => Slot::OutcomesOrQuit(b),
                            _ => Slot::Outcomes(b),
                        }
                    }
                },
                Mode::Delegated => {
                    let (_, ir, a) = best?;
                    if !ir {
                        return None;
                    }
                    Slot::Outcomes(self.own_best(a, t).1)
                }
                Mode::Plain => {
                    let (_, _, a) = best?;
                    match self.objective {
                        Objective::Independent => Slot::Outcomes(self.own_best(a, t).1),
                        Objective::General(_) => Slot::Outcomes(a),
                    }
                }
            };
            out.push(slot);
        }
        Some(out)
    }

    fn own_best(&self, a: u64, t: usize) -> (Ordering, u64) {
        self.own_groups[t]
            .iter()
            .find(|g| g.1 & a != 0)
            .map(|&(sign, m)| (sign, m & a))
            .expect("nonempty agent set")
    }

    /// Feasibility and value of S.
    fn evaluate(&self, s: u64) -> Result<Option<Rational>> {
        let Some(slots) = self.slots(s) else { return Ok(None) };
        if !covers(s, &slots) {
            return Ok(None);
        }
        match self.objective {
            Objective::Independent => {
                let mut v = Rational::zero();
                for (t, slot) in slots.iter().enumerate() {
                    if let Slot::Outcomes(b) = slot {
                        v += &self.weighted[t][b.trailing_zeros() as usize];
                    }
                }
                Ok(Some(v))
            }
            Objective::General(strategy) => {
                let mut profile = self.rival_menus.clone();
                profile[self.i] = Menu(s);
                let mut v = Rational::zero();
                for t in 0..self.nt {
                    let e = strategy.at(self.game, &profile, t)?;
                    for (sel, w) in &e.dist {
                        v += self.game.prob(t) * &(w * &self.game.selection_value(self.i, sel, t));
                    }
                }
                Ok(Some(v))
            }
        }
    }

    /// The canonical optimal-for-menu mechanism.
    fn canonical(&self, s: u64) -> Result<Option<DirectMechanism>> {
        let Some(slots) = self.slots(s) else { return Ok(None) };
        let Some(owner) = matching(s, &slots) else { return Ok(None) };
        let mut map: Vec<Choice> = Vec::with_capacity(self.nt);
        // start from the lexicographically first choice; fall back to the
        // matching only where needed to hit every element of S
        let lex: Vec<Choice> = slots
            .iter()
            .map(|sl| match sl {
                Slot::Quit => Choice::Quit,
                other => Choice::Outcome(other.outcomes().trailing_zeros() as usize),
            })
            .collect();
        let lex_range = lex.iter().filter_map(|c| c.outcome()).fold(0u64, |m, o| m | 1 << o);
        if lex_range == s {
            map = lex;
        } else {
            for (t, sl) in slots.iter().enumerate() {
                map.push(match (owner[t], sl) {
                    (Some(o), _) => Choice::Outcome(o),
                    (None, Slot::Quit) => Choice::Quit,
                    (None, other) => Choice::Outcome(other.outcomes().trailing_zeros() as usize),
                });
            }
        }
        if let Objective::General(strategy) = self.objective {
            // prefer the selection σ_A actually makes when it is consistent
            let mut profile = self.rival_menus.clone();
            profile[self.i] = Menu(s);
            let mut alt = map.clone();
            for (t, c) in alt.iter_mut().enumerate() {
                let e = strategy.at(self.game, &profile, t)?;
                if let Some((Selection::Profile(p), _)) = e.dist.iter().find(|(_, w)| w.is_positive()) {
                    if slots[t].outcomes() >> p[self.i] & 1 == 1 {
                        *c = Choice::Outcome(p[self.i]);
                    }
                }
            }
            if alt.iter().filter_map(|c| c.outcome()).fold(0u64, |m, o| m | 1 << o) == s {
                map = alt;
            }
        }
        Ok(Some(DirectMechanism { principal: self.i, map }))
    }

    /// All optimal mechanisms with range S, up to `limit`.
    fn all_for_menu(&self, s: u64, limit: usize, out: &mut Vec<DirectMechanism>) -> bool {
        let Some(slots) = self.slots(s) else { return false };
        let options: Vec<Vec<Choice>> = slots
            .iter()
            .map(|sl| {
                let mut v: Vec<Choice> = Menu(sl.outcomes()).iter().map(Choice::Outcome).collect();
                if matches!(sl, Slot::Quit | Slot::OutcomesOrQuit(_)) {
                    v.push(Choice::Quit);
                }
                v
            })
            .collect();
        // suffix unions for pruning
        let mut reach = vec![0u64; self.nt + 1];
        for t in (0..self.nt).rev() {
            reach[t] = reach[t + 1] | slots[t].outcomes();
        }
        let mut cur = Vec::with_capacity(self.nt);
        let mut truncated = false;
        dfs(0, 0, s, &options, &reach, &mut cur, out, limit, self.i, &mut truncated);
        truncated
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    t: usize,
    got: u64,
    s: u64,
    options: &[Vec<Choice>],
    reach: &[u64],
    cur: &mut Vec<Choice>,
    out: &mut Vec<DirectMechanism>,
    limit: usize,
    i: usize,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    if t == options.len() {
        if got == s {
            if out.len() >= limit {
                *truncated = true;
            } else {
                out.push(DirectMechanism { principal: i, map: cur.clone() });
            }
        }
        return;
    }
    if (got | reach[t]) & s != s {
        return;
    }
    for &c in &options[t] {
        cur.push(c);
        let g = match c {
            Choice::Outcome(o) => got | 1 << o,
            Choice::Quit => got,
        };
        dfs(t + 1, g, s, options, reach, cur, out, limit, i, truncated);
        cur.pop();
    }
}

fn covers(s: u64, slots: &[Slot]) -> bool {
    let union = slots.iter().fold(0u64, |m, sl| m | sl.outcomes());
    if union & s != s {
        return false;
    }
    // quick accept: distinct-per-type already
    matching(s, slots).is_some()
}

/// Assign every element of S to a distinct type that may take it.
fn matching(s: u64, slots: &[Slot]) -> Option<Vec<Option<usize>>> {
    let mut owner: Vec<Option<usize>> = vec![None; slots.len()];
    for e in Menu(s).iter() {
        let mut seen = vec![false; slots.len()];
        if !augment(e, slots, &mut owner, &mut seen) {
            return None;
        }
    }
    Some(owner)
}

fn augment(e: usize, slots: &[Slot], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for t in 0..slots.len() {
        if seen[t] || slots[t].outcomes() >> e & 1 == 0 {
            continue;
        }
        seen[t] = true;
        if owner[t].is_none_or(|prev| augment(prev, slots, owner, seen)) {
            owner[t] = Some(e);
            return true;
        }
    }
    false
}

/// Solve the screening program of one principal.
pub fn solve_screening(problem: &ScreeningProblem<'_>) -> Result<ScreeningSolution> {
    solve_screening_with(problem, ScreeningOptions::default())
}

/// Screening with general payoffs routed through an agent strategy.
pub fn solve_screening_general(problem: &ScreeningProblem<'_>) -> Result<ScreeningSolution> {
    if !matches!(problem.objective, Objective::General(_)) {
        return Err(Error::Precondition("general screening needs a strategy objective".into()));
    }
    solve_screening_with(problem, ScreeningOptions::default())
}

pub fn solve_screening_with(problem: &ScreeningProblem<'_>, opts: ScreeningOptions) -> Result<ScreeningSolution> {
    let game = problem.game;
    let i = problem.principal;
    if game.n_outcomes(i) > opts.max_enumerated_outcomes {
        return Err(Error::BoundExceeded {
            what: "outcomes enumerated by the screening solver",
            limit: opts.max_enumerated_outcomes,
            got: game.n_outcomes(i),
        });
    }
    let prep = Prepared::new(problem)?;
    let menus = candidate_menus(game, i);
    const CHUNK: usize = 1024;
    let n_chunks = menus.len().div_ceil(CHUNK);
    let partial: Vec<Result<(Option<Rational>, Vec<Menu>)>> = par::map_range(n_chunks, |c| {
        let mut best: Option<Rational> = None;
        let mut at: Vec<Menu> = Vec::new();
        for &m in &menus[c * CHUNK..((c + 1) * CHUNK).min(menus.len())] {
            if let Some(v) = prep.evaluate(m.0)? {
                match &best {
                    Some(b) if v < *b => {}
                    Some(b) if v == *b => at.push(m),
                    _ => {
                        best = Some(v);
                        at = vec![m];
                    }
                }
            }
        }
        Ok((best, at))
    });
    let mut best: Option<Rational> = None;
    let mut optimal_menus: Vec<Menu> = Vec::new();
    for r in partial {
        let (v, ms) = r?;
        let Some(v) = v else { continue };
        match &best {
            Some(b) if v < *b => {}
            Some(b) if v == *b => optimal_menus.extend(ms),
            _ => {
                best = Some(v);
                optimal_menus = ms;
            }
        }
    }
    let value = best.ok_or_else(|| Error::Infeasible(format!("principal {} has no feasible menu", game.principals()[i])))?;
    let mut mechanisms = Vec::new();
    let mut truncated = false;
    for &m in &optimal_menus {
        if mechanisms.len() >= opts.cap {
            truncated = true;
            break;
        }
        let room = opts.cap - mechanisms.len();
        truncated |= prep.all_for_menu(m.0, room, &mut mechanisms);
    }
    let menus_of = mechanisms.iter().map(|m| m.range()).collect();
    Ok(ScreeningSolution { value, mechanisms, menus: menus_of, optimal_menus, truncated })
}

/// The principal-favourably tie-broken mechanism with range exactly S, if any.
pub fn optimal_for_menu(problem: &ScreeningProblem<'_>, s: Menu) -> Result<Option<DirectMechanism>> {
    let prep = Prepared::new(problem)?;
    if s.is_empty() && problem.game.mode() != Mode::Intrinsic {
        return Err(Error::Invalid("candidate menu must be nonempty".into()));
    }
    prep.canonical(s.0)
}

/// Value of a candidate menu (None when infeasible).
pub fn menu_value(problem: &ScreeningProblem<'_>, s: Menu) -> Result<Option<Rational>> {
    Prepared::new(problem)?.evaluate(s.0)
}

/// Value of a mechanism under the independent objective.
pub fn mechanism_value(game: &FiniteGame, m: &DirectMechanism) -> Result<Rational> {
    let mut v = Rational::zero();
    for (t, c) in m.map.iter().enumerate() {
        v += game.prob(t) * &game.own_choice_value(m.principal, *c, t)?;
    }
    Ok(v)
}

/// Independent re-check of IC (and IR) for a mechanism against rival menus.
pub fn is_feasible(game: &FiniteGame, m: &DirectMechanism, rival_menus: &[Menu]) -> Result<bool> {
    let i = m.principal;
    let effective = game.effective_menus(rival_menus);
    let tab = indirect_utility(game, i, &effective)?;
    let value = |c: Choice, t: usize| -> Option<Rational> {
        match c {
            Choice::Quit => Some(Rational::zero()),
            Choice::Outcome(o) => tab.values[o][t].clone(),
        }
    };
    let mode = game.mode();
    for t in 0..game.n_types() {
        let own = value(m.map[t], t);
        if m.map[t] == Choice::Quit && mode != Mode::Intrinsic {
            return Ok(false);
        }
        for s in 0..game.n_types() {
            if value(m.map[s], t) > own {
                return Ok(false);
            }
        }
        match (mode, game.outside()) {
            (Mode::Intrinsic, _) => {
                if own < Some(Rational::zero()) {
                    return Ok(false);
                }
            }
            (Mode::Delegated, crate::game::OutsideOptions::Delegated(opts))
                if own < tab.values[opts[i]][t] => {
                    return Ok(false);
                }
            _ => {}
        }
    }
    Ok(true)
}
