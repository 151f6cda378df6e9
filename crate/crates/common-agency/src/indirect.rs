//! The agent's indirect utility over one principal's outcomes, given the
//! rivals' menus: v_i(o_i, t | M_-i) = max over rival selections of V.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{product, FiniteGame, Menu, MenuProfile, Mode, Profile};
use crate::rational::Rational;

/// Indirect-utility table of one principal.
///
/// `None` stands for −∞: some rival menu is empty (possible only under
/// intrinsic options), so participation is impossible.
#[derive(Clone, Debug, PartialEq)]
pub struct IndirectUtilityTable {
    pub principal: usize,
    /// Rival menus used (entry `principal` is ignored).
    pub rival_menus: MenuProfile,
    /// `values[o][t]`.
    pub values: Vec<Vec<Option<Rational>>>,
    /// `witnesses[o][t]`: every maximizing full profile. Empty for mixtures.
    pub witnesses: Vec<Vec<Vec<Profile>>>,
    /// Value of quitting per type (0) when intrinsic options are active.
    pub quit: Option<Vec<Rational>>,
}

impl IndirectUtilityTable {
    pub fn value(&self, o: usize, t: usize) -> Option<&Rational> {
        self.values[o][t].as_ref()
    }
}

/// Exact indirect utility with full argmax witnesses.
pub fn indirect_utility(game: &FiniteGame, i: usize, rival_menus: &[Menu]) -> Result<IndirectUtilityTable> {
    check_rivals(game, i, rival_menus)?;
    let nt = game.n_types();
    let mut values = Vec::with_capacity(game.n_outcomes(i));
    let mut witnesses = Vec::with_capacity(game.n_outcomes(i));
    for o in 0..game.n_outcomes(i) {
        let mut menus = rival_menus.to_vec();
        menus[i] = Menu::singleton(o);
        let mut row_v = vec![None; nt];
        let mut row_w = vec![Vec::new(); nt];
        for p in product(&menus) {
            for t in 0..nt {
                let v = game.agent_value(&p, t);
                match &row_v[t] {
                    Some(b) if v < b => {}
                    Some(b) if v == b => row_w[t].push(p.clone()),
                    _ => {
                        row_v[t] = Some(v.clone());
                        row_w[t] = vec![p.clone()];
                    }
                }
            }
        }
        values.push(row_v);
        witnesses.push(row_w);
    }
    Ok(IndirectUtilityTable {
        principal: i,
        rival_menus: rival_menus.to_vec(),
        values,
        witnesses,
        quit: (game.mode() == Mode::Intrinsic).then(|| vec![Rational::zero(); nt]),
    })
}

/// Indirect utility against a lottery over rival menu profiles.
pub fn indirect_utility_mixed(
    game: &FiniteGame,
    i: usize,
    mixture: &[(MenuProfile, Rational)],
) -> Result<IndirectUtilityTable> {
    if mixture.is_empty() {
        return Err(Error::Invalid("empty rival mixture".into()));
    }
    let total: Rational = mixture.iter().map(|(_, w)| w).sum();
    if total != Rational::one() || mixture.iter().any(|(_, w)| w.is_negative()) {
        return Err(Error::Invalid(format!("mixture weights sum to {total}")));
    }
    let nt = game.n_types();
    let mut acc: Vec<Vec<Option<Rational>>> = vec![vec![Some(Rational::zero()); nt]; game.n_outcomes(i)];
    for (menus, w) in mixture {
        let tab = indirect_utility(game, i, menus)?;
        for (o, row) in tab.values.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                let cell = &mut acc[o][t];
                *cell = match (cell.take(), v) {
                    (Some(a), Some(v)) => Some(a + &(w * v)),
                    // a zero-weight impossible profile does not matter
                    (Some(a), None) if w.is_zero() => Some(a),
                    _ => None,
                };
            }
        }
    }
    Ok(IndirectUtilityTable {
        principal: i,
        rival_menus: mixture[0].0.clone(),
        values: acc,
        witnesses: vec![vec![Vec::new(); nt]; game.n_outcomes(i)],
        quit: (game.mode() == Mode::Intrinsic).then(|| vec![Rational::zero(); nt]),
    })
}

fn check_rivals(game: &FiniteGame, i: usize, rival_menus: &[Menu]) -> Result<()> {
    if rival_menus.len() != game.n() || i >= game.n() {
        return Err(Error::Invalid("rival menu profile has wrong length".into()));
    }
    for (j, m) in rival_menus.iter().enumerate() {
        if j == i {
            continue;
        }
        if !m.is_subset(game.full_menu(j)) {
            return Err(Error::Invalid(format!("menu of principal {} references unknown outcomes", game.principals()[j])));
        }
        if m.is_empty() && game.mode() != Mode::Intrinsic {
            return Err(Error::Invalid(format!("empty menu for principal {}", game.principals()[j])));
        }
    }
    Ok(())
}

/// Label-keyed view for JSON dumps.
#[derive(Clone, Debug, Serialize)]
pub struct IndirectUtilityDump {
    pub principal: String,
    pub rows: Vec<IndirectRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndirectRow {
    pub outcome: String,
    #[serde(rename = "type")]
    pub type_: String,
    /// `null` when participation is impossible.
    pub value: Option<Rational>,
    pub witnesses: Vec<Vec<String>>,
}

pub fn dump(game: &FiniteGame, tab: &IndirectUtilityTable) -> IndirectUtilityDump {
    let i = tab.principal;
    let mut rows = Vec::new();
    for o in 0..game.n_outcomes(i) {
        for t in 0..game.n_types() {
            rows.push(IndirectRow {
                outcome: game.outcome_labels(i)[o].clone(),
                type_: game.types()[t].clone(),
                value: tab.values[o][t].clone(),
                witnesses: tab.witnesses[o][t].iter().map(|p| game.profile_labels(p)).collect(),
            });
        }
    }
    if let Some(q) = &tab.quit {
        for (t, v) in q.iter().enumerate() {
            rows.push(IndirectRow {
                outcome: "quit".into(),
                type_: game.types()[t].clone(),
                value: Some(v.clone()),
                witnesses: Vec::new(),
            });
        }
    }
    IndirectUtilityDump { principal: game.principals()[i].clone(), rows }
}
