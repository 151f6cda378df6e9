//! Seeded random games and independent brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use common_agency::game::{product, Choice, FiniteGame, Menu, OutsideOptions};
use common_agency::Rational;
use rand_chacha::ChaCha8Rng;

use rand::Rng;
pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

const TYPE_NAMES: [&str; 4] = ["t1", "t2", "t3", "t4"];
const PRINCIPAL_NAMES: [&str; 3] = ["A", "B", "C"];
const OUTCOME_NAMES: [[&str; 4]; 3] = [["a1", "a2", "a3", "a4"], ["b1", "b2", "b3", "b4"], ["c1", "c2", "c3", "c4"]];

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_principals: usize,
    pub max_types: usize,
    pub max_outcomes: usize,
    pub payoff_range: i64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_principals: 3, max_types: 3, max_outcomes: 3, payoff_range: 3 }
    }
}

pub fn random_probs(rng: &mut Rng8, n: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = w.iter().sum();
    w.iter().map(|&x| Rational::new(x, total)).collect()
}

struct Dims {
    n: usize,
    nt: usize,
    sizes: Vec<usize>,
}

fn random_dims(rng: &mut Rng8, shape: Shape) -> Dims {
    let n = rng.random_range(1..=shape.max_principals);
    let nt = rng.random_range(1..=shape.max_types);
    let sizes = (0..n).map(|_| rng.random_range(1..=shape.max_outcomes)).collect();
    Dims { n, nt, sizes }
}

fn build(
    d: &Dims,
    probs: Vec<Rational>,
    agent: impl Fn(&[usize], usize) -> Rational,
    own: impl Fn(usize, usize, usize) -> Rational,
) -> FiniteGame {
    let outcomes: Vec<&[&str]> = d.sizes.iter().enumerate().map(|(i, &k)| &OUTCOME_NAMES[i][..k]).collect();
    let types: Vec<(&str, Rational)> = (0..d.nt).map(|t| TYPE_NAMES[t]).zip(probs).collect();
    FiniteGame::independent(&PRINCIPAL_NAMES[..d.n], &outcomes, &types, agent, own).expect("valid random game")
}

fn own_table(rng: &mut Rng8, d: &Dims, r: i64) -> Vec<Vec<Vec<i64>>> {
    d.sizes
        .iter()
        .map(|&k| (0..k).map(|_| (0..d.nt).map(|_| rng.random_range(-r..=r)).collect()).collect())
        .collect()
}

/// Independent payoffs, arbitrary agent utility, random outside options.
pub fn random_game(rng: &mut Rng8, shape: Shape) -> FiniteGame {
    let d = random_dims(rng, shape);
    let r = shape.payoff_range;
    let n_profiles: usize = d.sizes.iter().product();
    let agent: Vec<i64> = (0..n_profiles * d.nt).map(|_| rng.random_range(-r..=r)).collect();
    let own = own_table(rng, &d, r);
    let probs = random_probs(rng, d.nt);
    let sizes = d.sizes.clone();
    let nt = d.nt;
    let game = build(
        &d,
        probs,
        |p, t| Rational::int(agent[flat(&sizes, p) * nt + t]),
        |i, o, t| Rational::int(own[i][o][t]),
    );
    match rng.random_range(0..3) {
        0 => game,
        1 => game.with_outside(OutsideOptions::Intrinsic).unwrap(),
        _ => {
            let opts = d.sizes.iter().map(|&k| rng.random_range(0..k)).collect();
            game.with_outside(OutsideOptions::Delegated(opts)).unwrap()
        }
    }
}

/// Agent utility Σ_i v^i(o_i, t); plain outside options.
pub fn random_separable_game(rng: &mut Rng8, shape: Shape) -> FiniteGame {
    let d = random_dims(rng, shape);
    let r = shape.payoff_range;
    let parts = own_table(rng, &d, r);
    let own = own_table(rng, &d, r);
    let probs = random_probs(rng, d.nt);
    build(
        &d,
        probs,
        |p, t| Rational::int(p.iter().enumerate().map(|(i, &o)| parts[i][o][t]).sum()),
        |i, o, t| Rational::int(own[i][o][t]),
    )
}

fn flat(sizes: &[usize], p: &[usize]) -> usize {
    p.iter().zip(sizes).fold(0, |acc, (&o, &k)| acc * k + o)
}

pub fn random_nonempty_menu(rng: &mut Rng8, n: usize) -> Menu {
    loop {
        let m = Menu(rng.random_range(1..(1u64 << n)));
        if !m.is_empty() {
            return m;
        }
    }
}

/// Rival menus drawn at random; the entry of `i` is the full menu.
pub fn random_rivals(rng: &mut Rng8, game: &FiniteGame, i: usize) -> Vec<Menu> {
    (0..game.n())
        .map(|j| if j == i { game.full_menu(j) } else { random_nonempty_menu(rng, game.n_outcomes(j)) })
        .collect()
}

// ---------------------------------------------------------------------------
// Oracles computed straight from the payoff tables

/// max over rival selections of V(o, o₋ᵢ, t), with delegated outside
/// outcomes added to the rival menus.
pub fn oracle_indirect(game: &FiniteGame, i: usize, rivals: &[Menu], o: usize, t: usize) -> Option<Rational> {
    let mut menus: Vec<Menu> = rivals.to_vec();
    if let OutsideOptions::Delegated(opts) = game.outside() {
        for (j, m) in menus.iter_mut().enumerate() {
            *m = m.with(opts[j]);
        }
    }
    menus[i] = Menu::singleton(o);
    product(&menus).map(|p| game.agent_value(&p, t).clone()).max()
}

/// Exhaustive search over every direct mechanism T → O_i (∪ quit).
pub fn oracle_screening_value(game: &FiniteGame, i: usize, rivals: &[Menu]) -> Option<Rational> {
    let nt = game.n_types();
    let k = game.n_outcomes(i);
    let intrinsic = matches!(game.outside(), OutsideOptions::Intrinsic);
    let mut choices: Vec<Choice> = (0..k).map(Choice::Outcome).collect();
    if intrinsic {
        choices.push(Choice::Quit);
    }
    let v = |c: Choice, t: usize| -> Option<Rational> {
        match c {
            Choice::Quit => Some(Rational::zero()),
            Choice::Outcome(o) => oracle_indirect(game, i, rivals, o, t),
        }
    };
    let mut best: Option<Rational> = None;
    let total = choices.len().pow(nt as u32);
    for code in 0..total {
        let map: Vec<Choice> = (0..nt).map(|t| choices[code / choices.len().pow(t as u32) % choices.len()]).collect();
        let ok = (0..nt).all(|t| {
            let own = v(map[t], t);
            let ic = (0..nt).all(|s| v(map[s], t) <= own);
            let ir = match game.outside() {
                OutsideOptions::Intrinsic => own >= Some(Rational::zero()),
                OutsideOptions::Delegated(opts) => own >= oracle_indirect(game, i, rivals, opts[i], t),
                OutsideOptions::None => true,
            };
            ic && ir
        });
        if !ok {
            continue;
        }
        let value: Rational = (0..nt)
            .map(|t| match map[t] {
                Choice::Quit => Rational::zero(),
                Choice::Outcome(o) => game.prob(t) * game.own_value(i, o, t).unwrap(),
            })
            .sum();
        if best.as_ref().is_none_or(|b| value > *b) {
            best = Some(value);
        }
    }
    best
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub fn menu(game: &FiniteGame, i: usize, labels: &[&str]) -> Menu {
    game.menu_from_labels(i, labels).unwrap()
}

/// Proptest settings for these suites: seeds come from the generators above,
/// so regression files are not written.
pub fn config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases, failure_persistence: None, ..Default::default() }
}
