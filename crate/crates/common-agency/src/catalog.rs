//! Small named games used by tests, benches and the CLI fixtures.

use crate::error::Result;
use crate::game::{FiniteGame, OutsideOptions};
use crate::rational::Rational;

fn q(n: i64) -> Rational {
    Rational::int(n)
}

fn two_types(p: &Rational) -> [(&'static str, Rational); 2] {
    [("t1", p.clone()), ("t2", Rational::one() - p)]
}

/// Two principals with two outcomes each; the agent is indifferent between
/// the two mixed pairs at `t1`, and wants `(a', b')` at `t2`. Each principal
/// wants its first outcome at `t1` and its second at `t2`.
pub fn tie_game(p: Rational) -> Result<FiniteGame> {
    const V: [[i64; 4]; 2] = [[5, 10, 10, 0], [0, 0, 0, 10]];
    FiniteGame::independent(
        &["A", "B"],
        &[&["a", "a'"], &["b", "b'"]],
        &two_types(&p),
        |o, t| q(V[t][o[0] * 2 + o[1]]),
        |_, o, t| match (o, t) {
            (0, 0) => q(5),
            (1, 1) => q(10),
            _ => q(0),
        },
    )
}

/// As [`tie_game`] at `t1`; at `t2` every pair but `(a', b')` is worth −2 to
/// the agent. Principals prefer their first outcome for both types.
/// Intrinsic outside options (the agent may walk away).
pub fn quit_game(p: Rational) -> Result<FiniteGame> {
    quit_game_base(p)?.with_outside(OutsideOptions::Intrinsic)
}

/// [`quit_game`] payoffs with the second outcomes as delegated outside options.
pub fn quit_game_delegated(p: Rational) -> Result<FiniteGame> {
    quit_game_base(p)?.with_outside(OutsideOptions::Delegated(vec![1, 1]))
}

fn quit_game_base(p: Rational) -> Result<FiniteGame> {
    const V: [[i64; 4]; 2] = [[5, 10, 10, 0], [-2, -2, -2, 0]];
    FiniteGame::independent(
        &["A", "B"],
        &[&["a", "a'"], &["b", "b'"]],
        &two_types(&p),
        |o, t| q(V[t][o[0] * 2 + o[1]]),
        |_, o, _| if o == 0 { q(5) } else { q(0) },
    )
}

/// Principal A's screening menu {a, c} can be answered by B with {b}, yet the
/// agent can recombine menus so that A's costly item is never chosen.
pub fn recombination_game() -> Result<FiniteGame> {
    // rows a, c; columns b, b'
    const V: [[[i64; 2]; 2]; 2] = [[[5, 5], [0, 10]], [[0, 0], [10, 10]]];
    const U1: [[i64; 2]; 2] = [[1, -100], [1, 5]];
    const U2: [[i64; 2]; 2] = [[1, 0], [1, 1]];
    FiniteGame::independent(
        &["A", "B"],
        &[&["a", "c"], &["b", "b'"]],
        &two_types(&Rational::new(1, 2)),
        |o, t| q(V[t][o[0]][o[1]]),
        |i, o, t| if i == 0 { q(U1[t][o]) } else { q(U2[t][o]) },
    )
}

/// Three outcomes per principal, three equally likely types; has one mutual
/// screening profile that glues together and one that does not.
pub fn upr_three_game() -> Result<FiniteGame> {
    const V: [[[i64; 3]; 3]; 3] = [
        [[1, 2, 0], [1, 1, 0], [2, 1, 0]],
        [[1, 1, 2], [2, 1, 0], [0, 1, 0]],
        [[1, 2, 0], [2, 2, 2], [2, 2, 0]],
    ];
    const U1: [[i64; 3]; 3] = [[2, 1, 0], [0, 2, 0], [1, 0, 0]];
    const U2: [[i64; 3]; 3] = [[0, 1, 0], [2, 2, 0], [1, 0, 0]];
    let third = Rational::new(1, 3);
    FiniteGame::independent(
        &["A", "B"],
        &[&["a1", "a2", "a3"], &["b1", "b2", "b3"]],
        &[("t1", third.clone()), ("t2", third.clone()), ("t3", third)],
        |o, t| q(V[t][o[0]][o[1]]),
        |i, o, t| if i == 0 { q(U1[t][o]) } else { q(U2[t][o]) },
    )
}

/// A game where a principal gains by offering an item nobody picks on path:
/// the extra item shields it from a rival's profitable deviation.
pub fn shield_game() -> Result<FiniteGame> {
    const V: [[[i64; 3]; 3]; 2] = [
        [[5, 2, 0], [1, 7, 6], [4, 8, 3]],
        [[5, 8, 7], [2, 3, 4], [6, 1, 0]],
    ];
    const U1: [[i64; 3]; 2] = [[4, 0, 3], [1, 0, 4]];
    const U2: [[i64; 3]; 2] = [[4, 2, 1], [0, 1, 3]];
    FiniteGame::independent(
        &["A", "B"],
        &[&["a", "b", "c"], &["A", "B", "C"]],
        &two_types(&Rational::new(1, 2)),
        |o, t| q(V[t][o[0]][o[1]]),
        |i, o, t| if i == 0 { q(U1[t][o]) } else { q(U2[t][o]) },
    )
}

/// Single principal, two types, two outcomes, strict preferences: a pure
/// screening problem.
pub fn single_principal_game() -> Result<FiniteGame> {
    FiniteGame::independent(
        &["A"],
        &[&["lo", "hi"]],
        &two_types(&Rational::new(1, 2)),
        |o, t| match (o[0], t) {
            (0, 0) => q(2),
            (1, 0) => q(1),
            (0, 1) => q(1),
            _ => q(3),
        },
        |_, o, t| q((o as i64 + 1) * (t as i64 + 1)),
    )
}

// ---------------------------------------------------------------------------
// Delegation instances on uniform [0, 1] types

use crate::delegation::{DelegationModel, PrincipalSpec, RegimeSpec};
use crate::numeric::{Curve, Distribution};

fn delegation_model(ideal1: Curve, ideal2: Curve) -> DelegationModel {
    DelegationModel {
        distribution: Distribution::uniform(0.0, 1.0),
        principals: [
            PrincipalSpec { weight: Curve::constant(1.0), ideal: ideal1, outcomes: [0.0, 0.5] },
            PrincipalSpec { weight: Curve::constant(1.0), ideal: ideal2, outcomes: [0.0, 1.0] },
        ],
        grid: None,
        tolerance: None,
    }
}

/// Principal 1 wants 0 always, principal 2 wants the agent's type.
pub fn aligned_delegation() -> DelegationModel {
    delegation_model(Curve::constant(0.0), Curve::linear(0.0, 1.0))
}

/// Both ideals are t/2.
pub fn split_delegation() -> DelegationModel {
    delegation_model(Curve::linear(0.0, 0.5), Curve::linear(0.0, 0.5))
}

/// Principal 1's ideal steps from 0 to 1/4 at t = 1/2; principal 2's ideal on
/// the upper segment is t − 1/4 − β(1 − t) (β = 0 is exactly aligned).
pub fn two_regime_delegation(beta: f64) -> DelegationModel {
    let step = Curve::Piecewise { breaks: vec![0.5], pieces: vec![Curve::constant(0.0), Curve::constant(0.25)] };
    let ideal2 = Curve::Piecewise {
        breaks: vec![0.5],
        pieces: vec![Curve::linear(0.0, 1.0), Curve::linear(-0.25 - beta, 1.0 + beta)],
    };
    delegation_model(step, ideal2)
}

pub fn two_regime_spec() -> RegimeSpec {
    RegimeSpec::Piecewise { cutpoints: vec![0.5], levels: vec![0.0, 0.25] }
}

// ---------------------------------------------------------------------------
// Bundling instances on uniform [1, 2] types with two goods

use crate::bundling::{BundlingModel, Valuation};

fn bundling_model(valuation: Valuation) -> BundlingModel {
    BundlingModel {
        goods: 2,
        valuation,
        distribution: Distribution::uniform(1.0, 2.0),
        price_cap: None,
        grid: None,
        tie_tolerance: None,
    }
}

/// g(∅) = 0, g({1}) = g({2}) = 1, g({1,2}) = 2, indexed by bitmask.
pub fn additive_two_goods() -> Vec<f64> {
    vec![0.0, 1.0, 1.0, 2.0]
}

/// U = t · g(b₁ ∪ b₂).
pub fn union_bundling() -> BundlingModel {
    bundling_model(Valuation::Union { g: additive_two_goods() })
}

/// U = t · [g(b₁ ∪ b₂) − g(b₁ ∩ b₂)]: duplicated goods are worthless.
pub fn union_minus_intersection_bundling() -> BundlingModel {
    bundling_model(Valuation::UnionMinusIntersection { g: additive_two_goods() })
}

/// Union valuation plus a quadratic premium on the second firm's full
/// bundle, so that high types upgrade from {2} to {1,2}.
pub fn upgrade_premium_bundling() -> BundlingModel {
    bundling_model(Valuation::UpgradePremium { g: additive_two_goods(), premium: vec![0.0, 0.0, 0.0, 1.0] })
}
