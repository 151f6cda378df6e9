//! Solver and verification toolkit for common-agency menu games.
//!
//! * [`game`], [`indirect`], [`screening`]: exact finite games, the agent's
//!   indirect utility against rival menus, and per-principal screening.
//! * [`assembly`], [`verifier`]: compatibility checks, equilibrium search,
//!   brute-force PBE certificates and exact support feasibility.
//! * [`delegation`], [`bundling`], [`envelope`]: the continuous quadratic-loss
//!   delegation and duopoly bundling models, and upper-envelope numerics.

// `!(a < b)` on floats is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bundling;
pub mod catalog;
pub mod delegation;
pub mod envelope;
pub mod error;
pub mod fm;
pub mod game;
pub mod indirect;
pub mod linear;
pub mod numeric;
pub mod par;
pub mod rational;
pub mod screening;
pub mod verifier;

pub use error::{Error, Result};
pub use game::{
    expected_principal_payoff, load_game, AgentStrategy, Choice, DirectMechanism, FiniteGame, Menu, MenuProfile,
    Mode, OutsideOptions, Profile, Selection,
};
pub use rational::Rational;
