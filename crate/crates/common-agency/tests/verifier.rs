mod common;

use common::*;
use common_agency::assembly::{check_compatibility, find_p3_induced_profiles, SearchOptions, Variant};
use common_agency::catalog::{quit_game, quit_game_delegated, shield_game, tie_game};
use common_agency::fm::{self, Constraint};
use common_agency::game::{Choice, DirectMechanism, SelectionRule, StrategyEntry, TieBreak};
use common_agency::screening::{solve_screening, ScreeningProblem};
use common_agency::verifier::{
    adversarial_strategy, check_iia, construct_agent_strategy, deviations, support_feasibility, verify_pbe,
    Feasibility, FeasibilityOptions, Verdict,
};
use common_agency::{AgentStrategy, Error, Menu, Rational, Selection};
use proptest::prelude::*;

fn feasibility(g: &common_agency::FiniteGame) -> Feasibility {
    support_feasibility(g, &g.full_profile(), FeasibilityOptions::default()).unwrap()
}

#[test]
fn tie_game_feasibility_threshold() {
    let at = feasibility(&tie_game(q(4, 5)).unwrap());
    let Feasibility::Feasible { weights, strategy, system } = &at else { panic!("expected feasible") };
    // one variable: the weight on (a, b') at the on-path tie; pinned to 1/2
    assert_eq!(system.n_vars, 1);
    assert_eq!(weights, &vec![q(1, 2)]);
    let g = tie_game(q(4, 5)).unwrap();
    let cert = verify_pbe(&g, &g.full_profile(), strategy).unwrap();
    assert!(cert.is_pbe(), "{:?}", cert.verdict);
    // 4·5·(1/2)/5 + 10/5 = 4 for each principal
    assert_eq!(cert.payoffs, vec![q(4, 1), q(4, 1)]);

    let above = tie_game(q(81, 100)).unwrap();
    match feasibility(&above) {
        Feasibility::Infeasible { certificate, system } => {
            let cs: Vec<Constraint> = system.constraints.iter().map(|c| c.constraint.clone()).collect();
            assert!(certificate.check(&cs));
            assert!(certificate.combined_constant.is_negative());
        }
        _ => panic!("expected infeasible"),
    }
}

#[test]
fn feasibility_witness_matches_the_closed_form_interval() {
    // the on-path weight x must satisfy 1 − 2(1−p)/p ≤ x ≤ 2(1−p)/p
    for (n, d) in [(1, 2), (2, 3), (3, 4), (79, 100)] {
        let p = q(n, d);
        let g = tie_game(p.clone()).unwrap();
        let Feasibility::Feasible { weights, .. } = feasibility(&g) else { panic!("feasible below 4/5") };
        let hi = &(&Rational::int(2) * &(Rational::one() - &p)) / &p;
        let lo = Rational::one() - &hi;
        assert!(weights[0] >= lo && weights[0] <= hi, "p = {p}: {:?}", weights);
    }
}

#[test]
fn adversarial_strategy_refutes_the_full_profile() {
    let g = tie_game(q(9, 10)).unwrap();
    let s = adversarial_strategy(&g, &g.full_profile()).unwrap();
    let cert = verify_pbe(&g, &g.full_profile(), &s).unwrap();
    let Verdict::NotPbe { gain, .. } = &cert.verdict else { panic!("expected a profitable deviation") };
    assert!(gain.is_positive());
    assert_eq!(cert.deviations.len(), 4);
}

#[test]
fn constructed_strategy_needs_glued_mechanisms() {
    let g = tie_game(q(4, 5)).unwrap();
    let ms = [
        DirectMechanism { principal: 0, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
        DirectMechanism { principal: 1, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
    ];
    assert!(matches!(construct_agent_strategy(&g, &ms), Err(Error::Precondition(_))));
}

#[test]
fn invalid_strategy_is_reported_not_trusted() {
    let g = tie_game(q(1, 2)).unwrap();
    let mut s = AgentStrategy::rule(SelectionRule::Lexicographic);
    s.insert(g.full_profile(), 0, StrategyEntry::pure(Selection::Profile(vec![0, 0]), TieBreak::Given));
    let cert = verify_pbe(&g, &g.full_profile(), &s).unwrap();
    assert!(matches!(cert.verdict, Verdict::InvalidStrategy { .. }));
}

#[test]
fn quit_game_screening_solutions() {
    for p in [q(0, 1), q(1, 3), q(1, 1)] {
        let g = quit_game(p.clone()).unwrap();
        for i in 0..2 {
            let sol = solve_screening(&ScreeningProblem::new(&g, i, g.full_profile())).unwrap();
            let wanted = DirectMechanism { principal: i, map: vec![Choice::Outcome(0), Choice::Outcome(1)] };
            assert!(sol.mechanisms.contains(&wanted), "p = {p}");
            assert_eq!(sol.value, &p * &Rational::int(5));
        }
    }
}

#[test]
fn quit_game_feasible_only_without_the_tie_type() {
    assert!(feasibility(&quit_game(q(0, 1)).unwrap()).is_feasible());
    for (n, d) in [(1, 100), (1, 10), (1, 2), (1, 1)] {
        let g = quit_game(q(n, d)).unwrap();
        assert!(!feasibility(&g).is_feasible(), "p = {n}/{d}");
        let ms = [
            DirectMechanism { principal: 0, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
            DirectMechanism { principal: 1, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
        ];
        let r = check_compatibility(&g, &ms, Variant::UprI, None).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violation.unwrap().type_, 0);
    }
}

#[test]
fn delegated_outside_options_blunt_the_deviation() {
    // a' stays available after a deviation to {a}, so the deviation reaches the
    // same effective menus and the agent may answer it adversarially
    for (n, d) in [(0, 1), (1, 10), (1, 2)] {
        let g = quit_game_delegated(q(n, d)).unwrap();
        assert!(feasibility(&g).is_feasible(), "p = {n}/{d}");
        let ms = [
            DirectMechanism { principal: 0, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
            DirectMechanism { principal: 1, map: vec![Choice::Outcome(0), Choice::Outcome(1)] },
        ];
        let r = check_compatibility(&g, &ms, Variant::UprD, None).unwrap();
        // the check is per type, so the zero-probability tie type still fails it
        assert!(!r.pass);
    }
}

#[test]
fn shield_game_narrow_profile_is_an_equilibrium() {
    let g = shield_game().unwrap();
    let narrow = vec![menu(&g, 0, &["c"]), menu(&g, 1, &["C"])];
    let cert = verify_pbe(&g, &narrow, &adversarial_strategy(&g, &narrow).unwrap()).unwrap();
    assert!(cert.is_pbe());
    assert_eq!(cert.payoffs, vec![q(7, 2), q(2, 1)]);
}

#[test]
fn variable_budget_is_enforced() {
    let g = tie_game(q(1, 2)).unwrap();
    let r = support_feasibility(&g, &g.full_profile(), FeasibilityOptions { max_vars: 0 });
    assert!(matches!(r, Err(Error::BoundExceeded { .. })));
}

#[test]
fn deviations_exclude_the_equilibrium_menu() {
    let g = tie_game(q(1, 2)).unwrap();
    let d = deviations(&g, &g.full_profile());
    assert_eq!(d.len(), 4);
    assert!(d.iter().all(|&(i, m)| m != g.full_menu(i)));
}

#[test]
fn iia_holds_for_a_pure_lexicographic_table() {
    let g = shield_game().unwrap();
    let narrow = vec![menu(&g, 0, &["c"]), menu(&g, 1, &["C"])];
    let s = adversarial_strategy(&g, &narrow).unwrap();
    let r = check_iia(&g, &s);
    assert_eq!(r.iia1 && r.iia2, r.violations.is_empty());
}

#[test]
fn iia_flags_a_reversal_on_a_smaller_menu() {
    let g = tie_game(q(1, 2)).unwrap();
    let mut s = AgentStrategy::new();
    // at t1 the big profile picks (a, b'); a smaller profile that keeps (a, b') picks (a', b')
    s.insert(g.full_profile(), 0, StrategyEntry::pure(Selection::Profile(vec![0, 1]), TieBreak::Given));
    s.insert(vec![Menu::full(2), Menu::singleton(1)], 0, StrategyEntry::pure(Selection::Profile(vec![1, 1]), TieBreak::Given));
    let r = check_iia(&g, &s);
    assert!(!r.violations.is_empty());
}

// ---------------------------------------------------------------------------
// Elimination engine

fn random_system(seed: u64) -> (usize, Vec<Constraint>) {
    let mut r = rng(seed);
    use rand::Rng;
    let n = r.random_range(1..=4);
    let m = r.random_range(1..=7);
    let cs = (0..m)
        .map(|_| {
            let coeffs = (0..n).map(|_| Rational::int(r.random_range(-3..=3))).collect();
            Constraint::new(coeffs, Rational::int(r.random_range(-4..=4)))
        })
        .collect();
    (n, cs)
}

/// Brute-force feasibility on a fine rational lattice, used only as a
/// one-sided oracle: a lattice point proves feasibility.
fn lattice_point(n: usize, cs: &[Constraint]) -> Option<Vec<Rational>> {
    let steps: Vec<Rational> = (-16..=16).map(|k| Rational::new(k, 4)).collect();
    let total = steps.len().pow(n as u32);
    (0..total).find_map(|code| {
        let x: Vec<Rational> = (0..n).map(|v| steps[code / steps.len().pow(v as u32) % steps.len()].clone()).collect();
        cs.iter().all(|c| !c.eval(&x).is_negative()).then_some(x)
    })
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn elimination_is_sound_both_ways(seed in any::<u64>()) {
        let (n, cs) = random_system(seed);
        let order: Vec<usize> = (0..n).collect();
        match fm::solve(n, &cs, &order) {
            fm::Outcome::Feasible(x) => {
                for c in &cs {
                    prop_assert!(!c.eval(&x).is_negative());
                }
            }
            fm::Outcome::Infeasible(cert) => {
                prop_assert!(cert.check(&cs));
                prop_assert!(lattice_point(n.min(2), &cs).is_none() || n > 2);
            }
        }
    }

    #[test]
    fn lattice_points_imply_feasible(seed in any::<u64>()) {
        let (n, cs) = random_system(seed);
        if n <= 2
            && lattice_point(n, &cs).is_some() {
                prop_assert!(matches!(fm::solve(n, &cs, &(0..n).collect::<Vec<_>>()), fm::Outcome::Feasible(_)));
            }
    }

    #[test]
    fn separable_mutual_profiles_are_certified(seed in any::<u64>()) {
        let g = random_separable_game(&mut rng(seed), Shape::default());
        for p in find_p3_induced_profiles(&g, SearchOptions::default()).unwrap() {
            let s = construct_agent_strategy(&g, &p.mechanisms).unwrap();
            let cert = verify_pbe(&g, &p.menus, &s).unwrap();
            prop_assert!(cert.is_pbe(), "{:?}", cert.verdict);
        }
    }

    #[test]
    fn feasible_witness_strategies_verify(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_game(&mut r, Shape { max_principals: 2, max_types: 2, max_outcomes: 2, payoff_range: 2 });
        let profile = g.full_profile();
        match support_feasibility(&g, &profile, FeasibilityOptions::default()) {
            Ok(Feasibility::Feasible { strategy, .. }) => {
                let cert = verify_pbe(&g, &profile, &strategy).unwrap();
                prop_assert!(cert.is_pbe(), "{:?}", cert.verdict);
            }
            Ok(Feasibility::Infeasible { system, certificate }) => {
                let cs: Vec<Constraint> = system.constraints.iter().map(|c| c.constraint.clone()).collect();
                prop_assert!(certificate.check(&cs));
                // no pure adversarial table can be an equilibrium either
                let s = adversarial_strategy(&g, &profile).unwrap();
                prop_assert!(!verify_pbe(&g, &profile, &s).unwrap().is_pbe());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
