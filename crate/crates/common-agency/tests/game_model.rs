mod common;

use common::*;
use common_agency::catalog::{quit_game, quit_game_delegated, tie_game};
use common_agency::game::{
    from_document, load_game, mechanisms_from_doc, profile_from_doc, strategy_from_doc, strategy_to_doc, Choice,
    MechanismDoc, MenuProfileDoc, SelectionRule, StrategyEntry, TieBreak,
};
use common_agency::{AgentStrategy, Error, Menu, Mode, Selection};
use proptest::prelude::*;

const E1: &str = include_str!("../../ca-cli/fixtures/e1.json");

#[test]
fn fixture_matches_catalog_game() {
    let g = load_game(E1).unwrap();
    assert_eq!(g, tie_game(q(4, 5)).unwrap());
    assert_eq!(g.n(), 2);
    assert_eq!(g.n_types(), 2);
    assert_eq!(g.mode(), Mode::Plain);
}

#[test]
fn document_round_trip_preserves_the_game() {
    for g in [tie_game(q(1, 3)).unwrap(), quit_game(q(1, 2)).unwrap(), quit_game_delegated(q(2, 7)).unwrap()] {
        let text = serde_json::to_string(&g.to_document()).unwrap();
        assert_eq!(load_game(&text).unwrap(), g);
    }
}

#[test]
fn probabilities_must_sum_to_one() {
    let mut doc = tie_game(q(1, 2)).unwrap().to_document();
    doc.types[0].prob = q(2, 3);
    assert!(matches!(from_document(&doc), Err(Error::Distribution(_))));
}

#[test]
fn missing_agent_row_is_reported() {
    let mut doc = tie_game(q(1, 2)).unwrap().to_document();
    doc.agent_utility.pop();
    assert!(matches!(from_document(&doc), Err(Error::MissingEntry(_))));
}

#[test]
fn unknown_fields_are_rejected() {
    let text = E1.replacen("\"principals\"", "\"extra\": 1, \"principals\"", 1);
    assert!(matches!(load_game(&text), Err(Error::Schema(_))));
}

#[test]
fn duplicate_outcome_labels_are_rejected() {
    let mut doc = tie_game(q(1, 2)).unwrap().to_document();
    doc.outcomes.get_mut("A").unwrap()[1] = "a".into();
    assert!(from_document(&doc).is_err());
}

#[test]
fn mechanisms_and_profiles_load_by_label() {
    let g = tie_game(q(4, 5)).unwrap();
    let mech: MechanismDoc = serde_json::from_str(include_str!("../../ca-cli/fixtures/e1-mech.json")).unwrap();
    let ms = mechanisms_from_doc(&g, &mech).unwrap();
    assert_eq!(ms[0].map, vec![Choice::Outcome(0), Choice::Outcome(1)]);
    assert_eq!(ms[1].range(), Menu::full(2));
    let prof: MenuProfileDoc = serde_json::from_str(include_str!("../../ca-cli/fixtures/e1-profile.json")).unwrap();
    assert_eq!(profile_from_doc(&g, &prof).unwrap(), g.full_profile());
}

#[test]
fn empty_menu_needs_intrinsic_options() {
    let g = tie_game(q(1, 2)).unwrap();
    let doc: MenuProfileDoc = [("A".to_string(), vec![]), ("B".to_string(), vec!["b".to_string()])].into();
    assert!(profile_from_doc(&g, &doc).is_err());
    let gq = quit_game(q(1, 2)).unwrap();
    assert_eq!(profile_from_doc(&gq, &doc).unwrap(), vec![Menu(0), Menu(1)]);
}

#[test]
fn quit_is_only_for_intrinsic_games() {
    let g = tie_game(q(1, 2)).unwrap();
    let doc: MechanismDoc = serde_json::from_str(r#"{"A":{"t1":"quit","t2":"a"},"B":{"t1":"b","t2":"b"}}"#).unwrap();
    assert!(mechanisms_from_doc(&g, &doc).is_err());
    let gq = quit_game(q(1, 2)).unwrap();
    assert_eq!(mechanisms_from_doc(&gq, &doc).unwrap()[0].map[0], Choice::Quit);
}

#[test]
fn tie_game_agent_optimum_at_first_type() {
    let g = tie_game(q(4, 5)).unwrap();
    let opt = g.agent_optimum(&g.full_profile(), 0);
    assert_eq!(opt.value, Some(q(10, 1)));
    assert_eq!(opt.argmax, vec![vec![0, 1], vec![1, 0]]);
    assert!(!opt.quit);
}

#[test]
fn intrinsic_agent_quits_when_everything_is_negative() {
    let g = quit_game(q(1, 2)).unwrap();
    let menus = vec![Menu::singleton(0), Menu::singleton(0)];
    let opt = g.agent_optimum(&menus, 1);
    assert!(opt.quit);
    assert!(opt.argmax.is_empty());
    assert_eq!(opt.selections(), vec![Selection::Quit]);
    // an empty menu leaves nothing but quitting
    let opt = g.agent_optimum(&[Menu(0), Menu::full(2)], 0);
    assert_eq!((opt.value, opt.quit), (None, true));
}

#[test]
fn delegated_options_enlarge_every_menu() {
    let g = quit_game_delegated(q(1, 2)).unwrap();
    let menus = vec![Menu::singleton(0), Menu::singleton(0)];
    assert_eq!(g.effective_menus(&menus), vec![Menu::full(2), Menu::full(2)]);
}

#[test]
fn strategy_document_round_trip() {
    let g = tie_game(q(1, 2)).unwrap();
    let mut s = AgentStrategy::new();
    s.insert(g.full_profile(), 0, StrategyEntry { dist: vec![(Selection::Profile(vec![0, 1]), q(1, 3)), (Selection::Profile(vec![1, 0]), q(2, 3))], policy: TieBreak::Given });
    let docs = strategy_to_doc(&g, &s);
    assert_eq!(strategy_from_doc(&g, &docs).unwrap(), s);
    s.audit(&g).unwrap();
}

#[test]
fn audit_rejects_suboptimal_entries() {
    let g = tie_game(q(1, 2)).unwrap();
    let mut s = AgentStrategy::new();
    s.insert(g.full_profile(), 0, StrategyEntry::pure(Selection::Profile(vec![0, 0]), TieBreak::Given));
    assert!(s.audit(&g).is_err());
}

#[test]
fn fallback_rule_answers_unlisted_nodes() {
    let g = tie_game(q(1, 2)).unwrap();
    let s = AgentStrategy::rule(SelectionRule::FavorPrincipal(1));
    // at t1 B prefers b (worth 5) to b'
    let e = s.at(&g, &g.full_profile(), 0).unwrap();
    assert_eq!(e.dist[0].0, Selection::Profile(vec![1, 0]));
    assert!(AgentStrategy::new().at(&g, &g.full_profile(), 0).is_err());
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn random_games_round_trip(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), Shape::default());
        let text = serde_json::to_string(&g.to_document()).unwrap();
        prop_assert_eq!(load_game(&text).unwrap(), g);
    }

    #[test]
    fn agent_optimum_is_the_max_over_the_product(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_game(&mut r, Shape::default());
        let menus: Vec<Menu> = (0..g.n()).map(|i| random_nonempty_menu(&mut r, g.n_outcomes(i))).collect();
        let eff = g.effective_menus(&menus);
        for t in 0..g.n_types() {
            let opt = g.agent_optimum(&menus, t);
            let best = common_agency::game::product(&eff).map(|p| g.agent_value(&p, t).clone()).max();
            prop_assert_eq!(&opt.value, &best);
            for p in &opt.argmax {
                prop_assert_eq!(Some(g.agent_value(p, t).clone()), best.clone());
            }
        }
    }
}
