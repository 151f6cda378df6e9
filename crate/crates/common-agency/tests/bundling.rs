mod common;

use common::*;
use common_agency::bundling::{
    build_base_plus_upgrades, build_market_split, bundle_label, check_market_splitting, check_md_star, find_tstar,
    jointly_optimal_pairs, parse_bundle, participation_audit, unordered_count, BundlingModel, PricedItem, Structure,
    TStarVariant, Valuation,
};
use common_agency::catalog::{additive_two_goods, union_bundling, union_minus_intersection_bundling, upgrade_premium_bundling};
use common_agency::numeric::{uniform_grid, Distribution};
use common_agency::Error;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn union_cutoff_is_four_thirds() {
    let ts = find_tstar(&union_bundling(), TStarVariant::MarketSplit).unwrap();
    assert!((ts.t - 4.0 / 3.0).abs() < 1e-9);
    assert!(!ts.boundary);
    // ½ · 4/3 · g({1,2})
    assert!((ts.half_value - 4.0 / 3.0).abs() < 1e-9);
    let base = find_tstar(&union_bundling(), TStarVariant::Base { bundle: 1 }).unwrap();
    assert!((base.t - ts.t).abs() < 1e-12);
}

#[test]
fn union_pairs_cover_every_full_union() {
    let pairs = jointly_optimal_pairs(&union_bundling()).unwrap();
    assert_eq!(pairs.len(), 9);
    assert!(pairs.iter().all(|&(a, b)| a | b == 3));
    assert_eq!(unordered_count(&pairs), 5);
}

#[test]
fn duplicates_are_worthless_so_only_complements_are_optimal() {
    let pairs = jointly_optimal_pairs(&union_minus_intersection_bundling()).unwrap();
    assert_eq!(pairs, vec![(0, 3), (1, 2), (2, 1), (3, 0)]);
}

#[test]
fn market_split_menus_pass_and_price_equally() {
    let m = union_minus_intersection_bundling();
    let (m1, m2) = build_market_split(&m, &[1, 2], &[2, 1]).unwrap();
    let r = check_market_splitting(&m, &m1, &m2).unwrap();
    assert!(r.pass, "{:?}", r.violation);
    // (2/3) · g(b*) with g({1,2}) = 2
    assert!((r.price - 4.0 / 3.0).abs() < 1e-9);
    assert!(m1.iter().chain(&m2).all(|i| i.price == r.price));
    assert!(participation_audit(&m, &m1, &m2, r.tstar).pass);
}

#[test]
fn mispriced_or_unmatched_menus_fail() {
    let m = union_minus_intersection_bundling();
    let (mut m1, m2) = build_market_split(&m, &[1], &[2]).unwrap();
    m1[0].price += 0.01;
    let r = check_market_splitting(&m, &m1, &m2).unwrap();
    assert!(!r.pass);
    assert!(r.violation.unwrap().contains("prices"));
    let (m1, m2) = build_market_split(&m, &[1], &[1]).unwrap();
    let r = check_market_splitting(&m, &m1, &m2).unwrap();
    assert!(r.violation.unwrap().contains("no jointly optimal match"));
}

#[test]
fn menus_are_validated() {
    let m = union_bundling();
    let item = |bundle, price| PricedItem { bundle, price };
    assert!(check_market_splitting(&m, &vec![], &vec![item(1, 1.0)]).is_err());
    assert!(check_market_splitting(&m, &vec![item(1, -1.0)], &vec![item(2, 1.0)]).is_err());
    assert!(check_market_splitting(&m, &vec![item(1, 1.0), item(1, 1.0)], &vec![item(2, 1.0)]).is_err());
    assert!(matches!(check_market_splitting(&m, &vec![item(4, 1.0)], &vec![item(2, 1.0)]), Err(Error::UnknownLabel(_))));
}

#[test]
fn union_upgrades_collapse_to_a_single_item() {
    let m = union_minus_intersection_bundling();
    let md = check_md_star(&m, 1).unwrap();
    assert!(md.pass);
    let u = build_base_plus_upgrades(&m, 1).unwrap();
    assert_eq!(u.structure, Structure::Singleton);
    assert_eq!(u.upgrade_menu.len(), 1);
    assert_eq!(u.upgrade_menu[0].bundle, 2);
    assert!(u.ic_pass && u.ir_pass);
    assert_eq!(build_base_plus_upgrades(&union_bundling(), 1).unwrap().structure, Structure::Singleton);
}

#[test]
fn premium_on_the_full_bundle_creates_a_nested_upgrade() {
    let u = build_base_plus_upgrades(&upgrade_premium_bundling(), 1).unwrap();
    assert_eq!(u.structure, Structure::Nested);
    assert_eq!(u.upgrade_menu.iter().map(|i| i.bundle).collect::<Vec<_>>(), vec![2, 3]);
    // virtual surplus gain t(t−1) − (2−t)(2t−1) = 3t² − 6t + 2 vanishes at 1 + 1/√3
    assert_eq!(u.breakpoints.len(), 1);
    assert!((u.breakpoints[0] - (1.0 + 1.0 / 3f64.sqrt())).abs() < 1e-9);
    assert!((u.upgrade_menu[0].price - 4.0 / 3.0).abs() < 1e-9);
    assert!((u.upgrade_menu[1].price - 2.2440169).abs() < 1e-6);
    assert!(u.ic_pass && u.ir_pass);
}

#[test]
fn upgrade_indirect_utility_satisfies_the_integral_identity() {
    use common_agency::envelope::{envelope_integral_check, upper_envelope, SampledFamily};
    let m = upgrade_premium_bundling();
    let u = build_base_plus_upgrades(&m, 1).unwrap();
    let t = uniform_grid(u.tstar, 2.0, 10_000);
    let members: Vec<Vec<f64>> = u.upgrade_menu.iter().map(|it| t.iter().map(|&x| m.u(1, it.bundle, x) - it.price).collect()).collect();
    let derivatives = u.upgrade_menu.iter().map(|it| t.iter().map(|&x| m.u_t(1, it.bundle, x)).collect()).collect();
    let family = SampledFamily { t, members, derivatives: Some(derivatives) };
    let audit = upper_envelope(&family).unwrap();
    assert!(envelope_integral_check(&audit) <= 1e-6);
}

fn tabulated(goods: usize, f: impl Fn(usize, f64) -> f64) -> BundlingModel {
    let t = uniform_grid(1.0, 2.0, 401);
    let n = 1 << goods;
    let values = (0..n * n).map(|k| t.iter().map(|&x| f(k, x)).collect()).collect();
    BundlingModel {
        goods,
        valuation: Valuation::Tabulated { t, values },
        distribution: Distribution::uniform(1.0, 2.0),
        price_cap: None,
        grid: Some(401),
        tie_tolerance: None,
    }
}

#[test]
fn wavy_tabulated_surplus_fails_monotone_differences() {
    // pair index b₁ · 2 + b₂; the base is good 1
    let m = tabulated(1, |k, t| match k {
        3 => t + 0.3 * (6.0 * t).sin(),
        _ => t * (k as f64 + 1.0),
    });
    let md = check_md_star(&m, 1).unwrap();
    assert!(!md.pass);
    assert!(md.worst_reversal > 0.0);
    assert!(matches!(build_base_plus_upgrades(&m, 1), Err(Error::Precondition(_))));
}

#[test]
fn cutoff_without_a_sign_change_is_refused() {
    // U = −t − 2: the residual 3t/2 − 1 is positive on the whole interval
    let m = tabulated(1, |_, t| -t - 2.0);
    assert!(matches!(find_tstar(&m, TStarVariant::MarketSplit), Err(Error::Numeric(_))));
    // U = t everywhere: the residual (2 − t) − t/2 changes sign at 4/3
    let m = tabulated(1, |_, t| t);
    assert!((find_tstar(&m, TStarVariant::Base { bundle: 1 }).unwrap().t - 4.0 / 3.0).abs() < 1e-6);
}

#[test]
fn model_validation() {
    let mut m = union_bundling();
    m.valuation = Valuation::Union { g: vec![0.0, 1.0, 1.0, 1.0] };
    assert!(matches!(m.validate(), Err(Error::Schema(_))));
    let mut m = union_bundling();
    m.goods = 7;
    assert!(matches!(m.validate(), Err(Error::BoundExceeded { .. })));
    assert!(matches!(find_tstar(&union_bundling(), TStarVariant::Base { bundle: 9 }), Err(Error::UnknownLabel(_))));
    let doc: BundlingModel = serde_json::from_str(include_str!("../../ca-cli/fixtures/uniform12-union.json")).unwrap();
    assert_eq!(doc, union_bundling());
}

#[test]
fn bundle_labels_round_trip() {
    for b in 0..64 {
        assert_eq!(parse_bundle(&bundle_label(b), 6).unwrap(), b);
    }
    assert_eq!(bundle_label(0), "∅");
    assert_eq!(bundle_label(0b101), "13");
    assert_eq!(parse_bundle("{1,2}", 2).unwrap(), 3);
    assert!(parse_bundle("3", 2).is_err());
    let item: PricedItem = serde_json::from_str(r#"{"bundle":"12","price":1.5}"#).unwrap();
    assert_eq!(item, PricedItem { bundle: 3, price: 1.5 });
    assert_eq!(serde_json::to_value(&item).unwrap()["bundle"], "12");
}

/// Strictly increasing g with g(∅) = 0: cumulative random positive increments
/// over the number of goods plus an item-specific bonus.
fn random_g(rng: &mut Rng8, goods: usize) -> Vec<f64> {
    let bonus: Vec<f64> = (0..goods).map(|_| rng.random_range(0.5..2.0)).collect();
    (0..1usize << goods)
        .map(|b| (0..goods).filter(|k| b >> k & 1 == 1).map(|k| bonus[k]).sum::<f64>())
        .collect()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn union_cutoff_ignores_the_value_scale(seed in any::<u64>()) {
        let mut r = rng(seed);
        let goods = r.random_range(1..=3);
        let mut m = union_bundling();
        m.goods = goods;
        m.grid = Some(401);
        m.valuation = Valuation::Union { g: random_g(&mut r, goods) };
        let ts = find_tstar(&m, TStarVariant::MarketSplit).unwrap();
        prop_assert!((ts.t - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn union_pairs_are_exactly_the_covering_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let goods = r.random_range(1..=3);
        let mut m = union_bundling();
        m.goods = goods;
        m.grid = Some(201);
        m.valuation = Valuation::Union { g: random_g(&mut r, goods) };
        let full = m.full();
        let want: Vec<(u32, u32)> = m.pairs().into_iter().filter(|&(a, b)| a | b == full).collect();
        prop_assert_eq!(jointly_optimal_pairs(&m).unwrap().len(), 3usize.pow(goods as u32));
        prop_assert_eq!(jointly_optimal_pairs(&m).unwrap(), want);
    }

    #[test]
    fn complementary_pairs_under_duplication_loss(seed in any::<u64>()) {
        let mut r = rng(seed);
        let goods = r.random_range(1..=3);
        let mut m = union_minus_intersection_bundling();
        m.goods = goods;
        m.grid = Some(201);
        m.valuation = Valuation::UnionMinusIntersection { g: random_g(&mut r, goods) };
        let full = m.full();
        for (a, b) in jointly_optimal_pairs(&m).unwrap() {
            prop_assert_eq!(a | b, full);
            prop_assert_eq!(a & b, 0);
        }
    }

    #[test]
    fn pairs_do_not_depend_on_worker_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut m = union_minus_intersection_bundling();
        m.valuation = Valuation::UnionMinusIntersection { g: random_g(&mut r, 2) };
        let a = jointly_optimal_pairs(&m).unwrap();
        let b = common_agency::par::sequential(|| jointly_optimal_pairs(&m).unwrap());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn catalog_g_table_is_additive() {
    assert_eq!(additive_two_goods(), vec![0.0, 1.0, 1.0, 2.0]);
}
