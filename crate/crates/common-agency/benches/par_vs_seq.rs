//! Data-parallel core versus the sequential fallback on the hot loops:
//! menu screening, the mutual-profile search, bundle-pair grids and envelopes.

use std::hint::black_box;

use common_agency::assembly::{find_p3_induced_profiles, SearchOptions};
use common_agency::bundling::{jointly_optimal_pairs, BundlingModel, Valuation};
use common_agency::envelope::{upper_envelope, SampledFamily};
use common_agency::numeric::{uniform_grid, Distribution};
use common_agency::screening::{solve_screening, ScreeningProblem};
use common_agency::{par, FiniteGame, Rational};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// Two principals with seven outcomes each and four types; payoffs are a
/// fixed arithmetic pattern so runs are comparable.
fn wide_game() -> FiniteGame {
    let names: [&str; 7] = ["o1", "o2", "o3", "o4", "o5", "o6", "o7"];
    let types: Vec<(&str, Rational)> =
        ["t1", "t2", "t3", "t4"].into_iter().zip([1, 2, 3, 4].map(|w| Rational::new(w, 10))).collect();
    FiniteGame::independent(
        &["A", "B"],
        &[&names, &names],
        &types,
        |p, t| Rational::int(((p[0] * 3 + p[1] * 5 + t * 7) % 11) as i64 - 4),
        |i, o, t| Rational::int(((o * (i + 2) + t * 3) % 9) as i64),
    )
    .expect("valid benchmark game")
}

fn four_goods_union() -> BundlingModel {
    BundlingModel {
        goods: 4,
        valuation: Valuation::Union { g: (0..16u32).map(|b| b.count_ones() as f64 + 0.1 * b as f64).collect() },
        distribution: Distribution::uniform(1.0, 2.0),
        price_cap: None,
        grid: Some(4001),
        tie_tolerance: None,
    }
}

fn wavy_family() -> SampledFamily {
    let t = uniform_grid(0.0, 1.0, 20_001);
    let members = (0..24)
        .map(|j| {
            let (a, b) = (j as f64 * 0.37, 1.0 + j as f64 * 0.21);
            t.iter().map(|&x| (b * x + a).sin() + 0.1 * j as f64 * x).collect()
        })
        .collect();
    SampledFamily::new(t, members)
}

fn both<R>(c: &mut Criterion, name: &str, f: impl Fn() -> R) {
    let mut group = c.benchmark_group(name);
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("parallel", name), |b| b.iter(|| black_box(f())));
    group.bench_function(BenchmarkId::new("sequential", name), |b| b.iter(|| black_box(par::sequential(&f))));
    group.finish();
}

fn benches(c: &mut Criterion) {
    let game = wide_game();
    let problem = ScreeningProblem::new(&game, 0, game.full_profile());
    both(c, "screening", || solve_screening(&problem).map(|s| s.value));

    let search_game = common_agency::catalog::upr_three_game().expect("catalog game");
    both(c, "mutual_profiles", || find_p3_induced_profiles(&search_game, SearchOptions::default()).map(|v| v.len()));

    let model = four_goods_union();
    both(c, "bundle_pairs", || jointly_optimal_pairs(&model).map(|v| v.len()));

    let family = wavy_family();
    both(c, "upper_envelope", || upper_envelope(&family).map(|a| a.kinks.len()));
}

criterion_group!(par_vs_seq, benches);
criterion_main!(par_vs_seq);
