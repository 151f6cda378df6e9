//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! status if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use common_agency::assembly::{check_compatibility, classify_pbe, find_p3_induced_profiles, pareto_compare, SearchOptions, Variant};
use common_agency::bundling::{
    build_base_plus_upgrades, build_market_split, check_market_splitting, find_tstar, jointly_optimal_pairs, Structure,
    TStarVariant,
};
use common_agency::catalog::{
    aligned_delegation, quit_game, shield_game, tie_game, two_regime_delegation, two_regime_spec, union_bundling,
    union_minus_intersection_bundling, upgrade_premium_bundling, upr_three_game,
};
use common_agency::delegation::{check_regime, cross_validate_discretized, RegimeSpec};
use common_agency::envelope::{envelope_integral_check, kink_audit, pointwise_envelope, upper_envelope, SampledFamily, Sense};
use common_agency::game::{Choice, DirectMechanism};
use common_agency::numeric::uniform_grid;
use common_agency::screening::{solve_screening, ScreeningProblem};
use common_agency::verifier::{adversarial_strategy, construct_agent_strategy, support_feasibility, verify_pbe, FeasibilityOptions};
use common_agency::Error;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn identity_mechanism(principal: usize) -> DirectMechanism {
    DirectMechanism { principal, map: vec![Choice::Outcome(0), Choice::Outcome(1)] }
}

fn feasible(game: &common_agency::FiniteGame) -> Result<bool, String> {
    Ok(ok(support_feasibility(game, &game.full_profile(), FeasibilityOptions::default()))?.is_feasible())
}

fn tie_game_end_to_end() -> Outcome {
    let g = ok(tie_game(q(4, 5)))?;
    for i in 0..2 {
        let sol = ok(solve_screening(&ScreeningProblem::new(&g, i, g.full_profile())))?;
        ensure!(sol.mechanisms.contains(&identity_mechanism(i)), "identity mechanism of principal {i} not optimal");
    }
    let r = ok(check_compatibility(&g, &[identity_mechanism(0), identity_mechanism(1)], Variant::Upr, None))?;
    let v = r.violation.ok_or("compatibility unexpectedly passes")?;
    ensure!(v.type_ == 0, "violation at type {} instead of t1", v.type_);
    ensure!(v.argmax == vec![vec![0, 1], vec![1, 0]], "argmax {:?}", v.argmax);
    ensure!(feasible(&g)?, "infeasible at 4/5");
    ensure!(!feasible(&ok(tie_game(q(81, 100)))?)?, "feasible at 81/100");
    Ok("optima, t1 violation {(a,b'),(a',b)}, feasible at 4/5 only".into())
}

fn outside_option_variant() -> Outcome {
    for p in [q(0, 1), q(1, 3), q(1, 2), q(1, 1)] {
        let g = ok(quit_game(p.clone()))?;
        for i in 0..2 {
            let sol = ok(solve_screening(&ScreeningProblem::new(&g, i, g.full_profile())))?;
            ensure!(sol.mechanisms.contains(&identity_mechanism(i)), "p = {p}: solution of principal {i} missing");
        }
    }
    for (n, d) in [(0, 1), (1, 1000), (1, 100), (1, 10), (1, 2), (9, 10), (1, 1)] {
        let f = feasible(&ok(quit_game(q(n, d)))?)?;
        ensure!(f == (n == 0), "p = {n}/{d}: feasible = {f}");
    }
    Ok("solutions (a,a'), (b,b'); feasible iff p = 0".into())
}

fn pareto_counterexample() -> Outcome {
    let g = ok(shield_game())?;
    let narrow = vec![menu(&g, 0, &["c"]), menu(&g, 1, &["C"])];
    let wide = vec![menu(&g, 0, &["a", "b", "c"]), menu(&g, 1, &["A"])];
    let sn = ok(adversarial_strategy(&g, &narrow))?;
    let sw = ok(adversarial_strategy(&g, &wide))?;
    let report = ok(pareto_compare(&g, &[(narrow.clone(), sn.clone()), (wide.clone(), sw.clone())]))?;
    ensure!(report.payoffs == vec![vec![q(7, 2), q(2, 1)], vec![q(4, 1), q(2, 1)]], "payoffs {:?}", report.payoffs);
    ensure!(report.dominance == vec![(1, 0)], "dominance {:?}", report.dominance);
    ensure!(ok(classify_pbe(&g, &narrow, &sn, true))?.p3_induced, "narrow profile not P3-induced");
    let c = ok(classify_pbe(&g, &wide, &sw, true))?;
    ensure!(!c.p3_induced, "wide profile classified P3-induced");
    ensure!(c.unused_items == vec![vec![1], vec![]], "shield {:?}", c.unused_items);
    Ok("(7/2, 2) dominated by (4, 2); shield {b}".into())
}

fn upr_without_upnr() -> Outcome {
    let g = ok(upr_three_game())?;
    let found = ok(find_p3_induced_profiles(&g, SearchOptions::default()))?;
    ensure!(found.len() == 2, "{} profiles", found.len());
    ensure!(found[0].menus == vec![menu(&g, 0, &["a2", "a3"]), menu(&g, 1, &["b2", "b3"])], "first profile differs");
    ensure!(found[0].report.pass && !found[1].report.pass, "pass flags {} {}", found[0].report.pass, found[1].report.pass);
    Ok("two mutual profiles, first passes".into())
}

fn oracle_battery() -> Outcome {
    let mut r = rng(0x5eed_0005);
    let mut infeasible = 0;
    for k in 0..200 {
        let g = random_game(&mut r, Shape::default());
        let i = r.random_range(0..g.n());
        let rivals = random_rivals(&mut r, &g, i);
        let oracle = oracle_screening_value(&g, i, &rivals);
        let got = match solve_screening(&ScreeningProblem::new(&g, i, rivals)) {
            Ok(sol) => Some(sol.value),
            Err(Error::Infeasible(_)) => {
                infeasible += 1;
                None
            }
            Err(e) => return Err(format!("game {k}: {e}")),
        };
        ensure!(got == oracle, "game {k}: solver {got:?} vs oracle {oracle:?}");
    }
    Ok(format!("200/200 agree ({infeasible} infeasible on both sides)"))
}

fn separable_soundness_battery() -> Outcome {
    let mut r = rng(0x5eed_0006);
    let mut profiles = 0;
    for k in 0..100 {
        let g = random_separable_game(&mut r, Shape::default());
        for p in ok(find_p3_induced_profiles(&g, SearchOptions::default()))? {
            ensure!(p.report.pass, "game {k}: mutual profile fails compatibility");
            let s = ok(construct_agent_strategy(&g, &p.mechanisms))?;
            let cert = ok(verify_pbe(&g, &p.menus, &s))?;
            ensure!(cert.is_pbe(), "game {k}: {:?}", cert.verdict);
            profiles += 1;
        }
    }
    Ok(format!("{profiles} profiles over 100 games all certified"))
}

fn delegation() -> Outcome {
    let m = aligned_delegation();
    let spec = RegimeSpec::FullDelegation { principal: 2 };
    let r = ok(check_regime(&m, &spec, 1001))?;
    ensure!(r.pass, "aligned full delegation fails");
    for c in r.conditions.iter().filter(|c| c.name.starts_with("(iii)")) {
        ensure!(c.margin == Some(0.0), "{} residual {:?}", c.name, c.margin);
    }
    let x = ok(cross_validate_discretized(&m, &spec, 9, 17))?;
    let sup = x.sup_distance.ok_or("no mutual profile in the discretized game")?;
    ensure!(sup <= x.outcome_step, "sup-distance {sup} > step {}", x.outcome_step);
    let p = ok(check_regime(&two_regime_delegation(0.0), &two_regime_spec(), 1000))?;
    let mm = p.multiplier_margin.ok_or("no multiplier")?;
    ensure!(p.pass && mm >= 0.0, "piecewise pass {} margin {mm}", p.pass);
    Ok(format!("boundary residual 0, sup-distance {sup} ≤ {}, multiplier margin {mm:e}", x.outcome_step))
}

fn bundling() -> Outcome {
    let union = union_bundling();
    let ts = ok(find_tstar(&union, TStarVariant::MarketSplit))?;
    ensure!((ts.t - 4.0 / 3.0).abs() <= 1e-9, "t* = {}", ts.t);
    let (m1, m2) = ok(build_market_split(&union, &[1, 3], &[2, 0]))?;
    let want = 2.0 / 3.0 * 2.0;
    ensure!(m1.iter().chain(&m2).all(|i| (i.price - want).abs() <= 1e-9), "prices {m1:?} {m2:?}");
    ensure!(ok(check_market_splitting(&union, &m1, &m2))?.pass, "market split check fails");
    let umi = union_minus_intersection_bundling();
    let pairs = ok(jointly_optimal_pairs(&umi))?;
    ensure!(pairs.iter().all(|&(a, b)| a == umi.complement(b)) && pairs.len() == 4, "pairs {pairs:?}");
    let single = ok(build_base_plus_upgrades(&umi, 1))?;
    ensure!(single.structure == Structure::Singleton, "structure {:?}", single.structure);
    let up = ok(build_base_plus_upgrades(&upgrade_premium_bundling(), 1))?;
    ensure!(up.upgrade_menu.len() >= 2, "upgrade menu has {} items", up.upgrade_menu.len());
    Ok(format!("t* = {:.12}, price 4/3, complementary pairs, m = 1 and m = {}", ts.t, up.upgrade_menu.len()))
}

type Member = Box<dyn Fn(f64) -> f64>;

fn random_cubic(r: &mut Rng8) -> (Member, Member) {
    let c: [f64; 4] = std::array::from_fn(|_| r.random_range(-2.0..2.0));
    (
        Box::new(move |t| c[0] + t * (c[1] + t * (c[2] + t * c[3]))),
        Box::new(move |t| c[1] + t * (2.0 * c[2] + t * 3.0 * c[3])),
    )
}

fn envelope_numerics() -> Outcome {
    let mut r = rng(0x5eed_0009);
    let t = uniform_grid(0.0, 1.0, 1001);
    for k in 0..50 {
        let m = r.random_range(2..=5);
        let fns: Vec<(Member, Member)> = (0..m).map(|_| random_cubic(&mut r)).collect();
        let a = ok(upper_envelope(&SampledFamily::from_fns(&t, &fns)))?;
        ensure!(kink_audit(&a).pass, "family {k}: {:?}", kink_audit(&a).failure);
        // inject a crossing partner f + (t − ½) and take the minimum instead
        let (f, df) = random_cubic(&mut r);
        let f = std::rc::Rc::new(f);
        let df = std::rc::Rc::new(df);
        let (f2, df2) = (f.clone(), df.clone());
        let pair: Vec<(Member, Member)> = vec![
            (Box::new(move |x| f(x)), Box::new(move |x| df(x))),
            (Box::new(move |x| f2(x) + x - 0.5), Box::new(move |x| df2(x) + 1.0)),
        ];
        let min = ok(pointwise_envelope(&SampledFamily::from_fns(&t, &pair), Sense::Min))?;
        ensure!(!kink_audit(&min).pass, "family {k}: injected min-envelope passes");
    }
    let tent: Vec<(Member, Member)> = vec![(Box::new(|x| x), Box::new(|_| 1.0)), (Box::new(|x| 1.0 - x), Box::new(|_| -1.0))];
    let res = envelope_integral_check(&ok(upper_envelope(&SampledFamily::from_fns(&uniform_grid(0.0, 1.0, 10_000), &tent)))?);
    ensure!(res <= 1e-6, "tent residual {res:e}");
    let curved = || -> Vec<(Member, Member)> {
        vec![
            (Box::new(|x: f64| (3.0 * x).sin()), Box::new(|x: f64| 3.0 * (3.0 * x).cos())),
            (Box::new(|x: f64| 0.5 + x * x), Box::new(|x: f64| 2.0 * x)),
            (Box::new(|x: f64| -(x - 0.9) * (x - 0.9) + 0.8), Box::new(|x: f64| -2.0 * (x - 0.9))),
        ]
    };
    let mut prev = f64::INFINITY;
    let mut ratios = Vec::new();
    for n in [100, 200, 400, 800, 1600] {
        let res = envelope_integral_check(&ok(upper_envelope(&SampledFamily::from_fns(&uniform_grid(0.0, 1.0, n), &curved())))?);
        ensure!(res <= prev / 2.0, "grid {n}: residual {res:e} after {prev:e}");
        if prev.is_finite() {
            ratios.push(prev / res);
        }
        prev = res;
    }
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("50 families pass, 50 min-envelopes fail, tent residual {res:e}, worst halving ratio {worst:.2}"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("1 tie game end to end", Duration::from_secs(1), tie_game_end_to_end),
        ("2 outside-option variant", Duration::from_secs(1), outside_option_variant),
        ("3 Pareto counterexample", Duration::from_secs(1), pareto_counterexample),
        ("4 compatible but not unique", Duration::from_secs(5), upr_without_upnr),
        ("5 screening oracle battery", Duration::from_secs(30), oracle_battery),
        ("6 separable soundness battery", Duration::from_secs(60), separable_soundness_battery),
        ("7 delegation", Duration::from_secs(10), delegation),
        ("8 bundling", Duration::from_secs(10), bundling),
        ("9 envelope numerics", Duration::from_secs(10), envelope_numerics),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?} > {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{elapsed:.2?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{elapsed:.2?}]: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
