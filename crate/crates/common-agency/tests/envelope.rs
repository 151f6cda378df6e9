mod common;

use common::*;
use common_agency::envelope::{
    envelope_integral_check, integral_residual, kink_audit, lipschitz_audit, pointwise_envelope, upper_envelope,
    SampledFamily, Sense,
};
use common_agency::numeric::uniform_grid;
use proptest::prelude::*;
use rand::Rng;

type Member = Box<dyn Fn(f64) -> f64>;

fn family(n: usize, fns: Vec<(Member, Member)>) -> SampledFamily {
    SampledFamily::from_fns(&uniform_grid(0.0, 1.0, n), &fns)
}

fn tent() -> Vec<(Member, Member)> {
    vec![(Box::new(|t| t), Box::new(|_| 1.0)), (Box::new(|t| 1.0 - t), Box::new(|_| -1.0))]
}

fn parabolas() -> Vec<(Member, Member)> {
    [0.0, 0.5, 1.0]
        .into_iter()
        .map(|c| -> (Member, Member) { (Box::new(move |t| -(t - c) * (t - c)), Box::new(move |t| -2.0 * (t - c))) })
        .collect()
}

#[test]
fn tent_has_one_upward_kink_at_the_middle() {
    let a = upper_envelope(&family(101, tent())).unwrap();
    assert_eq!(a.kinks.len(), 1);
    let k = &a.kinks[0];
    assert!((k.at - 0.5).abs() < 1e-12);
    assert_eq!((k.left_slope, k.right_slope), (-1.0, 1.0));
    assert!(k.upward);
    assert!(kink_audit(&a).pass);
}

#[test]
fn min_envelope_fails_the_kink_audit() {
    let a = pointwise_envelope(&family(101, tent()), Sense::Min).unwrap();
    let audit = kink_audit(&a);
    assert!(!audit.pass);
    assert!((audit.failure.unwrap().at - 0.5).abs() < 1e-12);
}

#[test]
fn single_member_is_its_own_envelope() {
    let fam = family(51, vec![(Box::new(|t: f64| t * t), Box::new(|t| 2.0 * t))]);
    let a = upper_envelope(&fam).unwrap();
    assert_eq!(a.values, fam.members[0]);
    assert!(a.kinks.is_empty());
}

#[test]
fn shifted_parabolas_kink_at_the_quarters() {
    let a = upper_envelope(&family(1001, parabolas())).unwrap();
    let at: Vec<f64> = a.kinks.iter().map(|k| k.at).collect();
    assert_eq!(at.len(), 2);
    assert!((at[0] - 0.25).abs() < 1e-9 && (at[1] - 0.75).abs() < 1e-9, "{at:?}");
    assert!(a.kinks.iter().all(|k| k.upward));
}

#[test]
fn envelope_equals_the_pointwise_maximum() {
    let fam = family(257, parabolas());
    let a = upper_envelope(&fam).unwrap();
    for k in 0..fam.t.len() {
        let max = fam.members.iter().map(|m| m[k]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.values[k], max);
        assert!(a.active[k].iter().all(|&j| fam.members[j][k] == max));
    }
}

#[test]
fn tent_integral_identity_at_a_fine_grid() {
    let a = upper_envelope(&family(10_000, tent())).unwrap();
    assert!(envelope_integral_check(&a) <= 1e-6);
}

#[test]
fn constant_family_has_zero_residual() {
    let fam = family(100, vec![(Box::new(|_| 2.5), Box::new(|_| 0.0)), (Box::new(|_| 1.0), Box::new(|_| 0.0))]);
    assert_eq!(envelope_integral_check(&upper_envelope(&fam).unwrap()), 0.0);
}

#[test]
fn lipschitz_estimate_respects_member_slopes() {
    let fam = family(
        401,
        vec![(Box::new(|t| 5.0 * t), Box::new(|_| 5.0)), (Box::new(|t| 3.0 - 2.0 * t), Box::new(|_| -2.0))],
    );
    let a = upper_envelope(&fam).unwrap();
    let l = lipschitz_audit(&a);
    assert!(l.pass);
    assert_eq!(l.member_bound, 5.0);
    assert!(l.quotient <= 5.0 + l.tolerance);
}

#[test]
fn residual_shrinks_under_grid_doubling() {
    // members with curvature so the trapezoid error is visible
    let make = || -> Vec<(Member, Member)> {
        vec![
            (Box::new(|t: f64| (3.0 * t).sin()), Box::new(|t: f64| 3.0 * (3.0 * t).cos())),
            (Box::new(|t: f64| 0.5 + t * t), Box::new(|t: f64| 2.0 * t)),
        ]
    };
    let mut prev = f64::INFINITY;
    for n in [100, 200, 400, 800] {
        let r = envelope_integral_check(&upper_envelope(&family(n, make())).unwrap());
        assert!(r <= prev / 2.0 || r < 1e-13, "n = {n}: {r} vs {prev}");
        prev = r;
    }
}

#[test]
fn delegation_indirect_utility_is_a_c1_envelope() {
    // v₁(o₁, t | {0, 1/4, 1/2}) with agent loss −(t − o₁ − o₂)² at o₁ = 0
    let fns: Vec<(Member, Member)> = [0.0, 0.25, 0.5]
        .into_iter()
        .map(|o2| -> (Member, Member) { (Box::new(move |t| -(t - o2) * (t - o2)), Box::new(move |t| -2.0 * (t - o2))) })
        .collect();
    let a = upper_envelope(&family(2001, fns)).unwrap();
    assert!(kink_audit(&a).pass);
    assert_eq!(a.kinks.len(), 2);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let t = uniform_grid(0.0, 1.0, 5);
    assert!(upper_envelope(&SampledFamily::new(t.clone(), vec![vec![0.0; 4]])).is_err());
    assert!(upper_envelope(&SampledFamily::new(vec![0.0, 0.0], vec![vec![0.0; 2]])).is_err());
    assert!(upper_envelope(&SampledFamily::new(t.clone(), vec![])).is_err());
    assert!(integral_residual(&t, &[0.0; 5], &[0.0; 4]).is_err());
    let r = integral_residual(&t, &t, &[1.0; 5]).unwrap();
    assert!(r.iter().all(|x| x.abs() < 1e-15));
}

/// Random cubic c₀ + c₁t + c₂t² + c₃t³ with its derivative.
fn random_cubic(rng: &mut Rng8) -> (Member, Member) {
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    (
        Box::new(move |t| c[0] + t * (c[1] + t * (c[2] + t * c[3]))),
        Box::new(move |t| c[1] + t * (2.0 * c[2] + t * 3.0 * c[3])),
    )
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn cubic_families_have_upward_kinks(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(2..=5);
        let fns: Vec<(Member, Member)> = (0..m).map(|_| random_cubic(&mut r)).collect();
        let fam = family(1001, fns);
        let a = upper_envelope(&fam).unwrap();
        prop_assert!(kink_audit(&a).pass, "{:?}", kink_audit(&a).failure);
        prop_assert!(lipschitz_audit(&a).pass);
        prop_assert!(envelope_integral_check(&a) < 1e-5);
    }

    #[test]
    fn parallel_and_sequential_envelopes_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fns: Vec<(Member, Member)> = (0..4).map(|_| random_cubic(&mut r)).collect();
        let fam = family(513, fns);
        let a = upper_envelope(&fam).unwrap();
        let b = common_agency::par::sequential(|| upper_envelope(&fam).unwrap());
        prop_assert_eq!(a, b);
    }
}
