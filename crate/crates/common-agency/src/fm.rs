//! Fourier–Motzkin elimination over the rationals with Farkas bookkeeping.
//!
//! Constraints have the form `coeffs · x + constant ≥ 0`. Every derived
//! constraint remembers the nonnegative combination of original constraints
//! that produced it, so an infeasibility verdict comes with multipliers that
//! re-derive `0 ≥ c` with `c < 0`.

use std::collections::{BTreeMap, HashMap};

use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub constant: Rational,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rational>, constant: Rational) -> Self {
        Constraint { coeffs, constant }
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.coeffs.iter().zip(x).fold(self.constant.clone(), |acc, (a, v)| acc + &(a * v))
    }

    fn scaled(&self, k: &Rational) -> Constraint {
        Constraint { coeffs: self.coeffs.iter().map(|a| a * k).collect(), constant: &self.constant * k }
    }

    fn add(&self, other: &Constraint) -> Constraint {
        Constraint {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            constant: &self.constant + &other.constant,
        }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|a| a.is_zero())
    }
}

#[derive(Clone, Debug)]
struct Derived {
    c: Constraint,
    /// Multipliers over the original constraints.
    farkas: BTreeMap<usize, Rational>,
}

impl Derived {
    fn combine(p: &Derived, kp: &Rational, n: &Derived, kn: &Rational) -> Derived {
        let c = p.c.scaled(kp).add(&n.c.scaled(kn));
        let mut farkas = BTreeMap::new();
        for (k, w) in &p.farkas {
            *farkas.entry(*k).or_insert_with(Rational::zero) += w * kp;
        }
        for (k, w) in &n.farkas {
            *farkas.entry(*k).or_insert_with(Rational::zero) += w * kn;
        }
        farkas.retain(|_, w| !w.is_zero());
        Derived { c, farkas }
    }

    /// Scale so the largest |coefficient| is 1 (or |constant| when constant).
    fn normalize(mut self) -> Derived {
        let m = self
            .c
            .coeffs
            .iter()
            .map(|a| a.abs())
            .max()
            .filter(|m| !m.is_zero())
            .or_else(|| Some(self.c.constant.abs()).filter(|m| !m.is_zero()));
        if let Some(m) = m {
            let k = m.recip();
            self.c = self.c.scaled(&k);
            for w in self.farkas.values_mut() {
                *w = &*w * &k;
            }
        }
        self
    }
}

/// Proof of infeasibility.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Nonnegative multipliers over the original constraints; their
    /// combination has zero coefficients and a negative constant.
    pub multipliers: Vec<(usize, Rational)>,
    pub combined_constant: Rational,
    /// Variable whose elimination exposed the contradiction, with the lower-
    /// and upper-bound constraints (in the remaining variables) that clash.
    pub variable: Option<usize>,
    pub bound_pair: Option<(Constraint, Constraint)>,
}

impl Certificate {
    /// Re-derive the contradiction from the original constraints.
    pub fn check(&self, constraints: &[Constraint]) -> bool {
        let Some(first) = constraints.first() else { return false };
        let mut acc = Constraint::new(vec![Rational::zero(); first.coeffs.len()], Rational::zero());
        for (k, w) in &self.multipliers {
            if w.is_negative() || *k >= constraints.len() {
                return false;
            }
            acc = acc.add(&constraints[*k].scaled(w));
        }
        acc.is_constant() && acc.constant.is_negative() && acc.constant == self.combined_constant
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Feasible(Vec<Rational>),
    Infeasible(Certificate),
}

/// Decide feasibility of `constraints` over `n_vars` variables, eliminating
/// in `order` (which must list every variable once).
pub fn solve(n_vars: usize, constraints: &[Constraint], order: &[usize]) -> Outcome {
    debug_assert_eq!(order.len(), n_vars);
    let mut system: Vec<Derived> = constraints
        .iter()
        .enumerate()
        .map(|(k, c)| Derived { c: c.clone(), farkas: BTreeMap::from([(k, Rational::one())]) })
        .collect();
    if let Some(cert) = contradiction(&system, None, None) {
        return Outcome::Infeasible(cert);
    }
    system = prune(system);
    let mut snapshots = Vec::with_capacity(n_vars);
    for &x in order {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut next = Vec::new();
        for d in &system {
            let a = &d.c.coeffs[x];
            if a.is_positive() {
                pos.push(d);
            } else if a.is_negative() {
                neg.push(d);
            } else {
                next.push(d.clone());
            }
        }
        for p in &pos {
            for n in &neg {
                let kp = -&n.c.coeffs[x];
                let kn = p.c.coeffs[x].clone();
                let d = Derived::combine(p, &kp, n, &kn).normalize();
                if d.c.is_constant() && d.c.constant.is_negative() {
                    return Outcome::Infeasible(certificate(&d, Some(x), Some((p.c.clone(), n.c.clone()))));
                }
                next.push(d);
            }
        }
        snapshots.push(system);
        system = prune(next);
    }
    // back-substitution
    let mut x = vec![Rational::zero(); n_vars];
    for (k, &var) in order.iter().enumerate().rev() {
        let mut lo: Option<Rational> = None;
        let mut hi: Option<Rational> = None;
        for d in &snapshots[k] {
            let a = &d.c.coeffs[var];
            if a.is_zero() {
                continue;
            }
            let mut rest = d.c.constant.clone();
            for (j, c) in d.c.coeffs.iter().enumerate() {
                if j != var && !c.is_zero() {
                    rest += c * &x[j];
                }
            }
            let b = -&(rest / a.clone());
            if a.is_positive() {
                if lo.as_ref().is_none_or(|l| b > *l) {
                    lo = Some(b);
                }
            } else if hi.as_ref().is_none_or(|h| b < *h) {
                hi = Some(b);
            }
        }
        x[var] = match (lo, hi) {
            (Some(l), Some(h)) => (l + h) / Rational::int(2),
            (Some(l), None) => l,
            (None, Some(h)) => h,
            (None, None) => Rational::zero(),
        };
    }
    Outcome::Feasible(x)
}

fn certificate(d: &Derived, variable: Option<usize>, bound_pair: Option<(Constraint, Constraint)>) -> Certificate {
    Certificate {
        multipliers: d.farkas.iter().map(|(k, w)| (*k, w.clone())).collect(),
        combined_constant: d.c.constant.clone(),
        variable,
        bound_pair,
    }
}

fn contradiction(system: &[Derived], variable: Option<usize>, pair: Option<(Constraint, Constraint)>) -> Option<Certificate> {
    system
        .iter()
        .find(|d| d.c.is_constant() && d.c.constant.is_negative())
        .map(|d| certificate(d, variable, pair))
}

/// Drop tautologies and, among constraints with equal coefficients, keep the
/// tightest (smallest constant).
fn prune(system: Vec<Derived>) -> Vec<Derived> {
    let mut best: HashMap<Vec<Rational>, usize> = HashMap::new();
    let mut out: Vec<Derived> = Vec::new();
    for d in system {
        if d.c.is_constant() {
            continue;
        }
        let d = d.normalize();
        match best.get(&d.c.coeffs) {
            Some(&k) => {
                if d.c.constant < out[k].c.constant {
                    out[k] = d;
                }
            }
            None => {
                best.insert(d.c.coeffs.clone(), out.len());
                out.push(d);
            }
        }
    }
    out
}
