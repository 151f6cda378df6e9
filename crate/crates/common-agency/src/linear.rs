//! Exact Gaussian elimination over the rationals.

use crate::rational::Rational;

/// Solve `A x = b` exactly. Returns a particular solution (free variables set
/// to zero) or `None` when the system is inconsistent.
pub fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&k| !a[k][c].is_zero()) else { continue };
        a.swap(r, p);
        b.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        b[r] = &b[r] * &inv;
        for k in 0..rows {
            if k == r || a[k][c].is_zero() {
                continue;
            }
            let f = a[k][c].clone();
            for j in c..cols {
                let d = &f * &a[r][j];
                a[k][j] -= d;
            }
            let d = &f * &b[r];
            b[k] -= d;
        }
        pivots.push(c);
        r += 1;
    }
    if b[r..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); cols];
    for (k, &c) in pivots.iter().enumerate() {
        x[c] = b[k].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::int(n)
    }

    #[test]
    fn consistent_and_inconsistent() {
        // x + y = 3, x - y = 1
        let x = solve(vec![vec![q(1), q(1)], vec![q(1), q(-1)]], vec![q(3), q(1)]).unwrap();
        assert_eq!(x, vec![q(2), q(1)]);
        // x + y = 1, 2x + 2y = 3
        assert!(solve(vec![vec![q(1), q(1)], vec![q(2), q(2)]], vec![q(1), q(3)]).is_none());
        // underdetermined: free variable set to zero
        let x = solve(vec![vec![q(1), q(1)]], vec![q(5)]).unwrap();
        assert_eq!(x, vec![q(5), q(0)]);
    }
}
