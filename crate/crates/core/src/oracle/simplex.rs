//! Dense-tableau primal simplex over exact rationals.
//!
//! Only handles `max c·x, Ax <= b, x >= 0` with `b >= 0`, where the origin is
//! feasible and the slack basis is a valid start. Bland's rule prevents cycling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational equal to the shortest decimal that round-trips `x`.
///
/// `0.1` maps to `1/10` rather than to the binary value of the double, so
/// instance data typed as decimals is solved exactly as written.
pub fn to_rational(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite LP coefficient {x}")));
    }
    let text = x.to_string();
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot convert {x} to a rational")))?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

pub fn to_f64(x: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSolution {
    pub value: BigRational,
    pub x: Vec<BigRational>,
    pub pivots: usize,
}

/// Maximizes `c·x` subject to `a x <= b`, `x >= 0`. Requires `b >= 0`.
pub fn maximize(c: &[BigRational], a: &[Vec<BigRational>], b: &[BigRational]) -> Result<SimplexSolution> {
    let nv = c.len();
    let nr = a.len();
    if b.len() != nr || a.iter().any(|row| row.len() != nv) {
        return Err(Error::InvalidArgument("LP dimensions do not match".into()));
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::InvalidArgument("LP right-hand side must be non-negative".into()));
    }
    let width = nv + nr;
    // rows[i] = [A | I | b]
    let mut rows: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, rhs))| {
            let mut r = row.clone();
            r.extend((0..nr).map(|k| if k == i { BigRational::one() } else { BigRational::zero() }));
            r.push(rhs.clone());
            r
        })
        .collect();
    // objective row holds -reduced costs; last entry is the objective value
    let mut obj: Vec<BigRational> = c.iter().map(|v| -v.clone()).collect();
    obj.extend((0..=nr).map(|_| BigRational::zero()));
    let mut basis: Vec<usize> = (nv..width).collect();
    let mut pivots = 0;

    while let Some(enter) = (0..width).find(|&j| obj[j].is_negative()) {
        let mut leave: Option<(usize, BigRational)> = None;
        for (i, row) in rows.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = &row[width] / &row[enter];
            let better = match &leave {
                None => true,
                Some((li, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((pr, _)) = leave else {
            return Err(Error::InvalidArgument("LP is unbounded".into()));
        };
        let pivot = rows[pr][enter].clone();
        for v in rows[pr].iter_mut() {
            *v /= &pivot;
        }
        let pivot_row = rows[pr].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == pr || row[enter].is_zero() {
                continue;
            }
            let factor = row[enter].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        if !obj[enter].is_zero() {
            let factor = obj[enter].clone();
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        basis[pr] = enter;
        pivots += 1;
    }

    let mut x = vec![BigRational::zero(); nv];
    for (i, &var) in basis.iter().enumerate() {
        if var < nv {
            x[var] = rows[i][width].clone();
        }
    }
    Ok(SimplexSolution {
        value: obj[width].clone(),
        x,
        pivots,
    })
}
