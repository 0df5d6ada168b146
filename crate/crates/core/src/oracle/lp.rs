//! Exact fluid LP upper bound for ad allocation.
//!
//! Variables `z_ij` are the money ad `i` pays for type-`j` queries over the
//! horizon. Constraints:
//!
//! * `Σ_j z_ij <= B_i` (budget),
//! * `Σ_i z_ij / p_ij <= d q_j T` (slot-time available to type `j`),
//! * `z_ij <= p_ij q_j T` (an ad holds at most one slot of a type at a time).
//!
//! The last family makes the LP tight: any feasible point can be realized by a
//! fluid strategy, by packing each type's slot-time `d q_j T` with the
//! wrap-around rule. Every fluid strategy restricted to the allowed pairs is
//! feasible, so the optimum upper-bounds all of them.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::simplex::{maximize, to_f64, to_rational};
use super::OptResult;
use crate::adalloc::AdInstance;
use crate::error::{Error, Result};

/// Largest `m·n` the LP oracle accepts.
pub const LP_CELL_LIMIT: u128 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: BigRational,
    /// `z[i][j]`, zero outside the allowed pairs.
    pub spend: Vec<Vec<BigRational>>,
}

impl LpSolution {
    pub fn spend_f64(&self) -> Vec<Vec<f64>> {
        self.spend.iter().map(|row| row.iter().map(to_f64).collect()).collect()
    }
}

fn guard(instance: &AdInstance) -> Result<u128> {
    let cells = (instance.ad_count() * instance.type_count()) as u128;
    if cells > LP_CELL_LIMIT {
        return Err(Error::GuardExceeded {
            oracle: "lp_opt_fluid",
            measured: cells,
            limit: LP_CELL_LIMIT,
        });
    }
    Ok(cells)
}

/// Exact optimum over the pairs marked in `allowed[i][j]` (all pairs if `None`).
pub fn lp_opt_exact(instance: &AdInstance, allowed: Option<&[Vec<bool>]>) -> Result<LpSolution> {
    guard(instance)?;
    let (m, n) = (instance.ad_count(), instance.type_count());
    if let Some(mask) = allowed {
        if mask.len() != m || mask.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("allowed-pair mask must be m x n".into()));
        }
    }
    let slots = BigRational::from_integer(instance.slots().into());
    let horizon = to_rational(instance.horizon())?;
    let budgets = instance.budgets().iter().map(|&b| to_rational(b)).collect::<Result<Vec<_>>>()?;
    let probs = (0..n).map(|j| to_rational(instance.prob(j))).collect::<Result<Vec<_>>>()?;

    let mut vars: Vec<(usize, usize, BigRational)> = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let ok = allowed.is_none_or(|mask| mask[i][j]);
            if ok && instance.bid(i, j) > 0.0 && instance.prob(j) > 0.0 {
                vars.push((i, j, to_rational(instance.bid(i, j))?));
            }
        }
    }

    let zero = BigRational::zero;
    let mut a: Vec<Vec<BigRational>> = Vec::new();
    let mut b: Vec<BigRational> = Vec::new();
    for (i, budget) in budgets.iter().enumerate() {
        a.push(vars.iter().map(|v| if v.0 == i { BigRational::one() } else { zero() }).collect());
        b.push(budget.clone());
    }
    for (j, q) in probs.iter().enumerate() {
        a.push(vars.iter().map(|v| if v.1 == j { v.2.recip() } else { zero() }).collect());
        b.push(&slots * q * &horizon);
    }
    for (k, (_, j, p)) in vars.iter().enumerate() {
        a.push((0..vars.len()).map(|c| if c == k { BigRational::one() } else { zero() }).collect());
        b.push(p * &probs[*j] * &horizon);
    }
    let c = vec![BigRational::one(); vars.len()];
    let sol = maximize(&c, &a, &b)?;

    let mut spend = vec![vec![zero(); n]; m];
    for ((i, j, _), z) in vars.iter().zip(sol.x) {
        spend[*i][*j] = z;
    }
    Ok(LpSolution {
        value: sol.value,
        spend,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpendWitness {
    /// `z[i][j]`.
    pub spend: Vec<Vec<f64>>,
}

/// [`lp_opt_exact`] rounded to `f64`, with the spend matrix as witness.
pub fn lp_opt_fluid(instance: &AdInstance, allowed: Option<&[Vec<bool>]>) -> Result<OptResult<SpendWitness>> {
    let size = guard(instance)?;
    let sol = lp_opt_exact(instance, allowed)?;
    Ok(OptResult {
        value: to_f64(&sol.value),
        witness: SpendWitness {
            spend: sol.spend_f64(),
        },
        method: "exact rational simplex (Bland)",
        size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adalloc::sample::random_bounded_instance;
    use crate::adalloc::{Ad, QueryType};
    use crate::seqcore::sample_rng;

    fn i1() -> AdInstance {
        AdInstance::new(
            vec![Ad { id: "a1".into(), budget: 0.5 }, Ad { id: "a2".into(), budget: 0.5 }],
            vec![QueryType { id: "t1".into(), prob: 0.5 }, QueryType { id: "t2".into(), prob: 0.5 }],
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            1,
            1.0,
        )
        .unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// Independent check: enumerate every choice of `k` tight constraints among
    /// all rows (including `z >= 0`), solve in floating point, keep the best
    /// feasible vertex.
    fn vertex_enumeration(inst: &AdInstance) -> f64 {
        let (m, n) = (inst.ad_count(), inst.type_count());
        let vars: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| inst.bid(i, j) > 0.0 && inst.prob(j) > 0.0)
            .collect();
        let k = vars.len();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..m {
            rows.push((vars.iter().map(|v| if v.0 == i { 1.0 } else { 0.0 }).collect(), inst.budgets()[i]));
        }
        for j in 0..n {
            rows.push((
                vars.iter().map(|v| if v.1 == j { 1.0 / inst.bid(v.0, j) } else { 0.0 }).collect(),
                inst.slots() as f64 * inst.prob(j) * inst.horizon(),
            ));
        }
        for (c, &(i, j)) in vars.iter().enumerate() {
            let mut row = vec![0.0; k];
            row[c] = 1.0;
            rows.push((row.clone(), inst.bid(i, j) * inst.prob(j) * inst.horizon()));
            rows.push((row.iter().map(|v| -v).collect(), 0.0));
        }
        if k == 0 {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        let total = rows.len();
        let mut choice: Vec<usize> = (0..k).collect();
        loop {
            if let Some(x) = solve(&choice.iter().map(|&r| rows[r].clone()).collect::<Vec<_>>()) {
                let feasible = rows
                    .iter()
                    .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
                if feasible {
                    best = best.max(x.iter().sum());
                }
            }
            // next combination
            let mut pos = k;
            while pos > 0 && choice[pos - 1] == total - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            choice[pos - 1] += 1;
            for q in pos..k {
                choice[q] = choice[q - 1] + 1;
            }
        }
        best
    }

    fn solve(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
        let k = rows.len();
        let mut a: Vec<Vec<f64>> = rows.iter().map(|(r, b)| r.iter().copied().chain([*b]).collect()).collect();
        for col in 0..k {
            let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
            if a[piv][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, piv);
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let f = row[col] / pivot_row[col];
                    for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
        Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
    }

    #[test]
    fn worked_instance_optimum() {
        let sol = lp_opt_exact(&i1(), None).unwrap();
        assert_eq!(sol.value, r(1, 1));
        assert_eq!(sol.spend[0][1], r(1, 2));
        assert_eq!(sol.spend[1][0], r(1, 2));
    }

    #[test]
    fn single_variable_cap() {
        let inst = AdInstance::new(
            vec![Ad { id: "a1".into(), budget: 1.0 }],
            vec![QueryType { id: "t1".into(), prob: 1.0 }],
            vec![vec![2.0]],
            1,
            1.0,
        )
        .unwrap();
        assert_eq!(lp_opt_exact(&inst, None).unwrap().value, r(1, 1));
    }

    #[test]
    fn zero_budgets_give_zero() {
        let inst = AdInstance::new(
            vec![Ad { id: "a1".into(), budget: 0.0 }, Ad { id: "a2".into(), budget: 0.0 }],
            vec![QueryType { id: "t1".into(), prob: 1.0 }],
            vec![vec![1.0], vec![3.0]],
            2,
            1.0,
        )
        .unwrap();
        assert!(lp_opt_exact(&inst, None).unwrap().value.is_zero());
    }

    #[test]
    fn two_slots_respect_per_pair_cap() {
        // one ad cannot occupy both slots of a type
        let inst = AdInstance::new(
            vec![Ad { id: "a1".into(), budget: 2.0 }],
            vec![QueryType { id: "t1".into(), prob: 1.0 }],
            vec![vec![1.0]],
            2,
            1.0,
        )
        .unwrap();
        assert_eq!(lp_opt_exact(&inst, None).unwrap().value, r(1, 1));
    }

    #[test]
    fn allowed_mask_restricts() {
        let mask = vec![vec![true, false], vec![true, false]];
        let sol = lp_opt_exact(&i1(), Some(&mask)).unwrap();
        // only t1 is served: slot-time 0.5 at bid 1
        assert_eq!(sol.value, r(1, 2));
        assert!(sol.spend[0][1].is_zero());
    }

    #[test]
    fn guard_reports_measured_size() {
        let mut rng = sample_rng(1, 0);
        let inst = crate::adalloc::sample::random_instance(&mut rng, 4, 4, 1);
        match lp_opt_fluid(&inst, None) {
            Err(Error::GuardExceeded { measured, limit, .. }) => {
                assert_eq!(measured, 16);
                assert_eq!(limit, 12);
            }
            other => panic!("expected guard error, got {other:?}"),
        }
    }

    #[test]
    fn simplex_matches_vertex_enumeration() {
        for k in 0..60 {
            let mut rng = sample_rng(77, k);
            let inst = random_bounded_instance(&mut rng, 3, 2, 2, 4);
            let exact = to_f64(&lp_opt_exact(&inst, None).unwrap().value);
            let brute = vertex_enumeration(&inst);
            assert!((exact - brute).abs() < 1e-9, "{exact} vs {brute} on {inst:?}");
        }
    }

    #[test]
    fn witness_sums_to_value() {
        for k in 0..30 {
            let mut rng = sample_rng(78, k);
            let inst = random_bounded_instance(&mut rng, 4, 4, 2, 12);
            let sol = lp_opt_exact(&inst, None).unwrap();
            let total: BigRational = sol.spend.iter().flatten().sum();
            assert_eq!(total, sol.value);
        }
    }
}
