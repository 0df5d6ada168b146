//! Exact baselines for small instances. Every oracle has a size guard and
//! refuses, with the measured size, anything beyond it.

pub mod coverage;
pub mod lp;
pub mod simplex;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qrewrite::RewriteInstance;
use crate::seqcore::{ActionSet, DiscreteSequence, SequenceFunction};

pub use coverage::{make_coverage_fixture, random_coverage_spec, small_coverage_spec, CoverageFunction, CoverageSpec};
pub use lp::{lp_opt_exact, lp_opt_fluid, LpSolution, SpendWitness, LP_CELL_LIMIT};

pub const DISCRETE_LIMIT: u128 = 1_000_000;
pub const REWRITE_LIMIT: u128 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptResult<W> {
    pub value: f64,
    pub witness: W,
    pub method: &'static str,
    /// Measured size that was checked against the guard.
    pub size: u128,
}

/// Optimum over all sequences of length exactly `horizon`; ties go to the
/// lexicographically first sequence in action-set order.
pub fn brute_force_discrete<A, U>(
    u: &U,
    actions: &ActionSet<A>,
    horizon: usize,
) -> Result<OptResult<DiscreteSequence<A>>>
where
    A: Clone + PartialEq + std::fmt::Debug + Send + Sync,
    U: SequenceFunction<DiscreteSequence<A>> + Sync,
{
    let s = actions.len() as u128;
    let size = u32::try_from(horizon)
        .ok()
        .and_then(|t| s.checked_pow(t))
        .filter(|&n| n <= DISCRETE_LIMIT)
        .ok_or(Error::GuardExceeded {
            oracle: "brute_force_discrete",
            measured: u32::try_from(horizon)
                .ok()
                .and_then(|t| s.checked_pow(t))
                .unwrap_or(u128::MAX),
            limit: DISCRETE_LIMIT,
        })?;
    let decode = |mut idx: u128| -> DiscreteSequence<A> {
        let mut items = vec![actions.actions()[0].clone(); horizon];
        for slot in items.iter_mut().rev() {
            *slot = actions.actions()[(idx % s) as usize].clone();
            idx /= s;
        }
        DiscreteSequence::new(items)
    };
    let values = (0..size as u64)
        .into_par_iter()
        .map(|idx| u.eval(&decode(idx as u128)))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (idx, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = idx;
        }
    }
    Ok(OptResult {
        value: values[best],
        witness: decode(best as u128),
        method: "exhaustive enumeration",
        size,
    })
}

/// Subsets of `0..r` with at most `k` elements, smallest first, as bit masks.
fn small_subsets(r: usize, k: usize) -> Vec<u32> {
    let mut out: Vec<u32> = (0u32..(1 << r)).filter(|m| m.count_ones() as usize <= k).collect();
    out.sort_by_key(|&m| (m.count_ones(), mask_to_vec(m)));
    out
}

fn mask_to_vec(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewriteWitness {
    /// Chosen rewrite indices per query type.
    pub rewrites: Vec<Vec<usize>>,
}

/// Best assignment of at most `k` rewrites per type, each valued by the exact
/// fluid LP restricted to the ads its rewrites reach.
pub fn brute_force_rewrite_opt(instance: &RewriteInstance) -> Result<OptResult<RewriteWitness>> {
    let base = instance.base();
    let (m, n) = (base.ad_count(), base.type_count());
    let r = instance.rewrites().len();
    let k = instance.effective_k();
    if r > 16 {
        return Err(Error::GuardExceeded {
            oracle: "brute_force_rewrite_opt",
            measured: u128::MAX,
            limit: REWRITE_LIMIT,
        });
    }
    let options = small_subsets(r, k);
    let per_type = options.len() as u128;
    let size = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(per_type)).unwrap_or(u128::MAX);
    if size > REWRITE_LIMIT {
        return Err(Error::GuardExceeded {
            oracle: "brute_force_rewrite_opt",
            measured: size,
            limit: REWRITE_LIMIT,
        });
    }
    if (m * n) as u128 > LP_CELL_LIMIT {
        return Err(Error::GuardExceeded {
            oracle: "lp_opt_fluid",
            measured: (m * n) as u128,
            limit: LP_CELL_LIMIT,
        });
    }

    // reachable ads of each option
    let reach: Vec<Vec<bool>> = options.iter().map(|&o| instance.allowed_ads(&mask_to_vec(o))).collect();
    // pair mask bit (i * n + j) -> LP value, shared across assignments
    let assignments: Vec<Vec<usize>> = (0..size)
        .map(|mut idx| {
            let mut pick = vec![0; n];
            for slot in pick.iter_mut().rev() {
                *slot = (idx % per_type) as usize;
                idx /= per_type;
            }
            pick
        })
        .collect();
    let pair_mask = |pick: &[usize]| -> u64 {
        let mut bits = 0u64;
        for (j, &o) in pick.iter().enumerate() {
            for (i, _) in reach[o].iter().enumerate().filter(|(_, r)| **r) {
                bits |= 1 << (i * n + j);
            }
        }
        bits
    };
    let mut distinct: Vec<u64> = assignments.iter().map(|p| pair_mask(p)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let values: HashMap<u64, f64> = distinct
        .par_iter()
        .map(|&bits| {
            let allowed: Vec<Vec<bool>> = (0..m)
                .map(|i| (0..n).map(|j| bits & (1 << (i * n + j)) != 0).collect())
                .collect();
            lp_opt_fluid(base, Some(&allowed)).map(|o| (bits, o.value))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64)> = None;
    for (idx, pick) in assignments.iter().enumerate() {
        let v = values[&pair_mask(pick)];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((idx, v));
        }
    }
    let (idx, value) = best.expect("at least the empty assignment exists");
    Ok(OptResult {
        value,
        witness: RewriteWitness {
            rewrites: assignments[idx].iter().map(|&o| mask_to_vec(options[o])).collect(),
        },
        method: "assignment enumeration + exact LP",
        size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrewrite::fixtures::i3;

    fn seq(items: &[&str]) -> DiscreteSequence<String> {
        DiscreteSequence::new(items.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn coverage_brute_force() {
        let (u, actions) = make_coverage_fixture(&small_coverage_spec()).unwrap();
        let opt = brute_force_discrete(&u, &actions, 2).unwrap();
        assert_eq!(opt.value, 3.0);
        assert_eq!(opt.witness, seq(&["s1", "s2"]));
        assert_eq!(opt.size, 9);
        let opt = brute_force_discrete(&u, &actions, 0).unwrap();
        assert_eq!(opt.value, 0.0);
        assert!(opt.witness.is_empty());
    }

    #[test]
    fn single_action_has_one_candidate() {
        let spec = CoverageSpec {
            weights: vec![0.5, 0.25],
            sets: vec![("s".into(), vec![0])],
        };
        let (u, actions) = make_coverage_fixture(&spec).unwrap();
        let opt = brute_force_discrete(&u, &actions, 3).unwrap();
        assert_eq!(opt.witness, seq(&["s", "s", "s"]));
        assert_eq!(opt.value, u.eval(&opt.witness).unwrap());
    }

    #[test]
    fn discrete_guard() {
        let (u, actions) = make_coverage_fixture(&small_coverage_spec()).unwrap();
        // 3^13 > 10^6
        assert!(matches!(
            brute_force_discrete(&u, &actions, 13),
            Err(Error::GuardExceeded { measured: 1_594_323, .. })
        ));
        assert!(brute_force_discrete(&u, &actions, 100).is_err());
    }

    #[test]
    fn rewrite_examples() {
        let opt = brute_force_rewrite_opt(&i3(1)).unwrap();
        assert!((opt.value - 0.5).abs() < 1e-12);
        assert_eq!(opt.witness.rewrites, vec![vec![1]]);
        let opt = brute_force_rewrite_opt(&i3(2)).unwrap();
        assert!((opt.value - 0.7).abs() < 1e-12);
        assert_eq!(opt.witness.rewrites, vec![vec![0, 1]]);
    }

    #[test]
    fn unrestricted_rewrites_match_plain_lp() {
        let inst = i3(5);
        let opt = brute_force_rewrite_opt(&inst).unwrap();
        assert_eq!(opt.value, lp_opt_fluid(inst.base(), None).unwrap().value);
    }

    #[test]
    fn subsets_are_ordered_by_size() {
        assert_eq!(small_subsets(3, 1), vec![0, 1, 2, 4]);
        assert_eq!(small_subsets(3, 2).len(), 7);
    }
}
