//! Weighted coverage lifted to sequences: `u(A)` is the weight of the union of
//! the sets of the actions that appear in `A`. Order and repeats are ignored,
//! so the function is non-decreasing and submodular on sequences.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::{ActionSet, DiscreteSequence, SequenceFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    /// Weight of each universe element.
    pub weights: Vec<f64>,
    /// Action name and the elements it covers, in action-set order.
    pub sets: Vec<(String, Vec<usize>)>,
}

#[derive(Clone, Debug)]
pub struct CoverageFunction {
    weights: Vec<f64>,
    covers: HashMap<String, Vec<usize>>,
}

impl CoverageFunction {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SequenceFunction<DiscreteSequence<String>> for CoverageFunction {
    fn eval(&self, seq: &DiscreteSequence<String>) -> Result<f64> {
        let mut covered = vec![false; self.weights.len()];
        for action in seq.items() {
            let set = self
                .covers
                .get(action)
                .ok_or_else(|| Error::UnknownAction(action.clone()))?;
            for &e in set {
                covered[e] = true;
            }
        }
        Ok(covered.iter().zip(&self.weights).filter(|(c, _)| **c).map(|(_, w)| w).sum())
    }
}

pub fn make_coverage_fixture(spec: &CoverageSpec) -> Result<(CoverageFunction, ActionSet<String>)> {
    if let Some(w) = spec.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::schema("weights", format!("must be finite and >= 0, got {w}")));
    }
    for (name, set) in &spec.sets {
        if let Some(e) = set.iter().find(|&&e| e >= spec.weights.len()) {
            return Err(Error::schema(format!("sets.{name}"), format!("element {e} is outside the universe")));
        }
    }
    let actions = ActionSet::new(spec.sets.iter().map(|(n, _)| n.clone()).collect())?;
    let covers = spec.sets.iter().cloned().collect();
    Ok((
        CoverageFunction {
            weights: spec.weights.clone(),
            covers,
        },
        actions,
    ))
}

/// Universe `{1, 2, 3}` with unit weights; `s1 -> {1, 2}`, `s2 -> {2, 3}`, `s3 -> {3}`.
pub fn small_coverage_spec() -> CoverageSpec {
    CoverageSpec {
        weights: vec![1.0; 3],
        sets: vec![
            ("s1".into(), vec![0, 1]),
            ("s2".into(), vec![1, 2]),
            ("s3".into(), vec![2]),
        ],
    }
}

/// Random spec with 1..=`max_actions` actions over 1..=`max_elements` elements
/// with weights in `[0, 1]`.
pub fn random_coverage_spec<R: Rng + ?Sized>(rng: &mut R, max_actions: usize, max_elements: usize) -> CoverageSpec {
    let elements = rng.random_range(1..=max_elements);
    let actions = rng.random_range(1..=max_actions);
    CoverageSpec {
        weights: (0..elements).map(|_| rng.random_range(0.0..=1.0)).collect(),
        sets: (0..actions)
            .map(|a| {
                let set = (0..elements).filter(|_| rng.random_bool(0.4)).collect();
                (format!("s{}", a + 1), set)
            })
            .collect(),
    }
}
