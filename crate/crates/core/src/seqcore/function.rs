use serde::Serialize;

use super::sequence::Sequence;
use crate::error::{Error, Result};

/// A real-valued utility over sequences of one kind.
///
/// Evaluation must be deterministic and free of side effects. `u(∅) = 0` is not
/// enforced here; [`super::check::check_nondecreasing`] verifies it.
pub trait SequenceFunction<S> {
    fn eval(&self, seq: &S) -> Result<f64>;
}

impl<S, F> SequenceFunction<S> for F
where
    F: Fn(&S) -> f64,
{
    fn eval(&self, seq: &S) -> Result<f64> {
        Ok(self(seq))
    }
}

/// `u(b | a) = u(a ⊥ b) - u(a)`.
pub fn marginal_value<S, U>(u: &U, b: &S, a: &S) -> Result<f64>
where
    S: Sequence,
    U: SequenceFunction<S> + ?Sized,
{
    Ok(u.eval(&a.concat(b))? - u.eval(a)?)
}

/// Quality `alpha ∈ (0, 1]` of an incremental oracle.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct OracleQuality(f64);

impl OracleQuality {
    pub const EXACT: OracleQuality = OracleQuality(1.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(OracleQuality(alpha))
        } else {
            Err(Error::InvalidArgument(format!("oracle quality {alpha} outside (0, 1]")))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// `1 - e^{-alpha}`.
    pub fn guarantee(self) -> f64 {
        crate::greedy_bound(self.0)
    }
}
