//! Generic greedy drivers for discrete and timed sequences.

use std::fmt::Debug;

use super::function::{marginal_value, OracleQuality, SequenceFunction};
use super::sequence::{ActionSet, DiscreteSequence, Sequence, TimedSequence};
use crate::error::{Error, Result};

/// Chooses one candidate given the marginal gain of every action, listed in
/// action-set order.
pub trait StepOracle {
    fn quality(&self) -> OracleQuality;

    fn pick(&self, gains: &[f64]) -> usize;
}

/// Exact argmax; ties go to the earliest action.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactArgmax;

impl StepOracle for ExactArgmax {
    fn quality(&self) -> OracleQuality {
        OracleQuality::EXACT
    }

    fn pick(&self, gains: &[f64]) -> usize {
        argmax_first(gains).unwrap_or(0)
    }
}

/// An adversarial `alpha`-approximate oracle: returns the *weakest* action whose
/// gain is still at least `alpha` times the best gain.
#[derive(Clone, Copy, Debug)]
pub struct WeakestAdmissible {
    pub quality: OracleQuality,
}

impl StepOracle for WeakestAdmissible {
    fn quality(&self) -> OracleQuality {
        self.quality
    }

    fn pick(&self, gains: &[f64]) -> usize {
        let Some(best) = argmax_first(gains) else {
            return 0;
        };
        let threshold = self.quality.alpha() * gains[best];
        let mut pick = best;
        for (i, &g) in gains.iter().enumerate() {
            if g >= threshold && g < gains[pick] {
                pick = i;
            }
        }
        pick
    }
}

/// Index of the first maximal element.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Builds a sequence of exactly `horizon` actions by repeatedly appending the
/// action the oracle picks from the marginal gains `u(s | H)`.
pub fn greedy_discrete<A, U, O>(
    u: &U,
    actions: &ActionSet<A>,
    horizon: usize,
    oracle: &O,
) -> Result<DiscreteSequence<A>>
where
    A: Clone + PartialEq + Debug,
    U: SequenceFunction<DiscreteSequence<A>> + ?Sized,
    O: StepOracle + ?Sized,
{
    if horizon > 0 && actions.is_empty() {
        return Err(Error::EmptyActionSet);
    }
    let mut seq = DiscreteSequence::empty();
    for _ in 0..horizon {
        let gains = actions
            .actions()
            .iter()
            .map(|a| marginal_value(u, &DiscreteSequence::single(a.clone()), &seq))
            .collect::<Result<Vec<_>>>()?;
        let pick = oracle.pick(&gains);
        seq = seq.appended(actions.actions()[pick].clone());
    }
    Ok(seq)
}

/// What an incremental oracle proposes for the next segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal<A> {
    pub action: A,
    /// `u̇_s(0 | H)` for the proposed action.
    pub rate: f64,
    /// Longest duration over which the action stays admissible; may be infinite.
    pub hold: f64,
}

/// Problem-specific oracle for the continuous greedy driver.
///
/// `hold` must guarantee that for every `δ` in `[0, hold)` the proposed action's
/// rate after `H ⊥ (s, δ)` is at least `alpha` times the rate of any action.
pub trait RateOracle<A> {
    fn quality(&self) -> OracleQuality;

    fn propose(&self, prefix: &TimedSequence<A>) -> Result<Proposal<A>>;
}

/// Default segment cap: ten segments per action.
pub fn default_segment_cap(action_count: usize) -> usize {
    10 * action_count.max(1)
}

/// Continuous greedy: appends `(s_i, Δt_i)` proposals until the horizon is
/// filled, truncating the last segment at `horizon`.
pub fn greedy_continuous<A, O>(oracle: &O, horizon: f64, max_segments: usize) -> Result<TimedSequence<A>>
where
    A: Clone + PartialEq + Debug,
    O: RateOracle<A> + ?Sized,
{
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon}")));
    }
    let mut seq = TimedSequence::empty();
    let mut t = 0.0;
    while t < horizon {
        if seq.segment_count() >= max_segments {
            return Err(Error::SegmentCapExceeded { cap: max_segments });
        }
        let proposal = oracle.propose(&seq)?;
        if proposal.hold.is_nan() || proposal.hold <= 0.0 {
            return Err(Error::NonPositiveHold(proposal.hold));
        }
        let left = horizon - t;
        if proposal.hold >= left {
            seq.push(proposal.action, left)?;
            t = horizon;
        } else {
            seq.push(proposal.action, proposal.hold)?;
            t += proposal.hold;
        }
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn weakest_admissible_respects_threshold() {
        let o = WeakestAdmissible {
            quality: OracleQuality::new(0.5).unwrap(),
        };
        assert_eq!(o.pick(&[1.0, 0.4, 0.6, 0.5]), 3);
        assert_eq!(o.pick(&[0.0, 0.0]), 0);
    }

    #[test]
    fn empty_horizon() {
        let set = ActionSet::new(vec!['a']).unwrap();
        let u = |s: &DiscreteSequence<char>| s.len() as f64;
        assert!(greedy_discrete(&u, &set, 0, &ExactArgmax).unwrap().is_empty());
    }

    struct Fixed(f64);

    impl RateOracle<u8> for Fixed {
        fn quality(&self) -> OracleQuality {
            OracleQuality::EXACT
        }
        fn propose(&self, _: &TimedSequence<u8>) -> Result<Proposal<u8>> {
            Ok(Proposal { action: 1, rate: 1.0, hold: self.0 })
        }
    }

    #[test]
    fn continuous_driver_truncates_and_caps() {
        let h = greedy_continuous(&Fixed(0.4), 1.0, 10).unwrap();
        assert_eq!(h.segment_count(), 3);
        assert!((h.length() - 1.0).abs() < 1e-12);
        assert!((h.segments()[2].duration - 0.2).abs() < 1e-12);
        assert!(greedy_continuous(&Fixed(f64::INFINITY), 0.0, 1).unwrap().segment_count() == 0);
        assert!(matches!(
            greedy_continuous(&Fixed(0.1), 1.0, 3),
            Err(Error::SegmentCapExceeded { cap: 3 })
        ));
        assert!(matches!(greedy_continuous(&Fixed(0.0), 1.0, 3), Err(Error::NonPositiveHold(_))));
    }
}
