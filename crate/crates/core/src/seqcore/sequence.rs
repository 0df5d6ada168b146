//! Discrete and timed sequences, their concatenation, refinement and domination.

use std::fmt::Debug;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on lengths of timed sequences.
pub const LENGTH_TOLERANCE: f64 = 1e-12;

/// Tolerance used when re-verifying domination of timed sequences.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

/// Largest number of disjoint windows cut out of a timed sequence by
/// [`Sequence::sample_dominated_with`].
pub const MAX_WINDOWS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Discrete,
    Continuous,
}

/// A finite, ordered set of actions. Order is used for tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionSet<A> {
    actions: Vec<A>,
}

impl<A: Clone + PartialEq + Debug> ActionSet<A> {
    pub fn new(actions: Vec<A>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].contains(a) {
                return Err(Error::DuplicateAction(format!("{a:?}")));
            }
        }
        Ok(ActionSet { actions })
    }

    pub fn actions(&self) -> &[A] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn contains(&self, action: &A) -> bool {
        self.actions.contains(action)
    }

    /// Checks that every item of `seq` belongs to this set.
    pub fn check_discrete(&self, seq: &DiscreteSequence<A>) -> Result<()> {
        match seq.items().iter().find(|a| !self.contains(a)) {
            Some(a) => Err(Error::UnknownAction(format!("{a:?}"))),
            None => Ok(()),
        }
    }

    pub fn check_timed(&self, seq: &TimedSequence<A>) -> Result<()> {
        match seq.segments().iter().find(|s| !self.contains(&s.action)) {
            Some(s) => Err(Error::UnknownAction(format!("{:?}", s.action))),
            None => Ok(()),
        }
    }

    /// Concatenation that also validates membership of both operands.
    pub fn concat_discrete(
        &self,
        a: &DiscreteSequence<A>,
        b: &DiscreteSequence<A>,
    ) -> Result<DiscreteSequence<A>> {
        self.check_discrete(a)?;
        self.check_discrete(b)?;
        Ok(a.concat(b))
    }

    pub fn concat_timed(&self, a: &TimedSequence<A>, b: &TimedSequence<A>) -> Result<TimedSequence<A>> {
        self.check_timed(a)?;
        self.check_timed(b)?;
        Ok(a.concat(b))
    }
}

/// Operations shared by discrete and timed sequences.
pub trait Sequence: Clone + Debug {
    type Action;

    fn kind() -> SequenceKind;

    fn empty() -> Self;

    /// `|A|`: item count for discrete sequences, total duration for timed ones.
    fn length(&self) -> f64;

    /// `self ⊥ other`.
    fn concat(&self, other: &Self) -> Self;

    /// The domination predicate `self ≺ other`.
    fn is_dominated_by(&self, other: &Self) -> bool;

    /// Draws a sequence dominated by `self`.
    fn sample_dominated_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Self;

    /// Seeded variant of [`Sequence::sample_dominated_with`].
    fn sample_dominated(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_dominated_with(&mut rng)
    }

    fn is_empty_sequence(&self) -> bool {
        self.length() == 0.0
    }
}

/// `(s_1, …, s_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteSequence<A> {
    items: Vec<A>,
}

impl<A> Default for DiscreteSequence<A> {
    fn default() -> Self {
        DiscreteSequence { items: Vec::new() }
    }
}

impl<A: Clone + PartialEq + Debug> DiscreteSequence<A> {
    pub fn new(items: Vec<A>) -> Self {
        DiscreteSequence { items }
    }

    pub fn items(&self) -> &[A] {
        &self.items
    }

    pub fn into_items(self) -> Vec<A> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn single(action: A) -> Self {
        DiscreteSequence { items: vec![action] }
    }

    pub fn appended(&self, action: A) -> Self {
        let mut items = self.items.clone();
        items.push(action);
        DiscreteSequence { items }
    }

    /// `A_[x,y]` with 1-based inclusive indices; empty when `[x,y]` misses `[1,k]`.
    pub fn slice(&self, x: i64, y: i64) -> Self {
        let first = x.max(1);
        let last = y.min(self.items.len() as i64);
        if first > last {
            return Self::default();
        }
        DiscreteSequence {
            items: self.items[(first - 1) as usize..last as usize].to_vec(),
        }
    }
}

impl<A: Clone + PartialEq + Debug> Sequence for DiscreteSequence<A> {
    type Action = A;

    fn kind() -> SequenceKind {
        SequenceKind::Discrete
    }

    fn empty() -> Self {
        Self::default()
    }

    fn length(&self) -> f64 {
        self.items.len() as f64
    }

    fn concat(&self, other: &Self) -> Self {
        let mut items = Vec::with_capacity(self.items.len() + other.items.len());
        items.extend_from_slice(&self.items);
        items.extend_from_slice(&other.items);
        DiscreteSequence { items }
    }

    fn is_dominated_by(&self, other: &Self) -> bool {
        let mut rest = other.items.iter();
        self.items.iter().all(|a| rest.any(|b| b == a))
    }

    /// Uniform over the `2^k` subsequences selected by index.
    fn sample_dominated_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        DiscreteSequence {
            items: self
                .items
                .iter()
                .filter(|_| rng.random_bool(0.5))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<A> {
    pub action: A,
    pub duration: f64,
}

/// `((s_1, Δt_1), …, (s_k, Δt_k))` with every `Δt_i > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimedSequence<A> {
    segments: Vec<Segment<A>>,
}

impl<A> Default for TimedSequence<A> {
    fn default() -> Self {
        TimedSequence { segments: Vec::new() }
    }
}

impl<A: Clone + PartialEq + Debug> TimedSequence<A> {
    pub fn new(segments: Vec<Segment<A>>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(Error::InvalidSequence(format!(
                    "segment {i} has non-positive or non-finite duration {}",
                    s.duration
                )));
            }
        }
        Ok(TimedSequence { segments })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (A, f64)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(action, duration)| Segment { action, duration })
                .collect(),
        )
    }

    pub fn single(action: A, duration: f64) -> Result<Self> {
        Self::from_pairs([(action, duration)])
    }

    pub fn segments(&self) -> &[Segment<A>] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Appends `(action, duration)`; a zero duration leaves the sequence unchanged.
    pub fn push(&mut self, action: A, duration: f64) -> Result<()> {
        if duration == 0.0 {
            return Ok(());
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidSequence(format!("bad duration {duration}")));
        }
        self.segments.push(Segment { action, duration });
        Ok(())
    }

    /// `self ⊥ (action, duration)`.
    pub fn extended(&self, action: &A, duration: f64) -> Self {
        let mut out = self.clone();
        if duration > 0.0 {
            out.segments.push(Segment {
                action: action.clone(),
                duration,
            });
        }
        out
    }

    /// The action active at time `t`, i.e. `A(t)`.
    pub fn action_at(&self, t: f64) -> Option<&A> {
        if t < 0.0 {
            return None;
        }
        let mut start = 0.0;
        for s in &self.segments {
            let end = start + s.duration;
            if t < end {
                return Some(&s.action);
            }
            start = end;
        }
        None
    }

    /// `A_[x,y)`: the portion of the sequence inside `[x, y)`, splitting partial segments.
    pub fn slice(&self, x: f64, y: f64) -> Self {
        let first = x.max(0.0);
        let last = y.min(self.length());
        let mut out = Vec::new();
        if first < last {
            let mut start = 0.0;
            for s in &self.segments {
                let end = start + s.duration;
                let lo = start.max(first);
                let hi = end.min(last);
                if hi > lo {
                    out.push(Segment {
                        action: s.action.clone(),
                        duration: hi - lo,
                    });
                }
                if end >= last {
                    break;
                }
                start = end;
            }
        }
        TimedSequence { segments: out }
    }

    /// Adjacent segments with equal actions merged; the canonical representative
    /// of the equivalence class.
    pub fn runs(&self) -> Vec<Segment<A>> {
        let mut runs: Vec<Segment<A>> = Vec::new();
        for s in &self.segments {
            match runs.last_mut() {
                Some(last) if last.action == s.action => last.duration += s.duration,
                _ => runs.push(s.clone()),
            }
        }
        runs
    }

    /// `A ≡ B` up to `tol` on run durations.
    pub fn is_equivalent(&self, other: &Self, tol: f64) -> bool {
        let a = self.runs();
        let b = other.runs();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.action == y.action && (x.duration - y.duration).abs() <= tol)
    }

    /// Domination test with an explicit tolerance on consumed durations.
    ///
    /// Walks `other` once, consuming mass of each run of `self` in order; the
    /// earliest embedding exists iff any embedding exists.
    pub fn is_dominated_by_tol(&self, other: &Self, tol: f64) -> bool {
        let target = self.runs();
        let source = &other.segments;
        let mut idx = 0;
        let mut used = 0.0; // consumed part of source[idx]
        for run in &target {
            let mut need = run.duration;
            while need > tol {
                let Some(seg) = source.get(idx) else {
                    return false;
                };
                if seg.action == run.action {
                    let avail = seg.duration - used;
                    if avail >= need {
                        used += need;
                        need = 0.0;
                    } else {
                        need -= avail;
                        idx += 1;
                        used = 0.0;
                    }
                } else {
                    idx += 1;
                    used = 0.0;
                }
            }
        }
        true
    }

    /// Draws a dominated sequence together with the windows `[x_{2i-1}, x_{2i})`
    /// it was cut from.
    pub fn sample_dominated_windows<R: Rng + ?Sized>(&self, rng: &mut R) -> (Self, Vec<(f64, f64)>) {
        let len = self.length();
        if len == 0.0 {
            return (Self::default(), Vec::new());
        }
        let windows = match rng.random_range(0..8u32) {
            0 => Vec::new(),
            1 => vec![(0.0, len)],
            c => {
                let m = 1 + (c as usize - 2) % MAX_WINDOWS;
                let mut cuts: Vec<f64> = (0..2 * m).map(|_| rng.random_range(0.0..=len)).collect();
                cuts.sort_by(f64::total_cmp);
                cuts.chunks(2)
                    .map(|w| (w[0], w[1]))
                    .filter(|(x, y)| y > x)
                    .collect()
            }
        };
        let seq = windows
            .iter()
            .fold(Self::default(), |acc, &(x, y)| acc.concat(&self.slice(x, y)));
        (seq, windows)
    }
}

impl<A: Clone + PartialEq + Debug> Sequence for TimedSequence<A> {
    type Action = A;

    fn kind() -> SequenceKind {
        SequenceKind::Continuous
    }

    fn empty() -> Self {
        Self::default()
    }

    fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    fn concat(&self, other: &Self) -> Self {
        let mut segments = Vec::with_capacity(self.segments.len() + other.segments.len());
        segments.extend_from_slice(&self.segments);
        segments.extend_from_slice(&other.segments);
        TimedSequence { segments }
    }

    fn is_dominated_by(&self, other: &Self) -> bool {
        self.is_dominated_by_tol(other, DOMINATION_TOLERANCE)
    }

    fn sample_dominated_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        self.sample_dominated_windows(rng).0
    }
}

/// Re-checks a windowed cut: windows strictly ordered inside `[0, |b|]` and `a`
/// equivalent to the concatenation of the corresponding slices of `b`.
pub fn verify_windows<A: Clone + PartialEq + Debug>(
    a: &TimedSequence<A>,
    b: &TimedSequence<A>,
    windows: &[(f64, f64)],
    tol: f64,
) -> bool {
    let mut prev = 0.0;
    for &(x, y) in windows {
        if x < prev || y <= x || y > b.length() + tol {
            return false;
        }
        prev = y;
    }
    let rebuilt = windows
        .iter()
        .fold(TimedSequence::default(), |acc, &(x, y)| acc.concat(&b.slice(x, y)));
    rebuilt.is_equivalent(a, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(items: &[&'static str]) -> DiscreteSequence<&'static str> {
        DiscreteSequence::new(items.to_vec())
    }

    fn t(pairs: &[(&'static str, f64)]) -> TimedSequence<&'static str> {
        TimedSequence::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn concat_examples() {
        assert_eq!(d(&["s1"]).concat(&d(&["s2", "s3"])), d(&["s1", "s2", "s3"]));
        assert_eq!(DiscreteSequence::empty().concat(&d(&["a", "b"])), d(&["a", "b"]));
        assert_eq!(t(&[("s", 1.0)]).concat(&t(&[("s", 2.0)])).length(), 3.0);
    }

    #[test]
    fn concat_checks_membership() {
        let set = ActionSet::new(vec!["s1", "s2"]).unwrap();
        assert!(set.concat_discrete(&d(&["s1"]), &d(&["s2"])).is_ok());
        assert!(matches!(
            set.concat_discrete(&d(&["s1"]), &d(&["zz"])),
            Err(Error::UnknownAction(_))
        ));
        assert!(set.concat_timed(&t(&[("s1", 1.0)]), &t(&[("q", 1.0)])).is_err());
    }

    #[test]
    fn action_set_rejects_empty_and_duplicates() {
        assert!(matches!(ActionSet::<u8>::new(vec![]), Err(Error::EmptyActionSet)));
        assert!(matches!(ActionSet::new(vec![1, 2, 1]), Err(Error::DuplicateAction(_))));
    }

    #[test]
    fn timed_rejects_bad_durations() {
        assert!(TimedSequence::from_pairs([("a", 0.0)]).is_err());
        assert!(TimedSequence::from_pairs([("a", -1.0)]).is_err());
        assert!(TimedSequence::from_pairs([("a", f64::NAN)]).is_err());
    }

    #[test]
    fn slice_examples() {
        let a = t(&[("s", 1.0), ("t", 2.0)]);
        assert_eq!(a.slice(0.5, 1.5), t(&[("s", 0.5), ("t", 0.5)]));
        assert_eq!(t(&[("s", 1.0)]).slice(2.0, 3.0), TimedSequence::empty());
        assert_eq!(d(&["s1", "s2", "s3"]).slice(2, 3), d(&["s2", "s3"]));
        assert_eq!(d(&["s1", "s2"]).slice(5, 9), DiscreteSequence::empty());
        assert_eq!(d(&["s1", "s2"]).slice(-3, 1), d(&["s1"]));
        assert_eq!(a.slice(-1.0, 10.0), a);
        assert_eq!(a.slice(1.0, 3.0), t(&[("t", 2.0)]));
    }

    #[test]
    fn action_at_follows_half_open_segments() {
        let a = t(&[("s", 1.0), ("t", 2.0)]);
        assert_eq!(a.action_at(0.0), Some(&"s"));
        assert_eq!(a.action_at(1.0), Some(&"t"));
        assert_eq!(a.action_at(3.0), None);
    }

    #[test]
    fn equivalence_merges_runs() {
        let a = t(&[("s", 1.0), ("s", 1.0), ("t", 1.0)]);
        let b = t(&[("s", 2.0), ("t", 1.0)]);
        assert!(a.is_equivalent(&b, 1e-12));
        assert!(!a.is_equivalent(&t(&[("s", 2.0)]), 1e-12));
    }

    #[test]
    fn discrete_domination() {
        assert!(d(&["a", "c"]).is_dominated_by(&d(&["a", "b", "c"])));
        assert!(!d(&["c", "a"]).is_dominated_by(&d(&["a", "b", "c"])));
        assert!(DiscreteSequence::<&str>::empty().is_dominated_by(&d(&["a"])));
    }

    #[test]
    fn timed_domination() {
        let b = t(&[("s", 1.0), ("t", 1.0), ("s", 1.0)]);
        assert!(t(&[("s", 1.5)]).is_dominated_by(&b));
        assert!(t(&[("s", 0.5), ("t", 0.2), ("s", 0.3)]).is_dominated_by(&b));
        assert!(!t(&[("s", 2.5)]).is_dominated_by(&b));
        assert!(!t(&[("t", 0.5), ("t", 0.6)]).is_dominated_by(&b));
        assert!(!t(&[("t", 1.0), ("s", 1.0), ("t", 0.1)]).is_dominated_by(&b));
    }

    #[test]
    fn sampled_dominated_cover_edge_cases() {
        let b = d(&["a", "b", "c"]);
        let mut saw_empty = false;
        let mut saw_full = false;
        for seed in 0..200 {
            let a = b.sample_dominated(seed);
            assert!(a.is_dominated_by(&b));
            saw_empty |= a.is_empty();
            saw_full |= a == b;
        }
        assert!(saw_empty && saw_full);

        let tb = t(&[("s", 1.0), ("t", 2.0)]);
        let mut saw_empty = false;
        let mut saw_full = false;
        for seed in 0..200 {
            let a = tb.sample_dominated(seed);
            assert!(a.is_dominated_by(&tb));
            saw_empty |= a.segment_count() == 0;
            saw_full |= a.is_equivalent(&tb, 1e-12);
        }
        assert!(saw_empty && saw_full);
    }

    #[test]
    fn sample_dominated_is_deterministic() {
        let b = t(&[("s", 1.0), ("t", 2.0), ("s", 0.5)]);
        assert_eq!(b.sample_dominated(7), b.sample_dominated(7));
    }
}
