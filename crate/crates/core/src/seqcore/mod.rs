//! Sequence algebra, greedy drivers and property checkers.

pub mod check;
pub mod function;
pub mod greedy;
pub mod sequence;

pub use check::{
    check_derivative_props, check_local_bound_continuous, check_local_bound_discrete, check_nondecreasing,
    check_submodular, sample_rng, CheckReport, DerivativeProbe, RateEvaluator, Violation,
};
pub use function::{marginal_value, OracleQuality, SequenceFunction};
pub use greedy::{
    argmax_first, default_segment_cap, greedy_continuous, greedy_discrete, ExactArgmax, Proposal, RateOracle,
    StepOracle, WeakestAdmissible,
};
pub use sequence::{
    verify_windows, ActionSet, DiscreteSequence, Segment, Sequence, SequenceKind, TimedSequence,
};
