//! Greedy maximization of submodular, non-decreasing functions over sequences.
//!
//! The crate is organised around a small sequence algebra ([`seqcore`]) with two
//! concrete applications built on it:
//!
//! * [`adalloc`]: budgeted ad allocation in the fluid (virtual-time) model, with a
//!   greedy allocator that switches configuration only when a budget runs out.
//! * [`qrewrite`]: choosing at most `k` rewrites per query type, solved by a nested
//!   greedy over partial allocations.
//!
//! [`oracle`] holds exact small-instance baselines (enumeration and an exact
//! rational LP) used to certify approximation ratios, and [`stochsim`] replays
//! allocation strategies against discrete i.i.d. query streams.

pub mod adalloc;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod qrewrite;
pub mod seqcore;
pub mod stochsim;

pub use error::{Error, Result};

/// Absolute tolerance used by every inequality check unless stated otherwise.
pub const TOLERANCE: f64 = 1e-9;

/// `1 - e^{-alpha}`: the greedy guarantee for an `alpha`-approximate step oracle.
pub fn greedy_bound(alpha: f64) -> f64 {
    1.0 - (-alpha).exp()
}

/// Guarantee of the nested rewrite greedy, `1 - e^{-(1 - 1/e)}` (about 0.4685).
pub fn rewrite_bound() -> f64 {
    greedy_bound(greedy_bound(1.0))
}
