//! Sampling checkers for monotonicity, sequence-submodularity, derivative
//! properties and the local-step bounds.
//!
//! Every sample `i` draws from its own ChaCha8 stream `(seed, i)`, so reports
//! are identical whether samples run sequentially or in parallel.

use std::collections::BTreeMap;
use std::fmt::Debug;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::function::{marginal_value, SequenceFunction};
use super::sequence::{DiscreteSequence, Sequence, TimedSequence};
use crate::error::{Error, Result};

/// RNG for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub property: String,
    pub sample: usize,
    pub witness: BTreeMap<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckReport {
    pub samples_tested: usize,
    pub violations: Vec<Violation>,
    /// How many times each property was actually evaluated, for checkers that
    /// may skip a property on some samples.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub probes: BTreeMap<String, usize>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.samples_tested += other.samples_tested;
        self.violations.extend(other.violations);
        for (k, v) in other.probes {
            *self.probes.entry(k).or_default() += v;
        }
    }
}

fn witness<S: Serialize>(pairs: &[(&str, &S)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), serde_json::to_value(v).unwrap_or(Value::Null)))
        .collect()
}

fn run_samples<F>(samples: usize, seed: u64, f: F) -> Result<CheckReport>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<Violation>> + Sync,
{
    run_probed(samples, seed, |i, rng| Ok((f(i, rng)?, Vec::new())))
}

fn run_probed<F>(samples: usize, seed: u64, f: F) -> Result<CheckReport>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<(Vec<Violation>, Vec<&'static str>)> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|i| f(i, &mut sample_rng(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = CheckReport {
        samples_tested: samples,
        ..CheckReport::default()
    };
    for (violations, probed) in per_sample {
        report.violations.extend(violations);
        for p in probed {
            *report.probes.entry(p.to_string()).or_default() += 1;
        }
    }
    Ok(report)
}

/// Samples `B`, derives `A ≺ B`, and flags `u(A) > u(B) + tol`. Also checks
/// `u(∅) = 0`.
pub fn check_nondecreasing<S, U, G>(u: &U, gen_b: G, samples: usize, seed: u64, tol: f64) -> Result<CheckReport>
where
    S: Sequence + Serialize,
    U: SequenceFunction<S> + Sync + ?Sized,
    G: Fn(&mut ChaCha8Rng) -> S + Sync,
{
    let mut report = run_samples(samples, seed, |i, rng| {
        let b = gen_b(rng);
        let a = b.sample_dominated_with(rng);
        let (ua, ub) = (u.eval(&a)?, u.eval(&b)?);
        Ok(if ua > ub + tol {
            vec![Violation {
                property: "nondecreasing".into(),
                sample: i,
                witness: witness(&[("a", &a), ("b", &b)]),
                lhs: ua,
                rhs: ub,
                gap: ua - ub,
            }]
        } else {
            Vec::new()
        })
    })?;
    let empty = u.eval(&S::empty())?;
    if empty.abs() > tol {
        report.violations.push(Violation {
            property: "empty-is-zero".into(),
            sample: samples,
            witness: BTreeMap::new(),
            lhs: empty,
            rhs: 0.0,
            gap: empty.abs(),
        });
    }
    Ok(report)
}

/// Samples `(B, C)`, derives `A ≺ B`, and flags `u(C|A) < u(C|B) - tol`.
pub fn check_submodular<S, U, GB, GC>(
    u: &U,
    gen_b: GB,
    gen_c: GC,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport>
where
    S: Sequence + Serialize,
    U: SequenceFunction<S> + Sync + ?Sized,
    GB: Fn(&mut ChaCha8Rng) -> S + Sync,
    GC: Fn(&mut ChaCha8Rng) -> S + Sync,
{
    run_samples(samples, seed, |i, rng| {
        let b = gen_b(rng);
        let c = gen_c(rng);
        let a = b.sample_dominated_with(rng);
        let ca = marginal_value(u, &c, &a)?;
        let cb = marginal_value(u, &c, &b)?;
        Ok(if ca < cb - tol {
            vec![Violation {
                property: "submodular".into(),
                sample: i,
                witness: witness(&[("a", &a), ("b", &b), ("c", &c)]),
                lhs: ca,
                rhs: cb,
                gap: cb - ca,
            }]
        } else {
            Vec::new()
        })
    })
}

/// A continuous utility that can also report `u̇_s(δ|A)` and the offsets `δ`
/// where that rate may jump.
pub trait RateEvaluator<A>: Sync {
    fn value(&self, seq: &TimedSequence<A>) -> Result<f64>;

    /// `u̇_s(δ|A)` with the right-limit convention at `δ = 0` and at breakpoints.
    fn rate(&self, action: &A, delta: f64, prefix: &TimedSequence<A>) -> Result<f64>;

    /// Offsets `δ > 0` at which `u̇_s(·|prefix)` may be discontinuous, or `None`
    /// when the evaluator cannot tell.
    fn breakpoints(&self, action: &A, prefix: &TimedSequence<A>) -> Option<Vec<f64>>;
}

/// Sampling parameters for [`check_derivative_props`].
#[derive(Clone, Copy, Debug)]
pub struct DerivativeProbe {
    /// Offsets are drawn from `[0, max_offset]`.
    pub max_offset: f64,
    /// Half-width of the centered finite difference.
    pub step: f64,
    /// Relative tolerance of the finite-difference comparison.
    pub rel_tol: f64,
}

impl DerivativeProbe {
    pub fn new(max_offset: f64) -> Self {
        DerivativeProbe {
            max_offset,
            step: 1e-4 * max_offset.max(1e-3),
            rel_tol: 1e-6,
        }
    }
}

/// Draws an offset in `[lo, hi]` at distance more than `gap` from every breakpoint.
fn smooth_offset<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, breaks: &[f64], gap: f64) -> Option<f64> {
    if hi <= lo {
        return None;
    }
    (0..32)
        .map(|_| rng.random_range(lo..=hi))
        .find(|d| breaks.iter().all(|b| (b - d).abs() > gap))
}

/// Checks, away from reported breakpoints:
///
/// * `u̇_s(δ|A) ≥ u̇_s(δ|B) - tol` for `A ≺ B`;
/// * `u̇_s(δ1|A) ≥ u̇_s(δ2|A) - tol` for `δ1 < δ2`;
/// * `u̇_s(δ|A)` agrees with the centered finite difference of
///   `δ ↦ u(A ⊥ (s, δ))` within `probe.rel_tol`, relative.
pub fn check_derivative_props<A, E, GP, GA>(
    evaluator: &E,
    gen_prefix: GP,
    gen_action: GA,
    samples: usize,
    seed: u64,
    tol: f64,
    probe: DerivativeProbe,
) -> Result<CheckReport>
where
    A: Clone + PartialEq + Debug + Serialize,
    E: RateEvaluator<A> + ?Sized,
    GP: Fn(&mut ChaCha8Rng) -> TimedSequence<A> + Sync,
    GA: Fn(&mut ChaCha8Rng) -> A + Sync,
{
    let h = probe.step;
    run_probed(samples, seed, |i, rng| {
        let b = gen_prefix(rng);
        let a = b.sample_dominated_with(rng);
        let s = gen_action(rng);
        let breaks_a = evaluator.breakpoints(&s, &a).ok_or(Error::MissingBreakpoints)?;
        let breaks_b = evaluator.breakpoints(&s, &b).ok_or(Error::MissingBreakpoints)?;
        let all_breaks: Vec<f64> = breaks_a.iter().chain(&breaks_b).copied().collect();
        let mut out = Vec::new();
        let mut probed = Vec::new();
        let mut flag = |property: &str, lhs: f64, rhs: f64, delta: f64| {
            let mut w = witness(&[("a", &a), ("b", &b)]);
            w.insert("action".into(), serde_json::to_value(&s).unwrap_or(Value::Null));
            w.insert("delta".into(), Value::from(delta));
            out.push(Violation {
                property: property.into(),
                sample: i,
                witness: w,
                lhs,
                rhs,
                gap: (lhs - rhs).abs(),
            });
        };

        // Domination monotonicity, sometimes exactly at the right limit δ = 0.
        let delta = if rng.random_bool(0.25) {
            Some(0.0)
        } else {
            smooth_offset(rng, 0.0, probe.max_offset, &all_breaks, 2.0 * h)
        };
        if let Some(delta) = delta {
            let ra = evaluator.rate(&s, delta, &a)?;
            let rb = evaluator.rate(&s, delta, &b)?;
            probed.push("rate-domination");
            if ra < rb - tol {
                flag("rate-domination", ra, rb, delta);
            }
        }

        // Non-increase in δ.
        let d1 = smooth_offset(rng, 0.0, probe.max_offset, &breaks_a, 2.0 * h);
        let d2 = smooth_offset(rng, 0.0, probe.max_offset, &breaks_a, 2.0 * h);
        if let (Some(x), Some(y)) = (d1, d2) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let (rlo, rhi) = (evaluator.rate(&s, lo, &a)?, evaluator.rate(&s, hi, &a)?);
            probed.push("rate-nonincreasing");
            if rlo < rhi - tol {
                flag("rate-nonincreasing", rlo, rhi, hi);
            }
        }

        // Finite-difference agreement.
        if let Some(delta) = smooth_offset(rng, 2.0 * h, probe.max_offset, &breaks_a, 2.0 * h) {
            let plus = evaluator.value(&a.extended(&s, delta + h))?;
            let minus = evaluator.value(&a.extended(&s, delta - h))?;
            let fd = (plus - minus) / (2.0 * h);
            let r = evaluator.rate(&s, delta, &a)?;
            probed.push("finite-difference");
            let scale = r.abs().max(fd.abs());
            if (fd - r).abs() > probe.rel_tol * scale + 1e-12 {
                flag("finite-difference", fd, r, delta);
            }
        }
        Ok((out, probed))
    })
}

/// Discrete local-step bound: `max_s u(s|A) ≥ u(B|A) / |B| - tol` where the max
/// runs over `candidates(A, B)`. Pairs with `|B| = 0` are skipped.
pub fn check_local_bound_discrete<A, U, G, C>(
    u: &U,
    gen_pair: G,
    candidates: C,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport>
where
    A: Clone + PartialEq + Debug + Serialize,
    U: SequenceFunction<DiscreteSequence<A>> + Sync + ?Sized,
    G: Fn(&mut ChaCha8Rng) -> (DiscreteSequence<A>, DiscreteSequence<A>) + Sync,
    C: Fn(&DiscreteSequence<A>, &DiscreteSequence<A>) -> Vec<A> + Sync,
{
    run_samples(samples, seed, |i, rng| {
        let (a, b) = gen_pair(rng);
        if b.is_empty() {
            return Ok(Vec::new());
        }
        let bound = marginal_value(u, &b, &a)? / b.len() as f64;
        let mut best = f64::NEG_INFINITY;
        for s in candidates(&a, &b) {
            best = best.max(marginal_value(u, &DiscreteSequence::single(s), &a)?);
        }
        Ok(if best < bound - tol {
            vec![Violation {
                property: "local-bound".into(),
                sample: i,
                witness: witness(&[("a", &a), ("b", &b)]),
                lhs: best,
                rhs: bound,
                gap: bound - best,
            }]
        } else {
            Vec::new()
        })
    })
}

/// Continuous local-step bound: `max_s u̇_s(0|A) ≥ u(B|A) / |B| - tol`, with the
/// maximal rate supplied by `max_rate(A)`.
pub fn check_local_bound_continuous<A, U, G, M>(
    u: &U,
    gen_pair: G,
    max_rate: M,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport>
where
    A: Clone + PartialEq + Debug + Serialize,
    U: SequenceFunction<TimedSequence<A>> + Sync + ?Sized,
    G: Fn(&mut ChaCha8Rng) -> (TimedSequence<A>, TimedSequence<A>) + Sync,
    M: Fn(&TimedSequence<A>) -> Result<f64> + Sync,
{
    run_samples(samples, seed, |i, rng| {
        let (a, b) = gen_pair(rng);
        let len = b.length();
        if len <= 0.0 {
            return Ok(Vec::new());
        }
        let bound = marginal_value(u, &b, &a)? / len;
        let best = max_rate(&a)?;
        Ok(if best < bound - tol {
            vec![Violation {
                property: "local-bound".into(),
                sample: i,
                witness: witness(&[("a", &a), ("b", &b)]),
                lhs: best,
                rhs: bound,
                gap: bound - best,
            }]
        } else {
            Vec::new()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_discrete(rng: &mut ChaCha8Rng) -> DiscreteSequence<u8> {
        let n = rng.random_range(0..6);
        DiscreteSequence::new((0..n).map(|_| rng.random_range(0..3)).collect())
    }

    fn random_timed(rng: &mut ChaCha8Rng) -> TimedSequence<u8> {
        let n = rng.random_range(0..4);
        TimedSequence::from_pairs((0..n).map(|_| (rng.random_range(0..3), rng.random_range(0.1..1.0)))).unwrap()
    }

    #[test]
    fn length_is_monotone() {
        let u = |s: &DiscreteSequence<u8>| s.len() as f64;
        let r = check_nondecreasing(&u, random_discrete, 300, 1, 1e-9).unwrap();
        assert!(r.passed());
        assert_eq!(r.samples_tested, 300);
    }

    #[test]
    fn negative_length_is_caught() {
        let u = |s: &DiscreteSequence<u8>| -(s.len() as f64);
        let r = check_nondecreasing(&u, random_discrete, 300, 1, 1e-9).unwrap();
        assert!(!r.passed());
        let v = &r.violations[0];
        let a = v.witness["a"].as_array().unwrap().len();
        let b = v.witness["b"].as_array().unwrap().len();
        assert!(a < b);
    }

    #[test]
    fn nonzero_empty_is_caught() {
        let u = |s: &DiscreteSequence<u8>| 1.0 + s.len() as f64;
        let r = check_nondecreasing(&u, random_discrete, 10, 1, 1e-9).unwrap();
        assert!(r.violations.iter().any(|v| v.property == "empty-is-zero"));
    }

    #[test]
    fn squared_length_is_not_submodular() {
        let u = |s: &DiscreteSequence<u8>| (s.len() * s.len()) as f64;
        let r = check_submodular(&u, random_discrete, random_discrete, 300, 2, 1e-9).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn zero_samples_rejected() {
        let u = |s: &DiscreteSequence<u8>| s.len() as f64;
        assert!(check_nondecreasing(&u, random_discrete, 0, 1, 1e-9).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        let u = |s: &DiscreteSequence<u8>| -(s.len() as f64);
        let a = check_nondecreasing(&u, random_discrete, 100, 9, 1e-9).unwrap();
        let b = check_nondecreasing(&u, random_discrete, 100, 9, 1e-9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    struct ConstantRate(f64);

    impl RateEvaluator<u8> for ConstantRate {
        fn value(&self, seq: &TimedSequence<u8>) -> Result<f64> {
            Ok(self.0 * seq.length())
        }
        fn rate(&self, _: &u8, _: f64, _: &TimedSequence<u8>) -> Result<f64> {
            Ok(self.0)
        }
        fn breakpoints(&self, _: &u8, _: &TimedSequence<u8>) -> Option<Vec<f64>> {
            Some(Vec::new())
        }
    }

    struct Blind;

    impl RateEvaluator<u8> for Blind {
        fn value(&self, _: &TimedSequence<u8>) -> Result<f64> {
            Ok(0.0)
        }
        fn rate(&self, _: &u8, _: f64, _: &TimedSequence<u8>) -> Result<f64> {
            Ok(0.0)
        }
        fn breakpoints(&self, _: &u8, _: &TimedSequence<u8>) -> Option<Vec<f64>> {
            None
        }
    }

    #[test]
    fn constant_rate_passes_derivative_checks() {
        let r = check_derivative_props(
            &ConstantRate(2.5),
            random_timed,
            |rng| rng.random_range(0..3u8),
            200,
            3,
            1e-9,
            DerivativeProbe::new(2.0),
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
    }

    #[test]
    fn missing_breakpoints_is_an_error() {
        let r = check_derivative_props(
            &Blind,
            random_timed,
            |_| 0u8,
            5,
            3,
            1e-9,
            DerivativeProbe::new(1.0),
        );
        assert!(matches!(r, Err(Error::MissingBreakpoints)));
    }

    #[test]
    fn local_bound_on_length() {
        let u = |s: &DiscreteSequence<u8>| s.len() as f64;
        let r = check_local_bound_discrete(
            &u,
            |rng| (random_discrete(rng), random_discrete(rng)),
            |_, _| vec![0, 1, 2],
            200,
            4,
            1e-9,
        )
        .unwrap();
        assert!(r.passed());
    }
}
