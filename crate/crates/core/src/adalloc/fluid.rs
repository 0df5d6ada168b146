use serde::Serialize;

use super::{AdInstance, AllocationStrategy, Configuration};
use crate::error::Result;
use crate::seqcore::{RateEvaluator, Sequence, SequenceFunction, TimedSequence};

/// Budgets at or below this are treated as exhausted.
pub const EXHAUSTED: f64 = 1e-12;

fn live(remaining: f64) -> bool {
    remaining > EXHAUSTED
}

/// Per-ad spend rates `ρ_i = Σ_{j : i ∈ Q_j(s)} q_j p_ij`; exhausted ads get 0.
pub fn spend_rates(instance: &AdInstance, config: &Configuration, remaining: &[f64]) -> Vec<f64> {
    let mut rates = vec![0.0; instance.ad_count()];
    for (j, ads) in config.assignment().iter().enumerate() {
        let q = instance.prob(j);
        for &i in ads {
            if live(remaining[i]) {
                rates[i] += q * instance.bid(i, j);
            }
        }
    }
    rates
}

/// `r(s)` restricted to ads that still have budget.
pub fn revenue_rate(instance: &AdInstance, config: &Configuration, remaining: &[f64]) -> Result<f64> {
    instance.check_configuration(config)?;
    Ok(rate_unchecked(instance, config, remaining))
}

pub(super) fn rate_unchecked(instance: &AdInstance, config: &Configuration, remaining: &[f64]) -> f64 {
    spend_rates(instance, config, remaining).iter().sum()
}

/// Outcome of playing a strategy in the fluid model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpendLedger {
    /// Money extracted from each ad.
    pub spent: Vec<f64>,
    /// `u(H) = Σ_i spent_i`.
    pub utility: f64,
    /// Times at which the spend-rate vector changed, ascending.
    pub breakpoints: Vec<f64>,
    /// Time at which each ad ran out of budget, if it did.
    pub exhausted_at: Vec<Option<f64>>,
}

impl SpendLedger {
    pub(crate) fn from_remaining(
        budgets: &[f64],
        remaining: &[f64],
        mut breakpoints: Vec<f64>,
        exhausted_at: Vec<Option<f64>>,
    ) -> Self {
        let spent: Vec<f64> = budgets
            .iter()
            .zip(remaining)
            .map(|(b, r)| (b - r).clamp(0.0, *b))
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        SpendLedger {
            utility: spent.iter().sum(),
            spent,
            breakpoints,
            exhausted_at,
        }
    }

    pub fn remaining(&self, budgets: &[f64]) -> Vec<f64> {
        budgets.iter().zip(&self.spent).map(|(b, s)| b - s).collect()
    }
}

/// Plays `config` for `duration` starting at time `start`, in place.
///
/// Ads are independent in the fluid model: each live ad spends at its own rate
/// until its budget is gone, so exhaustion times are `remaining_i / ρ_i`.
/// Returns the spend rates in effect at the end of the interval.
fn play(
    instance: &AdInstance,
    config: &Configuration,
    start: f64,
    duration: f64,
    remaining: &mut [f64],
    exhausted_at: &mut [Option<f64>],
    events: &mut Vec<f64>,
) -> Vec<f64> {
    let mut rates = spend_rates(instance, config, remaining);
    for (i, rate) in rates.iter_mut().enumerate() {
        if *rate <= 0.0 {
            continue;
        }
        let demand = *rate * duration;
        if demand >= remaining[i] || remaining[i] - demand <= EXHAUSTED {
            let tau = (remaining[i] / *rate).min(duration);
            remaining[i] = 0.0;
            exhausted_at[i] = Some(start + tau);
            events.push(start + tau);
            *rate = 0.0;
        } else {
            remaining[i] -= demand;
        }
    }
    rates
}

/// `u(H)` with every rate change recorded.
pub fn evaluate_strategy(instance: &AdInstance, strategy: &AllocationStrategy) -> Result<SpendLedger> {
    let budgets = instance.budgets();
    let mut remaining = budgets.clone();
    let mut exhausted_at = vec![None; instance.ad_count()];
    let mut events = Vec::new();
    let total = strategy.length();
    let mut t = 0.0;
    let mut previous: Option<Vec<f64>> = None;
    for seg in strategy.segments() {
        instance.check_configuration(&seg.action)?;
        let opening = spend_rates(instance, &seg.action, &remaining);
        if previous.as_ref().is_some_and(|p| *p != opening) {
            events.push(t);
        }
        previous = Some(play(
            instance,
            &seg.action,
            t,
            seg.duration,
            &mut remaining,
            &mut exhausted_at,
            &mut events,
        ));
        t += seg.duration;
    }
    events.retain(|&e| e < total - 1e-12);
    Ok(SpendLedger::from_remaining(&budgets, &remaining, events, exhausted_at))
}

/// `u̇_s(δ|A)`: the revenue rate of `config` after playing `prefix ⊥ (config, δ)`.
pub fn marginal_rate(
    instance: &AdInstance,
    config: &Configuration,
    delta: f64,
    prefix: &AllocationStrategy,
) -> Result<f64> {
    let played = prefix.extended(config, delta.max(0.0));
    let ledger = evaluate_strategy(instance, &played)?;
    revenue_rate(instance, config, &ledger.remaining(&instance.budgets()))
}

/// The ad-allocation utility as a continuous sequence function.
#[derive(Clone, Copy, Debug)]
pub struct AdUtility<'a> {
    pub instance: &'a AdInstance,
}

impl<'a> AdUtility<'a> {
    pub fn new(instance: &'a AdInstance) -> Self {
        AdUtility { instance }
    }

    pub fn remaining_after(&self, prefix: &AllocationStrategy) -> Result<Vec<f64>> {
        Ok(evaluate_strategy(self.instance, prefix)?.remaining(&self.instance.budgets()))
    }
}

impl SequenceFunction<AllocationStrategy> for AdUtility<'_> {
    fn eval(&self, seq: &AllocationStrategy) -> Result<f64> {
        Ok(evaluate_strategy(self.instance, seq)?.utility)
    }
}

impl RateEvaluator<Configuration> for AdUtility<'_> {
    fn value(&self, seq: &TimedSequence<Configuration>) -> Result<f64> {
        self.eval(seq)
    }

    fn rate(&self, action: &Configuration, delta: f64, prefix: &TimedSequence<Configuration>) -> Result<f64> {
        marginal_rate(self.instance, action, delta, prefix)
    }

    /// Exhaustion offsets of the ads `action` spends from, after `prefix`.
    fn breakpoints(&self, action: &Configuration, prefix: &TimedSequence<Configuration>) -> Option<Vec<f64>> {
        let remaining = self.remaining_after(prefix).ok()?;
        let rates = spend_rates(self.instance, action, &remaining);
        let mut out: Vec<f64> = rates
            .iter()
            .zip(&remaining)
            .filter(|(&r, _)| r > 0.0)
            .map(|(r, b)| b / r)
            .collect();
        out.sort_by(f64::total_cmp);
        Some(out)
    }
}
