use super::fluid::{rate_unchecked, spend_rates, EXHAUSTED};
use super::{evaluate_strategy, AdInstance, AllocationStrategy, Configuration, SpendLedger};
use crate::error::Result;
use crate::seqcore::{greedy_continuous, OracleQuality, Proposal, RateOracle};

/// Rates closer than this are considered equal when deciding whether to switch.
const RATE_SLACK: f64 = 1e-12;

/// For every query type, the `d` highest bidders that still have budget and a
/// positive bid, highest bid first; ties go to the lower ad index.
///
/// Query types are independent, so this maximizes `r(s)` over all
/// configurations.
pub fn best_configuration(instance: &AdInstance, remaining: &[f64]) -> Configuration {
    let assignment = (0..instance.type_count())
        .map(|j| {
            let mut candidates: Vec<usize> = (0..instance.ad_count())
                .filter(|&i| remaining[i] > EXHAUSTED && instance.bid(i, j) > 0.0)
                .collect();
            candidates.sort_by(|&a, &b| instance.bid(b, j).total_cmp(&instance.bid(a, j)).then(a.cmp(&b)));
            candidates.truncate(instance.slots());
            candidates
        })
        .collect();
    Configuration::new(instance, assignment).expect("best configuration is valid by construction")
}

/// Incremental oracle for the continuous greedy: proposes the best
/// configuration and holds it for as long as no other configuration has a
/// strictly higher rate. That can only change when an ad runs out of budget.
#[derive(Clone, Copy, Debug)]
pub struct AdOracle<'a> {
    pub instance: &'a AdInstance,
}

impl AdOracle<'_> {
    /// Longest offset over which `config` keeps the best rate, starting from
    /// `remaining`. Infinite if no exhaustion ever makes a better configuration
    /// available.
    fn hold(&self, config: &Configuration, remaining: &[f64]) -> f64 {
        let inst = self.instance;
        let mut remaining = remaining.to_vec();
        let mut elapsed = 0.0;
        loop {
            let rates = spend_rates(inst, config, &remaining);
            let next = rates
                .iter()
                .zip(&remaining)
                .filter(|(&r, _)| r > 0.0)
                .map(|(r, b)| b / r)
                .fold(f64::INFINITY, f64::min);
            if !next.is_finite() {
                return f64::INFINITY;
            }
            elapsed += next;
            for (i, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    let left = remaining[i] - r * next;
                    remaining[i] = if remaining[i] / r <= next || left <= EXHAUSTED { 0.0 } else { left };
                }
            }
            let current = rate_unchecked(inst, config, &remaining);
            let best = rate_unchecked(inst, &best_configuration(inst, &remaining), &remaining);
            if best > current + RATE_SLACK {
                return elapsed;
            }
        }
    }
}

impl RateOracle<Configuration> for AdOracle<'_> {
    fn quality(&self) -> OracleQuality {
        OracleQuality::EXACT
    }

    fn propose(&self, prefix: &AllocationStrategy) -> Result<Proposal<Configuration>> {
        let remaining = evaluate_strategy(self.instance, prefix)?.remaining(&self.instance.budgets());
        let action = best_configuration(self.instance, &remaining);
        let rate = rate_unchecked(self.instance, &action, &remaining);
        let hold = self.hold(&action, &remaining);
        Ok(Proposal { action, rate, hold })
    }
}

/// Greedy allocation over `[0, T)`: play the best configuration, and switch
/// only when a budget exhaustion makes a strictly better one available.
///
/// Every switch coincides with at least one exhaustion, so there are at most
/// `m` switches. When no ad can earn anything the strategy is the empty
/// configuration held for the whole horizon.
pub fn greedy_allocate(instance: &AdInstance) -> Result<(AllocationStrategy, SpendLedger)> {
    let oracle = AdOracle { instance };
    let cap = 10 * (instance.ad_count() + 1);
    let strategy = greedy_continuous(&oracle, instance.horizon(), cap)?;
    let ledger = evaluate_strategy(instance, &strategy)?;
    Ok((strategy, ledger))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{i0, i1};
    use super::super::revenue_rate;
    use super::*;
    use crate::adalloc::Ad;
    use crate::adalloc::QueryType;
    use crate::seqcore::Sequence;

    fn c(inst: &AdInstance, pairs: &[(&str, &[&str])]) -> Configuration {
        Configuration::from_ids(inst, pairs).unwrap()
    }

    /// All configurations of an instance, by enumeration.
    fn all_configurations(inst: &AdInstance) -> Vec<Configuration> {
        let mut per_type: Vec<Vec<Vec<usize>>> = Vec::new();
        for _ in 0..inst.type_count() {
            let mut subsets = Vec::new();
            for mask in 0u32..(1 << inst.ad_count()) {
                let ads: Vec<usize> = (0..inst.ad_count()).filter(|i| mask & (1 << i) != 0).collect();
                if ads.len() <= inst.slots() {
                    subsets.push(ads);
                }
            }
            per_type.push(subsets);
        }
        let mut out = vec![Vec::new()];
        for options in per_type {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Vec<usize>>| {
                    options.iter().map(move |o| {
                        let mut p = prefix.clone();
                        p.push(o.clone());
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|a| Configuration::new(inst, a).unwrap()).collect()
    }

    #[test]
    fn best_configuration_examples() {
        let inst = i1();
        assert_eq!(
            best_configuration(&inst, &inst.budgets()),
            c(&inst, &[("t1", &["a1"]), ("t2", &["a1"])])
        );
        assert_eq!(best_configuration(&inst, &[0.0, 0.5]), c(&inst, &[("t1", &["a2"])]));
        assert!(best_configuration(&inst, &[0.0, 0.0]).is_empty());
    }

    #[test]
    fn best_configuration_maximizes_rate_by_enumeration() {
        let inst = i1();
        for remaining in [[0.5, 0.5], [0.0, 0.5], [0.5, 0.0], [0.0, 0.0]] {
            let best = revenue_rate(&inst, &best_configuration(&inst, &remaining), &remaining).unwrap();
            let top = all_configurations(&inst)
                .iter()
                .map(|cfg| revenue_rate(&inst, cfg, &remaining).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(best, top);
        }
    }

    #[test]
    fn greedy_single_ad() {
        let inst = i0();
        let (h, ledger) = greedy_allocate(&inst).unwrap();
        assert_eq!(h, crate::seqcore::TimedSequence::single(c(&inst, &[("t1", &["a1"])]), 1.0).unwrap());
        assert_eq!(ledger.utility, 1.0);
    }

    #[test]
    fn greedy_worked_instance() {
        let inst = i1();
        let (h, ledger) = greedy_allocate(&inst).unwrap();
        assert_eq!(h.segment_count(), 2);
        assert_eq!(h.segments()[0].action, c(&inst, &[("t1", &["a1"]), ("t2", &["a1"])]));
        assert!((h.segments()[0].duration - 0.5).abs() < 1e-12);
        assert_eq!(h.segments()[1].action, c(&inst, &[("t1", &["a2"])]));
        assert!((h.length() - 1.0).abs() < 1e-12);
        assert!((ledger.utility - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_bids_give_empty_configuration() {
        let inst = AdInstance::new(
            vec![Ad { id: "a".into(), budget: 1.0 }, Ad { id: "b".into(), budget: 2.0 }],
            vec![QueryType { id: "t".into(), prob: 1.0 }],
            vec![vec![0.0], vec![0.0]],
            2,
            3.0,
        )
        .unwrap();
        let (h, ledger) = greedy_allocate(&inst).unwrap();
        assert_eq!(h.segment_count(), 1);
        assert!(h.segments()[0].action.is_empty());
        assert_eq!(h.length(), 3.0);
        assert_eq!(ledger.utility, 0.0);
    }

    #[test]
    fn greedy_keeps_configuration_when_nothing_better_appears() {
        // a2 has no replacement once exhausted, so there is nothing to switch to.
        let inst = AdInstance::new(
            vec![Ad { id: "a1".into(), budget: 5.0 }, Ad { id: "a2".into(), budget: 0.1 }],
            vec![QueryType { id: "t1".into(), prob: 0.5 }, QueryType { id: "t2".into(), prob: 0.5 }],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            1,
            1.0,
        )
        .unwrap();
        let (h, ledger) = greedy_allocate(&inst).unwrap();
        assert_eq!(h.segment_count(), 1);
        assert!((ledger.utility - 0.6).abs() < 1e-12);
    }
}
