//! Random instances, configurations and strategies for property checks.

use rand::seq::index::sample;
use rand::Rng;

use super::{Ad, AdInstance, AllocationStrategy, Configuration, QueryType};
use crate::seqcore::TimedSequence;

/// Rounds to two decimals so that exact-rational oracles stay small.
fn cents<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..=hi) * 100.0).round() / 100.0
}

/// Random instance with `ads` ads and `types` query types; about a third of the
/// bids are zero.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, ads: usize, types: usize, slots: usize) -> AdInstance {
    let weights: Vec<u32> = (0..types).map(|_| rng.random_range(1..=4)).collect();
    let total: u32 = weights.iter().sum();
    let query_types = weights
        .iter()
        .enumerate()
        .map(|(j, &w)| QueryType {
            id: format!("t{}", j + 1),
            prob: w as f64 / total as f64,
        })
        .collect();
    let ad_list = (0..ads)
        .map(|i| Ad {
            id: format!("a{}", i + 1),
            budget: cents(rng, 0.05, 1.0),
        })
        .collect();
    let bids = (0..ads)
        .map(|_| {
            (0..types)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { cents(rng, 0.05, 2.0) })
                .collect()
        })
        .collect();
    let horizon = cents(rng, 0.5, 2.0);
    AdInstance::new(ad_list, query_types, bids, slots.max(1), horizon).expect("generated instance is valid")
}

/// Random instance within the given size bounds, with `ads * types <= max_cells`.
pub fn random_bounded_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_ads: usize,
    max_types: usize,
    max_slots: usize,
    max_cells: usize,
) -> AdInstance {
    loop {
        let m = rng.random_range(1..=max_ads);
        let n = rng.random_range(1..=max_types);
        if m * n <= max_cells {
            let d = rng.random_range(1..=max_slots);
            return random_instance(rng, m, n, d);
        }
    }
}

/// Random configuration: every type gets between 0 and `d` distinct ads.
pub fn random_configuration<R: Rng + ?Sized>(rng: &mut R, instance: &AdInstance) -> Configuration {
    let m = instance.ad_count();
    let assignment = (0..instance.type_count())
        .map(|_| {
            let k = rng.random_range(0..=instance.slots().min(m));
            sample(rng, m, k).into_vec()
        })
        .collect();
    Configuration::new(instance, assignment).expect("sampled configuration is valid")
}

/// Random strategy of up to `max_segments` segments with total length at most
/// the horizon.
pub fn random_strategy<R: Rng + ?Sized>(
    rng: &mut R,
    instance: &AdInstance,
    max_segments: usize,
) -> AllocationStrategy {
    let k = rng.random_range(0..=max_segments);
    let budget = instance.horizon();
    let mut used = 0.0;
    let mut seq = TimedSequence::default();
    for _ in 0..k {
        let left = budget - used;
        if left <= 1e-6 {
            break;
        }
        let d = rng.random_range(0.0..left).max(1e-6).min(left);
        seq.push(random_configuration(rng, instance), d).expect("positive duration");
        used += d;
    }
    seq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{sample_rng, Sequence};

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = sample_rng(5, 0);
        for _ in 0..50 {
            let inst = random_bounded_instance(&mut rng, 4, 4, 2, 12);
            assert!(inst.ad_count() * inst.type_count() <= 12);
            let h = random_strategy(&mut rng, &inst, 4);
            assert!(h.length() <= inst.horizon() + 1e-12);
            for seg in h.segments() {
                inst.check_configuration(&seg.action).unwrap();
            }
        }
    }
}
