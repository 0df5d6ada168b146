//! Random rewrite instances and plans.

use rand::seq::index::sample;
use rand::Rng;

use super::{PartialAllocation, Rewrite, RewriteInstance, RewritePlan};
use crate::adalloc::sample::random_instance;

/// Random rewrite instance; every rewrite reaches at least one ad.
pub fn random_rewrite_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_ads: usize,
    max_types: usize,
    max_rewrites: usize,
    max_k: usize,
) -> RewriteInstance {
    let m = rng.random_range(1..=max_ads);
    let n = rng.random_range(1..=max_types);
    let d = rng.random_range(1..=2);
    let base = random_instance(rng, m, n, d);
    let count = rng.random_range(1..=max_rewrites);
    let rewrites = (0..count)
        .map(|r| {
            let size = rng.random_range(1..=m);
            let mut ads = sample(rng, m, size).into_vec();
            ads.sort_unstable();
            Rewrite {
                id: format!("r{}", r + 1),
                ads,
            }
        })
        .collect();
    let k = rng.random_range(1..=max_k);
    RewriteInstance::new(base, rewrites, k).expect("generated rewrite instance is valid")
}

/// Random plan of up to `max_len` tuples with random rewrite subsets and caps
/// between zero and the full budget.
pub fn random_plan<R: Rng + ?Sized>(rng: &mut R, instance: &RewriteInstance, max_len: usize) -> RewritePlan {
    let base = instance.base();
    let len = rng.random_range(0..=max_len);
    let items = (0..len)
        .map(|_| {
            let j = rng.random_range(0..base.type_count());
            let size = rng.random_range(0..=instance.effective_k());
            let rewrites = sample(rng, instance.rewrites().len(), size).into_vec();
            let caps = base
                .budgets()
                .iter()
                .map(|&b| if rng.random_bool(0.5) { b } else { b * rng.random_range(0.0..=1.0) })
                .collect();
            PartialAllocation::new(j, rewrites, caps)
        })
        .collect();
    RewritePlan::new(items)
}
