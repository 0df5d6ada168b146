//! Query rewriting: pick at most `k` rewrites per query type so that the ad
//! allocator, restricted to ads reachable through the chosen rewrites, earns
//! as much as possible.
//!
//! A solution is written as a sequence of partial allocations `(j, Y_j, caps)`.
//! Its utility plays the tuples in order: each one runs the single-type greedy
//! allocator for type `j` over the whole horizon, restricted to the ads of
//! `Y_j` and to `min(remaining budget, cap)` per ad, then deducts what it spent.

pub mod sample;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::adalloc::{json_field, Ad, AdInstance, InstanceFile, QueryType, SpendLedger, EXHAUSTED};
use crate::error::{Error, Result};
use crate::seqcore::{DiscreteSequence, SequenceFunction};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rewrite {
    pub id: String,
    /// `W_r`, as ad indices.
    pub ads: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewriteInstance {
    base: AdInstance,
    rewrites: Vec<Rewrite>,
    k: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewriteSpec {
    pub id: String,
    pub ads: Vec<String>,
}

/// On-disk form: the ad-instance fields plus `rewrites` and `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteFile {
    pub ads: Vec<Ad>,
    pub query_types: Vec<QueryType>,
    #[serde(default)]
    pub bids: BTreeMap<String, BTreeMap<String, f64>>,
    pub slots: i64,
    pub horizon: f64,
    pub rewrites: Vec<RewriteSpec>,
    pub k: i64,
}

impl RewriteInstance {
    pub fn new(base: AdInstance, rewrites: Vec<Rewrite>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::schema("k", "must be >= 1"));
        }
        let mut ids = HashSet::new();
        for r in &rewrites {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::schema("rewrites.id", format!("duplicate id `{}`", r.id)));
            }
            if r.ads.is_empty() {
                return Err(Error::schema(format!("rewrites.{}.ads", r.id), "must be non-empty"));
            }
            if let Some(&bad) = r.ads.iter().find(|&&i| i >= base.ad_count()) {
                return Err(Error::schema(format!("rewrites.{}.ads", r.id), format!("unknown ad #{bad}")));
            }
        }
        Ok(RewriteInstance { base, rewrites, k })
    }

    pub fn from_file(file: RewriteFile) -> Result<Self> {
        let base = AdInstance::from_file(InstanceFile {
            ads: file.ads,
            query_types: file.query_types,
            bids: file.bids,
            slots: file.slots,
            horizon: file.horizon,
        })?;
        if file.k < 1 {
            return Err(Error::schema("k", "must be >= 1"));
        }
        let rewrites = file
            .rewrites
            .into_iter()
            .map(|r| {
                let ads = r
                    .ads
                    .iter()
                    .map(|a| {
                        base.ad_index(a)
                            .map_err(|_| Error::schema(format!("rewrites.{}.ads", r.id), format!("unknown ad `{a}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Rewrite { id: r.id, ads })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, rewrites, file.k as usize)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: RewriteFile = serde_json::from_str(s).map_err(|e| Error::schema(json_field(&e), e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> RewriteFile {
        let base = self.base.to_file();
        RewriteFile {
            ads: base.ads,
            query_types: base.query_types,
            bids: base.bids,
            slots: base.slots,
            horizon: base.horizon,
            rewrites: self
                .rewrites
                .iter()
                .map(|r| RewriteSpec {
                    id: r.id.clone(),
                    ads: r.ads.iter().map(|&i| self.base.ads()[i].id.clone()).collect(),
                })
                .collect(),
            k: self.k as i64,
        }
    }

    pub fn base(&self) -> &AdInstance {
        &self.base
    }

    pub fn rewrites(&self) -> &[Rewrite] {
        &self.rewrites
    }

    /// Requested number of rewrites per type.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `min(k, |R|)`.
    pub fn effective_k(&self) -> usize {
        self.k.min(self.rewrites.len())
    }

    /// Mask of ads reachable through `rewrites`: `∪_{r ∈ Y} W_r`.
    pub fn allowed_ads(&self, rewrites: &[usize]) -> Vec<bool> {
        let mut allowed = vec![false; self.base.ad_count()];
        for &r in rewrites {
            for &i in &self.rewrites[r].ads {
                allowed[i] = true;
            }
        }
        allowed
    }
}

/// `(j, Y_j, B^j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartialAllocation {
    pub query_type: usize,
    /// Indices into the instance's rewrites, ascending.
    pub rewrites: Vec<usize>,
    /// Per-ad budget caps.
    pub caps: Vec<f64>,
}

impl PartialAllocation {
    pub fn new(query_type: usize, mut rewrites: Vec<usize>, caps: Vec<f64>) -> Self {
        rewrites.sort_unstable();
        rewrites.dedup();
        PartialAllocation {
            query_type,
            rewrites,
            caps,
        }
    }
}

pub type RewritePlan = DiscreteSequence<PartialAllocation>;

/// Fluid allocation of type-`j` queries only, over `[0, horizon)`.
///
/// The `d` allowed ads with the highest bids and budget left are shown; when
/// one runs out of its cap the next-best allowed ad takes its slot. This is
/// optimal for one slot. With `d >= 2` it can lose to a schedule that keeps a
/// low bidder with a large budget running from the start.
pub fn single_type_allocate(
    instance: &AdInstance,
    query_type: usize,
    allowed: &[bool],
    caps: &[f64],
    horizon: f64,
) -> Result<SpendLedger> {
    if query_type >= instance.type_count() {
        return Err(Error::UnknownId {
            kind: "query type",
            id: format!("#{query_type}"),
        });
    }
    if allowed.len() != instance.ad_count() || caps.len() != instance.ad_count() {
        return Err(Error::InvalidArgument("allowed/caps must have one entry per ad".into()));
    }
    let j = query_type;
    let q = instance.prob(j);
    let mut candidates: Vec<usize> = (0..instance.ad_count())
        .filter(|&i| allowed[i] && instance.bid(i, j) > 0.0)
        .collect();
    candidates.sort_by(|&a, &b| instance.bid(b, j).total_cmp(&instance.bid(a, j)).then(a.cmp(&b)));

    let caps: Vec<f64> = caps.iter().map(|c| c.max(0.0)).collect();
    let mut remaining = caps.clone();
    let mut exhausted_at = vec![None; instance.ad_count()];
    let mut events = Vec::new();
    let mut t = 0.0;
    if q > 0.0 {
        while t < horizon {
            let active: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| remaining[i] > EXHAUSTED)
                .take(instance.slots())
                .collect();
            if active.is_empty() {
                break;
            }
            let tau = active
                .iter()
                .map(|&i| remaining[i] / (q * instance.bid(i, j)))
                .fold(f64::INFINITY, f64::min);
            let step = tau.min(horizon - t);
            for &i in &active {
                let rate = q * instance.bid(i, j);
                let left = remaining[i] - rate * step;
                if remaining[i] / rate <= step || left <= EXHAUSTED {
                    remaining[i] = 0.0;
                    exhausted_at[i] = Some(t + step);
                } else {
                    remaining[i] = left;
                }
            }
            if tau < horizon - t {
                events.push(t + tau);
                t += tau;
            } else {
                t = horizon;
            }
        }
    }
    Ok(SpendLedger::from_remaining(&caps, &remaining, events, exhausted_at))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanEvaluation {
    pub utility: f64,
    /// `𝔅(H)`: budgets left after the whole plan.
    pub remaining: Vec<f64>,
    /// Spend of every tuple, per ad.
    pub consumed: Vec<Vec<f64>>,
    /// Query types that appear more than once in the plan.
    pub duplicate_types: Vec<usize>,
}

/// Utility of a rewrite plan; see the module docs.
pub fn evaluate_plan(instance: &RewriteInstance, plan: &RewritePlan) -> Result<PlanEvaluation> {
    let base = &instance.base;
    let mut remaining = base.budgets();
    let mut utility = 0.0;
    let mut consumed = Vec::with_capacity(plan.len());
    let mut seen = HashSet::new();
    let mut duplicate_types = Vec::new();
    for tuple in plan.items() {
        if let Some(&bad) = tuple.rewrites.iter().find(|&&r| r >= instance.rewrites.len()) {
            return Err(Error::UnknownId {
                kind: "rewrite",
                id: format!("#{bad}"),
            });
        }
        if tuple.caps.len() != base.ad_count() {
            return Err(Error::InvalidArgument("caps must have one entry per ad".into()));
        }
        if !seen.insert(tuple.query_type) && !duplicate_types.contains(&tuple.query_type) {
            duplicate_types.push(tuple.query_type);
        }
        let caps: Vec<f64> = remaining.iter().zip(&tuple.caps).map(|(r, c)| r.min(*c)).collect();
        let allowed = instance.allowed_ads(&tuple.rewrites);
        let ledger = single_type_allocate(base, tuple.query_type, &allowed, &caps, base.horizon())?;
        for (r, s) in remaining.iter_mut().zip(&ledger.spent) {
            *r = (*r - s).max(0.0);
        }
        utility += ledger.utility;
        consumed.push(ledger.spent);
    }
    Ok(PlanEvaluation {
        utility,
        remaining,
        consumed,
        duplicate_types,
    })
}

/// The plan utility as a discrete sequence function.
#[derive(Clone, Copy, Debug)]
pub struct RewriteUtility<'a> {
    pub instance: &'a RewriteInstance,
}

impl SequenceFunction<RewritePlan> for RewriteUtility<'_> {
    fn eval(&self, seq: &RewritePlan) -> Result<f64> {
        Ok(evaluate_plan(self.instance, seq)?.utility)
    }
}

/// Gain of appending `(j, Y, remaining)` to a plan that left `remaining`.
pub fn tuple_gain(instance: &RewriteInstance, query_type: usize, rewrites: &[usize], remaining: &[f64]) -> Result<SpendLedger> {
    let base = &instance.base;
    single_type_allocate(
        base,
        query_type,
        &instance.allowed_ads(rewrites),
        remaining,
        base.horizon(),
    )
}

/// Inner greedy for one query type: add, `k` times, the rewrite with the largest
/// marginal gain (ties to the earliest rewrite). Returns the chosen rewrites in
/// selection order and the gain of the final set.
pub fn inner_greedy(instance: &RewriteInstance, query_type: usize, remaining: &[f64]) -> Result<(Vec<usize>, f64)> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut gain = 0.0;
    for _ in 0..instance.effective_k() {
        let mut best: Option<(usize, f64)> = None;
        for r in (0..instance.rewrites.len()).filter(|r| !chosen.contains(r)) {
            let mut candidate = chosen.clone();
            candidate.push(r);
            let delta = tuple_gain(instance, query_type, &candidate, remaining)?.utility;
            if best.is_none_or(|(_, b)| delta > b) {
                best = Some((r, delta));
            }
        }
        match best {
            Some((r, delta)) => {
                chosen.push(r);
                gain = delta;
            }
            None => break,
        }
    }
    Ok((chosen, gain))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewriteOutcome {
    pub plan: RewritePlan,
    pub utility: f64,
    pub warnings: Vec<String>,
}

/// Nested greedy: at every outer step, build the best rewrite set of each
/// unassigned type with [`inner_greedy`], append the type with the largest gain
/// (ties to input order) with caps equal to what it actually spent, and deduct
/// that spend from the budgets.
pub fn greedy_rewrite(instance: &RewriteInstance) -> Result<RewriteOutcome> {
    let base = &instance.base;
    let mut warnings = Vec::new();
    if instance.k > instance.rewrites.len() {
        warnings.push(format!(
            "k = {} exceeds the number of rewrites ({}); clamped",
            instance.k,
            instance.rewrites.len()
        ));
    }
    let mut remaining = base.budgets();
    let mut unassigned: Vec<usize> = (0..base.type_count()).collect();
    let mut plan = RewritePlan::default();
    let mut utility = 0.0;
    while !unassigned.is_empty() {
        let mut best: Option<(usize, Vec<usize>, f64)> = None;
        for (pos, &j) in unassigned.iter().enumerate() {
            let (rewrites, gain) = inner_greedy(instance, j, &remaining)?;
            if best.as_ref().is_none_or(|(_, _, b)| gain > *b) {
                best = Some((pos, rewrites, gain));
            }
        }
        let (pos, rewrites, _) = best.expect("unassigned is non-empty");
        let j = unassigned.remove(pos);
        let spent = tuple_gain(instance, j, &rewrites, &remaining)?;
        for (r, s) in remaining.iter_mut().zip(&spent.spent) {
            *r = (*r - s).max(0.0);
        }
        utility += spent.utility;
        plan = plan.appended(PartialAllocation::new(j, rewrites, spent.spent));
    }
    Ok(RewriteOutcome {
        plan,
        utility,
        warnings,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::i3;
    use super::*;

    fn full(inst: &RewriteInstance) -> Vec<f64> {
        inst.base().budgets()
    }

    #[test]
    fn single_type_examples() {
        let inst = i3(1);
        let base = inst.base();
        let l = single_type_allocate(base, 0, &[true, false], &[0.4, 1.0], 1.0).unwrap();
        assert!((l.spent[0] - 0.4).abs() < 1e-12);
        let l = single_type_allocate(base, 0, &[true, true], &full(&inst), 1.0).unwrap();
        assert!((l.spent[0] - 0.4).abs() < 1e-12);
        assert!((l.spent[1] - 0.3).abs() < 1e-12);
        assert!((l.utility - 0.7).abs() < 1e-12);
        assert_eq!(l.breakpoints.len(), 1);
        let l = single_type_allocate(base, 0, &[false, false], &full(&inst), 1.0).unwrap();
        assert_eq!(l.utility, 0.0);
        assert!(single_type_allocate(base, 3, &[true, true], &full(&inst), 1.0).is_err());
    }

    #[test]
    fn top_d_is_not_optimal_with_several_slots() {
        let base = AdInstance::new(
            vec![
                Ad { id: "a1".into(), budget: 0.36 },
                Ad { id: "a2".into(), budget: 0.59 },
                Ad { id: "a3".into(), budget: 0.09 },
                Ad { id: "a4".into(), budget: 0.43 },
            ],
            vec![QueryType { id: "t1".into(), prob: 1.0 }],
            vec![vec![0.57], vec![1.54], vec![0.5], vec![0.39]],
            3,
            0.99,
        )
        .unwrap();
        let l = single_type_allocate(&base, 0, &[true; 4], &base.budgets(), 0.99).unwrap();
        // a4 only starts when a3 runs out at 0.18
        assert!((l.utility - 1.3559).abs() < 1e-9);
        let lp = crate::oracle::lp_opt_fluid(&base, None).unwrap().value;
        assert!((lp - 1.4261).abs() < 1e-9);
    }

    #[test]
    fn evaluate_plan_examples() {
        let inst = i3(2);
        let one = RewritePlan::new(vec![PartialAllocation::new(0, vec![1], full(&inst))]);
        assert!((evaluate_plan(&inst, &one).unwrap().utility - 0.5).abs() < 1e-12);
        let both = RewritePlan::new(vec![PartialAllocation::new(0, vec![0, 1], full(&inst))]);
        assert!((evaluate_plan(&inst, &both).unwrap().utility - 0.7).abs() < 1e-12);
        let empty = evaluate_plan(&inst, &RewritePlan::default()).unwrap();
        assert_eq!(empty.utility, 0.0);
        assert_eq!(empty.remaining, full(&inst));
    }

    #[test]
    fn caps_limit_a_tuple() {
        let inst = i3(2);
        let plan = RewritePlan::new(vec![
            PartialAllocation::new(0, vec![0, 1], vec![0.1, 0.2]),
            PartialAllocation::new(0, vec![0, 1], full(&inst)),
        ]);
        let e = evaluate_plan(&inst, &plan).unwrap();
        assert!((e.consumed[0][0] - 0.1).abs() < 1e-12);
        assert!((e.consumed[0][1] - 0.2).abs() < 1e-12);
        assert_eq!(e.duplicate_types, vec![0]);
        assert!(e.utility <= inst.base().total_budget() + 1e-9);
    }

    #[test]
    fn greedy_examples() {
        let out = greedy_rewrite(&i3(1)).unwrap();
        assert_eq!(out.plan.len(), 1);
        assert_eq!(out.plan.items()[0].rewrites, vec![1]);
        assert!((out.utility - 0.5).abs() < 1e-12);

        let out = greedy_rewrite(&i3(2)).unwrap();
        assert_eq!(out.plan.items()[0].rewrites, vec![0, 1]);
        assert!((out.utility - 0.7).abs() < 1e-12);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn oversized_k_is_clamped_with_warning() {
        let out = greedy_rewrite(&i3(5)).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!((out.utility - 0.7).abs() < 1e-12);
    }

    #[test]
    fn greedy_utility_matches_plan_evaluation() {
        let inst = i3(2);
        let out = greedy_rewrite(&inst).unwrap();
        let e = evaluate_plan(&inst, &out.plan).unwrap();
        assert!((e.utility - out.utility).abs() < 1e-12);
    }

    #[test]
    fn zero_bids_cover_every_type() {
        let base = AdInstance::new(
            vec![Ad { id: "a".into(), budget: 1.0 }],
            vec![QueryType { id: "t1".into(), prob: 0.5 }, QueryType { id: "t2".into(), prob: 0.5 }],
            vec![vec![0.0, 0.0]],
            1,
            1.0,
        )
        .unwrap();
        let inst = RewriteInstance::new(base, vec![Rewrite { id: "r".into(), ads: vec![0] }], 1).unwrap();
        let out = greedy_rewrite(&inst).unwrap();
        assert_eq!(out.utility, 0.0);
        let mut types: Vec<usize> = out.plan.items().iter().map(|t| t.query_type).collect();
        types.sort();
        assert_eq!(types, vec![0, 1]);
    }

    #[test]
    fn json_schema() {
        let json = r#"{
            "ads": [{"id": "a1", "budget": 0.4}, {"id": "a2", "budget": 1.0}],
            "query_types": [{"id": "t1", "prob": 1.0}],
            "bids": {"a1": {"t1": 1.0}, "a2": {"t1": 0.5}},
            "slots": 1, "horizon": 1.0,
            "rewrites": [{"id": "r1", "ads": ["a1"]}, {"id": "r2", "ads": ["a2"]}],
            "k": 2
        }"#;
        assert_eq!(RewriteInstance::from_json_str(json).unwrap(), i3(2));
        let zero_k = json.replace("\"k\": 2", "\"k\": 0");
        assert!(matches!(
            RewriteInstance::from_json_str(&zero_k),
            Err(Error::Schema { field, .. }) if field == "k"
        ));
        let empty_w = json.replace("[\"a1\"]", "[]");
        assert!(RewriteInstance::from_json_str(&empty_w).is_err());
        let round = serde_json::to_string(&i3(2).to_file()).unwrap();
        assert_eq!(RewriteInstance::from_json_str(&round).unwrap(), i3(2));
    }
}
