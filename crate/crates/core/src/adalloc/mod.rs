//! Budgeted ad allocation in the fluid model.
//!
//! Time is virtual: over an interval of length `Δt`, `Δt · q_j` queries of type
//! `j` arrive. A [`Configuration`] assigns at most `d` ads to every query type;
//! an [`AllocationStrategy`] plays configurations one after another. Ads pay
//! `p_ij` per impression until their budget is gone.

mod fluid;
mod greedy;
pub mod sample;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use fluid::{
    evaluate_strategy, marginal_rate, revenue_rate, spend_rates, AdUtility, SpendLedger, EXHAUSTED,
};
pub use greedy::{best_configuration, greedy_allocate, AdOracle};

use crate::error::{Error, Result};
use crate::seqcore::TimedSequence;

/// A timed sequence of configurations.
pub type AllocationStrategy = TimedSequence<Configuration>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ad {
    pub id: String,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryType {
    pub id: String,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdInstance {
    ads: Vec<Ad>,
    query_types: Vec<QueryType>,
    /// `bids[i][j] = p_ij`.
    bids: Vec<Vec<f64>>,
    slots: usize,
    horizon: f64,
}

/// On-disk form of an instance. Missing bid entries mean `p_ij = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub ads: Vec<Ad>,
    pub query_types: Vec<QueryType>,
    #[serde(default)]
    pub bids: BTreeMap<String, BTreeMap<String, f64>>,
    pub slots: i64,
    pub horizon: f64,
}

impl AdInstance {
    pub fn new(
        ads: Vec<Ad>,
        query_types: Vec<QueryType>,
        bids: Vec<Vec<f64>>,
        slots: usize,
        horizon: f64,
    ) -> Result<Self> {
        if ads.is_empty() {
            return Err(Error::schema("ads", "at least one ad is required"));
        }
        if query_types.is_empty() {
            return Err(Error::schema("query_types", "at least one query type is required"));
        }
        unique_ids(ads.iter().map(|a| a.id.as_str()), "ads")?;
        unique_ids(query_types.iter().map(|q| q.id.as_str()), "query_types")?;
        for a in &ads {
            if !(a.budget.is_finite() && a.budget >= 0.0) {
                return Err(Error::schema(format!("ads.{}.budget", a.id), "must be finite and >= 0"));
            }
        }
        for q in &query_types {
            if !(q.prob.is_finite() && q.prob >= 0.0) {
                return Err(Error::schema(format!("query_types.{}.prob", q.id), "must be finite and >= 0"));
            }
        }
        let total: f64 = query_types.iter().map(|q| q.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::schema(
                "query_types.prob",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        if bids.len() != ads.len() || bids.iter().any(|row| row.len() != query_types.len()) {
            return Err(Error::schema("bids", "bid matrix must be ads x query_types"));
        }
        for (i, row) in bids.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::schema(
                        format!("bids.{}.{}", ads[i].id, query_types[j].id),
                        "must be finite and >= 0",
                    ));
                }
            }
        }
        if slots == 0 {
            return Err(Error::schema("slots", "must be >= 1"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::schema("horizon", "must be finite and > 0"));
        }
        Ok(AdInstance {
            ads,
            query_types,
            bids,
            slots,
            horizon,
        })
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let ad_index: HashMap<&str, usize> = file.ads.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let type_index: HashMap<&str, usize> = file
            .query_types
            .iter()
            .enumerate()
            .map(|(j, q)| (q.id.as_str(), j))
            .collect();
        let mut bids = vec![vec![0.0; file.query_types.len()]; file.ads.len()];
        for (ad, row) in &file.bids {
            let i = *ad_index
                .get(ad.as_str())
                .ok_or_else(|| Error::schema(format!("bids.{ad}"), "unknown ad id"))?;
            for (ty, &p) in row {
                let j = *type_index
                    .get(ty.as_str())
                    .ok_or_else(|| Error::schema(format!("bids.{ad}.{ty}"), "unknown query type id"))?;
                bids[i][j] = p;
            }
        }
        if file.slots < 1 {
            return Err(Error::schema("slots", "must be >= 1"));
        }
        Self::new(file.ads, file.query_types, bids, file.slots as usize, file.horizon)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(s).map_err(|e| Error::schema(json_field(&e), e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> InstanceFile {
        let mut bids = BTreeMap::new();
        for (i, row) in self.bids.iter().enumerate() {
            let entries: BTreeMap<String, f64> = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(j, &p)| (self.query_types[j].id.clone(), p))
                .collect();
            if !entries.is_empty() {
                bids.insert(self.ads[i].id.clone(), entries);
            }
        }
        InstanceFile {
            ads: self.ads.clone(),
            query_types: self.query_types.clone(),
            bids,
            slots: self.slots as i64,
            horizon: self.horizon,
        }
    }

    pub fn ads(&self) -> &[Ad] {
        &self.ads
    }

    pub fn query_types(&self) -> &[QueryType] {
        &self.query_types
    }

    pub fn ad_count(&self) -> usize {
        self.ads.len()
    }

    pub fn type_count(&self) -> usize {
        self.query_types.len()
    }

    pub fn bid(&self, ad: usize, query_type: usize) -> f64 {
        self.bids[ad][query_type]
    }

    pub fn bids(&self) -> &[Vec<f64>] {
        &self.bids
    }

    pub fn prob(&self, query_type: usize) -> f64 {
        self.query_types[query_type].prob
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.ads.iter().map(|a| a.budget).collect()
    }

    pub fn total_budget(&self) -> f64 {
        self.ads.iter().map(|a| a.budget).sum()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn ad_index(&self, id: &str) -> Result<usize> {
        self.ads.iter().position(|a| a.id == id).ok_or_else(|| Error::UnknownId {
            kind: "ad",
            id: id.to_string(),
        })
    }

    pub fn type_index(&self, id: &str) -> Result<usize> {
        self.query_types
            .iter()
            .position(|q| q.id == id)
            .ok_or_else(|| Error::UnknownId {
                kind: "query type",
                id: id.to_string(),
            })
    }

    /// Same instance with bids divided by `scale` and the horizon multiplied by it;
    /// budgets are unchanged, so the fluid optimum is unchanged.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {scale}")));
        }
        let bids = self.bids.iter().map(|row| row.iter().map(|p| p / scale).collect()).collect();
        Self::new(
            self.ads.clone(),
            self.query_types.clone(),
            bids,
            self.slots,
            self.horizon * scale,
        )
    }

    /// Validates that `config` fits this instance.
    pub fn check_configuration(&self, config: &Configuration) -> Result<()> {
        if config.assignment.len() != self.type_count() {
            return Err(Error::InvalidArgument(format!(
                "configuration covers {} query types, instance has {}",
                config.assignment.len(),
                self.type_count()
            )));
        }
        for (j, ads) in config.assignment.iter().enumerate() {
            if ads.len() > self.slots {
                return Err(Error::InvalidArgument(format!(
                    "query type {} assigned {} ads with {} slots",
                    self.query_types[j].id,
                    ads.len(),
                    self.slots
                )));
            }
            for (k, &i) in ads.iter().enumerate() {
                if i >= self.ad_count() {
                    return Err(Error::UnknownId {
                        kind: "ad",
                        id: format!("#{i}"),
                    });
                }
                if ads[..k].contains(&i) {
                    return Err(Error::InvalidArgument(format!("ad {} assigned twice", self.ads[i].id)));
                }
            }
        }
        Ok(())
    }
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, field: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::schema(format!("{field}.id"), format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

/// Best-effort field name from a serde error message ("missing field `x`", "unknown field `x`").
pub(crate) fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let mut parts = msg.split('`');
    parts.next();
    parts.next().map_or_else(|| "<document>".to_string(), str::to_string)
}

/// Assignment of at most `d` ads to every query type: `Q_j(s)` for each `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    assignment: Vec<Vec<usize>>,
}

impl Configuration {
    pub fn new(instance: &AdInstance, assignment: Vec<Vec<usize>>) -> Result<Self> {
        let c = Configuration { assignment };
        instance.check_configuration(&c)?;
        Ok(c)
    }

    /// Shows no ad for any query type.
    pub fn empty(type_count: usize) -> Self {
        Configuration {
            assignment: vec![Vec::new(); type_count],
        }
    }

    /// Builds a configuration from `(type id, [ad ids])` pairs; unlisted types get no ads.
    pub fn from_ids(instance: &AdInstance, pairs: &[(&str, &[&str])]) -> Result<Self> {
        let mut assignment = vec![Vec::new(); instance.type_count()];
        for (ty, ads) in pairs {
            let j = instance.type_index(ty)?;
            assignment[j] = ads.iter().map(|a| instance.ad_index(a)).collect::<Result<_>>()?;
        }
        Self::new(instance, assignment)
    }

    pub fn ads_for(&self, query_type: usize) -> &[usize] {
        &self.assignment[query_type]
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.iter().all(Vec::is_empty)
    }

    /// `{type id: [ad ids]}` for reports; types with no ads are omitted.
    pub fn named(&self, instance: &AdInstance) -> BTreeMap<String, Vec<String>> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, ads)| !ads.is_empty())
            .map(|(j, ads)| {
                (
                    instance.query_types[j].id.clone(),
                    ads.iter().map(|&i| instance.ads[i].id.clone()).collect(),
                )
            })
            .collect()
    }
}
