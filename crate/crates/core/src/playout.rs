//! Playouts: serving samples out of a master sample.
//!
//! Every playout is a deterministic scan of the priority-ordered entries; no
//! randomness is drawn here. Three forms are served: fixed-size
//! predicate-filtered samples, non-overlapping extension of a previous
//! sample, and cost-limited samples bounded by scan depth instead of match
//! count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{eval_predicate, Population, Predicate, WeightSpec};
use crate::sampler::{MasterSample, PriorityEntry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// First k matches of the predicate; z is the (k+1)-st matching priority.
    PredicateLimited,
    /// Matches within the first k scanned entries; z is the (k+1)-st priority
    /// overall.
    CostLimited,
}

/// A sampled record: weight and a snapshot of its features, so estimates
/// need no access to the original population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub weight: f64,
    pub priority: f64,
    pub features: BTreeMap<String, f64>,
}

impl SampleEntry {
    pub fn feature(&self, name: &str) -> Result<f64> {
        self.features
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingFeature {
                id: self.id.clone(),
                feature: name.to_string(),
            })
    }
}

/// A played-out sample plus everything needed to resume or estimate from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub entries: Vec<SampleEntry>,
    /// Threshold defining inclusion probabilities; 0 means the sample is
    /// exhaustive and exact.
    pub z: f64,
    pub mode: SampleMode,
    pub k_requested: usize,
    pub k_returned: usize,
    /// Index into the master one past the last returned match; extensions
    /// resume scanning here.
    pub cursor: usize,
    pub exhausted: bool,
    pub predicate: Predicate,
    pub weight_spec: WeightSpec,
    pub master_checksum: String,
}

impl SampleResult {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn snapshot(entry: &PriorityEntry, population: &Population) -> Result<SampleEntry> {
    let record = population
        .get(&entry.id)
        .ok_or_else(|| Error::UnknownId(entry.id.clone()))?;
    Ok(SampleEntry {
        id: entry.id.clone(),
        weight: entry.weight,
        priority: entry.priority,
        features: record.features.clone(),
    })
}

fn matches(
    entry: &PriorityEntry,
    population: &Population,
    predicate: &Predicate,
) -> Result<bool> {
    let record = population
        .get(&entry.id)
        .ok_or_else(|| Error::UnknownId(entry.id.clone()))?;
    eval_predicate(record, predicate)
}

/// Scans for matches from `start` until `entries` holds `want_total` of
/// them, then looks ahead for the threshold-defining next match.
///
/// On running out of master: an uncapped master covers the whole population,
/// so the sample is exact (z = 0); a capped one may hide further matches
/// beyond the cap, so the last collected match is given up to serve as the
/// threshold. A previous sample's entries passed in via `entries` are never
/// given up this way: a non-exhausted sample's threshold match is still
/// ahead of its cursor, so resuming always collects at least one new match
/// before the end.
fn scan(
    master: &MasterSample,
    population: &Population,
    predicate: &Predicate,
    start: usize,
    mut entries: Vec<SampleEntry>,
    want_total: usize,
) -> Result<(Vec<SampleEntry>, f64, usize, bool)> {
    let master_entries = master.entries();
    let mut cursor = start;
    let mut idx = start;
    while idx < master_entries.len() && entries.len() < want_total {
        let entry = &master_entries[idx];
        if matches(entry, population, predicate)? {
            entries.push(snapshot(entry, population)?);
            cursor = idx + 1;
        }
        idx += 1;
    }
    if entries.len() == want_total {
        for ahead in cursor..master_entries.len() {
            let entry = &master_entries[ahead];
            if matches(entry, population, predicate)? {
                return Ok((entries, entry.priority, cursor, false));
            }
        }
    }
    if master.capped() {
        let z = entries.pop().map_or(0.0, |last| last.priority);
        Ok((entries, z, master_entries.len(), true))
    } else {
        Ok((entries, 0.0, master_entries.len(), true))
    }
}

/// First-k-matches playout.
pub fn sample_by_predicate(
    master: &MasterSample,
    population: &Population,
    predicate: &Predicate,
    k: usize,
) -> Result<SampleResult> {
    if master.is_empty() {
        return Err(Error::EmptyMaster);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".to_string()));
    }
    let (entries, z, cursor, exhausted) =
        scan(master, population, predicate, 0, Vec::new(), k)?;
    Ok(SampleResult {
        k_returned: entries.len(),
        entries,
        z,
        mode: SampleMode::PredicateLimited,
        k_requested: k,
        cursor,
        exhausted,
        predicate: predicate.clone(),
        weight_spec: master.weight_spec().clone(),
        master_checksum: master.checksum().to_string(),
    })
}

/// Adjoins the next j matches to a previous sample. The previous threshold
/// is discarded; the result is identical to a fresh playout of size
/// k_requested + j, but only the tail of the master is rescanned.
pub fn extend_sample(
    master: &MasterSample,
    population: &Population,
    prev: &SampleResult,
    j: usize,
) -> Result<SampleResult> {
    if prev.master_checksum != master.checksum() {
        return Err(Error::MasterMismatch);
    }
    if prev.mode != SampleMode::PredicateLimited {
        return Err(Error::InvalidArgument(
            "only predicate-limited samples can be extended".to_string(),
        ));
    }
    if prev.exhausted {
        return Err(Error::AlreadyExhausted);
    }
    if j == 0 {
        return Err(Error::InvalidArgument("j must be >= 1".to_string()));
    }
    let want_total = prev.k_requested + j;
    let (entries, z, cursor, exhausted) = scan(
        master,
        population,
        &prev.predicate,
        prev.cursor,
        prev.entries.clone(),
        want_total,
    )?;
    Ok(SampleResult {
        k_returned: entries.len(),
        entries,
        z,
        mode: SampleMode::PredicateLimited,
        k_requested: want_total,
        cursor,
        exhausted,
        predicate: prev.predicate.clone(),
        weight_spec: master.weight_spec().clone(),
        master_checksum: master.checksum().to_string(),
    })
}

/// Scan-bounded playout: looks at the first k master entries only, keeps the
/// matches, and uses the overall (k+1)-st priority as threshold.
pub fn sample_cost_limited(
    master: &MasterSample,
    population: &Population,
    predicate: &Predicate,
    k: usize,
) -> Result<SampleResult> {
    if master.is_empty() {
        return Err(Error::EmptyMaster);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".to_string()));
    }
    let scanned = k.min(master.len());
    let mut entries = Vec::new();
    for entry in &master.entries()[..scanned] {
        if matches(entry, population, predicate)? {
            entries.push(snapshot(entry, population)?);
        }
    }
    Ok(SampleResult {
        k_returned: entries.len(),
        entries,
        z: master.threshold(k),
        mode: SampleMode::CostLimited,
        k_requested: k,
        cursor: scanned,
        exhausted: k >= master.len(),
        predicate: predicate.clone(),
        weight_spec: master.weight_spec().clone(),
        master_checksum: master.checksum().to_string(),
    })
}
