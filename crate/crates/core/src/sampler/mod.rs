//! Priority assignment and master-sample construction.
//!
//! Each record gets a priority w/u from a deterministic per-key draw
//! u in (0,1]. The master sample is the population sorted by descending
//! priority; all randomness happens here, playouts are pure scans.

mod store;

pub use store::{load_master, save_master};

use std::collections::HashSet;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::model::{weight_of, Record, WeightSpec};
use crate::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        write!(out, "{b:02x}").unwrap();
    }
    out
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic uniform draw in (0,1] keyed by (seed, scope, id).
///
/// The scope is the weight-spec text, so different weightings over the same
/// population get disjoint randomness. Mapping (h+1)/2^64 excludes 0.
pub fn unit_draw(seed: u64, scope: &str, id: &str) -> f64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, &[0x1f]);
    h = fnv1a(h, scope.as_bytes());
    h = fnv1a(h, &[0x1f]);
    h = fnv1a(h, id.as_bytes());
    let mixed = splitmix64(h);
    (mixed as f64 + 1.0) / 2f64.powi(64)
}

/// Priority of a weight under a draw; zero weight short-circuits so no
/// division happens.
pub fn priority(weight: f64, u: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight / u
    }
}

/// One record's position in priority space.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityEntry {
    pub id: String,
    pub weight: f64,
    pub u: f64,
    pub priority: f64,
}

/// Assigns a priority to every record. Draws are keyed by (seed, spec, id),
/// so the result does not depend on the order of `records`.
pub fn assign_priorities(
    records: &[Record],
    spec: &WeightSpec,
    seed: u64,
) -> Result<Vec<PriorityEntry>> {
    let scope = spec.to_string();
    records
        .par_iter()
        .map(|record| {
            let weight = weight_of(record, spec)?;
            let u = unit_draw(seed, &scope, &record.id);
            let alpha = priority(weight, u);
            if !alpha.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "priority overflow for record `{}` (weight {weight}, draw {u})",
                    record.id
                )));
            }
            Ok(PriorityEntry {
                id: record.id.clone(),
                weight,
                u,
                priority: alpha,
            })
        })
        .collect()
}

/// The population in descending priority order, optionally truncated.
///
/// Immutable after construction; every playout is a deterministic scan of
/// `entries`.
#[derive(Debug, Clone)]
pub struct MasterSample {
    entries: Vec<PriorityEntry>,
    weight_spec: WeightSpec,
    seed: u64,
    population_size: usize,
    capped: bool,
    k_max: Option<usize>,
    checksum: String,
}

impl MasterSample {
    pub fn entries(&self) -> &[PriorityEntry] {
        &self.entries
    }

    pub fn weight_spec(&self) -> &WeightSpec {
        &self.weight_spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn population_size(&self) -> usize {
        self.population_size
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn k_max(&self) -> Option<usize> {
        self.k_max
    }

    /// SHA-256 hex digest of the canonical data serialization.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The (k+1)-st highest priority, or 0 when fewer than k+1 entries exist
    /// (every retained item is then included with probability 1).
    pub fn threshold(&self, k: usize) -> f64 {
        self.entries.get(k).map_or(0.0, |e| e.priority)
    }

    /// Canonical serialization: the exact bytes of the persisted data file.
    pub(crate) fn data_csv_bytes(&self) -> Vec<u8> {
        use std::fmt::Write as _;
        let mut text = String::with_capacity(24 + self.entries.len() * 32);
        text.push_str("id,weight,priority\n");
        for e in &self.entries {
            writeln!(text, "{},{},{}", e.id, e.weight, e.priority).unwrap();
        }
        text.into_bytes()
    }

    pub(crate) fn from_parts(
        entries: Vec<PriorityEntry>,
        weight_spec: WeightSpec,
        seed: u64,
        population_size: usize,
        capped: bool,
        k_max: Option<usize>,
    ) -> Self {
        let mut master = MasterSample {
            entries,
            weight_spec,
            seed,
            population_size,
            capped,
            k_max,
            checksum: String::new(),
        };
        master.checksum = hex_digest(&master.data_csv_bytes());
        master
    }
}

/// Sorts entries by (priority desc, id asc), applies the optional cap, and
/// freezes the result. A cap at or above the population size is a no-op and
/// leaves the master uncapped.
pub fn build_master(
    mut entries: Vec<PriorityEntry>,
    spec: &WeightSpec,
    seed: u64,
    k_max: Option<usize>,
) -> Result<MasterSample> {
    let mut seen = HashSet::with_capacity(entries.len());
    for entry in &entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::DuplicateId(entry.id.clone()));
        }
    }
    entries.sort_unstable_by(|a, b| {
        b.priority
            .total_cmp(&a.priority)
            .then_with(|| a.id.cmp(&b.id))
    });
    let population_size = entries.len();
    let capped = k_max.is_some_and(|m| m < population_size);
    if capped {
        entries.truncate(k_max.unwrap());
    }
    Ok(MasterSample::from_parts(
        entries,
        spec.clone(),
        seed,
        population_size,
        capped,
        k_max,
    ))
}

/// Priority assignment and master construction in one step.
pub fn master_from_records(
    records: &[Record],
    spec: &WeightSpec,
    seed: u64,
    k_max: Option<usize>,
) -> Result<MasterSample> {
    build_master(assign_priorities(records, spec, seed)?, spec, seed, k_max)
}

/// Effective inclusion probability min{1, w/z}; z = 0 means the sample was
/// exhaustive and everything is included surely.
pub fn inclusion_prob(weight: f64, z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        (weight / z).min(1.0)
    }
}

/// Per-item Horvitz-Thompson weight estimate: max{w, z} if sampled, else 0.
pub fn ht_weight_estimate(weight: f64, z: f64, sampled: bool) -> f64 {
    if sampled {
        weight.max(z)
    } else {
        0.0
    }
}
