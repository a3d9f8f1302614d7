//! Master-sample persistence: a CSV data file (`id,weight,priority` in
//! master order) plus a JSON sidecar at `<data path>.meta.json` carrying the
//! weight spec, seed, population size, cap state, and a SHA-256 checksum of
//! the data bytes. Loading verifies both the checksum and the ordering.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::WeightSpec;
use crate::sampler::{hex_digest, MasterSample, PriorityEntry};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    weight_spec: WeightSpec,
    seed: u64,
    population_size: usize,
    capped: bool,
    k_max: Option<usize>,
    checksum: String,
}

/// Sidecar path for a given data path.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn file_error(path: &Path, e: std::io::Error) -> Error {
    Error::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Writes the data file and its sidecar.
pub fn save_master(master: &MasterSample, data_path: impl AsRef<Path>) -> Result<()> {
    let data_path = data_path.as_ref();
    fs::write(data_path, master.data_csv_bytes()).map_err(|e| file_error(data_path, e))?;
    let sidecar = Sidecar {
        weight_spec: master.weight_spec().clone(),
        seed: master.seed(),
        population_size: master.population_size(),
        capped: master.capped(),
        k_max: master.k_max(),
        checksum: master.checksum().to_string(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(sidecar_path(data_path), text)
        .map_err(|e| file_error(&sidecar_path(data_path), e))?;
    Ok(())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidMaster(msg.into())
}

/// Reads a master back, verifying the checksum against the data bytes and
/// re-checking the ordering invariant. The draw u is reconstructed as
/// w/priority (1 for zero-weight entries); it is not used by any downstream
/// computation.
pub fn load_master(data_path: impl AsRef<Path>) -> Result<MasterSample> {
    let data_path = data_path.as_ref();
    let bytes = fs::read(data_path).map_err(|e| file_error(data_path, e))?;
    let sidecar_text = fs::read_to_string(sidecar_path(data_path))
        .map_err(|e| file_error(&sidecar_path(data_path), e))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text)?;

    if hex_digest(&bytes) != sidecar.checksum {
        return Err(Error::ChecksumMismatch);
    }

    let text = String::from_utf8(bytes).map_err(|_| invalid("data file is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some("id,weight,priority") {
        return Err(invalid("missing `id,weight,priority` header"));
    }

    let mut entries: Vec<PriorityEntry> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let mut parts = line.splitn(3, ',');
        let id = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| invalid(format!("line {row}: empty id")))?;
        let weight: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| invalid(format!("line {row}: bad weight")))?;
        let alpha: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| invalid(format!("line {row}: bad priority")))?;
        if !weight.is_finite() || weight < 0.0 || !alpha.is_finite() || alpha < weight {
            return Err(invalid(format!("line {row}: weight/priority out of range")));
        }
        if (alpha == 0.0) != (weight == 0.0) {
            return Err(invalid(format!(
                "line {row}: zero priority must pair with zero weight"
            )));
        }
        let u = if weight == 0.0 { 1.0 } else { weight / alpha };
        entries.push(PriorityEntry {
            id: id.to_string(),
            weight,
            u,
            priority: alpha,
        });
    }

    for pair in entries.windows(2) {
        let ordered = pair[1].priority < pair[0].priority
            || (pair[1].priority == pair[0].priority && pair[0].id < pair[1].id);
        if !ordered {
            return Err(invalid(format!(
                "entries `{}` and `{}` violate (priority desc, id asc) order",
                pair[0].id, pair[1].id
            )));
        }
    }

    let expected_len = if sidecar.capped {
        match sidecar.k_max {
            Some(m) if m < sidecar.population_size => m,
            _ => return Err(invalid("capped master without a truncating k_max")),
        }
    } else {
        sidecar.population_size
    };
    if entries.len() != expected_len {
        return Err(invalid(format!(
            "entry count {} does not match metadata ({expected_len} expected)",
            entries.len()
        )));
    }

    let master = MasterSample::from_parts(
        entries,
        sidecar.weight_spec,
        sidecar.seed,
        sidecar.population_size,
        sidecar.capped,
        sidecar.k_max,
    );
    // from_parts recomputes the checksum from the parsed entries; if it
    // drifted from the raw bytes, some value failed to round-trip.
    if master.checksum() != sidecar.checksum {
        return Err(Error::ChecksumMismatch);
    }
    Ok(master)
}
