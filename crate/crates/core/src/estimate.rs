//! Horvitz-Thompson estimators over played-out samples.
//!
//! Every estimator divides a sampled quantity by its inclusion probability
//! p = min{1, w/z} (p = 1 when z = 0, the exhaustive case). Distribution
//! curves are step functions evaluated at the distinct sampled values of the
//! quantile variable; both the CDF q(y) and the mass fraction r(y) are ratio
//! estimators sharing one sample and one threshold.

use serde::{Deserialize, Serialize};

use crate::model::{eval_predicate_features, Predicate, WeightSpec};
use crate::numeric::CompensatedSum;
use crate::playout::{SampleEntry, SampleResult};
use crate::sampler::inclusion_prob;
use crate::{Error, Result};

/// Estimated CDF of one variable: points (y, q(y)) at sampled values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub variable: String,
    pub weight_spec: WeightSpec,
    pub k: usize,
    pub z: f64,
    pub points: Vec<(f64, f64)>,
}

/// Estimated mass curve: points (q(y), r(y)) as y runs over sampled values
/// of the quantile variable; r is the estimated fraction of the mass
/// variable's total carried by records with quantile variable <= y.
/// `breakpoints[i]` is the value y behind `points[i]`, so the curve can also
/// be read as the step function y -> r(y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDistributionEstimate {
    pub mass_variable: String,
    pub quantile_variable: String,
    pub weight_spec: WeightSpec,
    pub k: usize,
    pub z: f64,
    pub breakpoints: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

fn entry_matches(entry: &SampleEntry, predicate: &Predicate) -> Result<bool> {
    eval_predicate_features(&entry.id, &entry.features, predicate)
}

/// Sums value(entry)/p over entries matching the predicate.
fn ht_sum<F>(sample: &SampleResult, predicate: &Predicate, mut value: F) -> Result<f64>
where
    F: FnMut(&SampleEntry) -> Result<f64>,
{
    let mut acc = CompensatedSum::new();
    for entry in &sample.entries {
        if !entry_matches(entry, predicate)? {
            continue;
        }
        let p = inclusion_prob(entry.weight, sample.z);
        if p == 0.0 {
            // Only a zero-weight entry can have p = 0, and such entries
            // cannot beat a positive threshold; nothing to contribute.
            debug_assert_eq!(entry.weight, 0.0);
            continue;
        }
        acc.add(value(entry)? / p);
    }
    Ok(acc.value())
}

/// Estimated subpopulation sum of a feature over records matching the
/// predicate (composed with the predicate the sample was drawn under).
pub fn subset_sum(sample: &SampleResult, feature: &str, predicate: &Predicate) -> Result<f64> {
    ht_sum(sample, predicate, |entry| entry.feature(feature))
}

/// Estimated subpopulation count of records matching the predicate.
pub fn subset_count(sample: &SampleResult, predicate: &Predicate) -> Result<f64> {
    ht_sum(sample, predicate, |_| Ok(1.0))
}

/// Per-entry (value, count contribution, mass contribution) rows sorted by
/// value then id, so cumulative sums are deterministic.
fn sorted_rows(
    sample: &SampleResult,
    quantile_variable: &str,
    mass_variable: Option<&str>,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut keyed: Vec<(&SampleEntry, f64)> = sample
        .entries
        .iter()
        .map(|e| e.feature(quantile_variable).map(|x| (e, x)))
        .collect::<Result<_>>()?;
    keyed.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)));

    let mut rows = Vec::with_capacity(keyed.len());
    for (entry, x) in keyed {
        let p = inclusion_prob(entry.weight, sample.z);
        if p == 0.0 {
            debug_assert_eq!(entry.weight, 0.0);
            continue;
        }
        let mass = match mass_variable {
            Some(name) => entry.feature(name)? / p,
            None => 0.0,
        };
        rows.push((x, 1.0 / p, mass));
    }
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(rows)
}

/// Collapses cumulative sums to one (y, q, r) triple per distinct value.
///
/// Plain ordered accumulation keeps prefixes of the total, so q is
/// non-decreasing and ends at exactly 1.
fn cumulative_points(rows: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut count_cum = 0.0;
    let mut mass_cum = 0.0;
    let cums: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(_, c, m)| {
            count_cum += c;
            mass_cum += m;
            (count_cum, mass_cum)
        })
        .collect();
    let (count_total, mass_total) = *cums.last().unwrap();

    let mut points = Vec::new();
    for (idx, &(x, ..)) in rows.iter().enumerate() {
        let last_of_value = idx + 1 == rows.len() || rows[idx + 1].0 != x;
        if last_of_value {
            let (c, m) = cums[idx];
            let q = c / count_total;
            // Zero total mass makes every fraction vacuous; report 1.
            let r = if mass_total == 0.0 { 1.0 } else { m / mass_total };
            points.push((x, q, r));
        }
    }
    points
}

/// Estimated CDF q(y) of a variable at each distinct sampled value.
pub fn ordinary_cdf(sample: &SampleResult, variable: &str) -> Result<DistributionEstimate> {
    let rows = sorted_rows(sample, variable, None)?;
    let points = cumulative_points(&rows)
        .into_iter()
        .map(|(y, q, _)| (y, q))
        .collect();
    Ok(DistributionEstimate {
        variable: variable.to_string(),
        weight_spec: sample.weight_spec.clone(),
        k: sample.k_requested,
        z: sample.z,
        points,
    })
}

/// Estimated mass curve (q(y), r(y)) of a mass variable against a quantile
/// variable; the two may coincide (self-weighted mass).
pub fn mass_distribution(
    sample: &SampleResult,
    mass_variable: &str,
    quantile_variable: &str,
) -> Result<MassDistributionEstimate> {
    let rows = sorted_rows(sample, quantile_variable, Some(mass_variable))?;
    let triples = cumulative_points(&rows);
    Ok(MassDistributionEstimate {
        mass_variable: mass_variable.to_string(),
        quantile_variable: quantile_variable.to_string(),
        weight_spec: sample.weight_spec.clone(),
        k: sample.k_requested,
        z: sample.z,
        breakpoints: triples.iter().map(|&(y, ..)| y).collect(),
        points: triples.into_iter().map(|(_, q, r)| (q, r)).collect(),
    })
}

/// Drops entries not matching the predicate; the threshold, cursor, and
/// recorded predicate stay untouched (the threshold is a property of the
/// draw, not of any later filtering).
pub fn restrict(sample: &SampleResult, predicate: &Predicate) -> Result<SampleResult> {
    let mut entries = Vec::with_capacity(sample.entries.len());
    for entry in &sample.entries {
        if entry_matches(entry, predicate)? {
            entries.push(entry.clone());
        }
    }
    let mut restricted = sample.clone();
    restricted.k_returned = entries.len();
    restricted.entries = entries;
    Ok(restricted)
}
