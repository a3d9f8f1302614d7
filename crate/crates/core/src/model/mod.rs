//! Domain types shared by all stages: records with named non-negative
//! features, weight specifications, selection predicates, and populations.

mod csv_io;
mod predicate;

pub use csv_io::{read_records_csv, write_links_csv, write_nodes_csv};
pub use predicate::{eval_predicate, eval_predicate_features, Comparator, Predicate};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Kind of graph object a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Node,
    Link,
}

/// One population element: an opaque id plus named non-negative features.
///
/// Features live in a `BTreeMap` so that every iteration order (serialization,
/// snapshots, hashing) is deterministic.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Record {
    pub id: String,
    pub kind: RecordKind,
    pub features: BTreeMap<String, f64>,
}

impl Record {
    /// Builds a record, rejecting non-finite or negative feature values.
    pub fn new(
        id: impl Into<String>,
        kind: RecordKind,
        features: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let id = id.into();
        for (name, value) in &features {
            if !value.is_finite() || *value < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "feature `{name}` of record `{id}` must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(Record { id, kind, features })
    }

    /// Node record with the standard feature triple.
    pub fn node(id: impl Into<String>, fo: f64, fr: f64, ac: f64) -> Result<Self> {
        let features = BTreeMap::from([
            ("fo".to_string(), fo),
            ("fr".to_string(), fr),
            ("ac".to_string(), ac),
        ]);
        Record::new(id, RecordKind::Node, features)
    }

    /// Link record carrying the endpoint follower counts; the fanout
    /// `ffan = fo2/fo1` is derived here and requires `fo1 > 0`.
    pub fn link(id: impl Into<String>, fo1: f64, fo2: f64) -> Result<Self> {
        let id = id.into();
        if fo1 <= 0.0 {
            return Err(Error::ZeroDenominator {
                id,
                feature: "fo1".to_string(),
            });
        }
        let features = BTreeMap::from([
            ("fo1".to_string(), fo1),
            ("fo2".to_string(), fo2),
            ("ffan".to_string(), fo2 / fo1),
        ]);
        Record::new(id, RecordKind::Link, features)
    }

    /// Looks a feature up, failing with `MissingFeature` rather than
    /// defaulting: a query against an absent feature is a caller bug.
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

/// Rule mapping a record to its sampling weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSpec {
    /// Every record weighs 1.
    Uniform,
    /// The value of a single named feature.
    Feature(String),
    /// The ratio of two named features; the denominator must be positive.
    Ratio {
        numerator: String,
        denominator: String,
    },
}

impl WeightSpec {
    pub fn feature(name: impl Into<String>) -> Self {
        WeightSpec::Feature(name.into())
    }

    pub fn ratio(numerator: impl Into<String>, denominator: impl Into<String>) -> Self {
        WeightSpec::Ratio {
            numerator: numerator.into(),
            denominator: denominator.into(),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Uniform => write!(f, "uniform"),
            WeightSpec::Feature(name) => write!(f, "feature:{name}"),
            WeightSpec::Ratio {
                numerator,
                denominator,
            } => write!(f, "ratio:{numerator}/{denominator}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    /// Text forms: `uniform`, `feature:NAME`, `ratio:NUM/DEN`.
    fn from_str(text: &str) -> Result<Self> {
        let err = |msg: &str| Error::WeightSpecParse {
            text: text.to_string(),
            msg: msg.to_string(),
        };
        let t = text.trim();
        if t == "uniform" {
            return Ok(WeightSpec::Uniform);
        }
        if let Some(name) = t.strip_prefix("feature:") {
            if name.is_empty() {
                return Err(err("empty feature name"));
            }
            return Ok(WeightSpec::Feature(name.to_string()));
        }
        if let Some(rest) = t.strip_prefix("ratio:") {
            let (num, den) = rest
                .split_once('/')
                .ok_or_else(|| err("ratio needs the form NUM/DEN"))?;
            if num.is_empty() || den.is_empty() {
                return Err(err("empty ratio component"));
            }
            return Ok(WeightSpec::ratio(num, den));
        }
        Err(err("expected uniform, feature:NAME, or ratio:NUM/DEN"))
    }
}

impl serde::Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluates a weight spec on a record.
pub fn weight_of(record: &Record, spec: &WeightSpec) -> Result<f64> {
    match spec {
        WeightSpec::Uniform => Ok(1.0),
        WeightSpec::Feature(name) => record.feature(name),
        WeightSpec::Ratio {
            numerator,
            denominator,
        } => {
            let num = record.feature(numerator)?;
            let den = record.feature(denominator)?;
            if den == 0.0 {
                return Err(Error::ZeroDenominator {
                    id: record.id.clone(),
                    feature: denominator.clone(),
                });
            }
            Ok(num / den)
        }
    }
}

/// A set of records with unique ids and O(1) lookup by id.
#[derive(Debug, Clone)]
pub struct Population {
    records: Vec<Record>,
    by_id: HashMap<String, usize>,
}

impl Population {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (idx, record) in records.iter().enumerate() {
            if by_id.insert(record.id.clone(), idx).is_some() {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        Ok(Population { records, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.by_id.get(id).map(|&idx| &self.records[idx])
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }
}
