//! Python bindings: thin wrappers over the sampling, estimation, and
//! evaluation APIs. Every method maps onto one library call; errors become
//! ValueError with the library's message text.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use psample::estimate::{
    mass_distribution, ordinary_cdf, restrict, subset_count, subset_sum, DistributionEstimate,
    MassDistributionEstimate,
};
use psample::eval::{EvalSpec, KsTable};
use psample::model::{
    read_records_csv, write_links_csv, write_nodes_csv, Population as CorePopulation, Predicate,
    Record, RecordKind, WeightSpec,
};
use psample::playout::{extend_sample, sample_by_predicate, sample_cost_limited, SampleMode, SampleResult};
use psample::sampler::{load_master, master_from_records, save_master, MasterSample};
use psample::synth::{generate_links, generate_nodes, SynthConfig};

fn perr(e: psample::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_weight(text: &str) -> PyResult<WeightSpec> {
    text.parse().map_err(perr)
}

fn parse_predicate(text: Option<&str>) -> PyResult<Predicate> {
    match text {
        None => Ok(Predicate::True),
        Some(t) => t.parse().map_err(perr),
    }
}

/// A set of records with unique ids; the unit everything else samples from.
#[pyclass(name = "Population")]
struct PyPopulation {
    inner: CorePopulation,
}

#[pymethods]
impl PyPopulation {
    /// Records as (id, kind, features) triples; kind is "node" or "link".
    #[new]
    fn new(records: Vec<(String, String, BTreeMap<String, f64>)>) -> PyResult<Self> {
        let records = records
            .into_iter()
            .map(|(id, kind, features)| {
                let kind = match kind.as_str() {
                    "node" => RecordKind::Node,
                    "link" => RecordKind::Link,
                    other => {
                        return Err(PyValueError::new_err(format!(
                            "unknown record kind `{other}` (expected node or link)"
                        )))
                    }
                };
                Record::new(id, kind, features).map_err(perr)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyPopulation {
            inner: CorePopulation::new(records).map_err(perr)?,
        })
    }

    /// Synthetic nodes from the default configuration with the given size
    /// and seed.
    #[staticmethod]
    fn synth_nodes(n: usize, seed: u64) -> PyResult<Self> {
        let config = SynthConfig {
            n_nodes: n,
            seed,
            ..SynthConfig::default()
        };
        Ok(PyPopulation {
            inner: CorePopulation::new(generate_nodes(&config).map_err(perr)?).map_err(perr)?,
        })
    }

    /// Synthetic nodes from a full JSON configuration (see
    /// default_config_json for the shape).
    #[staticmethod]
    fn synth_nodes_from_config(config_json: &str) -> PyResult<Self> {
        let config: SynthConfig = serde_json::from_str(config_json)
            .map_err(|e| PyValueError::new_err(format!("bad config: {e}")))?;
        Ok(PyPopulation {
            inner: CorePopulation::new(generate_nodes(&config).map_err(perr)?).map_err(perr)?,
        })
    }

    /// Synthetic links drawn over an existing node population.
    #[staticmethod]
    fn synth_links(nodes: &PyPopulation, n_links: usize, seed: u64) -> PyResult<Self> {
        let links = generate_links(nodes.inner.records(), n_links, seed).map_err(perr)?;
        Ok(PyPopulation {
            inner: CorePopulation::new(links).map_err(perr)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(PyPopulation {
            inner: read_records_csv(path).map_err(perr)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        match self.kind() {
            Some(k) if k == "node" => write_nodes_csv(path, &self.inner).map_err(perr),
            Some(_) => write_links_csv(path, &self.inner).map_err(perr),
            None => Err(PyValueError::new_err("empty population")),
        }
    }

    /// "node" or "link"; None when empty.
    fn kind(&self) -> Option<String> {
        self.inner.records().first().map(|r| {
            match r.kind {
                RecordKind::Node => "node",
                RecordKind::Link => "link",
            }
            .to_string()
        })
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|r| r.id.clone()).collect()
    }

    fn features(&self, id: &str) -> PyResult<BTreeMap<String, f64>> {
        self.inner
            .get(id)
            .map(|r| r.features.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no record with id `{id}`")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A full priority ordering of one population under one weighting; samples
/// of every size and predicate play out from this single object.
#[pyclass(name = "Master")]
struct PyMaster {
    inner: MasterSample,
}

#[pymethods]
impl PyMaster {
    /// weight is "uniform", "feature:NAME", or "ratio:NUM/DEN".
    #[staticmethod]
    #[pyo3(signature = (population, weight, seed, kmax=None))]
    fn build(
        population: &PyPopulation,
        weight: &str,
        seed: u64,
        kmax: Option<usize>,
    ) -> PyResult<Self> {
        let spec = parse_weight(weight)?;
        Ok(PyMaster {
            inner: master_from_records(population.inner.records(), &spec, seed, kmax)
                .map_err(perr)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_master(&self.inner, path).map_err(perr)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMaster {
            inner: load_master(path).map_err(perr)?,
        })
    }

    /// First k matches of the predicate (all records when predicate is
    /// None), with the threshold taken over matches.
    #[pyo3(signature = (population, k, predicate=None))]
    fn sample(
        &self,
        population: &PyPopulation,
        k: usize,
        predicate: Option<&str>,
    ) -> PyResult<PySample> {
        let pred = parse_predicate(predicate)?;
        Ok(PySample {
            inner: sample_by_predicate(&self.inner, &population.inner, &pred, k).map_err(perr)?,
        })
    }

    /// Matches within the first k scanned entries; the scan cost, not the
    /// match count, is what k bounds.
    #[pyo3(signature = (population, k, predicate=None))]
    fn sample_cost_limited(
        &self,
        population: &PyPopulation,
        k: usize,
        predicate: Option<&str>,
    ) -> PyResult<PySample> {
        let pred = parse_predicate(predicate)?;
        Ok(PySample {
            inner: sample_cost_limited(&self.inner, &population.inner, &pred, k).map_err(perr)?,
        })
    }

    /// Adjoins the next j matches to a previous sample; identical to a
    /// fresh playout of size k+j.
    fn extend(&self, population: &PyPopulation, prev: &PySample, j: usize) -> PyResult<PySample> {
        Ok(PySample {
            inner: extend_sample(&self.inner, &population.inner, &prev.inner, j).map_err(perr)?,
        })
    }

    #[getter]
    fn weight(&self) -> String {
        self.inner.weight_spec().to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn capped(&self) -> bool {
        self.inner.capped()
    }

    #[getter]
    fn checksum(&self) -> String {
        self.inner.checksum().to_string()
    }

    #[getter]
    fn population_size(&self) -> usize {
        self.inner.population_size()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A played-out sample: entries with inclusion weights plus the threshold z
/// (z = 0 means exhaustive and exact).
#[pyclass(name = "Sample")]
struct PySample {
    inner: SampleResult,
}

#[pymethods]
impl PySample {
    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[getter]
    fn exhausted(&self) -> bool {
        self.inner.exhausted
    }

    #[getter]
    fn k_requested(&self) -> usize {
        self.inner.k_requested
    }

    #[getter]
    fn k_returned(&self) -> usize {
        self.inner.k_returned
    }

    #[getter]
    fn mode(&self) -> String {
        match self.inner.mode {
            SampleMode::PredicateLimited => "predicate-limited",
            SampleMode::CostLimited => "cost-limited",
        }
        .to_string()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Entries as (id, weight, priority, features) tuples, in sampled order.
    fn entries(&self) -> Vec<(String, f64, f64, BTreeMap<String, f64>)> {
        self.inner
            .entries
            .iter()
            .map(|e| (e.id.clone(), e.weight, e.priority, e.features.clone()))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(perr)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySample {
            inner: SampleResult::from_json(text).map_err(perr)?,
        })
    }

    /// Estimated total of a feature over records matching the predicate.
    #[pyo3(signature = (feature, predicate=None))]
    fn subset_sum(&self, feature: &str, predicate: Option<&str>) -> PyResult<f64> {
        let pred = parse_predicate(predicate)?;
        subset_sum(&self.inner, feature, &pred).map_err(perr)
    }

    /// Estimated count of records matching the predicate.
    #[pyo3(signature = (predicate=None))]
    fn subset_count(&self, predicate: Option<&str>) -> PyResult<f64> {
        let pred = parse_predicate(predicate)?;
        subset_count(&self.inner, &pred).map_err(perr)
    }

    fn ordinary_cdf(&self, variable: &str) -> PyResult<PyCdf> {
        Ok(PyCdf {
            inner: ordinary_cdf(&self.inner, variable).map_err(perr)?,
        })
    }

    fn mass_distribution(&self, mass_variable: &str, quantile_variable: &str) -> PyResult<PyMassCurve> {
        Ok(PyMassCurve {
            inner: mass_distribution(&self.inner, mass_variable, quantile_variable).map_err(perr)?,
        })
    }

    /// Drops entries not matching the predicate; threshold unchanged.
    fn restrict(&self, predicate: &str) -> PyResult<PySample> {
        let pred = parse_predicate(Some(predicate))?;
        Ok(PySample {
            inner: restrict(&self.inner, &pred).map_err(perr)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }
}

/// Estimated CDF: points (y, q(y)) at distinct sampled values.
#[pyclass(name = "Cdf")]
struct PyCdf {
    inner: DistributionEstimate,
}

#[pymethods]
impl PyCdf {
    #[getter]
    fn variable(&self) -> String {
        self.inner.variable.clone()
    }

    #[getter]
    fn weight(&self) -> String {
        self.inner.weight_spec.to_string()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Estimated mass curve: points (q(y), r(y)); breakpoints[i] is the value y
/// behind points[i].
#[pyclass(name = "MassCurve")]
struct PyMassCurve {
    inner: MassDistributionEstimate,
}

#[pymethods]
impl PyMassCurve {
    #[getter]
    fn mass_variable(&self) -> String {
        self.inner.mass_variable.clone()
    }

    #[getter]
    fn quantile_variable(&self) -> String {
        self.inner.quantile_variable.clone()
    }

    #[getter]
    fn weight(&self) -> String {
        self.inner.weight_spec.to_string()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[getter]
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints.clone()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Median-KS-per-cell table from repeated independent draws.
#[pyclass(name = "EvalTable")]
struct PyEvalTable {
    inner: KsTable,
}

#[pymethods]
impl PyEvalTable {
    /// Rows as (weighting, target, by, median_ks, runs); by is "" for
    /// ordinary-CDF cells.
    fn rows(&self) -> Vec<(String, String, String, f64, usize)> {
        self.inner.rows()
    }

    #[pyo3(signature = (weighting, target, by=None))]
    fn median(&self, weighting: &str, target: &str, by: Option<&str>) -> PyResult<f64> {
        let spec = parse_weight(weighting)?;
        self.inner
            .cell(&spec, target, by)
            .map(|c| c.median_ks)
            .ok_or_else(|| PyValueError::new_err(format!("no cell ({weighting}, {target}, {by:?})")))
    }

    /// Raw per-run values for one cell, in run order.
    #[pyo3(signature = (weighting, target, by=None))]
    fn values(&self, weighting: &str, target: &str, by: Option<&str>) -> PyResult<Vec<f64>> {
        let spec = parse_weight(weighting)?;
        self.inner
            .cell(&spec, target, by)
            .map(|c| c.values.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no cell ({weighting}, {target}, {by:?})")))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// JSON for the default synthetic-population configuration; edit and feed
/// to Population.synth_nodes_from_config.
#[pyfunction]
fn default_config_json() -> PyResult<String> {
    serde_json::to_string_pretty(&SynthConfig::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Exact population CDF of a variable.
#[pyfunction]
fn true_cdf(population: &PyPopulation, variable: &str) -> PyResult<PyCdf> {
    Ok(PyCdf {
        inner: psample::synth::true_cdf(population.inner.records(), variable).map_err(perr)?,
    })
}

/// Exact population mass curve of a mass variable against a quantile
/// variable.
#[pyfunction]
fn true_mass(
    population: &PyPopulation,
    mass_variable: &str,
    quantile_variable: &str,
) -> PyResult<PyMassCurve> {
    Ok(PyMassCurve {
        inner: psample::synth::true_mass(population.inner.records(), mass_variable, quantile_variable)
            .map_err(perr)?,
    })
}

/// KS distance between an estimated and a reference CDF.
#[pyfunction]
fn ks_cdf(est: &PyCdf, truth: &PyCdf) -> PyResult<f64> {
    psample::eval::ks_cdf(&est.inner, &truth.inner).map_err(perr)
}

/// KS distance between two mass curves, compared on the value axis.
#[pyfunction]
fn ks_mass(est: &PyMassCurve, truth: &PyMassCurve) -> PyResult<f64> {
    psample::eval::ks_mass(&est.inner, &truth.inner).map_err(perr)
}

/// Plot-ready (reference r, estimated r) pairs on the union q-grid.
#[pyfunction]
fn qq_curve(est: &PyMassCurve, truth: &PyMassCurve) -> PyResult<Vec<(f64, f64)>> {
    psample::eval::qq_curve(&est.inner, &truth.inner).map_err(perr)
}

/// Repeated-draw evaluation: median KS per (weighting, target) cell.
#[pyfunction]
#[pyo3(signature = (population, weightings, cdf_targets, mass_targets, runs=20, k=1000, seed=0))]
fn run_eval(
    population: &PyPopulation,
    weightings: Vec<String>,
    cdf_targets: Vec<String>,
    mass_targets: Vec<(String, String)>,
    runs: usize,
    k: usize,
    seed: u64,
) -> PyResult<PyEvalTable> {
    let weightings = weightings
        .iter()
        .map(|w| parse_weight(w))
        .collect::<PyResult<Vec<_>>>()?;
    let spec = EvalSpec {
        weightings,
        cdf_targets,
        mass_targets,
        runs,
        k,
        base_seed: seed,
    };
    Ok(PyEvalTable {
        inner: psample::eval::run_eval(&population.inner, &spec).map_err(perr)?,
    })
}

#[pymodule]
fn psample_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPopulation>()?;
    m.add_class::<PyMaster>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyCdf>()?;
    m.add_class::<PyMassCurve>()?;
    m.add_class::<PyEvalTable>()?;
    m.add_function(wrap_pyfunction!(default_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(true_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(true_mass, m)?)?;
    m.add_function(wrap_pyfunction!(ks_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(ks_mass, m)?)?;
    m.add_function(wrap_pyfunction!(qq_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_eval, m)?)?;
    Ok(())
}
