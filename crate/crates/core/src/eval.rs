//! Evaluation harness: repeated independent master draws, estimated
//! distributions compared against the exact population truth with a
//! KS-style statistic (maximum absolute difference between step curves on
//! the union of their breakpoints), reported as median-over-runs tables.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimate::{mass_distribution, ordinary_cdf, DistributionEstimate, MassDistributionEstimate};
use crate::model::{Population, Predicate, WeightSpec};
use crate::numeric::median;
use crate::playout::sample_by_predicate;
use crate::sampler::master_from_records;
use crate::synth::{true_cdf, true_mass};
use crate::{Error, Result};

/// What to evaluate: which weightings, which ordinary-CDF targets, which
/// (mass, quantile) pairs, how many runs of what sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub weightings: Vec<WeightSpec>,
    /// Variables X for ordinary CDF cells D(X).
    pub cdf_targets: Vec<String>,
    /// Pairs (mass variable, quantile variable) for mass cells M(X, X').
    pub mass_targets: Vec<(String, String)>,
    pub runs: usize,
    pub k: usize,
    pub base_seed: u64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            weightings: Vec::new(),
            cdf_targets: Vec::new(),
            mass_targets: Vec::new(),
            runs: 100,
            k: 1000,
            base_seed: 0,
        }
    }
}

/// One table cell: the median KS over runs for a (weighting, target) pair;
/// `by` is the quantile variable for mass cells, absent for ordinary CDFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCell {
    pub weighting: WeightSpec,
    pub target: String,
    pub by: Option<String>,
    pub median_ks: f64,
    pub runs: usize,
    /// Raw per-run values, in run order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsTable {
    pub cells: Vec<KsCell>,
}

impl KsTable {
    pub fn cell(&self, weighting: &WeightSpec, target: &str, by: Option<&str>) -> Option<&KsCell> {
        self.cells.iter().find(|c| {
            &c.weighting == weighting && c.target == target && c.by.as_deref() == by
        })
    }

    /// Structured rows: weighting, target, by, median KS, run count.
    pub fn rows(&self) -> Vec<(String, String, String, f64, usize)> {
        self.cells
            .iter()
            .map(|c| {
                (
                    c.weighting.to_string(),
                    c.target.clone(),
                    c.by.clone().unwrap_or_default(),
                    c.median_ks,
                    c.runs,
                )
            })
            .collect()
    }
}

impl fmt::Display for KsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Full-precision numbers; column widths computed from the data.
        let rows: Vec<[String; 5]> = self
            .cells
            .iter()
            .map(|c| {
                [
                    c.weighting.to_string(),
                    c.target.clone(),
                    c.by.clone().unwrap_or_else(|| "-".to_string()),
                    c.median_ks.to_string(),
                    c.runs.to_string(),
                ]
            })
            .collect();
        let header = ["weighting", "target", "by", "median_ks", "runs"];
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let write_row = |f: &mut fmt::Formatter<'_>, row: [&str; 5]| {
            writeln!(
                f,
                "{:<w0$}  {:<w1$}  {:<w2$}  {:>w3$}  {:>w4$}",
                row[0],
                row[1],
                row[2],
                row[3],
                row[4],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
                w4 = widths[4],
            )
        };
        write_row(f, header)?;
        for row in &rows {
            write_row(f, [&row[0], &row[1], &row[2], &row[3], &row[4]])?;
        }
        Ok(())
    }
}

/// Checks a step curve: x strictly increasing, ordinate non-decreasing in
/// [0,1] and reaching 1 at the end.
fn validate_curve(points: &[(f64, f64)], what: &str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::MalformedCurve(format!("{what}: no points")));
    }
    let mut prev_x = f64::NEG_INFINITY;
    let mut prev_y = 0.0;
    for &(x, y) in points {
        if !x.is_finite() || x <= prev_x {
            return Err(Error::MalformedCurve(format!(
                "{what}: abscissa not strictly increasing at {x}"
            )));
        }
        if !(0.0..=1.0).contains(&y) || y < prev_y {
            return Err(Error::MalformedCurve(format!(
                "{what}: ordinate not non-decreasing in [0,1] at {y}"
            )));
        }
        prev_x = x;
        prev_y = y;
    }
    if (points.last().unwrap().1 - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedCurve(format!(
            "{what}: final ordinate {} is not 1",
            points.last().unwrap().1
        )));
    }
    Ok(())
}

/// Right-continuous step evaluation: ordinate of the last point with
/// abscissa <= x, 0 before the first point.
fn step_at(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 <= x);
    if idx == 0 {
        0.0
    } else {
        points[idx - 1].1
    }
}

/// Maximum absolute difference of two step curves over the union of their
/// breakpoints; exact because the pair of curves is constant between
/// consecutive union breakpoints.
fn max_step_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut gap = 0.0f64;
    for &(x, _) in a.iter().chain(b) {
        gap = gap.max((step_at(a, x) - step_at(b, x)).abs());
    }
    gap
}

/// KS distance between an estimated CDF and a reference CDF.
pub fn ks_cdf(est: &DistributionEstimate, truth: &DistributionEstimate) -> Result<f64> {
    validate_curve(&est.points, "estimated cdf")?;
    validate_curve(&truth.points, "reference cdf")?;
    Ok(max_step_gap(&est.points, &truth.points))
}

/// KS distance between two mass curves, comparing the mass fraction r as a
/// step function of the quantile variable's value on the union of value
/// breakpoints. Both curves are cumulative distributions of the same
/// variable, so this is their maximum pointwise difference; where the
/// estimated count quantiles land does not enter the statistic.
pub fn ks_mass(
    est: &MassDistributionEstimate,
    truth: &MassDistributionEstimate,
) -> Result<f64> {
    let by_value = |m: &MassDistributionEstimate, what: &str| -> Result<Vec<(f64, f64)>> {
        if m.breakpoints.len() != m.points.len() {
            return Err(Error::MalformedCurve(format!(
                "{what}: {} breakpoints for {} points",
                m.breakpoints.len(),
                m.points.len()
            )));
        }
        validate_curve(&m.points, what)?;
        let curve: Vec<(f64, f64)> = m
            .breakpoints
            .iter()
            .zip(&m.points)
            .map(|(&y, &(_, r))| (y, r))
            .collect();
        validate_curve(&curve, what)?;
        Ok(curve)
    };
    let a = by_value(est, "estimated mass curve")?;
    let b = by_value(truth, "reference mass curve")?;
    Ok(max_step_gap(&a, &b))
}

/// Plot-ready quantile-quantile data: (reference r, estimated r) on the
/// union q-grid.
pub fn qq_curve(
    est: &MassDistributionEstimate,
    truth: &MassDistributionEstimate,
) -> Result<Vec<(f64, f64)>> {
    validate_curve(&est.points, "estimated mass curve")?;
    validate_curve(&truth.points, "reference mass curve")?;
    let mut grid: Vec<f64> = est
        .points
        .iter()
        .chain(&truth.points)
        .map(|p| p.0)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid
        .into_iter()
        .map(|q| (step_at(&truth.points, q), step_at(&est.points, q)))
        .collect())
}

/// The full protocol: for each run, build a fresh master per weighting
/// (seed = base + run), play out k matches of True, estimate every target,
/// and take the KS distance to the exact population curve; cells hold the
/// median over runs.
///
/// Draws are independent across weightings even within a run because the
/// weight-spec text is folded into every per-record draw key.
pub fn run_eval(population: &Population, spec: &EvalSpec) -> Result<KsTable> {
    if spec.runs < 1 {
        return Err(Error::InvalidArgument("runs must be >= 1".to_string()));
    }
    if spec.k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".to_string()));
    }
    if spec.weightings.is_empty() || (spec.cdf_targets.is_empty() && spec.mass_targets.is_empty())
    {
        return Err(Error::InvalidArgument(
            "eval needs at least one weighting and one target".to_string(),
        ));
    }
    let records = population.records();
    let cdf_truths = spec
        .cdf_targets
        .iter()
        .map(|x| true_cdf(records, x))
        .collect::<Result<Vec<_>>>()?;
    let mass_truths = spec
        .mass_targets
        .iter()
        .map(|(mass, by)| true_mass(records, mass, by))
        .collect::<Result<Vec<_>>>()?;

    // One KS value per cell per run; runs are independent and collected in
    // run order, so the reduction is deterministic under any scheduling.
    let per_run: Vec<Vec<f64>> = (1..=spec.runs as u64)
        .into_par_iter()
        .map(|run| -> Result<Vec<f64>> {
            let seed = spec.base_seed.wrapping_add(run);
            let mut row = Vec::new();
            for weighting in &spec.weightings {
                let master = master_from_records(records, weighting, seed, None)?;
                let sample =
                    sample_by_predicate(&master, population, &Predicate::True, spec.k)?;
                for (target, truth) in spec.cdf_targets.iter().zip(&cdf_truths) {
                    let est = ordinary_cdf(&sample, target)?;
                    row.push(ks_cdf(&est, truth)?);
                }
                for ((mass, by), truth) in spec.mass_targets.iter().zip(&mass_truths) {
                    let est = mass_distribution(&sample, mass, by)?;
                    row.push(ks_mass(&est, truth)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut col = 0;
    for weighting in &spec.weightings {
        for target in &spec.cdf_targets {
            let values: Vec<f64> = per_run.iter().map(|row| row[col]).collect();
            cells.push(KsCell {
                weighting: weighting.clone(),
                target: target.clone(),
                by: None,
                median_ks: median(&values),
                runs: spec.runs,
                values,
            });
            col += 1;
        }
        for (mass, by) in &spec.mass_targets {
            let values: Vec<f64> = per_run.iter().map(|row| row[col]).collect();
            cells.push(KsCell {
                weighting: weighting.clone(),
                target: mass.clone(),
                by: Some(by.clone()),
                median_ks: median(&values),
                runs: spec.runs,
                values,
            });
            col += 1;
        }
    }
    Ok(KsTable { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_nodes, SynthConfig};

    fn cdf(points: Vec<(f64, f64)>) -> DistributionEstimate {
        DistributionEstimate {
            variable: "x".to_string(),
            weight_spec: WeightSpec::Uniform,
            k: 0,
            z: 0.0,
            points,
        }
    }

    fn mass(triples: Vec<(f64, f64, f64)>) -> MassDistributionEstimate {
        MassDistributionEstimate {
            mass_variable: "x".to_string(),
            quantile_variable: "x".to_string(),
            weight_spec: WeightSpec::Uniform,
            k: 0,
            z: 0.0,
            breakpoints: triples.iter().map(|&(y, ..)| y).collect(),
            points: triples.into_iter().map(|(_, q, r)| (q, r)).collect(),
        }
    }

    #[test]
    fn identical_curves_have_zero_distance() {
        let a = cdf(vec![(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]);
        assert_eq!(ks_cdf(&a, &a.clone()).unwrap(), 0.0);
    }

    #[test]
    fn single_point_difference() {
        let a = cdf(vec![(0.0, 0.5), (1.0, 1.0)]);
        let b = cdf(vec![(0.0, 0.25), (1.0, 1.0)]);
        assert_eq!(ks_cdf(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn union_grid_catches_offset_breakpoints() {
        let a = cdf(vec![(1.0, 0.5), (3.0, 1.0)]);
        let b = cdf(vec![(2.0, 0.5), (3.0, 1.0)]);
        // On [1,2) a is 0.5 while b is still 0.
        assert_eq!(ks_cdf(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn malformed_curves_rejected() {
        let cases: Vec<Vec<(f64, f64)>> = vec![
            vec![],
            vec![(1.0, 0.5)],                          // never reaches 1
            vec![(2.0, 0.5), (1.0, 1.0)],              // x not increasing
            vec![(1.0, 0.8), (2.0, 0.5), (3.0, 1.0)],  // ordinate dips
            vec![(1.0, 1.2), (2.0, 1.0)],              // outside [0,1]
        ];
        for points in cases {
            let bad = cdf(points.clone());
            let good = cdf(vec![(1.0, 1.0)]);
            assert!(
                ks_cdf(&bad, &good).is_err(),
                "expected MalformedCurve for {points:?}"
            );
        }
    }

    #[test]
    fn mass_comparison_is_on_the_value_axis() {
        // Same count quantiles; r differs by 0.5 until the last value.
        let a = mass(vec![(1.0, 0.5, 0.1), (3.0, 1.0, 1.0)]);
        let b = mass(vec![(1.0, 0.5, 0.6), (3.0, 1.0, 1.0)]);
        assert_eq!(ks_mass(&a, &b).unwrap(), 0.5);
        // Offset value breakpoints: on [1,2) a reports 0.6 while b is still 0.
        let a = mass(vec![(1.0, 0.5, 0.6), (3.0, 1.0, 1.0)]);
        let b = mass(vec![(2.0, 0.5, 0.6), (3.0, 1.0, 1.0)]);
        assert_eq!(ks_mass(&a, &b).unwrap(), 0.6);
    }

    #[test]
    fn mass_count_quantiles_do_not_affect_the_distance() {
        // Identical r at every value; only the count quantiles disagree.
        let a = mass(vec![(1.0, 0.2, 0.5), (2.0, 1.0, 1.0)]);
        let b = mass(vec![(1.0, 0.9, 0.5), (2.0, 1.0, 1.0)]);
        assert_eq!(ks_mass(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn malformed_mass_curves_rejected() {
        let good = mass(vec![(1.0, 1.0, 1.0)]);
        // Value breakpoints must be strictly increasing.
        let bad = mass(vec![(2.0, 0.5, 0.5), (1.0, 1.0, 1.0)]);
        assert!(ks_mass(&bad, &good).is_err());
        // q must stay a sound CDF even though it is not part of the distance.
        let bad = mass(vec![(1.0, 0.9, 0.5), (2.0, 0.4, 1.0)]);
        assert!(ks_mass(&bad, &good).is_err());
        // Parallel arrays must agree in length.
        let mut bad = mass(vec![(1.0, 0.5, 0.5), (2.0, 1.0, 1.0)]);
        bad.breakpoints.pop();
        assert!(ks_mass(&bad, &good).is_err());
    }

    #[test]
    fn qq_of_identical_curves_is_diagonal() {
        let a = mass(vec![(1.0, 0.2, 0.05), (2.0, 0.7, 0.4), (3.0, 1.0, 1.0)]);
        let qq = qq_curve(&a, &a.clone()).unwrap();
        for (t, e) in qq {
            assert_eq!(t, e);
        }
    }

    #[test]
    fn qq_is_monotone_in_both_coordinates() {
        let a = mass(vec![(1.0, 0.3, 0.2), (2.0, 0.8, 0.5), (3.0, 1.0, 1.0)]);
        let b = mass(vec![(1.0, 0.2, 0.1), (2.0, 0.6, 0.7), (3.0, 1.0, 1.0)]);
        let qq = qq_curve(&a, &b).unwrap();
        let (mut pt, mut pe) = (0.0, 0.0);
        for (t, e) in qq {
            assert!(t >= pt && e >= pe);
            pt = t;
            pe = e;
        }
    }

    #[test]
    fn exhaustive_eval_is_exactly_zero() {
        let nodes = generate_nodes(&SynthConfig {
            n_nodes: 300,
            seed: 31,
            ..SynthConfig::default()
        })
        .unwrap();
        let population = Population::new(nodes).unwrap();
        let spec = EvalSpec {
            weightings: vec![WeightSpec::Uniform, WeightSpec::feature("fo")],
            cdf_targets: vec!["fo".to_string(), "ac".to_string()],
            mass_targets: vec![("fo".to_string(), "fo".to_string())],
            runs: 1,
            k: population.len(),
            base_seed: 5,
        };
        let table = run_eval(&population, &spec).unwrap();
        assert_eq!(table.cells.len(), 6);
        for cell in &table.cells {
            assert_eq!(cell.median_ks, 0.0, "{cell:?}");
        }
    }

    #[test]
    fn eval_is_deterministic_and_bounded() {
        let nodes = generate_nodes(&SynthConfig {
            n_nodes: 2000,
            seed: 17,
            ..SynthConfig::default()
        })
        .unwrap();
        let population = Population::new(nodes).unwrap();
        let spec = EvalSpec {
            weightings: vec![WeightSpec::Uniform, WeightSpec::feature("fo")],
            cdf_targets: vec!["fo".to_string()],
            mass_targets: vec![("fo".to_string(), "fo".to_string())],
            runs: 4,
            k: 250,
            base_seed: 100,
        };
        let a = run_eval(&population, &spec).unwrap();
        let b = run_eval(&population, &spec).unwrap();
        assert_eq!(a, b);
        for cell in &a.cells {
            assert!((0.0..=1.0).contains(&cell.median_ks));
            assert_eq!(cell.values.len(), 4);
        }
    }

    #[test]
    fn weighted_mass_beats_uniform_on_its_own_feature() {
        let nodes = generate_nodes(&SynthConfig {
            n_nodes: 20_000,
            seed: 23,
            ..SynthConfig::default()
        })
        .unwrap();
        let population = Population::new(nodes).unwrap();
        let spec = EvalSpec {
            weightings: vec![WeightSpec::Uniform, WeightSpec::feature("fo")],
            cdf_targets: vec![],
            mass_targets: vec![("fo".to_string(), "fo".to_string())],
            runs: 5,
            k: 500,
            base_seed: 7,
        };
        let table = run_eval(&population, &spec).unwrap();
        let uniform = table
            .cell(&WeightSpec::Uniform, "fo", Some("fo"))
            .unwrap()
            .median_ks;
        let weighted = table
            .cell(&WeightSpec::feature("fo"), "fo", Some("fo"))
            .unwrap()
            .median_ks;
        assert!(
            weighted < uniform,
            "feature-weighted {weighted} should beat uniform {uniform}"
        );
    }

    #[test]
    fn table_formats_align_and_roundtrip() {
        let table = KsTable {
            cells: vec![
                KsCell {
                    weighting: WeightSpec::Uniform,
                    target: "fo".to_string(),
                    by: None,
                    median_ks: 0.0625,
                    runs: 3,
                    values: vec![0.05, 0.0625, 0.07],
                },
                KsCell {
                    weighting: WeightSpec::ratio("fo2", "fo1"),
                    target: "ffan".to_string(),
                    by: Some("ffan".to_string()),
                    median_ks: 0.5,
                    runs: 3,
                    values: vec![0.4, 0.5, 0.6],
                },
            ],
        };
        let text = table.to_string();
        assert!(text.contains("median_ks"));
        assert!(text.contains("ratio:fo2/fo1"));
        assert!(text.contains("0.0625"), "full precision: {text}");
        let rows = table.rows();
        assert_eq!(rows[0].2, "");
        assert_eq!(rows[1].2, "ffan");
        let json = serde_json::to_string(&table).unwrap();
        let back: KsTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }
}
