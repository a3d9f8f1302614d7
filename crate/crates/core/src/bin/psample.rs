//! Command-line pipeline: synthesize populations, build master samples,
//! play out and extend samples, estimate distributions, and run the KS
//! evaluation protocol. Every command is deterministic given its flags;
//! seeds are always explicit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use psample::estimate::{
    mass_distribution, ordinary_cdf, DistributionEstimate, MassDistributionEstimate,
};
use psample::eval::{qq_curve, run_eval, EvalSpec};
use psample::model::{
    read_records_csv, write_links_csv, write_nodes_csv, Population, Predicate, RecordKind,
    WeightSpec,
};
use psample::playout::{extend_sample, sample_by_predicate, sample_cost_limited, SampleResult};
use psample::sampler::{load_master, master_from_records, save_master};
use psample::synth::{generate_links, generate_nodes, true_cdf, true_mass, SynthConfig};
use psample::{Error, Result};

#[derive(Parser)]
#[command(name = "psample", version, about = "Priority-sample provisioning over graph records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable structured text (JSON for curves, aligned table for eval).
    Text,
    /// Plain numeric rows for machine consumption and plotting.
    Rows,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic node and/or link population.
    Synth {
        /// Structured config file (JSON); flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Node count override.
        #[arg(long)]
        nodes: Option<usize>,
        /// Link count override.
        #[arg(long)]
        links: Option<usize>,
        #[arg(long)]
        seed: u64,
        /// Node CSV output path.
        #[arg(long, required_unless_present = "out_links")]
        out: Option<PathBuf>,
        /// Link CSV output path.
        #[arg(long)]
        out_links: Option<PathBuf>,
    },
    /// Build and persist a master sample from a record CSV.
    Build {
        #[arg(long)]
        input: PathBuf,
        /// Weighting: uniform | feature:NAME | ratio:NUM/DEN.
        #[arg(long)]
        weight: WeightSpec,
        #[arg(long)]
        seed: u64,
        /// Optional cap on stored entries.
        #[arg(long)]
        kmax: Option<usize>,
        /// Master data file path (metadata sidecar written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Play out a sample from a persisted master.
    Sample {
        #[arg(long)]
        master: PathBuf,
        /// The record CSV the master was built from.
        #[arg(long)]
        input: PathBuf,
        /// Selection predicate, e.g. "fo>=100 && ac>8"; default keeps everything.
        #[arg(long)]
        predicate: Option<String>,
        #[arg(long)]
        k: usize,
        /// Bound scan depth instead of match count.
        #[arg(long)]
        cost_limited: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow a previous sample by j further matches, reusing its master.
    Extend {
        #[arg(long)]
        master: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Previously written sample file.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a distribution from a stored sample.
    Estimate {
        #[arg(long)]
        sample: PathBuf,
        /// Ordinary CDF of this variable.
        #[arg(long, conflicts_with_all = ["mass", "by"], required_unless_present = "mass")]
        cdf: Option<String>,
        /// Mass variable; pairs with --by.
        #[arg(long, requires = "by")]
        mass: Option<String>,
        /// Quantile variable for the mass curve.
        #[arg(long, requires = "mass")]
        by: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact population CDF, same output shape as `estimate --cdf`.
    TrueCdf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cdf: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact population mass curve, same output shape as `estimate --mass`.
    TrueMass {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mass: String,
        #[arg(long)]
        by: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantile-quantile data: estimated vs exact mass curve.
    Qq {
        #[arg(long)]
        sample: PathBuf,
        /// Record CSV providing the exact curve.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mass: String,
        #[arg(long)]
        by: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median-KS evaluation over repeated master draws.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// Restrict to these weightings (repeatable); default depends on record kind.
        #[arg(long)]
        weight: Vec<WeightSpec>,
        /// Restrict ordinary-CDF targets (repeatable).
        #[arg(long)]
        cdf: Vec<String>,
        /// Restrict to a single mass pair (with --by).
        #[arg(long, requires = "by")]
        mass: Option<String>,
        #[arg(long, requires = "mass")]
        by: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn file_error(path: &Path, e: std::io::Error) -> Error {
    Error::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| file_error(path, e))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| file_error(path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_predicate(text: Option<&str>) -> Result<Predicate> {
    match text {
        Some(t) => t.parse(),
        None => Ok(Predicate::True),
    }
}

fn load_sample(path: &Path) -> Result<SampleResult> {
    SampleResult::from_json(&read_file(path)?)
}

fn curve_rows(points: &[(f64, f64)]) -> String {
    let mut text = String::new();
    for (x, y) in points {
        let _ = writeln!(text, "{x} {y}");
    }
    text
}

fn cdf_output(est: &DistributionEstimate, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => {
            let mut t = serde_json::to_string_pretty(est).map_err(Error::from)?;
            t.push('\n');
            t
        }
        Format::Rows => curve_rows(&est.points),
    })
}

fn mass_output(est: &MassDistributionEstimate, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => {
            let mut t = serde_json::to_string_pretty(est).map_err(Error::from)?;
            t.push('\n');
            t
        }
        Format::Rows => curve_rows(&est.points),
    })
}

/// Default evaluation grid mirroring the record kind's feature set.
fn default_eval_axes(
    kind: RecordKind,
) -> (Vec<WeightSpec>, Vec<String>, Vec<(String, String)>) {
    match kind {
        RecordKind::Node => (
            vec![
                WeightSpec::Uniform,
                WeightSpec::feature("fo"),
                WeightSpec::feature("fr"),
                WeightSpec::feature("ac"),
            ],
            vec!["fo".to_string(), "fr".to_string(), "ac".to_string()],
            ["fo", "fr", "ac"]
                .iter()
                .map(|x| (x.to_string(), x.to_string()))
                .collect(),
        ),
        RecordKind::Link => (
            vec![
                WeightSpec::Uniform,
                WeightSpec::feature("fo1"),
                WeightSpec::feature("fo2"),
                WeightSpec::ratio("fo2", "fo1"),
            ],
            vec!["fo1".to_string(), "fo2".to_string(), "ffan".to_string()],
            ["fo1", "fo2", "ffan"]
                .iter()
                .map(|x| ("ffan".to_string(), x.to_string()))
                .collect(),
        ),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            nodes,
            links,
            seed,
            out,
            out_links,
        } => {
            let mut cfg: SynthConfig = match config {
                Some(path) => serde_json::from_str(&read_file(&path)?)?,
                None => SynthConfig::default(),
            };
            if let Some(n) = nodes {
                cfg.n_nodes = n;
            }
            if let Some(n) = links {
                cfg.n_links = n;
            }
            cfg.seed = seed;
            let node_records = generate_nodes(&cfg)?;
            if let Some(path) = out {
                let population = Population::new(node_records.clone())?;
                write_nodes_csv(path, &population)?;
            }
            if let Some(path) = out_links {
                let link_records = generate_links(&node_records, cfg.n_links, cfg.seed)?;
                let population = Population::new(link_records)?;
                write_links_csv(path, &population)?;
            }
            Ok(())
        }
        Command::Build {
            input,
            weight,
            seed,
            kmax,
            out,
        } => {
            let population = read_records_csv(input)?;
            let master = master_from_records(population.records(), &weight, seed, kmax)?;
            save_master(&master, out)
        }
        Command::Sample {
            master,
            input,
            predicate,
            k,
            cost_limited,
            out,
        } => {
            let master = load_master(master)?;
            let population = read_records_csv(input)?;
            let predicate = parse_predicate(predicate.as_deref())?;
            let sample = if cost_limited {
                sample_cost_limited(&master, &population, &predicate, k)?
            } else {
                sample_by_predicate(&master, &population, &predicate, k)?
            };
            write_output(Some(&out), &sample.to_json()?)
        }
        Command::Extend {
            master,
            input,
            sample,
            j,
            out,
        } => {
            let master = load_master(master)?;
            let population = read_records_csv(input)?;
            let prev = load_sample(&sample)?;
            let grown = extend_sample(&master, &population, &prev, j)?;
            write_output(Some(&out), &grown.to_json()?)
        }
        Command::Estimate {
            sample,
            cdf,
            mass,
            by,
            format,
            out,
        } => {
            let sample = load_sample(&sample)?;
            let text = if let Some(variable) = cdf {
                cdf_output(&ordinary_cdf(&sample, &variable)?, format)?
            } else {
                let (mass, by) = (mass.unwrap(), by.unwrap());
                mass_output(&mass_distribution(&sample, &mass, &by)?, format)?
            };
            write_output(out.as_deref(), &text)
        }
        Command::TrueCdf {
            input,
            cdf,
            format,
            out,
        } => {
            let population = read_records_csv(input)?;
            let truth = true_cdf(population.records(), &cdf)?;
            write_output(out.as_deref(), &cdf_output(&truth, format)?)
        }
        Command::TrueMass {
            input,
            mass,
            by,
            format,
            out,
        } => {
            let population = read_records_csv(input)?;
            let truth = true_mass(population.records(), &mass, &by)?;
            write_output(out.as_deref(), &mass_output(&truth, format)?)
        }
        Command::Qq {
            sample,
            input,
            mass,
            by,
            out,
        } => {
            let sample = load_sample(&sample)?;
            let population = read_records_csv(input)?;
            let est = mass_distribution(&sample, &mass, &by)?;
            let truth = true_mass(population.records(), &mass, &by)?;
            let points = qq_curve(&est, &truth)?;
            write_output(out.as_deref(), &curve_rows(&points))
        }
        Command::Eval {
            input,
            runs,
            k,
            seed,
            weight,
            cdf,
            mass,
            by,
            format,
            out,
        } => {
            let population = read_records_csv(input)?;
            let kind = population
                .records()
                .first()
                .map(|r| r.kind)
                .ok_or_else(|| Error::InvalidArgument("input has no records".to_string()))?;
            let (mut weightings, mut cdf_targets, mut mass_targets) = default_eval_axes(kind);
            if !weight.is_empty() {
                weightings = weight;
            }
            let explicit_targets = !cdf.is_empty() || mass.is_some();
            if explicit_targets {
                cdf_targets = cdf;
                mass_targets = match (mass, by) {
                    (Some(m), Some(b)) => vec![(m, b)],
                    _ => Vec::new(),
                };
            }
            let spec = EvalSpec {
                weightings,
                cdf_targets,
                mass_targets,
                runs,
                k,
                base_seed: seed,
            };
            let table = run_eval(&population, &spec)?;
            let text = match format {
                Format::Text => table.to_string(),
                Format::Rows => {
                    let mut t = String::from("weighting,target,by,median_ks,runs\n");
                    for (w, target, by, ks, runs) in table.rows() {
                        let _ = writeln!(t, "{w},{target},{by},{ks},{runs}");
                    }
                    t
                }
            };
            write_output(out.as_deref(), &text)
        }
    }
}
