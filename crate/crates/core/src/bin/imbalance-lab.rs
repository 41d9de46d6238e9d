use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use imbalance_lab::chart::{emit_chart, CellFilter};
use imbalance_lab::config::{aggregate_iv, synthesize_config};
use imbalance_lab::datagen::{RngStream, Role};
use imbalance_lab::guideline::{default_aiv_grid, guideline_from_summary};
use imbalance_lab::io;
use imbalance_lab::mc::{paper_sizes, run_grid, summarize, Execution, RunSpec, Split, SummaryMetric};
use imbalance_lab::metrics::MetricId;
use imbalance_lab::scorecard::DEFAULT_THETA_ADJ;
use imbalance_lab::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "imbalance-lab", version, about = "Class-imbalance Monte Carlo study for WoE logistic scorecards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and print its information values.
    Validate { config: PathBuf },
    /// Run the Monte Carlo grid and write one record per iteration.
    Run {
        /// Built-in id (A, B, C, D) or path to a configuration JSON file.
        #[arg(long, num_args = 1.., required = true)]
        config: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.10])]
        rates: Vec<f64>,
        /// Comma-separated sample sizes, or `paper`.
        #[arg(long, default_value = "paper")]
        sizes: String,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_THETA_ADJ)]
        theta_adj: f64,
        /// Use this many events in every sample instead of the rate list.
        #[arg(long)]
        fixed_events: Option<usize>,
        /// Fail cells where floor(rate * n) is 0 instead of using one event.
        #[arg(long)]
        no_clamp: bool,
        /// Worker threads (0 = all cores, 1 = serial).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a results file to per-cell quantiles.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit logistic curves of the median metric against AIV and tabulate them.
    Guideline {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2500)]
        n: usize,
        #[arg(long, default_value = "f1")]
        metric: MetricId,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a configuration with a target aggregate information value.
    Synth {
        #[arg(long)]
        d: usize,
        /// Bin count per predictor; a single value applies to all predictors.
        #[arg(long, value_delimiter = ',', required = true)]
        bins: Vec<usize>,
        #[arg(long)]
        aiv: f64,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw median and interquartile bands against sample size as SVG.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// `config:metric:split`, e.g. `B:f1:test`.
        #[arg(long)]
        cell: CellFilter,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Error> {
    if s == "paper" {
        return Ok(paper_sizes());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidRunSpec(format!("sample size `{t}`: {e}")))
        })
        .collect()
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { config } => {
            let config = io::load_config(&config)?;
            let report = aggregate_iv(&config);
            println!("config {} is valid: {} predictors", config.id, config.d());
            for (p, iv) in config.predictors.iter().zip(&report.iv) {
                println!("  {:<12} bins={:<3} iv={iv:.4}", p.name, p.bins());
            }
            println!("  aiv={:.4}", report.aiv);
        }
        Command::Run { config, rates, sizes, iters, seed, theta_adj, fixed_events, no_clamp, threads, out } => {
            let configs = config.iter().map(|c| io::resolve_config(c)).collect::<Result<Vec<_>, _>>()?;
            let mut spec = RunSpec::new(configs, seed);
            spec.rates = rates;
            spec.sizes = parse_sizes(&sizes)?;
            spec.iterations = iters;
            spec.settings.theta_adj = theta_adj;
            spec.fixed_events = fixed_events;
            spec.clamp = !no_clamp;
            spec.validate()?;

            let run = if threads == 1 {
                run_grid(&spec, Execution::Serial)?
            } else {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
                pool.install(|| run_grid(&spec, Execution::Parallel))?
            };
            io::save_results(&out, &run.records)?;
            let clamped = run.records.iter().filter(|r| r.clamped).count();
            let nonconverged = run.records.iter().filter(|r| r.is_valid() && !r.converged).count();
            eprintln!(
                "wrote {} records to {} ({} clamped, {} non-converged, {} invalid)",
                run.records.len(),
                out.display(),
                clamped,
                nonconverged,
                run.failures.len()
            );
            for f in run.failures.iter().take(5) {
                eprintln!("  invalid: {} n={} rate={} iteration={}: {}", f.config_id, f.n, f.event_rate, f.iteration, f.reason);
            }
        }
        Command::Summarize { input, out } => {
            let records = io::load_results(&input)?;
            let summary = summarize(&records)?;
            io::save_summary(&out, &summary.records)?;
            for (id, n, rate, count) in &summary.invalid {
                eprintln!("excluded {count} invalid iterations from {id} n={n} rate={rate}");
            }
            eprintln!("wrote {} summary rows to {}", summary.records.len(), out.display());
        }
        Command::Guideline { input, n, metric, split, out } => {
            let summary = io::load_summary(&input)?;
            let metric = match metric {
                MetricId::F1 => SummaryMetric::F1,
                MetricId::P4 => SummaryMetric::P4,
            };
            let (fits, table) = guideline_from_summary(&summary, n, metric, split, &default_aiv_grid())?;
            io::save_guideline(&out, &table)?;
            for (rate, fit) in &fits {
                eprintln!("rate {rate}: L={:.4} k={:.4} x0={:.4} rss={:.3e}", fit.l, fit.k, fit.x0, fit.rss);
            }
            print!("{}", table.render());
        }
        Command::Synth { d, bins, aiv, tol, seed, id, out } => {
            let bins = match bins.len() {
                1 => vec![bins[0]; d],
                k if k == d => bins,
                k => {
                    return Err(Error::InvalidConfig(format!("--bins lists {k} counts but --d is {d}")));
                }
            };
            let id = id.unwrap_or_else(|| format!("synth-d{d}-aiv{aiv}"));
            let config = synthesize_config(id, &bins, aiv, tol, &RngStream::new(seed, 0, Role::Synth))?;
            io::save_config(&config, &out)?;
            eprintln!("wrote {} with aiv {:.4}", out.display(), aggregate_iv(&config).aiv);
        }
        Command::Report { input, cell, out } => {
            let summary = io::load_summary(&input)?;
            let svg = emit_chart(&summary, &cell)?;
            fs::write(&out, svg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_RUNTIME })
        }
    }
}
