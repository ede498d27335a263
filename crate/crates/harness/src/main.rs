use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rcs_harness::config::ExperimentGrid;
use rcs_harness::{aggregate_table, emit, grid, ingest};

#[derive(Parser)]
#[command(
    name = "rcs",
    about = "Consensus sampling protocols over model groups: grid experiments, \
             summaries, and exact small-instance oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write results.
    Run {
        /// Grid config file (TOML); omit to use the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in grid: "paper" (full scale) or "ci" (reduced).
        #[arg(long, default_value = "paper")]
        preset: String,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override trials per cell.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// "csv" writes results.csv; "plotdata" additionally writes
        /// per-figure series files.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Summarize a results CSV into a per-protocol comparison table.
    Analyze {
        /// Path to a results.csv produced by `run`.
        results: PathBuf,
    },
    /// Validate a distribution file against the ingestion grammar.
    IngestCheck {
        file: PathBuf,
    },
    /// Exact unsafe-delivery probability of the trace-based protocol on a
    /// small instance, by exhaustive enumeration in rational arithmetic.
    Oracle {
        /// Distribution file defining the instance.
        file: PathBuf,
        /// Round budget R.
        #[arg(long)]
        rounds: usize,
        /// Declared safe count; defaults to ceil((n+1)/2).
        #[arg(long)]
        s_declared: Option<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            preset,
            seed,
            trials,
            out,
            format,
        } => run(config, &preset, seed, trials, &out, &format),
        Command::Analyze { results } => analyze(&results),
        Command::IngestCheck { file } => ingest_check(&file),
        Command::Oracle {
            file,
            rounds,
            s_declared,
        } => oracle(&file, rounds, s_declared),
    }
}

fn run(
    config: Option<PathBuf>,
    preset: &str,
    seed: Option<u64>,
    trials: Option<usize>,
    out: &std::path::Path,
    format: &str,
) -> Result<()> {
    let mut experiment = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            ExperimentGrid::from_toml_str(&text)?
        }
        None => ExperimentGrid::preset(preset)?,
    };
    if let Some(seed) = seed {
        experiment.base_seed = seed;
    }
    if let Some(trials) = trials {
        experiment.trials_per_cell = trials;
    }

    let output = grid::run_grid(&experiment)?;
    emit::write_csv(&output, out)?;
    match format {
        "csv" => {}
        "plotdata" => {
            let files = emit::write_plotdata(&output, out)?;
            eprintln!("wrote {files} series files under {}", out.join("plotdata").display());
        }
        other => bail!("unknown format {other:?} (expected csv or plotdata)"),
    }
    eprintln!("wrote {}", out.join("results.csv").display());
    if !output.failures.is_empty() {
        eprintln!(
            "{} cell(s) failed; see {}",
            output.failures.len(),
            out.join("failures.csv").display()
        );
    }
    let table = aggregate_table(&output.cells)?;
    println!("{table}");
    Ok(())
}

fn analyze(results: &std::path::Path) -> Result<()> {
    let text = std::fs::read_to_string(results)
        .with_context(|| format!("cannot read {}", results.display()))?;
    let cells = emit::parse_results_csv(&text)?;
    let table = aggregate_table(&cells)?;
    println!("{table}");
    Ok(())
}

fn ingest_check(file: &std::path::Path) -> Result<()> {
    let parsed = ingest::ingest_distributions(file)?;
    println!(
        "ok: space size {}, {} unsafe responses, {} models ({})",
        parsed.space.size(),
        parsed.space.unsafe_set().len(),
        parsed.models.len(),
        parsed.ids.join(", ")
    );
    Ok(())
}

fn oracle(file: &std::path::Path, rounds: usize, s_declared: Option<usize>) -> Result<()> {
    use num_traits::ToPrimitive;
    use rcs_core::analysis;
    use rcs_core::scalar::Scalar;
    use rcs_core::{ExactGroup, ExactScalar};

    let text = std::fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let parsed = ingest::parse_distributions_exact(&text)?;
    let n = parsed.models.len();
    let s = s_declared.unwrap_or((n + 1).div_ceil(2));
    let group = ExactGroup::new(parsed.space, parsed.models, s)?;

    let q = analysis::exhaustive_q(&group, rounds)?;
    let z = group.overlap_z();
    let pr_trace = Scalar::powi(&(ExactScalar::from_integer(1.into()) - z.clone()), rounds as u32);
    let mu_os = analysis::mu_unsafe_order_stat(&group);
    let bound = ExactScalar::from_integer((rounds as i64).into()) * mu_os.clone() + pr_trace.clone();

    println!("n={} s={} R={} |Y|={}", n, s, rounds, group.space().size());
    println!("q_unsafe = {} (~{:.6})", q, q.to_f64().unwrap_or(f64::NAN));
    println!("Z = {} (~{:.6})", z, z.to_f64().unwrap_or(f64::NAN));
    println!(
        "pr_trace = {} (~{:.6})",
        pr_trace,
        pr_trace.to_f64().unwrap_or(f64::NAN)
    );
    println!(
        "mu_order_stat = {} (~{:.6})",
        mu_os,
        mu_os.to_f64().unwrap_or(f64::NAN)
    );
    println!(
        "bound R*mu + pr_trace = {} (~{:.6})",
        bound,
        bound.to_f64().unwrap_or(f64::NAN)
    );
    println!("q <= bound: {}", q <= bound);
    Ok(())
}
