use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chronotopic::embedding::convert_jsonl;
use chronotopic::fixture::{generate, write_fixture, FixtureParams};
use chronotopic::pipeline::{
    cmd_dynamic, cmd_evaluate, cmd_fit, cmd_prepare, cmd_report, cmd_tune, FitOptions, ModelKind, PipelineConfig,
};
use chronotopic::{Error, Result};

#[derive(Parser)]
#[command(name = "chronotopic", version, about = "Topic modeling with topics over time, coherence evaluation and tuning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, tokenize and filter the corpus; build vocabulary and bin map.
    Prepare(Common),
    /// Fit models and write dumps plus evaluation reports.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        k: Option<usize>,
        /// Tuned `[cluster]` parameters written by `tune`.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Build the comparison table from the fitted models.
    Evaluate(Common),
    /// Topics over time of the whole-corpus cluster model, with charts.
    Dynamic(Common),
    /// Search cluster-model parameters.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Write the HTML index.
    Report(Common),
    /// prepare, fit, evaluate, dynamic and report in sequence.
    Run(Common),
    /// Convert jsonl `{uid, vector}` records to the binary embedding format.
    ConvertEmbeddings {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        index: PathBuf,
    },
    /// Write the synthetic mini corpus with its manifest and config.
    GenerateFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        n_docs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.output_dir {
        cfg.output_dir = std::env::current_dir().map_err(|e| Error::io(".", e))?.join(o);
    }
    Ok(cfg)
}

fn prepare(cfg: &PipelineConfig) -> Result<()> {
    let (s, _) = cmd_prepare(cfg)?;
    println!(
        "documents in: {}, documents out: {}, vocabulary: {}, bin sizes: {:?}",
        s.docs_in, s.docs_out, s.vocab_size, s.bin_sizes
    );
    if let Some(c) = s.entity_coverage {
        println!("entity coverage: {c:.3}");
    }
    Ok(())
}

fn fit(cfg: &PipelineConfig, opts: &FitOptions) -> Result<()> {
    let (reports, _) = cmd_fit(cfg, opts)?;
    for r in &reports {
        println!(
            "{} {} K={} ({} scored): TC {:.3} TD {:.3} in {:.2}s",
            r.model, r.subset, r.n_topics, r.scored_topics, r.tc, r.td, r.fit_seconds
        );
    }
    Ok(())
}

fn evaluate(cfg: &PipelineConfig) -> Result<()> {
    let (table, _) = cmd_evaluate(cfg)?;
    print!("{}", table.to_markdown());
    Ok(())
}

fn dynamic(cfg: &PipelineConfig) -> Result<()> {
    let (tot, _) = cmd_dynamic(cfg)?;
    println!("{} topic/bin rows over {} bins", tot.rows.len(), tot.bins.len());
    Ok(())
}

fn report(cfg: &PipelineConfig) -> Result<()> {
    let (path, _) = cmd_report(cfg)?;
    println!("{}", path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(c) => prepare(&load(&c)?),
        Command::Fit {
            common,
            model,
            k,
            params,
        } => {
            let mut cfg = load(&common)?;
            if let Some(p) = params {
                cfg.apply_params_file(&p)?;
            }
            fit(&cfg, &FitOptions { model, k })
        }
        Command::Evaluate(c) => evaluate(&load(&c)?),
        Command::Dynamic(c) => dynamic(&load(&c)?),
        Command::Tune { common, max_evals } => {
            let (o, _) = cmd_tune(&load(&common)?, max_evals)?;
            println!(
                "best loss {:.4} after {} trials: {}",
                o.best_loss,
                o.trials.len(),
                serde_json::to_string(&o.best).unwrap_or_default()
            );
            Ok(())
        }
        Command::Report(c) => report(&load(&c)?),
        Command::Run(c) => {
            let cfg = load(&c)?;
            prepare(&cfg)?;
            fit(&cfg, &FitOptions::default())?;
            evaluate(&cfg)?;
            if cfg.models.enabled.contains(&ModelKind::Cluster) {
                dynamic(&cfg)?;
            }
            report(&cfg)
        }
        Command::ConvertEmbeddings { input, vectors, index } => {
            let n = convert_jsonl(&input, &vectors, &index)?;
            println!("{n} vectors written");
            Ok(())
        }
        Command::GenerateFixture { out, n_docs, seed } => {
            let mut p = FixtureParams {
                n_docs,
                ..FixtureParams::default()
            };
            if let Some(s) = seed {
                p.seed = s;
            }
            write_fixture(&out, &generate(&p)?)?;
            println!("fixture written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("CHRONOTOPIC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the thread pool: {e}");
                }
            }
            _ => eprintln!("warning: ignoring CHRONOTOPIC_THREADS={v:?}"),
        }
    }
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
