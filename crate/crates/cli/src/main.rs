use clap::{Args, Parser, Subcommand};
use graphmix_cli::commands::{
    cmd_analyze, cmd_check_equivalence, cmd_make_bundle, cmd_reproduce_table, cmd_sweep_ratio,
    cmd_train, CliError,
};
use graphmix_cli::config::{ConfigFile, ExperimentConfig, FlagOverrides};
use graphmix_cli::report::TableId;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "graphmix",
    version,
    about = "Graph convolution as Mixup: training, table reproduction, oracle checks, analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; unset flags fall back to the config
/// file given via --config, then to built-in defaults.
#[derive(Debug, Args)]
struct CommonFlags {
    /// JSON config file mirroring the experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundle directory, or synthetic:three_node / synthetic:two_clusters[:seed]
    #[arg(long)]
    dataset: Option<String>,
    /// mlp | gcn | sgc | ppnp | hmlp | tmlp | unified
    #[arg(long)]
    model: Option<String>,
    /// Number of linear layers (SGC: adjacency power)
    #[arg(long)]
    depth: Option<usize>,
    /// Hidden width of every non-final layer
    #[arg(long)]
    hidden: Option<usize>,
    /// Train fraction; the remainder splits evenly into val and test
    #[arg(long, conflicts_with = "split")]
    ratio: Option<f64>,
    /// Use a named split shipped with the bundle (e.g. "public")
    #[arg(long)]
    split: Option<String>,
    /// Number of repetition seeds for seed-averaged commands
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed (initialization; also the split seed for --ratio)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Add self-loops before normalizing the adjacency
    #[arg(long = "self-loops")]
    self_loops: Option<bool>,
    /// row | symmetric
    #[arg(long)]
    norm: Option<String>,
    /// Output directory (created if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model; writes run.jsonl, summary.json, model.ckpt
    Train {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Re-run a published table's model grid and print it beside the
    /// reference values
    ReproduceTable {
        /// t1_hmlp | t2_tmlp | t3_ppnp | t5_depth
        table: String,
        /// Datasets to run (default: the table's own datasets)
        #[arg(long, value_delimiter = ',')]
        datasets: Vec<String>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Accuracy-vs-train-ratio curves; writes sweep.csv and sweep.svg
    SweepRatio {
        /// Models to sweep (default: gcn,hmlp)
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Train ratios (default: 0.1..0.9 step 0.1)
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run the oracle suite (mixup equivalence, relabel example, collapses,
    /// gradients); exits 1 if any check fails
    CheckEquivalence {
        /// Number of random graphs for the equivalence checks
        #[arg(long)]
        graphs: Option<usize>,
        /// Corrupt one adjacency row so the row-stochasticity check must fail
        #[arg(long)]
        inject_fault: bool,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Margin, embedding, and decision-boundary artifacts for a checkpoint
    Analyze {
        /// Checkpoint written by `train` (model.ckpt)
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Write the configured dataset (with its split applied) as a bundle
    MakeBundle {
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn resolve_config(flags: &CommonFlags) -> Result<ExperimentConfig, CliError> {
    let file = match &flags.config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let overrides = FlagOverrides {
        dataset: flags.dataset.clone(),
        model: flags.model.clone(),
        depth: flags.depth,
        hidden: flags.hidden,
        self_loops: flags.self_loops,
        norm: flags.norm.clone(),
        ratio: flags.ratio,
        split: flags.split.clone(),
        lr: flags.lr,
        epochs: flags.epochs,
        seeds: flags.seeds,
        seed: flags.seed,
        out: flags.out.clone(),
    };
    Ok(ExperimentConfig::resolve(file.as_ref(), &overrides)?)
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}%", 100.0 * v),
        None => "-".to_string(),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Train { flags } => {
            let config = resolve_config(&flags)?;
            let outcome = cmd_train(&config)?;
            println!(
                "trained {} on {}: selected epoch {} (val {}, test {}); artifacts in {}",
                config.model,
                config.dataset.as_deref().unwrap_or("-"),
                outcome.record.selected_epoch,
                fmt_pct(outcome.record.selected_val_accuracy),
                fmt_pct(outcome.record.selected_test_accuracy),
                outcome.out_dir.display()
            );
            Ok(0)
        }
        Command::ReproduceTable { table, datasets, flags } => {
            let table: TableId = table.parse().map_err(CliError::Usage)?;
            let config = resolve_config(&flags)?;
            let outcome = cmd_reproduce_table(table, &datasets, &config)?;
            print!("{}", outcome.text);
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(0)
        }
        Command::SweepRatio { models, ratios, flags } => {
            let config = resolve_config(&flags)?;
            let dataset = config
                .dataset
                .clone()
                .ok_or(CliError::Dataset(graphmix_cli::DatasetError::Missing))?;
            let outcome = cmd_sweep_ratio(&dataset, &models, &ratios, &config)?;
            print!("{}", outcome.csv);
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(0)
        }
        Command::CheckEquivalence { graphs, inject_fault, flags } => {
            let config = resolve_config(&flags)?;
            let outcome = cmd_check_equivalence(&config, graphs, inject_fault)?;
            print!("{}", outcome.report);
            println!("report in {}", outcome.out_dir.display());
            Ok(if outcome.all_passed { 0 } else { 1 })
        }
        Command::Analyze { checkpoint, flags } => {
            let config = resolve_config(&flags)?;
            let outcome = cmd_analyze(&config, &checkpoint)?;
            println!(
                "margins: mean delta {:+.4}, {:.0}% of test nodes improved",
                outcome.margins.mean_delta,
                100.0 * outcome.margins.fraction_improved
            );
            match (outcome.embeddings.cluster_score_before, outcome.embeddings.cluster_score_after) {
                (Some(before), Some(after)) => {
                    println!("intra/inter cluster ratio: {before:.4} → {after:.4}");
                }
                (Some(before), None) => println!("intra/inter cluster ratio: {before:.4}"),
                _ => {}
            }
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(0)
        }
        Command::MakeBundle { flags } => {
            let config = resolve_config(&flags)?;
            let dir = cmd_make_bundle(&config)?;
            println!("bundle written to {}", dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
