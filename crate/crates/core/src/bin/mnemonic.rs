use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mnemonic::numerics::Precision;
use mnemonic::pipeline::{
    self, AttentionConfig, CompareConfig, EvaluateConfig, GenerateConfig, GradCheckStage, PrepareConfig, Stage,
    SystemSpec, TrainStage, DEFAULT_TRAIN_FRAC, DEFAULT_VALID_FRAC,
};
use mnemonic::trainer::TrainConfig;

#[derive(Parser)]
#[command(name = "mnemonic", version, about = "Turn passwords into mnemonic sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build pairs, splits, vocabularies and a bigram model from a sentence corpus
    Prepare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        min_len: usize,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRAC)]
        train_frac: f64,
        #[arg(long, default_value_t = DEFAULT_VALID_FRAC)]
        valid_frac: f64,
        /// Drop sentences containing words outside this list
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
    /// Train the encoder-decoder, or run the gradient check
    Train(TrainArgs),
    /// Generate mnemonics for passwords
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, required_unless_present = "passwords")]
        password: Option<String>,
        /// File with one password per line
        #[arg(long)]
        passwords: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        beam: usize,
        #[arg(long)]
        restore_case: bool,
        /// Directory for attention grids
        #[arg(long)]
        attention: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a system on test pairs
    Evaluate {
        #[arg(long)]
        test: PathBuf,
        #[arg(long, conflicts_with_all = ["bigram", "reference"])]
        checkpoint: Option<PathBuf>,
        #[arg(long, conflicts_with = "reference")]
        bigram: Option<PathBuf>,
        /// Score the ground truth against itself
        #[arg(long)]
        reference: bool,
        /// Comma-separated beam widths
        #[arg(long, value_delimiter = ',', default_value = "1")]
        beam: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side table of two evaluation reports
    Compare {
        #[arg(long)]
        neural: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the attention grid for one password
    Attention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        password: String,
        /// Tokens to force-decode instead of generating
        #[arg(long)]
        tokens: Option<String>,
        #[arg(long, default_value_t = 1)]
        beam: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a stage from its manifest
    Rerun { manifest: PathBuf },
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `prepare`
    #[arg(long, required_unless_present = "grad_check")]
    data: Option<PathBuf>,
    #[arg(long, required_unless_present = "grad_check")]
    checkpoint: Option<PathBuf>,
    /// Continue from an existing checkpoint
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 256)]
    embed: usize,
    #[arg(long, default_value_t = 256)]
    attn: usize,
    #[arg(long, default_value_t = 256)]
    maxout_k: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 5.0)]
    clip: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "32")]
    precision: Precision,
    /// Run the finite-difference gradient check instead of training
    #[arg(long)]
    grad_check: bool,
}

fn train_stage(a: TrainArgs) -> Stage {
    if a.grad_check {
        return Stage::GradCheck(GradCheckStage { seed: a.seed });
    }
    Stage::Train(TrainStage {
        data: a.data.expect("required by clap"),
        checkpoint: a.checkpoint.expect("required by clap"),
        precision: a.precision,
        resume: a.resume,
        config: TrainConfig {
            hidden: a.hidden,
            embed: a.embed,
            attn: a.attn,
            maxout: a.maxout_k,
            dropout: a.dropout,
            batch_size: a.batch,
            learning_rate: a.lr,
            clip_norm: a.clip,
            max_epochs: a.epochs,
            patience: a.patience,
            seed: a.seed,
            ..pipeline::default_train_config()
        },
    })
}

fn stage(command: Command) -> Result<Stage> {
    Ok(match command {
        Command::Prepare {
            corpus,
            out,
            min_len,
            max_len,
            seed,
            train_frac,
            valid_frac,
            dictionary,
        } => Stage::Prepare(PrepareConfig {
            corpus,
            out,
            min_len,
            max_len,
            seed,
            train_frac,
            valid_frac,
            dictionary,
        }),
        Command::Train(a) => train_stage(a),
        Command::Generate {
            checkpoint,
            password,
            passwords,
            beam,
            restore_case,
            attention,
            out,
        } => Stage::Generate(GenerateConfig {
            checkpoint,
            password,
            passwords,
            beam,
            restore_case,
            attention,
            out,
        }),
        Command::Evaluate {
            test,
            checkpoint,
            bigram,
            reference,
            beam,
            out,
        } => {
            let system = match (checkpoint, bigram, reference) {
                (Some(checkpoint), None, false) => SystemSpec::Neural { checkpoint },
                (None, Some(model), false) => SystemSpec::Bigram { model },
                (None, None, true) => SystemSpec::Reference,
                _ => bail!("evaluate needs exactly one of --checkpoint, --bigram or --reference"),
            };
            Stage::Evaluate(EvaluateConfig {
                test,
                system,
                beams: beam,
                out,
            })
        }
        Command::Compare { neural, baseline, out } => Stage::Compare(CompareConfig { neural, baseline, out }),
        Command::Attention {
            checkpoint,
            password,
            tokens,
            beam,
            out,
        } => Stage::Attention(AttentionConfig {
            checkpoint,
            password,
            tokens,
            beam,
            out,
        }),
        Command::Rerun { manifest } => {
            pipeline::RunManifest::load(&manifest)
                .with_context(|| format!("reading manifest {}", manifest.display()))?
                .stage
        }
    })
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stage = stage(cli.command)?;
    let outcome = pipeline::run_stage(&stage)?;
    print!("{}", outcome.stdout);
    for p in &outcome.problems {
        eprintln!("error: {p}");
    }
    if let Some(m) = &outcome.manifest_path {
        log::info!("manifest written to {}", m.display());
    }
    Ok(if outcome.succeeded() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
