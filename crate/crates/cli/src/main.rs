use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfgn::config::{RunConfig, DEFAULT_CIRCUIT};
use qfgn::experiment::{self, SpectrumOptions};
use qfgn::models::ModelKind;
use qfgn::Error;

#[derive(Parser)]
#[command(name = "qfgn", version, about = "Quantum Fourier Gaussian Network image fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to an image, one checkpoint per restart.
    Train(TrainArgs),
    /// Query a checkpoint on its training grid.
    Reconstruct {
        checkpoint: PathBuf,
        /// Ground truth image (default: the configured image).
        #[arg(long)]
        truth: Option<String>,
        /// Output directory (default: the checkpoint's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query a checkpoint on a denser grid.
    Superres {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 2)]
        factor: usize,
        /// Ground truth at the higher resolution, a path or `phantom`.
        #[arg(long)]
        truth: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted and measured Fourier spectrum of a circuit.
    Spectrum(SpectrumArgs),
    /// PSNR and SSIM between two images.
    Eval {
        candidate: PathBuf,
        reference: PathBuf,
        /// Also write the metrics CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Image path or `phantom`.
    #[arg(long)]
    image: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Shots for quantum inference; 0 is exact.
    #[arg(long)]
    shots: Option<u64>,
    /// Circuit file or `default`.
    #[arg(long)]
    circuit: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the loss every N epochs (0 disables).
    #[arg(long, default_value_t = 100)]
    log_every: usize,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Circuit file, checkpoint, or `default`.
    source: Option<String>,
    #[arg(long, conflicts_with = "source")]
    circuit: Option<String>,
    /// Sweep a single feature instead of all of them.
    #[arg(long)]
    feature: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    scaling: f64,
    #[arg(long, default_value_t = 4)]
    assignments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled expectations with this many shots; 0 is exact.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long, default_value = "spectrum.csv")]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) | Error::State(_) | Error::UnsupportedCircuit(_) => 2,
        Error::Io { .. } | Error::Format(_) | Error::Parse { .. } => 3,
        Error::Numerical(_) | Error::Property(_) => 4,
    }
}

fn train(args: TrainArgs) -> qfgn::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.model {
        cfg.model = v;
    }
    if let Some(v) = args.image {
        cfg.image = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = args.shots {
        cfg.quantum.shots = v;
    }
    if let Some(v) = args.circuit {
        cfg.circuit = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.out {
        cfg.output_dir = v;
    }
    cfg.validate()?;
    let every = args.log_every;
    let summary = experiment::train(&cfg, |seed, epoch, loss| {
        if every > 0 && (epoch == 1 || epoch % every == 0) {
            eprintln!("seed {seed} epoch {epoch} loss {loss:.6e}");
        }
    })?;
    for r in &summary.restarts {
        println!(
            "seed {}: final loss {:.6e}, psnr {:.3} dB, ssim {:.4} -> {}",
            r.seed,
            r.final_loss,
            r.psnr_db,
            r.ssim,
            r.checkpoint.display()
        );
    }
    println!(
        "best seed {} -> {}",
        summary.best_run().seed,
        summary.best_checkpoint.display()
    );
    Ok(())
}

fn default_out(checkpoint: &Path, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        checkpoint
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    })
}

fn run(cli: Cli) -> qfgn::Result<()> {
    match cli.command {
        Command::Train(args) => train(args),
        Command::Reconstruct { checkpoint, truth, out } => {
            let out = default_out(&checkpoint, out);
            let r = experiment::reconstruct(&checkpoint, truth.as_deref(), &out)?;
            println!(
                "psnr {:.3} dB, ssim {:.4} -> {}",
                r.psnr_db,
                r.ssim,
                r.image_path.display()
            );
            Ok(())
        }
        Command::Superres {
            checkpoint,
            factor,
            truth,
            out,
        } => {
            let out = default_out(&checkpoint, out);
            let r = experiment::superres(&checkpoint, factor, truth.as_deref(), &out)?;
            println!(
                "{}x{}: psnr {:.3} dB, ssim {:.4} -> {}",
                r.image.height(),
                r.image.width(),
                r.psnr_db,
                r.ssim,
                r.image_path.display()
            );
            Ok(())
        }
        Command::Spectrum(a) => {
            let source = a
                .source
                .or(a.circuit)
                .unwrap_or_else(|| DEFAULT_CIRCUIT.to_string());
            let opts = SpectrumOptions {
                feature: a.feature,
                scaling: a.scaling,
                assignments: a.assignments,
                seed: a.seed,
                shots: a.shots,
            };
            let r = experiment::spectrum(&source, &opts, &a.out)?;
            println!(
                "{} predicted frequencies ({} encoding gates), max leakage {:e}, diversity {:.3} -> {}",
                r.predicted.frequencies.len(),
                r.predicted.encoding_gates,
                r.max_leakage,
                r.diversity,
                a.out.display()
            );
            Ok(())
        }
        Command::Eval {
            candidate,
            reference,
            out,
        } => {
            let (_, _, text) = experiment::eval(&candidate, &reference, out.as_deref())?;
            print!("{}", text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfgn: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
