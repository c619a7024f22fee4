//! Experiment orchestration shared by the command-line front end: image
//! preparation, multi-restart training, reconstruction, super-resolution,
//! spectrum reports and image comparison. Every artifact carries the
//! resolved configuration as comment lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::circuit::{generate_default_circuit, parse_circuit, CircuitSpec, ParamStore};
use crate::config::{RunConfig, DEFAULT_CIRCUIT, PHANTOM};
use crate::error::{Error, Result};
use crate::imaging::{downsample, load_image, make_grid, phantom, psnr, ssim, Image, ImageGrid, SSIM_WINDOW};
use crate::models::{build_model_with, Model};
use crate::spectral::{verify_spectrum, verify_spectrum_at, SpectrumQuery, SpectrumReport};
use crate::train::fit_observed;

/// Side at which the phantom is rendered before downsampling.
pub const PHANTOM_SIDE: usize = 224;

pub const METRICS_HEADER: &str = "image,model,psnr_db,ssim";

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `# `-prefixed copy of `text`, one comment per line.
pub fn comment_block(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

/// Loads `source` (a path or `phantom`) and downsamples it to `side × side`.
pub fn load_source(source: &str, side: usize) -> Result<Image> {
    let full = if source == PHANTOM {
        phantom(PHANTOM_SIDE.max(side))?
    } else {
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::Usage(format!("image {} does not exist", path.display())));
        }
        load_image(path)?
    };
    if full.height() < side || full.width() < side {
        return Err(Error::Usage(format!(
            "image {source} is {}x{}, smaller than the requested {side}x{side}",
            full.height(),
            full.width()
        )));
    }
    if full.height() == side && full.width() == side {
        return Ok(full);
    }
    downsample(&full, side, side)
}

/// Training target for `cfg`.
pub fn prepare_image(cfg: &RunConfig) -> Result<Image> {
    load_source(&cfg.image, cfg.resolution)
}

pub fn load_circuit(source: &str) -> Result<CircuitSpec> {
    if source == DEFAULT_CIRCUIT {
        return Ok(generate_default_circuit());
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::Usage(format!("circuit file {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_circuit(&text)
}

pub fn metrics_row(image: &str, model: &str, psnr_db: f64, ssim: f64) -> String {
    format!("{image},{model},{psnr_db},{ssim}\n")
}

fn metrics_csv(echo: &str, rows: &[String]) -> String {
    let mut out = comment_block(echo);
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(r);
    }
    out
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub final_loss: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub restarts: Vec<RestartOutcome>,
    /// Index into `restarts` of the run with the highest training PSNR.
    pub best: usize,
    pub best_checkpoint: PathBuf,
    pub metrics_csv: PathBuf,
}

impl TrainSummary {
    pub fn best_run(&self) -> &RestartOutcome {
        &self.restarts[self.best]
    }
}

/// SSIM, or NaN for images smaller than its window.
fn ssim_or_nan(a: &Image, b: &Image) -> Result<f64> {
    if a.height().min(a.width()) < SSIM_WINDOW {
        return Ok(f64::NAN);
    }
    ssim(a, b)
}

/// Prediction of `model` on an `h × w` grid, clamped to `[0, 1]`.
pub fn render(model: &Model, h: usize, w: usize) -> Result<Image> {
    let pred = model.infer(&make_grid(h, w))?;
    Image::from_predictions(h, w, &pred)
}

/// Trains one model per seed `cfg.seed .. cfg.seed + cfg.restarts` and
/// writes `run-<seed>.ckpt`, `loss-<seed>.csv`, `restarts.csv`,
/// `metrics.csv` and a copy of the best checkpoint as `best.ckpt` into
/// `cfg.output_dir`. `observe` sees `(seed, epoch, loss)`.
pub fn train(cfg: &RunConfig, mut observe: impl FnMut(u64, usize, f64)) -> Result<TrainSummary> {
    cfg.validate()?;
    let truth = prepare_image(cfg)?;
    let circuit = Arc::new(load_circuit(&cfg.circuit)?);
    let grid = ImageGrid::from_image(&truth);
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let model_cfg = cfg.model_config();
    let mut restarts = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let seed = cfg.seed + r as u64;
        let mut run_cfg = cfg.clone();
        run_cfg.seed = seed;
        run_cfg.restarts = 1;
        let echo = run_cfg.to_toml();
        let mut model = build_model_with(cfg.model, &model_cfg, circuit.clone(), seed)?;
        let history = fit_observed(&mut model, &grid, &cfg.train, |epoch, loss| observe(seed, epoch, loss))?;
        let final_loss = *history.last().expect("at least one epoch");

        let mut loss_text = comment_block(&echo);
        loss_text.push_str("epoch,loss\n");
        for (i, l) in history.iter().enumerate() {
            let _ = writeln!(loss_text, "{},{l:e}", i + 1);
        }
        let loss_csv = dir.join(format!("loss-{seed}.csv"));
        write_file(&loss_csv, loss_text)?;

        let checkpoint = dir.join(format!("run-{seed}.ckpt"));
        Checkpoint::from_model(&model, &run_cfg, final_loss).save(&checkpoint)?;

        let pred = render(&model, truth.height(), truth.width())?;
        restarts.push(RestartOutcome {
            seed,
            checkpoint,
            loss_csv,
            final_loss,
            psnr_db: psnr(&pred, &truth)?,
            ssim: ssim_or_nan(&pred, &truth)?,
        });
    }
    // first run wins ties, so the choice does not depend on float noise ordering
    let mut best = 0;
    for (i, r) in restarts.iter().enumerate() {
        if r.psnr_db > restarts[best].psnr_db {
            best = i;
        }
    }
    let best_checkpoint = dir.join("best.ckpt");
    std::fs::copy(&restarts[best].checkpoint, &best_checkpoint).map_err(|e| Error::io(&best_checkpoint, e))?;

    let echo = cfg.to_toml();
    let mut table = comment_block(&echo);
    table.push_str("seed,final_loss,psnr_db,ssim\n");
    for r in &restarts {
        let _ = writeln!(table, "{},{:e},{},{}", r.seed, r.final_loss, r.psnr_db, r.ssim);
    }
    write_file(&dir.join("restarts.csv"), table)?;

    let b = &restarts[best];
    let metrics = metrics_csv(
        &format!("{echo}best_seed = {}", b.seed),
        &[metrics_row(&cfg.image, cfg.model.name(), b.psnr_db, b.ssim)],
    );
    let metrics_path = dir.join("metrics.csv");
    write_file(&metrics_path, metrics)?;
    Ok(TrainSummary {
        restarts,
        best,
        best_checkpoint,
        metrics_csv: metrics_path,
    })
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub image: Image,
    pub psnr_db: f64,
    pub ssim: f64,
    pub image_path: PathBuf,
    pub metrics_path: PathBuf,
}

fn checkpoint_echo(ck: &Checkpoint) -> String {
    format!("{}final_loss = {:e}\n", ck.config.to_toml(), ck.final_loss)
}

fn write_image_outcome(
    ck: &Checkpoint,
    image: Image,
    truth: &Image,
    truth_label: &str,
    out_dir: &Path,
    stem: &str,
) -> Result<ImageOutcome> {
    create_dir(out_dir)?;
    let psnr_db = psnr(&image, truth)?;
    let s = ssim_or_nan(&image, truth)?;
    let echo = checkpoint_echo(ck);
    let image_path = out_dir.join(format!("{stem}.pgm"));
    write_file(&image_path, image.to_pgm_with_comment(&echo))?;
    let metrics_path = out_dir.join(format!("{stem}.csv"));
    write_file(
        &metrics_path,
        metrics_csv(&echo, &[metrics_row(truth_label, ck.kind.name(), psnr_db, s)]),
    )?;
    Ok(ImageOutcome {
        image,
        psnr_db,
        ssim: s,
        image_path,
        metrics_path,
    })
}

/// Queries the checkpoint on its training grid and scores it against the
/// configured image, or `truth` when given.
pub fn reconstruct(checkpoint: &Path, truth: Option<&str>, out_dir: &Path) -> Result<ImageOutcome> {
    superres(checkpoint, 1, truth, out_dir)
}

/// Queries the checkpoint on a grid `factor` times denser than training and
/// scores it against `truth` (a path or `phantom`; default: the configured
/// image at the higher resolution).
pub fn superres(checkpoint: &Path, factor: usize, truth: Option<&str>, out_dir: &Path) -> Result<ImageOutcome> {
    if factor == 0 {
        return Err(Error::usage("super-resolution factor must be at least 1"));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.to_model()?;
    let side = ck.config.resolution * factor;
    let source = truth.unwrap_or(&ck.config.image);
    let truth_img = if source == PHANTOM || truth.is_none() {
        load_source(source, side)?
    } else {
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::Usage(format!("image {} does not exist", path.display())));
        }
        load_image(path)?
    };
    if truth_img.height() != side || truth_img.width() != side {
        return Err(Error::Usage(format!(
            "ground truth is {}x{}, expected {side}x{side}",
            truth_img.height(),
            truth_img.width()
        )));
    }
    let image = render(&model, side, side)?;
    let stem = if factor == 1 {
        "reconstruct".to_string()
    } else {
        format!("superres-x{factor}")
    };
    write_image_outcome(&ck, image, &truth_img, source, out_dir, &stem)
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    /// Swept feature; `None` ties all features together.
    pub feature: Option<usize>,
    /// Scale applied to every swept feature.
    pub scaling: f64,
    pub assignments: usize,
    pub seed: u64,
    pub shots: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            feature: None,
            scaling: 1.0,
            assignments: 4,
            seed: 0,
            shots: 0,
        }
    }
}

/// Spectrum report for a circuit file, `default`, or a checkpoint. A
/// checkpoint's trained angles come first among the analysed assignments.
pub fn spectrum(source: &str, opts: &SpectrumOptions, out: &Path) -> Result<SpectrumReport> {
    let path = Path::new(source);
    let is_checkpoint = source != DEFAULT_CIRCUIT
        && path.exists()
        && std::fs::read(path)
            .map_err(|e| Error::io(path, e))?
            .starts_with(b"QFGN-CKPT");
    let (circuit, trained) = if is_checkpoint {
        let ck = Checkpoint::load(path)?;
        let theta = ck
            .tensors
            .iter()
            .find(|t| t.name == "quantum.theta")
            .map(|t| ParamStore { theta: t.values.clone() });
        (ck.circuit, theta)
    } else {
        (load_circuit(source)?, None)
    };
    let mut q = SpectrumQuery::new(circuit);
    q.feature = opts.feature;
    q.scaling = vec![opts.scaling; q.scaling.len()];
    let report = match trained {
        Some(theta) => {
            let mut thetas = vec![theta];
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            while thetas.len() < opts.assignments.max(1) {
                thetas.push(ParamStore::random(&q.circuit, &mut rng));
            }
            verify_spectrum_at(&q, &thetas, opts.seed, opts.shots)?
        }
        None => verify_spectrum(&q, opts.assignments, opts.seed, opts.shots)?,
    };
    let echo = format!(
        "source = {source}\nfeature = {}\nscaling = {}\nassignments = {}\nseed = {}\nshots = {}",
        opts.feature.map_or("all".to_string(), |f| f.to_string()),
        opts.scaling,
        report.assignments,
        opts.seed,
        opts.shots
    );
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out, report.to_csv(&echo))?;
    Ok(report)
}

/// PSNR and SSIM of `candidate` against `reference`, written as one
/// metrics row.
pub fn eval(candidate: &Path, reference: &Path, out: Option<&Path>) -> Result<(f64, f64, String)> {
    for p in [candidate, reference] {
        if !p.exists() {
            return Err(Error::Usage(format!("image {} does not exist", p.display())));
        }
    }
    let a = load_image(candidate)?;
    let b = load_image(reference)?;
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Usage(format!(
            "{} is {}x{} but {} is {}x{}",
            candidate.display(),
            a.height(),
            a.width(),
            reference.display(),
            b.height(),
            b.width()
        )));
    }
    let p = psnr(&a, &b)?;
    let s = ssim_or_nan(&a, &b)?;
    let text = metrics_csv(
        &format!("candidate = {}\nreference = {}", candidate.display(), reference.display()),
        &[metrics_row(&candidate.display().to_string(), "-", p, s)],
    );
    if let Some(out) = out {
        write_file(out, &text)?;
    }
    Ok((p, s, text))
}
