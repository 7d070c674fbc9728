//! Experiment driver: MNIST corruption, pretraining, noise profiling and the
//! MSE comparison between noisy inputs, plain reconstructions and denoised
//! reconstructions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{self, Image, PairedDataset};
use crate::dbn::{self, Dbn};
use crate::denoise::{self, NoiseProfile};
use crate::error::{Error, Result, StageExt};
use crate::pgm;
use crate::rbm::{TrainConfig, UnitKind};
use crate::seed;

pub const MODEL_FILE: &str = "model.dbnm";
pub const PROFILE_FILE: &str = "profile.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const GRID_FILE: &str = "grid.pgm";

/// Mean over pixels of the squared difference.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::arg(format!(
            "cannot compare {}x{} with {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Average of [`mse`] over index-aligned image sets.
pub fn mean_mse(a: &[Image], b: &[Image]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::arg(format!("cannot average MSE over {} vs {} images", a.len(), b.len())));
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += mse(x, y)?;
    }
    Ok(total / a.len() as f64)
}

/// Full run configuration. Every field maps to a `key = value` line of a
/// config file and to a `--key` CLI flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mnist_dir: PathBuf,
    pub out_dir: PathBuf,
    pub widths: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub noise_variance: f64,
    /// Candidate thresholds, tried in order; the first that flags a
    /// nonempty proper subset of the top layer is used.
    pub thresholds: Vec<f64>,
    /// Number of clean training images; each contributes a clean and a
    /// noisy element to the training set.
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub init_std: f64,
    pub shuffle: bool,
    pub top_units: UnitKind,
    pub grid_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mnist_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("out"),
            widths: vec![784, 1000, 500, 250, 100],
            epochs: 10,
            lr: 0.1,
            batch_size: 100,
            noise_variance: 0.2,
            thresholds: vec![0.9],
            train_count: 10_000,
            test_count: 10_000,
            seed: 0,
            init_std: 0.01,
            shuffle: true,
            top_units: UnitKind::RealUnitInterval,
            grid_samples: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::arg(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn unit_name(kind: UnitKind) -> &'static str {
    match kind {
        UnitKind::Binary => "binary",
        UnitKind::RealUnitInterval => "real",
    }
}

impl ExperimentConfig {
    /// Sets one field from its textual key (hyphens or underscores).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "mnist-dir" => self.mnist_dir = PathBuf::from(value),
            "out-dir" => self.out_dir = PathBuf::from(value),
            "widths" => self.widths = parse_list(&key, value)?,
            "epochs" => self.epochs = parse(&key, value)?,
            "lr" => self.lr = parse(&key, value)?,
            "batch-size" => self.batch_size = parse(&key, value)?,
            "noise-variance" => self.noise_variance = parse(&key, value)?,
            "threshold" | "thresholds" => self.thresholds = parse_list(&key, value)?,
            "train-count" => self.train_count = parse(&key, value)?,
            "test-count" => self.test_count = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "init-std" => self.init_std = parse(&key, value)?,
            "shuffle" => self.shuffle = parse(&key, value)?,
            "top-units" => {
                self.top_units = match value {
                    "binary" => UnitKind::Binary,
                    "real" => UnitKind::RealUnitInterval,
                    _ => return Err(Error::arg(format!("top-units must be binary or real, got {value:?}"))),
                }
            }
            "grid-samples" => self.grid_samples = parse(&key, value)?,
            _ => return Err(Error::arg(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("config line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Effective configuration as `key = value` lines. The output directory
    /// is left out so that runs into different directories echo the same text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        line("mnist-dir", self.mnist_dir.display().to_string());
        line("widths", join(&self.widths));
        line("epochs", self.epochs.to_string());
        line("lr", self.lr.to_string());
        line("batch-size", self.batch_size.to_string());
        line("noise-variance", self.noise_variance.to_string());
        line("threshold", join(&self.thresholds));
        line("train-count", self.train_count.to_string());
        line("test-count", self.test_count.to_string());
        line("seed", self.seed.to_string());
        line("init-std", self.init_std.to_string());
        line("shuffle", self.shuffle.to_string());
        line("top-units", unit_name(self.top_units).to_string());
        line("grid-samples", self.grid_samples.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::arg("widths need an input and at least one hidden layer"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::arg("thresholds must be a nonempty list of values in [0, 1]"));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return Err(Error::arg("train-count and test-count must be positive"));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::arg("noise-variance must be >= 0"));
        }
        self.train_config().validate()
    }

    /// Per-layer CD-1 settings shared by every layer.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: seed::derive(self.seed, SEED_PRETRAIN),
            shuffle: self.shuffle,
            init_std: self.init_std,
        }
    }
}

const SEED_TRAIN_NOISE: u64 = 1;
const SEED_TEST_NOISE: u64 = 2;
const SEED_PRETRAIN: u64 = 3;

/// Locates `<prefix>-images-idx3-ubyte`, with or without `.gz`.
pub fn mnist_images_path(dir: &Path, prefix: &str) -> Result<PathBuf> {
    let base = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let gz = PathBuf::from(format!("{}.gz", base.display()));
    [base.clone(), gz]
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| Error::arg(format!("no MNIST images at {}[.gz]", base.display())))
}

fn load_split(dir: &Path, prefix: &str, count: usize) -> Result<Vec<Image>> {
    let mut images = data::load_idx(mnist_images_path(dir, prefix)?)?;
    if images.len() < count {
        return Err(Error::arg(format!(
            "requested {count} {prefix} images but only {} are available",
            images.len()
        )));
    }
    images.truncate(count);
    Ok(images)
}

/// Clean training images and clean test images, truncated to the
/// configured counts.
pub fn load_mnist(cfg: &ExperimentConfig) -> Result<(Vec<Image>, Vec<Image>)> {
    Ok((
        load_split(&cfg.mnist_dir, "train", cfg.train_count)?,
        load_split(&cfg.mnist_dir, "t10k", cfg.test_count)?,
    ))
}

/// Clean training images only.
pub fn load_training_images(cfg: &ExperimentConfig) -> Result<Vec<Image>> {
    load_split(&cfg.mnist_dir, "train", cfg.train_count)
}

pub fn training_pairs(cfg: &ExperimentConfig, clean: &[Image]) -> Result<PairedDataset> {
    data::make_pairs(clean, cfg.noise_variance, seed::derive(cfg.seed, SEED_TRAIN_NOISE))
}

pub fn noisy_test_set(cfg: &ExperimentConfig, clean: &[Image]) -> Result<PairedDataset> {
    data::make_pairs(clean, cfg.noise_variance, seed::derive(cfg.seed, SEED_TEST_NOISE))
}

/// Pretrains on the clean and the noisy side of `pairs` together.
pub fn pretrain(cfg: &ExperimentConfig, pairs: &PairedDataset) -> Result<(Dbn, dbn::PretrainHistory)> {
    let images: Vec<Image> = pairs.clean().chain(pairs.noisy()).cloned().collect();
    dbn::greedy_pretrain_with(&cfg.widths, &images, &[cfg.train_config()], cfg.top_units)
}

/// Result of trying each candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub profile: NoiseProfile,
    /// `(threshold, flagged count)` for every candidate that was evaluated.
    pub sweep: Vec<(f64, usize)>,
}

/// Builds the profile for the first candidate threshold that flags a
/// nonempty proper subset of the top layer, or for the first candidate if
/// none does.
pub fn select_profile(d: &Dbn, pairs: &PairedDataset, thresholds: &[f64]) -> Result<ThresholdChoice> {
    let first = *thresholds.first().ok_or_else(|| Error::arg("no candidate thresholds"))?;
    let ara = denoise::average_relative_activity(d, pairs)?;
    let top = d.top_width();
    let mut sweep = Vec::new();
    let mut chosen = first;
    for &t in thresholds {
        let n = denoise::detect_noise_nodes(&ara, t)?.len();
        sweep.push((t, n));
        if n > 0 && n < top {
            chosen = t;
            break;
        }
    }
    let clean: Vec<Image> = pairs.clean().cloned().collect();
    let profile = denoise::profile_from_activity(d, &clean, ara, chosen)?;
    Ok(ThresholdChoice { profile, sweep })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mse_noisy: f64,
    pub mse_plain_reconstruction: f64,
    pub mse_denoised: f64,
    pub n_noise_nodes: usize,
    pub threshold: f64,
    pub threshold_sweep: Vec<(f64, usize)>,
    pub train_pairs: usize,
    pub test_images: usize,
    pub top_width: usize,
    /// Counts of average relative activity in ten equal bins over `[0, 1]`.
    pub activity_histogram: [usize; 10],
    /// Final-epoch reconstruction error of each layer (empty for 0 epochs).
    pub final_layer_errors: Vec<Option<f64>>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    /// Relative MSE reduction of the denoised output against the noisy input, in percent.
    pub fn reduction_percent(&self) -> f64 {
        100.0 * (1.0 - self.mse_denoised / self.mse_noisy)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# DBN denoising experiment\n\n[config]\n");
        out.push_str(&self.config.to_text());
        out.push_str("\n[data]\n");
        writeln!(out, "train_pairs = {}", self.train_pairs).unwrap();
        writeln!(out, "training_elements = {}", 2 * self.train_pairs).unwrap();
        writeln!(out, "test_images = {}", self.test_images).unwrap();
        out.push_str("\n[pretraining]\n");
        for (k, e) in self.final_layer_errors.iter().enumerate() {
            let e = e.map_or_else(|| "-".to_string(), |e| e.to_string());
            writeln!(out, "layer_{k}_final_reconstruction_error = {e}").unwrap();
        }
        out.push_str("\n[profile]\n");
        writeln!(out, "top_width = {}", self.top_width).unwrap();
        let sweep: Vec<String> = self.threshold_sweep.iter().map(|(t, n)| format!("{t}:{n}")).collect();
        writeln!(out, "threshold_sweep = {}", sweep.join(" ")).unwrap();
        writeln!(out, "threshold = {}", self.threshold).unwrap();
        writeln!(out, "n_noise_nodes = {}", self.n_noise_nodes).unwrap();
        let hist: Vec<String> = self.activity_histogram.iter().map(usize::to_string).collect();
        writeln!(out, "activity_histogram = {}", hist.join(" ")).unwrap();
        out.push_str("\n[mse]\n");
        writeln!(out, "mse_noisy = {}", self.mse_noisy).unwrap();
        writeln!(out, "mse_plain_reconstruction = {}", self.mse_plain_reconstruction).unwrap();
        writeln!(out, "mse_denoised = {}", self.mse_denoised).unwrap();
        writeln!(out, "reduction_percent = {:.2}", self.reduction_percent()).unwrap();
        out
    }
}

fn histogram(values: &[f64]) -> [usize; 10] {
    let mut bins = [0; 10];
    for v in values {
        bins[((v * 10.0) as usize).min(9)] += 1;
    }
    bins
}

/// Everything a run produces, kept in memory for callers that need more
/// than the report.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub model: Dbn,
    pub profile: NoiseProfile,
}

/// Runs the whole pipeline and writes `model.dbnm`, `profile.txt`,
/// `report.txt` and `grid.pgm` into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate().stage("config")?;
    let (train_clean, test_clean) = load_mnist(cfg).stage("load")?;
    let pairs = training_pairs(cfg, &train_clean).stage("corrupt")?;
    let test = noisy_test_set(cfg, &test_clean).stage("corrupt")?;

    let (model, history) = pretrain(cfg, &pairs).stage("pretrain")?;
    let choice = select_profile(&model, &pairs, &cfg.thresholds).stage("profile")?;
    let profile = choice.profile;

    let clean: Vec<Image> = test.clean().cloned().collect();
    let noisy: Vec<Image> = test.noisy().cloned().collect();
    let plain = denoise::reconstruct_batch(&model, &noisy).stage("evaluate")?;
    let denoised = denoise::denoise_batch(&model, &profile, &noisy).stage("evaluate")?;

    let report = ExperimentReport {
        mse_noisy: mean_mse(&clean, &noisy).stage("evaluate")?,
        mse_plain_reconstruction: mean_mse(&clean, &plain).stage("evaluate")?,
        mse_denoised: mean_mse(&clean, &denoised).stage("evaluate")?,
        n_noise_nodes: profile.noise_nodes().len(),
        threshold: profile.threshold(),
        threshold_sweep: choice.sweep,
        train_pairs: pairs.len(),
        test_images: clean.len(),
        top_width: model.top_width(),
        activity_histogram: histogram(profile.average_relative_activity()),
        final_layer_errors: history.iter().map(|h| h.last().copied()).collect(),
        config: cfg.clone(),
    };

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(Error::from).stage("write")?;
    dbn::save_model(&model, out.join(MODEL_FILE)).stage("write")?;
    profile.save(out.join(PROFILE_FILE)).stage("write")?;
    fs::write(out.join(REPORT_FILE), report.to_text())
        .map_err(Error::from)
        .stage("write")?;
    let rows: Vec<Vec<Image>> = (0..cfg.grid_samples.min(clean.len()))
        .map(|i| vec![clean[i].clone(), noisy[i].clone(), plain[i].clone(), denoised[i].clone()])
        .collect();
    if !rows.is_empty() {
        pgm::image_grid(&rows, out.join(GRID_FILE)).stage("write")?;
    }

    Ok(ExperimentOutcome { report, model, profile })
}
