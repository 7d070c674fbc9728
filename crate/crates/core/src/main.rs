use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dbn_denoise::eval::{self, ExperimentConfig, MODEL_FILE, PROFILE_FILE};
use dbn_denoise::{dbn, denoise, pgm, NoiseProfile, Result};

#[derive(Parser, Debug)]
#[command(version, about = "Image denoising with noise-node elimination in a deep belief network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pretrain a DBN on clean and noisy training images and save it.
    Train(Shared),
    /// Detect noise nodes of a saved model and save the noise profile.
    Profile {
        #[command(flatten)]
        shared: Shared,
        /// Model file (default: <out-dir>/model.dbnm).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Denoise one PGM image with a saved model and profile.
    Denoise {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the whole experiment and print the report.
    Eval(Shared),
}

/// Flags shared by every subcommand. Each one overrides the value from
/// `--config`, which in turn overrides the built-in defaults.
#[derive(Args, Debug)]
struct Shared {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mnist_dir: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Layer widths, e.g. 784,256,128,64.
    #[arg(long)]
    widths: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    noise_variance: Option<String>,
    /// One threshold or a comma-separated list of candidates.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    train_count: Option<String>,
    #[arg(long)]
    test_count: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// binary or real.
    #[arg(long)]
    top_units: Option<String>,
}

impl Shared {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("mnist-dir", &self.mnist_dir),
            ("out-dir", &self.out_dir),
            ("widths", &self.widths),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("batch-size", &self.batch_size),
            ("noise-variance", &self.noise_variance),
            ("threshold", &self.threshold),
            ("train-count", &self.train_count),
            ("test-count", &self.test_count),
            ("seed", &self.seed),
            ("top-units", &self.top_units),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn train(shared: &Shared) -> Result<()> {
    let cfg = shared.config()?;
    cfg.validate()?;
    let train_clean = eval::load_training_images(&cfg)?;
    let pairs = eval::training_pairs(&cfg, &train_clean)?;
    let (model, history) = eval::pretrain(&cfg, &pairs)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(MODEL_FILE);
    dbn::save_model(&model, &path)?;
    for (k, h) in history.iter().enumerate() {
        if let Some(e) = h.last() {
            println!("layer {k}: final reconstruction error {e:.6}");
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn profile(shared: &Shared, model: Option<PathBuf>) -> Result<()> {
    let cfg = shared.config()?;
    cfg.validate()?;
    let model = dbn::load_model(model.unwrap_or_else(|| cfg.out_dir.join(MODEL_FILE)))?;
    let train_clean = eval::load_training_images(&cfg)?;
    let pairs = eval::training_pairs(&cfg, &train_clean)?;
    let choice = eval::select_profile(&model, &pairs, &cfg.thresholds)?;
    for (t, n) in &choice.sweep {
        println!("threshold {t}: {n} noise nodes");
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(PROFILE_FILE);
    choice.profile.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn denoise_one(
    shared: &Shared,
    model: Option<PathBuf>,
    profile: Option<PathBuf>,
    input: PathBuf,
    output: PathBuf,
) -> Result<()> {
    let cfg = shared.config()?;
    let model = dbn::load_model(model.unwrap_or_else(|| cfg.out_dir.join(MODEL_FILE)))?;
    let profile = NoiseProfile::load(profile.unwrap_or_else(|| cfg.out_dir.join(PROFILE_FILE)))?;
    let noisy = pgm::load_pgm(&input)?;
    let clean = denoise::denoise(&model, &profile, &noisy)?;
    pgm::save_pgm(&clean, &output)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(shared) => train(&shared),
        Command::Profile { shared, model } => profile(&shared, model),
        Command::Denoise {
            shared,
            model,
            profile,
            input,
            output,
        } => denoise_one(&shared, model, profile, input, output),
        Command::Eval(shared) => {
            let cfg = shared.config()?;
            let outcome = eval::run_experiment(&cfg)?;
            print!("{}", outcome.report.to_text());
            Ok(())
        }
    }
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
