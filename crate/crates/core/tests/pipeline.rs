use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng as _;

use dbn_denoise::data::{self, Image};
use dbn_denoise::dbn::{self, Dbn};
use dbn_denoise::denoise::{self, NoiseProfile};
use dbn_denoise::eval::{self, ExperimentConfig};
use dbn_denoise::rbm::{Rbm, TrainConfig, UnitKind};
use dbn_denoise::seed;

fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn random_images(n: usize, side: usize, seed: u64) -> Vec<Image> {
    let mut rng = seed::stream(seed, 0);
    (0..n)
        .map(|_| {
            let px = (0..side * side).map(|_| rng.random::<f64>()).collect();
            Image::new(side, side, px).unwrap()
        })
        .collect()
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.1,
        epochs: 5,
        batch_size: 5,
        seed,
        shuffle: true,
        init_std: 0.1,
    }
}

#[test]
fn greedy_pretraining_is_deterministic() {
    let images = random_images(20, 4, 1);
    let (a, ha) = dbn::greedy_pretrain_with(&[16, 8, 4], &images, &[tiny_config(9)], UnitKind::RealUnitInterval).unwrap();
    let (b, hb) = dbn::greedy_pretrain_with(&[16, 8, 4], &images, &[tiny_config(9)], UnitKind::RealUnitInterval).unwrap();
    assert_eq!(dbn::write_model(&a), dbn::write_model(&b));
    assert_eq!(ha, hb);
    let (c, _) = dbn::greedy_pretrain_with(&[16, 8, 4], &images, &[tiny_config(10)], UnitKind::RealUnitInterval).unwrap();
    assert_ne!(dbn::write_model(&a), dbn::write_model(&c));
}

#[test]
fn upper_layer_is_trained_on_lower_layer_activations() {
    let images = random_images(20, 4, 2);
    let cfg = tiny_config(5);
    let (d, _) = dbn::greedy_pretrain_with(&[16, 8, 4], &images, std::slice::from_ref(&cfg), UnitKind::RealUnitInterval).unwrap();

    // retrain layer 1 by hand on the encoded output of layer 0
    let rows = d.images_to_rows(&images).unwrap();
    let below = d.layers()[0].hidden_activation_batch(rows.view()).unwrap();
    let layer_seed = seed::derive(cfg.seed, 1);
    let mut rbm = Rbm::random(8, 4, UnitKind::Binary, UnitKind::RealUnitInterval, cfg.init_std, &mut seed::stream(layer_seed, 1))
        .unwrap();
    rbm.train(below.view(), &TrainConfig { seed: layer_seed, ..cfg }).unwrap();
    assert_eq!(rbm, d.layers()[1]);

    let encoded = d.encode_batch(rows.view()).unwrap();
    assert_eq!(encoded[1], below);
}

#[test]
fn full_size_model_round_trips() {
    let widths = [784, 1000, 500, 250, 100];
    let images = random_images(2, 28, 3);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let d = dbn::greedy_pretrain(&widths, &images, &[cfg]).unwrap();
    let shapes: Vec<(usize, usize)> = d.layers().iter().map(|r| (r.n_visible(), r.n_hidden())).collect();
    assert_eq!(shapes, vec![(784, 1000), (1000, 500), (500, 250), (250, 100)]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.dbnm");
    dbn::save_model(&d, &path).unwrap();
    let back = dbn::load_model(&path).unwrap();
    assert_eq!(back, d);
    let top = d.encode(&images[0]).unwrap().into_top();
    assert_eq!(back.encode(&images[0]).unwrap().top(), &top[..]);
}

#[test]
fn training_improves_reconstruction_of_held_out_digits() {
    let train = data::load_idx(eval::mnist_images_path(&mnist_dir(), "train").unwrap()).unwrap();
    let test = data::load_idx(eval::mnist_images_path(&mnist_dir(), "t10k").unwrap()).unwrap();
    let (train, test) = (&train[..300], &test[..100]);
    let mse_of = |d: &Dbn| {
        let rec = denoise::reconstruct_batch(d, test).unwrap();
        eval::mean_mse(test, &rec).unwrap()
    };
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 10,
        ..TrainConfig::default()
    };
    let untrained = dbn::greedy_pretrain(&[784, 64, 32], train, &[TrainConfig { epochs: 0, ..cfg.clone() }]).unwrap();
    let trained = dbn::greedy_pretrain(&[784, 64, 32], train, &[cfg]).unwrap();
    let (before, after) = (mse_of(&untrained), mse_of(&trained));
    assert!(after < before, "trained {after} vs untrained {before}");
}

#[test]
fn mnist_subset_is_readable() {
    let images = data::load_idx(eval::mnist_images_path(&mnist_dir(), "train").unwrap()).unwrap();
    assert!(images.len() >= 2000);
    assert!(images.iter().all(|img| img.width() == 28 && img.height() == 28));
    let labels = data::load_idx_labels(mnist_dir().join("train-labels-idx1-ubyte.gz")).unwrap();
    assert_eq!(labels.len(), images.len());
    assert!(labels.iter().all(|&l| l < 10));
}

#[test]
fn denoising_with_a_profile_only_touches_flagged_nodes() {
    let images = random_images(10, 4, 4);
    let d = dbn::greedy_pretrain(&[16, 8, 4], &images, &[tiny_config(3)]).unwrap();
    let pairs = data::make_pairs(&images, 0.05, 11).unwrap();
    let profile = denoise::build_profile(&d, &pairs, 0.0).unwrap();
    assert_eq!(profile.noise_nodes(), &[0, 1, 2, 3]);
    let flagged_all = denoise::denoise(&d, &profile, &images[0]).unwrap();
    assert_eq!(flagged_all, denoise::denoise(&d, &profile, &images[1]).unwrap());

    let none = denoise::build_profile(&d, &pairs, 1.0).unwrap();
    assert!(none.noise_nodes().is_empty());
    let plain = d.reconstruct(d.encode(&images[0]).unwrap().top()).unwrap();
    assert_eq!(denoise::denoise(&d, &none, &images[0]).unwrap(), plain);
}

fn small_experiment(out_dir: PathBuf, epochs: usize) -> ExperimentConfig {
    ExperimentConfig {
        mnist_dir: mnist_dir(),
        out_dir,
        widths: vec![784, 32, 16],
        epochs,
        batch_size: 10,
        thresholds: vec![0.9, 0.5, 0.3, 0.1],
        train_count: 100,
        test_count: 20,
        seed: 7,
        grid_samples: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn zero_epoch_experiment_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_experiment(dir.path().to_path_buf(), 0);
    let outcome = eval::run_experiment(&cfg).unwrap();
    let r = &outcome.report;
    for v in [r.mse_noisy, r.mse_plain_reconstruction, r.mse_denoised] {
        assert!(v.is_finite() && v >= 0.0);
    }
    assert!(r.final_layer_errors.iter().all(Option::is_none));
    for name in ["model.dbnm", "profile.txt", "report.txt", "grid.pgm"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn report_agrees_with_written_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_experiment(dir.path().to_path_buf(), 2);
    let outcome = eval::run_experiment(&cfg).unwrap();
    let r = &outcome.report;

    let profile = NoiseProfile::load(dir.path().join("profile.txt")).unwrap();
    assert_eq!(profile.noise_nodes().len(), r.n_noise_nodes);
    assert_eq!(profile.noise_nodes(), outcome.profile.noise_nodes());
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * y.abs().max(1e-300));
    assert!(close(profile.neutral_values(), outcome.profile.neutral_values()));
    assert!(close(profile.average_relative_activity(), outcome.profile.average_relative_activity()));
    assert!(profile.neutral_values().iter().all(|&x| x > 0.0 && x < 1.0));
    assert_eq!(dbn::load_model(dir.path().join("model.dbnm")).unwrap(), outcome.model);

    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("widths = 784,32,16"));
    assert!(text.contains(&format!("n_noise_nodes = {}", r.n_noise_nodes)));
    assert!(text.contains("training_elements = 200"));

    let grid = dbn_denoise::pgm::load_pgm(dir.path().join("grid.pgm")).unwrap();
    assert_eq!((grid.width(), grid.height()), (4 * 28 + 3 * 2, 3 * 28 + 2 * 2));
}

#[test]
fn batch_and_single_paths_agree() {
    let images = random_images(7, 4, 5);
    let d = dbn::greedy_pretrain(&[16, 8, 4], &images, &[tiny_config(1)]).unwrap();
    let rows = d.images_to_rows(&images).unwrap();
    let tops = d.encode_top_batch(rows.view()).unwrap();
    for (img, row) in images.iter().zip(tops.rows()) {
        assert_eq!(d.encode(img).unwrap().top(), row.to_vec().as_slice());
    }
    let rec = d.reconstruct_batch(tops.view()).unwrap();
    let single = d.reconstruct(&tops.row(2).to_vec()).unwrap();
    assert_eq!(single.pixels(), rec.row(2).to_vec().as_slice());
    assert!(d.reconstruct_batch(Array2::zeros((1, 3)).view()).is_err());
}
