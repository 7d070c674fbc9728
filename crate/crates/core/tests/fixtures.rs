//! Regression fixtures: values recorded from a fixed-seed tiny stack.
//! A change here means training or inference numerics changed.

use rand::Rng as _;

use dbn_denoise::data::{self, Image};
use dbn_denoise::dbn::{self, Dbn};
use dbn_denoise::denoise;
use dbn_denoise::rbm::TrainConfig;
use dbn_denoise::seed;

const TOL: f64 = 1e-12;

fn stack() -> (Dbn, Vec<Image>) {
    let mut rng = seed::stream(42, 0);
    let images: Vec<Image> = (0..20)
        .map(|_| Image::new(4, 4, (0..16).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect();
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 5,
        batch_size: 5,
        seed: 42,
        shuffle: true,
        init_std: 0.1,
    };
    (dbn::greedy_pretrain(&[16, 8, 4], &images, &[cfg]).unwrap(), images)
}

fn assert_close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= TOL, "got {got:?}, want {want:?}");
    }
}

#[test]
fn top_vector() {
    let (d, images) = stack();
    assert_close(
        d.encode(&images[0]).unwrap().top(),
        &[0.47601905664502986, 0.5184069570638024, 0.5232350572200737, 0.5491901740717],
    );
}

#[test]
fn relative_activity_of_a_pair() {
    let (d, images) = stack();
    let pairs = data::make_pairs(&images, 0.05, 43).unwrap();
    let (clean, noisy) = &pairs.pairs()[0];
    assert_close(
        &denoise::relative_activity(&d, clean, noisy).unwrap(),
        &[0.0012273761317512233, 0.0024951652828061333, 0.001984454289511328, 0.002674373262813501],
    );
}

#[test]
fn neutral_values() {
    let (d, images) = stack();
    let values = denoise::neutral_values(&d, &images, &[0, 1, 2, 3]).unwrap();
    assert_close(&values, &[0.47533928813357845, 0.518149665912248, 0.5239826306854259, 0.5483195238302458]);
    assert!(values.iter().all(|&v| v > 0.0 && v < 1.0));
}
