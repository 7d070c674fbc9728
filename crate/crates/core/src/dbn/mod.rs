//! Stacked RBMs: greedy layer-wise pretraining and the deterministic
//! upward (encode) and downward (reconstruct) passes.

mod model_file;

pub use model_file::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};

use ndarray::{Array2, ArrayView2};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::rbm::{Rbm, TrainConfig, UnitKind};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dbn {
    layers: Vec<Rbm>,
    image_width: usize,
    image_height: usize,
}

/// Per-layer unit activations from one upward pass. Entry 0 is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn input(&self) -> &[f64] {
        &self.layers[0]
    }

    /// The top-layer feature vector.
    pub fn top(&self) -> &[f64] {
        self.layers.last().expect("activations are never empty")
    }

    pub fn into_top(mut self) -> Vec<f64> {
        self.layers.pop().expect("activations are never empty")
    }
}

impl Dbn {
    pub fn new(layers: Vec<Rbm>, image_width: usize, image_height: usize) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::arg("a DBN needs at least one RBM"))?;
        if first.n_visible() != image_width * image_height {
            return Err(Error::arg(format!(
                "first RBM has {} visible units but images are {image_width}x{image_height}",
                first.n_visible()
            )));
        }
        if first.visible_kind() != UnitKind::RealUnitInterval {
            return Err(Error::arg("the input layer must be real-valued"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].n_hidden() != pair[1].n_visible() {
                return Err(Error::arg(format!(
                    "layer {k} has {} hidden units but layer {} has {} visible units",
                    pair[0].n_hidden(),
                    k + 1,
                    pair[1].n_visible()
                )));
            }
            if pair[1].visible_kind() != UnitKind::Binary || pair[0].hidden_kind() != UnitKind::Binary {
                return Err(Error::arg(format!("units between layers {k} and {} must be binary", k + 1)));
            }
        }
        Ok(Dbn {
            layers,
            image_width,
            image_height,
        })
    }

    pub fn layers(&self) -> &[Rbm] {
        &self.layers
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    /// Input width followed by every hidden width.
    pub fn layer_widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_visible())
            .chain(self.layers.iter().map(Rbm::n_hidden))
            .collect()
    }

    pub fn top_width(&self) -> usize {
        self.layers.last().map_or(0, Rbm::n_hidden)
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        if img.width() != self.image_width || img.height() != self.image_height {
            return Err(Error::arg(format!(
                "image is {}x{} but the model expects {}x{}",
                img.width(),
                img.height(),
                self.image_width,
                self.image_height
            )));
        }
        Ok(())
    }

    /// Upward pass over a batch; returns the activations of every layer,
    /// starting with the input rows.
    pub fn encode_batch(&self, input: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        let mut out = vec![input.to_owned()];
        for rbm in &self.layers {
            let next = rbm.hidden_activation_batch(out.last().expect("nonempty").view())?;
            out.push(next);
        }
        Ok(out)
    }

    /// Top-layer activations for each input row.
    pub fn encode_top_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut x = self.layers[0].hidden_activation_batch(input)?;
        for rbm in &self.layers[1..] {
            x = rbm.hidden_activation_batch(x.view())?;
        }
        Ok(x)
    }

    /// Deterministic upward pass: every layer carries activation probabilities.
    pub fn encode(&self, img: &Image) -> Result<Activations> {
        self.check_image(img)?;
        let row = ArrayView2::from_shape((1, img.len()), img.pixels()).expect("single row");
        let layers = self
            .encode_batch(row)?
            .into_iter()
            .map(|a| a.into_raw_vec_and_offset().0)
            .collect();
        Ok(Activations { layers })
    }

    /// Downward pass from top-layer values to visible means, one row each.
    pub fn reconstruct_batch(&self, top: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if top.ncols() != self.top_width() {
            return Err(Error::arg(format!(
                "top vector has {} entries, expected {}",
                top.ncols(),
                self.top_width()
            )));
        }
        if let Some(bad) = top.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::arg(format!("top value {bad} outside [0, 1]")));
        }
        let mut x = top.to_owned();
        for rbm in self.layers.iter().rev() {
            x = rbm.visible_activation_batch(x.view())?;
        }
        Ok(x)
    }

    pub fn reconstruct(&self, top: &[f64]) -> Result<Image> {
        let row = ArrayView2::from_shape((1, top.len()), top).expect("single row");
        let pixels = self.reconstruct_batch(row)?.into_raw_vec_and_offset().0;
        Image::from_clamped(self.image_width, self.image_height, pixels)
    }

    pub fn images_to_rows(&self, images: &[Image]) -> Result<Array2<f64>> {
        for img in images {
            self.check_image(img)?;
        }
        images_to_rows(images)
    }

    pub fn rows_to_images(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<Image>> {
        rows.rows()
            .into_iter()
            .map(|r| Image::from_clamped(self.image_width, self.image_height, r.to_vec()))
            .collect()
    }
}

/// Stacks equally sized images into one row per image.
pub fn images_to_rows(images: &[Image]) -> Result<Array2<f64>> {
    let width = images.first().map_or(0, Image::len);
    if images.iter().any(|img| img.len() != width) {
        return Err(Error::arg("images differ in size"));
    }
    let flat: Vec<f64> = images.iter().flat_map(|img| img.pixels().iter().copied()).collect();
    Ok(Array2::from_shape_vec((images.len(), width), flat).expect("shape checked"))
}

/// Unit kinds for layer `k` of a stack with `n_layers` RBMs.
fn layer_kinds(k: usize, n_layers: usize, top_kind: UnitKind) -> (UnitKind, UnitKind) {
    let visible = if k == 0 { UnitKind::RealUnitInterval } else { UnitKind::Binary };
    let hidden = if k + 1 == n_layers { top_kind } else { UnitKind::Binary };
    (visible, hidden)
}

fn layer_config(cfgs: &[TrainConfig], k: usize, n_layers: usize) -> Result<&TrainConfig> {
    match cfgs.len() {
        1 => Ok(&cfgs[0]),
        n if n == n_layers => Ok(&cfgs[k]),
        n => Err(Error::arg(format!(
            "need 1 or {n_layers} training configs, got {n}"
        ))),
    }
}

/// Training history of a pretraining run: per layer, per epoch, the mean
/// squared reconstruction error.
pub type PretrainHistory = Vec<Vec<f64>>;

/// Greedy layer-wise pretraining with a real-valued top layer.
///
/// `cfgs` holds either one config shared by every layer or one per layer.
/// Layer `k` is trained on the activation probabilities of layer `k - 1`
/// over the whole training set; layer 0 sees the raw pixels.
pub fn greedy_pretrain(widths: &[usize], images: &[Image], cfgs: &[TrainConfig]) -> Result<Dbn> {
    greedy_pretrain_with(widths, images, cfgs, UnitKind::RealUnitInterval).map(|(d, _)| d)
}

/// [`greedy_pretrain`] with an explicit top-layer unit kind, also returning
/// the per-epoch reconstruction errors.
pub fn greedy_pretrain_with(
    widths: &[usize],
    images: &[Image],
    cfgs: &[TrainConfig],
    top_kind: UnitKind,
) -> Result<(Dbn, PretrainHistory)> {
    if widths.len() < 2 {
        return Err(Error::arg("need an input width and at least one hidden width"));
    }
    if widths.contains(&0) {
        return Err(Error::arg("layer widths must be positive"));
    }
    let first = images.first().ok_or_else(|| Error::arg("no training images"))?;
    let (image_width, image_height) = (first.width(), first.height());
    if widths[0] != first.len() {
        return Err(Error::arg(format!(
            "input width {} does not match image size {}",
            widths[0],
            first.len()
        )));
    }
    if images.iter().any(|img| !img.same_shape(first)) {
        return Err(Error::arg("training images differ in size"));
    }
    let n_layers = widths.len() - 1;
    for k in 0..n_layers {
        layer_config(cfgs, k, n_layers)?.validate()?;
    }

    let mut input = images_to_rows(images)?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut history = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let cfg = layer_config(cfgs, k, n_layers)?;
        let (visible, hidden) = layer_kinds(k, n_layers, top_kind);
        let layer_seed = seed::derive(cfg.seed, k as u64);
        let mut init_rng = seed::stream(layer_seed, 1);
        let mut rbm = Rbm::random(widths[k], widths[k + 1], visible, hidden, cfg.init_std, &mut init_rng)?;
        let layer_cfg = TrainConfig {
            seed: layer_seed,
            ..cfg.clone()
        };
        let errors = if cfg.epochs > 0 {
            rbm.train(input.view(), &layer_cfg)?
        } else {
            Vec::new()
        };
        if k + 1 < n_layers {
            input = rbm.hidden_activation_batch(input.view())?;
        }
        layers.push(rbm);
        history.push(errors);
    }
    Ok((Dbn::new(layers, image_width, image_height)?, history))
}
