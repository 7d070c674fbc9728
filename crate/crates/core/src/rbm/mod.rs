//! Restricted Boltzmann Machine: energy, conditionals, CD-1 learning.
//!
//! Energy of a joint configuration:
//!
//! ```text
//! E(v, h) = -Σ_i a_i v_i - Σ_j b_j h_j - Σ_ij v_i h_j w_ij
//! ```
//!
//! with conditionals `p(h_j = 1 | v) = σ(b_j + Σ_i v_i w_ij)` and
//! `p(v_i = 1 | h) = σ(a_i + Σ_j h_j w_ij)`.

pub mod oracle;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

/// How a layer of units is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    /// Stochastic binary units, sampled during CD.
    Binary,
    /// Units that carry their mean activation in `[0, 1]` directly.
    RealUnitInterval,
}

impl UnitKind {
    pub(crate) fn code(self) -> u32 {
        match self {
            UnitKind::Binary => 0,
            UnitKind::RealUnitInterval => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(UnitKind::Binary),
            1 => Some(UnitKind::RealUnitInterval),
            _ => None,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    weights: Array2<f64>,
    visible_bias: Array1<f64>,
    hidden_bias: Array1<f64>,
    visible_kind: UnitKind,
    hidden_kind: UnitKind,
}

/// Hyperparameters of CD-1 training for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Reshuffle the training rows at the start of every epoch.
    pub shuffle: bool,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 100,
            seed: 0,
            shuffle: true,
            init_std: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::arg(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if !(self.init_std >= 0.0) || !self.init_std.is_finite() {
            return Err(Error::arg(format!("init std must be >= 0, got {}", self.init_std)));
        }
        Ok(())
    }
}

/// Parameter-shaped update direction (weights and both bias vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradient {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl RbmGradient {
    pub fn dot(&self, other: &RbmGradient) -> f64 {
        (&self.weights * &other.weights).sum()
            + self.visible_bias.dot(&other.visible_bias)
            + self.hidden_bias.dot(&other.hidden_bias)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Cosine of the angle between two updates; 0 if either is null.
    pub fn cosine(&self, other: &RbmGradient) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.visible_bias.iter())
            .chain(self.hidden_bias.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl Rbm {
    /// A machine with every parameter zero.
    pub fn zeros(n_visible: usize, n_hidden: usize, visible_kind: UnitKind, hidden_kind: UnitKind) -> Self {
        Rbm {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            visible_kind,
            hidden_kind,
        }
    }

    /// Weights drawn from N(0, std²), biases zero.
    pub fn random<R: Rng + ?Sized>(
        n_visible: usize,
        n_hidden: usize,
        visible_kind: UnitKind,
        hidden_kind: UnitKind,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::arg(e.to_string()))?;
        let mut m = Rbm::zeros(n_visible, n_hidden, visible_kind, hidden_kind);
        m.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        Ok(m)
    }

    pub fn from_parts(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        visible_kind: UnitKind,
        hidden_kind: UnitKind,
    ) -> Result<Self> {
        let (nv, nh) = weights.dim();
        if visible_bias.len() != nv || hidden_bias.len() != nh {
            return Err(Error::arg(format!(
                "weights are {nv}x{nh} but biases have lengths {} and {}",
                visible_bias.len(),
                hidden_bias.len()
            )));
        }
        let finite = weights
            .iter()
            .chain(visible_bias.iter())
            .chain(hidden_bias.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::arg("RBM parameters must be finite"));
        }
        Ok(Rbm {
            weights,
            visible_bias,
            hidden_bias,
            visible_kind,
            hidden_kind,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn visible_bias(&self) -> &Array1<f64> {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &Array1<f64> {
        &self.hidden_bias
    }

    pub fn visible_kind(&self) -> UnitKind {
        self.visible_kind
    }

    pub fn hidden_kind(&self) -> UnitKind {
        self.hidden_kind
    }

    fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::arg(format!("{what} has length {found}, expected {expected}")))
        }
    }

    pub fn energy(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        Self::check_len("visible vector", self.n_visible(), v.len())?;
        Self::check_len("hidden vector", self.n_hidden(), h.len())?;
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            e -= self.visible_bias[i] * vi;
        }
        for (j, &hj) in h.iter().enumerate() {
            e -= self.hidden_bias[j] * hj;
        }
        for (i, &vi) in v.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                e -= vi * hj * self.weights[[i, j]];
            }
        }
        Ok(e)
    }

    /// `F(v) = -Σ_i a_i v_i - Σ_j ln(1 + exp(b_j + Σ_i v_i w_ij))`, so that
    /// `p(v) = exp(-F(v)) / Z`.
    pub fn free_energy(&self, v: &[f64]) -> Result<f64> {
        Self::check_len("visible vector", self.n_visible(), v.len())?;
        let mut f = -v.iter().zip(&self.visible_bias).map(|(x, a)| x * a).sum::<f64>();
        for j in 0..self.n_hidden() {
            let x = self.hidden_bias[j] + v.iter().enumerate().map(|(i, vi)| vi * self.weights[[i, j]]).sum::<f64>();
            f -= softplus(x);
        }
        Ok(f)
    }

    /// `p(h = 1 | v)` for each row of `v`.
    pub fn hidden_activation_batch(&self, v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Self::check_len("visible rows", self.n_visible(), v.ncols())?;
        let mut pre = v.dot(&self.weights);
        pre += &self.hidden_bias;
        pre.mapv_inplace(sigmoid);
        Ok(pre)
    }

    /// `p(v = 1 | h)` (the mean for real-valued visibles) for each row of `h`.
    pub fn visible_activation_batch(&self, h: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Self::check_len("hidden rows", self.n_hidden(), h.ncols())?;
        let mut pre = h.dot(&self.weights.t());
        pre += &self.visible_bias;
        pre.mapv_inplace(sigmoid);
        Ok(pre)
    }

    pub fn hidden_activation(&self, v: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, v.len()), v).expect("single row");
        Ok(self.hidden_activation_batch(row)?.into_raw_vec_and_offset().0)
    }

    pub fn visible_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        let row = ArrayView2::from_shape((1, h.len()), h).expect("single row");
        Ok(self.visible_activation_batch(row)?.into_raw_vec_and_offset().0)
    }

    /// CD-1 statistics for one batch, before scaling by the learning rate.
    ///
    /// Positive phase uses `p(h | v0)`. The hidden layer is sampled (binary
    /// units) or kept at its mean (real-valued units), the visible layer is
    /// reconstructed as probabilities, and the final hidden statistic is
    /// `p(h | v1)`.
    pub fn cd1_gradient<R: Rng + ?Sized>(&self, batch: ArrayView2<'_, f64>, rng: &mut R) -> Result<RbmGradient> {
        self.cd1_pass(batch, rng).map(|(grad, _)| grad)
    }

    /// Gradient plus the summed squared reconstruction error of the batch.
    fn cd1_pass<R: Rng + ?Sized>(&self, batch: ArrayView2<'_, f64>, rng: &mut R) -> Result<(RbmGradient, f64)> {
        if batch.nrows() == 0 {
            return Err(Error::arg("CD-1 needs a nonempty batch"));
        }
        let n = batch.nrows() as f64;
        let ph0 = self.hidden_activation_batch(batch)?;
        let h0 = match self.hidden_kind {
            UnitKind::Binary => ph0.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }),
            UnitKind::RealUnitInterval => ph0.clone(),
        };
        let v1 = self.visible_activation_batch(h0.view())?;
        let ph1 = self.hidden_activation_batch(v1.view())?;

        let mut weights = batch.t().dot(&ph0);
        weights -= &v1.t().dot(&ph1);
        weights /= n;
        let diff = &batch - &v1;
        let sq_err = diff.iter().map(|d| d * d).sum::<f64>();
        let visible_bias = diff.sum_axis(Axis(0)) / n;
        let hidden_bias = (&ph0 - &ph1).sum_axis(Axis(0)) / n;
        Ok((
            RbmGradient {
                weights,
                visible_bias,
                hidden_bias,
            },
            sq_err,
        ))
    }

    /// Adds `scale * grad` to the parameters.
    pub fn apply(&mut self, grad: &RbmGradient, scale: f64) -> Result<()> {
        if grad.weights.dim() != self.weights.dim()
            || grad.visible_bias.len() != self.n_visible()
            || grad.hidden_bias.len() != self.n_hidden()
        {
            return Err(Error::arg("gradient shape does not match the machine"));
        }
        Zip::from(&mut self.weights)
            .and(&grad.weights)
            .for_each(|w, g| *w += scale * g);
        Zip::from(&mut self.visible_bias)
            .and(&grad.visible_bias)
            .for_each(|w, g| *w += scale * g);
        Zip::from(&mut self.hidden_bias)
            .and(&grad.hidden_bias)
            .for_each(|w, g| *w += scale * g);
        Ok(())
    }

    /// One CD-1 update on `batch`.
    pub fn cd1_step<R: Rng + ?Sized>(&mut self, batch: ArrayView2<'_, f64>, cfg: &TrainConfig, rng: &mut R) -> Result<()> {
        cfg.validate()?;
        let grad = self.cd1_gradient(batch, rng)?;
        self.apply(&grad, cfg.learning_rate)
    }

    /// Runs `cfg.epochs` passes of minibatch CD-1 over the rows of `data`.
    /// Returns the mean squared reconstruction error of each epoch.
    pub fn train(&mut self, data: ArrayView2<'_, f64>, cfg: &TrainConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        Self::check_len("training rows", self.n_visible(), data.ncols())?;
        if data.nrows() == 0 {
            return Err(Error::arg("no training rows"));
        }
        let mut rng = seed::stream(cfg.seed, 0);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut sq_err = 0.0;
            for idx in order.chunks(cfg.batch_size) {
                let batch = data.select(Axis(0), idx);
                let (grad, err) = self.cd1_pass(batch.view(), &mut rng)?;
                sq_err += err;
                self.apply(&grad, cfg.learning_rate)?;
            }
            history.push(sq_err / (order.len() * self.n_visible()) as f64);
        }
        Ok(history)
    }
}

/// Draws one binary vector with `P(x_i = 1) = p_i`.
pub fn sample_bernoulli<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::arg(format!("probability {bad} outside [0, 1]")));
    }
    Ok(p.iter()
        .map(|&pi| if rng.random::<f64>() < pi { 1.0 } else { 0.0 })
        .collect())
}
