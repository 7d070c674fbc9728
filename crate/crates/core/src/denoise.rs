//! Noise-node detection and noise-suppressed reconstruction.
//!
//! For a clean image and its noisy copy, the relative activity of a top-layer
//! node is the absolute difference of its two activations. Averaged over a
//! paired dataset it separates nodes that track noise (high average) from
//! nodes that track image content (low average). Nodes above a threshold are
//! flagged, and at denoising time their values are replaced by their mean
//! activation over clean images before the downward pass.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::{Image, PairedDataset};
use crate::dbn::{images_to_rows, Dbn};
use crate::error::{Error, Result};

/// Noise nodes of a trained network and their neutral values.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    threshold: f64,
    noise_nodes: Vec<usize>,
    neutral_values: Vec<f64>,
    average_relative_activity: Vec<f64>,
}

impl NoiseProfile {
    /// Assembles a profile, checking that the flagged set is exactly
    /// `{ i : ara[i] > threshold }`.
    pub fn new(
        threshold: f64,
        noise_nodes: Vec<usize>,
        neutral_values: Vec<f64>,
        average_relative_activity: Vec<f64>,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        if noise_nodes.len() != neutral_values.len() {
            return Err(Error::arg(format!(
                "{} noise nodes but {} neutral values",
                noise_nodes.len(),
                neutral_values.len()
            )));
        }
        if neutral_values.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::arg("neutral values must lie in [0, 1]"));
        }
        if noise_nodes != detect_noise_nodes(&average_relative_activity, threshold)? {
            return Err(Error::arg("noise nodes disagree with the activity threshold"));
        }
        Ok(NoiseProfile {
            threshold,
            noise_nodes,
            neutral_values,
            average_relative_activity,
        })
    }

    /// A profile that flags nothing, for a top layer of `top_width` nodes.
    pub fn empty(top_width: usize) -> Self {
        NoiseProfile {
            threshold: 1.0,
            noise_nodes: Vec::new(),
            neutral_values: Vec::new(),
            average_relative_activity: vec![0.0; top_width],
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn noise_nodes(&self) -> &[usize] {
        &self.noise_nodes
    }

    pub fn neutral_values(&self) -> &[f64] {
        &self.neutral_values
    }

    pub fn average_relative_activity(&self) -> &[f64] {
        &self.average_relative_activity
    }

    pub fn top_width(&self) -> usize {
        self.average_relative_activity.len()
    }

    /// Writes `top` with every flagged entry replaced by its neutral value.
    pub fn neutralize(&self, top: &mut [f64]) -> Result<()> {
        if top.len() != self.top_width() {
            return Err(Error::arg(format!(
                "top vector has {} entries, profile covers {}",
                top.len(),
                self.top_width()
            )));
        }
        for (&i, &v) in self.noise_nodes.iter().zip(&self.neutral_values) {
            top[i] = v;
        }
        Ok(())
    }

    fn neutralize_rows(&self, tops: &mut Array2<f64>) -> Result<()> {
        for mut row in tops.rows_mut() {
            self.neutralize(row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(())
    }

    /// Text form: a header, then one column-aligned line per top node with
    /// index, average relative activity, flag and neutral value (`-` when
    /// not flagged), at 10 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# noise profile").unwrap();
        writeln!(out, "# threshold {}", self.threshold).unwrap();
        writeln!(out, "# top_width {}", self.top_width()).unwrap();
        writeln!(out, "# flagged {}", self.noise_nodes.len()).unwrap();
        writeln!(out, "# {:>6}  {:>16}  {:>4}  {:>16}", "index", "avg_rel_activity", "flag", "neutral_value").unwrap();
        let mut neutral = self.noise_nodes.iter().zip(&self.neutral_values).peekable();
        for (i, ara) in self.average_relative_activity.iter().enumerate() {
            let value = match neutral.peek() {
                Some((&node, _)) if node == i => {
                    let (_, v) = neutral.next().expect("peeked");
                    Some(*v)
                }
                _ => None,
            };
            let flag = u8::from(value.is_some());
            let value = value.map_or_else(|| "-".to_string(), |v| format!("{v:.9e}"));
            writeln!(out, "  {i:>6}  {ara:>16.9e}  {flag:>4}  {value:>16}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut threshold = None;
        let mut ara = Vec::new();
        let mut nodes = Vec::new();
        let mut neutral = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(t) = rest.trim().strip_prefix("threshold ") {
                    threshold = Some(
                        t.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::format(format!("line {}: bad threshold: {e}", lineno + 1)))?,
                    );
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::format(format!("line {}: {what}", lineno + 1));
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let index: usize = cols[0].parse().map_err(|_| bad("bad index"))?;
            if index != ara.len() {
                return Err(bad("node indices must be consecutive from 0"));
            }
            ara.push(cols[1].parse::<f64>().map_err(|_| bad("bad activity"))?);
            match cols[2] {
                "0" => {}
                "1" => {
                    nodes.push(index);
                    neutral.push(cols[3].parse::<f64>().map_err(|_| bad("bad neutral value"))?);
                }
                _ => return Err(bad("flag must be 0 or 1")),
            }
        }
        let threshold = threshold.ok_or_else(|| Error::format("missing threshold header"))?;
        NoiseProfile::new(threshold, nodes, neutral, ara).map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        NoiseProfile::from_text(&fs::read_to_string(path)?)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::arg(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

/// Entrywise `|top(clean) - top(noisy)|`.
pub fn relative_activity(d: &Dbn, clean: &Image, noisy: &Image) -> Result<Vec<f64>> {
    let a = d.encode(clean)?.into_top();
    let b = d.encode(noisy)?.into_top();
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect())
}

fn mean_rows(rows: ArrayView2<'_, f64>) -> Array1<f64> {
    // Sequential row order keeps the floating-point sum reproducible.
    let mut acc = Array1::<f64>::zeros(rows.ncols());
    for row in rows.axis_iter(Axis(0)) {
        acc += &row;
    }
    acc / rows.nrows() as f64
}

/// Per-node mean of [`relative_activity`] over every pair in `ds`.
pub fn average_relative_activity(d: &Dbn, ds: &PairedDataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::arg("average relative activity needs at least one pair"));
    }
    let clean: Vec<Image> = ds.clean().cloned().collect();
    let noisy: Vec<Image> = ds.noisy().cloned().collect();
    let top_clean = d.encode_top_batch(d.images_to_rows(&clean)?.view())?;
    let top_noisy = d.encode_top_batch(d.images_to_rows(&noisy)?.view())?;
    let diff = (top_clean - top_noisy).mapv(f64::abs);
    Ok(mean_rows(diff.view()).to_vec())
}

/// Indices whose average relative activity is strictly above `threshold`.
pub fn detect_noise_nodes(ara: &[f64], threshold: f64) -> Result<Vec<usize>> {
    check_threshold(threshold)?;
    Ok(ara
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Mean top-layer activation of each node in `nodes` over `clean_images`.
pub fn neutral_values(d: &Dbn, clean_images: &[Image], nodes: &[usize]) -> Result<Vec<f64>> {
    if clean_images.is_empty() {
        return Err(Error::arg("neutral values need at least one clean image"));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= d.top_width()) {
        return Err(Error::arg(format!("node {bad} outside a top layer of {}", d.top_width())));
    }
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    let tops = d.encode_top_batch(d.images_to_rows(clean_images)?.view())?;
    let mean = mean_rows(tops.view());
    Ok(nodes.iter().map(|&i| mean[i].clamp(0.0, 1.0)).collect())
}

/// Detection and neutral values from an already computed activity vector.
pub fn profile_from_activity(d: &Dbn, clean_images: &[Image], ara: Vec<f64>, threshold: f64) -> Result<NoiseProfile> {
    if ara.len() != d.top_width() {
        return Err(Error::arg("activity vector does not match the top layer"));
    }
    let nodes = detect_noise_nodes(&ara, threshold)?;
    let neutral = neutral_values(d, clean_images, &nodes)?;
    NoiseProfile::new(threshold, nodes, neutral, ara)
}

/// Average relative activity, thresholding and neutral values (over the
/// clean side of `ds`) in one go.
pub fn build_profile(d: &Dbn, ds: &PairedDataset, threshold: f64) -> Result<NoiseProfile> {
    check_threshold(threshold)?;
    let ara = average_relative_activity(d, ds)?;
    let clean: Vec<Image> = ds.clean().cloned().collect();
    profile_from_activity(d, &clean, ara, threshold)
}

/// Top-layer vector of `noisy` after neutralizing the flagged nodes.
pub fn neutralized_top(d: &Dbn, p: &NoiseProfile, noisy: &Image) -> Result<Vec<f64>> {
    let mut top = d.encode(noisy)?.into_top();
    p.neutralize(&mut top)?;
    Ok(top)
}

pub fn denoise(d: &Dbn, p: &NoiseProfile, noisy: &Image) -> Result<Image> {
    d.reconstruct(&neutralized_top(d, p, noisy)?)
}

/// [`denoise`] over many images with batched matrix passes.
pub fn denoise_batch(d: &Dbn, p: &NoiseProfile, noisy: &[Image]) -> Result<Vec<Image>> {
    if noisy.is_empty() {
        return Ok(Vec::new());
    }
    let mut tops = d.encode_top_batch(d.images_to_rows(noisy)?.view())?;
    p.neutralize_rows(&mut tops)?;
    d.rows_to_images(d.reconstruct_batch(tops.view())?.view())
}

/// Plain `reconstruct(encode(x))` for many images.
pub fn reconstruct_batch(d: &Dbn, images: &[Image]) -> Result<Vec<Image>> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let tops = d.encode_top_batch(images_to_rows(images)?.view())?;
    d.rows_to_images(d.reconstruct_batch(tops.view())?.view())
}
