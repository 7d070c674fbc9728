//! MNIST ingestion, pixel normalization and AWGN corruption.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale raster with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::arg(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::arg(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from raw 8-bit intensities.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(width, height, bytes.iter().copied().map(normalize).collect())
    }

    /// Builds an image, clamping every value into `[0, 1]`. NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let pixels = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Image::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Quantizes back to 8-bit intensities.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().copied().map(denormalize).collect()
    }
}

/// Maps a raw intensity onto `[0, 1]` with the fixed range 0..=255.
pub fn normalize(byte: u8) -> f64 {
    f64::from(byte) / 255.0
}

/// Inverse of [`normalize`], rounding to the nearest byte.
pub fn denormalize(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Clean images paired index-for-index with their corrupted copies.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pairs: Vec<(Image, Image)>,
    noise_variance: f64,
}

impl PairedDataset {
    pub fn new(pairs: Vec<(Image, Image)>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0) {
            return Err(Error::arg(format!("noise variance {noise_variance} < 0")));
        }
        if let Some((first, _)) = pairs.first() {
            let mismatched = pairs
                .iter()
                .any(|(c, n)| !c.same_shape(first) || !n.same_shape(first));
            if mismatched {
                return Err(Error::arg("paired images must share one size"));
            }
        }
        Ok(PairedDataset {
            pairs,
            noise_variance,
        })
    }

    pub fn pairs(&self) -> &[(Image, Image)] {
        &self.pairs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clean(&self) -> impl Iterator<Item = &Image> + '_ {
        self.pairs.iter().map(|(c, _)| c)
    }

    pub fn noisy(&self) -> impl Iterator<Item = &Image> + '_ {
        self.pairs.iter().map(|(_, n)| n)
    }
}

fn open_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path)?;
    let mut reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    Ok(bytes)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Length {
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Reads an IDX image file (`.gz` is decompressed transparently).
pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    parse_idx_images(&open_maybe_gz(path.as_ref())?)
}

/// Parses the bytes of an IDX image container.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(format!(
            "bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(format!("image size {rows}x{cols} overflows")))?;
    let expected = count
        .checked_mul(size)
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::format("declared payload size overflows"))?;
    if bytes.len() != expected {
        return Err(Error::Length {
            expected,
            found: bytes.len(),
        });
    }
    if size == 0 {
        return (0..count).map(|_| Image::new(cols, rows, Vec::new())).collect();
    }
    bytes[16..]
        .chunks_exact(size)
        .map(|chunk| Image::from_bytes(cols, rows, chunk))
        .collect()
}

/// Reads an IDX label file. Labels play no part in denoising.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let bytes = open_maybe_gz(path.as_ref())?;
    let magic = be_u32(&bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(format!(
            "bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(&bytes, 4)? as usize;
    if bytes.len() != count + 8 {
        return Err(Error::Length {
            expected: count + 8,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..].to_vec())
}

/// Adds zero-mean Gaussian noise of the given variance to every pixel and
/// clamps the result back into `[0, 1]`.
///
/// Draws come from `rand_distr::Normal` (ziggurat) over a ChaCha8 stream
/// keyed by `seed`; both are pinned through `Cargo.lock`.
pub fn add_awgn(img: &Image, variance: f64, seed: u64) -> Result<Image> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::arg(format!("noise variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = seed::stream(seed, 0);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (p + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    Ok(Image {
        width: img.width,
        height: img.height,
        pixels,
    })
}

/// Corrupts each clean image with its own noise stream derived from `seed`.
pub fn make_pairs(clean: &[Image], variance: f64, seed: u64) -> Result<PairedDataset> {
    if clean.is_empty() {
        return Err(Error::arg("cannot pair an empty image set"));
    }
    let pairs = clean
        .iter()
        .enumerate()
        .map(|(i, img)| Ok((img.clone(), add_awgn(img, variance, seed::derive(seed, i as u64))?)))
        .collect::<Result<Vec<_>>>()?;
    PairedDataset::new(pairs, variance)
}

/// Splits `items` into consecutive batches; the last may be short.
pub fn batches<T>(items: &[T], batch_size: usize) -> Result<Vec<&[T]>> {
    if batch_size == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    Ok(items.chunks(batch_size).collect())
}
