//! Binary model container, little-endian throughout:
//!
//! ```text
//! "DBNM"                      4 bytes
//! version                     u32
//! layer count                 u32
//! image width, image height   u32, u32
//! per layer:
//!   n_visible, n_hidden       u32, u32
//!   visible kind, hidden kind u32, u32   (0 = binary, 1 = real in [0, 1])
//!   visible bias              n_visible × f64
//!   hidden bias               n_hidden × f64
//!   weights                   n_visible × n_hidden × f64, row-major
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::Dbn;
use crate::error::{Error, Result};
use crate::rbm::{Rbm, UnitKind};

pub const MODEL_MAGIC: [u8; 4] = *b"DBNM";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model(d: &Dbn) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    for v in [
        MODEL_VERSION,
        d.layers().len() as u32,
        d.image_width() as u32,
        d.image_height() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for rbm in d.layers() {
        for v in [
            rbm.n_visible() as u32,
            rbm.n_hidden() as u32,
            rbm.visible_kind().code(),
            rbm.hidden_kind().code(),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let params = rbm
            .visible_bias()
            .iter()
            .chain(rbm.hidden_bias().iter())
            .chain(rbm.weights().iter());
        for x in params {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save_model(d: &Dbn, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(d))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Dbn> {
    read_model(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("model file truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::format(format!("{what} size overflows")))?;
        let raw = self.take(len, what)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::format(format!("non-finite value in {what}")));
        }
        Ok(values)
    }
}

fn unit_kind(code: u32, layer: usize) -> Result<UnitKind> {
    UnitKind::from_code(code).ok_or_else(|| Error::format(format!("layer {layer}: unknown unit kind {code}")))
}

/// Parses a model container; any inconsistency is a format error.
pub fn read_model(bytes: &[u8]) -> Result<Dbn> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::format(format!(
            "bad model magic {:?}, expected \"DBNM\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = cur.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!(
            "unsupported model version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n_layers = cur.u32("layer count")? as usize;
    let width = cur.u32("image width")? as usize;
    let height = cur.u32("image height")? as usize;
    if n_layers == 0 {
        return Err(Error::format("model has no layers"));
    }

    let mut layers = Vec::new();
    for k in 0..n_layers {
        let nv = cur.u32("layer dims")? as usize;
        let nh = cur.u32("layer dims")? as usize;
        let vk = unit_kind(cur.u32("unit kinds")?, k)?;
        let hk = unit_kind(cur.u32("unit kinds")?, k)?;
        let a = cur.f64s(nv, "visible bias")?;
        let b = cur.f64s(nh, "hidden bias")?;
        let nw = nv
            .checked_mul(nh)
            .ok_or_else(|| Error::format(format!("layer {k}: weight count overflows")))?;
        let w = cur.f64s(nw, "weights")?;
        let weights = Array2::from_shape_vec((nv, nh), w).expect("length checked");
        let rbm = Rbm::from_parts(weights, Array1::from(a), Array1::from(b), vk, hk)
            .map_err(|e| Error::format(format!("layer {k}: {e}")))?;
        layers.push(rbm);
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - cur.pos
        )));
    }
    Dbn::new(layers, width, height).map_err(|e| Error::format(format!("inconsistent model: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn small_model() -> Dbn {
        let mut rng = seed::stream(1, 0);
        let layers = vec![
            Rbm::random(16, 8, UnitKind::RealUnitInterval, UnitKind::Binary, 0.5, &mut rng).unwrap(),
            Rbm::random(8, 4, UnitKind::Binary, UnitKind::RealUnitInterval, 0.5, &mut rng).unwrap(),
        ];
        Dbn::new(layers, 4, 4).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let d = small_model();
        let bytes = write_model(&d);
        let back = read_model(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(write_model(&back), bytes);
        assert_eq!(&bytes[..4], b"DBNM");
        assert_eq!(bytes.len(), 20 + 2 * 16 + 8 * (16 + 8 + 128) + 8 * (8 + 4 + 32));
    }

    #[test]
    fn truncation_is_a_format_error() {
        let bytes = write_model(&small_model());
        for cut in [0, 3, 10, 30, bytes.len() - 1] {
            assert!(matches!(read_model(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(read_model(&long), Err(Error::Format(_))));
    }

    #[test]
    fn corrupted_magic_is_named() {
        let mut bytes = write_model(&small_model());
        bytes[0] = b'X';
        match read_model(&bytes) {
            Err(Error::Format(msg)) => assert!(msg.contains("XBNM"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_version_and_dims() {
        let mut bytes = write_model(&small_model());
        bytes[4] = 9;
        assert!(matches!(read_model(&bytes), Err(Error::Format(_))));

        let mut bytes = write_model(&small_model());
        // second layer's n_visible: 20-byte header + 16 dims + params of layer 0
        let off = 20 + 16 + 8 * (16 + 8 + 128);
        bytes[off..off + 4].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(read_model(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbnm");
        let d = small_model();
        save_model(&d, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), d);
    }
}
