//! Binary PGM (P5, maxval 255) output and input, plus image grids.

use std::fs;
use std::path::Path;

use crate::data::{denormalize, Image};
use crate::error::{Error, Result};

/// Gray level of the separator lines in a grid.
pub const SEPARATOR_LEVEL: u8 = 128;
/// Separator thickness in pixels.
pub const SEPARATOR_WIDTH: usize = 2;

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&p| denormalize(p)));
    out
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("PGM header ends early"));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(format!("bad PGM {what}")))
}

/// Parses a binary P5 graymap with 8-bit samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::format("not a binary PGM (P5) file"));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let size = width * height;
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() < size {
        return Err(Error::Length {
            expected: pos + size,
            found: bytes.len(),
        });
    }
    let scale = maxval as f64;
    let pixels = raster[..size].iter().map(|&b| (f64::from(b) / scale).min(1.0)).collect();
    Image::new(width, height, pixels)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pgm(&fs::read(path)?)
}

/// Tiles `rows` into one image: each inner vector is a row of the grid,
/// with 2-pixel separators at gray level 128 between tiles.
pub fn grid_image(rows: &[Vec<Image>]) -> Result<Image> {
    let first = rows
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::arg("grid needs at least one image"))?;
    let (tw, th) = (first.width(), first.height());
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::arg("grid rows must have equal length"));
    }
    if rows.iter().flatten().any(|img| !img.same_shape(first)) {
        return Err(Error::arg("grid images must share one size"));
    }
    let width = cols * tw + (cols - 1) * SEPARATOR_WIDTH;
    let height = rows.len() * th + (rows.len() - 1) * SEPARATOR_WIDTH;
    let sep = f64::from(SEPARATOR_LEVEL) / 255.0;
    let mut pixels = vec![sep; width * height];
    for (r, row) in rows.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            let x0 = c * (tw + SEPARATOR_WIDTH);
            let y0 = r * (th + SEPARATOR_WIDTH);
            for y in 0..th {
                let dst = (y0 + y) * width + x0;
                pixels[dst..dst + tw].copy_from_slice(&img.pixels()[y * tw..(y + 1) * tw]);
            }
        }
    }
    Image::new(width, height, pixels)
}

pub fn image_grid(rows: &[Vec<Image>], path: impl AsRef<Path>) -> Result<()> {
    save_pgm(&grid_image(rows)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_image_payload() {
        let bytes = encode_pgm(&Image::filled(3, 2, 0.0).unwrap());
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0u8; 6]);
    }

    #[test]
    fn white_pixel_is_ff() {
        let bytes = encode_pgm(&Image::new(2, 1, vec![1.0, 0.5]).unwrap());
        assert_eq!(&bytes[bytes.len() - 2..], &[0xFF, 128]);
    }

    #[test]
    fn round_trip_within_quantization() {
        let px: Vec<f64> = (0..100).map(|i| (i as f64 * 0.0137) % 1.0).collect();
        let img = Image::new(10, 10, px).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        save_pgm(&img, &path).unwrap();
        let back = load_pgm(&path).unwrap();
        assert!(img.same_shape(&back));
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn decode_handles_comments_and_rejects_garbage() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        assert_eq!(decode_pgm(&bytes).unwrap().pixels(), &[0.0, 1.0]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n4 4\n255\n\x00").is_err());
    }

    #[test]
    fn single_tile_grid_is_the_image() {
        let img = Image::new(2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        assert_eq!(encode_pgm(&grid_image(&[vec![img.clone()]]).unwrap()), encode_pgm(&img));
    }

    #[test]
    fn grid_dimensions_and_separators() {
        let tile = Image::filled(28, 28, 0.0).unwrap();
        let rows = vec![vec![tile.clone(); 4]; 3];
        let g = grid_image(&rows).unwrap();
        assert_eq!((g.width(), g.height()), (4 * 28 + 3 * 2, 3 * 28 + 2 * 2));
        assert_eq!(denormalize(g.pixels()[28]), 128);
        assert_eq!(g.pixels()[0], 0.0);
    }

    #[test]
    fn grid_rejects_mixed_sizes() {
        let a = Image::filled(2, 2, 0.0).unwrap();
        let b = Image::filled(3, 2, 0.0).unwrap();
        assert!(matches!(grid_image(&[vec![a.clone(), b]]), Err(Error::Argument(_))));
        assert!(grid_image(&[vec![a.clone()], vec![a.clone(), a]]).is_err());
        assert!(grid_image(&[]).is_err());
    }
}
