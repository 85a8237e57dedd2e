//! Grayscale image files.
//!
//! Binary PGM (`P5`, 8- or 16-bit big-endian) is read and written; PNG is
//! read only. Samples are mapped to `[0,1]` by dividing by the maximum code
//! value, and written back by rounding `v · maxval` after clamping.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{MindError, Result};
use crate::image::{Image, ImageGrid};

/// Sample depth used when writing a PGM file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Reads a PGM or PNG file, choosing the decoder from the magic bytes.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes)
    } else {
        Err(MindError::Codec(format!(
            "{}: unrecognized image format (expected binary PGM or PNG)",
            path.as_ref().display()
        )))
    }
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Image, depth: BitDepth) -> Result<()> {
    let bytes = encode_pgm(image, depth);
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn encode_pgm(image: &Image, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval).into_bytes();
    let scale = maxval as f64;
    for &v in image.values() {
        let code = (v.clamp(0.0, 1.0) * scale).round() as u32;
        match depth {
            BitDepth::Eight => out.push(code as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(code as u16).to_be_bytes()),
        }
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(MindError::Codec("not a binary PGM (P5) file".into()));
    }
    let width = parse_header_int(next_token(bytes, &mut pos)?)?;
    let height = parse_header_int(next_token(bytes, &mut pos)?)?;
    let maxval = parse_header_int(next_token(bytes, &mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(MindError::Codec(format!("invalid PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(MindError::Codec("truncated PGM header".into()));
    }
    pos += 1;
    let grid = ImageGrid::new(width, height)?;
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let raster = &bytes[pos..];
    if raster.len() < grid.n() * sample_bytes {
        return Err(MindError::Codec(format!(
            "PGM raster has {} bytes, expected {}",
            raster.len(),
            grid.n() * sample_bytes
        )));
    }
    let scale = maxval as f64;
    let values = if sample_bytes == 1 {
        raster[..grid.n()].iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster[..2 * grid.n()]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    Image::new(grid, values)
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
        return Err(MindError::Codec("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_header_int(token: &[u8]) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| MindError::Codec(format!("bad PGM header field {:?}", String::from_utf8_lossy(token))))
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| MindError::Codec(e.to_string()))?;
    use image::ColorType;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let grid = ImageGrid::new(w, h)?;
    let values = match decoded.color() {
        ColorType::L8 | ColorType::La8 => decoded.into_luma8().into_raw().into_iter().map(|b| b as f64 / 255.0).collect(),
        ColorType::L16 | ColorType::La16 => decoded
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|b| b as f64 / 65535.0)
            .collect(),
        other => return Err(MindError::Codec(format!("PNG is not grayscale ({other:?})"))),
    };
    Image::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_truncated_raster() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert!(decode_pgm(&bytes).is_err());
        assert!(decode_pgm(b"P2 1 1 255\n0").is_err());
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x01, 0x00]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.values()[0], 256.0 / 65535.0);
        assert_eq!(encode_pgm(&img, BitDepth::Sixteen)[bytes.len() - 2..], [0x01, 0x00]);
    }

    #[test]
    fn png_grayscale_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let buf = image::GrayImage::from_raw(3, 1, vec![0, 128, 255]).unwrap();
        buf.save(&path).unwrap();
        let img = read_image(&path).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.values(), &[0.0, 128.0 / 255.0, 1.0]);
    }

    proptest! {
        #[test]
        fn quantized_round_trip(w in 1usize..9, h in 1usize..9, sixteen in any::<bool>(), seed in any::<u64>()) {
            let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
            let maxval = depth.max_value() as u64;
            let codes: Vec<u64> = (0..w * h)
                .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 17) % (maxval + 1))
                .collect();
            let grid = ImageGrid::new(w, h).unwrap();
            let img = Image::new(grid, codes.iter().map(|&c| c as f64 / maxval as f64).collect()).unwrap();
            let bytes = encode_pgm(&img, depth);
            let back = decode_pgm(&bytes).unwrap();
            prop_assert_eq!(back.values(), img.values());
            prop_assert_eq!(encode_pgm(&back, depth), bytes);
        }
    }
}
