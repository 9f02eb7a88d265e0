//! 8-bit binary PGM (via the `image` crate's PNM codec) and the lossless
//! `DPDF` float64 format.
//!
//! `DPDF` layout: the magic bytes `DPDF`, rows and cols as little-endian
//! `u64`, then `rows·cols` little-endian `f64` in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use super::ImageGrid;
use crate::error::{DpdError, Result};

const MAGIC: &[u8; 4] = b"DPDF";

fn image_err(e: image::ImageError) -> DpdError {
    match e {
        image::ImageError::IoError(io) => DpdError::Io(io),
        other => DpdError::InvalidInput(other.to_string()),
    }
}

/// Reads a grayscale PNM and scales intensities to `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let reader = ImageReader::with_format(BufReader::new(File::open(path)?), ImageFormat::Pnm);
    let img = reader.decode().map_err(image_err)?.into_luma8();
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    ImageGrid::from_fn(rows, cols, |r, c| img.get_pixel(c as u32, r as u32).0[0] as f64 / 255.0)
}

/// `v ↦ clamp(round(255·v), 0, 255)`, rounding half away from zero.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (255.0 * v).round().clamp(0.0, 255.0) as u8
}

/// Writes a binary (P5) PGM with maxval 255.
pub fn write_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    let (rows, cols) = (img.rows(), img.cols());
    let mut raster = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            raster.push(quantize(img.get(r, c)));
        }
    }
    let out = BufWriter::new(File::create(path)?);
    PnmEncoder::new(out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&raster, cols as u32, rows as u32, ExtendedColorType::L8)
        .map_err(image_err)
}

pub fn write_dpdf(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(img.rows() as u64).to_le_bytes())?;
    out.write_all(&(img.cols() as u64).to_le_bytes())?;
    for v in img.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dpdf(path: &Path) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(DpdError::InvalidInput(format!("{} is not a DPDF file", path.display())));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8));
    if expected != Some(body.len()) {
        return Err(DpdError::InvalidInput(format!(
            "DPDF payload is {} bytes, header says {rows}x{cols}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ImageGrid::new(rows, cols, data)
}
