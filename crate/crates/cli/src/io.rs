//! Grayscale image and raw grid files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use tsvdecomp::ScalarField;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveMode {
    /// `round(255 clamp(x, 0, 1))`
    Clamp01,
    /// Zero-mean texture shown around mid-gray: `x / 2 + 0.5`, then clamped.
    Texture,
    /// `[min, max]` stretched to `[0, 255]`; a constant field maps to 0.
    Normalize,
}

fn io_err(path: &Path, what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{what} {}: {e}", path.display()))
}

/// Reads a binary PGM (maxval 255) or a PNG, converting color to luma.
/// Samples are scaled to [0, 1].
pub fn load_image(path: &Path) -> Result<ScalarField, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, "cannot read", e))?;
    let (rows, cols, pixels) = if bytes.starts_with(b"P5") {
        parse_pgm(&bytes).map_err(|e| io_err(path, "bad PGM", e))?
    } else if bytes.starts_with(b"\x89PNG") {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| io_err(path, "bad PNG", e))?
            .to_luma8();
        let (w, h) = img.dimensions();
        (h as usize, w as usize, img.into_raw())
    } else {
        return Err(io_err(path, "unsupported format", "expected binary PGM (P5) or PNG"));
    };
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    ScalarField::from_vec(rows, cols, data).map_err(|e| io_err(path, "unusable image", e))
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments before each header number
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("truncated header")?;
    }
    let [cols, rows, maxval] = fields;
    if maxval != 255 {
        return Err(format!("maxval must be 255, got {maxval}"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing separator after header".into());
    }
    pos += 1;
    let len = rows.checked_mul(cols).ok_or("dimensions overflow")?;
    let data = bytes.get(pos..pos + len).ok_or("truncated pixel data")?;
    Ok((rows, cols, data.to_vec()))
}

// Values this close below a .5 tie still round up, so roundoff-level texture
// (around 1e-17) lands on mid-gray instead of 127.
const TIE_SLACK: f64 = 1e-9;

/// Quantizes with round-half-up.
pub fn to_bytes(field: &ScalarField, mode: SaveMode) -> Vec<u8> {
    let q = |x: f64| (255.0 * x.clamp(0.0, 1.0) + 0.5 + TIE_SLACK).floor().min(255.0) as u8;
    match mode {
        SaveMode::Clamp01 => field.as_slice().iter().map(|&x| q(x)).collect(),
        SaveMode::Texture => field.as_slice().iter().map(|&x| q(x / 2.0 + 0.5)).collect(),
        SaveMode::Normalize => {
            let (lo, hi) = (field.min(), field.max());
            let span = hi - lo;
            field
                .as_slice()
                .iter()
                .map(|&x| if span > 0.0 { q((x - lo) / span) } else { 0 })
                .collect()
        }
    }
}

pub fn save_pgm(field: &ScalarField, path: &Path, mode: SaveMode) -> Result<(), CliError> {
    let mut out = format!("P5\n{} {}\n255\n", field.cols(), field.rows()).into_bytes();
    out.extend(to_bytes(field, mode));
    fs::write(path, out).map_err(|e| io_err(path, "cannot write", e))
}

pub fn save_png(field: &ScalarField, path: &Path, mode: SaveMode) -> Result<(), CliError> {
    let img = image::GrayImage::from_raw(field.cols() as u32, field.rows() as u32, to_bytes(field, mode))
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| io_err(path, "cannot write", e))
}

pub const RAW_MAGIC: &[u8; 4] = b"TSVF";

/// 16-byte header (`TSVF`, u32 rows, u32 cols, 4 zero bytes) followed by
/// row-major little-endian f64 samples.
pub fn save_raw(field: &ScalarField, path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, "cannot write", e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        w.write_all(RAW_MAGIC)?;
        w.write_all(&(field.rows() as u32).to_le_bytes())?;
        w.write_all(&(field.cols() as u32).to_le_bytes())?;
        w.write_all(&[0; 4])?;
        for x in field.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(path, "cannot write", e))
}
