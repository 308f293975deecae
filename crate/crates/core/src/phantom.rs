//! Synthetic test images with known region masks.
//!
//! * `stripes`: flat background with a rectangular patch of vertical
//!   sinusoidal stripes.
//! * `tiles`: flat background, a checkerboard-tiled patch and a flat disc.
//! * `two-scale`: full-frame texture made of a coarse carrier along the
//!   columns and a fine carrier (four times the frequency) along the rows.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Pixels at Chebyshev distance at most this from another region form the
/// boundary band.
pub const BOUNDARY_BAND: usize = 2;
/// Pixels at least this far from another region count as interior.
pub const INTERIOR_MARGIN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    Stripes,
    Tiles,
    TwoScale,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripes" => Ok(PhantomKind::Stripes),
            "tiles" => Ok(PhantomKind::Tiles),
            "two-scale" | "two_scale" | "twoscale" => Ok(PhantomKind::TwoScale),
            other => Err(Error::UnknownPhantom(other.to_string())),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Stripes => "stripes",
            PhantomKind::Tiles => "tiles",
            PhantomKind::TwoScale => "two-scale",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Boundary,
    TextureInterior,
    FlatInterior,
    DontCare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    rows: usize,
    cols: usize,
    labels: Vec<Region>,
}

impl RegionMasks {
    pub fn region(&self, i: usize, j: usize) -> Region {
        self.labels[i * self.cols + j]
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }

    pub fn values<'a>(&'a self, field: &'a ScalarField, region: Region) -> impl Iterator<Item = f64> + 'a {
        assert_eq!(field.dims(), self.dims());
        self.labels
            .iter()
            .zip(field.as_slice())
            .filter(move |(&r, _)| r == region)
            .map(|(_, &x)| x)
    }

    /// Mean of `field` over `region`; NaN if the region is empty.
    pub fn mean(&self, field: &ScalarField, region: Region) -> f64 {
        let (sum, count) = self
            .values(field, region)
            .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        sum / count as f64
    }

    /// Unbiased sample variance over `region`.
    pub fn variance(&self, field: &ScalarField, region: Region) -> f64 {
        let mu = self.mean(field, region);
        let (ss, count) = self
            .values(field, region)
            .fold((0.0, 0usize), |(s, c), x| (s + (x - mu) * (x - mu), c + 1));
        ss / (count as f64 - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub image: ScalarField,
    pub masks: RegionMasks,
}

/// Deterministic function of `(kind, rows, cols, seed)`.
pub fn make_phantom(kind: PhantomKind, rows: usize, cols: usize, seed: u64) -> Result<Phantom> {
    if rows < 32 || cols < 32 {
        return Err(Error::param(
            "dims",
            format!("phantoms need at least 32x32, got {rows}x{cols}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (image, segments, textured): (ScalarField, Vec<u8>, &[u8]) = match kind {
        PhantomKind::Stripes => {
            let phase = rng.random_range(0.0..2.0 * PI);
            let seg = rect_segments(rows, cols);
            let img = ScalarField::from_fn(rows, cols, |i, j| match seg[i * cols + j] {
                1 => 0.6 + 0.2 * (2.0 * PI * j as f64 / 4.0 + phase).sin(),
                _ => 0.2,
            })?;
            (img, seg, &[1])
        }
        PhantomKind::Tiles => {
            let (oi, oj) = (rng.random_range(0..4usize), rng.random_range(0..4usize));
            let mut seg = rect_segments(rows, cols);
            // flat disc in the upper-right corner, clear of the patch
            let (ci, cj) = (rows as f64 / 8.0, 7.0 * cols as f64 / 8.0);
            let rad = rows.min(cols) as f64 / 12.0;
            for i in 0..rows {
                for j in 0..cols {
                    let (di, dj) = (i as f64 - ci, j as f64 - cj);
                    if seg[i * cols + j] == 0 && di * di + dj * dj <= rad * rad {
                        seg[i * cols + j] = 2;
                    }
                }
            }
            let img = ScalarField::from_fn(rows, cols, |i, j| match seg[i * cols + j] {
                1 => {
                    let checker = ((i + oi) / 2 + (j + oj) / 2) % 2 == 0;
                    if checker {
                        0.75
                    } else {
                        0.45
                    }
                }
                2 => 0.85,
                _ => 0.2,
            })?;
            (img, seg, &[1])
        }
        PhantomKind::TwoScale => {
            let (pc, pf) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
            let coarse = (cols / 16).max(1) as f64;
            let fine = 4.0 * (rows / 16).max(1) as f64;
            let img = ScalarField::from_fn(rows, cols, |i, j| {
                0.5 + 0.15 * (2.0 * PI * coarse * j as f64 / cols as f64 + pc).sin()
                    + 0.1 * (2.0 * PI * fine * i as f64 / rows as f64 + pf).sin()
            })?;
            (img, vec![1; rows * cols], &[1])
        }
    };
    let masks = label_regions(rows, cols, &segments, textured);
    Ok(Phantom { kind, image, masks })
}

/// Segment 1 is the central rectangle covering the middle half of each axis.
fn rect_segments(rows: usize, cols: usize) -> Vec<u8> {
    let mut seg = vec![0u8; rows * cols];
    for i in rows / 4..3 * rows / 4 {
        for j in cols / 4..3 * cols / 4 {
            seg[i * cols + j] = 1;
        }
    }
    seg
}

fn label_regions(rows: usize, cols: usize, segments: &[u8], textured: &[u8]) -> RegionMasks {
    let reach = INTERIOR_MARGIN as isize;
    let mut labels = Vec::with_capacity(rows * cols);
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let here = segments[(i as usize) * cols + j as usize];
            // Chebyshev distance to the nearest pixel of another segment,
            // capped at the interior margin.
            let mut dist = INTERIOR_MARGIN;
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    let d = di.unsigned_abs().max(dj.unsigned_abs());
                    if d == 0 || d >= dist {
                        continue;
                    }
                    let ii = (i + di).rem_euclid(rows as isize) as usize;
                    let jj = (j + dj).rem_euclid(cols as isize) as usize;
                    if segments[ii * cols + jj] != here {
                        dist = d;
                    }
                }
            }
            labels.push(if dist <= BOUNDARY_BAND {
                Region::Boundary
            } else if dist < INTERIOR_MARGIN {
                Region::DontCare
            } else if textured.contains(&here) {
                Region::TextureInterior
            } else {
                Region::FlatInterior
            });
        }
    }
    labels.shrink_to_fit();
    RegionMasks { rows, cols, labels }
}
