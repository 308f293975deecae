//! Non-local means pre-denoising, used only to stabilize the TSV of noisy
//! inputs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmParams {
    /// Odd patch side length.
    pub patch: usize,
    /// Odd search window side length.
    pub search: usize,
    /// Filtering strength.
    pub h: f64,
}

impl Default for NlmParams {
    fn default() -> Self {
        Self {
            patch: 5,
            search: 11,
            h: 10.0 / 255.0,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch.is_multiple_of(2) {
            return Err(Error::param("patch", format!("must be odd, got {}", self.patch)));
        }
        if self.search.is_multiple_of(2) {
            return Err(Error::param("search", format!("must be odd, got {}", self.search)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param("h", format!("must be positive, got {}", self.h)));
        }
        Ok(())
    }
}

/// Pixelwise weighted average over a search window, with weights
/// `exp(-d^2 / h^2)` where `d^2` is the mean squared difference of the two
/// surrounding patches. Indices wrap periodically.
pub fn nlm_denoise(f: &ScalarField, params: &NlmParams) -> Result<ScalarField> {
    params.validate()?;
    let (m, n) = f.dims();
    let pr = (params.patch / 2) as isize;
    let sr = (params.search / 2) as isize;
    let inv_h2 = 1.0 / (params.h * params.h);
    let patch_len = (params.patch * params.patch) as f64;

    let mut out = vec![0.0; m * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
        let i = i as isize;
        for (j, d) in dst.iter_mut().enumerate() {
            let j = j as isize;
            let mut wsum = 0.0;
            let mut acc = 0.0;
            for si in -sr..=sr {
                for sj in -sr..=sr {
                    let weight = if si == 0 && sj == 0 {
                        1.0
                    } else {
                        let mut dist = 0.0;
                        for pi in -pr..=pr {
                            for pj in -pr..=pr {
                                let a = f.wrapped(i + pi, j + pj);
                                let b = f.wrapped(i + si + pi, j + sj + pj);
                                dist += (a - b) * (a - b);
                            }
                        }
                        (-(dist / patch_len) * inv_h2).exp()
                    };
                    wsum += weight;
                    acc += weight * f.wrapped(i + si, j + sj);
                }
            }
            *d = acc / wsum;
        }
    });
    // Convex combinations can overshoot the input range by an ulp; clamp.
    let (lo, hi) = (f.min(), f.max());
    out.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    ScalarField::from_vec(m, n, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rejects_even_windows() {
        let f = ScalarField::zeros(8, 8).unwrap();
        let p = NlmParams {
            patch: 4,
            ..NlmParams::default()
        };
        assert!(nlm_denoise(&f, &p).is_err());
        let p = NlmParams {
            search: 10,
            ..NlmParams::default()
        };
        assert!(nlm_denoise(&f, &p).is_err());
        let p = NlmParams {
            h: 0.0,
            ..NlmParams::default()
        };
        assert!(nlm_denoise(&f, &p).is_err());
    }

    #[test]
    fn constant_image_unchanged() {
        let f = ScalarField::filled(12, 12, 0.3).unwrap();
        assert_eq!(nlm_denoise(&f, &NlmParams::default()).unwrap(), f);
    }

    #[test]
    fn vanishing_h_returns_input() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let f = ScalarField::from_fn(10, 10, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let p = NlmParams {
            patch: 3,
            search: 5,
            h: 1e-6,
        };
        assert_eq!(nlm_denoise(&f, &p).unwrap(), f);
    }

    #[test]
    fn reduces_noise_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        // Uniform noise on [-a, a] has standard deviation a / sqrt(3).
        let a = 0.05 * 3f64.sqrt();
        let f = ScalarField::from_fn(64, 64, |_, _| 0.5 + rng.random_range(-a..a)).unwrap();
        let var = |x: &ScalarField| {
            let mu = x.mean();
            x.as_slice().iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64
        };
        let g = nlm_denoise(&f, &NlmParams::default()).unwrap();
        assert!(var(&g) < var(&f), "{} !< {}", var(&g), var(&f));
        assert!(g.min() >= f.min() && g.max() <= f.max());
    }
}
