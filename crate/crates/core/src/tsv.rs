//! Total symmetric variation (TSV) and the weight field built from it.
//!
//! Along each of four directions the forward difference of the image is
//! averaged against a rotated anisotropic Gaussian line kernel; the TSV is the
//! sum of the absolute averages. Symmetric contrast changes (flat regions,
//! periodic textures) cancel inside the average, one-sided changes (region
//! boundaries) do not.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{diff, Axis, Direction, ScalarField};

/// Kernel orientations, paired with the difference directions of
/// [`Axis::ALL`] in the same order.
pub const DIRECTIONS: [f64; 4] = [0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsvParams {
    /// Spread along the line (line length).
    pub sigma1: f64,
    /// Spread across the line (line width).
    pub sigma2: f64,
    /// Kernel support extent; the kernel radius is `window / 2`.
    pub window: usize,
    /// Floor added to the TSV to form the weight.
    pub kappa: f64,
}

impl Default for TsvParams {
    fn default() -> Self {
        Self {
            sigma1: 2.75,
            sigma2: 0.75,
            window: 20,
            kappa: 0.1,
        }
    }
}

impl TsvParams {
    pub fn validate(&self) -> Result<()> {
        positive("sigma1", self.sigma1)?;
        positive("sigma2", self.sigma2)?;
        positive("kappa", self.kappa)?;
        if self.window < 3 {
            return Err(Error::param("window", format!("must be >= 3, got {}", self.window)));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.window / 2
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}

/// Quadratic-form coefficients of the rotated Gaussian
/// `exp(-(a k^2 + 2 b k l + c l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCoefficients {
    pub kernel_a: f64,
    pub kernel_b: f64,
    pub kernel_c: f64,
}

impl KernelCoefficients {
    pub fn new(theta: f64, sigma1: f64, sigma2: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let (s, c) = (snap(s), snap(c));
        let s2 = snap((2.0 * theta).sin());
        Self {
            kernel_a: c * c / (2.0 * sigma1) + s * s / (2.0 * sigma2),
            kernel_b: s2 / (4.0 * sigma1) - s2 / (4.0 * sigma2),
            kernel_c: s * s / (2.0 * sigma1) + c * c / (2.0 * sigma2),
        }
    }
}

// Rounds trig values that are zero up to representation error of pi, so the
// axis-aligned kernels are exact transposes of each other.
fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

/// Square kernel of odd extent `2R + 1`, stored row-major with offset
/// `(k, l)` at `[(k + R) * (2R + 1) + (l + R)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn extent(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(k, l)`, both in `-R..=R`.
    pub fn at(&self, k: isize, l: isize) -> f64 {
        let r = self.radius as isize;
        assert!(k.abs() <= r && l.abs() <= r, "offset ({k}, {l}) outside radius {r}");
        self.weights[((k + r) as usize) * self.extent() + (l + r) as usize]
    }

    pub fn transpose(&self) -> Kernel {
        let e = self.extent();
        let mut weights = vec![0.0; e * e];
        for a in 0..e {
            for b in 0..e {
                weights[b * e + a] = self.weights[a * e + b];
            }
        }
        Kernel {
            radius: self.radius,
            weights,
        }
    }
}

/// Normalized rotated anisotropic Gaussian for orientation `theta`.
pub fn build_kernel(theta: f64, params: &TsvParams) -> Result<Kernel> {
    params.validate()?;
    let coef = KernelCoefficients::new(theta, params.sigma1, params.sigma2);
    let r = params.radius() as isize;
    let e = (2 * r + 1) as usize;
    let mut weights = Vec::with_capacity(e * e);
    for k in -r..=r {
        for l in -r..=r {
            let (kf, lf) = (k as f64, l as f64);
            let q = coef.kernel_a * kf * kf + 2.0 * coef.kernel_b * kf * lf + coef.kernel_c * lf * lf;
            weights.push((-q).exp());
        }
    }
    // Summing in sorted order makes the normalizer independent of layout, so
    // rotated-by-90-degree kernels stay exact transposes.
    let mut sorted = weights.clone();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Kernel {
        radius: params.radius(),
        weights,
    })
}

/// The four directional kernels, ordered as [`DIRECTIONS`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    kernels: [Kernel; 4],
}

impl KernelStack {
    pub fn new(params: &TsvParams) -> Result<Self> {
        let [a, b, c, d] = DIRECTIONS;
        Ok(Self {
            kernels: [
                build_kernel(a, params)?,
                build_kernel(b, params)?,
                build_kernel(c, params)?,
                build_kernel(d, params)?,
            ],
        })
    }

    pub fn kernels(&self) -> &[Kernel; 4] {
        &self.kernels
    }

    pub fn radius(&self) -> usize {
        self.kernels[0].radius
    }
}

/// Periodic correlation of `field` with `kernel`:
/// `out(i, j) = sum_{k,l} w(k, l) field(i + k, j + l)`.
pub fn correlate_periodic(field: &ScalarField, kernel: &Kernel) -> ScalarField {
    let (m, n) = field.dims();
    let r = kernel.radius as isize;
    let e = kernel.extent();
    let src = field.as_slice();
    let mut out = vec![0.0; m * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
        for k in -r..=r {
            let row_idx = (i as isize + k).rem_euclid(m as isize) as usize;
            let row = &src[row_idx * n..(row_idx + 1) * n];
            let wrow = &kernel.weights[(k + r) as usize * e..(k + r + 1) as usize * e];
            for l in -r..=r {
                let w = wrow[(l + r) as usize];
                let shift = l.rem_euclid(n as isize) as usize;
                // dst[j] += w * row[(j + shift) % n], split into two contiguous runs.
                let (head, tail) = dst.split_at_mut(n - shift);
                for (d, s) in head.iter_mut().zip(&row[shift..]) {
                    *d += w * s;
                }
                for (d, s) in tail.iter_mut().zip(&row[..shift]) {
                    *d += w * s;
                }
            }
        }
    });
    ScalarField::from_raw(m, n, out)
}

/// Kernel-weighted forward difference along one direction.
pub fn directional_response(f: &ScalarField, axis: Axis, kernel: &Kernel) -> ScalarField {
    correlate_periodic(&diff(f, axis, Direction::Forward), kernel)
}

/// Discrete TSV of `f` using precomputed kernels.
pub fn compute_tsv_with(f: &ScalarField, stack: &KernelStack) -> ScalarField {
    let (m, n) = f.dims();
    let mut acc = ScalarField::from_raw(m, n, vec![0.0; m * n]);
    for (axis, kernel) in Axis::ALL.into_iter().zip(stack.kernels()) {
        let resp = directional_response(f, axis, kernel);
        acc.as_mut_slice()
            .iter_mut()
            .zip(resp.as_slice())
            .for_each(|(a, r)| *a += r.abs());
    }
    acc
}

pub fn compute_tsv(f: &ScalarField, params: &TsvParams) -> Result<ScalarField> {
    let stack = KernelStack::new(params)?;
    Ok(compute_tsv_with(f, &stack))
}

/// Strictly positive weight field `eta >= kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    eta: ScalarField,
    kappa: f64,
}

impl WeightField {
    /// Wraps an arbitrary weight map; every sample must be at least `kappa > 0`.
    pub fn new(eta: ScalarField, kappa: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        if let Some(index) = eta.as_slice().iter().position(|&x| x < kappa) {
            return Err(Error::param(
                "eta",
                format!("sample {index} is {} < kappa = {kappa}", eta.as_slice()[index]),
            ));
        }
        Ok(Self { eta, kappa })
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        positive("eta", value)?;
        Ok(Self {
            eta: ScalarField::filled(rows, cols, value)?,
            kappa: value,
        })
    }

    pub fn eta(&self) -> &ScalarField {
        &self.eta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dims(&self) -> (usize, usize) {
        self.eta.dims()
    }
}

/// `eta = kappa + TSV(f)`.
pub fn build_eta(f: &ScalarField, params: &TsvParams) -> Result<WeightField> {
    let tsv = compute_tsv(f, params)?;
    Ok(WeightField {
        eta: tsv.map(|t| params.kappa + t),
        kappa: params.kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn seeded(rows: usize, cols: usize, seed: u64) -> ScalarField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0)).unwrap()
    }

    fn params(sigma1: f64, sigma2: f64) -> TsvParams {
        TsvParams {
            sigma1,
            sigma2,
            ..TsvParams::default()
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_kernel(0.0, &params(0.0, 1.0)).is_err());
        assert!(build_kernel(0.0, &params(1.0, -1.0)).is_err());
        let p = TsvParams {
            window: 2,
            ..TsvParams::default()
        };
        assert!(p.validate().is_err());
        let p = TsvParams {
            kappa: 0.0,
            ..TsvParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn diagonal_coefficients() {
        let c = KernelCoefficients::new(FRAC_PI_4, 2.0, 1.0);
        assert!((c.kernel_a - 0.375).abs() < 1e-15);
        assert!((c.kernel_b + 0.125).abs() < 1e-15);
        assert!((c.kernel_c - 0.375).abs() < 1e-15);
    }

    #[test]
    fn isotropic_kernel_is_symmetric() {
        let c = KernelCoefficients::new(0.0, 1.5, 1.5);
        assert_eq!(c.kernel_a, 1.0 / 3.0);
        assert_eq!(c.kernel_c, 1.0 / 3.0);
        assert_eq!(c.kernel_b, 0.0);
        let k = build_kernel(0.0, &params(1.5, 1.5)).unwrap();
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn vertical_kernel_is_transpose_of_horizontal() {
        for (s1, s2) in [(2.75, 0.75), (1.5, 0.1), (0.3, 4.0)] {
            let p = params(s1, s2);
            let k0 = build_kernel(0.0, &p).unwrap();
            let k90 = build_kernel(FRAC_PI_2, &p).unwrap();
            assert_eq!(k90, k0.transpose());
        }
    }

    #[test]
    fn radius_follows_window() {
        let k = build_kernel(
            0.3,
            &TsvParams {
                window: 20,
                ..TsvParams::default()
            },
        )
        .unwrap();
        assert_eq!(k.radius(), 10);
        assert_eq!(k.weights().len(), 21 * 21);
        let k = build_kernel(
            0.3,
            &TsvParams {
                window: 3,
                ..TsvParams::default()
            },
        )
        .unwrap();
        assert_eq!(k.extent(), 3);
    }

    #[test]
    fn constant_image_has_zero_tsv() {
        let f = ScalarField::filled(16, 16, 0.42).unwrap();
        let t = compute_tsv(&f, &TsvParams::default()).unwrap();
        assert!(t.as_slice().iter().all(|&x| x == 0.0));
        let eta = build_eta(&f, &TsvParams::default()).unwrap();
        assert!(eta.eta().as_slice().iter().all(|&x| x == 0.1));
    }

    #[test]
    fn weight_floor_enforced() {
        let f = seeded(12, 12, 9);
        let w = build_eta(&f, &TsvParams::default()).unwrap();
        assert!(w.eta().min() >= w.kappa());
        let bad = ScalarField::filled(4, 4, 0.05).unwrap();
        assert!(WeightField::new(bad, 0.1).is_err());
        assert!(WeightField::constant(4, 4, 0.0).is_err());
    }

    #[test]
    fn integer_apex_tent_does_not_cancel() {
        // With forward differences the kink at an integer column leaves one
        // unmatched -1 under the kernel centre: the response is -sum_k w(k, 0).
        let p = TsvParams::default();
        let j0 = 32;
        let f = ScalarField::from_fn(64, 64, |_, j| -((j as f64) - j0 as f64).abs()).unwrap();
        let k = build_kernel(FRAC_PI_2, &p).unwrap();
        let resp = directional_response(&f, Axis::Cols, &k);
        let r = p.radius() as isize;
        let expected: f64 = -(-r..=r).map(|kk| k.at(kk, 0)).sum::<f64>();
        assert!((resp[(20, j0)] - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kernels_are_normalized_and_point_symmetric(
            theta in 0.0f64..std::f64::consts::PI,
            s1 in 0.05f64..6.0,
            s2 in 0.05f64..6.0,
            window in 3usize..24,
        ) {
            let k = build_kernel(theta, &TsvParams { sigma1: s1, sigma2: s2, window, kappa: 0.1 }).unwrap();
            let sum: f64 = k.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
            let r = k.radius() as isize;
            for a in -r..=r {
                for b in -r..=r {
                    prop_assert_eq!(k.at(a, b), k.at(-a, -b));
                }
            }
        }

        #[test]
        fn tsv_invariances(seed in any::<u64>(), c0 in -5.0f64..5.0, s in 0.0f64..4.0, di in -8isize..8, dj in -8isize..8) {
            let p = TsvParams { window: 8, ..TsvParams::default() };
            let f = seeded(12, 10, seed);
            let base = compute_tsv(&f, &p).unwrap();
            let scale = base.max_abs().max(1e-300);

            let shifted_level = compute_tsv(&f.map(|x| x + c0), &p).unwrap();
            prop_assert!((&shifted_level - &base).max_abs() <= 1e-12 * scale.max(c0.abs()));

            let scaled = compute_tsv(&f.scale(s), &p).unwrap();
            prop_assert!((&scaled - &base.scale(s)).max_abs() <= 1e-12 * scale * s.max(1.0));

            let moved = compute_tsv(&f.shifted(di, dj), &p).unwrap();
            prop_assert!((&moved - &base.shifted(di, dj)).max_abs() <= 1e-12 * scale);
        }
    }
}
