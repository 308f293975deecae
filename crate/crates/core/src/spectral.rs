//! Fourier-domain solvers for the two constant-coefficient linear systems of
//! the splitting iteration.
//!
//! On a periodic grid every difference operator is diagonalized by the 2D DFT.
//! With `w1 = 2 pi k1 / M` the forward difference along axis 1 has symbol
//! `s1 = exp(i w1) - 1` and the backward difference `1 - exp(-i w1)`, which is
//! `-conj(s1)`. The Laplacian `d1- d1+ + d2- d2+` has the real, non-positive
//! symbol `-(|s1|^2 + |s2|^2)`.
//!
//! Spectra are kept in transposed layout: the coefficient of frequency
//! `(k1, k2)` lives at `k2 * M + k1`. That saves one transpose per transform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{divergence_map, ScalarField, VectorField2};

/// Planned forward/inverse 2D DFT with reusable workspaces.
///
/// Not shareable across threads while transforming; keep one per worker.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish_non_exhaustive()
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(cols);
        let row_inv = planner.plan_fft_inverse(cols);
        let col_fwd = planner.plan_fft_forward(rows);
        let col_inv = planner.plan_fft_inverse(rows);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            rows,
            cols,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            work: vec![Complex64::default(); rows * cols],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Unnormalized forward DFT of a real field into `spectrum` (transposed
    /// layout, length `rows * cols`).
    pub fn forward(&mut self, field: &ScalarField, spectrum: &mut [Complex64]) {
        assert_eq!(field.dims(), (self.rows, self.cols));
        for (w, &x) in self.work.iter_mut().zip(field.as_slice()) {
            *w = Complex64::new(x, 0.0);
        }
        self.forward_work(spectrum);
    }

    /// Forward DFT of the complex field `a + i b`. Two real transforms for the
    /// price of one; see [`split_pair`] to separate the spectra.
    pub fn forward_pair(&mut self, a: &ScalarField, b: &ScalarField, spectrum: &mut [Complex64]) {
        assert_eq!(a.dims(), (self.rows, self.cols));
        assert_eq!(b.dims(), (self.rows, self.cols));
        for ((w, &x), &y) in self.work.iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
            *w = Complex64::new(x, y);
        }
        self.forward_work(spectrum);
    }

    fn forward_work(&mut self, spectrum: &mut [Complex64]) {
        self.forward_rows(spectrum);
        self.col_fwd.process_with_scratch(spectrum, &mut self.scratch);
    }

    /// First half of the forward transform: row DFTs, then the transpose into
    /// `spectrum`. Each transposed row still needs [`Self::column_forward`].
    fn forward_rows(&mut self, spectrum: &mut [Complex64]) {
        assert_eq!(spectrum.len(), self.rows * self.cols);
        self.row_fwd.process_with_scratch(&mut self.work, &mut self.scratch);
        transpose::transpose(&self.work, spectrum, self.cols, self.rows);
    }

    /// Column DFT of one transposed row (length `rows`).
    fn column_forward(&mut self, line: &mut [Complex64]) {
        self.col_fwd.process_with_scratch(line, &mut self.scratch);
    }

    fn column_inverse(&mut self, line: &mut [Complex64]) {
        self.col_inv.process_with_scratch(line, &mut self.scratch);
    }

    /// Second half of the inverse transform, after every transposed row went
    /// through [`Self::column_inverse`]. Leaves the result in `work`.
    fn inverse_rows(&mut self, spectrum: &[Complex64]) {
        assert_eq!(spectrum.len(), self.rows * self.cols);
        transpose::transpose(spectrum, &mut self.work, self.rows, self.cols);
        self.row_inv.process_with_scratch(&mut self.work, &mut self.scratch);
    }

    fn unpack_pair(&self) -> (ScalarField, ScalarField) {
        let scale = 1.0 / (self.rows * self.cols) as f64;
        let re = self.work.iter().map(|z| z.re * scale).collect();
        let im = self.work.iter().map(|z| z.im * scale).collect();
        (
            ScalarField::from_raw(self.rows, self.cols, re),
            ScalarField::from_raw(self.rows, self.cols, im),
        )
    }

    fn unpack_real(&self) -> (ScalarField, f64) {
        let scale = 1.0 / (self.rows * self.cols) as f64;
        let mut max_imag: f64 = 0.0;
        let data = self
            .work
            .iter()
            .map(|z| {
                max_imag = max_imag.max(z.im.abs());
                z.re * scale
            })
            .collect();
        (ScalarField::from_raw(self.rows, self.cols, data), max_imag * scale)
    }

    /// Inverse DFT (normalized by `1 / (rows * cols)`). Consumes `spectrum` as
    /// workspace. Returns the real part and the largest discarded imaginary
    /// magnitude.
    pub fn inverse(&mut self, spectrum: &mut [Complex64]) -> (ScalarField, f64) {
        self.inverse_work(spectrum);
        self.unpack_real()
    }

    /// Inverse DFT returning the real and imaginary parts as two fields.
    pub fn inverse_pair(&mut self, spectrum: &mut [Complex64]) -> (ScalarField, ScalarField) {
        self.inverse_work(spectrum);
        self.unpack_pair()
    }

    fn inverse_work(&mut self, spectrum: &mut [Complex64]) {
        assert_eq!(spectrum.len(), self.rows * self.cols);
        self.col_inv.process_with_scratch(spectrum, &mut self.scratch);
        self.inverse_rows(spectrum);
    }
}

/// Separates the spectrum `z` of `a + i b` (real `a`, `b`) at one frequency:
/// `a^ = (z(k) + conj(z(-k))) / 2`, `b^ = (z(k) - conj(z(-k))) / 2i`.
pub fn split_pair(z: Complex64, z_neg: Complex64) -> (Complex64, Complex64) {
    let zc = z_neg.conj();
    let a = (z + zc) * 0.5;
    let d = (z - zc) * 0.5;
    (a, Complex64::new(d.im, -d.re))
}

/// Per-frequency symbols of the periodic difference operators.
#[derive(Debug, Clone)]
pub struct SpectralSymbols {
    rows: usize,
    cols: usize,
    forward1: Vec<Complex64>,
    forward2: Vec<Complex64>,
    /// `-(|s1|^2 + |s2|^2)`, transposed layout.
    laplacian: Vec<f64>,
}

impl SpectralSymbols {
    pub fn new(rows: usize, cols: usize) -> Self {
        let unit = |k: usize, n: usize| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64) - 1.0;
        let forward1: Vec<_> = (0..rows).map(|k| unit(k, rows)).collect();
        let forward2: Vec<_> = (0..cols).map(|k| unit(k, cols)).collect();
        let mut laplacian = Vec::with_capacity(rows * cols);
        for s2 in &forward2 {
            for s1 in &forward1 {
                laplacian.push(-(s1.norm_sqr() + s2.norm_sqr()));
            }
        }
        Self {
            rows,
            cols,
            forward1,
            forward2,
            laplacian,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Symbol of the forward difference along axis 1 at row frequency `k1`.
    pub fn forward1(&self, k1: usize) -> Complex64 {
        self.forward1[k1]
    }

    pub fn forward2(&self, k2: usize) -> Complex64 {
        self.forward2[k2]
    }

    pub fn backward1(&self, k1: usize) -> Complex64 {
        -self.forward1[k1].conj()
    }

    pub fn backward2(&self, k2: usize) -> Complex64 {
        -self.forward2[k2].conj()
    }

    pub fn laplacian(&self, k1: usize, k2: usize) -> f64 {
        self.laplacian[k2 * self.rows + k1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GKey {
    dt: f64,
    alpha2: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct UvKey {
    dt: f64,
    theta: f64,
}

/// Spectral solver for the `g`-system `(I - c grad div + 2 dt alpha2) g = r`
/// and the `(u, v)` optimality system. Owns its transform workspaces; the
/// per-frequency coefficient tables are cached for the last parameter set.
#[derive(Debug)]
pub struct SpectralSolver {
    fft: Fft2,
    symbols: SpectralSymbols,
    spec_a: Vec<Complex64>,
    spec_b: Vec<Complex64>,
    g_table: Option<(GKey, Vec<f64>)>,
    uv_table: Option<(UvKey, Vec<f64>)>,
    max_imag: f64,
}

impl SpectralSolver {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            fft: Fft2::new(rows, cols),
            symbols: SpectralSymbols::new(rows, cols),
            spec_a: vec![Complex64::default(); rows * cols],
            spec_b: vec![Complex64::default(); rows * cols],
            g_table: None,
            uv_table: None,
            max_imag: 0.0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.fft.dims()
    }

    pub fn symbols(&self) -> &SpectralSymbols {
        &self.symbols
    }

    /// Largest imaginary part discarded by the most recent `(u, v)` solve, in
    /// absolute units.
    pub fn last_imaginary_residue(&self) -> f64 {
        self.max_imag
    }

    /// Solves `g - c grad(div g) + 2 dt alpha2 g = rhs`.
    ///
    /// Per frequency the system matrix is `beta I + c s s^H` with
    /// `beta = 1 + 2 dt alpha2` and `s = (s1, s2)`, which Sherman-Morrison
    /// inverts in closed form.
    pub fn solve_g_constant_part(&mut self, rhs: &VectorField2, dt: f64, alpha2: f64, c: f64) -> VectorField2 {
        assert_eq!(rhs.dims(), self.dims());
        let key = GKey { dt, alpha2, c };
        let beta = 1.0 + 2.0 * dt * alpha2;
        if self.g_table.as_ref().map(|(k, _)| *k) != Some(key) {
            // gamma = c / (beta + c |s|^2)
            let table = self.symbols.laplacian.iter().map(|&lap| c / (beta - c * lap)).collect();
            self.g_table = Some((key, table));
        }
        let gamma = &self.g_table.as_ref().expect("table just built").1;

        // Both components share one complex transform; the solution is real,
        // so its two spectra are packed back as g1^ + i g2^. Column transforms,
        // the solve and the inverse column transforms run per pair of
        // transposed rows (k2, -k2) so each pair stays in cache.
        let (m, n) = (self.symbols.rows, self.symbols.cols);
        let inv_beta = 1.0 / beta;
        let packed = rhs.comp1.as_slice().iter().zip(rhs.comp2.as_slice());
        for (w, (&a, &b)) in self.fft.work.iter_mut().zip(packed) {
            *w = Complex64::new(a, b);
        }
        self.fft.forward_rows(&mut self.spec_b);

        let spectrum = &mut self.spec_b;
        let (s1, s2) = (&self.symbols.forward1, &self.symbols.forward2);
        let mut out = vec![Complex64::default(); 2 * m];
        for k2 in 0..=n / 2 {
            let kn = (n - k2) % n;
            let (line, line_neg) = if kn == k2 {
                let line = &mut spectrum[k2 * m..(k2 + 1) * m];
                self.fft.column_forward(line);
                (line, None)
            } else {
                let (head, tail) = spectrum.split_at_mut(kn * m);
                let line = &mut head[k2 * m..(k2 + 1) * m];
                let line_neg = &mut tail[..m];
                self.fft.column_forward(line);
                self.fft.column_forward(line_neg);
                (line, Some(line_neg))
            };
            let (out_pos, out_neg) = out.split_at_mut(m);
            {
                let neg: &[Complex64] = line_neg.as_deref().unwrap_or(line);
                let solve = |row: usize, z: &[Complex64], zn: &[Complex64], dst: &mut [Complex64]| {
                    let sym2 = s2[row];
                    let gam = &gamma[row * m..(row + 1) * m];
                    for k1 in 0..m {
                        let (r1, r2) = split_pair(z[k1], zn[(m - k1) % m]);
                        let proj = (s1[k1].conj() * r1 + sym2.conj() * r2) * gam[k1];
                        let g1 = (r1 - s1[k1] * proj) * inv_beta;
                        let g2 = (r2 - sym2 * proj) * inv_beta;
                        dst[k1] = Complex64::new(g1.re - g2.im, g1.im + g2.re);
                    }
                };
                solve(k2, line, neg, out_pos);
                if kn != k2 {
                    solve(kn, neg, line, out_neg);
                }
            }
            line.copy_from_slice(out_pos);
            self.fft.column_inverse(line);
            if let Some(line_neg) = line_neg {
                line_neg.copy_from_slice(out_neg);
                self.fft.column_inverse(line_neg);
            }
        }
        self.fft.inverse_rows(&self.spec_b);
        let (g1, g2) = self.fft.unpack_pair();
        VectorField2 { comp1: g1, comp2: g2 }
    }

    /// Solves
    ///
    /// ```text
    /// (tau - Lap) u + tau v       = -div(p_half) + tau f
    ///  tau u        + (1 + tau) v = v_half       + tau f
    /// ```
    ///
    /// with `tau = dt / theta`. The second row has no spatial operator, so
    /// `v` is eliminated pointwise and `u` solves a scalar system with symbol
    /// `tau + (1 + tau)(|s1|^2 + |s2|^2)`, strictly positive everywhere.
    pub fn solve_uv_system(
        &mut self,
        p_half: &VectorField2,
        v_half: &ScalarField,
        f: &ScalarField,
        dt: f64,
        theta: f64,
    ) -> (ScalarField, ScalarField) {
        assert_eq!(p_half.dims(), self.dims());
        assert_eq!(v_half.dims(), self.dims());
        assert_eq!(f.dims(), self.dims());
        let tau = dt / theta;
        let key = UvKey { dt, theta };
        if self.uv_table.as_ref().map(|(k, _)| *k) != Some(key) {
            let table = self
                .symbols
                .laplacian
                .iter()
                .map(|&lap| 1.0 / (tau - (1.0 + tau) * lap))
                .collect();
            self.uv_table = Some((key, table));
        }
        let inv_det = &self.uv_table.as_ref().expect("table just built").1;

        // (1 + tau) * row1 - tau * row2, simplified so the tau^2 f terms cancel
        // analytically rather than in floating point.
        let (fs, vs) = (f.as_slice(), v_half.as_slice());
        let elim = divergence_map(p_half, |k, d| -(1.0 + tau) * d + tau * (fs[k] - vs[k]));
        for (w, &x) in self.fft.work.iter_mut().zip(elim.as_slice()) {
            *w = Complex64::new(x, 0.0);
        }
        self.fft.forward_rows(&mut self.spec_a);
        let m = self.symbols.rows;
        for (line, weights) in self.spec_a.chunks_exact_mut(m).zip(inv_det.chunks_exact(m)) {
            self.fft.column_forward(line);
            line.iter_mut().zip(weights).for_each(|(z, &w)| *z *= w);
            self.fft.column_inverse(line);
        }
        self.fft.inverse_rows(&self.spec_a);
        let (u, im) = self.fft.unpack_real();
        self.max_imag = im;

        let v = ScalarField::from_raw(
            f.rows(),
            f.cols(),
            u.as_slice()
                .iter()
                .zip(f.as_slice())
                .zip(v_half.as_slice())
                .map(|((&uu, &fv), &vh)| (vh + tau * (fv - uu)) / (1.0 + tau))
                .collect(),
        );
        (u, v)
    }
}
