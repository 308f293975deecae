//! Scalar and vector fields on a periodic rectangular grid, plus the
//! finite-difference operators shared by every other module.
//!
//! Axis 1 is the first (row) index `i`, axis 2 the second (column) index `j`.
//! Axes 3 and 4 are the diagonals `(+1, +1)` and `(+1, -1)`. All differences
//! wrap around periodically.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

/// Smallest admissible extent along either axis.
pub const MIN_EXTENT: usize = 4;

/// Real-valued samples on an `rows x cols` periodic grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        check_dims(rows, cols)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        })
    }

    /// Wraps a row-major sample buffer. Rejects short grids, length mismatches
    /// and non-finite samples.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    /// Builds a field without validating samples. Callers guarantee
    /// `data.len() == rows * cols` on already-validated dimensions.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sample at `(i, j)` with both indices taken modulo the grid extents.
    #[inline]
    pub fn wrapped(&self, i: isize, j: isize) -> f64 {
        let r = i.rem_euclid(self.rows as isize) as usize;
        let c = j.rem_euclid(self.cols as isize) as usize;
        self.data[r * self.cols + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "field dimensions differ");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::from_raw(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| s * x)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "field dimensions differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Cyclic shift: the output at `(i, j)` is the input at `(i - di, j - dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let (m, n) = (self.rows as isize, self.cols as isize);
        let mut out = vec![0.0; self.data.len()];
        for i in 0..m {
            for j in 0..n {
                out[(i * n + j) as usize] = self.wrapped(i - di, j - dj);
            }
        }
        Self::from_raw(self.rows, self.cols, out)
    }
}

impl Index<(usize, usize)> for ScalarField {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ScalarField {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;

    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;

    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;

    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

/// A pair of equally sized scalar fields, e.g. a discrete gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub comp1: ScalarField,
    pub comp2: ScalarField,
}

impl VectorField2 {
    pub fn new(comp1: ScalarField, comp2: ScalarField) -> Result<Self> {
        if comp1.dims() != comp2.dims() {
            return Err(Error::DimensionMismatch {
                left: comp1.dims(),
                right: comp2.dims(),
            });
        }
        Ok(Self { comp1, comp2 })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            comp1: ScalarField::zeros(rows, cols)?,
            comp2: ScalarField::zeros(rows, cols)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.comp1.dims()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.comp1.dot(&other.comp1) + self.comp2.dot(&other.comp2)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comp1.max_abs().max(self.comp2.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.comp1.is_finite() && self.comp2.is_finite()
    }

    /// Pixelwise Euclidean norm `sqrt(comp1^2 + comp2^2)`.
    pub fn magnitude(&self) -> ScalarField {
        self.comp1.zip_map(&self.comp2, f64::hypot)
    }
}

/// One of the four periodic difference directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// First index, offset `(1, 0)`.
    Rows,
    /// Second index, offset `(0, 1)`.
    Cols,
    /// Main diagonal, offset `(1, 1)`.
    Diagonal,
    /// Anti-diagonal, offset `(1, -1)`.
    AntiDiagonal,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Rows, Axis::Cols, Axis::Diagonal, Axis::AntiDiagonal];

    /// Unit step `(di, dj)` of the forward difference.
    pub fn step(self) -> (isize, isize) {
        match self {
            Axis::Rows => (1, 0),
            Axis::Cols => (0, 1),
            Axis::Diagonal => (1, 1),
            Axis::AntiDiagonal => (1, -1),
        }
    }

    /// Maps the 1-based axis labels `1..=4` onto directions.
    pub fn from_index(k: usize) -> Option<Axis> {
        match k {
            1 => Some(Axis::Rows),
            2 => Some(Axis::Cols),
            3 => Some(Axis::Diagonal),
            4 => Some(Axis::AntiDiagonal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Periodic one-sided difference.
///
/// Forward: `u(x + s) - u(x)`; backward: `u(x) - u(x - s)`, where `s` is the
/// unit step of `axis`.
pub fn diff(field: &ScalarField, axis: Axis, direction: Direction) -> ScalarField {
    let (m, n) = field.dims();
    let (di, dj) = axis.step();
    let src = field.as_slice();
    let mut out = vec![0.0; m * n];
    for (i, dst) in out.chunks_exact_mut(n).enumerate() {
        let row = &src[i * n..(i + 1) * n];
        match direction {
            Direction::Forward => {
                let ip = wrap(i, di, m);
                shifted_sub(dst, &src[ip * n..(ip + 1) * n], row, dj);
            }
            Direction::Backward => {
                let ip = wrap(i, -di, m);
                // row[j] - other[j - dj] = -(other[j - dj] - row[j])
                shifted_sub(dst, &src[ip * n..(ip + 1) * n], row, -dj);
                dst.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    ScalarField::from_raw(m, n, out)
}

/// `dst[j] = other[(j + shift) mod n] - row[j]` for `shift` in `-1..=1`.
#[inline]
fn shifted_sub(dst: &mut [f64], other: &[f64], row: &[f64], shift: isize) {
    let n = dst.len();
    match shift {
        0 => {
            for ((d, &o), &r) in dst.iter_mut().zip(other).zip(row) {
                *d = o - r;
            }
        }
        1 => {
            for ((d, &o), &r) in dst[..n - 1].iter_mut().zip(&other[1..]).zip(row) {
                *d = o - r;
            }
            dst[n - 1] = other[0] - row[n - 1];
        }
        -1 => {
            dst[0] = other[n - 1] - row[0];
            for ((d, &o), &r) in dst[1..].iter_mut().zip(other).zip(&row[1..]) {
                *d = o - r;
            }
        }
        _ => unreachable!("unit steps only"),
    }
}

#[inline]
fn wrap(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).rem_euclid(n as isize) as usize
}

/// Forward-difference gradient `(d1+ u, d2+ u)`.
pub fn gradient(field: &ScalarField) -> VectorField2 {
    VectorField2 {
        comp1: diff(field, Axis::Rows, Direction::Forward),
        comp2: diff(field, Axis::Cols, Direction::Forward),
    }
}

/// Backward-difference divergence `d1- g1 + d2- g2`, the negative adjoint of
/// [`gradient`].
pub fn divergence(vf: &VectorField2) -> ScalarField {
    let d1 = diff(&vf.comp1, Axis::Rows, Direction::Backward);
    let d2 = diff(&vf.comp2, Axis::Cols, Direction::Backward);
    &d1 + &d2
}

/// `out[k] = map(k, div(vf)[k])` in a single pass over the grid.
pub(crate) fn divergence_map(vf: &VectorField2, map: impl Fn(usize, f64) -> f64) -> ScalarField {
    let (m, n) = vf.dims();
    let (g1, g2) = (vf.comp1.as_slice(), vf.comp2.as_slice());
    let mut out = vec![0.0; m * n];
    for (i, dst) in out.chunks_exact_mut(n).enumerate() {
        let base = i * n;
        let up = ((i + m - 1) % m) * n;
        let (a, a_up, b) = (&g1[base..base + n], &g1[up..up + n], &g2[base..base + n]);
        // j = 0 wraps to the last column
        let d = (a[0] - a_up[0]) + (b[0] - b[n - 1]);
        dst[0] = map(base, d);
        for j in 1..n {
            let d = (a[j] - a_up[j]) + (b[j] - b[j - 1]);
            dst[j] = map(base + j, d);
        }
    }
    ScalarField::from_raw(m, n, out)
}

/// `vf - gradient(q)` in a single pass.
pub(crate) fn sub_gradient(vf: &VectorField2, q: &ScalarField) -> VectorField2 {
    let (m, n) = q.dims();
    let src = q.as_slice();
    let mut c1 = vec![0.0; m * n];
    let mut c2 = vec![0.0; m * n];
    for i in 0..m {
        let base = i * n;
        let down = ((i + 1) % m) * n;
        let (row, below) = (&src[base..base + n], &src[down..down + n]);
        let (a, b) = (
            &vf.comp1.as_slice()[base..base + n],
            &vf.comp2.as_slice()[base..base + n],
        );
        let (o1, o2) = (&mut c1[base..base + n], &mut c2[base..base + n]);
        for j in 0..n {
            o1[j] = a[j] - (below[j] - row[j]);
        }
        for j in 0..n - 1 {
            o2[j] = b[j] - (row[j + 1] - row[j]);
        }
        o2[n - 1] = b[n - 1] - (row[0] - row[n - 1]);
    }
    VectorField2 {
        comp1: ScalarField::from_raw(m, n, c1),
        comp2: ScalarField::from_raw(m, n, c2),
    }
}

/// Periodic five-point Laplacian.
pub fn laplacian(field: &ScalarField) -> ScalarField {
    let (m, n) = field.dims();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let up = (i + m - 1) % m;
        let down = (i + 1) % m;
        for j in 0..n {
            let left = (j + n - 1) % n;
            let right = (j + 1) % n;
            let c = field[(i, j)];
            // Grouped as the sum of the two axis second differences so the
            // result matches divergence(gradient(u)) sample for sample.
            let d1 = (field[(down, j)] - c) - (c - field[(up, j)]);
            let d2 = (field[(i, right)] - c) - (c - field[(i, left)]);
            out[i * n + j] = d1 + d2;
        }
    }
    ScalarField::from_raw(m, n, out)
}

/// Sum over pixels of the Euclidean norm of the forward gradient.
pub fn total_variation(field: &ScalarField) -> f64 {
    gradient(field).magnitude().sum()
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows < MIN_EXTENT || cols < MIN_EXTENT {
        return Err(Error::GridTooSmall { rows, cols });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seeded(rows: usize, cols: usize, seed: u64) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn rejects_small_and_nonfinite() {
        assert!(matches!(ScalarField::zeros(3, 8), Err(Error::GridTooSmall { .. })));
        let mut v = vec![0.0; 16];
        v[5] = f64::NAN;
        assert!(matches!(
            ScalarField::from_vec(4, 4, v),
            Err(Error::NonFinite { index: 5 })
        ));
        assert!(ScalarField::from_vec(4, 4, vec![0.0; 15]).is_err());
    }

    #[test]
    fn constant_field_has_zero_differences() {
        let f = ScalarField::filled(5, 7, 3.25).unwrap();
        for axis in Axis::ALL {
            for dir in [Direction::Forward, Direction::Backward] {
                assert!(diff(&f, axis, dir).as_slice().iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn forward_difference_wraps() {
        let mut f = ScalarField::zeros(4, 4).unwrap();
        f[(0, 0)] = 1.0;
        let d = diff(&f, Axis::Rows, Direction::Forward);
        for i in 0..4 {
            for j in 0..4 {
                let expected = match (i, j) {
                    (0, 0) => -1.0,
                    (3, 0) => 1.0,
                    _ => 0.0,
                };
                assert_eq!(d[(i, j)], expected, "at ({i},{j})");
            }
        }
    }

    #[test]
    fn diagonal_differences_use_unit_diagonal_steps() {
        let f = seeded(6, 5, 1);
        let d3 = diff(&f, Axis::Diagonal, Direction::Forward);
        let d4 = diff(&f, Axis::AntiDiagonal, Direction::Forward);
        let b3 = diff(&f, Axis::Diagonal, Direction::Backward);
        let b4 = diff(&f, Axis::AntiDiagonal, Direction::Backward);
        for i in 0..6isize {
            for j in 0..5isize {
                let (iu, ju) = (i as usize, j as usize);
                assert_eq!(d3[(iu, ju)], f.wrapped(i + 1, j + 1) - f.wrapped(i, j));
                assert_eq!(d4[(iu, ju)], f.wrapped(i + 1, j - 1) - f.wrapped(i, j));
                assert_eq!(b3[(iu, ju)], f.wrapped(i, j) - f.wrapped(i - 1, j - 1));
                assert_eq!(b4[(iu, ju)], f.wrapped(i, j) - f.wrapped(i - 1, j + 1));
            }
        }
    }

    #[test]
    fn forward_then_backward_is_second_difference() {
        let f = seeded(7, 6, 2);
        let dd = diff(
            &diff(&f, Axis::Rows, Direction::Forward),
            Axis::Rows,
            Direction::Backward,
        );
        for i in 0..7isize {
            for j in 0..6isize {
                let expected = f.wrapped(i + 1, j) - 2.0 * f.wrapped(i, j) + f.wrapped(i - 1, j);
                assert!((dd[(i as usize, j as usize)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_of_column_ramp() {
        let n = 6;
        let f = ScalarField::from_fn(5, n, |_, j| j as f64).unwrap();
        let g = gradient(&f);
        assert!(g.comp1.as_slice().iter().all(|&x| x == 0.0));
        for i in 0..5 {
            for j in 0..n {
                let expected = if j == n - 1 { 1.0 - n as f64 } else { 1.0 };
                assert_eq!(g.comp2[(i, j)], expected);
            }
        }
    }

    #[test]
    fn constant_vector_field_has_zero_divergence() {
        let vf = VectorField2::new(
            ScalarField::filled(6, 6, 0.7).unwrap(),
            ScalarField::filled(6, 6, -2.0).unwrap(),
        )
        .unwrap();
        assert!(divergence(&vf).as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn divergence_has_zero_mean() {
        let vf = VectorField2::new(seeded(8, 8, 3), seeded(8, 8, 4)).unwrap();
        assert!(divergence(&vf).mean().abs() < 1e-13);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian_exactly() {
        let f = seeded(9, 7, 5);
        assert_eq!(divergence(&gradient(&f)), laplacian(&f));
    }

    #[test]
    fn mismatched_components_rejected() {
        let r = VectorField2::new(ScalarField::zeros(4, 4).unwrap(), ScalarField::zeros(4, 5).unwrap());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn adjoint_identity(seed in any::<u64>(), m in 4usize..12, n in 4usize..12) {
            let u = seeded(m, n, seed);
            let vf = VectorField2::new(seeded(m, n, seed ^ 1), seeded(m, n, seed ^ 2)).unwrap();
            let lhs = gradient(&u).dot(&vf);
            let rhs = -u.dot(&divergence(&vf));
            let scale = u.norm() * vf.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn shift_equivariance(seed in any::<u64>(), di in -6isize..6, dj in -6isize..6, k in 1usize..=4) {
            let f = seeded(8, 6, seed);
            let axis = Axis::from_index(k).unwrap();
            for dir in [Direction::Forward, Direction::Backward] {
                let a = diff(&f.shifted(di, dj), axis, dir);
                let b = diff(&f, axis, dir).shifted(di, dj);
                prop_assert_eq!(a, b);
            }
        }
    }
}
