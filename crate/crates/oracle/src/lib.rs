//! Brute-force reference implementations for cross-checking `tsvdecomp`.
//!
//! Everything here is deliberately naive: dense matrices assembled stencil by
//! stencil, a literal nested-loop TSV with its own kernel evaluation, and a
//! derivative-free search for the shrinkage proximal map. None of it shares
//! code paths with the library beyond the field container.

use nalgebra::{DMatrix, DVector};
use tsvdecomp::{ScalarField, TsvParams, VectorField2};

/// Largest grid (in pixels) the dense assemblers accept.
pub const MAX_DENSE_PIXELS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    TooLarge { rows: usize, cols: usize },
    Singular,
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::TooLarge { rows, cols } => {
                write!(
                    f,
                    "{rows}x{cols} grid exceeds the dense limit of {MAX_DENSE_PIXELS} pixels"
                )
            }
            OracleError::Singular => f.write_str("dense system is singular"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Dense operator on two stacked fields. Unknown `(field, i, j)` sits at
/// `field * rows * cols + i * cols + j`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub rows: usize,
    pub cols: usize,
    pub matrix: DMatrix<f64>,
}

impl DenseSystem {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn index(&self, field: usize, i: usize, j: usize) -> usize {
        field * self.rows * self.cols + i * self.cols + j
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// LU with partial pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, OracleError> {
        let lu = self.matrix.clone().lu();
        lu.solve(&DVector::from_column_slice(rhs))
            .map(|x| x.as_slice().to_vec())
            .ok_or(OracleError::Singular)
    }
}

fn guard(rows: usize, cols: usize) -> Result<(), OracleError> {
    if rows * cols > MAX_DENSE_PIXELS || rows == 0 || cols == 0 {
        Err(OracleError::TooLarge { rows, cols })
    } else {
        Ok(())
    }
}

fn wrap(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).rem_euclid(n as isize) as usize
}

/// `g - c grad(div g) + 2 dt alpha2 g` with forward-difference gradient and
/// backward-difference divergence.
pub fn assemble_g_dense(rows: usize, cols: usize, dt: f64, alpha2: f64, c: f64) -> Result<DenseSystem, OracleError> {
    guard(rows, cols)?;
    let np = rows * cols;
    let mut sys = DenseSystem {
        rows,
        cols,
        matrix: DMatrix::zeros(2 * np, 2 * np),
    };
    let beta = 1.0 + 2.0 * dt * alpha2;
    // div g at pixel (i, j) as a list of (column, coefficient)
    let div_row = |i: usize, j: usize| -> [(usize, f64); 4] {
        [
            (i * cols + j, 1.0),
            (wrap(i, -1, rows) * cols + j, -1.0),
            (np + i * cols + j, 1.0),
            (np + i * cols + wrap(j, -1, cols), -1.0),
        ]
    };
    for k in 0..2 {
        for i in 0..rows {
            for j in 0..cols {
                let row = sys.index(k, i, j);
                sys.matrix[(row, row)] += beta;
                let (ni, nj) = if k == 0 {
                    (wrap(i, 1, rows), j)
                } else {
                    (i, wrap(j, 1, cols))
                };
                // -c * (div(next) - div(here))
                for (col, w) in div_row(ni, nj) {
                    sys.matrix[(row, col)] -= c * w;
                }
                for (col, w) in div_row(i, j) {
                    sys.matrix[(row, col)] += c * w;
                }
            }
        }
    }
    Ok(sys)
}

/// The `(u, v)` optimality system
/// `[tau - Lap, tau; tau, 1 + tau]` with `tau = dt / theta`.
pub fn assemble_uv_dense(rows: usize, cols: usize, dt: f64, theta: f64) -> Result<DenseSystem, OracleError> {
    guard(rows, cols)?;
    let np = rows * cols;
    let tau = dt / theta;
    let mut sys = DenseSystem {
        rows,
        cols,
        matrix: DMatrix::zeros(2 * np, 2 * np),
    };
    for i in 0..rows {
        for j in 0..cols {
            let ru = sys.index(0, i, j);
            let rv = sys.index(1, i, j);
            sys.matrix[(ru, ru)] += tau + 4.0;
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let col = wrap(i, di, rows) * cols + wrap(j, dj, cols);
                sys.matrix[(ru, col)] -= 1.0;
            }
            sys.matrix[(ru, rv)] += tau;
            sys.matrix[(rv, ru)] += tau;
            sys.matrix[(rv, rv)] += 1.0 + tau;
        }
    }
    Ok(sys)
}

/// Flattens a vector field in [`DenseSystem`] ordering.
pub fn flatten_vector(vf: &VectorField2) -> Vec<f64> {
    vf.comp1.as_slice().iter().chain(vf.comp2.as_slice()).copied().collect()
}

pub fn flatten_pair(a: &ScalarField, b: &ScalarField) -> Vec<f64> {
    a.as_slice().iter().chain(b.as_slice()).copied().collect()
}

/// Dense solve of the g-system for a given right-hand side.
pub fn solve_g_dense(rhs: &VectorField2, dt: f64, alpha2: f64, c: f64) -> Result<Vec<f64>, OracleError> {
    let (m, n) = rhs.dims();
    assemble_g_dense(m, n, dt, alpha2, c)?.solve(&flatten_vector(rhs))
}

/// Dense solve of the `(u, v)` system with the right-hand side assembled
/// from its definition, `[-div p + tau f; v_half + tau f]`.
pub fn solve_uv_dense(
    p_half: &VectorField2,
    v_half: &ScalarField,
    f: &ScalarField,
    dt: f64,
    theta: f64,
) -> Result<Vec<f64>, OracleError> {
    let (m, n) = f.dims();
    let tau = dt / theta;
    let mut rhs = vec![0.0; 2 * m * n];
    for i in 0..m {
        for j in 0..n {
            let div = p_half.comp1[(i, j)] - p_half.comp1[(wrap(i, -1, m), j)] + p_half.comp2[(i, j)]
                - p_half.comp2[(i, wrap(j, -1, n))];
            rhs[i * n + j] = -div + tau * f[(i, j)];
            rhs[m * n + i * n + j] = v_half[(i, j)] + tau * f[(i, j)];
        }
    }
    assemble_uv_dense(m, n, dt, theta)?.solve(&rhs)
}

/// Kernel weight table for orientation `theta`, evaluated from scratch.
/// Indexed `[k + r][l + r]`.
pub fn kernel_weights(theta: f64, params: &TsvParams) -> Vec<Vec<f64>> {
    let r = (params.window / 2) as isize;
    let (s1, s2) = (params.sigma1, params.sigma2);
    let cos2 = theta.cos().powi(2);
    let sin2 = theta.sin().powi(2);
    let sin2t = (2.0 * theta).sin();
    let a = cos2 / (2.0 * s1) + sin2 / (2.0 * s2);
    let b = sin2t / (4.0 * s1) - sin2t / (4.0 * s2);
    let c = sin2 / (2.0 * s1) + cos2 / (2.0 * s2);
    let mut table = vec![vec![0.0; (2 * r + 1) as usize]; (2 * r + 1) as usize];
    let mut total = 0.0;
    for k in -r..=r {
        for l in -r..=r {
            let (kf, lf) = (k as f64, l as f64);
            let w = (-(a * kf * kf + 2.0 * b * kf * lf + c * lf * lf)).exp();
            table[(k + r) as usize][(l + r) as usize] = w;
            total += w;
        }
    }
    for row in &mut table {
        for w in row.iter_mut() {
            *w /= total;
        }
    }
    table
}

/// Literal four-fold loop: pixels, directions, window rows, window columns.
pub fn tsv_bruteforce(f: &ScalarField, params: &TsvParams) -> ScalarField {
    let (m, n) = f.dims();
    let r = (params.window / 2) as isize;
    let directions = [
        (0.0, (1isize, 0isize)),
        (std::f64::consts::FRAC_PI_2, (0, 1)),
        (std::f64::consts::FRAC_PI_4, (1, 1)),
        (3.0 * std::f64::consts::FRAC_PI_4, (1, -1)),
    ];
    let tables: Vec<_> = directions.iter().map(|&(t, _)| kernel_weights(t, params)).collect();
    let mut out = vec![0.0; m * n];
    for i in 0..m as isize {
        for j in 0..n as isize {
            let mut total = 0.0;
            for (table, &(_, (si, sj))) in tables.iter().zip(&directions) {
                let mut acc = 0.0;
                for k in -r..=r {
                    for l in -r..=r {
                        let (pi, pj) = (i + k, j + l);
                        let d = f.wrapped(pi + si, pj + sj) - f.wrapped(pi, pj);
                        acc += table[(k + r) as usize][(l + r) as usize] * d;
                    }
                }
                total += acc.abs();
            }
            out[(i as usize) * n + j as usize] = total;
        }
    }
    ScalarField::from_vec(m, n, out).expect("finite input gives finite TSV")
}

/// Minimizes `0.5 |q - p|^2 + threshold |q|` numerically.
///
/// The minimizer is a non-negative multiple of `p`, so the search runs over
/// the radius `r in [0, |p|]`: a uniform grid locates the bracket, golden
/// section search refines it.
pub fn prox_numeric(p: [f64; 2], threshold: f64) -> [f64; 2] {
    assert!(threshold >= 0.0);
    let norm = p[0].hypot(p[1]);
    if norm == 0.0 {
        return [0.0, 0.0];
    }
    let phi = |r: f64| 0.5 * (r - norm) * (r - norm) + threshold * r;
    const GRID: usize = 2000;
    let h = norm / GRID as f64;
    let best = (0..=GRID)
        .map(|k| k as f64 * h)
        .min_by(|a, b| phi(*a).total_cmp(&phi(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(norm));
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-13 * norm.max(1.0) {
        let x1 = hi - golden * (hi - lo);
        let x2 = lo + golden * (hi - lo);
        if phi(x1) <= phi(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mut r = 0.5 * (lo + hi);
    // boundary minimizer at the origin
    if phi(0.0) <= phi(r) {
        r = 0.0;
    }
    [r * p[0] / norm, r * p[1] / norm]
}
