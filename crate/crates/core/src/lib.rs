//! Cartoon/texture decomposition of grayscale images.
//!
//! The structure part `u` is regularized by total variation; the texture part
//! is `div(g) / eta` for a square-integrable vector field `g`, where the weight
//! `eta = kappa + TSV(f)` is large at region boundaries and small inside flat
//! or uniformly textured regions. The penalized objective is minimized by an
//! operator-splitting iteration whose linear solves are diagonal in Fourier
//! space, so every iteration costs `O(N log N)` for `N` pixels.
//!
//! ```no_run
//! use tsvdecomp::{decompose, make_phantom, PhantomKind, SolverParams, TsvParams};
//!
//! let phantom = make_phantom(PhantomKind::Tiles, 64, 64, 0).unwrap();
//! let out = decompose(&phantom.image, &TsvParams::default(), &SolverParams::default(), None).unwrap();
//! println!("{} iterations, final energy {}", out.iterations(), out.trace.last().unwrap().terms.total);
//! ```

pub mod error;
pub mod grid;
pub mod nlm;
pub mod phantom;
pub mod solver;
pub mod spectral;
pub mod tsv;

pub use error::{Error, Result};
pub use grid::{divergence, gradient, laplacian, total_variation, Axis, Direction, ScalarField, VectorField2};
pub use nlm::{nlm_denoise, NlmParams};
pub use phantom::{make_phantom, Phantom, PhantomKind, Region, RegionMasks};
pub use solver::{
    decompose, decompose_observed, decompose_with_weights, energy, run_stage, shrink_p, DecompositionResult,
    EnergyRecord, EnergyTerms, EnergyTrace, EtaMode, IterationObserver, SolverParams, SolverState, Splitting,
    StageOutput,
};
pub use spectral::{split_pair, Fft2, SpectralSolver, SpectralSymbols};
pub use tsv::{build_eta, build_kernel, compute_tsv, compute_tsv_with, Kernel, KernelStack, TsvParams, WeightField};
