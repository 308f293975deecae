//! Two-fragment Lie (Marchuk-Yanenko) splitting for
//!
//! ```text
//! min_{u, g}  alpha1 sum |grad u| + alpha2 sum |g|^2
//!             + 1/(2 theta) sum (u + div(g) / eta - f)^2
//! ```
//!
//! Each iteration performs
//!
//! 1. `p <- shrink(p)` (proximal step of the TV term),
//! 2. `g <- solve((I - c grad div + 2 dt alpha2) g = b)`, `v_half = div(g) / eta`,
//! 3. `(u, v) <- solve` of the quadratic coupling, `p <- grad u`.
//!
//! The outer driver re-runs the stage solve on the previous structure part
//! with a recomputed weight and accumulates the textures.

use crate::error::{Error, Result};
use crate::grid::{divergence, divergence_map, gradient, sub_gradient, total_variation, ScalarField, VectorField2};
use crate::nlm::{nlm_denoise, NlmParams};
use crate::spectral::SpectralSolver;
use crate::tsv::{build_eta, TsvParams, WeightField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaMode {
    /// `eta = kappa + TSV(u)`, recomputed at every restart.
    #[default]
    Tsv,
    /// Spatially constant weight; reduces the model to the unweighted
    /// TV + H^-1 texture model.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// TV weight.
    pub alpha1: f64,
    /// Weight of `|g|^2`.
    pub alpha2: f64,
    /// Fidelity penalty; smaller is stiffer.
    pub theta: f64,
    /// Time step.
    pub dt: f64,
    /// Frozen coefficient of the implicit `grad div` term.
    pub c_frozen: f64,
    /// Raise the frozen coefficient to `max(1/eta^2) / 2` when it is below
    /// that. Under the bound the explicit `1/eta^2` part of the g update
    /// amplifies the highest frequencies and the iteration blows up wherever
    /// `eta < 1/sqrt(2 c)`. Turning this off runs `c_frozen` as given.
    pub stabilize_frozen: bool,
    pub max_iters: usize,
    pub restart_every: usize,
    pub eta_mode: EtaMode,
    /// Weight used when `eta_mode` is [`EtaMode::Constant`].
    pub constant_eta: f64,
    /// Stop after a restart stage whose relative change in `u` falls below
    /// this value. `None` runs the full budget.
    pub early_stop_tol: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            alpha1: 0.03,
            alpha2: 0.3,
            theta: 1e-6,
            dt: 0.08,
            c_frozen: 1.0,
            stabilize_frozen: true,
            max_iters: 2000,
            restart_every: 400,
            eta_mode: EtaMode::Tsv,
            constant_eta: 1.0,
            early_stop_tol: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("theta", self.theta),
            ("dt", self.dt),
            ("c_frozen", self.c_frozen),
            ("constant_eta", self.constant_eta),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {x}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        if self.restart_every == 0 || self.restart_every > self.max_iters {
            return Err(Error::param(
                "restart_every",
                format!("must be in 1..={}, got {}", self.max_iters, self.restart_every),
            ));
        }
        if let Some(tol) = self.early_stop_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::param("early_stop_tol", format!("must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    /// Trade-off between the TV and weighted G-norm terms in the limit
    /// `theta -> 0`.
    pub fn lambda(&self) -> f64 {
        self.alpha2 / self.alpha1
    }

    /// Iteration counts of the restart stages. A budget that is not a
    /// multiple of `restart_every` ends with a shorter stage.
    pub fn stage_lengths(&self) -> Vec<usize> {
        let mut stages = vec![self.restart_every; self.max_iters / self.restart_every];
        let rem = self.max_iters % self.restart_every;
        if rem > 0 {
            stages.push(rem);
        }
        stages
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: ScalarField,
    pub v: ScalarField,
    pub g: VectorField2,
    pub p: VectorField2,
    pub iter: usize,
}

impl SolverState {
    /// `u = f`, `p = grad f`, `g = 0`, `v = 0`.
    pub fn initial(f: &ScalarField) -> Self {
        let (m, n) = f.dims();
        Self {
            u: f.clone(),
            v: ScalarField::from_raw(m, n, vec![0.0; m * n]),
            g: VectorField2 {
                comp1: ScalarField::from_raw(m, n, vec![0.0; m * n]),
                comp2: ScalarField::from_raw(m, n, vec![0.0; m * n]),
            },
            p: gradient(f),
            iter: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        if !self.u.is_finite() {
            Some("u")
        } else if !self.v.is_finite() {
            Some("v")
        } else if !self.g.is_finite() {
            Some("g")
        } else if !self.p.is_finite() {
            Some("p")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub tv: f64,
    pub g: f64,
    pub fid: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    /// 1-based iteration count, continuing across restart stages.
    pub iter: usize,
    pub terms: EnergyTerms,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    records: Vec<EnergyRecord>,
}

impl EnergyTrace {
    pub fn push(&mut self, iter: usize, terms: EnergyTerms) {
        self.records.push(EnergyRecord { iter, terms });
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&EnergyRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&EnergyRecord> {
        self.records.last()
    }

    fn extend(&mut self, other: EnergyTrace) {
        self.records.extend(other.records);
    }
}

/// Isotropic soft shrinkage: `max(0, 1 - dt alpha1 / |p|) p` per pixel.
pub fn shrink_p(p: &VectorField2, dt: f64, alpha1: f64) -> VectorField2 {
    let t = dt * alpha1;
    let (m, n) = p.dims();
    let mut c1 = Vec::with_capacity(m * n);
    let mut c2 = Vec::with_capacity(m * n);
    for (&a, &b) in p.comp1.as_slice().iter().zip(p.comp2.as_slice()) {
        let mag = a.hypot(b);
        let factor = if mag <= t { 0.0 } else { 1.0 - t / mag };
        c1.push(factor * a);
        c2.push(factor * b);
    }
    VectorField2 {
        comp1: ScalarField::from_raw(m, n, c1),
        comp2: ScalarField::from_raw(m, n, c2),
    }
}

/// `(tv, g, fid, total)` of the penalized objective. The texture entering the
/// fidelity term is `div(g) / eta`.
pub fn energy(
    u: &ScalarField,
    g: &VectorField2,
    f: &ScalarField,
    eta: &WeightField,
    params: &SolverParams,
) -> EnergyTerms {
    let tv = params.alpha1 * total_variation(u);
    let g_term = params.alpha2 * (g.comp1.dot(&g.comp1) + g.comp2.dot(&g.comp2));
    let div = divergence(g);
    let residual: f64 = u
        .as_slice()
        .iter()
        .zip(div.as_slice())
        .zip(eta.eta().as_slice())
        .zip(f.as_slice())
        .map(|(((&uu, &d), &e), &ff)| {
            let r = uu + d / e - ff;
            r * r
        })
        .sum();
    let fid = residual / (2.0 * params.theta);
    EnergyTerms {
        tv,
        g: g_term,
        fid,
        total: tv + g_term + fid,
    }
}

/// Stage-level solver: fixed input `f`, fixed weight, and the spectral
/// workspaces reused across iterations.
#[derive(Debug)]
pub struct Splitting {
    f: ScalarField,
    eta: WeightField,
    inv_eta: ScalarField,
    // c - 1/eta^2, the explicit coefficient of the g right-hand side
    explicit: ScalarField,
    c: f64,
    params: SolverParams,
    spectral: SpectralSolver,
}

impl Splitting {
    pub fn new(f: &ScalarField, eta: &WeightField, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        if f.dims() != eta.dims() {
            return Err(Error::DimensionMismatch {
                left: f.dims(),
                right: eta.dims(),
            });
        }
        if let Some(index) = eta.eta().as_slice().iter().position(|&e| e.is_nan() || e <= 0.0) {
            return Err(Error::param("eta", format!("sample {index} is not positive")));
        }
        let inv_eta = eta.eta().map(|e| 1.0 / e);
        let inv_eta_sq = inv_eta.map(|x| x * x);
        let c = if params.stabilize_frozen {
            params.c_frozen.max(0.5 * inv_eta_sq.max())
        } else {
            params.c_frozen
        };
        let explicit = inv_eta_sq.map(|x| c - x);
        let (m, n) = f.dims();
        Ok(Self {
            f: f.clone(),
            eta: eta.clone(),
            inv_eta,
            explicit,
            c,
            params: *params,
            spectral: SpectralSolver::new(m, n),
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn input(&self) -> &ScalarField {
        &self.f
    }

    pub fn weight(&self) -> &WeightField {
        &self.eta
    }

    /// Frozen coefficient actually used by the g update.
    pub fn frozen_coefficient(&self) -> f64 {
        self.c
    }

    /// Assembles the right-hand side
    /// `b = g - grad((c - 1/eta^2) div g) - grad(v / eta)`.
    pub fn g_rhs(&self, state: &SolverState) -> VectorField2 {
        let (w, ie, v) = (self.explicit.as_slice(), self.inv_eta.as_slice(), state.v.as_slice());
        let q = divergence_map(&state.g, |k, d| w[k] * d + ie[k] * v[k]);
        sub_gradient(&state.g, &q)
    }

    /// Frozen-coefficient `g` update followed by `v_half = div(g) / eta`.
    pub fn g_step(&mut self, state: &SolverState) -> (VectorField2, ScalarField) {
        let b = self.g_rhs(state);
        let p = &self.params;
        let g = self.spectral.solve_g_constant_part(&b, p.dt, p.alpha2, self.c);
        let ie = self.inv_eta.as_slice();
        let v_half = divergence_map(&g, |k, d| d * ie[k]);
        (g, v_half)
    }

    /// `(u, v)` solve, `p = grad u`, `g` carried over.
    pub fn uv_step(&mut self, state: SolverState, p_half: &VectorField2, v_half: &ScalarField) -> SolverState {
        let (u, v) = self
            .spectral
            .solve_uv_system(p_half, v_half, &self.f, self.params.dt, self.params.theta);
        let p = gradient(&u);
        SolverState {
            u,
            v,
            g: state.g,
            p,
            iter: state.iter + 1,
        }
    }

    /// One full splitting iteration.
    pub fn step(&mut self, state: SolverState) -> Result<SolverState> {
        let p_half = shrink_p(&state.p, self.params.dt, self.params.alpha1);
        let (g, v_half) = self.g_step(&state);
        let carried = SolverState { g, ..state };
        let next = self.uv_step(carried, &p_half, &v_half);
        if let Some(field) = next.first_non_finite() {
            return Err(Error::Diverged { iter: next.iter, field });
        }
        Ok(next)
    }

    pub fn energy(&self, state: &SolverState) -> EnergyTerms {
        energy(&state.u, &state.g, &self.f, &self.eta, &self.params)
    }
}

/// Callback invoked after every iteration with the stage index (0-based), the
/// stage input and the new state.
pub trait IterationObserver {
    fn observe(&mut self, stage: usize, f: &ScalarField, state: &SolverState);
}

impl<F: FnMut(usize, &ScalarField, &SolverState)> IterationObserver for F {
    fn observe(&mut self, stage: usize, f: &ScalarField, state: &SolverState) {
        self(stage, f, state)
    }
}

struct NoObserver;

impl IterationObserver for NoObserver {
    fn observe(&mut self, _: usize, _: &ScalarField, _: &SolverState) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub u: ScalarField,
    pub v: ScalarField,
    pub trace: EnergyTrace,
}

/// Runs `iters` splitting iterations on `f` with a fixed weight, starting
/// from [`SolverState::initial`].
pub fn run_stage(f: &ScalarField, eta: &WeightField, params: &SolverParams, iters: usize) -> Result<StageOutput> {
    run_stage_observed(f, eta, params, iters, 0, 0, &mut NoObserver)
}

fn run_stage_observed(
    f: &ScalarField,
    eta: &WeightField,
    params: &SolverParams,
    iters: usize,
    stage: usize,
    iter_offset: usize,
    observer: &mut dyn IterationObserver,
) -> Result<StageOutput> {
    let mut solver = Splitting::new(f, eta, params)?;
    let mut state = SolverState::initial(f);
    let mut trace = EnergyTrace::default();
    for _ in 0..iters {
        state = solver.step(state).map_err(|e| match e {
            Error::Diverged { iter, field } => Error::Diverged {
                iter: iter + iter_offset,
                field,
            },
            other => other,
        })?;
        trace.push(iter_offset + state.iter, solver.energy(&state));
        observer.observe(stage, f, &state);
    }
    Ok(StageOutput {
        u: state.u,
        v: state.v,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Final structure part.
    pub u: ScalarField,
    /// Sum of the stage textures.
    pub v_total: ScalarField,
    /// Weight used by each stage.
    pub eta_stages: Vec<WeightField>,
    /// Structure part after each stage.
    pub stage_u: Vec<ScalarField>,
    /// Texture produced by each stage.
    pub stage_v: Vec<ScalarField>,
    pub trace: EnergyTrace,
}

impl DecompositionResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Full decomposition with restarts. `denoise`, when given, pre-filters the
/// copy of `f` used for the first weight only.
pub fn decompose(
    f: &ScalarField,
    tsv: &TsvParams,
    params: &SolverParams,
    denoise: Option<&NlmParams>,
) -> Result<DecompositionResult> {
    decompose_observed(f, tsv, params, denoise, &mut NoObserver)
}

pub fn decompose_observed(
    f: &ScalarField,
    tsv: &TsvParams,
    params: &SolverParams,
    denoise: Option<&NlmParams>,
    observer: &mut dyn IterationObserver,
) -> Result<DecompositionResult> {
    tsv.validate()?;
    let (m, n) = f.dims();
    let mut weight = |stage: usize, source: &ScalarField| -> Result<WeightField> {
        match params.eta_mode {
            EtaMode::Constant => WeightField::constant(m, n, params.constant_eta),
            EtaMode::Tsv => match (stage, denoise) {
                (0, Some(nlm)) => build_eta(&nlm_denoise(source, nlm)?, tsv),
                _ => build_eta(source, tsv),
            },
        }
    };
    decompose_with_weights(f, params, &mut weight, observer)
}

/// Restart driver with a caller-supplied weight for each stage, computed from
/// that stage's input.
pub fn decompose_with_weights(
    f: &ScalarField,
    params: &SolverParams,
    weight: &mut dyn FnMut(usize, &ScalarField) -> Result<WeightField>,
    observer: &mut dyn IterationObserver,
) -> Result<DecompositionResult> {
    params.validate()?;
    let (m, n) = f.dims();
    let mut u = f.clone();
    let mut v_total = ScalarField::from_raw(m, n, vec![0.0; m * n]);
    let mut eta_stages = Vec::new();
    let mut stage_u = Vec::new();
    let mut stage_v = Vec::new();
    let mut trace = EnergyTrace::default();

    for (stage, iters) in params.stage_lengths().into_iter().enumerate() {
        let eta = weight(stage, &u)?;
        let out = run_stage_observed(&u, &eta, params, iters, stage, trace.len(), observer)?;
        v_total = &v_total + &out.v;
        trace.extend(out.trace);
        eta_stages.push(eta);
        stage_v.push(out.v);
        let change = (&out.u - &u).norm() / u.norm().max(f64::MIN_POSITIVE);
        u = out.u;
        stage_u.push(u.clone());
        if params.early_stop_tol.is_some_and(|tol| change < tol) {
            break;
        }
    }

    Ok(DecompositionResult {
        u,
        v_total,
        eta_stages,
        stage_u,
        stage_v,
        trace,
    })
}
