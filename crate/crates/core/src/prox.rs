//! Proximal-gradient machinery for composite objectives `f(x) = g(x) + λ h(x)`.
//!
//! [`ista_pass`] takes one forward-backward step
//! `x⁺ = prox_{λ t h}(x − t ∇g(x))`, and [`fista_pass`] adds the
//! Nesterov extrapolation with the scalar recurrence
//! `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`. [`solve`] drives either pass to
//! convergence on iterate displacement, optionally projecting every iterate
//! back onto the unit sphere (which turns the sparse-PCA instance into a
//! thresholded power iteration).
//!
//! The gradient step size and the FISTA momentum scalar are kept separate:
//! `step` is fixed for a solve, while the momentum scalar grows without bound.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Smallest step [`estimate_step`] will return.
pub const MIN_STEP: f64 = 1e-12;

/// Power-iteration steps used when a solve asks for an automatic step size.
pub const AUTO_STEP_ITERS: usize = 100;

/// Componentwise soft-thresholding `sign(v) · max(|v| − τ, 0)`.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("threshold must be >= 0, got {tau}")));
    }
    Ok(v.map(|x| shrink(x, tau)))
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    let mag = x.abs() - tau;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// A composite objective `g(x) + λ h(x)` with smooth `g`.
pub trait ProxProblem {
    fn dim(&self) -> usize;

    /// The regularization weight λ.
    fn lambda(&self) -> f64;

    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Proximal map of `tau · h` evaluated at `v`.
    fn prox(&self, v: &DVector<f64>, tau: f64) -> DVector<f64>;

    /// `f(x)`, when cheap enough to track.
    fn objective(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Step size to use for [`Step::Auto`]; `None` if the problem cannot
    /// estimate one.
    fn auto_step(&self) -> Option<f64> {
        None
    }
}

/// Closure-backed problem for ad-hoc objectives.
pub struct FnProblem<G, P> {
    pub dim: usize,
    pub lambda: f64,
    pub grad: G,
    pub prox: P,
}

impl<G, P> ProxProblem for FnProblem<G, P>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad)(x)
    }
    fn prox(&self, v: &DVector<f64>, tau: f64) -> DVector<f64> {
        (self.prox)(v, tau)
    }
}

/// Sparse PCA: `g(x) = −xᵀDᵀDx`, `h(x) = ‖x‖₁`.
///
/// `∇g(x) = −2DᵀDx`, so an ISTA pass is `S_{λt}((I + 2tDᵀD)x)`.
pub struct SparsePcaProblem<'a> {
    data: &'a DMatrix<f64>,
    lambda: f64,
}

impl<'a> SparsePcaProblem<'a> {
    pub fn new(data: &'a DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { data, lambda })
    }
}

impl ProxProblem for SparsePcaProblem<'_> {
    fn dim(&self) -> usize {
        self.data.ncols()
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let dx = self.data * x;
        self.data.tr_mul(&dx) * -2.0
    }
    fn prox(&self, v: &DVector<f64>, tau: f64) -> DVector<f64> {
        v.map(|x| shrink(x, tau))
    }
    fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        let dx = self.data * x;
        Some(-dx.norm_squared() + self.lambda * x.lp_norm(1))
    }
    fn auto_step(&self) -> Option<f64> {
        Some(estimate_step(self.data, AUTO_STEP_ITERS).step)
    }
}

/// LASSO: `g(x) = ½‖Ax − b‖²`, `h(x) = ‖x‖₁`.
pub struct LassoProblem<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    lambda: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(a: &'a DMatrix<f64>, b: &'a DVector<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if a.nrows() != b.len() {
            return Err(Error::invalid(format!(
                "design has {} rows but target has length {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b, lambda })
    }
}

impl ProxProblem for LassoProblem<'_> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&(self.a * x - self.b))
    }
    fn prox(&self, v: &DVector<f64>, tau: f64) -> DVector<f64> {
        v.map(|x| shrink(x, tau))
    }
    fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        Some(0.5 * (self.a * x - self.b).norm_squared() + self.lambda * x.lp_norm(1))
    }
    fn auto_step(&self) -> Option<f64> {
        // 1/L with L = λ_max(AᵀA); estimate_step returns 1/(2 λ_max)
        Some(2.0 * estimate_step(self.a, AUTO_STEP_ITERS).step)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

fn check_dim(problem: &dyn ProxProblem, x: &DVector<f64>) -> Result<()> {
    if x.len() == problem.dim() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "vector has length {}, problem dimension is {}",
            x.len(),
            problem.dim()
        )))
    }
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("step must be finite and > 0, got {step}")))
    }
}

/// Forward-backward step `prox_{λ·step·h}(x − step·∇g(x))`.
fn forward_backward(problem: &dyn ProxProblem, x: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    let grad = problem.grad(x);
    if grad.len() != x.len() {
        return Err(Error::invalid(format!(
            "gradient has length {}, expected {}",
            grad.len(),
            x.len()
        )));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    let v = x - grad * step;
    Ok(problem.prox(&v, problem.lambda() * step))
}

/// One proximal-gradient (ISTA) pass.
pub fn ista_pass(problem: &dyn ProxProblem, x: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    check_step(step)?;
    check_dim(problem, x)?;
    forward_backward(problem, x, step)
}

/// Iterate history and momentum scalars carried between FISTA passes.
#[derive(Debug, Clone, PartialEq)]
pub struct FistaState {
    pub x_old: DVector<f64>,
    pub x_old_old: DVector<f64>,
    pub t_old: f64,
    pub t_old_old: f64,
    pub step: f64,
}

impl FistaState {
    /// Standard start: both iterates at `x0`, both momentum scalars at 1.
    pub fn new(x0: DVector<f64>, step: f64) -> Result<Self> {
        check_step(step)?;
        Ok(Self {
            x_old_old: x0.clone(),
            x_old: x0,
            t_old: 1.0,
            t_old_old: 1.0,
            step,
        })
    }

    /// Coefficient applied to `x_old − x_old_old` in the extrapolation.
    pub fn momentum(&self) -> f64 {
        (self.t_old_old - 1.0) / self.t_old
    }

    fn validate(&self) -> Result<()> {
        check_step(self.step)?;
        if self.x_old.len() != self.x_old_old.len() {
            return Err(Error::invalid("FISTA state vectors differ in length"));
        }
        if !(self.t_old >= 1.0 && self.t_old_old >= 1.0) {
            return Err(Error::invalid(format!(
                "FISTA momentum scalars must be >= 1, got {} and {}",
                self.t_old, self.t_old_old
            )));
        }
        Ok(())
    }
}

/// Next value of the momentum recurrence.
pub fn next_momentum_scalar(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// One FISTA pass; returns the new iterate and the advanced state.
///
/// The state shifts as `x_old_old ← x_old`, `x_old ← x⁺`,
/// `t_old_old ← t_old`, `t_old ← t`, each from its previous value.
pub fn fista_pass(problem: &dyn ProxProblem, state: &FistaState) -> Result<(DVector<f64>, FistaState)> {
    state.validate()?;
    check_dim(problem, &state.x_old)?;
    let beta = state.momentum();
    let y = if beta == 0.0 {
        state.x_old.clone()
    } else {
        &state.x_old + (&state.x_old - &state.x_old_old) * beta
    };
    let x_new = forward_backward(problem, &y, state.step)?;
    let next = FistaState {
        x_old_old: state.x_old.clone(),
        x_old: x_new.clone(),
        t_old_old: state.t_old,
        t_old: next_momentum_scalar(state.t_old),
        step: state.step,
    };
    Ok((x_new, next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ista,
    Fista,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ista => "ista",
            Method::Fista => "fista",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step: Step,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub normalize: bool,
    pub track_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: Step::Auto,
            tol: 1e-6,
            max_iter: 1000,
            seed: 0,
            normalize: true,
            track_objective: false,
        }
    }
}

impl SolverConfig {
    /// Defaults for convex problems: no unit-sphere projection.
    pub fn convex() -> Self {
        Self {
            normalize: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Step::Fixed(step) = self.step {
            check_step(step)?;
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub iterations: usize,
    /// Final `‖x_{k+1} − x_k‖₂`.
    pub displacement: f64,
    pub objective_history: Option<Vec<f64>>,
    pub wall_seconds: f64,
    pub converged: bool,
    /// Set when unit-sphere projection met an all-zero iterate.
    pub collapsed_to_zero: bool,
    pub step: f64,
}

/// A point drawn uniformly from the unit sphere in `dim` dimensions.
pub fn random_unit_vector(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Flips `x` so its largest-magnitude entry (first on ties) is positive.
pub fn canonical_sign(x: &mut DVector<f64>) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &v in x.iter() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        x.neg_mut();
    }
}

/// Runs ISTA or FISTA passes until `‖x_{k+1} − x_k‖₂ ≤ tol` or `max_iter`.
pub fn solve(
    problem: &dyn ProxProblem,
    config: &SolverConfig,
    method: Method,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, SolverTrace)> {
    config.validate()?;
    check_dim(problem, x0)?;
    let start = Instant::now();
    let step = match config.step {
        Step::Fixed(s) => s,
        Step::Auto => problem
            .auto_step()
            .ok_or_else(|| Error::invalid("problem cannot estimate a step size; set one explicitly"))?,
    };
    check_step(step)?;

    let mut x = x0.clone();
    if config.normalize {
        let norm = x.norm();
        if norm > 0.0 {
            x /= norm;
        }
    }
    let mut state = match method {
        Method::Fista => Some(FistaState::new(x.clone(), step)?),
        Method::Ista => None,
    };
    let mut history = config
        .track_objective
        .then(|| problem.objective(&x).into_iter().collect::<Vec<_>>());

    let mut trace = SolverTrace {
        iterations: 0,
        displacement: f64::INFINITY,
        objective_history: None,
        wall_seconds: 0.0,
        converged: false,
        collapsed_to_zero: false,
        step,
    };

    for iteration in 1..=config.max_iter {
        let pass = match state.as_ref() {
            Some(s) => fista_pass(problem, s).map(|(x, s)| (x, Some(s))),
            None => ista_pass(problem, &x, step).map(|x| (x, None)),
        };
        let (mut next, next_state) = match pass {
            Ok(v) => v,
            Err(Error::NonFiniteGradient { .. }) => return Err(Error::Divergence { iteration }),
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
        trace.iterations = iteration;

        if config.normalize {
            let norm = next.norm();
            if norm == 0.0 {
                trace.displacement = (&next - &x).norm();
                trace.converged = trace.displacement <= config.tol;
                trace.collapsed_to_zero = true;
                trace.objective_history = history;
                trace.wall_seconds = start.elapsed().as_secs_f64();
                return Ok((next, trace));
            }
            next /= norm;
        }

        trace.displacement = (&next - &x).norm();
        if let Some(h) = history.as_mut() {
            h.extend(problem.objective(&next));
        }
        state = next_state.map(|mut s| {
            s.x_old = next.clone();
            s
        });
        x = next;
        if trace.displacement <= config.tol {
            trace.converged = true;
            break;
        }
    }

    if config.normalize {
        canonical_sign(&mut x);
    }
    trace.objective_history = history;
    trace.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, trace))
}

/// Result of [`estimate_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEstimate {
    pub step: f64,
    /// Estimated largest eigenvalue of `DᵀD`.
    pub lambda_max: f64,
    /// Set when the estimate hit the [`MIN_STEP`] clamp because `DᵀD`
    /// looked like the zero matrix.
    pub degenerate: bool,
}

/// `1 / (2 λ̂_max(DᵀD))` from `iters` power-iteration steps, clamped to
/// at least [`MIN_STEP`].
pub fn estimate_step(data: &DMatrix<f64>, iters: usize) -> StepEstimate {
    let lambda_max = power_iteration_top(data, iters.max(1));
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        log::warn!("step estimate on a zero matrix; clamping to {MIN_STEP}");
        return StepEstimate {
            step: MIN_STEP,
            lambda_max: 0.0,
            degenerate: true,
        };
    }
    let step = (1.0 / (2.0 * lambda_max)).max(MIN_STEP);
    StepEstimate {
        step,
        lambda_max,
        degenerate: false,
    }
}

/// Rayleigh quotient of `DᵀD` after `iters` power steps from a fixed start.
fn power_iteration_top(data: &DMatrix<f64>, iters: usize) -> f64 {
    let p = data.ncols();
    if p == 0 || data.nrows() == 0 {
        return 0.0;
    }
    let mut x = random_unit_vector(p, 0x5eed);
    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let dx = data * &x;
        rayleigh = dx.norm_squared();
        let next = data.tr_mul(&dx);
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = next / norm;
    }
    let dx = data * &x;
    rayleigh.max(dx.norm_squared())
}
