//! Dynamic movement primitives: learning a point-attractor-plus-forcing-term model
//! from one demonstration and replaying it towards new start and goal positions.
//!
//! The transformation system, per dimension, in normalized time is
//!
//! ```text
//! τ²·ÿ = α·(β·(g − y) − τ·ẏ) + f(x)·s
//! f(x) = x · Σ ψᵢ(x)·wᵢ / Σ ψᵢ(x),    ψᵢ(x) = exp(−hᵢ·(x − cᵢ)²)
//! τ·ẋ  = −αₓ·x,  x(0) = 1
//! ```
//!
//! where `s = g − y` ([`ForcingScaling::GoalMinusState`], the default) or
//! `s = g − y₀` ([`ForcingScaling::GoalMinusStart`]). With τ = 1 the first line is the
//! plain second-order form. All dimensions of a model share one canonical phase.

mod document;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use document::{DmpConfigDocument, DmpDocument};

/// Demonstration dimensions where `|g − y₀|` falls below this are flagged degenerate.
pub const EPSILON_GOAL: f64 = 1e-6;
/// Samples closer to the goal than this are excluded from the regression.
pub const REGRESSION_DROP: f64 = 1e-4;
/// Below this the forcing-term normalizer is treated as zero.
pub const ACTIVATION_FLOOR: f64 = 1e-12;

pub const MAX_DIMS: usize = 7;

#[derive(Debug, Error, PartialEq)]
pub enum DmpError {
    #[error("trajectory needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("timestamps must be strictly increasing (sample {0})")]
    NonMonotonicTime(usize),
    #[error("sample {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("dimension {0} is outside 1..=7")]
    BadDimension(usize),
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid rollout request: {0}")]
    InvalidRollout(&'static str),
    #[error("integration diverged at step {step}")]
    Divergence { step: usize },
}

/// How the learned forcing term is scaled in the transformation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingScaling {
    /// `f(x)·(g − y)`
    #[default]
    GoalMinusState,
    /// `f(x)·(g − y₀)`
    GoalMinusStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmpConfig<T> {
    pub alpha: T,
    pub beta: T,
    /// Canonical decay rate; `x(τ) = exp(−alpha_x)`.
    pub alpha_x: T,
    pub n_basis: usize,
    /// Duration scale in seconds. Fitting overwrites it with the demonstration length.
    pub tau: T,
    pub scaling: ForcingScaling,
}

impl<T: Real> Default for DmpConfig<T> {
    fn default() -> Self {
        DmpConfig {
            alpha: T::lit(25.0),
            beta: T::lit(6.25),
            alpha_x: T::lit(4.6),
            n_basis: 15,
            tau: T::one(),
            scaling: ForcingScaling::GoalMinusState,
        }
    }
}

impl<T: Real> DmpConfig<T> {
    pub fn with_basis(mut self, n_basis: usize) -> Self {
        self.n_basis = n_basis;
        self
    }

    pub fn with_scaling(mut self, scaling: ForcingScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !pos(self.alpha) {
            return Err(DmpError::InvalidConfig("alpha must be > 0"));
        }
        if !pos(self.beta) {
            return Err(DmpError::InvalidConfig("beta must be > 0"));
        }
        if !pos(self.alpha_x) {
            return Err(DmpError::InvalidConfig("alpha_x must be > 0"));
        }
        if !pos(self.tau) {
            return Err(DmpError::InvalidConfig("tau must be > 0"));
        }
        if self.n_basis < 2 {
            return Err(DmpError::InvalidConfig("n_basis must be >= 2"));
        }
        Ok(())
    }

    /// Phase at time `t` after the start of a movement.
    pub fn phase_at(&self, t: T) -> T {
        (-self.alpha_x * t / self.tau).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub y: Vec<T>,
}

/// Time-stamped positions; at least three samples, strictly increasing time and a
/// fixed dimension between 1 and 7.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    samples: Vec<Sample<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(samples: Vec<Sample<T>>) -> Result<Self, DmpError> {
        if samples.len() < 3 {
            return Err(DmpError::TooFewSamples(samples.len()));
        }
        let dim = samples[0].y.len();
        if dim == 0 || dim > MAX_DIMS {
            return Err(DmpError::BadDimension(dim));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.y.len() != dim {
                return Err(DmpError::DimensionMismatch { index: i, expected: dim, found: s.y.len() });
            }
            if !s.t.is_finite() || s.y.iter().any(|v| !v.is_finite()) {
                return Err(DmpError::NonFinite(i));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(DmpError::NonMonotonicTime(i));
            }
        }
        Ok(Trajectory { samples })
    }

    /// Builds a trajectory from parallel time and position arrays.
    pub fn from_columns(times: &[T], positions: &[Vec<T>]) -> Result<Self, DmpError> {
        Self::new(times.iter().zip(positions).map(|(&t, y)| Sample { t, y: y.clone() }).collect())
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].y.len()
    }

    pub fn duration(&self) -> T {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }

    pub fn first(&self) -> &Sample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<T> {
        &self.samples[self.samples.len() - 1]
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, d: usize) -> Vec<T> {
        self.samples.iter().map(|s| s.y[d]).collect()
    }

    /// Linear interpolation of dimension `d` at time `t`, clamped to the ends.
    pub fn interpolate(&self, d: usize, t: T) -> T {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0].y[d];
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1].y[d];
        }
        let k = s.partition_point(|p| p.t <= t);
        let (a, b) = (&s[k - 1], &s[k]);
        let u = (t - a.t) / (b.t - a.t);
        a.y[d] + (b.y[d] - a.y[d]) * u
    }
}

/// Integration state of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpState<T> {
    pub y: Vec<T>,
    pub yd: Vec<T>,
    /// Canonical phase in (0, 1].
    pub x: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmpModel<T> {
    pub config: DmpConfig<T>,
    /// `weights[d][i]` is the weight of basis `i` in dimension `d`.
    pub weights: Vec<Vec<T>>,
    pub y0_demo: Vec<T>,
    pub g_demo: Vec<T>,
    /// Strictly decreasing phase locations.
    pub basis_centers: Vec<T>,
    pub basis_widths: Vec<T>,
    pub degenerate_dims: Vec<usize>,
}

/// Basis centres at the phase of equally spaced times, widths chosen so neighbouring
/// Gaussians cross at activation 0.5.
pub fn basis_layout<T: Real>(config: &DmpConfig<T>) -> (Vec<T>, Vec<T>) {
    let n = config.n_basis;
    let last = T::from_usize(n - 1).unwrap_or_else(T::one);
    let centers: Vec<T> = (0..n).map(|i| (-config.alpha_x * T::from_usize(i).unwrap_or_else(T::zero) / last).exp()).collect();
    let overlap = T::lit(4.0 * std::f64::consts::LN_2);
    let widths = (0..n)
        .map(|i| {
            let gap = if i + 1 < n { centers[i] - centers[i + 1] } else { centers[i - 1] - centers[i] };
            overlap / (gap * gap)
        })
        .collect();
    (centers, widths)
}

impl<T: Real> DmpModel<T> {
    /// Model with all weights zero: a pure critically damped point attractor.
    pub fn zero(config: DmpConfig<T>, dims: usize) -> Result<Self, DmpError> {
        config.validate()?;
        if dims == 0 || dims > MAX_DIMS {
            return Err(DmpError::BadDimension(dims));
        }
        let (basis_centers, basis_widths) = basis_layout(&config);
        Ok(DmpModel {
            weights: vec![vec![T::zero(); config.n_basis]; dims],
            y0_demo: vec![T::zero(); dims],
            g_demo: vec![T::zero(); dims],
            basis_centers,
            basis_widths,
            degenerate_dims: Vec::new(),
            config,
        })
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    pub fn n_basis(&self) -> usize {
        self.basis_centers.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
            && self.basis_centers.iter().chain(&self.basis_widths).all(|v| v.is_finite())
    }

    pub fn is_degenerate(&self, dim: usize) -> bool {
        self.degenerate_dims.contains(&dim)
    }

    pub fn all_degenerate(&self) -> bool {
        (0..self.dims()).all(|d| self.is_degenerate(d))
    }

    pub fn basis_activation(&self, x: T) -> Vec<T> {
        basis_activation(x, self)
    }

    pub fn forcing_term(&self, x: T, dim: usize) -> T {
        forcing_term(x, self, dim)
    }

    pub fn rollout(&self, y0: &[T], g: &[T], duration: T, dt: T) -> Result<Trajectory<T>, DmpError> {
        rollout(self, y0, g, duration, dt)
    }
}

/// Gaussian activations `exp(−hᵢ(x − cᵢ)²)` of every basis function at phase `x`.
pub fn basis_activation<T: Real>(x: T, model: &DmpModel<T>) -> Vec<T> {
    model.basis_centers.iter().zip(&model.basis_widths).map(|(&c, &h)| (-h * (x - c) * (x - c)).exp()).collect()
}

/// Normalized weighted basis sum times the phase. Returns zero when the activations
/// sum below [`ACTIVATION_FLOOR`].
pub fn forcing_term<T: Real>(x: T, model: &DmpModel<T>, dim: usize) -> T {
    let psi = basis_activation(x, model);
    forcing_from_activations(&psi, &model.weights[dim], x)
}

fn forcing_from_activations<T: Real>(psi: &[T], weights: &[T], x: T) -> T {
    let den = psi.iter().fold(T::zero(), |a, &p| a + p);
    if den < T::lit(ACTIVATION_FLOOR) {
        return T::zero();
    }
    let num = psi.iter().zip(weights).fold(T::zero(), |a, (&p, &w)| a + p * w);
    num / den * x
}

/// Derivative on a possibly non-uniform grid: second-order central differences
/// inside, first-order one-sided at the ends.
fn gradient<T: Real>(y: &[T], t: &[T]) -> Vec<T> {
    let n = y.len();
    let mut out = vec![T::zero(); n];
    out[0] = (y[1] - y[0]) / (t[1] - t[0]);
    out[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        out[i] = (h1 * h1 * y[i + 1] - h2 * h2 * y[i - 1] + (h2 * h2 - h1 * h1) * y[i]) / (h1 * h2 * (h1 + h2));
    }
    out
}

/// Learns one model from a demonstration.
///
/// `config.tau` is replaced by the demonstration duration. Dimensions whose start and
/// end differ by less than [`EPSILON_GOAL`] get zero weights and are listed in
/// `degenerate_dims`.
pub fn fit_dmp<T: Real>(demo: &Trajectory<T>, config: &DmpConfig<T>) -> Result<DmpModel<T>, DmpError> {
    let mut config = *config;
    config.tau = demo.duration();
    config.validate()?;

    let dims = demo.dim();
    let mut model = DmpModel::zero(config, dims)?;
    let times = demo.times();
    let t0 = times[0];
    let phase: Vec<T> = times.iter().map(|&t| config.phase_at(t - t0)).collect();
    let activations: Vec<Vec<T>> = phase.iter().map(|&x| basis_activation(x, &model)).collect();
    let tau = config.tau;

    for d in 0..dims {
        let y = demo.column(d);
        let y0 = y[0];
        let g = y[y.len() - 1];
        model.y0_demo[d] = y0;
        model.g_demo[d] = g;
        if (g - y0).abs() < T::lit(EPSILON_GOAL) {
            model.degenerate_dims.push(d);
            continue;
        }
        let yd = gradient(&y, &times);
        let ydd = gradient(&yd, &times);

        let mut num = vec![T::zero(); config.n_basis];
        let mut den = vec![T::zero(); config.n_basis];
        for k in 0..y.len() {
            let to_goal = g - y[k];
            let scale = match config.scaling {
                ForcingScaling::GoalMinusState => {
                    if to_goal.abs() < T::lit(REGRESSION_DROP) {
                        continue;
                    }
                    to_goal
                }
                ForcingScaling::GoalMinusStart => g - y0,
            };
            let target = tau * tau * ydd[k] - config.alpha * (config.beta * to_goal - tau * yd[k]);
            let regressor = phase[k] * scale;
            for (i, &psi) in activations[k].iter().enumerate() {
                num[i] = num[i] + psi * regressor * target;
                den[i] = den[i] + psi * regressor * regressor;
            }
        }
        for i in 0..config.n_basis {
            model.weights[d][i] = if den[i] > T::min_positive_value() { num[i] / den[i] } else { T::zero() };
        }
    }
    if !model.is_finite() {
        return Err(DmpError::NonFinite(0));
    }
    Ok(model)
}

/// Advances `state` by one semi-implicit Euler step of length `dt` at elapsed time `t`.
pub fn step<T: Real>(model: &DmpModel<T>, state: &mut DmpState<T>, y0: &[T], g: &[T], t: T, dt: T) {
    let cfg = &model.config;
    let tau = cfg.tau;
    let psi = basis_activation(state.x, model);
    for d in 0..model.dims() {
        let f = forcing_from_activations(&psi, &model.weights[d], state.x);
        let scale = match cfg.scaling {
            ForcingScaling::GoalMinusState => g[d] - state.y[d],
            ForcingScaling::GoalMinusStart => g[d] - y0[d],
        };
        let acc = (cfg.alpha * (cfg.beta * (g[d] - state.y[d]) - tau * state.yd[d]) + f * scale) / (tau * tau);
        state.yd[d] = state.yd[d] + acc * dt;
        state.y[d] = state.y[d] + state.yd[d] * dt;
    }
    state.x = cfg.phase_at(t + dt);
}

/// Integrates the model from rest at `y0` towards `g` for `duration` seconds.
///
/// The returned trajectory starts at `t = 0` and has one sample per step.
pub fn rollout<T: Real>(model: &DmpModel<T>, y0: &[T], g: &[T], duration: T, dt: T) -> Result<Trajectory<T>, DmpError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(DmpError::InvalidRollout("dt must be > 0"));
    }
    if !(duration >= dt) || !duration.is_finite() {
        return Err(DmpError::InvalidRollout("duration must be >= dt"));
    }
    if y0.len() != model.dims() || g.len() != model.dims() {
        return Err(DmpError::InvalidRollout("start/goal dimension differs from model"));
    }
    if !model.is_finite() || y0.iter().chain(g).any(|v| !v.is_finite()) {
        return Err(DmpError::InvalidRollout("non-finite model or boundary values"));
    }
    let steps = (duration / dt).round().to_usize().unwrap_or(1).max(1);
    let mut state = DmpState { y: y0.to_vec(), yd: vec![T::zero(); y0.len()], x: T::one() };
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample { t: T::zero(), y: state.y.clone() });
    for k in 0..steps {
        let t = T::from_usize(k).unwrap_or_else(T::zero) * dt;
        step(model, &mut state, y0, g, t, dt);
        if state.y.iter().chain(&state.yd).any(|v| !v.is_finite()) {
            return Err(DmpError::Divergence { step: k + 1 });
        }
        samples.push(Sample { t: t + dt, y: state.y.clone() });
    }
    Ok(Trajectory { samples })
}

/// Per-dimension RMSE between a rollout and the demonstration it should reproduce,
/// comparing at the rollout's sample times (demo interpolated linearly).
pub fn reproduction_rmse<T: Real>(demo: &Trajectory<T>, replay: &Trajectory<T>) -> Vec<T> {
    let t0 = demo.first().t;
    (0..demo.dim())
        .map(|d| {
            let mut acc = T::zero();
            for s in replay.samples() {
                let e = s.y[d] - demo.interpolate(d, t0 + s.t);
                acc = acc + e * e;
            }
            (acc / T::from_usize(replay.len()).unwrap_or_else(T::one)).sqrt()
        })
        .collect()
}
