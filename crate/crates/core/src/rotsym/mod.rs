//! Brownian motion on rotationally symmetric manifolds `dr² + f(r)² dθ²`.
//!
//! In polar coordinates the radial part solves
//! `dr = dW + (n-1)/2 · f'/f(r) dt` and the angular part is a spherical
//! Brownian motion on `S^{n-1}` run with the clock `τ_t = ∫_0^t f(r_s)^{-2} ds`.

mod conditions;
mod warp;

pub use conditions::{check_conditions, Conditions, GROWTH_DOUBLINGS, GROWTH_RATIO};
pub use warp::{TabulatedWarp, Warp};

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::minkowski::{normalize, sphere_distance};
use crate::rng::{derive_substream, normal, Stream};
use crate::sde::TimeGrid;
use crate::stats::ConvergenceCertificate;

/// Floor used when a radial step overshoots the origin.
pub const REFLECT_FLOOR: f64 = 1e-6;
/// Tolerated drift of `|θ|` away from 1.
pub const UNIT_TOL: f64 = 1e-9;

const RADIAL: u64 = 0;
const ANGULAR: u64 = 1;
const START: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpModel {
    n: usize,
    warp: Warp,
}

impl WarpModel {
    pub fn new(n: usize, warp: Warp) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "n must be ≥ 2"));
        }
        Ok(WarpModel { n, warp })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn warp(&self) -> &Warp {
        &self.warp
    }

    pub fn name(&self) -> &str {
        self.warp.name()
    }

    /// Radial drift `(n-1)/2 · f'/f(r)`.
    pub fn radial_drift(&self, r: f64) -> f64 {
        0.5 * (self.n - 1) as f64 * self.warp.log_derivative(r)
    }
}

/// Position `(r, θ)` with the accumulated angular clock and a tangent frame at `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotsymState {
    pub r: f64,
    pub theta: Vec<f64>,
    pub tau: f64,
    /// Orthonormal basis of the tangent space at `θ`, carried along the path.
    pub frame: Vec<Vec<f64>>,
    /// Set once a radial step has been reflected at the origin.
    pub reflected: bool,
}

impl RotsymState {
    /// Starts at `(r, θ)`; the tangent frame is obtained by Gram–Schmidt of
    /// the coordinate axes `e_1, e_2, …` against `θ`, skipping axes that are
    /// nearly dependent on the vectors already chosen.
    pub fn new(r: f64, theta: Vec<f64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid("r0", format!("must be positive, got {r}")));
        }
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if theta.len() < 2 || !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("theta0", "must be a nonzero vector of length ≥ 2"));
        }
        let theta = normalize(&theta);
        let n = theta.len();
        let mut basis = vec![theta.clone()];
        for axis in 0..n {
            if basis.len() == n {
                break;
            }
            let mut e = vec![0.0; n];
            e[axis] = 1.0;
            if let Some(v) = orthonormalize(&e, &basis, 1e-3) {
                basis.push(v);
            }
        }
        let frame = basis.split_off(1);
        Ok(RotsymState {
            r,
            theta,
            tau: 0.0,
            frame,
            reflected: false,
        })
    }

    /// The state moved by an orthogonal matrix given as rows.
    pub fn rotated(&self, rotation: &[Vec<f64>]) -> RotsymState {
        RotsymState {
            theta: mat_vec(rotation, &self.theta),
            frame: self.frame.iter().map(|v| mat_vec(rotation, v)).collect(),
            ..self.clone()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn orthonormalize(v: &[f64], against: &[Vec<f64>], min_norm: f64) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for b in against {
        let c = dot(&w, b);
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi -= c * bi;
        }
    }
    let norm = dot(&w, &w).sqrt();
    (norm > min_norm).then(|| w.iter().map(|x| x / norm).collect())
}

/// One Euler–Maruyama step of length `dt`.
///
/// The radial increment only reads `radial`; the angular increment is
/// `θ ← normalize(θ + √dτ Σ_j z_j F_j)` with `z_j` from `angular`, the frame
/// `F` is then re-orthonormalised against the new `θ`.
pub fn rotsym_step(
    state: &mut RotsymState,
    model: &WarpModel,
    dt: f64,
    radial: &mut Stream,
    angular: &mut Stream,
) {
    let r = state.r;
    let dtau = (-2.0 * model.warp.log_f(r)).exp() * dt;
    let mut next_r = r + model.radial_drift(r) * dt + dt.sqrt() * normal(radial);
    if next_r <= 0.0 {
        next_r = (-next_r).max(REFLECT_FLOOR);
        state.reflected = true;
    }
    state.r = next_r;

    let scale = dtau.sqrt();
    let mut theta = state.theta.clone();
    for f in &state.frame {
        let z = scale * normal(angular);
        for (t, fi) in theta.iter_mut().zip(f) {
            *t += z * fi;
        }
    }
    state.theta = normalize(&theta);
    let mut basis = vec![state.theta.clone()];
    for f in &state.frame {
        let v = orthonormalize(f, &basis, 0.0).unwrap_or_else(|| f.clone());
        basis.push(v);
    }
    state.frame = basis.split_off(1);
    state.tau += dtau;
}

/// Recorded trajectory of `(r, θ, τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotsymPath {
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub tau: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub reflected: bool,
}

impl RotsymPath {
    pub fn terminal_theta(&self) -> &[f64] {
        self.theta.last().expect("paths hold the initial state")
    }

    /// `sup_{t ∈ [T/2, T]} d(θ_t, θ_T)` against `tol`.
    pub fn angular_certificate(&self, tol: f64) -> ConvergenceCertificate {
        let horizon = *self.times.last().unwrap_or(&0.0);
        let end = self.terminal_theta();
        let sup = self
            .times
            .iter()
            .zip(&self.theta)
            .filter(|(t, _)| **t >= 0.5 * horizon)
            .map(|(_, th)| sphere_distance(th, end))
            .fold(0.0, f64::max);
        ConvergenceCertificate {
            sup_increment: sup,
            window: (0.5 * horizon, horizon),
            tolerance: tol,
            passed: sup < tol,
        }
    }

    /// `τ` at the recorded time closest to `t`.
    pub fn tau_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|s| *s < t).min(self.times.len() - 1);
        self.tau[k]
    }
}

pub fn simulate_rotsym(
    model: &WarpModel,
    start: &RotsymState,
    grid: &TimeGrid,
    radial: &mut Stream,
    angular: &mut Stream,
) -> Result<RotsymPath> {
    grid.validate()?;
    if start.theta.len() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            actual: start.theta.len(),
        });
    }
    let mut state = start.clone();
    let steps = grid.steps();
    let mut path = RotsymPath {
        times: vec![0.0],
        r: vec![state.r],
        tau: vec![state.tau],
        theta: vec![state.theta.clone()],
        reflected: false,
    };
    for k in 0..steps {
        rotsym_step(&mut state, model, grid.dt, radial, angular);
        if !(state.r.is_finite() && state.tau.is_finite()) {
            return Err(Error::Overflow {
                step: k + 1,
                time: grid.time(k + 1),
            });
        }
        if grid.records(k + 1) {
            path.times.push(grid.time(k + 1));
            path.r.push(state.r);
            path.tau.push(state.tau);
            path.theta.push(state.theta.clone());
        }
    }
    path.reflected = state.reflected;
    Ok(path)
}

/// Initial direction of every path of an escape-angle run.
#[derive(Debug, Clone, PartialEq)]
pub enum StartDirection {
    Fixed(Vec<f64>),
    /// Drawn uniformly on the sphere from the path's own start stream.
    Uniform,
}

/// Uniform point on `S^{n-1}`.
pub fn uniform_on_sphere(n: usize, rng: &mut Stream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        if dot(&v, &v) > 1e-12 {
            return normalize(&v);
        }
    }
}

/// CDF of one coordinate of the uniform law on `S^{n-1}`:
/// `(x+1)/2 ~ Beta((n-1)/2, (n-1)/2)`.
pub fn sphere_coordinate_cdf(n: usize) -> Result<impl Fn(f64) -> f64> {
    if n < 2 {
        return Err(invalid("n", "n must be ≥ 2"));
    }
    let a = 0.5 * (n - 1) as f64;
    let beta = Beta::new(a, a).map_err(|e| invalid("n", e.to_string()))?;
    Ok(move |x: f64| beta.cdf(((x + 1.0) / 2.0).clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeSample {
    pub theta_inf: Vec<f64>,
    pub r_terminal: f64,
    pub tau_half: f64,
    pub tau_terminal: f64,
    pub certificate: ConvergenceCertificate,
    pub reflected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeConfig {
    pub r0: f64,
    pub start: StartDirection,
    pub paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub tolerance: f64,
}

/// Terminal angles of `paths` independent runs; refuses models that fail
/// any integrability condition.
pub fn escape_angle_law(
    model: &WarpModel,
    config: &EscapeConfig,
    exec: Execution,
) -> Result<Vec<EscapeSample>> {
    let conditions = check_conditions(model, 1.0)?;
    if !conditions.all() {
        return Err(Error::ConditionsNotMet(conditions.diagnostic()));
    }
    config.grid.validate()?;
    if let StartDirection::Fixed(v) = &config.start {
        RotsymState::new(config.r0, v.clone())?;
        if v.len() != model.n {
            return Err(Error::DimensionMismatch {
                expected: model.n,
                actual: v.len(),
            });
        }
    }
    exec.try_map(config.paths, |i| {
        let path = escape_path(model, config, i).map_err(|e| Error::PathFailed {
            path: i,
            source: Box::new(e),
        })?;
        Ok(EscapeSample {
            theta_inf: path.terminal_theta().to_vec(),
            r_terminal: *path.r.last().unwrap(),
            tau_half: path.tau_at(0.5 * config.grid.horizon),
            tau_terminal: *path.tau.last().unwrap(),
            certificate: path.angular_certificate(config.tolerance),
            reflected: path.reflected,
        })
    })
}

/// Path `index` of an escape-angle run, exactly as sampled by
/// [`escape_angle_law`].
pub fn escape_path(model: &WarpModel, config: &EscapeConfig, index: usize) -> Result<RotsymPath> {
    let i = index as u64;
    let theta0 = match &config.start {
        StartDirection::Fixed(v) => v.clone(),
        StartDirection::Uniform => uniform_on_sphere(model.n, &mut derive_substream(config.seed, i, START)),
    };
    let start = RotsymState::new(config.r0, theta0)?;
    simulate_rotsym(
        model,
        &start,
        &config.grid,
        &mut derive_substream(config.seed, i, RADIAL),
        &mut derive_substream(config.seed, i, ANGULAR),
    )
}

/// Streams `(radial, angular)` used by [`escape_angle_law`] for path `index`.
pub fn path_streams(seed: u64, index: u64) -> (Stream, Stream) {
    (
        derive_substream(seed, index, RADIAL),
        derive_substream(seed, index, ANGULAR),
    )
}
