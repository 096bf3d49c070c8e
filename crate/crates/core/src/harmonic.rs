//! Bounded harmonic functions `H(x, g) = E_{(x,g)}[ψ(g_∞)]` by Monte Carlo,
//! the tower-property check and the boundary-law equivariance test.

use rand::RngCore;

use crate::dudley::{dudley_fields, estimate_boundary, DudleyParams, Layout};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rng::{derive_stream, derive_substream, stream_key, Stream};
use crate::rotsym::{simulate_rotsym, RotsymState, WarpModel};
use crate::sde::{integrate_path, TimeGrid};
use crate::stats::{ks_two_sample, mean_and_se};
use crate::toy::{simulate_toy, ToySystem, G};

/// Fraction of unconverged paths above which an estimate carries a warning.
pub const UNCONVERGED_WARNING: f64 = 0.2;

/// Terminal boundary value of one path and whether its tail certificate passed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub value: Vec<f64>,
    pub converged: bool,
}

/// A diffusion whose boundary variable can be sampled from any state.
pub trait BoundaryModel: Sync {
    fn name(&self) -> &str;

    /// State reached after running over `grid`.
    fn advance(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<Vec<f64>>;

    /// Boundary value read off a path of length `grid.horizon`.
    fn boundary(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<BoundarySample>;

    /// Action of a group element on a state, if the fibre carries one.
    fn act_on_state(&self, _h: &[f64], _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Action of a group element on a boundary value.
    fn act_on_boundary(&self, _h: &[f64], _b: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Dudley's diffusion with boundary `(h_∞, δ_∞)` and group `ℝ^{d-1} × ℝ`
/// acting by translation of `(h, δ)`.
#[derive(Debug, Clone, Copy)]
pub struct DudleyBoundaryModel {
    pub params: DudleyParams,
    pub tolerance: f64,
}

impl BoundaryModel for DudleyBoundaryModel {
    fn name(&self) -> &str {
        "dudley"
    }

    fn advance(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<Vec<f64>> {
        Ok(integrate_path(&dudley_fields(self.params), x, grid, rng)?.last().to_vec())
    }

    fn boundary(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<BoundarySample> {
        let path = integrate_path(&dudley_fields(self.params), x, grid, rng)?;
        let b = estimate_boundary(&path, self.tolerance);
        let mut value = b.h_inf;
        value.push(b.delta_inf);
        Ok(BoundarySample {
            value,
            converged: b.converged,
        })
    }

    fn act_on_state(&self, h: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        let l = self.params.layout();
        if h.len() != self.params.d() {
            return None;
        }
        let mut y = x.to_vec();
        for (i, c) in l.h_range().enumerate() {
            y[c] += h[i];
        }
        y[l.delta()] += h[self.params.d() - 1];
        Some(y)
    }

    fn act_on_boundary(&self, h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        (h.len() == b.len()).then(|| b.iter().zip(h).map(|(x, y)| x + y).collect())
    }
}

impl DudleyBoundaryModel {
    pub fn layout(&self) -> Layout {
        self.params.layout()
    }
}

/// A toy system with boundary `g_∞` and `ℝ` acting by translation of `g`.
#[derive(Debug, Clone, Copy)]
pub struct ToyBoundaryModel {
    pub system: ToySystem,
    pub tolerance: f64,
}

impl BoundaryModel for ToyBoundaryModel {
    fn name(&self) -> &str {
        "toy"
    }

    fn advance(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<Vec<f64>> {
        Ok(simulate_toy(&self.system, x[0], x[1], grid, rng)?.last().to_vec())
    }

    fn boundary(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<BoundarySample> {
        let path = simulate_toy(&self.system, x[0], x[1], grid, rng)?;
        let cert = crate::stats::tail_certificate(&path, G, self.tolerance);
        Ok(BoundarySample {
            value: vec![path.last()[G]],
            converged: cert.passed,
        })
    }

    fn act_on_state(&self, h: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        (h.len() == 1).then(|| vec![x[0], x[1] + h[0]])
    }

    fn act_on_boundary(&self, h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        (h.len() == 1).then(|| vec![b[0] + h[0]])
    }
}

/// Brownian motion on a warped product, state `(r, θ)`, boundary `θ_∞`.
#[derive(Debug, Clone)]
pub struct RotsymBoundaryModel {
    pub model: WarpModel,
    pub tolerance: f64,
}

impl RotsymBoundaryModel {
    fn run(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<crate::rotsym::RotsymPath> {
        let start = RotsymState::new(x[0], x[1..].to_vec())?;
        let key = rng.next_u64();
        simulate_rotsym(
            &self.model,
            &start,
            grid,
            &mut derive_substream(key, 0, 0),
            &mut derive_substream(key, 0, 1),
        )
    }
}

impl BoundaryModel for RotsymBoundaryModel {
    fn name(&self) -> &str {
        "rotsym"
    }

    fn advance(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<Vec<f64>> {
        let p = self.run(x, grid, rng)?;
        let mut y = vec![*p.r.last().unwrap()];
        y.extend_from_slice(p.terminal_theta());
        Ok(y)
    }

    fn boundary(&self, x: &[f64], grid: &TimeGrid, rng: &mut Stream) -> Result<BoundarySample> {
        let p = self.run(x, grid, rng)?;
        Ok(BoundarySample {
            value: p.terminal_theta().to_vec(),
            converged: p.angular_certificate(self.tolerance).passed,
        })
    }
}

/// Bounded functional `ψ` of a boundary value, from a closed library.
#[derive(Debug, Clone, PartialEq)]
pub enum Psi {
    Constant(f64),
    /// `1{b[coord] > threshold}`.
    HalfSpace { coord: usize, threshold: f64 },
    /// `1{lo ≤ b ≤ hi}` coordinatewise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `exp(1 - 1/(1 - |b - c|²/ρ²))` inside the ball, 0 outside.
    Bump { center: Vec<f64>, radius: f64 },
    Sum(Vec<(f64, Psi)>),
}

impl Psi {
    pub fn bound(&self) -> f64 {
        match self {
            Psi::Constant(c) => c.abs(),
            Psi::HalfSpace { .. } | Psi::Box { .. } | Psi::Bump { .. } => 1.0,
            Psi::Sum(terms) => terms.iter().map(|(w, p)| w.abs() * p.bound()).sum(),
        }
    }

    pub fn eval(&self, b: &[f64]) -> f64 {
        let ind = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            Psi::Constant(c) => *c,
            Psi::HalfSpace { coord, threshold } => ind(b[*coord] > *threshold),
            Psi::Box { lo, hi } => ind(b.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| l <= x && x <= h)),
            Psi::Bump { center, radius } => {
                let s: f64 = b.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() / (radius * radius);
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Psi::Sum(terms) => terms.iter().map(|(w, p)| w * p.eval(b)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    pub samples: Vec<BoundarySample>,
}

impl BoundarySamples {
    pub fn unconverged(&self) -> usize {
        self.samples.iter().filter(|s| !s.converged).count()
    }

    /// Coordinate `c` of every sample.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.value[c]).collect()
    }
}

/// Boundary values of `n` paths from `start`; path `i` uses stream `(seed, i)`.
pub fn boundary_samples<M: BoundaryModel + ?Sized>(
    model: &M,
    start: &[f64],
    n: usize,
    grid: &TimeGrid,
    seed: u64,
    exec: Execution,
) -> Result<BoundarySamples> {
    grid.validate()?;
    let samples = exec.try_map(n, |i| {
        model
            .boundary(start, grid, &mut derive_stream(seed, i as u64))
            .map_err(|e| Error::PathFailed {
                path: i,
                source: Box::new(e),
            })
    })?;
    Ok(BoundarySamples { samples })
}

/// Mean of `ψ` over converged paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub unconverged: usize,
    /// More than 20% of paths failed their tail certificate.
    pub warning: bool,
}

pub fn estimate(samples: &BoundarySamples, psi: &Psi) -> HarmonicEstimate {
    let values: Vec<f64> = samples
        .samples
        .iter()
        .filter(|s| s.converged)
        .map(|s| psi.eval(&s.value))
        .collect();
    let total = samples.samples.len();
    let unconverged = samples.unconverged();
    let (value, std_error) = if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_and_se(&values)
    };
    HarmonicEstimate {
        value,
        std_error,
        n: values.len(),
        unconverged,
        warning: total > 0 && unconverged as f64 > UNCONVERGED_WARNING * total as f64,
    }
}

pub fn mc_harmonic<M: BoundaryModel + ?Sized>(
    model: &M,
    start: &[f64],
    psi: &Psi,
    n: usize,
    grid: &TimeGrid,
    seed: u64,
    exec: Execution,
) -> Result<HarmonicEstimate> {
    Ok(estimate(&boundary_samples(model, start, n, grid, seed, exec)?, psi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerConfig {
    /// Paths for the direct estimate of `H(start)`.
    pub direct_paths: usize,
    /// Number of intermediate states `X_{t_mid}`.
    pub outer: usize,
    /// Paths per re-estimate of `H(X_{t_mid})`.
    pub inner: usize,
    pub t_mid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerReport {
    pub direct: HarmonicEstimate,
    pub nested_value: f64,
    pub nested_std_error: f64,
    pub combined_std_error: f64,
    pub inner_estimates: Vec<f64>,
    pub agree: bool,
}

/// `H(x) = E[H(X_t)]`: compares a direct estimate with the mean of inner
/// re-estimates at `outer` states reached at `t_mid`.
pub fn tower_check<M: BoundaryModel + ?Sized>(
    model: &M,
    start: &[f64],
    psi: &Psi,
    config: &TowerConfig,
    grid: &TimeGrid,
    seed: u64,
    exec: Execution,
) -> Result<TowerReport> {
    if config.outer < 2 {
        return Err(invalid("outer", "need at least 2 intermediate states"));
    }
    let mid_grid = TimeGrid::new(config.t_mid, grid.dt, usize::MAX)?;
    let direct = mc_harmonic(model, start, psi, config.direct_paths, grid, stream_key(seed, 0), exec)?;
    let inner_estimates = exec.try_map(config.outer, |i| {
        let mid = model.advance(start, &mid_grid, &mut derive_substream(seed, i as u64, 1))?;
        let inner_seed = stream_key(stream_key(seed, 2), i as u64);
        let est = mc_harmonic(model, &mid, psi, config.inner, grid, inner_seed, Execution::Sequential)?;
        Ok::<f64, Error>(est.value)
    })?;
    let (nested_value, nested_std_error) = mean_and_se(&inner_estimates);
    let combined = (direct.std_error.powi(2) + nested_std_error.powi(2)).sqrt();
    Ok(TowerReport {
        agree: (direct.value - nested_value).abs() <= 3.0 * combined,
        direct,
        nested_value,
        nested_std_error,
        combined_std_error: combined,
        inner_estimates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsCoordinate {
    pub coordinate: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub coordinates: Vec<KsCoordinate>,
    pub n: usize,
    /// Boundary values from the translated start.
    pub moved: BoundarySamples,
    /// Translated boundary values from the original start.
    pub shifted: BoundarySamples,
}

impl EquivarianceReport {
    pub fn min_p(&self) -> f64 {
        self.coordinates.iter().map(|c| c.p_value).fold(1.0, f64::min)
    }
}

/// Per-coordinate two-sample KS between the boundary law from `h·start`
/// (seed `seed_a`) and `h·` applied to the boundary law from `start`
/// (seed `seed_b`).
#[allow(clippy::too_many_arguments)]
pub fn boundary_law_equivariance<M: BoundaryModel + ?Sized>(
    model: &M,
    start: &[f64],
    h: &[f64],
    n: usize,
    grid: &TimeGrid,
    seed_a: u64,
    seed_b: u64,
    exec: Execution,
) -> Result<EquivarianceReport> {
    let moved = model
        .act_on_state(h, start)
        .ok_or_else(|| invalid("h", format!("{} has no group action of this shape", model.name())))?;
    let a = boundary_samples(model, &moved, n, grid, seed_a, exec)?;
    let b = boundary_samples(model, start, n, grid, seed_b, exec)?;
    let shifted = BoundarySamples {
        samples: b
            .samples
            .iter()
            .map(|s| {
                let value = model
                    .act_on_boundary(h, &s.value)
                    .ok_or_else(|| invalid("h", "boundary action undefined"))?;
                Ok(BoundarySample {
                    value,
                    converged: s.converged,
                })
            })
            .collect::<Result<_>>()?,
    };
    let dims = a.samples.first().map_or(0, |s| s.value.len());
    let coordinates = (0..dims)
        .map(|c| {
            let xs = a.coordinate(c);
            let ys = shifted.coordinate(c);
            let (statistic, p_value) = ks_two_sample(&xs, &ys)?;
            Ok(KsCoordinate {
                coordinate: c,
                statistic,
                p_value,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EquivarianceReport {
        coordinates,
        n,
        moved: a,
        shifted,
    })
}
