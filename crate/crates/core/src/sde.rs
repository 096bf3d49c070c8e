//! Euler–Maruyama integration of Itô SDEs with per-path random streams.

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rng::{derive_stream, fill_normal, Stream};

/// An Itô SDE `dX = b(X, t) dt + σ(X, t) dW` with `W` of dimension
/// [`SdeSpec::noise_dim`].
pub trait SdeSpec: Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, x: &[f64], t: f64, out: &mut [f64]);
    /// Row-major `dim × noise_dim` matrix.
    fn diffusion(&self, x: &[f64], t: f64, out: &mut [f64]);
    fn name(&self) -> &str {
        "sde"
    }
}

/// SDE built from closures; handy for tests and one-off models.
pub struct FnSde<B, S> {
    pub dim: usize,
    pub noise_dim: usize,
    pub drift: B,
    pub diffusion: S,
    pub name: String,
}

impl<B, S> SdeSpec for FnSde<B, S>
where
    B: Fn(&[f64], f64, &mut [f64]) + Sync,
    S: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn drift(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.drift)(x, t, out)
    }
    fn diffusion(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.diffusion)(x, t, out)
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// Time grid of a run: constant step `dt` up to `horizon`, recording every
/// `stride`-th state (the terminal state is always recorded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub stride: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64, stride: usize) -> Result<Self> {
        let grid = TimeGrid {
            horizon,
            dt,
            stride,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid(
                "horizon",
                format!("must be non-negative, got {}", self.horizon),
            ));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    #[inline]
    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    #[inline]
    pub fn records(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride) || step == self.steps()
    }
}

/// A recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Path {
    pub fn with_capacity(dim: usize, points: usize) -> Self {
        Path {
            dim,
            times: Vec::with_capacity(points),
            states: Vec::with_capacity(points * dim),
        }
    }

    /// Builds a path from explicit samples; `states` is row-major.
    pub fn from_parts(dim: usize, times: Vec<f64>, states: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptySample);
        }
        if states.len() != times.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: times.len() * dim,
                actual: states.len(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        Ok(Path { dim, times, states })
    }

    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths are never empty")
    }

    /// Values of one coordinate along the path.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    /// Applies `f` to every recorded state, producing a scalar path.
    pub fn map_states(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.states().map(f).collect()
    }

    /// Index of the first recorded time `>= t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }
}

/// N paths of one model from one master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec_name: String,
    pub master_seed: u64,
    pub paths: Vec<Path>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn terminal(&self, component: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.last()[component]).collect()
    }
}

/// Integrates one path with Euler–Maruyama.
pub fn integrate_path<S: SdeSpec + ?Sized>(
    spec: &S,
    x0: &[f64],
    grid: &TimeGrid,
    rng: &mut Stream,
) -> Result<Path> {
    grid.validate()?;
    let dim = spec.dim();
    let m = spec.noise_dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x0.len(),
        });
    }
    let steps = grid.steps();
    let mut path = Path::with_capacity(dim, steps / grid.stride + 2);
    let mut x = x0.to_vec();
    let mut b = vec![0.0; dim];
    let mut sigma = vec![0.0; dim * m];
    let mut dw = vec![0.0; m];
    path.push(0.0, &x);
    for k in 0..steps {
        let t = grid.time(k);
        spec.drift(&x, t, &mut b);
        spec.diffusion(&x, t, &mut sigma);
        fill_normal(rng, grid.dt, &mut dw);
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &sigma[i * m..(i + 1) * m];
            let noise: f64 = row.iter().zip(&dw).map(|(s, w)| s * w).sum();
            *xi += b[i] * grid.dt + noise;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow {
                step: k + 1,
                time: grid.time(k + 1),
            });
        }
        if grid.records(k + 1) {
            path.push(grid.time(k + 1), &x);
        }
    }
    Ok(path)
}

/// Runs `n` paths; path `i` uses `derive_stream(master_seed, i)`.
pub fn run_ensemble<S: SdeSpec + ?Sized>(
    spec: &S,
    x0: &[f64],
    n: usize,
    grid: &TimeGrid,
    master_seed: u64,
    exec: Execution,
) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(invalid("paths", "must be at least 1"));
    }
    grid.validate()?;
    let paths = exec.try_map(n, |i| {
        let mut rng = derive_stream(master_seed, i as u64);
        integrate_path(spec, x0, grid, &mut rng).map_err(|e| Error::PathFailed {
            path: i,
            source: Box::new(e),
        })
    })?;
    Ok(PathEnsemble {
        spec_name: spec.name().to_string(),
        master_seed,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_fields(
        dim: usize,
        drift: f64,
        diffusion: f64,
    ) -> FnSde<impl Fn(&[f64], f64, &mut [f64]), impl Fn(&[f64], f64, &mut [f64])> {
        FnSde {
            dim,
            noise_dim: dim,
            drift: move |_: &[f64], _: f64, out: &mut [f64]| out.fill(drift),
            diffusion: move |_: &[f64], _: f64, out: &mut [f64]| {
                out.fill(0.0);
                for i in 0..dim {
                    out[i * dim + i] = diffusion;
                }
            },
            name: "constant".into(),
        }
    }

    #[test]
    fn zero_fields_give_constant_path() {
        let spec = constant_fields(1, 0.0, 0.0);
        let grid = TimeGrid::new(1.0, 0.01, 1).unwrap();
        let path = integrate_path(&spec, &[3.0], &grid, &mut derive_stream(1, 0)).unwrap();
        assert_eq!(path.len(), 101);
        assert!(path.states().all(|s| s[0] == 3.0));
    }

    #[test]
    fn unit_drift_reaches_one() {
        let spec = constant_fields(1, 1.0, 0.0);
        let grid = TimeGrid::new(1.0, 1e-3, 10).unwrap();
        let path = integrate_path(&spec, &[0.0], &grid, &mut derive_stream(1, 0)).unwrap();
        approx::assert_abs_diff_eq!(path.last()[0], 1.0, epsilon = 1e-9);
        approx::assert_abs_diff_eq!(path.horizon(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stride_keeps_terminal_state() {
        let spec = constant_fields(1, 1.0, 0.0);
        let grid = TimeGrid::new(1.0, 0.1, 3).unwrap();
        let path = integrate_path(&spec, &[0.0], &grid, &mut derive_stream(1, 0)).unwrap();
        let expected = [0.0, 0.3, 0.6, 0.9, 1.0];
        assert_eq!(path.len(), expected.len());
        for (t, e) in path.times().iter().zip(expected) {
            approx::assert_abs_diff_eq!(*t, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(TimeGrid::new(1.0, 0.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn overflow_names_the_step() {
        let spec = FnSde {
            dim: 1,
            noise_dim: 1,
            drift: |x: &[f64], _: f64, out: &mut [f64]| out[0] = x[0] * x[0],
            diffusion: |_: &[f64], _: f64, out: &mut [f64]| out[0] = 0.0,
            name: "blowup".into(),
        };
        let grid = TimeGrid::new(10.0, 0.1, 1).unwrap();
        let err = integrate_path(&spec, &[10.0], &grid, &mut derive_stream(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Overflow { step, .. } if step > 0 && step < 100));
    }

    #[test]
    fn ensemble_reports_failing_path() {
        let spec = FnSde {
            dim: 1,
            noise_dim: 1,
            drift: |x: &[f64], _: f64, out: &mut [f64]| out[0] = x[0] * x[0],
            diffusion: |_: &[f64], _: f64, out: &mut [f64]| out[0] = 0.0,
            name: "blowup".into(),
        };
        let grid = TimeGrid::new(10.0, 0.1, 1).unwrap();
        let err = run_ensemble(&spec, &[10.0], 3, &grid, 0, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::PathFailed { path: 0, .. }));
    }

    #[test]
    fn same_seed_same_path() {
        let spec = constant_fields(2, 0.5, 1.0);
        let grid = TimeGrid::new(2.0, 0.01, 5).unwrap();
        let a = integrate_path(&spec, &[0.0, 1.0], &grid, &mut derive_stream(9, 4)).unwrap();
        let b = integrate_path(&spec, &[0.0, 1.0], &grid, &mut derive_stream(9, 4)).unwrap();
        assert_eq!(a, b);
    }
}
