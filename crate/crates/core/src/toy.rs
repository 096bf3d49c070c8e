//! Three diffusions on `ℝ × ℝ` that separate equivariant from
//! non-equivariant generators.
//!
//! ```text
//! system 1:  dx = dt + e^{-x²} dB,        dg = e^{-x} dt
//! system 2:  dx = dt + e^{-x²} dB,        dg = -g dt
//! system 3:  dx = (1 + g) dt + e^{-x²} dB, dg = e^{-x} dt
//! ```

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::rng::{derive_stream, Stream};
use crate::sde::{integrate_path, Path, PathEnsemble, SdeSpec, TimeGrid};
use crate::stats::{tail_certificate_series, ConvergenceCertificate};

pub const X: usize = 0;
pub const G: usize = 1;

/// Smallest horizon accepted by [`tail_variables`].
pub const MIN_TAIL_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyId {
    One,
    Two,
    Three,
}

impl ToyId {
    pub fn from_number(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ToyId::One),
            2 => Ok(ToyId::Two),
            3 => Ok(ToyId::Three),
            _ => Err(invalid("id", format!("must be 1, 2 or 3, got {id}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ToyId::One => 1,
            ToyId::Two => 2,
            ToyId::Three => 3,
        }
    }
}

/// One of the three systems; `noise` scales the `e^{-x²} dB` term (1 for the
/// systems as written, 0 for their deterministic skeletons).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySystem {
    pub id: ToyId,
    pub noise: f64,
}

impl ToySystem {
    pub fn new(id: ToyId) -> Self {
        ToySystem { id, noise: 1.0 }
    }

    pub fn deterministic(id: ToyId) -> Self {
        ToySystem { id, noise: 0.0 }
    }

    /// `b(x, g)`.
    pub fn drift_at(&self, x: f64, g: f64) -> [f64; 2] {
        match self.id {
            ToyId::One => [1.0, (-x).exp()],
            ToyId::Two => [1.0, -g],
            ToyId::Three => [1.0 + g, (-x).exp()],
        }
    }

    /// `a = σσᵀ`; only the `xx` entry is nonzero.
    pub fn second_order_at(&self, x: f64, _g: f64) -> [[f64; 2]; 2] {
        let s = self.noise * (-x * x).exp();
        [[s * s, 0.0], [0.0, 0.0]]
    }

    pub fn generator(&self) -> GeneratorDescriptor<'_> {
        GeneratorDescriptor {
            drift: Box::new(move |x, g| self.drift_at(x, g)),
            second_order: Box::new(move |x, g| self.second_order_at(x, g)),
        }
    }
}

impl SdeSpec for ToySystem {
    fn dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.drift_at(x[X], x[G]));
    }

    fn diffusion(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out[X] = self.noise * (-x[X] * x[X]).exp();
        out[G] = 0.0;
    }

    fn name(&self) -> &str {
        match self.id {
            ToyId::One => "toy1",
            ToyId::Two => "toy2",
            ToyId::Three => "toy3",
        }
    }
}

/// Euler–Maruyama path of `(x, g)`; system 2 stores the exact `g_0 e^{-t}`.
pub fn simulate_toy(
    system: &ToySystem,
    x0: f64,
    g0: f64,
    grid: &TimeGrid,
    stream: &mut Stream,
) -> Result<Path> {
    let path = integrate_path(system, &[x0, g0], grid, stream)?;
    Ok(exact_g(system, path, g0))
}

fn exact_g(system: &ToySystem, path: Path, g0: f64) -> Path {
    if system.id != ToyId::Two {
        return path;
    }
    let times = path.times().to_vec();
    let mut states = Vec::with_capacity(2 * times.len());
    for (k, t) in times.iter().enumerate() {
        states.push(path.state(k)[X]);
        states.push(g0 * (-t).exp());
    }
    Path::from_parts(2, times, states).expect("same shape")
}

pub fn toy_ensemble(
    system: &ToySystem,
    x0: f64,
    g0: f64,
    paths: usize,
    grid: &TimeGrid,
    seed: u64,
    exec: Execution,
) -> Result<PathEnsemble> {
    let mut ens = crate::sde::run_ensemble(system, &[x0, g0], paths, grid, seed, exec)?;
    ens.paths = ens.paths.into_iter().map(|p| exact_g(system, p, g0)).collect();
    Ok(ens)
}

/// Stream used for path `index` by [`toy_ensemble`].
pub fn toy_stream(seed: u64, index: u64) -> Stream {
    derive_stream(seed, index)
}

/// Terminal values of the convergent tail variables of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub id: ToyId,
    pub g_terminal: f64,
    /// `u_T = x_T - x_0 - T` (systems 1 and 3).
    pub u_terminal: Option<f64>,
    /// `w_T = x_T + log|g_T|` (system 2).
    pub w_terminal: Option<f64>,
    /// `w_T - w_{T/2}` (system 2).
    pub w_increment: Option<f64>,
    pub g_certificate: ConvergenceCertificate,
    pub u_certificate: Option<ConvergenceCertificate>,
    pub w_certificate: Option<ConvergenceCertificate>,
}

pub fn tail_variables(path: &Path, id: ToyId, tol: f64) -> Result<TailReport> {
    let horizon = path.horizon();
    if horizon < MIN_TAIL_HORIZON {
        return Err(invalid(
            "T",
            format!("tail variables need T ≥ {MIN_TAIL_HORIZON}, got {horizon}"),
        ));
    }
    let times = path.times();
    let xs = path.component(X);
    let gs = path.component(G);
    let x0 = xs[0];
    let g_certificate = tail_certificate_series(times, &gs, tol);
    let g_terminal = *gs.last().unwrap();
    let mut report = TailReport {
        id,
        g_terminal,
        u_terminal: None,
        w_terminal: None,
        w_increment: None,
        g_certificate,
        u_certificate: None,
        w_certificate: None,
    };
    match id {
        ToyId::One | ToyId::Three => {
            let us: Vec<f64> = xs.iter().zip(times).map(|(x, t)| x - x0 - t).collect();
            report.u_terminal = us.last().copied();
            report.u_certificate = Some(tail_certificate_series(times, &us, tol));
        }
        ToyId::Two => {
            if gs[0] == 0.0 {
                return Err(invalid("g0", "w = x + log|g| needs g0 ≠ 0"));
            }
            let ws: Vec<f64> = xs.iter().zip(&gs).map(|(x, g)| x + g.abs().ln()).collect();
            let half = path.index_at(0.5 * horizon);
            report.w_terminal = ws.last().copied();
            report.w_increment = Some(ws[ws.len() - 1] - ws[half]);
            report.w_certificate = Some(tail_certificate_series(times, &ws, tol));
        }
    }
    Ok(report)
}

/// Running `⟨u⟩_t = ∫_0^t e^{-2x_s²} ds` (trapezoid rule on recorded points).
pub fn quadratic_variation(path: &Path) -> Vec<f64> {
    let a: Vec<f64> = path.map_states(|s| (-2.0 * s[X] * s[X]).exp());
    let mut out = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..a.len() {
        acc += 0.5 * (path.times()[k] - path.times()[k - 1]) * (a[k] + a[k - 1]);
        out.push(acc);
    }
    out
}

/// Second-order operator `𝓛f = b·∇f + ½ tr(a ∇²f)` given by its coefficients.
pub struct GeneratorDescriptor<'a> {
    pub drift: Box<dyn Fn(f64, f64) -> [f64; 2] + Sync + 'a>,
    pub second_order: Box<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Sync + 'a>,
}

impl GeneratorDescriptor<'_> {
    /// `(𝓛f)(x, g)` from the value of `∇f` and `∇²f` at the same point.
    pub fn apply(&self, x: f64, g: f64, grad: [f64; 2], hess: [[f64; 2]; 2]) -> f64 {
        let b = (self.drift)(x, g);
        let a = (self.second_order)(x, g);
        let mut out = b[0] * grad[0] + b[1] * grad[1];
        for i in 0..2 {
            for j in 0..2 {
                out += 0.5 * a[i][j] * hess[i][j];
            }
        }
        out
    }
}

/// `x^i g^j e^{-x²-g²}` with `i, j ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestFunction {
    pub x_power: u8,
    pub g_power: u8,
}

impl TestFunction {
    /// `{1, x, g, xg} · e^{-x²-g²}`.
    pub fn standard_family() -> [TestFunction; 4] {
        [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(x_power, g_power)| TestFunction { x_power, g_power })
    }

    pub fn label(&self) -> String {
        let p = match (self.x_power, self.g_power) {
            (0, 0) => "",
            (1, 0) => "x·",
            (0, 1) => "g·",
            _ => "xg·",
        };
        format!("{p}exp(-x²-g²)")
    }

    /// Value, gradient and Hessian at `(x, g)`.
    pub fn jet(&self, x: f64, g: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (i, j) = (self.x_power as i32, self.g_power as i32);
        let e = (-x * x - g * g).exp();
        let p = x.powi(i) * g.powi(j);
        let px = if i == 1 { g.powi(j) } else { 0.0 };
        let pg = if j == 1 { x.powi(i) } else { 0.0 };
        let pxg = (i * j) as f64;
        let fx = (px - 2.0 * x * p) * e;
        let fg = (pg - 2.0 * g * p) * e;
        let fxx = (-4.0 * x * px + (4.0 * x * x - 2.0) * p) * e;
        let fgg = (-4.0 * g * pg + (4.0 * g * g - 2.0) * p) * e;
        let fxg = (pxg - 2.0 * g * px - 2.0 * x * pg + 4.0 * x * g * p) * e;
        (p * e, [fx, fg], [[fxx, fxg], [fxg, fgg]])
    }
}

/// Square grid `[lo, hi]²` with the given step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SquareGrid {
    /// `[-3, 3]²` with step `0.25`.
    pub fn standard() -> Self {
        SquareGrid {
            lo: -3.0,
            hi: 3.0,
            step: 0.25,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

/// `max |𝓛(h·f) - h·(𝓛f)|` over test functions and grid, where
/// `(h·f)(x, g) = f(x, g + h)`.
pub fn equivariance_residual(
    generator: &GeneratorDescriptor<'_>,
    h: f64,
    functions: &[TestFunction],
    grid: &SquareGrid,
) -> f64 {
    let pts = grid.points();
    let mut worst: f64 = 0.0;
    for f in functions {
        for &x in &pts {
            for &g in &pts {
                let (_, grad, hess) = f.jet(x, g + h);
                let shifted_first = generator.apply(x, g, grad, hess);
                let then_shifted = generator.apply(x, g + h, grad, hess);
                worst = worst.max((shifted_first - then_shifted).abs());
            }
        }
    }
    worst
}
