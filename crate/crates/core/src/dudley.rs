//! Dudley's relativistic diffusion in horospherical coordinates.
//!
//! The state `(α, β, γ, h, δ)` is related to phase space by
//! `ξ̇ = T_h D_α e_0` and `ξ = T_h(β(e_0+e_1)/2 + δ(e_0-e_1)/2 - Σ γ^i e_{i+1})`,
//! i.e. `β = q(T_h⁻¹ξ, e_0-e_1)`, `δ = q(T_h⁻¹ξ, e_0+e_1)` and
//! `γ^i = q(T_h⁻¹ξ, e_{i+1})`. In these coordinates
//!
//! ```text
//! dα = σ dW + ½σ²(d-1) dt
//! dβ = e^α dt
//! dγ = σ e^{-α} β dB
//! dh = σ e^{-α} dB
//! dδ = (e^{-α} + σ²(d-1) β e^{-2α}) dt + 2σ e^{-α} γ·dB
//! ```
//!
//! `β` grows like `e^α`, so it is carried as `log β` together with
//! `u = β e^{-α}`, itself integrated as `log u`. The increments of `log β`
//! and `log u` are built from the same drift evaluation, which keeps
//! `log u - log β + α` constant up to rounding.

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::minkowski::{
    iwasawa_point, lightlike_decompose, lightlike_recompose, normalize, sphere_distance,
    stereographic, translation_matrix, HyperboloidPoint, IwasawaCoords, LightlikeParts,
    MinkowskiVector,
};
use crate::sde::{Path, SdeSpec};
use crate::stats::{tail_certificate_series, ConvergenceCertificate};

/// Largest `log β` for which phase space is reconstructed.
pub const MAX_LOG_BETA: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DudleyParams {
    d: usize,
    sigma: f64,
}

impl DudleyParams {
    pub fn new(d: usize, sigma: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", "d must be ≥ 2"));
        }
        ensure_positive("sigma", sigma)?;
        Ok(DudleyParams { d, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Almost-sure growth rate of `α_t / t` (and of `r_t / t`).
    pub fn alpha_rate(&self) -> f64 {
        0.5 * self.sigma * self.sigma * (self.d - 1) as f64
    }

    pub fn layout(&self) -> Layout {
        Layout { d: self.d }
    }
}

/// Index map of the flat state vector `(α, log β, γ, h, δ, log u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    d: usize,
}

impl Layout {
    pub const ALPHA: usize = 0;
    pub const LOG_BETA: usize = 1;

    pub fn dim(&self) -> usize {
        2 * self.d + 2
    }

    /// Number of noise components: `W` then the `(d-1)`-block `B`.
    pub fn noise_dim(&self) -> usize {
        self.d
    }

    pub fn gamma(&self, i: usize) -> usize {
        2 + i
    }

    pub fn h(&self, i: usize) -> usize {
        self.d + 1 + i
    }

    pub fn delta(&self) -> usize {
        2 * self.d
    }

    pub fn log_u(&self) -> usize {
        2 * self.d + 1
    }

    pub fn h_range(&self) -> std::ops::Range<usize> {
        self.h(0)..self.h(self.d - 1)
    }

    pub fn gamma_range(&self) -> std::ops::Range<usize> {
        self.gamma(0)..self.gamma(self.d - 1)
    }
}

/// A point of Dudley's diffusion in horospherical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DudleyState {
    pub alpha: f64,
    pub log_beta: f64,
    pub gamma: Vec<f64>,
    pub h: Vec<f64>,
    pub delta: f64,
    /// Co-integrated `u = β e^{-α}`.
    pub u: f64,
}

impl DudleyState {
    /// State with `u` set from `β e^{-α}`; requires `β > 0`.
    pub fn new(alpha: f64, beta: f64, gamma: Vec<f64>, h: Vec<f64>, delta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        if gamma.len() != h.len() || h.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: h.len().max(1),
                actual: gamma.len(),
            });
        }
        let log_beta = beta.ln();
        Ok(DudleyState {
            alpha,
            log_beta,
            gamma,
            h,
            delta,
            u: (log_beta - alpha).exp(),
        })
    }

    /// `ξ̇ = e_0`, `ξ = β(e_0+e_1)/2 + δ(e_0-e_1)/2`.
    pub fn origin(d: usize, beta: f64, delta: f64) -> Result<Self> {
        Self::new(0.0, beta, vec![0.0; d - 1], vec![0.0; d - 1], delta)
    }

    pub fn d(&self) -> usize {
        self.h.len() + 1
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.d() + 2);
        v.push(self.alpha);
        v.push(self.log_beta);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.h);
        v.push(self.delta);
        v.push(self.u.ln());
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let d = (x.len() - 2) / 2;
        let l = Layout { d };
        DudleyState {
            alpha: x[Layout::ALPHA],
            log_beta: x[Layout::LOG_BETA],
            gamma: x[l.gamma_range()].to_vec(),
            h: x[l.h_range()].to_vec(),
            delta: x[l.delta()],
            u: x[l.log_u()].exp(),
        }
    }

    /// Coordinates of a phase-space point; fails if `β ≤ 0`.
    pub fn from_phase(velocity: &HyperboloidPoint, position: &MinkowskiVector) -> Result<Self> {
        let v = velocity.vector().components();
        let alpha = (v[0] + v[1]).ln();
        let scale = (-alpha).exp();
        let h: Vec<f64> = v[2..].iter().map(|x| x * scale).collect();
        let neg_h: Vec<f64> = h.iter().map(|x| -x).collect();
        let eta = lightlike_decompose(&translation_matrix(&neg_h).apply(position));
        let gamma = eta.perp.iter().map(|x| -x).collect();
        Self::new(alpha, eta.plus, gamma, h, eta.minus)
    }

    /// `|u - β e^{-α}|` relative to `max(1, u)`.
    pub fn u_residual(&self) -> f64 {
        (self.u - (self.log_beta - self.alpha).exp()).abs() / self.u.max(1.0)
    }

    /// Hyperbolic distance of `ξ̇` to `e_0`, computed without overflow.
    pub fn radius(&self) -> f64 {
        self.alpha + self.radius_factor().ln()
    }

    /// `K` with `e^r = e^α K`.
    fn radius_factor(&self) -> f64 {
        let s = 1.0 + self.h_norm2();
        let b = (-2.0 * self.alpha).exp();
        let x = 0.5 * (s - b);
        0.5 * (s + b) + (x * x + self.h_norm2() * b).sqrt()
    }

    fn h_norm2(&self) -> f64 {
        self.h.iter().map(|x| x * x).sum()
    }

    /// Polar angle `θ_t` of `ξ̇`, in `span(e_1..e_d)`.
    pub fn polar_angle(&self) -> Vec<f64> {
        let b = (-2.0 * self.alpha).exp();
        let mut v = Vec::with_capacity(self.d());
        v.push(0.5 * (1.0 - self.h_norm2()) - 0.5 * b);
        v.extend_from_slice(&self.h);
        normalize(&v)
    }

    /// `q(ξ, e_0 + θ_t)` with `θ_t` the polar angle of `ξ̇`, in closed form.
    ///
    /// Writing `w = T_h⁻¹(e_0 + θ_t)`, its light-cone parts are
    /// `w⁺ = 2(K-b)/(K²-b)`, `w⁻ = 2(K-s)/(e^{2r}-1)` and
    /// `w^⊥ = 2h/(e^{2r}-1)` with `s = 1+|h|²`, `b = e^{-2α}`, `e^r = e^α K`.
    /// Evaluating `q` on these avoids the `e^{2α}` cancellation of the
    /// Cartesian product.
    pub fn hyperplane_offset(&self) -> f64 {
        let h2 = self.h_norm2();
        let s = 1.0 + h2;
        let b = (-2.0 * self.alpha).exp();
        let k = self.radius_factor();
        let r = self.alpha + k.ln();
        let x = 0.5 * (s - b);
        let k_minus_s = if x > 0.0 {
            h2 * b / (x + (x * x + h2 * b).sqrt())
        } else {
            (x * x + h2 * b).sqrt() - x
        };
        // ln(e^{2r} - 1)
        let log_e2r_m1 = 2.0 * r + (-(-2.0 * r).exp_m1()).ln();
        let w_plus = 2.0 * (k - b) / (k * k - b);
        let beta_w_minus = if k_minus_s > 0.0 {
            (self.log_beta + (2.0 * k_minus_s).ln() - log_e2r_m1).exp()
        } else {
            0.0
        };
        let perp_scale = 2.0 * (-log_e2r_m1).exp();
        // η^⊥ = -γ and q subtracts η^⊥·w^⊥.
        let gamma_term: f64 = self
            .gamma
            .iter()
            .zip(&self.h)
            .map(|(g, h)| g * perp_scale * h)
            .sum();
        0.5 * (beta_w_minus + self.delta * w_plus) + gamma_term
    }
}

/// Drift and diffusion of Dudley's diffusion on `(α, log β, γ, h, δ, log u)`.
#[derive(Debug, Clone, Copy)]
pub struct DudleyFields {
    params: DudleyParams,
    layout: Layout,
}

pub fn dudley_fields(params: DudleyParams) -> DudleyFields {
    DudleyFields {
        params,
        layout: params.layout(),
    }
}

impl DudleyFields {
    pub fn params(&self) -> DudleyParams {
        self.params
    }
}

impl SdeSpec for DudleyFields {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn noise_dim(&self) -> usize {
        self.layout.noise_dim()
    }

    fn drift(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let l = self.layout;
        let sigma2 = self.params.sigma * self.params.sigma;
        let dm1 = (self.params.d - 1) as f64;
        let alpha = x[Layout::ALPHA];
        let u = x[l.log_u()].exp();
        let e_ma = (-alpha).exp();
        let beta_rate = (alpha - x[Layout::LOG_BETA]).exp();
        out.fill(0.0);
        out[Layout::ALPHA] = 0.5 * sigma2 * dm1;
        out[Layout::LOG_BETA] = beta_rate;
        out[l.delta()] = e_ma + sigma2 * dm1 * u * e_ma;
        out[l.log_u()] = beta_rate - 0.5 * sigma2 * dm1;
    }

    fn diffusion(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let l = self.layout;
        let m = l.noise_dim();
        let sigma = self.params.sigma;
        let e_ma = (-x[Layout::ALPHA]).exp();
        let u = x[l.log_u()].exp();
        out.fill(0.0);
        out[Layout::ALPHA * m] = sigma;
        out[l.log_u() * m] = -sigma;
        for i in 0..self.params.d - 1 {
            let col = 1 + i;
            out[l.gamma(i) * m + col] = sigma * u;
            out[l.h(i) * m + col] = sigma * e_ma;
            out[l.delta() * m + col] = 2.0 * sigma * e_ma * x[l.gamma(i)];
        }
    }

    fn name(&self) -> &str {
        "dudley"
    }
}

/// Velocity `ξ̇` and position `ξ` of a state.
pub fn reconstruct_phase(state: &DudleyState) -> Result<(HyperboloidPoint, MinkowskiVector)> {
    if state.log_beta > MAX_LOG_BETA {
        return Err(Error::Range(format!(
            "log β = {} exceeds {MAX_LOG_BETA}",
            state.log_beta
        )));
    }
    let velocity = iwasawa_point(&IwasawaCoords {
        alpha: state.alpha,
        h: state.h.clone(),
    });
    let inner = lightlike_recompose(&LightlikeParts {
        plus: state.beta(),
        minus: state.delta,
        perp: state.gamma.iter().map(|g| -g).collect(),
    });
    let position = translation_matrix(&state.h).apply(&inner);
    Ok((velocity, position))
}

/// Asymptotic boundary variables of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct DudleyBoundary {
    pub h_inf: Vec<f64>,
    pub delta_inf: f64,
    pub theta_inf: Vec<f64>,
    pub r_inf: f64,
    pub certificate: ConvergenceCertificate,
    pub converged: bool,
}

impl DudleyBoundary {
    pub fn from_terminal(h_inf: Vec<f64>, delta_inf: f64, certificate: ConvergenceCertificate) -> Self {
        let h2: f64 = h_inf.iter().map(|x| x * x).sum();
        DudleyBoundary {
            theta_inf: stereographic(&h_inf),
            r_inf: delta_inf / (1.0 + h2),
            h_inf,
            delta_inf,
            converged: certificate.passed,
            certificate,
        }
    }
}

/// Terminal `(h, δ)` with a sup-increment certificate over `[T/2, T]`.
pub fn estimate_boundary(path: &Path, tail_tol: f64) -> DudleyBoundary {
    let l = Layout {
        d: (path.dim() - 2) / 2,
    };
    let certs: Vec<_> = l
        .h_range()
        .chain(std::iter::once(l.delta()))
        .map(|c| tail_certificate_series(path.times(), &path.component(c), tail_tol))
        .collect();
    let last = path.last();
    DudleyBoundary::from_terminal(
        last[l.h_range()].to_vec(),
        last[l.delta()],
        ConvergenceCertificate::worst(&certs).expect("d ≥ 2"),
    )
}

/// Residuals between the two descriptions of the boundary at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemarkLink {
    /// Great-circle distance between the polar angle of `ξ̇` and the
    /// stereographic image of `h`.
    pub angular_residual: f64,
    /// `q(ξ, e_0 + θ)` with `θ` the polar angle of `ξ̇`.
    pub r_direct: f64,
    /// `δ / (1 + |h|²)`.
    pub r_from_delta: f64,
    pub relative_error: f64,
}

pub fn check_remark_link(state: &DudleyState) -> RemarkLink {
    let theta = state.polar_angle();
    let angular_residual = sphere_distance(&theta, &stereographic(&state.h));
    let r_direct = state.hyperplane_offset();
    let h2: f64 = state.h.iter().map(|x| x * x).sum();
    let r_from_delta = state.delta / (1.0 + h2);
    RemarkLink {
        angular_residual,
        r_direct,
        r_from_delta,
        relative_error: (r_direct - r_from_delta).abs() / r_from_delta.abs(),
    }
}

/// Running `∫_0^t u_s² ds` at the recorded times (trapezoid rule).
pub fn u_squared_clock(path: &Path) -> Vec<f64> {
    let l = Layout {
        d: (path.dim() - 2) / 2,
    };
    let u2: Vec<f64> = path.map_states(|s| (2.0 * s[l.log_u()]).exp());
    let mut clock = Vec::with_capacity(u2.len());
    let mut acc = 0.0;
    clock.push(0.0);
    for k in 1..u2.len() {
        let dt = path.times()[k] - path.times()[k - 1];
        acc += 0.5 * dt * (u2[k] + u2[k - 1]);
        clock.push(acc);
    }
    clock
}
