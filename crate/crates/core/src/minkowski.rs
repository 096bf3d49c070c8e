//! Linear algebra of Minkowski space `ℝ^{1,d}`: the Lorentz form, the
//! parabolic translations `T_h` and boosts `D_α`, the Iwasawa chart of the
//! hyperboloid, light-like decomposition and stereographic projection.
//!
//! Component 0 is time-like; `e_1` is the distinguished light direction of the
//! Iwasawa chart and `e_2..e_d` carry the translation parameter `h`.

use crate::error::{invalid, Error, Result};

/// A vector of `ℝ^{1,d}`, `d >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiVector(Vec<f64>);

impl MinkowskiVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 3 {
            return Err(invalid(
                "d",
                format!("must be ≥ 2, got {}", components.len() as isize - 1),
            ));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::Range("non-finite Minkowski component".into()));
        }
        Ok(MinkowskiVector(components))
    }

    /// Basis vector `e_i` of `ℝ^{1,d}`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d + 1];
        v[i] = 1.0;
        MinkowskiVector(v)
    }

    pub fn zero(d: usize) -> Self {
        MinkowskiVector(vec![0.0; d + 1])
    }

    /// Spatial dimension `d`.
    pub fn d(&self) -> usize {
        self.0.len() - 1
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_components(self) -> Vec<f64> {
        self.0
    }

    pub fn spatial(&self) -> &[f64] {
        &self.0[1..]
    }

    /// Lorentz bilinear form `ξ⁰η⁰ - Σ ξⁱηⁱ`.
    pub fn lorentz(&self, other: &MinkowskiVector) -> Result<f64> {
        if self.0.len() != other.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                actual: other.0.len(),
            });
        }
        Ok(lorentz_raw(&self.0, &other.0))
    }

    /// Lorentz quadratic form `q(ξ) = q(ξ, ξ)`.
    pub fn q(&self) -> f64 {
        lorentz_raw(&self.0, &self.0)
    }

    pub fn add(&self, other: &MinkowskiVector) -> MinkowskiVector {
        MinkowskiVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &MinkowskiVector) -> MinkowskiVector {
        MinkowskiVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> MinkowskiVector {
        MinkowskiVector(self.0.iter().map(|a| a * s).collect())
    }

    /// Euclidean norm of the components; sets the scale of rounding errors.
    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[inline]
pub(crate) fn lorentz_raw(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] - a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
}

/// Relative on-sheet tolerance of [`HyperboloidPoint`].
pub const ON_SHEET_TOL: f64 = 1e-9;

/// A point of the upper sheet `ℍ^d = {q(ξ) = 1, ξ⁰ > 0}`.
///
/// The sheet constraint is checked relative to `max(1, |ξ|²)`, the scale at
/// which `q` can be evaluated in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperboloidPoint(MinkowskiVector);

impl HyperboloidPoint {
    pub fn new(v: MinkowskiVector) -> Result<Self> {
        let scale = v.euclidean_norm().powi(2).max(1.0);
        if v.0[0] <= 0.0 || (v.q() - 1.0).abs() > ON_SHEET_TOL * scale {
            return Err(Error::Range(format!(
                "not on the upper hyperboloid sheet: q = {}, ξ⁰ = {}",
                v.q(),
                v.0[0]
            )));
        }
        Ok(HyperboloidPoint(v))
    }

    pub fn vector(&self) -> &MinkowskiVector {
        &self.0
    }

    /// Hyperbolic distance to `e_0`, `arccosh(ξ⁰)`.
    pub fn radius(&self) -> f64 {
        self.0 .0[0].max(1.0).acosh()
    }

    /// Polar angle: the normalised spatial part.
    pub fn polar_angle(&self) -> Vec<f64> {
        normalize(self.0.spatial())
    }
}

pub(crate) fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Dense row-major `(d+1) × (d+1)` matrix acting on `ℝ^{1,d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMatrix {
    n: usize,
    data: Vec<f64>,
}

impl LorentzMatrix {
    pub fn identity(d: usize) -> Self {
        let n = d + 1;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        LorentzMatrix { n, data }
    }

    pub fn d(&self) -> usize {
        self.n - 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn mul(&self, other: &LorentzMatrix) -> LorentzMatrix {
        assert_eq!(self.n, other.n, "matrix dimension mismatch");
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        LorentzMatrix { n, data }
    }

    pub fn apply(&self, v: &MinkowskiVector) -> MinkowskiVector {
        assert_eq!(self.n, v.0.len(), "matrix/vector dimension mismatch");
        let n = self.n;
        MinkowskiVector(
            (0..n)
                .map(|i| (0..n).map(|j| self.data[i * n + j] * v.0[j]).sum())
                .collect(),
        )
    }

    /// `max |(Mᵀ η M - η)_{ij}|` with `η = diag(1, -1, …, -1)`.
    pub fn isometry_defect(&self) -> f64 {
        let n = self.n;
        let eta = |i: usize| if i == 0 { 1.0 } else { -1.0 };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.get(k, i) * eta(k) * self.get(k, j)).sum();
                let target = if i == j { eta(i) } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Largest elementwise difference.
    pub fn max_abs_diff(&self, other: &LorentzMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

/// Parabolic translation `T_h`, `h ∈ ℝ^{d-1}`.
pub fn translation_matrix(h: &[f64]) -> LorentzMatrix {
    let d = h.len() + 1;
    let h2: f64 = h.iter().map(|x| x * x).sum();
    let mut m = LorentzMatrix::identity(d);
    m.set(0, 0, 1.0 + 0.5 * h2);
    m.set(0, 1, 0.5 * h2);
    m.set(1, 0, -0.5 * h2);
    m.set(1, 1, 1.0 - 0.5 * h2);
    for (i, &hi) in h.iter().enumerate() {
        m.set(0, i + 2, hi);
        m.set(1, i + 2, -hi);
        m.set(i + 2, 0, hi);
        m.set(i + 2, 1, hi);
    }
    m
}

/// Boost `D_α` in the `(e_0, e_1)` plane of `ℝ^{1,d}`.
pub fn boost_matrix(alpha: f64, d: usize) -> LorentzMatrix {
    let mut m = LorentzMatrix::identity(d);
    let (c, s) = (alpha.cosh(), alpha.sinh());
    m.set(0, 0, c);
    m.set(0, 1, s);
    m.set(1, 0, s);
    m.set(1, 1, c);
    m
}

/// Iwasawa coordinates `(α, h)` of `ℍ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct IwasawaCoords {
    pub alpha: f64,
    pub h: Vec<f64>,
}

/// The point `T_h D_α e_0`, evaluated from its closed form.
pub fn iwasawa_point(c: &IwasawaCoords) -> HyperboloidPoint {
    let h2: f64 = c.h.iter().map(|x| x * x).sum();
    let (ea, ema) = (c.alpha.exp(), (-c.alpha).exp());
    let mut v = Vec::with_capacity(c.h.len() + 2);
    v.push(0.5 * ea * (1.0 + h2) + 0.5 * ema);
    v.push(0.5 * ea * (1.0 - h2) - 0.5 * ema);
    v.extend(c.h.iter().map(|x| ea * x));
    HyperboloidPoint(MinkowskiVector(v))
}

/// Coefficients of `ξ` along `e_0 ± e_1` and the spatial block `e_2..e_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightlikeParts {
    /// `q(ξ, e_0 - e_1) = ξ⁰ + ξ¹`.
    pub plus: f64,
    /// `q(ξ, e_0 + e_1) = ξ⁰ - ξ¹`.
    pub minus: f64,
    /// `ξ², …, ξ^d`.
    pub perp: Vec<f64>,
}

pub fn lightlike_decompose(xi: &MinkowskiVector) -> LightlikeParts {
    let c = &xi.0;
    LightlikeParts {
        plus: c[0] + c[1],
        minus: c[0] - c[1],
        perp: c[2..].to_vec(),
    }
}

/// `plus·(e_0+e_1)/2 + minus·(e_0-e_1)/2 + Σ perp_i e_{i+2}`.
pub fn lightlike_recompose(parts: &LightlikeParts) -> MinkowskiVector {
    let mut v = Vec::with_capacity(parts.perp.len() + 2);
    v.push(0.5 * (parts.plus + parts.minus));
    v.push(0.5 * (parts.plus - parts.minus));
    v.extend_from_slice(&parts.perp);
    MinkowskiVector(v)
}

impl LightlikeParts {
    /// Lorentz form evaluated in light-cone coordinates,
    /// `q(ξ, η) = (ξ⁺η⁻ + ξ⁻η⁺)/2 - ξ^⊥·η^⊥`, which avoids the cancellation
    /// of `ξ⁰η⁰ - ξ¹η¹` when `ξ` is nearly light-like.
    pub fn lorentz(&self, other: &LightlikeParts) -> f64 {
        0.5 * (self.plus * other.minus + self.minus * other.plus)
            - self
                .perp
                .iter()
                .zip(&other.perp)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Inverse stereographic image of `h ∈ ℝ^{d-1}` on the unit sphere of
/// `span(e_1..e_d)`; returned as the `d` spatial components.
pub fn stereographic(h: &[f64]) -> Vec<f64> {
    let h2: f64 = h.iter().map(|x| x * x).sum();
    let s = 1.0 / (1.0 + h2);
    let mut theta = Vec::with_capacity(h.len() + 1);
    theta.push((1.0 - h2) * s);
    theta.extend(h.iter().map(|x| 2.0 * x * s));
    theta
}

/// Great-circle distance between unit vectors.
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cross2: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - dot * y).powi(2))
        .sum::<f64>();
    cross2.sqrt().atan2(dot)
}
