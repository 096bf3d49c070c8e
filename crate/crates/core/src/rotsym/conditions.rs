//! Integrability conditions on the warping function.
//!
//! With `G(r) = ∫_r^∞ f^{1-n}`:
//! 1. `I₁ = G(r_lo) < ∞` makes `r_t` transient;
//! 2. `I₂ = ∫_{r_lo}^∞ f^{n-1} G = ∞` rules out explosion;
//! 3. `I₃ = ∫_{r_lo}^∞ f^{n-3} G < ∞` makes the angular clock `∫ f(r_s)^{-2} ds` finite.

use crate::error::{invalid, Error, Result};
use crate::stats::{improper_integral, ImproperIntegral};

use super::WarpModel;

pub const GROWTH_RATIO: f64 = 1.1;
pub const GROWTH_DOUBLINGS: usize = 3;

/// Outcome of the three integrability checks; divergent integrals report `∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditions {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

impl Conditions {
    pub fn all(&self) -> bool {
        self.c1 && self.c2 && self.c3
    }

    pub fn diagnostic(&self) -> String {
        let mut failed = Vec::new();
        if !self.c1 {
            failed.push(format!("condition 1 (transience): ∫ f^(1-n) = {}", self.i1));
        }
        if !self.c2 {
            failed.push(format!("condition 2 (no explosion): ∫ f^(n-1) G = {}", self.i2));
        }
        if !self.c3 {
            failed.push(format!("condition 3 (finite clock): ∫ f^(n-3) G = {}", self.i3));
        }
        failed.join("; ")
    }
}

fn value(res: &ImproperIntegral) -> f64 {
    match res {
        ImproperIntegral::Convergent { value, .. } => *value,
        ImproperIntegral::Divergent { .. } => f64::INFINITY,
        ImproperIntegral::Inconclusive { partials } => partials.last().map_or(f64::NAN, |p| p.1),
    }
}

pub fn check_conditions(model: &WarpModel, r_lo: f64) -> Result<Conditions> {
    if !(r_lo.is_finite() && r_lo > 0.0) {
        return Err(invalid("r_lo", format!("must be positive, got {r_lo}")));
    }
    let n = model.n() as f64;
    let warp = model.warp();
    for k in 0..=64 {
        let r = r_lo + k as f64 * 0.25;
        if !(warp.f(r).is_finite() && warp.f(r) > 0.0 && warp.df(r).is_finite()) {
            return Err(Error::NonFiniteIntegrand { at: r });
        }
    }
    let power = |p: f64| move |r: f64| (p * warp.log_f(r)).exp();
    let inner = power(1.0 - n);
    let tail = |r: f64| -> Result<f64> {
        Ok(value(&improper_integral(inner, r, GROWTH_RATIO, GROWTH_DOUBLINGS)?))
    };

    let first = improper_integral(inner, r_lo, GROWTH_RATIO, GROWTH_DOUBLINGS)?;
    if !first.is_convergent() {
        return Ok(Conditions {
            c1: false,
            c2: true,
            c3: false,
            i1: value(&first),
            i2: f64::INFINITY,
            i3: f64::INFINITY,
        });
    }

    // Quadrature callbacks cannot return errors, so a failing inner integral
    // is surfaced as NaN and reported by the outer one.
    let weighted = |p: f64| {
        let outer = power(p);
        move |r: f64| tail(r).map_or(f64::NAN, |g| outer(r) * g)
    };
    let second = improper_integral(weighted(n - 1.0), r_lo, GROWTH_RATIO, GROWTH_DOUBLINGS)?;
    let third = improper_integral(weighted(n - 3.0), r_lo, GROWTH_RATIO, GROWTH_DOUBLINGS)?;
    Ok(Conditions {
        c1: true,
        c2: second.is_divergent(),
        c3: third.is_convergent(),
        i1: value(&first),
        i2: value(&second),
        i3: value(&third),
    })
}
