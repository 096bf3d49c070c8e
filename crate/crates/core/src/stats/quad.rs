use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
const MAX_DOUBLINGS: usize = 80;
const CONVERGED_REL: f64 = 1e-6;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn checked(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteIntegrand { at: x })
    }
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = checked(f, lm)?;
    let frm = checked(f, rm)?;
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = checked(&f, a)?;
    let fb = checked(&f, b)?;
    let m = 0.5 * (a + b);
    let fm = checked(&f, m)?;
    let whole = simpson(fa, fm, fb, a, b);
    refine(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// Verdict of [`improper_integral`], always carrying the partial values
/// `(upper limit, partial integral)` that led to it.
#[derive(Debug, Clone, PartialEq)]
pub enum ImproperIntegral {
    Convergent { value: f64, partials: Vec<(f64, f64)> },
    Divergent { partials: Vec<(f64, f64)> },
    /// Neither verdict reached within the doubling budget.
    Inconclusive { partials: Vec<(f64, f64)> },
}

impl ImproperIntegral {
    pub fn value(&self) -> Option<f64> {
        match self {
            ImproperIntegral::Convergent { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_convergent(&self) -> bool {
        matches!(self, ImproperIntegral::Convergent { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, ImproperIntegral::Divergent { .. })
    }

    pub fn partials(&self) -> &[(f64, f64)] {
        match self {
            ImproperIntegral::Convergent { partials, .. }
            | ImproperIntegral::Divergent { partials }
            | ImproperIntegral::Inconclusive { partials } => partials,
        }
    }

    /// Value, or `+∞` for anything not certified convergent.
    pub fn value_or_infinite(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// `∫_lower^∞ f` over doubling horizons `[lower, 2^k lower]`.
///
/// Convergent once a doubling adds less than `1e-6` of the running total;
/// divergent once the partial integral grows by more than `growth_ratio` on
/// `doublings` consecutive doublings.
pub fn improper_integral(
    f: impl Fn(f64) -> f64,
    lower: f64,
    growth_ratio: f64,
    doublings: usize,
) -> Result<ImproperIntegral> {
    if !(lower.is_finite() && lower > 0.0) {
        return Err(crate::error::invalid(
            "lower",
            format!("must be positive, got {lower}"),
        ));
    }
    let mut partials = Vec::new();
    let mut total: f64 = 0.0;
    let mut a = lower;
    let mut growth_run = 0usize;
    for _ in 0..MAX_DOUBLINGS {
        let b = 2.0 * a;
        let piece = adaptive_simpson(&f, a, b, 1e-12_f64.max(1e-11 * total.abs()))?;
        let previous = total;
        total += piece;
        partials.push((b, total));
        if partials.len() >= 2 {
            if piece.abs() <= CONVERGED_REL * total.abs() {
                return Ok(ImproperIntegral::Convergent {
                    value: total,
                    partials,
                });
            }
            if previous != 0.0 && total.abs() > growth_ratio * previous.abs() {
                growth_run += 1;
                if growth_run >= doublings {
                    return Ok(ImproperIntegral::Divergent { partials });
                }
            } else {
                growth_run = 0;
            }
        }
        if total == 0.0 && piece == 0.0 && partials.len() >= 2 {
            return Ok(ImproperIntegral::Convergent {
                value: 0.0,
                partials,
            });
        }
        a = b;
    }
    Ok(ImproperIntegral::Inconclusive { partials })
}
