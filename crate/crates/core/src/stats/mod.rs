//! Drift-rate estimation, tail-convergence certificates, Kolmogorov–Smirnov
//! tests and improper quadrature.

mod ks;
mod quad;

pub use ks::{kolmogorov_survival, ks_one_sample, ks_two_sample};
pub use quad::{adaptive_simpson, improper_integral, ImproperIntegral};

use crate::error::{Error, Result};
use crate::sde::Path;

/// Mean least-squares slope across paths with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub slope: f64,
    pub std_error: f64,
    pub window: (f64, f64),
    pub paths: usize,
}

impl DriftEstimate {
    /// `|slope - target| <= max(floor, k * std_error)`.
    pub fn within(&self, target: f64, floor: f64, k: f64) -> bool {
        (self.slope - target).abs() <= floor.max(k * self.std_error)
    }
}

/// Sup-increment of a scalar series over the second half of its horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCertificate {
    pub sup_increment: f64,
    pub window: (f64, f64),
    pub tolerance: f64,
    pub passed: bool,
}

impl ConvergenceCertificate {
    /// Combines certificates of several coordinates over the same window.
    pub fn worst(certs: &[ConvergenceCertificate]) -> Option<ConvergenceCertificate> {
        certs
            .iter()
            .copied()
            .max_by(|a, b| a.sup_increment.total_cmp(&b.sup_increment))
            .map(|c| ConvergenceCertificate {
                passed: certs.iter().all(|c| c.passed),
                ..c
            })
    }
}

pub const MIN_WINDOW_POINTS: usize = 10;

/// Ordinary least-squares slope of `ys` against `ts`.
pub fn ls_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    sxy / sxx
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // Shifting by the first sample keeps constant samples exact.
    let pivot = xs[0];
    let mean = pivot + xs.iter().map(|x| x - pivot).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Median of a sample (NaNs sort last).
pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated sample quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn window_slope(path: &Path, window: (f64, f64), f: &impl Fn(&[f64]) -> f64) -> Result<f64> {
    let (t0, t1) = window;
    let lo = path.index_at(t0 - 1e-12);
    let hi = path.index_at(t1 + 1e-12);
    let hi = hi.min(path.len());
    let points = hi.saturating_sub(lo);
    if points < MIN_WINDOW_POINTS {
        return Err(Error::WindowTooShort {
            t0,
            t1,
            points,
            required: MIN_WINDOW_POINTS,
        });
    }
    let ts = &path.times()[lo..hi];
    let ys: Vec<f64> = (lo..hi).map(|k| f(path.state(k))).collect();
    Ok(ls_slope(ts, &ys))
}

/// Per-path least-squares slope of `component` over `window`, then mean and
/// standard error across paths.
pub fn drift_rate(paths: &[Path], component: usize, window: (f64, f64)) -> Result<DriftEstimate> {
    drift_rate_by(paths, |s| s[component], window)
}

/// [`drift_rate`] for a scalar function of the state.
pub fn drift_rate_by(
    paths: &[Path],
    f: impl Fn(&[f64]) -> f64,
    window: (f64, f64),
) -> Result<DriftEstimate> {
    if paths.is_empty() {
        return Err(Error::EmptySample);
    }
    if window.0 >= window.1 {
        return Err(crate::error::invalid(
            "window",
            format!("need t0 < t1, got {:?}", window),
        ));
    }
    let slopes = paths
        .iter()
        .map(|p| window_slope(p, window, &f))
        .collect::<Result<Vec<_>>>()?;
    let (slope, std_error) = mean_and_se(&slopes);
    Ok(DriftEstimate {
        slope,
        std_error,
        window,
        paths: paths.len(),
    })
}

/// `sup |x_t - x_s|` over recorded `s, t` in `[T/2, T]` for a scalar series.
pub fn tail_certificate_series(times: &[f64], values: &[f64], tol: f64) -> ConvergenceCertificate {
    let horizon = *times.last().expect("non-empty series");
    let start = horizon / 2.0;
    let lo = times.partition_point(|&t| t < start - 1e-12);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &values[lo..] {
        min = min.min(v);
        max = max.max(v);
    }
    let sup_increment = if max >= min { max - min } else { 0.0 };
    ConvergenceCertificate {
        sup_increment,
        window: (start, horizon),
        tolerance: tol,
        passed: sup_increment < tol,
    }
}

/// Tail certificate of one coordinate of a recorded path.
pub fn tail_certificate(path: &Path, component: usize, tol: f64) -> ConvergenceCertificate {
    tail_certificate_series(path.times(), &path.component(component), tol)
}

/// Worst tail certificate over several coordinates.
pub fn tail_certificate_multi(path: &Path, components: &[usize], tol: f64) -> ConvergenceCertificate {
    let certs: Vec<_> = components
        .iter()
        .map(|&c| tail_certificate(path, c, tol))
        .collect();
    ConvergenceCertificate::worst(&certs).expect("at least one component")
}
