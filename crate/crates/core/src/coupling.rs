//! Shift-coupling of two copies of the `(α, β, γ)` sub-diffusion.
//!
//! Stage 1 runs two independent drifted Brownian motions `α`, `α̃` until they
//! cross at `T̃`. Stage 2 lets the copy with the smaller `β` catch up in
//! `β`-level and declares the copies synchronised at the first level where
//! `α - ᾱ` changes sign; from there on both copies share one state and one
//! noise, so `(α, β)_{S+s} = (ᾱ, β̄)_{S̄+s}`. Stage 3 reflects the `γ`
//! noise across the hyperplane orthogonal to the `γ` gap until the gap
//! closes, measured in the clock `∫ (e^{-α} β)² ds`.

use crate::error::{ensure_positive, invalid, Result};
use crate::exec::Execution;
use crate::rng::{derive_substream, normal, Stream};
use crate::stats::median;

pub const DEFAULT_TIME_HORIZON: f64 = 1e3;
pub const DEFAULT_CLOCK_HORIZON: f64 = 1e3;
pub const DEFAULT_DT: f64 = 1e-2;

const FIRST: u64 = 0;
const SECOND: u64 = 1;
const SHARED_PATH: u64 = 2;
const SHARED_HAT: u64 = 3;
const REFLECTED: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub d: usize,
    pub sigma: f64,
    pub dt: f64,
    pub time_horizon: f64,
    pub clock_horizon: f64,
}

impl CouplingParams {
    pub fn new(d: usize, sigma: f64) -> Result<Self> {
        let p = CouplingParams {
            d,
            sigma,
            dt: DEFAULT_DT,
            time_horizon: DEFAULT_TIME_HORIZON,
            clock_horizon: DEFAULT_CLOCK_HORIZON,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(invalid("d", "d must be ≥ 2"));
        }
        ensure_positive("sigma", self.sigma)?;
        ensure_positive("dt", self.dt)?;
        ensure_positive("horizon", self.time_horizon)?;
        ensure_positive("clock_horizon", self.clock_horizon)
    }

    fn alpha_drift(&self) -> f64 {
        0.5 * self.sigma * self.sigma * (self.d - 1) as f64
    }
}

/// Starting point `(α, β, γ)` of one copy.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStart {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
}

/// `(α, log β)` of one copy with its own time and its accumulated clock
/// `∫_0^t u_s² ds`, `u = β e^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopyState {
    pub t: f64,
    pub alpha: f64,
    pub log_beta: f64,
    pub clock: f64,
}

impl CopyState {
    pub fn start(alpha: f64, beta: f64) -> Result<Self> {
        ensure_positive("beta", beta)?;
        Ok(CopyState {
            t: 0.0,
            alpha,
            log_beta: beta.ln(),
            clock: 0.0,
        })
    }

    /// One Euler step with a fresh normal from `rng`.
    pub fn step(&mut self, p: &CouplingParams, rng: &mut Stream) {
        let u = (self.log_beta - self.alpha).exp();
        self.clock += u * u * p.dt;
        self.log_beta += (self.alpha - self.log_beta).exp() * p.dt;
        self.alpha += p.sigma * p.dt.sqrt() * normal(rng) + p.alpha_drift() * p.dt;
        self.t += p.dt;
    }

    fn lerp(&self, other: &CopyState, lambda: f64) -> CopyState {
        let l = |a: f64, b: f64| a + lambda * (b - a);
        CopyState {
            t: l(self.t, other.t),
            alpha: l(self.alpha, other.alpha),
            log_beta: l(self.log_beta, other.log_beta),
            clock: l(self.clock, other.clock),
        }
    }
}

/// States of both copies at the first crossing of `α` and `α̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaMeeting {
    pub t_tilde: f64,
    pub first: CopyState,
    pub second: CopyState,
}

/// Runs the two copies with independent noises until `α - α̃` changes sign
/// (linear interpolation within the step); `None` past the time horizon.
pub fn couple_alpha(
    p: &CouplingParams,
    first: CopyState,
    second: CopyState,
    rng_first: &mut Stream,
    rng_second: &mut Stream,
) -> Option<AlphaMeeting> {
    let (mut a, mut b) = (first, second);
    let mut gap = a.alpha - b.alpha;
    if gap == 0.0 {
        return Some(AlphaMeeting {
            t_tilde: a.t,
            first: a,
            second: b,
        });
    }
    while a.t < p.time_horizon {
        let (a0, b0) = (a, b);
        a.step(p, rng_first);
        b.step(p, rng_second);
        let next = a.alpha - b.alpha;
        if next == 0.0 || next.signum() != gap.signum() {
            let lambda = gap / (gap - next);
            let (mut am, mut bm) = (a0.lerp(&a, lambda), b0.lerp(&b, lambda));
            let alpha = 0.5 * (am.alpha + bm.alpha);
            am.alpha = alpha;
            bm.alpha = alpha;
            return Some(AlphaMeeting {
                t_tilde: am.t,
                first: am,
                second: bm,
            });
        }
        gap = next;
    }
    None
}

/// Times at which both copies sit at the same `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSync {
    pub s: f64,
    pub s_bar: f64,
    /// `∫_0^S u²` of the first copy.
    pub clock_s: f64,
    /// `∫_0^{S̄} ū²` of the second copy.
    pub clock_s_bar: f64,
    /// Common state; its own `t` and `clock` restart at 0.
    pub state: CopyState,
}

/// Advances whichever copy has the smaller `β` until it passes the other's
/// level, compares `α` there, and stops at the first sign change of that
/// difference. The lagging copy is then placed on the leading copy's state.
pub fn synchronize_beta(
    p: &CouplingParams,
    meeting: &AlphaMeeting,
    rng_first: &mut Stream,
    rng_second: &mut Stream,
) -> Option<BetaSync> {
    let (mut a, mut b) = (meeting.first, meeting.second);
    let done = |a: &CopyState, b: &CopyState| BetaSync {
        s: a.t,
        s_bar: b.t,
        clock_s: a.clock,
        clock_s_bar: b.clock,
        state: CopyState {
            t: 0.0,
            clock: 0.0,
            ..*b
        },
    };
    if a.log_beta == b.log_beta && a.alpha == b.alpha {
        return Some(done(&a, &b));
    }
    let mut previous: Option<f64> = None;
    loop {
        let first_lags = a.log_beta < b.log_beta;
        let (lag, lead, rng) = if first_lags {
            (&mut a, &b, &mut *rng_first)
        } else {
            (&mut b, &a, &mut *rng_second)
        };
        let before = *lag;
        lag.step(p, rng);
        if lag.t > p.time_horizon {
            return None;
        }
        if lag.log_beta < lead.log_beta {
            continue;
        }
        let lambda = (lead.log_beta - before.log_beta) / (lag.log_beta - before.log_beta);
        let at_level = before.lerp(lag, lambda);
        // Signed as first minus second whichever copy lags.
        let diff = if first_lags {
            at_level.alpha - lead.alpha
        } else {
            lead.alpha - at_level.alpha
        };
        let crossed = previous.is_some_and(|d| d.signum() != diff.signum()) || diff == 0.0;
        if crossed {
            let mut snapped = *lead;
            snapped.t = at_level.t;
            snapped.clock = at_level.clock;
            return Some(if first_lags {
                done(&snapped, lead)
            } else {
                let lead = *lead;
                done(&lead, &snapped)
            });
        }
        previous = Some(diff);
    }
}

/// Gap `(B̂(c_S) + γ) - (B̂(c̄_S̄) + γ̄)` with one shared Brownian motion `B̂`
/// sampled at the two clock values.
pub fn gamma_gap(
    gamma: &[f64],
    gamma_bar: &[f64],
    clock_s: f64,
    clock_s_bar: f64,
    rng: &mut Stream,
) -> Vec<f64> {
    let (lo, hi) = (clock_s.min(clock_s_bar), clock_s.max(clock_s_bar));
    gamma
        .iter()
        .zip(gamma_bar)
        .map(|(g, gb)| {
            let at_lo = lo.sqrt() * normal(rng);
            let at_hi = at_lo + (hi - lo).sqrt() * normal(rng);
            let (b_s, b_s_bar) = if clock_s <= clock_s_bar {
                (at_lo, at_hi)
            } else {
                (at_hi, at_lo)
            };
            (b_s + g) - (b_s_bar + gb)
        })
        .collect()
}

/// `I - 2nnᵀ` for a unit vector `n`.
pub fn reflection_matrix(n: &[f64]) -> Vec<Vec<f64>> {
    (0..n.len())
        .map(|i| {
            (0..n.len())
                .map(|j| f64::from(u8::from(i == j)) - 2.0 * n[i] * n[j])
                .collect()
        })
        .collect()
}

/// First clock value at which a Brownian motion started at 0 reaches
/// `-level`, fed one clock increment at a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionWalker {
    level: f64,
    position: f64,
    clock: f64,
}

impl ReflectionWalker {
    /// Walker for a gap vector of norm `gap`: `γ - γ̄ = v + 2(n·B)n` closes
    /// when `n·B = -|v|/2`.
    pub fn for_gap(gap: f64) -> Self {
        ReflectionWalker {
            level: 0.5 * gap,
            position: 0.0,
            clock: 0.0,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Applies a clock increment `dc`; returns the interpolated hitting clock.
    pub fn advance(&mut self, dc: f64, rng: &mut Stream) -> Option<f64> {
        if self.level <= 0.0 {
            return Some(0.0);
        }
        let next = self.position + dc.sqrt() * normal(rng);
        let hit = if next <= -self.level {
            let lambda = (self.position + self.level) / (self.position - next);
            Some(self.clock + lambda * dc)
        } else {
            None
        };
        self.position = next;
        self.clock += dc;
        hit
    }
}

/// `t` with `clock(t) = target`, by binary search and linear interpolation
/// over a nondecreasing clock array.
pub fn invert_clock(times: &[f64], clocks: &[f64], target: f64) -> Option<f64> {
    if clocks.is_empty() || target > *clocks.last()? {
        return None;
    }
    let k = clocks.partition_point(|c| *c < target);
    if k == 0 {
        return Some(times[0]);
    }
    let (c0, c1) = (clocks[k - 1], clocks[k]);
    let lambda = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
    Some(times[k - 1] + lambda * (times[k] - times[k - 1]))
}

/// Result of the reflection stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub gap: Vec<f64>,
    /// Clock elapsed after synchronisation when the gap closed.
    pub r: Option<f64>,
    /// Time elapsed after synchronisation when the gap closed.
    pub elapsed: Option<f64>,
}

/// Continues the common `(α, β)` path from `state` with the shared noise,
/// reflecting the `γ` noise until the gap closes.
pub fn reflect_gamma(
    p: &CouplingParams,
    gap: Vec<f64>,
    state: CopyState,
    rng_path: &mut Stream,
    rng_noise: &mut Stream,
) -> Reflection {
    let norm = gap.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Reflection {
            gap,
            r: Some(0.0),
            elapsed: Some(0.0),
        };
    }
    let mut walker = ReflectionWalker::for_gap(norm);
    let mut s = state;
    let (mut times, mut clocks) = (vec![0.0], vec![0.0]);
    while s.t < p.time_horizon && walker.clock() < p.clock_horizon {
        let before = s.clock;
        s.step(p, rng_path);
        times.push(s.t);
        clocks.push(s.clock);
        if let Some(r) = walker.advance(s.clock - before, rng_noise) {
            if r > p.clock_horizon {
                break;
            }
            return Reflection {
                gap,
                r: Some(r),
                elapsed: invert_clock(&times, &clocks, r),
            };
        }
    }
    Reflection {
        gap,
        r: None,
        elapsed: None,
    }
}

/// Stage times of one coupling run; `None` marks a stage that timed out.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOutcome {
    pub t_tilde: Option<f64>,
    pub s: Option<f64>,
    pub s_bar: Option<f64>,
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub t_bar: Option<f64>,
    pub gap_norm: Option<f64>,
    pub success: bool,
    pub horizon: f64,
}

impl CouplingOutcome {
    fn failed(horizon: f64) -> Self {
        CouplingOutcome {
            t_tilde: None,
            s: None,
            s_bar: None,
            r: None,
            t: None,
            t_bar: None,
            gap_norm: None,
            success: false,
            horizon,
        }
    }
}

/// One three-stage coupling run with streams derived from `(seed, index)`.
pub fn shift_couple(
    p: &CouplingParams,
    first: &CouplingStart,
    second: &CouplingStart,
    seed: u64,
    index: u64,
) -> Result<CouplingOutcome> {
    p.validate()?;
    if first.gamma.len() != p.d - 1 || second.gamma.len() != p.d - 1 {
        return Err(crate::error::Error::DimensionMismatch {
            expected: p.d - 1,
            actual: if first.gamma.len() != p.d - 1 {
                first.gamma.len()
            } else {
                second.gamma.len()
            },
        });
    }
    let stream = |c| derive_substream(seed, index, c);
    let (mut ra, mut rb) = (stream(FIRST), stream(SECOND));
    let a = CopyState::start(first.alpha, first.beta)?;
    let b = CopyState::start(second.alpha, second.beta)?;
    let mut out = CouplingOutcome::failed(p.time_horizon);

    let Some(meeting) = couple_alpha(p, a, b, &mut ra, &mut rb) else {
        return Ok(out);
    };
    out.t_tilde = Some(meeting.t_tilde);
    let Some(sync) = synchronize_beta(p, &meeting, &mut ra, &mut rb) else {
        return Ok(out);
    };
    out.s = Some(sync.s);
    out.s_bar = Some(sync.s_bar);

    let gap = gamma_gap(
        &first.gamma,
        &second.gamma,
        sync.clock_s,
        sync.clock_s_bar,
        &mut stream(SHARED_HAT),
    );
    out.gap_norm = Some(gap.iter().map(|x| x * x).sum::<f64>().sqrt());
    let refl = reflect_gamma(p, gap, sync.state, &mut stream(SHARED_PATH), &mut stream(REFLECTED));
    if let (Some(r), Some(elapsed)) = (refl.r, refl.elapsed) {
        out.r = Some(r);
        out.t = Some(sync.s + elapsed);
        out.t_bar = Some(sync.s_bar + elapsed);
        out.success = sync.s + elapsed <= p.time_horizon && sync.s_bar + elapsed <= p.time_horizon;
    }
    Ok(out)
}

/// Success rate and medians of each stage over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSummary {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_t_tilde: Option<f64>,
    pub median_s: Option<f64>,
    pub median_s_bar: Option<f64>,
    pub median_r: Option<f64>,
    pub median_t: Option<f64>,
    pub median_t_bar: Option<f64>,
}

impl CouplingSummary {
    pub fn from_outcomes(outcomes: &[CouplingOutcome]) -> Self {
        let ok: Vec<&CouplingOutcome> = outcomes.iter().filter(|o| o.success).collect();
        let med = |f: fn(&CouplingOutcome) -> Option<f64>| {
            let xs: Vec<f64> = ok.iter().filter_map(|o| f(o)).collect();
            (!xs.is_empty()).then(|| median(&xs))
        };
        CouplingSummary {
            runs: outcomes.len(),
            successes: ok.len(),
            success_rate: if outcomes.is_empty() {
                0.0
            } else {
                ok.len() as f64 / outcomes.len() as f64
            },
            median_t_tilde: med(|o| o.t_tilde),
            median_s: med(|o| o.s),
            median_s_bar: med(|o| o.s_bar),
            median_r: med(|o| o.r),
            median_t: med(|o| o.t),
            median_t_bar: med(|o| o.t_bar),
        }
    }
}

pub fn full_shift_coupling(
    p: &CouplingParams,
    first: &CouplingStart,
    second: &CouplingStart,
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<CouplingOutcome>, CouplingSummary)> {
    let outcomes = exec.try_map(runs, |i| shift_couple(p, first, second, seed, i as u64))?;
    let summary = CouplingSummary::from_outcomes(&outcomes);
    Ok((outcomes, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use approx::assert_abs_diff_eq;

    fn params() -> CouplingParams {
        CouplingParams::new(3, 1.0).unwrap()
    }

    fn start(alpha: f64, beta: f64, gamma: Vec<f64>) -> CouplingStart {
        CouplingStart { alpha, beta, gamma }
    }

    #[test]
    fn equal_alphas_meet_at_once() {
        let a = CopyState::start(0.3, 1.0).unwrap();
        let b = CopyState::start(0.3, 5.0).unwrap();
        let m = couple_alpha(&params(), a, b, &mut derive_stream(1, 0), &mut derive_stream(1, 1)).unwrap();
        assert_eq!(m.t_tilde, 0.0);
    }

    #[test]
    fn identical_starts_couple_at_zero() {
        let s = start(0.0, 1.0, vec![0.0, 0.0]);
        let o = shift_couple(&params(), &s, &s, 3, 0).unwrap();
        assert!(o.success);
        for t in [o.t_tilde, o.s, o.s_bar, o.r, o.t, o.t_bar] {
            assert_eq!(t, Some(0.0));
        }
    }

    #[test]
    fn stages_are_ordered() {
        let p = params();
        let a = start(0.0, 1.0, vec![0.0, 0.0]);
        let b = start(1.0, 2.0, vec![1.0, 0.0]);
        for i in 0..20 {
            let o = shift_couple(&p, &a, &b, 11, i).unwrap();
            if let (Some(tt), Some(s), Some(sb)) = (o.t_tilde, o.s, o.s_bar) {
                assert!(tt <= s && tt <= sb, "{o:?}");
            }
            if o.success {
                assert!(o.t.unwrap() >= o.s.unwrap());
                assert_abs_diff_eq!(o.t.unwrap() - o.s.unwrap(), o.t_bar.unwrap() - o.s_bar.unwrap(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let n = crate::minkowski::normalize(&[0.3, -1.2, 0.5]);
        let m = reflection_matrix(&n);
        for i in 0..3 {
            let mn: f64 = (0..3).map(|j| m[i][j] * n[j]).sum();
            assert_abs_diff_eq!(mn, -n[i], epsilon = 1e-12);
            for j in 0..3 {
                let sq: f64 = (0..3).map(|k| m[i][k] * m[k][j]).sum();
                assert_abs_diff_eq!(sq, f64::from(u8::from(i == j)), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reflected_gap_closes_along_the_normal() {
        // γ - γ̄ = v + B - M B = v + 2(n·B)n, so only n·B matters.
        let v = [0.6, -0.8];
        let n = [0.6, -0.8];
        let m = reflection_matrix(&n);
        let b = [0.1 - 0.3, 0.7];
        let mb: Vec<f64> = (0..2).map(|i| m[i][0] * b[0] + m[i][1] * b[1]).collect();
        let nb = n[0] * b[0] + n[1] * b[1];
        for i in 0..2 {
            assert_abs_diff_eq!(v[i] + b[i] - mb[i], v[i] + 2.0 * nb * n[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn clock_inversion() {
        let times = [0.0, 1.0, 2.0, 3.0];
        let clocks = [0.0, 2.0, 2.0, 6.0];
        assert_eq!(invert_clock(&times, &clocks, 1.0), Some(0.5));
        assert_eq!(invert_clock(&times, &clocks, 4.0), Some(2.5));
        assert_eq!(invert_clock(&times, &clocks, 7.0), None);
        assert_eq!(invert_clock(&times, &clocks, 0.0), Some(0.0));
    }

    #[test]
    fn synchronized_copies_stay_equal() {
        let p = CouplingParams {
            dt: 1e-4,
            ..params()
        };
        let a = CopyState::start(0.0, 1.0).unwrap();
        let b = CopyState::start(0.5, 1.5).unwrap();
        let (mut ra, mut rb) = (derive_stream(5, 0), derive_stream(5, 1));
        let m = couple_alpha(&p, a, b, &mut ra, &mut rb).unwrap();
        let sync = synchronize_beta(&p, &m, &mut ra, &mut rb).unwrap();
        // Both copies continue from the common state with the same draws.
        let mut x = sync.state;
        let mut y = sync.state;
        let (mut sx, mut sy) = (derive_stream(6, 0), derive_stream(6, 0));
        for _ in 0..50_000 {
            x.step(&p, &mut sx);
            y.step(&p, &mut sy);
            assert!((x.log_beta - y.log_beta).abs() <= 1e-9);
            assert!((x.alpha - y.alpha).abs() <= 1e-9);
        }
    }

    #[test]
    fn larger_beta_side_waits_for_the_other() {
        let p = params();
        let a = CopyState::start(0.0, 10.0).unwrap();
        let b = CopyState::start(0.0, 1.0).unwrap();
        let m = couple_alpha(&p, a, b, &mut derive_stream(7, 0), &mut derive_stream(7, 1)).unwrap();
        let sync = synchronize_beta(&p, &m, &mut derive_stream(7, 2), &mut derive_stream(7, 3)).unwrap();
        assert!(sync.s_bar > m.t_tilde);
    }

    #[test]
    fn zero_gap_needs_no_reflection() {
        let s = CopyState::start(0.0, 1.0).unwrap();
        let r = reflect_gamma(&params(), vec![0.0, 0.0], s, &mut derive_stream(1, 0), &mut derive_stream(1, 1));
        assert_eq!(r.r, Some(0.0));
    }

    #[test]
    fn summary_counts() {
        let s = start(0.0, 1.0, vec![0.0]);
        let p = CouplingParams::new(2, 1.0).unwrap();
        let (out, sum) = full_shift_coupling(&p, &s, &s, 5, 1, Execution::Sequential).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(sum.successes, 5);
        assert_eq!(sum.median_r, Some(0.0));
    }

    #[test]
    fn rejects_bad_dimension() {
        let p = params();
        let a = start(0.0, 1.0, vec![0.0]);
        assert!(shift_couple(&p, &a, &a, 1, 0).is_err());
        assert!(CouplingParams::new(1, 1.0).is_err());
    }
}
