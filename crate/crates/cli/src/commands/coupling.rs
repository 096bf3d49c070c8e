use devissage::coupling::{
    full_shift_coupling, CouplingParams, CouplingStart, DEFAULT_CLOCK_HORIZON, DEFAULT_DT, DEFAULT_TIME_HORIZON,
};
use devissage::stats::median;
use devissage::Execution;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{parameters, resolve_run, resolver, RunArgs, RunDefaults};
use crate::error::CliError;
use crate::output::{jnum, jopt, opt, Rule, Summary, Table};

const DEFAULTS: RunDefaults = RunDefaults {
    paths: 200,
    horizon: DEFAULT_TIME_HORIZON,
    dt: DEFAULT_DT,
    stride: 1,
    tol: 1e-2,
};

pub const SUCCESS_TARGET: f64 = 0.95;

#[derive(clap::Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[command(flatten)]
    pub run: RunArgs,
    /// Dimension of the hyperbolic space (≥ 2).
    #[arg(long = "d")]
    pub d: Option<usize>,
    /// Noise scale σ.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Horizon of the clock `∫u² ds` in the reflection stage.
    #[arg(long = "clock-horizon")]
    pub clock_horizon: Option<f64>,
    /// α of the first copy.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// β of the first copy.
    #[arg(long)]
    pub beta0: Option<f64>,
    /// α of the second copy minus α of the first.
    #[arg(long = "alpha-offset")]
    pub alpha_offset: Option<f64>,
    /// β of the second copy minus β of the first.
    #[arg(long = "beta-offset")]
    pub beta_offset: Option<f64>,
    /// γ of the second copy is this multiple of e_1.
    #[arg(long = "gamma-offset")]
    pub gamma_offset: Option<f64>,
}

/// Median hitting time of level `a` by a Brownian motion of variance `v` per unit time.
fn first_passage_median(a: f64, v: f64) -> f64 {
    let q = Normal::standard().inverse_cdf(0.75);
    a * a / (v * q * q)
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let run = resolve_run(&args.run, &r, DEFAULTS)?;
    let d = r.get("d", args.d, 3)?;
    let sigma = r.get("sigma", args.sigma, 1.0)?;
    let clock_horizon = r.get("clock-horizon", args.clock_horizon, DEFAULT_CLOCK_HORIZON)?;
    let alpha0 = r.get("alpha0", args.alpha0, 0.0)?;
    let beta0 = r.get("beta0", args.beta0, 1.0)?;
    let da = r.get("alpha-offset", args.alpha_offset, 1.0)?;
    let db = r.get("beta-offset", args.beta_offset, 1.0)?;
    let dg = r.get("gamma-offset", args.gamma_offset, 1.0)?;
    r.finish()?;

    let mut p = CouplingParams::new(d, sigma)?;
    p.dt = run.dt;
    p.time_horizon = run.horizon;
    p.clock_horizon = clock_horizon;
    p.validate()?;
    let first = CouplingStart {
        alpha: alpha0,
        beta: beta0,
        gamma: vec![0.0; d - 1],
    };
    let mut gamma = vec![0.0; d - 1];
    gamma[0] = dg;
    let second = CouplingStart {
        alpha: alpha0 + da,
        beta: beta0 + db,
        gamma,
    };
    for (key, beta) in [("beta0", first.beta), ("beta-offset", second.beta)] {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(CliError::Config(format!("{key}: β of both copies must be positive, got {beta}")));
        }
    }

    let out = run.outputs("coupling")?;
    let mut summary = Summary::new(
        "coupling",
        run.seed,
        run.paths,
        parameters(
            &run,
            json!({
                "d": d, "sigma": jnum(sigma), "clock_horizon": jnum(clock_horizon),
                "alpha0": jnum(alpha0), "beta0": jnum(beta0),
                "alpha_offset": jnum(da), "beta_offset": jnum(db), "gamma_offset": jnum(dg),
            }),
        ),
    );
    let cols = ["run", "t_tilde", "s", "s_bar", "gap_norm", "r", "t", "t_bar", "success"].map(String::from);
    let mut table = Table::new("coupling", &cols);
    if run.paths == 0 {
        table.write(&out.records())?;
        return out.finish(&summary);
    }

    let (outcomes, stats) = full_shift_coupling(&p, &first, &second, run.paths, run.seed, Execution::default())?;
    for (i, o) in outcomes.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            opt(o.t_tilde),
            opt(o.s),
            opt(o.s_bar),
            opt(o.gap_norm),
            opt(o.r),
            opt(o.t),
            opt(o.t_bar),
            o.success.to_string(),
        ]);
    }
    table.write(&out.records())?;

    summary.claim("success_rate", Some(stats.success_rate), SUCCESS_TARGET, Rule::AtLeast);
    let meetings: Vec<f64> = outcomes.iter().map(|o| o.t_tilde.unwrap_or(f64::INFINITY)).collect();
    let stage = |f: fn(&devissage::coupling::CouplingOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    summary.set(
        "statistics",
        json!({
            "successes": stats.successes,
            "alpha_met": stage(|o| o.t_tilde.is_some()),
            "beta_synchronized": stage(|o| o.s.is_some()),
            "median_t_tilde": jopt(stats.median_t_tilde),
            "median_s": jopt(stats.median_s),
            "median_s_bar": jopt(stats.median_s_bar),
            "median_r": jopt(stats.median_r),
            "median_t": jopt(stats.median_t),
            "median_t_bar": jopt(stats.median_t_bar),
            "median_t_tilde_all_runs": jnum(median(&meetings)),
            "alpha_meeting_oracle": jnum(first_passage_median(da.abs(), 2.0 * sigma * sigma)),
        }),
    );
    out.finish(&summary)
}
