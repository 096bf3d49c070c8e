use devissage::dudley::{
    check_remark_link, dudley_fields, estimate_boundary, reconstruct_phase, u_squared_clock, DudleyParams,
    DudleyState, Layout,
};
use devissage::sde::{run_ensemble, Path};
use devissage::stats::{drift_rate, mean_and_se, median};
use devissage::Execution;
use serde_json::json;

use super::{parameters, resolve_run, resolver, RunArgs, RunDefaults};
use crate::error::CliError;
use crate::output::{indexed, jnum, num, Rule, Summary, Table};

const DEFAULTS: RunDefaults = RunDefaults {
    paths: 100,
    horizon: 60.0,
    dt: 1e-3,
    stride: 100,
    tol: 1e-2,
};

pub const CONVERGED_TARGET: f64 = 0.95;
pub const ANGULAR_TARGET: f64 = 1e-2;
pub const RADIAL_TARGET: f64 = 5e-2;
pub const CLOCK_GROWTH: f64 = 1.25;
pub const CLOCK_TARGET: f64 = 0.9;
pub const DRIFT_FLOOR: f64 = 0.05;

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
    /// Initial β.
    #[arg(long)]
    pub beta0: Option<f64>,
    /// Initial δ.
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Also dump the recorded trajectories of the first K paths.
    #[arg(long)]
    pub trajectories: Option<usize>,
}

struct Record {
    alpha_slope: f64,
    r_over_t: f64,
    h_inf: Vec<f64>,
    delta_inf: f64,
    theta_inf: Vec<f64>,
    r_inf: f64,
    sup_increment: f64,
    converged: bool,
    angular_residual: f64,
    r_residual: f64,
    clock_half: f64,
    clock_end: f64,
}

fn record(path: &Path, tol: f64, window: (f64, f64)) -> Result<Record, CliError> {
    let b = estimate_boundary(path, tol);
    let last = DudleyState::from_slice(path.last());
    let link = check_remark_link(&last);
    let clock = u_squared_clock(path);
    let half = path.index_at(window.0);
    Ok(Record {
        alpha_slope: drift_rate(std::slice::from_ref(path), Layout::ALPHA, window)?.slope,
        r_over_t: last.radius() / path.horizon(),
        h_inf: b.h_inf,
        delta_inf: b.delta_inf,
        theta_inf: b.theta_inf,
        r_inf: b.r_inf,
        sup_increment: b.certificate.sup_increment,
        converged: b.converged,
        angular_residual: link.angular_residual,
        r_residual: link.relative_error,
        clock_half: clock[half],
        clock_end: *clock.last().unwrap(),
    })
}

fn trajectory_table(d: usize, paths: &[Path]) -> Table {
    let mut cols = vec!["path".to_string(), "t".into(), "alpha".into(), "log_beta".into()];
    cols.extend(indexed("gamma", d - 1));
    cols.extend(indexed("h", d - 1));
    cols.extend(["delta".to_string(), "u".into()]);
    cols.extend((0..=d).map(|i| format!("xi_{i}")));
    cols.extend((0..=d).map(|i| format!("xidot_{i}")));
    let mut table = Table::new("dudley", &cols);
    for (i, p) in paths.iter().enumerate() {
        for (k, s) in p.states().enumerate() {
            let st = DudleyState::from_slice(s);
            let mut row = vec![i.to_string(), num(p.times()[k]), num(st.alpha), num(st.log_beta)];
            row.extend(st.gamma.iter().map(|x| num(*x)));
            row.extend(st.h.iter().map(|x| num(*x)));
            row.extend([num(st.delta), num(st.u)]);
            match reconstruct_phase(&st) {
                Ok((v, x)) => {
                    row.extend(x.components().iter().map(|c| num(*c)));
                    row.extend(v.vector().components().iter().map(|c| num(*c)));
                }
                Err(_) => row.extend(std::iter::repeat_n(String::new(), 2 * (d + 1))),
            }
            table.push(row);
        }
    }
    table
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let run = resolve_run(&args.run, &r, DEFAULTS)?;
    let d = r.get("d", args.d, 3)?;
    let sigma = r.get("sigma", args.sigma, 1.0)?;
    let beta0 = r.get("beta0", args.beta0, 1.0)?;
    let delta0 = r.get("delta0", args.delta0, 0.0)?;
    let dump = r.get("trajectories", args.trajectories, 0)?;
    r.finish()?;

    let params = DudleyParams::new(d, sigma)?;
    let grid = run.grid()?;
    let start = DudleyState::origin(d, beta0, delta0)?;
    let out = run.outputs("dudley")?;
    let window = (0.5 * run.horizon, run.horizon);

    let mut cols = vec!["path".to_string(), "alpha_slope".into(), "r_over_t".into()];
    cols.extend(indexed("h_inf", d - 1));
    cols.push("delta_inf".into());
    cols.extend(indexed("theta_inf", d));
    cols.extend(
        ["r_inf", "sup_increment", "converged", "angular_residual", "r_residual", "clock_half", "clock_end"]
            .map(String::from),
    );
    let mut table = Table::new("dudley", &cols);
    let mut summary = Summary::new(
        "dudley",
        run.seed,
        run.paths,
        parameters(
            &run,
            json!({"d": d, "sigma": jnum(sigma), "beta0": jnum(beta0), "delta0": jnum(delta0)}),
        ),
    );
    if run.paths == 0 {
        table.write(&out.records())?;
        return out.finish(&summary);
    }

    let ens = run_ensemble(&dudley_fields(params), &start.to_vec(), run.paths, &grid, run.seed, Execution::default())?;
    let records = ens
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            record(p, run.tol, window).map_err(|e| match e {
                CliError::Runtime(m) => CliError::Runtime(format!("path {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (i, rec) in records.iter().enumerate() {
        let mut row = vec![i.to_string(), num(rec.alpha_slope), num(rec.r_over_t)];
        row.extend(rec.h_inf.iter().map(|x| num(*x)));
        row.push(num(rec.delta_inf));
        row.extend(rec.theta_inf.iter().map(|x| num(*x)));
        row.extend([
            num(rec.r_inf),
            num(rec.sup_increment),
            rec.converged.to_string(),
            num(rec.angular_residual),
            num(rec.r_residual),
            num(rec.clock_half),
            num(rec.clock_end),
        ]);
        table.push(row);
    }
    table.write(&out.records())?;
    if dump > 0 {
        trajectory_table(d, &ens.paths[..dump.min(ens.len())]).write(&out.trajectories())?;
    }

    let target = params.alpha_rate();
    let drift = drift_rate(&ens.paths, Layout::ALPHA, window)?;
    summary.claim(
        "alpha_drift",
        Some(drift.slope),
        target,
        Rule::Within(DRIFT_FLOOR.max(3.0 * drift.std_error)),
    );
    let (r_rate, r_se) = mean_and_se(&records.iter().map(|x| x.r_over_t).collect::<Vec<_>>());
    summary.claim("radial_rate", Some(r_rate), target, Rule::Within(DRIFT_FLOOR.max(3.0 * r_se)));
    let n = records.len() as f64;
    let converged: Vec<&Record> = records.iter().filter(|x| x.converged).collect();
    summary.claim(
        "boundary_converged",
        Some(converged.len() as f64 / n),
        CONVERGED_TARGET,
        Rule::AtLeast,
    );
    let med = |f: fn(&Record) -> f64| {
        let xs: Vec<f64> = converged.iter().map(|x| f(x)).collect();
        (!xs.is_empty()).then(|| median(&xs))
    };
    summary.claim("remark_angular", med(|x| x.angular_residual), ANGULAR_TARGET, Rule::Below);
    summary.claim("remark_radial", med(|x| x.r_residual), RADIAL_TARGET, Rule::Below);
    let growing = records.iter().filter(|x| x.clock_end > CLOCK_GROWTH * x.clock_half).count();
    summary.claim("clock_divergence", Some(growing as f64 / n), CLOCK_TARGET, Rule::AtLeast);
    summary.set(
        "statistics",
        json!({
            "alpha_slope_se": jnum(drift.std_error),
            "r_over_t_se": jnum(r_se),
            "converged": converged.len(),
            "median_sup_increment": jnum(median(&records.iter().map(|x| x.sup_increment).collect::<Vec<_>>())),
        }),
    );
    out.finish(&summary)
}
