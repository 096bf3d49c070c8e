use std::fs::File;
use std::path::PathBuf;

use devissage::rotsym::{
    check_conditions, escape_angle_law, escape_path, sphere_coordinate_cdf, Conditions, EscapeConfig,
    StartDirection, TabulatedWarp, Warp, WarpModel,
};
use devissage::stats::{ks_one_sample, median};
use devissage::Execution;
use serde_json::{json, Value};

use super::{parameters, positive, resolve_run, resolver, RunArgs, RunDefaults};
use crate::config::parse_list;
use crate::error::CliError;
use crate::output::{indexed, jnum, num, Rule, Summary, Table};

const DEFAULTS: RunDefaults = RunDefaults {
    paths: 2000,
    horizon: 20.0,
    dt: 1e-2,
    stride: 10,
    tol: 1e-2,
};

pub const KS_LEVEL: f64 = 1e-3;
pub const HEMISPHERE_TARGET: f64 = 0.9;
pub const PLATEAU_TARGET: f64 = 0.05;
/// Lower end of the integrability checks.
pub const R_LO: f64 = 1.0;

#[derive(clap::Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[command(flatten)]
    pub run: RunArgs,
    /// Warp function: sinh, r, exp or const:<c>.
    #[arg(long)]
    pub warp: Option<String>,
    /// CSV with columns r,f; overrides --warp.
    #[arg(long = "warp-table")]
    pub warp_table: Option<PathBuf>,
    /// Dimension of the manifold (≥ 2).
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Only evaluate the three integrability conditions.
    #[arg(long = "check-only")]
    pub check_only: bool,
    /// Starting radius.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Starting direction: `uniform` or a comma-separated vector.
    #[arg(long)]
    pub start: Option<String>,
    /// Also dump the recorded trajectories of the first K paths.
    #[arg(long)]
    pub trajectories: Option<usize>,
}

fn conditions_json(c: &Conditions) -> Value {
    json!({
        "c1": c.c1, "c2": c.c2, "c3": c.c3,
        "i1": jnum(c.i1), "i2": jnum(c.i2), "i3": jnum(c.i3),
    })
}

fn parse_start(raw: &str, n: usize) -> Result<StartDirection, CliError> {
    if raw.trim() == "uniform" {
        return Ok(StartDirection::Uniform);
    }
    let v = parse_list("start", raw)?;
    if v.len() != n {
        return Err(CliError::Config(format!("start must have {n} components, got {}", v.len())));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(CliError::Config("start must be a nonzero vector".into()));
    }
    Ok(StartDirection::Fixed(v.iter().map(|x| x / norm).collect()))
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let run = resolve_run(&args.run, &r, DEFAULTS)?;
    let warp_name: String = r.get("warp", args.warp.clone(), "sinh".to_string())?;
    let table: Option<PathBuf> = r.opt("warp-table", args.warp_table.clone())?;
    let n = r.get("n", args.n, 3)?;
    let check_only = r.switch("check-only", args.check_only)?;
    let r0 = positive("r0", r.get("r0", args.r0, 1.0)?)?;
    let start_raw: String = r.get("start", args.start.clone(), "uniform".to_string())?;
    let dump = r.get("trajectories", args.trajectories, 0)?;
    r.finish()?;

    let warp = match &table {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("warp-table `{}`: {e}", path.display())))?;
            Warp::Tabulated(TabulatedWarp::from_csv(file)?)
        }
        None => Warp::builtin(&warp_name)
            .ok_or_else(|| CliError::Config(format!("unknown warp `{warp_name}`")))?,
    };
    let model = WarpModel::new(n, warp)?;
    let conditions = check_conditions(&model, R_LO)?;
    let out = run.outputs("rotsym")?;
    let extra = json!({
        "warp": model.name(),
        "n": n,
        "r0": jnum(r0),
        "start": start_raw.trim(),
        "check_only": check_only,
    });
    let mut summary = Summary::new("rotsym", run.seed, if check_only { 0 } else { run.paths }, parameters(&run, extra));
    if let Value::Object(m) = conditions_json(&conditions) {
        for (k, v) in m {
            summary.set(&k, v);
        }
    }
    if check_only {
        return out.finish(&summary);
    }
    if !conditions.all() {
        return Err(CliError::Config(format!(
            "warp `{}` fails the integrability conditions: {}",
            model.name(),
            conditions.diagnostic()
        )));
    }

    let start = parse_start(&start_raw, n)?;
    let mut cols = vec!["path".to_string()];
    cols.extend(indexed("theta_inf", n));
    cols.extend(
        ["r_terminal", "tau_half", "tau_terminal", "sup_increment", "converged", "reflected"].map(String::from),
    );
    let mut records = Table::new("rotsym", &cols);
    if run.paths == 0 {
        records.write(&out.records())?;
        return out.finish(&summary);
    }
    let config = EscapeConfig {
        r0,
        start: start.clone(),
        paths: run.paths,
        grid: run.grid()?,
        seed: run.seed,
        tolerance: run.tol,
    };
    let samples = escape_angle_law(&model, &config, Execution::default())?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.theta_inf.iter().map(|x| num(*x)));
        row.extend([
            num(s.r_terminal),
            num(s.tau_half),
            num(s.tau_terminal),
            num(s.certificate.sup_increment),
            s.certificate.passed.to_string(),
            s.reflected.to_string(),
        ]);
        records.push(row);
    }
    records.write(&out.records())?;

    if dump > 0 {
        let mut cols = vec!["path".to_string(), "t".into(), "r".into(), "tau".into()];
        cols.extend(indexed("theta", n));
        let mut traj = Table::new("rotsym", &cols);
        for i in 0..dump.min(run.paths) {
            let p = escape_path(&model, &config, i)?;
            for k in 0..p.times.len() {
                let mut row = vec![i.to_string(), num(p.times[k]), num(p.r[k]), num(p.tau[k])];
                row.extend(p.theta[k].iter().map(|x| num(*x)));
                traj.push(row);
            }
        }
        traj.write(&out.trajectories())?;
    }

    match &start {
        StartDirection::Uniform => {
            let cdf = sphere_coordinate_cdf(n)?;
            let mut ks = Vec::with_capacity(n);
            for c in 0..n {
                let xs: Vec<f64> = samples.iter().map(|s| s.theta_inf[c]).collect();
                ks.push(ks_one_sample(&xs, &cdf)?);
            }
            let min_p = ks.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
            summary.claim("escape_uniform", Some(min_p), KS_LEVEL, Rule::Above);
            summary.set(
                "ks",
                Value::Array(
                    ks.iter()
                        .enumerate()
                        .map(|(c, (d, p))| json!({"coordinate": c, "statistic": jnum(*d), "p_value": jnum(*p)}))
                        .collect(),
                ),
            );
        }
        StartDirection::Fixed(dir) => {
            let same = samples
                .iter()
                .filter(|s| s.theta_inf.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>() > 0.0)
                .count();
            summary.claim(
                "hemisphere_mass",
                Some(same as f64 / samples.len() as f64),
                HEMISPHERE_TARGET,
                Rule::Above,
            );
        }
    }
    let half = median(&samples.iter().map(|s| s.tau_half).collect::<Vec<_>>());
    let tail = median(&samples.iter().map(|s| s.tau_terminal - s.tau_half).collect::<Vec<_>>());
    summary.claim("clock_plateau", Some(tail / half), PLATEAU_TARGET, Rule::Below);
    summary.set(
        "statistics",
        json!({
            "converged": samples.iter().filter(|s| s.certificate.passed).count(),
            "reflected": samples.iter().filter(|s| s.reflected).count(),
            "median_tau_half": jnum(half),
            "median_tau_tail": jnum(tail),
        }),
    );
    out.finish(&summary)
}
