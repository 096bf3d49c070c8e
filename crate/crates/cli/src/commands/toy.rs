use devissage::rng::stream_key;
use devissage::stats::{median, tail_certificate_series};
use devissage::toy::{
    equivariance_residual, quadratic_variation, tail_variables, toy_ensemble, SquareGrid, TestFunction, ToyId,
    ToySystem, G, MIN_TAIL_HORIZON, X,
};
use devissage::Execution;
use serde_json::{json, Map, Value};

use super::{parameters, resolve_run, resolver, RunArgs, RunDefaults};
use crate::error::CliError;
use crate::output::{jnum, num, opt, Rule, Summary, Table};

const DEFAULTS: RunDefaults = RunDefaults {
    paths: 500,
    horizon: 40.0,
    dt: 1e-2,
    stride: 10,
    tol: 1e-2,
};

pub const EXACT_TOL: f64 = 1e-12;
pub const BROKEN_FLOOR: f64 = 1e-3;
pub const FRACTION_TARGET: f64 = 0.99;
pub const QV_TARGET: f64 = 1e-4;
pub const INVARIANT_TARGET: f64 = 1e-2;

#[derive(clap::Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[command(flatten)]
    pub run: RunArgs,
    /// System 1, 2 or 3; all three when omitted.
    #[arg(long)]
    pub id: Option<u8>,
    /// Initial x.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Initial g.
    #[arg(long)]
    pub g0: Option<f64>,
    /// Fibre shift used for the equivariance residual.
    #[arg(long)]
    pub h: Option<f64>,
}

const COLUMNS: [&str; 11] = [
    "system",
    "path",
    "x_terminal",
    "g_terminal",
    "u_terminal",
    "w_terminal",
    "w_increment",
    "g_sup_increment",
    "g_converged",
    "g_fast",
    "qv_tail",
];

struct Record {
    x_terminal: f64,
    g_fast: bool,
    g_converged: bool,
    qv_tail: f64,
    w_increment: Option<f64>,
}

fn fraction(records: &[Record], f: impl Fn(&Record) -> bool) -> f64 {
    records.iter().filter(|r| f(r)).count() as f64 / records.len() as f64
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let run = resolve_run(&args.run, &r, DEFAULTS)?;
    let id: Option<u8> = r.opt("id", args.id)?;
    let x0 = r.get("x0", args.x0, 0.0)?;
    let g0 = r.get("g0", args.g0, 1.0)?;
    let h = r.get("h", args.h, 1.0)?;
    r.finish()?;

    let ids = match id {
        Some(k) => vec![ToyId::from_number(k)?],
        None => vec![ToyId::One, ToyId::Two, ToyId::Three],
    };
    if !(run.horizon >= MIN_TAIL_HORIZON) {
        return Err(CliError::Config(format!(
            "horizon must be ≥ {MIN_TAIL_HORIZON} for the tail variables, got {}",
            run.horizon
        )));
    }
    if !(x0.is_finite() && g0.is_finite() && h.is_finite()) {
        return Err(CliError::Config("x0, g0 and h must be finite".into()));
    }
    let grid = run.grid()?;
    let out = run.outputs("toy")?;
    let ids_json: Vec<u8> = ids.iter().map(|i| i.number()).collect();
    let mut summary = Summary::new(
        "toy",
        run.seed,
        run.paths,
        parameters(&run, json!({"ids": ids_json, "x0": jnum(x0), "g0": jnum(g0), "h": jnum(h)})),
    );
    let mut table = Table::new("toy", &COLUMNS.map(String::from));

    let family = TestFunction::standard_family();
    let square = SquareGrid::standard();
    let mut residuals = Map::new();
    for &id in &ids {
        let system = ToySystem::new(id);
        let res = equivariance_residual(&system.generator(), h, &family, &square);
        residuals.insert(format!("system{}", id.number()), jnum(res));
        match id {
            ToyId::One => {
                summary.claim("equivariance_system1", Some(res), EXACT_TOL, Rule::AtMost);
            }
            ToyId::Two if h != 0.0 => {
                summary.claim("equivariance_system2", Some(res), BROKEN_FLOOR, Rule::Above);
            }
            _ => {}
        }
    }
    summary.set("equivariance_residual", Value::Object(residuals));

    if run.paths == 0 {
        table.write(&out.records())?;
        return out.finish(&summary);
    }
    let fast_tol = (-run.horizon / 4.0).exp();
    for &id in &ids {
        let system = ToySystem::new(id);
        let seed = stream_key(run.seed, id.number() as u64);
        let ens = toy_ensemble(&system, x0, g0, run.paths, &grid, seed, Execution::default())?;
        let mut records = Vec::with_capacity(ens.len());
        for (i, p) in ens.paths.iter().enumerate() {
            let tail = tail_variables(p, id, run.tol)?;
            let fast = tail_certificate_series(p.times(), &p.component(G), fast_tol);
            let qv = quadratic_variation(p);
            let rec = Record {
                x_terminal: p.last()[X],
                g_fast: fast.passed,
                g_converged: tail.g_certificate.passed,
                qv_tail: qv.last().unwrap() - qv[p.index_at(0.5 * run.horizon)],
                w_increment: tail.w_increment,
            };
            table.push(vec![
                id.number().to_string(),
                i.to_string(),
                num(rec.x_terminal),
                num(tail.g_terminal),
                opt(tail.u_terminal),
                opt(tail.w_terminal),
                opt(tail.w_increment),
                num(tail.g_certificate.sup_increment),
                rec.g_converged.to_string(),
                rec.g_fast.to_string(),
                num(rec.qv_tail),
            ]);
            records.push(rec);
        }
        let k = id.number();
        match id {
            ToyId::One => {
                let half = 0.5 * run.horizon;
                summary.claim(
                    "half_speed_system1",
                    Some(fraction(&records, |r| r.x_terminal >= half)),
                    1.0,
                    Rule::AtLeast,
                );
                summary.claim(
                    "fibre_rate_system1",
                    Some(fraction(&records, |r| r.g_fast)),
                    FRACTION_TARGET,
                    Rule::AtLeast,
                );
                let qv: Vec<f64> = records.iter().map(|r| r.qv_tail).collect();
                summary.claim("qv_tail_system1", Some(median(&qv)), QV_TARGET, Rule::Below);
            }
            ToyId::Two => {
                let w: Vec<f64> = records.iter().filter_map(|r| r.w_increment.map(f64::abs)).collect();
                summary.claim("invariant_system2", Some(median(&w)), INVARIANT_TARGET, Rule::Below);
            }
            ToyId::Three => {}
        }
        if id != ToyId::Two {
            summary.claim(
                &format!("g_certificate_system{k}"),
                Some(fraction(&records, |r| r.g_converged)),
                FRACTION_TARGET,
                Rule::AtLeast,
            );
        }
    }
    table.write(&out.records())?;
    out.finish(&summary)
}
