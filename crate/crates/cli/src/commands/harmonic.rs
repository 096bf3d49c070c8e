use devissage::harmonic::{boundary_samples, estimate, tower_check, HarmonicEstimate, Psi, TowerConfig};
use devissage::rng::stream_key;
use devissage::Execution;
use serde_json::{json, Value};

use super::boundary::{ModelArgs, ModelSpec};
use super::{parameters, resolve_run, resolver, RunArgs, RunDefaults};
use crate::config::parse_list;
use crate::error::CliError;
use crate::output::{jnum, num, Rule, Summary, Table};

pub const DUDLEY_DEFAULTS: RunDefaults = RunDefaults {
    paths: 400,
    horizon: 30.0,
    dt: 1e-3,
    stride: 100,
    tol: 1e-2,
};

pub const TOY_DEFAULTS: RunDefaults = RunDefaults {
    paths: 2000,
    horizon: 20.0,
    dt: 1e-2,
    stride: 10,
    tol: 1e-2,
};

/// Value of the constant functional checked for exactness.
pub const CONSTANT: f64 = 0.7;
pub const SE_MULTIPLE: f64 = 3.0;

#[derive(clap::Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Functional: `const:c`, `half:coord:threshold`, `box:lo,..:hi,..` or `bump:c,..:radius`.
    #[arg(long)]
    pub psi: Option<String>,
    /// Known value of the harmonic function at the start.
    #[arg(long)]
    pub expect: Option<f64>,
    /// Intermediate states of the tower check (0 skips it).
    #[arg(long)]
    pub outer: Option<usize>,
    /// Paths per intermediate state.
    #[arg(long)]
    pub inner: Option<usize>,
    /// Time of the intermediate states.
    #[arg(long = "t-mid")]
    pub t_mid: Option<f64>,
}

pub fn parse_psi(raw: &str, dim: usize) -> Result<Psi, CliError> {
    let bad = |m: String| CliError::Config(format!("invalid value for `psi`: {m}"));
    let parts: Vec<&str> = raw.trim().split(':').collect();
    let scalar = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let vector = |s: &str| {
        let v = parse_list("psi", s)?;
        if v.len() != dim {
            return Err(bad(format!("expected {dim} components, got {}", v.len())));
        }
        Ok(v)
    };
    let psi = match parts.as_slice() {
        ["const", c] => Psi::Constant(scalar(c)?),
        ["half", coord, threshold] => {
            let coord: usize = coord.trim().parse().map_err(|e| bad(format!("coordinate `{coord}`: {e}")))?;
            if coord >= dim {
                return Err(bad(format!("coordinate {coord} out of range for dimension {dim}")));
            }
            Psi::HalfSpace {
                coord,
                threshold: scalar(threshold)?,
            }
        }
        ["box", lo, hi] => Psi::Box {
            lo: vector(lo)?,
            hi: vector(hi)?,
        },
        ["bump", center, radius] => {
            let radius = scalar(radius)?;
            if !(radius.is_finite() && radius > 0.0) {
                return Err(bad(format!("radius must be positive, got {radius}")));
            }
            Psi::Bump {
                center: vector(center)?,
                radius,
            }
        }
        _ => return Err(bad(format!("unrecognised functional `{raw}`"))),
    };
    Ok(psi)
}

fn estimate_json(e: &HarmonicEstimate) -> Value {
    json!({
        "value": jnum(e.value),
        "std_error": jnum(e.std_error),
        "n": e.n,
        "unconverged": e.unconverged,
        "warning": e.warning,
    })
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let spec = ModelSpec::resolve(&args.model, &r, "dudley")?;
    let toy = spec.is_toy();
    let run = resolve_run(&args.run, &r, if toy { TOY_DEFAULTS } else { DUDLEY_DEFAULTS })?;
    let psi_raw: String = r.get("psi", args.psi.clone(), if toy { "half:0:1.5" } else { "half:0:0" }.into())?;
    let expect: Option<f64> = match r.opt("expect", args.expect)? {
        Some(x) => Some(x),
        None if !toy => Some(0.5),
        None => None,
    };
    let outer = r.get("outer", args.outer, if toy { 50 } else { 0 })?;
    let inner = r.get("inner", args.inner, 200)?;
    let t_mid = r.get("t-mid", args.t_mid, 5.0)?;
    r.finish()?;

    let (model, start) = spec.build(run.tol, if toy { "0,0.5" } else { "0,1,0" })?;
    let psi = parse_psi(&psi_raw, model.boundary_dim())?;
    let grid = run.grid()?;
    let out = run.outputs("harmonic")?;
    let mut extra = spec.parameters(&model, &start);
    extra["psi"] = json!(psi_raw.trim());
    extra["expect"] = expect.map_or(Value::Null, jnum);
    extra["outer"] = json!(outer);
    extra["inner"] = json!(inner);
    extra["t_mid"] = jnum(t_mid);
    let mut summary = Summary::new("harmonic", run.seed, run.paths, parameters(&run, extra));
    let mut cols = vec!["path".to_string()];
    cols.extend(model.boundary_columns());
    cols.extend(["converged".to_string(), "psi".into()]);
    let mut table = Table::new("harmonic", &cols);
    if run.paths == 0 {
        table.write(&out.records())?;
        return out.finish(&summary);
    }

    let samples = boundary_samples(model.as_dyn(), &start, run.paths, &grid, stream_key(run.seed, 0), Execution::default())?;
    for (i, s) in samples.samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.value.iter().map(|x| num(*x)));
        row.extend([s.converged.to_string(), num(psi.eval(&s.value))]);
        table.push(row);
    }
    table.write(&out.records())?;

    let est = estimate(&samples, &psi);
    summary.set("estimate", estimate_json(&est));
    let constant = estimate(&samples, &Psi::Constant(CONSTANT));
    let defect = (constant.value - CONSTANT).abs() + constant.std_error;
    summary.claim("constant_exact", Some(defect), 0.0, Rule::AtMost);
    if let Some(target) = expect {
        summary.claim(
            "expected_value",
            Some(est.value),
            target,
            Rule::Within(SE_MULTIPLE * est.std_error),
        );
    }
    if outer > 0 {
        let config = TowerConfig {
            direct_paths: run.paths,
            outer,
            inner,
            t_mid,
        };
        let tower = tower_check(model.as_dyn(), &start, &psi, &config, &grid, stream_key(run.seed, 1), Execution::default())?;
        summary.claim(
            "tower",
            Some(tower.nested_value),
            tower.direct.value,
            Rule::Within(SE_MULTIPLE * tower.combined_std_error),
        );
        summary.set(
            "tower_detail",
            json!({
                "direct": estimate_json(&tower.direct),
                "nested_value": jnum(tower.nested_value),
                "nested_std_error": jnum(tower.nested_std_error),
                "combined_std_error": jnum(tower.combined_std_error),
            }),
        );
    }
    out.finish(&summary)
}
