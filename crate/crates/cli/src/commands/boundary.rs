use devissage::dudley::{DudleyParams, DudleyState};
use devissage::harmonic::{boundary_law_equivariance, BoundaryModel, DudleyBoundaryModel, ToyBoundaryModel};
use devissage::rng::stream_key;
use devissage::toy::{ToyId, ToySystem};
use devissage::Execution;
use serde_json::{json, Value};

use super::{parameters, resolve_run, resolver, RunArgs, RunDefaults};
use crate::config::{parse_list, Resolver};
use crate::error::CliError;
use crate::output::{indexed, jnum, num, Rule, Summary, Table};

pub const KS_LEVEL: f64 = 1e-3;

pub const TOY_DEFAULTS: RunDefaults = RunDefaults {
    paths: 2000,
    horizon: 20.0,
    dt: 1e-2,
    stride: 10,
    tol: 1e-2,
};

pub const DUDLEY_DEFAULTS: RunDefaults = RunDefaults {
    paths: 1000,
    horizon: 30.0,
    dt: 1e-3,
    stride: 100,
    tol: 1e-2,
};

/// Model flags shared by `boundary-law` and `harmonic`.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// `toy` or `dudley`.
    #[arg(long)]
    pub model: Option<String>,
    /// Toy system 1, 2 or 3.
    #[arg(long)]
    pub id: Option<u8>,
    /// Dimension of the hyperbolic space (≥ 2).
    #[arg(long = "d")]
    pub d: Option<usize>,
    /// Noise scale σ.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Starting state: `x,g` for toy; `alpha,beta,delta` or the full
    /// `alpha,beta,gamma..,h..,delta` for dudley.
    #[arg(long)]
    pub start: Option<String>,
}

pub enum Model {
    Toy(ToyBoundaryModel),
    Dudley(DudleyBoundaryModel),
}

impl Model {
    pub fn as_dyn(&self) -> &dyn BoundaryModel {
        match self {
            Model::Toy(m) => m,
            Model::Dudley(m) => m,
        }
    }

    /// Dimension of the boundary value.
    pub fn boundary_dim(&self) -> usize {
        match self {
            Model::Toy(_) => 1,
            Model::Dudley(m) => m.params.d(),
        }
    }

    /// Column names of the boundary value.
    pub fn boundary_columns(&self) -> Vec<String> {
        match self {
            Model::Toy(_) => vec!["g_inf".into()],
            Model::Dudley(m) => {
                let mut c = indexed("h_inf", m.params.d() - 1);
                c.push("delta_inf".into());
                c
            }
        }
    }
}

/// Resolved model, start state and parameter record.
pub struct ModelSpec {
    pub name: String,
    pub id: Option<u8>,
    pub d: Option<usize>,
    pub sigma: Option<f64>,
    pub start_raw: Option<String>,
}

impl ModelSpec {
    /// Reads the model keys; `default_model` applies when none is given.
    pub fn resolve(args: &ModelArgs, r: &Resolver, default_model: &str) -> Result<Self, CliError> {
        let name: String = r.get("model", args.model.clone(), default_model.to_string())?;
        if name != "toy" && name != "dudley" {
            return Err(CliError::Config(format!("model must be `toy` or `dudley`, got `{name}`")));
        }
        Ok(ModelSpec {
            name,
            id: r.opt("id", args.id)?,
            d: r.opt("d", args.d)?,
            sigma: r.opt("sigma", args.sigma)?,
            start_raw: r.opt("start", args.start.clone())?,
        })
    }

    pub fn is_toy(&self) -> bool {
        self.name == "toy"
    }

    /// Builds the model; `default_start` is used when no start was given.
    pub fn build(&self, tol: f64, default_start: &str) -> Result<(Model, Vec<f64>), CliError> {
        let raw = self.start_raw.as_deref().unwrap_or(default_start);
        let start = parse_list("start", raw)?;
        if self.is_toy() {
            if self.d.is_some() || self.sigma.is_some() {
                return Err(CliError::Config("d and sigma apply to the dudley model only".into()));
            }
            let id = ToyId::from_number(self.id.unwrap_or(1))?;
            if start.len() != 2 {
                return Err(CliError::Config(format!("start must be `x,g` for toy, got {} values", start.len())));
            }
            let model = ToyBoundaryModel {
                system: ToySystem::new(id),
                tolerance: tol,
            };
            Ok((Model::Toy(model), start))
        } else {
            if self.id.is_some() {
                return Err(CliError::Config("id applies to the toy model only".into()));
            }
            let d = self.d.unwrap_or(3);
            let params = DudleyParams::new(d, self.sigma.unwrap_or(1.0))?;
            let state = match start.len() {
                3 => DudleyState::new(start[0], start[1], vec![0.0; d - 1], vec![0.0; d - 1], start[2])?,
                n if n == 2 * d + 1 => DudleyState::new(
                    start[0],
                    start[1],
                    start[2..d + 1].to_vec(),
                    start[d + 1..2 * d].to_vec(),
                    start[2 * d],
                )?,
                n => {
                    return Err(CliError::Config(format!(
                        "start must have 3 or {} values for dudley, got {n}",
                        2 * d + 1
                    )))
                }
            };
            let model = DudleyBoundaryModel {
                params,
                tolerance: tol,
            };
            Ok((Model::Dudley(model), state.to_vec()))
        }
    }

    pub fn parameters(&self, model: &Model, start: &[f64]) -> Value {
        let mut p = json!({"model": self.name, "start": start.iter().map(|x| jnum(*x)).collect::<Vec<_>>()});
        match model {
            Model::Toy(m) => p["id"] = json!(m.system.id.number()),
            Model::Dudley(m) => {
                p["d"] = json!(m.params.d());
                p["sigma"] = jnum(m.params.sigma());
            }
        }
        p
    }
}

#[derive(clap::Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Group element: one value for toy, `h_1,..,h_{d-1},delta` for dudley.
    #[arg(long)]
    pub shift: Option<String>,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let r = resolver(&args.run)?;
    let spec = ModelSpec::resolve(&args.model, &r, "toy")?;
    let defaults = if spec.is_toy() { TOY_DEFAULTS } else { DUDLEY_DEFAULTS };
    let run = resolve_run(&args.run, &r, defaults)?;
    let shift_raw: Option<String> = r.opt("shift", args.shift.clone())?;
    r.finish()?;

    let (model, start) = spec.build(run.tol, if spec.is_toy() { "0,0" } else { "0,1,0" })?;
    let shift = match &shift_raw {
        Some(raw) => parse_list("shift", raw)?,
        None if spec.is_toy() => vec![0.5],
        None => {
            let mut h = vec![0.0; model.boundary_dim()];
            h[model.boundary_dim() - 1] = 1.0;
            h
        }
    };
    if shift.len() != model.boundary_dim() {
        return Err(CliError::Config(format!(
            "shift must have {} values, got {}",
            model.boundary_dim(),
            shift.len()
        )));
    }
    let grid = run.grid()?;
    let out = run.outputs("boundary-law")?;
    let mut extra = spec.parameters(&model, &start);
    extra["shift"] = json!(shift.iter().map(|x| jnum(*x)).collect::<Vec<_>>());
    let mut summary = Summary::new("boundary-law", run.seed, run.paths, parameters(&run, extra));
    let mut cols = vec!["sample".to_string(), "path".into()];
    cols.extend(model.boundary_columns());
    cols.push("converged".into());
    let mut table = Table::new("boundary", &cols);
    if run.paths == 0 {
        table.write(&out.records())?;
        return out.finish(&summary);
    }

    let report = boundary_law_equivariance(
        model.as_dyn(),
        &start,
        &shift,
        run.paths,
        &grid,
        stream_key(run.seed, 0),
        stream_key(run.seed, 1),
        Execution::default(),
    )?;
    for (label, samples) in [("moved", &report.moved), ("shifted", &report.shifted)] {
        for (i, s) in samples.samples.iter().enumerate() {
            let mut row = vec![label.to_string(), i.to_string()];
            row.extend(s.value.iter().map(|x| num(*x)));
            row.push(s.converged.to_string());
            table.push(row);
        }
    }
    table.write(&out.records())?;

    summary.claim("law_equivariance", Some(report.min_p()), KS_LEVEL, Rule::Above);
    summary.set(
        "ks",
        Value::Array(
            report
                .coordinates
                .iter()
                .map(|c| json!({"coordinate": c.coordinate, "statistic": jnum(c.statistic), "p_value": jnum(c.p_value)}))
                .collect(),
        ),
    );
    summary.set(
        "statistics",
        json!({
            "unconverged_moved": report.moved.unconverged(),
            "unconverged_shifted": report.shifted.unconverged(),
        }),
    );
    out.finish(&summary)
}
