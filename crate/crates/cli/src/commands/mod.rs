pub mod boundary;
pub mod coupling;
pub mod dudley;
pub mod harmonic;
pub mod rotsym;
pub mod toy;

use std::path::PathBuf;

use devissage::sde::TimeGrid;
use serde_json::{json, Value};

use crate::config::{ConfigFile, Resolver};
use crate::error::CliError;
use crate::output::{jnum, Outputs};

/// Flags shared by every experiment.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// `key = value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; path i uses a stream derived from (seed, i).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths (runs for `coupling`).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Simulated time horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Euler step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Record every `stride` steps.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Tail-certificate tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory receiving `<experiment>.csv` and `<experiment>.json`.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

/// Experiment-specific defaults for the shared flags.
#[derive(Debug, Clone, Copy)]
pub struct RunDefaults {
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub stride: usize,
    pub tol: f64,
}

pub const DEFAULT_SEED: u64 = 42;

pub struct Run {
    pub seed: u64,
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub stride: usize,
    pub tol: f64,
    pub out_dir: PathBuf,
}

impl Run {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.horizon, self.dt, self.stride)?)
    }

    pub fn outputs(&self, experiment: &str) -> Result<Outputs, CliError> {
        Outputs::new(self.out_dir.clone(), experiment)
    }

    pub fn parameters(&self) -> Value {
        json!({
            "horizon": jnum(self.horizon),
            "dt": jnum(self.dt),
            "stride": self.stride,
            "tol": jnum(self.tol),
        })
    }
}

pub fn resolver(args: &RunArgs) -> Result<Resolver, CliError> {
    let file = args.config.as_deref().map(ConfigFile::load).transpose()?;
    Ok(Resolver::new(file))
}

pub fn resolve_run(args: &RunArgs, r: &Resolver, d: RunDefaults) -> Result<Run, CliError> {
    Ok(Run {
        seed: r.get("seed", args.seed, DEFAULT_SEED)?,
        paths: r.get("paths", args.paths, d.paths)?,
        horizon: r.get("horizon", args.horizon, d.horizon)?,
        dt: r.get("dt", args.dt, d.dt)?,
        stride: r.get("stride", args.stride, d.stride)?,
        tol: positive("tol", r.get("tol", args.tol, d.tol)?)?,
        out_dir: r.get("out-dir", args.out_dir.clone(), PathBuf::from("out"))?,
    })
}

pub fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{key} must be positive, got {x}")))
    }
}

/// Merges `extra` into the shared parameter object.
pub fn parameters(run: &Run, extra: Value) -> Value {
    let mut p = run.parameters();
    if let (Value::Object(base), Value::Object(more)) = (&mut p, extra) {
        base.extend(more);
    }
    p
}
