//! CSV tables and JSON summaries.
//!
//! Numbers are written in the shortest decimal form that round-trips, so
//! output bytes depend only on the computed values.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal; `NaN`, `inf` and `-inf` for non-finite values.
pub fn num(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Finite numbers as JSON numbers, everything else as `null`.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn jopt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, jnum)
}

/// Columns `prefix_1 .. prefix_k`.
pub fn indexed(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(module: &str, columns: &[String]) -> Self {
        Table {
            header: columns.iter().map(|c| format!("{module}.{c}")).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How a claim's estimate is compared with its target.
#[derive(Debug, Clone, Copy)]
pub enum Rule {
    /// `|est - target| <= tol`.
    Within(f64),
    AtLeast,
    Above,
    Below,
    AtMost,
}

impl Rule {
    fn name(self) -> &'static str {
        match self {
            Rule::Within(_) => "within",
            Rule::AtLeast => "at_least",
            Rule::Above => "above",
            Rule::Below => "below",
            Rule::AtMost => "at_most",
        }
    }

    pub fn holds(self, est: f64, target: f64) -> bool {
        match self {
            Rule::Within(tol) => (est - target).abs() <= tol,
            Rule::AtLeast => est >= target,
            Rule::Above => est > target,
            Rule::Below => est < target,
            Rule::AtMost => est <= target,
        }
    }
}

/// JSON summary with sorted keys.
pub struct Summary {
    root: Map<String, Value>,
}

impl Summary {
    pub fn new(experiment: &str, seed: u64, paths: usize, parameters: Value) -> Self {
        let mut root = Map::new();
        root.insert("version".into(), json!(VERSION));
        root.insert("experiment".into(), json!(experiment));
        root.insert("seed".into(), json!(seed));
        root.insert("paths".into(), json!(paths));
        root.insert("parameters".into(), parameters);
        Summary { root }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.root.insert(key.to_string(), value);
    }

    /// Records a pass/fail claim; a missing estimate fails.
    pub fn claim(&mut self, name: &str, est: Option<f64>, target: f64, rule: Rule) -> bool {
        let pass = est.is_some_and(|e| rule.holds(e, target));
        let tol = match rule {
            Rule::Within(t) => jnum(t),
            _ => Value::Null,
        };
        self.set(
            name,
            json!({
                "est": jopt(est),
                "target": jnum(target),
                "rule": rule.name(),
                "tol": tol,
                "pass": pass,
            }),
        );
        pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Value::Object(self.root.clone())).expect("serializable");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Output locations of one experiment inside the output directory.
pub struct Outputs {
    dir: PathBuf,
    experiment: String,
}

impl Outputs {
    pub fn new(dir: PathBuf, experiment: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("out-dir `{}`: {e}", dir.display())))?;
        Ok(Outputs {
            dir,
            experiment: experiment.to_string(),
        })
    }

    pub fn records(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.experiment))
    }

    pub fn trajectories(&self) -> PathBuf {
        self.dir.join(format!("{}.paths.csv", self.experiment))
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join(format!("{}.json", self.experiment))
    }

    /// Writes the summary file and echoes it on stdout.
    pub fn finish(&self, summary: &Summary) -> Result<(), CliError> {
        summary.write(&self.summary())?;
        print!("{}", summary.to_json());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 42.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(0.001), "0.001");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(opt(None), "");
        assert_eq!(jnum(f64::NAN), Value::Null);
    }

    #[test]
    fn summary_keys_are_sorted() {
        let mut s = Summary::new("x", 1, 0, json!({"b": 1, "a": 2}));
        s.claim("zeta", Some(1.0), 1.0, Rule::Within(0.1));
        let text = s.to_json();
        let keys: Vec<usize> = ["\"experiment\"", "\"parameters\"", "\"paths\"", "\"seed\"", "\"version\"", "\"zeta\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
    }

    #[test]
    fn claims_fail_without_an_estimate() {
        let mut s = Summary::new("x", 1, 0, json!({}));
        assert!(!s.claim("c", None, 0.5, Rule::AtLeast));
        assert!(s.claim("d", Some(0.6), 0.5, Rule::AtLeast));
        assert!(!s.claim("e", Some(0.5), 0.5, Rule::Above));
    }
}
