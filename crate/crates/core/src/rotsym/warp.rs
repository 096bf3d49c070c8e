//! Warping functions `f` of rotationally symmetric metrics `dr² + f(r)² dθ²`.

use std::io::Read;

use crate::error::{Error, Result};

/// Built-in or tabulated warping function.
#[derive(Debug, Clone, PartialEq)]
pub enum Warp {
    /// `f = sinh`, hyperbolic space.
    Sinh,
    /// `f(r) = r`, Euclidean space.
    Linear,
    /// `f(r) = e^r`.
    Exp,
    /// `f ≡ c`, a cylinder.
    Constant(f64),
    Tabulated(TabulatedWarp),
}

impl Warp {
    pub fn f(&self, r: f64) -> f64 {
        match self {
            Warp::Sinh => r.sinh(),
            Warp::Linear => r,
            Warp::Exp => r.exp(),
            Warp::Constant(c) => *c,
            Warp::Tabulated(t) => t.eval(r).0,
        }
    }

    pub fn df(&self, r: f64) -> f64 {
        match self {
            Warp::Sinh => r.cosh(),
            Warp::Linear => 1.0,
            Warp::Exp => r.exp(),
            Warp::Constant(_) => 0.0,
            Warp::Tabulated(t) => t.eval(r).1,
        }
    }

    /// `ln f`, finite wherever `f` is positive even if `f` itself overflows.
    pub fn log_f(&self, r: f64) -> f64 {
        match self {
            Warp::Sinh if r > 20.0 => r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p(),
            Warp::Exp => r,
            Warp::Linear => r.ln(),
            other => other.f(r).ln(),
        }
    }

    /// `f'/f`, evaluated without overflow for the built-in warps.
    pub fn log_derivative(&self, r: f64) -> f64 {
        match self {
            Warp::Sinh => 1.0 / r.tanh(),
            Warp::Linear => 1.0 / r,
            Warp::Exp => 1.0,
            Warp::Constant(_) => 0.0,
            Warp::Tabulated(t) => {
                let (f, df) = t.eval(r);
                df / f
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Warp::Sinh => "sinh",
            Warp::Linear => "r",
            Warp::Exp => "exp",
            Warp::Constant(_) => "constant",
            Warp::Tabulated(_) => "table",
        }
    }

    /// Parses `sinh`, `r`, `exp` or `const:<c>`.
    pub fn builtin(name: &str) -> Option<Warp> {
        match name {
            "sinh" => Some(Warp::Sinh),
            "r" | "linear" => Some(Warp::Linear),
            "exp" => Some(Warp::Exp),
            other => other
                .strip_prefix("const:")
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|c| c.is_finite() && *c > 0.0)
                .map(Warp::Constant),
        }
    }
}

/// Natural cubic spline through `(r_k, f_k)`.
///
/// Outside the table `ln f` is continued linearly with the end slope `f'/f`,
/// which keeps `f` positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedWarp {
    r: Vec<f64>,
    f: Vec<f64>,
    m: Vec<f64>,
}

impl TabulatedWarp {
    pub fn new(r: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if r.len() != f.len() {
            return Err(Error::WarpTable(format!(
                "{} radii but {} values",
                r.len(),
                f.len()
            )));
        }
        if r.len() < 3 {
            return Err(Error::WarpTable("need at least 3 rows".into()));
        }
        if r.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::WarpTable("non-finite entry".into()));
        }
        if let Some(k) = r.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::WarpTable(format!(
                "radii must be strictly increasing (row {})",
                k + 2
            )));
        }
        if r[0] <= 0.0 {
            return Err(Error::WarpTable("radii must be positive".into()));
        }
        if let Some(k) = f.iter().position(|v| *v <= 0.0) {
            return Err(Error::WarpTable(format!("f must be positive (row {})", k + 1)));
        }
        let m = natural_second_derivatives(&r, &f);
        Ok(TabulatedWarp { r, f, m })
    }

    /// Reads a two-column CSV `r,f` with a header row.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut r, mut f) = (Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::WarpTable(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::WarpTable(format!(
                    "row {} has {} columns, expected 2",
                    k + 1,
                    rec.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::WarpTable(format!("row {}: cannot parse `{s}`", k + 1)))
            };
            r.push(parse(&rec[0])?);
            f.push(parse(&rec[1])?);
        }
        Self::new(r, f)
    }

    /// `(f(r), f'(r))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.r.len();
        if x <= self.r[0] || x >= self.r[n - 1] {
            let k = if x <= self.r[0] { 0 } else { n - 1 };
            let (f0, df0) = self.interior(k.min(n - 2), self.r[k]);
            let slope = df0 / f0;
            let f = f0 * (slope * (x - self.r[k])).exp();
            return (f, slope * f);
        }
        let k = self.r.partition_point(|&rk| rk <= x) - 1;
        self.interior(k.min(n - 2), x)
    }

    fn interior(&self, k: usize, x: f64) -> (f64, f64) {
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let h = r1 - r0;
        let a = (r1 - x) / h;
        let b = (x - r0) / h;
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let f = a * self.f[k] + b * self.f[k + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let df = (self.f[k + 1] - self.f[k]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
            + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        (f, df)
    }
}

/// Second derivatives of the natural cubic spline (tridiagonal solve).
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let cc = h1 / 6.0;
        let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn builtins_parse() {
        assert_eq!(Warp::builtin("sinh"), Some(Warp::Sinh));
        assert_eq!(Warp::builtin("const:2.5"), Some(Warp::Constant(2.5)));
        assert_eq!(Warp::builtin("const:-1"), None);
        assert_eq!(Warp::builtin("cosh"), None);
    }

    #[test]
    fn spline_reproduces_smooth_warp() {
        let r: Vec<f64> = (0..=200).map(|k| 0.1 + 0.05 * k as f64).collect();
        let f: Vec<f64> = r.iter().map(|x| x.sinh()).collect();
        let t = TabulatedWarp::new(r, f).unwrap();
        for x in [0.5, 1.0, 3.3, 7.9] {
            let (f, df) = t.eval(x);
            assert_abs_diff_eq!(f / x.sinh(), 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(df / x.cosh(), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let t = TabulatedWarp::new(vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(t.eval(2.0).0, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.eval(1.5).0, t.interior(0, 1.5).0, epsilon = 1e-15);
    }

    #[test]
    fn extrapolation_is_log_linear_and_positive() {
        let r: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
        let f: Vec<f64> = r.iter().map(|x| x.exp()).collect();
        let t = TabulatedWarp::new(r, f).unwrap();
        let (f_end, df_end) = t.eval(10.0);
        let slope = df_end / f_end;
        for x in [12.0, 20.0] {
            assert_abs_diff_eq!(t.eval(x).0.ln() - f_end.ln(), slope * (x - 10.0), epsilon = 1e-9);
            assert_abs_diff_eq!(t.eval(x).1 / t.eval(x).0, slope, epsilon = 1e-12);
        }
        assert!(t.eval(0.01).0 > 0.0);
    }

    #[test]
    fn csv_table() {
        let data = "r,f\n1,1\n2,4\n3,9\n4,16\n";
        let t = TabulatedWarp::from_csv(data.as_bytes()).unwrap();
        assert_abs_diff_eq!(t.eval(3.0).0, 9.0, epsilon = 1e-12);
        let bad = "r,f\n1,1\n1,2\n3,3\n";
        assert!(matches!(TabulatedWarp::from_csv(bad.as_bytes()), Err(Error::WarpTable(_))));
        let neg = "r,f\n1,1\n2,-2\n3,3\n";
        assert!(TabulatedWarp::from_csv(neg.as_bytes()).is_err());
    }
}
