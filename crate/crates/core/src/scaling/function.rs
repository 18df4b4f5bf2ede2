use std::fmt;
use std::str::FromStr;

use crate::error::{arg, Error, Result};

/// A positive, nondecreasing normalizer `x ↦ φ(x)` on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingFunction {
    /// `x^beta`.
    Power { beta: f64 },
    /// `(1 + x^h) · log(1 + x)^rho`.
    PowerLog { h: f64, rho: f64 },
    /// Piecewise linear in `(log x, log φ)` through the samples, extended
    /// linearly beyond the first and last segment.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    /// `base(x) · log(1 + x)^extra`.
    LogFactor { base: Box<ScalingFunction>, extra: f64 },
}

impl ScalingFunction {
    pub fn power(beta: f64) -> Self {
        ScalingFunction::Power { beta }
    }

    pub fn power_log(h: f64, rho: f64) -> Self {
        ScalingFunction::PowerLog { h, rho }
    }

    /// Samples must be positive with strictly increasing abscissae.
    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return arg("table normalizer needs at least two (x, y) samples of equal count");
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) || xs[0] <= 0.0 {
            return arg("table abscissae must be positive and strictly increasing");
        }
        if ys.iter().any(|&y| y <= 0.0 || !y.is_finite()) {
            return arg("table values must be positive and finite");
        }
        Ok(ScalingFunction::Table { xs, ys })
    }

    pub fn with_log_factor(self, extra: f64) -> Self {
        ScalingFunction::LogFactor {
            base: Box::new(self),
            extra,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalingFunction::Power { beta } => x.powf(*beta),
            ScalingFunction::PowerLog { h, rho } => (1.0 + x.powf(*h)) * x.ln_1p().powf(*rho),
            ScalingFunction::Table { xs, ys } => {
                let lx = x.ln();
                let n = xs.len();
                let seg = match xs.iter().position(|&xi| xi > x) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => n - 2,
                };
                let (x0, x1) = (xs[seg].ln(), xs[seg + 1].ln());
                let (y0, y1) = (ys[seg].ln(), ys[seg + 1].ln());
                (y0 + (y1 - y0) * (lx - x0) / (x1 - x0)).exp()
            }
            ScalingFunction::LogFactor { base, extra } => base.eval(x) * x.ln_1p().powf(*extra),
        }
    }

    /// Checks monotonicity and growth on a geometric grid over
    /// `[x_min, x_max]`; growth means the last value exceeds the first.
    pub fn check_admissible(&self, x_min: f64, x_max: f64, points: usize) -> Result<()> {
        let grid = geometric_grid(x_min, x_max, points.max(2));
        let vals: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::NotDoubling(format!("{self} is not positive at x = {}", grid[i])));
        }
        if let Some(i) = vals.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NotDoubling(format!(
                "{self} decreases between x = {} and x = {}",
                grid[i],
                grid[i + 1]
            )));
        }
        if vals[vals.len() - 1] <= vals[0] {
            return Err(Error::NotDoubling(format!("{self} does not grow on [{x_min}, {x_max}]")));
        }
        Ok(())
    }
}

pub(crate) fn geometric_grid(x_min: f64, x_max: f64, points: usize) -> Vec<f64> {
    let (l0, l1) = (x_min.ln(), x_max.ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                x_max
            } else {
                (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

impl fmt::Display for ScalingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingFunction::Power { beta } => write!(f, "power:{beta}"),
            ScalingFunction::PowerLog { h, rho } => write!(f, "powerlog:{h},{rho}"),
            ScalingFunction::Table { xs, ys } => {
                write!(f, "table:")?;
                for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x}={y}")?;
                }
                Ok(())
            }
            ScalingFunction::LogFactor { base, extra } => write!(f, "{base}|log:{extra}"),
        }
    }
}

impl FromStr for ScalingFunction {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form, e.g. `power:1.5`,
    /// `powerlog:0.8,1.2`, `table:1=1;10=3;100=9`, `power:1|log:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((base, extra)) = s.rsplit_once("|log:") {
            let extra = parse_num(extra)?;
            return Ok(base.parse::<ScalingFunction>()?.with_log_factor(extra));
        }
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("normalizer {s:?} must look like kind:params")))?;
        match kind.trim() {
            "power" => Ok(ScalingFunction::power(parse_num(params)?)),
            "powerlog" => {
                let v = parse_list(params)?;
                if v.len() != 2 {
                    return arg(format!("powerlog takes h,rho; got {params:?}"));
                }
                Ok(ScalingFunction::power_log(v[0], v[1]))
            }
            "table" => {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for pair in params.split(';') {
                    let (x, y) = pair
                        .split_once('=')
                        .ok_or_else(|| Error::Argument(format!("table entry {pair:?} must be x=y")))?;
                    xs.push(parse_num(x)?);
                    ys.push(parse_num(y)?);
                }
                ScalingFunction::table(xs, ys)
            }
            other => arg(format!("unknown normalizer kind {other:?}")),
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Argument(format!("not a number: {s:?}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_num).collect()
}
