use std::fmt;

use rand_distr::StandardNormal;
use rand::Rng;

use super::sampler::StableParams;
use crate::error::{arg, Error, Result};
use crate::lattice::{FieldMeta, GeneratorId, LatticeField};
use crate::rng::Stream;

/// Marginal law of an i.i.d. field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IidLaw {
    Gaussian { sigma: f64 },
    Stable(StableParams),
}

/// `σ²(n)` for an orthogonal field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMap {
    Constant(f64),
    /// `Π_i max(n_i, 1)^β`.
    ProductPower { beta: f64 },
}

impl VarianceMap {
    pub fn eval(&self, n: &[u64]) -> f64 {
        match *self {
            VarianceMap::Constant(v) => v,
            VarianceMap::ProductPower { beta } => n.iter().map(|&x| (x.max(1) as f64).powf(beta)).product(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Iid(IidLaw),
    /// Independent centered Gaussians with variances `σ²(n)`.
    Orthogonal(VarianceMap),
    /// Unit-variance Gaussian with correlation `Π_j r_j^{|lag_j|}`, built
    /// from one AR(1) recursion per axis.
    QuasiStationary { r: Vec<f64> },
}

impl CovarianceModel {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            CovarianceModel::Iid(IidLaw::Gaussian { sigma }) => {
                if !(*sigma > 0.0) {
                    return arg(format!("sigma must be positive, got {sigma}"));
                }
            }
            CovarianceModel::Iid(IidLaw::Stable(p)) => {
                StableParams::new(p.alpha, p.scale)?;
            }
            CovarianceModel::Orthogonal(VarianceMap::Constant(v)) => {
                if !(*v > 0.0) {
                    return arg(format!("variance must be positive, got {v}"));
                }
            }
            CovarianceModel::Orthogonal(VarianceMap::ProductPower { beta }) => {
                if !beta.is_finite() {
                    return arg("variance exponent must be finite");
                }
            }
            CovarianceModel::QuasiStationary { r } => {
                if r.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: r.len(),
                    });
                }
                if let Some(bad) = r.iter().find(|x| !(x.abs() < 1.0)) {
                    return Err(Error::Construction(format!(
                        "AR coefficient {bad} gives no stationary unit-variance sequence; need |r| < 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bound `f(lag)` on `|corr(ξ_m, ξ_{m+lag})|`; exact for the
    /// quasi-stationary construction, `1{lag = 0}` otherwise.
    pub fn correlation_bound(&self, lag: &[u64]) -> f64 {
        match self {
            CovarianceModel::QuasiStationary { r } => r.iter().zip(lag).map(|(r, &l)| r.abs().powi(l as i32)).product(),
            _ => {
                if lag.iter().all(|&l| l == 0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E ξ(n)²`, infinite for non-Gaussian stable marginals.
    pub fn second_moment(&self, n: &[u64]) -> f64 {
        match self {
            CovarianceModel::Iid(IidLaw::Gaussian { sigma }) => sigma * sigma,
            CovarianceModel::Iid(IidLaw::Stable(p)) => {
                if p.is_gaussian() {
                    2.0 * p.scale * p.scale
                } else {
                    f64::INFINITY
                }
            }
            CovarianceModel::Orthogonal(v) => v.eval(n),
            CovarianceModel::QuasiStationary { .. } => 1.0,
        }
    }

    pub fn generator_id(&self) -> GeneratorId {
        match self {
            CovarianceModel::Iid(IidLaw::Gaussian { .. }) => GeneratorId::IidGaussian,
            CovarianceModel::Iid(IidLaw::Stable(_)) => GeneratorId::IidStable,
            CovarianceModel::Orthogonal(_) => GeneratorId::Orthogonal,
            CovarianceModel::QuasiStationary { .. } => GeneratorId::QuasiStationary,
        }
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceModel::Iid(IidLaw::Gaussian { sigma }) => write!(f, "iid gaussian sigma={sigma}"),
            CovarianceModel::Iid(IidLaw::Stable(p)) => write!(f, "iid stable alpha={} scale={}", p.alpha, p.scale),
            CovarianceModel::Orthogonal(VarianceMap::Constant(v)) => write!(f, "orthogonal variance={v}"),
            CovarianceModel::Orthogonal(VarianceMap::ProductPower { beta }) => write!(f, "orthogonal variance=prod n_i^{beta}"),
            CovarianceModel::QuasiStationary { r } => write!(f, "quasi-stationary r={r:?}"),
        }
    }
}

/// A field on `[0, shape)` drawn from `model`.
pub fn generate_model_field(model: &CovarianceModel, shape: &[usize], stream: &Stream) -> Result<LatticeField> {
    model.validate(shape.len())?;
    let mut rng = stream.rng();
    let meta = FieldMeta {
        generator: model.generator_id(),
        seed: stream.seed(),
    };
    match model {
        CovarianceModel::Iid(IidLaw::Gaussian { sigma }) => LatticeField::from_fn(shape, meta, |_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        }),
        CovarianceModel::Iid(IidLaw::Stable(p)) => LatticeField::from_fn(shape, meta, |_| p.sample(&mut rng)),
        CovarianceModel::Orthogonal(v) => LatticeField::from_fn(shape, meta, |n| {
            let z: f64 = rng.sample(StandardNormal);
            v.eval(n).sqrt() * z
        }),
        CovarianceModel::QuasiStationary { r } => {
            let mut field = LatticeField::from_fn(shape, meta, |_| rng.sample(StandardNormal))?;
            let values = field.values_mut();
            for (axis, &ra) in r.iter().enumerate() {
                let inner: usize = shape[axis + 1..].iter().product();
                let outer: usize = shape[..axis].iter().product();
                let len = shape[axis];
                let innov = (1.0 - ra * ra).sqrt();
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * len + k) * inner + i;
                        for k in 1..len {
                            values[at(k)] = ra * values[at(k - 1)] + innov * values[at(k)];
                        }
                    }
                }
            }
            Ok(field)
        }
    }
}
