//! One enum for every field generator, with a reusable per-shape sampler.

use std::fmt;

use crate::error::{arg, Error, Result};
use crate::lattice::{FieldMeta, GeneratorId, LatticeField};
use crate::rng::Stream;
use crate::stable::{generate_model_field, CovarianceModel, LfssConfig, LfssSimulator, VarianceMap};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Zero,
    Constant(f64),
    Model(CovarianceModel),
    /// Unit-cell increments of the linear fractional stable sheet.
    Lfss(LfssConfig),
}

impl GeneratorSpec {
    /// Whether the law of `S(m; n)` is the same for every `m`.
    pub fn is_stationary(&self) -> bool {
        match self {
            GeneratorSpec::Model(CovarianceModel::Orthogonal(VarianceMap::ProductPower { beta })) => *beta == 0.0,
            _ => true,
        }
    }

    pub fn required_dim(&self) -> Option<usize> {
        match self {
            GeneratorSpec::Lfss(cfg) => Some(cfg.dim()),
            GeneratorSpec::Model(CovarianceModel::QuasiStationary { r }) => Some(r.len()),
            _ => None,
        }
    }

    /// Sampler for fields on the box `[0, extent]`.
    ///
    /// LFSS fields are labelled so that the value at `k` is the increment
    /// over the unit cell `[k, k+1]`: the increments are stationary, so this
    /// has the law of `ξ(k+1)` jointly in `k` and makes the origin available.
    pub fn sampler(&self, extent: &[u64]) -> Result<FieldSampler> {
        if extent.is_empty() {
            return arg("extent must have at least one coordinate");
        }
        if let Some(d) = self.required_dim() {
            if d != extent.len() {
                return Err(Error::Dimension {
                    expected: d,
                    got: extent.len(),
                });
            }
        }
        let shape: Vec<usize> = extent.iter().map(|&e| e as usize + 1).collect();
        let lfss = match self {
            GeneratorSpec::Lfss(cfg) => Some(LfssSimulator::new(cfg, &shape)?),
            GeneratorSpec::Model(m) => {
                m.validate(shape.len())?;
                None
            }
            _ => None,
        };
        Ok(FieldSampler {
            spec: self.clone(),
            shape,
            lfss,
        })
    }

    pub fn generator_id(&self) -> GeneratorId {
        match self {
            GeneratorSpec::Zero => GeneratorId::Zero,
            GeneratorSpec::Constant(_) => GeneratorId::Constant,
            GeneratorSpec::Model(m) => m.generator_id(),
            GeneratorSpec::Lfss(_) => GeneratorId::LfssIncrements,
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Zero => write!(f, "zero"),
            GeneratorSpec::Constant(c) => write!(f, "constant {c}"),
            GeneratorSpec::Model(m) => write!(f, "{m}"),
            GeneratorSpec::Lfss(c) => write!(
                f,
                "lfss H={:?} alpha={} kappa={:.10} h={} delta={:e}",
                c.hurst, c.alpha, c.kappa, c.step, c.delta
            ),
        }
    }
}

#[derive(Debug)]
pub struct FieldSampler {
    spec: GeneratorSpec,
    shape: Vec<usize>,
    lfss: Option<LfssSimulator>,
}

impl FieldSampler {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// One realization; the same stream always gives the same field.
    pub fn sample(&self, stream: &Stream) -> Result<LatticeField> {
        let meta = FieldMeta {
            generator: self.spec.generator_id(),
            seed: stream.seed(),
        };
        match &self.spec {
            GeneratorSpec::Zero => LatticeField::from_fn(&self.shape, meta, |_| 0.0),
            GeneratorSpec::Constant(c) => LatticeField::from_fn(&self.shape, meta, |_| *c),
            GeneratorSpec::Model(m) => generate_model_field(m, &self.shape, stream),
            GeneratorSpec::Lfss(_) => {
                let sim = self.lfss.as_ref().expect("built with the sampler");
                let f = sim.simulate(stream, &crate::parallel::ThreadBudget::sequential())?;
                LatticeField::new(self.shape.clone(), vec![0; self.shape.len()], f.into_values(), meta)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{IidLaw, StableParams};

    #[test]
    fn shapes_and_offsets() {
        let g = GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(StableParams::standard(1.5).unwrap())));
        let f = g.sampler(&[3, 4]).unwrap().sample(&Stream::new(1, "g")).unwrap();
        assert_eq!(f.shape(), &[4, 5]);
        assert_eq!(f.offset(), &[0, 0]);
        let l = GeneratorSpec::Lfss(LfssConfig::new(vec![0.8], 1.5).unwrap());
        let f = l.sampler(&[7]).unwrap().sample(&Stream::new(1, "g")).unwrap();
        assert_eq!(f.shape(), &[8]);
        assert!(l.sampler(&[7, 7]).is_err());
    }

    #[test]
    fn stationarity_flags() {
        assert!(GeneratorSpec::Zero.is_stationary());
        let o = GeneratorSpec::Model(CovarianceModel::Orthogonal(VarianceMap::ProductPower { beta: 1.0 }));
        assert!(!o.is_stationary());
    }
}
