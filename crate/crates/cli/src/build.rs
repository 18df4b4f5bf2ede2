//! Core types from configuration sections.

use slln_core::moments::{PlanCheck, Verdict};
use slln_core::stable::{IidLaw, VarianceMap};
use slln_core::{CovarianceModel, GeneratorSpec, LfssConfig, Norm, ScalingFunction, StableParams};

use crate::config::Config;
use crate::exit::Failure;

const GENERATORS: &[&str] = &["zero", "constant", "gaussian", "stable", "orthogonal", "quasi-stationary", "lfss"];

/// `[generator]`: `kind` plus the parameters of that kind.
pub fn generator(cfg: &Config) -> Result<GeneratorSpec, Failure> {
    let kind = cfg.choice("generator.kind", GENERATORS, "stable")?;
    let spec = match kind.as_str() {
        "zero" => GeneratorSpec::Zero,
        "constant" => GeneratorSpec::Constant(cfg.f64_or("generator.value", 1.0)?),
        "gaussian" => GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Gaussian {
            sigma: cfg.f64_or("generator.sigma", 1.0)?,
        })),
        "stable" => GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(StableParams::new(
            cfg.f64_or("generator.alpha", 1.5)?,
            cfg.f64_or("generator.scale", 1.0)?,
        )?))),
        "orthogonal" => {
            let map = if cfg.contains("generator.variance") {
                VarianceMap::Constant(cfg.f64_req("generator.variance")?)
            } else {
                VarianceMap::ProductPower {
                    beta: cfg.f64_or("generator.beta", 0.0)?,
                }
            };
            GeneratorSpec::Model(CovarianceModel::Orthogonal(map))
        }
        "quasi-stationary" => GeneratorSpec::Model(CovarianceModel::QuasiStationary {
            r: cfg.f64s_req("generator.r")?,
        }),
        _ => GeneratorSpec::Lfss(lfss(cfg)?),
    };
    Ok(spec)
}

pub fn lfss(cfg: &Config) -> Result<LfssConfig, Failure> {
    let mut c = LfssConfig::new(cfg.f64s_req("generator.hurst")?, cfg.f64_or("generator.alpha", 1.5)?)?;
    let cells = cfg.u64_or("generator.cells_per_unit", c.cells_per_unit() as u64)?;
    let delta = cfg.f64_or("generator.delta", c.delta)?;
    c = c.with_step(1.0 / cells as f64)?.with_delta(delta)?;
    if let Some(l) = cfg.opt_str("generator.truncation") {
        let l: f64 = l
            .parse()
            .map_err(|_| Failure::config(format!("generator.truncation = {l:?} is not a real number")))?;
        c = c.with_truncation(Some(l))?;
    }
    cfg.note("generator.kappa", format!("{:.12}", c.kappa));
    Ok(c)
}

pub fn lfss_required(cfg: &Config) -> Result<LfssConfig, Failure> {
    match cfg.choice("generator.kind", &["lfss"], "lfss") {
        Ok(_) => lfss(cfg),
        Err(_) => Err(Failure::config("this command needs generator.kind = lfss")),
    }
}

/// `<section>.phi` for every axis, `<section>.phi1`, `phi2`, … per axis.
pub fn normalizers(cfg: &Config, section: &str, dim: usize) -> Result<Vec<ScalingFunction>, Failure> {
    let common = cfg.opt_str(&format!("{section}.phi"));
    (1..=dim)
        .map(|j| {
            let s = cfg
                .opt_str(&format!("{section}.phi{j}"))
                .or_else(|| common.clone())
                .ok_or_else(|| Failure::config(format!("missing {section}.phi (or {section}.phi{j})")))?;
            Ok(s.parse::<ScalingFunction>()?)
        })
        .collect()
}

pub fn scaling(cfg: &Config, key: &str) -> Result<ScalingFunction, Failure> {
    Ok(cfg.str_req(key)?.parse::<ScalingFunction>()?)
}

pub fn norm(cfg: &Config, key: &str) -> Result<Norm, Failure> {
    let s = cfg.str_or(key, "l2");
    Norm::parse(&s).ok_or_else(|| Failure::config(format!("{key} = {s:?}; expected l2 or linf")))
}

pub fn plan_check(cfg: &Config, key: &str) -> Result<PlanCheck, Failure> {
    Ok(match cfg.choice(key, &["enforce", "report"], "enforce")?.as_str() {
        "enforce" => PlanCheck::Enforce,
        _ => PlanCheck::Report,
    })
}

/// Dimension from the generator when it fixes one, else `<key>` (default 1).
pub fn dimension(cfg: &Config, gen: &GeneratorSpec, key: &str) -> Result<usize, Failure> {
    match gen.required_dim() {
        Some(d) => {
            if cfg.contains(key) && cfg.u64_req(key)? as usize != d {
                return Err(Failure::config(format!("{key} disagrees with the generator's dimension {d}")));
            }
            cfg.note(key, d);
            Ok(d)
        }
        None => {
            let d = cfg.u64_or(key, 1)? as usize;
            if d == 0 {
                return Err(Failure::config(format!("{key} must be at least 1")));
            }
            Ok(d)
        }
    }
}

/// Expected verdict of a series check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Any,
    Is(Verdict),
    /// Diverges or inconclusive.
    NotConverges,
}

impl Expect {
    pub fn parse(cfg: &Config, key: &str) -> Result<Self, Failure> {
        let s = cfg.choice(key, &["any", "converges", "diverges", "inconclusive", "not-converges"], "any")?;
        Ok(match s.as_str() {
            "any" => Expect::Any,
            "not-converges" => Expect::NotConverges,
            other => Expect::Is(Verdict::parse(other).expect("listed choice")),
        })
    }

    pub fn met(self, v: Verdict) -> bool {
        match self {
            Expect::Any => true,
            Expect::Is(w) => v == w,
            Expect::NotConverges => v != Verdict::Converges,
        }
    }
}
