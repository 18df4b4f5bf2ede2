use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg, Error, Result};
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::stable::StableParams;
use crate::stats::mean_se;

/// Law of a scalar sample for [`estimate_abs_moment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarLaw {
    Gaussian { sigma: f64 },
    Stable(StableParams),
    Constant(f64),
}

impl ScalarLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarLaw::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            ScalarLaw::Stable(p) => p.sample(rng),
            ScalarLaw::Constant(c) => c,
        }
    }

    /// Tail index of a non-Gaussian stable law.
    pub fn tail_index(&self) -> Option<f64> {
        match self {
            ScalarLaw::Stable(p) if !p.is_gaussian() => Some(p.alpha),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub p: f64,
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub seed: u64,
    /// `2p ≥ α` for a stable input: `|X|^p` has infinite variance and the
    /// standard error is not trustworthy.
    pub heavy_tail: bool,
}

impl MomentEstimate {
    /// Mean of `|x|^p` over the given values.
    pub fn from_values(xs: &[f64], p: f64, seed: u64, tail_index: Option<f64>) -> Self {
        let powered: Vec<f64> = xs.iter().map(|x| x.abs().powf(p)).collect();
        Self::from_powered(&powered, p, seed, tail_index)
    }

    /// Mean of values that are already `|x|^p`.
    pub fn from_powered(powered: &[f64], p: f64, seed: u64, tail_index: Option<f64>) -> Self {
        let m = mean_se(powered);
        Self {
            p,
            value: m.mean,
            std_error: m.se,
            replicates: powered.len(),
            seed,
            heavy_tail: tail_index.is_some_and(|a| 2.0 * p >= a),
        }
    }
}

/// Refuses `p ≥ α` for stable inputs, where `E|X|^p` is infinite.
pub(crate) fn require_finite_moment(p: f64, tail_index: Option<f64>) -> Result<()> {
    if !(p > 0.0) {
        return arg(format!("moment order must be positive, got {p}"));
    }
    if let Some(a) = tail_index {
        if p >= a {
            return Err(Error::Precondition(format!(
                "E|X|^p is infinite for p = {p} >= alpha = {a}; the moment conditions apply with p < alpha (1 < α < 2)"
            )));
        }
    }
    Ok(())
}

const BLOCK: usize = 4096;

pub fn estimate_abs_moment(
    law: ScalarLaw,
    p: f64,
    replicates: usize,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<MomentEstimate> {
    require_finite_moment(p, law.tail_index())?;
    if replicates == 0 {
        return arg("need at least one replicate");
    }
    let blocks = replicates.div_ceil(BLOCK);
    let parts = threads.map(blocks, |b| {
        let mut rng = stream.child(format!("block-{b}")).rng();
        let len = BLOCK.min(replicates - b * BLOCK);
        (0..len).map(|_| law.sample(&mut rng).abs().powf(p)).collect::<Vec<f64>>()
    });
    let powered: Vec<f64> = parts.into_iter().flatten().collect();
    Ok(MomentEstimate::from_powered(&powered, p, stream.seed(), law.tail_index()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_infinity, QuadSpec};

    #[test]
    fn gaussian_first_moment() {
        let e = estimate_abs_moment(
            ScalarLaw::Gaussian { sigma: 1.0 },
            1.0,
            100_000,
            &Stream::new(1, "g"),
            &ThreadBudget::sequential(),
        )
        .unwrap();
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((e.value / want - 1.0).abs() < 0.01);
        assert!(!e.heavy_tail);
    }

    #[test]
    fn constant_is_exact() {
        let e =
            estimate_abs_moment(ScalarLaw::Constant(2.0), 3.0, 10, &Stream::new(1, "c"), &ThreadBudget::sequential())
                .unwrap();
        assert_eq!(e.value, 8.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn stable_first_moment_against_quadrature() {
        // E|X| = (2/π) ∫_0^∞ (1 − Re φ(θ)) θ^{-2} dθ for a symmetric law.
        let alpha = 1.5;
        let oracle = 2.0 / std::f64::consts::PI
            * integrate_to_infinity(|t: f64| if t == 0.0 { 1.0 } else { -(-t.powf(alpha)).exp_m1() / (t * t) }, 0.0, QuadSpec::default())
                .unwrap()
                .value;
        let law = ScalarLaw::Stable(StableParams::standard(alpha).unwrap());
        let e = estimate_abs_moment(law, 1.0, 200_000, &Stream::new(2, "s"), &ThreadBudget::sequential()).unwrap();
        assert!((e.value / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", e.value);
        assert!(e.heavy_tail);
    }

    #[test]
    fn infinite_moment_is_refused() {
        let law = ScalarLaw::Stable(StableParams::standard(1.5).unwrap());
        let e = estimate_abs_moment(law, 1.5, 10, &Stream::new(1, "x"), &ThreadBudget::sequential()).unwrap_err();
        assert!(e.to_string().contains("1 < α < 2"));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let law = ScalarLaw::Stable(StableParams::standard(1.2).unwrap());
        let s = Stream::new(3, "t");
        let a = estimate_abs_moment(law, 0.5, 20_000, &s, &ThreadBudget::sequential()).unwrap();
        let b = estimate_abs_moment(law, 0.5, 20_000, &s, &ThreadBudget::new(4)).unwrap();
        assert_eq!(a, b);
    }
}
