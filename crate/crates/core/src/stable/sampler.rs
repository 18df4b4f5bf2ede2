use std::f64::consts::FRAC_PI_2;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{arg, Result};

/// Symmetric α-stable law with characteristic function `exp(−|scale·θ|^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub scale: f64,
}

impl StableParams {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return arg(format!("stability index must lie in (0, 2], got {alpha}"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return arg(format!("scale must be positive, got {scale}"));
        }
        Ok(Self { alpha, scale })
    }

    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn is_gaussian(&self) -> bool {
        self.alpha == 2.0
    }

    /// `exp(−|scale·θ|^α)`.
    pub fn characteristic_function(&self, theta: f64) -> f64 {
        (-(self.scale * theta).abs().powf(self.alpha)).exp()
    }

    /// One draw by the Chambers–Mallows–Stuck method.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * standard_sas(self.alpha, rng)
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out {
            *x = self.sample(rng);
        }
    }
}

/// Unit-scale symmetric stable variate.
///
/// With `V ~ U(−π/2, π/2)` and `W ~ Exp(1)`,
/// `X = sin(αV) / cos(V)^{1/α} · (cos((1−α)V) / W)^{(1−α)/α}`;
/// `α = 1` reduces to `tan V` and `α = 2` to `N(0, 2)`.
#[inline]
pub fn standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = FRAC_PI_2 * (2.0 * u - 1.0);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let cv = v.cos();
    (alpha * v).sin() / cv.powf(1.0 / alpha) * ((((1.0 - alpha) * v).cos()) / w).powf((1.0 - alpha) / alpha)
}

/// One draw of `SαS(alpha, scale)` with argument checking.
pub fn sample_sas<R: Rng + ?Sized>(params: StableParams, rng: &mut R) -> Result<f64> {
    StableParams::new(params.alpha, params.scale)?;
    Ok(params.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::stats::{ecf_real, quantile_sorted, sorted};

    fn draws(alpha: f64, n: usize, path: &str) -> Vec<f64> {
        let p = StableParams::standard(alpha).unwrap();
        let mut rng = Stream::new(11, path).rng();
        (0..n).map(|_| p.sample(&mut rng)).collect()
    }

    #[test]
    fn gaussian_reduction_variance() {
        let x = draws(2.0, 100_000, "var");
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 2.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn cauchy_quartiles() {
        let x = sorted(&draws(1.0, 100_000, "iqr"));
        let iqr = quantile_sorted(&x, 0.75) - quantile_sorted(&x, 0.25);
        assert!((iqr - 2.0).abs() < 0.06, "{iqr}");
    }

    #[test]
    fn characteristic_function_matches() {
        for alpha in [0.8, 1.0, 1.2, 1.5, 1.8, 2.0] {
            let x = draws(alpha, 100_000, &format!("ecf-{alpha}"));
            let p = StableParams::standard(alpha).unwrap();
            for theta in [0.25, 0.5, 1.0, 2.0] {
                let err = (ecf_real(&x, theta) - p.characteristic_function(theta)).abs();
                assert!(err < 0.02, "alpha={alpha} theta={theta} err={err}");
            }
        }
    }

    #[test]
    fn rejects_bad_index() {
        assert!(StableParams::new(2.5, 1.0).is_err());
        assert!(StableParams::new(0.0, 1.0).is_err());
    }
}
