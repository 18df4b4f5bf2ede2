use crate::error::{arg, Error, Result};
use crate::quad::{integrate, integrate_to_infinity, QuadSpec};

/// `x_+^e`, with `x_+^e = 0` for `x ≤ 0` (so `x_+^0 = 1{x > 0}`).
#[inline]
pub fn pos_pow(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        x.powf(e)
    } else {
        0.0
    }
}

/// `(1+u)^e − u^e` for `u > 0` without cancellation for large `u`.
#[inline]
pub fn power_difference(u: f64, e: f64) -> f64 {
    u.powf(e) * (e * (1.0 / u).ln_1p()).exp_m1()
}

/// `∫|(1−s)_+^e − (−s)_+^e|^α ds` over the real line, i.e. the α-norm mass
/// of the one-dimensional kernel at `t = 1` before normalization.
pub fn kernel_alpha_mass(h: f64, alpha: f64, spec: QuadSpec) -> Result<f64> {
    let e = h - 1.0 / alpha;
    // s ∈ (0, 1): (1−s)^{eα}, closed form.
    let inner = 1.0 / (e * alpha + 1.0);
    if e == 0.0 {
        return Ok(inner);
    }
    let f = |u: f64| power_difference(u, e).abs().powf(alpha);
    let near = integrate(f, 0.0, 1.0, spec)?;
    let far = tail_integral(f, 1.0, spec)?;
    Ok(inner + near.value + far)
}

/// `∫_L^∞ f` through `x = L e^v`, which turns power tails into exponential
/// ones before the half-line map.
pub(crate) fn tail_integral<F: Fn(f64) -> f64>(f: F, l: f64, spec: QuadSpec) -> Result<f64> {
    let g = |v: f64| {
        let x = l * v.exp();
        f(x) * x
    };
    Ok(integrate_to_infinity(g, 0.0, spec)?.value)
}

/// One-dimensional factor `κ₁(H) = I(H)^{−1/α}`.
pub fn kappa_1d(h: f64, alpha: f64, spec: QuadSpec) -> Result<f64> {
    Ok(kernel_alpha_mass(h, alpha, spec)?.powf(-1.0 / alpha))
}

/// `κ` such that the scale of the sheet at `⟨1⟩` is one. The kernel is a
/// product over coordinates, so `κ = Π_j κ₁(H_j)`.
pub fn normalize_kappa(hurst: &[f64], alpha: f64, spec: QuadSpec) -> Result<f64> {
    let mut k = 1.0;
    for &h in hurst {
        k *= kappa_1d(h, alpha, spec)?;
    }
    Ok(k)
}

/// How the mid-range part of each axis convolution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Direct,
    Fft,
    /// FFT once the direct cost would exceed a fixed threshold.
    Auto,
}

/// Parameters of the linear fractional stable sheet and its discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct LfssConfig {
    pub hurst: Vec<f64>,
    pub alpha: f64,
    pub kappa: f64,
    /// Fine cell width `h`; `1/h` must be an integer.
    pub step: f64,
    /// Largest admissible discarded α-norm mass of the increment kernel.
    pub delta: f64,
    /// Fixed truncation length; `None` grows it geometrically until the
    /// discarded mass is below `delta`.
    pub truncation: Option<f64>,
    /// Upper limit for the automatic truncation length.
    pub truncation_max: f64,
    /// Width, in lattice units, of the fine-cell zone behind each site.
    pub near_units: u64,
    pub conv: ConvMethod,
}

pub const DEFAULT_STEP: f64 = 1.0 / 16.0;
pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_TRUNCATION_MAX: f64 = 1e15;
pub const DEFAULT_NEAR_UNITS: u64 = 16;

impl LfssConfig {
    /// Validates `H ∈ (0,1)^d`, `α ∈ (0, 2]` and computes `κ`.
    pub fn new(hurst: Vec<f64>, alpha: f64) -> Result<Self> {
        if hurst.is_empty() {
            return arg("Hurst vector must be nonempty");
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return arg(format!("stability index must lie in (0, 2], got {alpha}"));
        }
        for (j, &h) in hurst.iter().enumerate() {
            if !(h > 0.0 && h < 1.0) {
                return arg(format!("H[{j}] = {h} must lie in (0, 1)"));
            }
            if h - 1.0 / alpha <= -1.0 {
                return arg(format!(
                    "H[{j}] - 1/alpha = {} makes the kernel non-integrable on cells",
                    h - 1.0 / alpha
                ));
            }
        }
        let kappa = normalize_kappa(&hurst, alpha, QuadSpec::default())?;
        Ok(Self {
            hurst,
            alpha,
            kappa,
            step: DEFAULT_STEP,
            delta: DEFAULT_DELTA,
            truncation: None,
            truncation_max: DEFAULT_TRUNCATION_MAX,
            near_units: DEFAULT_NEAR_UNITS,
            conv: ConvMethod::Auto,
        })
    }

    pub fn dim(&self) -> usize {
        self.hurst.len()
    }

    pub fn exponent(&self, j: usize) -> f64 {
        self.hurst[j] - 1.0 / self.alpha
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        let r = (1.0 / step).round();
        if !(step > 0.0) || r < 1.0 || ((1.0 / step) - r).abs() > 1e-9 {
            return arg(format!("cell step {step} must be 1/k for an integer k >= 1"));
        }
        self.step = 1.0 / r;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return arg(format!("discarded mass bound {delta} must lie in (0, 1)"));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_truncation(mut self, l: Option<f64>) -> Result<Self> {
        if let Some(l) = l {
            if !(l >= 1.0) || !l.is_finite() {
                return arg(format!("truncation length {l} must be at least 1"));
            }
        }
        self.truncation = l;
        Ok(self)
    }

    pub fn with_conv(mut self, conv: ConvMethod) -> Self {
        self.conv = conv;
        self
    }

    pub fn with_near_units(mut self, units: u64) -> Result<Self> {
        if units == 0 {
            return arg("near zone must be at least one unit wide");
        }
        self.near_units = units;
        Ok(self)
    }

    /// Cells per lattice unit, `1/h`.
    pub fn cells_per_unit(&self) -> usize {
        (1.0 / self.step).round() as usize
    }

    /// Refuses configurations outside `1 < α < 2` and `1/α < H_j < 1`.
    pub fn require_theorem_regime(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::Precondition(format!(
                "requires 1 < α < 2 and 1/α < H_j < 1; got α = {}",
                self.alpha
            )));
        }
        for (j, &h) in self.hurst.iter().enumerate() {
            if !(h > 1.0 / self.alpha) {
                return Err(Error::Precondition(format!(
                    "requires 1 < α < 2 and 1/α < H_j < 1; got H[{j}] = {h} <= 1/α = {:.6}",
                    1.0 / self.alpha
                )));
            }
        }
        Ok(())
    }
}

/// `g(t, s) = κ Π_ℓ [(t_ℓ − s_ℓ)_+^{H_ℓ−1/α} − (−s_ℓ)_+^{H_ℓ−1/α}]`.
pub fn kernel_g(t: &[f64], s: &[f64], cfg: &LfssConfig) -> f64 {
    assert_eq!(t.len(), cfg.dim());
    assert_eq!(s.len(), cfg.dim());
    let mut g = cfg.kappa;
    for j in 0..cfg.dim() {
        g *= kernel_g1(t[j], s[j], cfg.exponent(j));
    }
    g
}

/// One factor of [`kernel_g`] without `κ`.
#[inline]
pub fn kernel_g1(t: f64, s: f64, e: f64) -> f64 {
    pos_pow(t - s, e) - pos_pow(-s, e)
}

/// Increment kernel `ψ(x) = (x+1)_+^e − x_+^e` and its antiderivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementKernel {
    pub e: f64,
}

impl IncrementKernel {
    pub fn psi(&self, x: f64) -> f64 {
        pos_pow(x + 1.0, self.e) - pos_pow(x, self.e)
    }

    /// `Ψ(x) = ∫_{−1}^x ψ = P(x+1) − P(x)` with `P(y) = y_+^{e+1}/(e+1)`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let e1 = self.e + 1.0;
        if x <= -1.0 {
            0.0
        } else if x <= 0.0 {
            (x + 1.0).powf(e1) / e1
        } else {
            x.powf(e1) * (e1 * (1.0 / x).ln_1p()).exp_m1() / e1
        }
    }

    /// `(1/(x1−x0)) ∫_{x0}^{x1} ψ`.
    pub fn cell_average(&self, x0: f64, x1: f64) -> f64 {
        (self.antiderivative(x1) - self.antiderivative(x0)) / (x1 - x0)
    }

    /// `∫_{−1}^∞ |ψ|^α`, equal to [`kernel_alpha_mass`].
    pub fn alpha_mass(&self, alpha: f64) -> Result<f64> {
        kernel_alpha_mass(self.e + 1.0 / alpha, alpha, QuadSpec::default())
    }

    /// `∫_L^∞ |ψ|^α`.
    pub fn tail_mass(&self, l: f64, alpha: f64) -> Result<f64> {
        if self.e == 0.0 {
            return Ok(0.0);
        }
        let e = self.e;
        tail_integral(|x| power_difference(x, e).abs().powf(alpha), l, QuadSpec::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_vanishes_on_axes() {
        let cfg = LfssConfig::new(vec![0.7, 0.8], 1.5).unwrap();
        for s in [-2.0, -0.5, 0.3] {
            assert_eq!(kernel_g(&[0.0, 1.3], &[s, -1.0], &cfg), 0.0);
            assert_eq!(kernel_g(&[2.0, 0.0], &[0.5, s], &cfg), 0.0);
        }
    }

    #[test]
    fn exponent_zero_is_indicator() {
        let cfg = LfssConfig::new(vec![1.0 / 1.5], 1.5).unwrap();
        assert!((cfg.kappa - 1.0).abs() < 1e-12);
        for (s, want) in [(-0.5, 0.0), (0.0, 1.0), (0.5, 1.0), (1.99, 1.0), (2.0, 0.0), (3.0, 0.0)] {
            assert_eq!(kernel_g(&[2.0], &[s], &cfg), want * cfg.kappa, "s={s}");
        }
    }

    #[test]
    fn two_dimensional_value() {
        let mut cfg = LfssConfig::new(vec![0.7, 0.7], 1.5).unwrap();
        cfg.kappa = 1.0;
        let e = 0.7 - 1.0 / 1.5;
        let want = 0.5f64.powf(e) * (2f64.powf(e) - 1.0);
        let got = kernel_g(&[1.0, 1.0], &[0.5, -1.0], &cfg);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.022840031565754107).abs() < 1e-15);
    }

    #[test]
    fn separable_pointwise() {
        let cfg = LfssConfig::new(vec![0.6, 0.85, 0.75], 1.3).unwrap();
        let t = [1.5, 0.7, 2.2];
        let s = [-0.3, 0.2, -4.0];
        let prod: f64 = (0..3).map(|j| kernel_g1(t[j], s[j], cfg.exponent(j))).product();
        assert!((kernel_g(&t, &s, &cfg) - cfg.kappa * prod).abs() < 1e-12);
    }

    #[test]
    fn kappa_against_riemann_sum() {
        // Midpoint sums on a graded grid: fine near the singularities at
        // s = 0 and s = 1, geometric cells far out, analytic tail beyond.
        let (h, alpha) = (0.7, 1.5);
        let e = h - 1.0 / alpha;
        let f = |s: f64| kernel_g1(1.0, s, e).abs().powf(alpha);
        let mut total = 0.0;
        let n = 200_000;
        for i in 0..n {
            let s = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            total += f(s) * 2.0 / n as f64;
        }
        let mut a = 1.0;
        while a < 1e7 {
            let b = a * 1.01;
            total += f(-(a + b) / 2.0) * (b - a);
            a = b;
        }
        // ∫_{1e7}^∞ (e u^{e−1})^α du
        let p = (e - 1.0) * alpha + 1.0;
        total += (e.abs().powf(alpha)) * a.powf(p) / -p;
        let kappa_riemann = total.powf(-1.0 / alpha);
        let kappa = kappa_1d(h, alpha, QuadSpec::default()).unwrap();
        assert!((kappa / kappa_riemann - 1.0).abs() < 5e-4, "{kappa} vs {kappa_riemann}");
    }

    #[test]
    fn kappa_is_a_product() {
        let k1 = kappa_1d(0.7, 1.5, QuadSpec::default()).unwrap();
        let k2 = normalize_kappa(&[0.7, 0.7], 1.5, QuadSpec::default()).unwrap();
        assert!((k2 / (k1 * k1) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn antiderivative_is_consistent() {
        let k = IncrementKernel { e: 0.8 - 1.0 / 1.5 };
        for &(x0, x1) in &[(-1.0, -0.5), (-0.2, 0.3), (3.0, 3.0625), (1e6, 1.1e6)] {
            let q = integrate(|x| k.psi(x), x0, x1, QuadSpec::default()).unwrap().value;
            let exact = k.antiderivative(x1) - k.antiderivative(x0);
            assert!((q - exact).abs() <= 1e-9 * exact.abs().max(1e-12), "{x0} {x1}: {q} vs {exact}");
        }
    }

    #[test]
    fn regime_guard() {
        let cfg = LfssConfig::new(vec![0.6], 1.5).unwrap();
        let msg = cfg.require_theorem_regime().unwrap_err().to_string();
        assert!(msg.contains("1 < α < 2 and 1/α < H_j < 1"));
        assert!(LfssConfig::new(vec![0.8], 1.5).unwrap().require_theorem_regime().is_ok());
    }
}
