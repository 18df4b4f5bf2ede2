use super::function::{geometric_grid, ScalingFunction};
use crate::error::{arg, Error, Result};

/// Empirical doubling bounds `c_low ≤ φ(2x)/φ(x) ≤ c_high` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingBounds {
    pub c_low: f64,
    pub c_high: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Number of grid points `x` (each paired with `2x`).
    pub points: usize,
    /// Ratio between consecutive grid points.
    pub grid_ratio: f64,
}

pub const DEFAULT_DOUBLING_POINTS: usize = 1024;

/// Inf and sup of `φ(2x)/φ(x)` for `x` on a geometric grid over
/// `[x_min, x_max / 2]`, so both `x` and `2x` stay inside the range.
pub fn doubling_bounds(phi: &ScalingFunction, x_min: f64, x_max: f64) -> Result<DoublingBounds> {
    doubling_bounds_with(phi, x_min, x_max, DEFAULT_DOUBLING_POINTS)
}

pub fn doubling_bounds_with(phi: &ScalingFunction, x_min: f64, x_max: f64, points: usize) -> Result<DoublingBounds> {
    if !(x_min > 0.0) || !(x_max >= 2.0 * x_min) || !x_max.is_finite() {
        return arg(format!("doubling range needs 0 < x_min and x_max >= 2 x_min; got [{x_min}, {x_max}]"));
    }
    let points = points.max(2);
    let grid = geometric_grid(x_min, x_max / 2.0, points);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in &grid {
        let r = phi.eval(2.0 * x) / phi.eval(x);
        if !r.is_finite() || r <= 1.0 {
            return Err(Error::NotDoubling(format!("{phi}: φ(2x)/φ(x) = {r} at x = {x}")));
        }
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(DoublingBounds {
        c_low: lo,
        c_high: hi,
        x_min,
        x_max,
        points,
        grid_ratio: if points > 1 {
            (x_max / 2.0 / x_min).powf(1.0 / (points - 1) as f64)
        } else {
            1.0
        },
    })
}

pub(crate) fn floor_log2(a: u64) -> u32 {
    63 - a.leading_zeros()
}

/// Left and right side of `C^⌊log₂ a⌋ > max{a, a 2^{p−1}}`.
pub fn base_inequality(c_low: f64, p: f64, a: u64) -> (f64, f64) {
    let lhs = c_low.powi(floor_log2(a) as i32);
    let af = a as f64;
    (lhs, af.max(af * 2f64.powf(p - 1.0)))
}

pub const DEFAULT_A_MAX: u64 = 64;

/// Strict `lhs > rhs`, with a relative margin so that rounding in `C^k`
/// cannot turn an exact tie such as `(2^{1.5})^2 = 8` into a pass.
pub fn strictly_greater(lhs: f64, rhs: f64) -> bool {
    lhs > rhs * (1.0 + STRICT_MARGIN)
}

pub const STRICT_MARGIN: f64 = 1e-12;

/// Smallest `a ∈ [2, a_max]` with `C_low^⌊log₂ a⌋ > max{a, a·2^{p−1}}`.
pub fn select_base(c_low: f64, p: f64, a_max: u64) -> Option<u64> {
    (2..=a_max).find(|&a| {
        let (l, r) = base_inequality(c_low, p, a);
        strictly_greater(l, r)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionConstants {
    /// `(1 + (a−1) 2^{p−1}) / C^{p⌊log₂ a⌋}`.
    pub c: f64,
    /// `2^{p−1} [Σ_{j=1}^{a−1} j^{p−1} + (a−1)]`.
    pub d_ap: f64,
    /// `a / C^{p⌊log₂ a⌋}`, the contraction of the `p ≤ 1` maximal recursion.
    pub kappa: f64,
}

pub fn d_ap(a: u64, p: f64) -> f64 {
    let s: f64 = (1..a).map(|j| (j as f64).powf(p - 1.0)).sum();
    2f64.powf(p - 1.0) * (s + (a - 1) as f64)
}

pub fn recursion_constants(a: u64, p: f64, c_low: f64) -> Result<RecursionConstants> {
    if a < 2 || !(p > 0.0) || !(c_low > 1.0) {
        return arg(format!("recursion constants need a >= 2, p > 0, C_low > 1; got a={a}, p={p}, C_low={c_low}"));
    }
    let denom = c_low.powf(p * floor_log2(a) as f64);
    let c = (1.0 + (a - 1) as f64 * 2f64.powf(p - 1.0)) / denom;
    if !(c < 1.0) {
        return Err(Error::Inadmissible(format!(
            "c = (1 + (a-1) 2^(p-1)) / C^(p floor(log2 a)) = {c:.6} >= 1 for a={a}, p={p}, C={c_low:.6}"
        )));
    }
    Ok(RecursionConstants {
        c,
        d_ap: d_ap(a, p),
        kappa: a as f64 / denom,
    })
}

/// An admissible base `a` with its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePlan {
    pub a: u64,
    pub p: f64,
    pub c_low: f64,
    pub constants: RecursionConstants,
}

impl BasePlan {
    /// Uses `a` as given, refusing it when the base inequality or `c < 1`
    /// fails. For `p ≤ 1` the maximal recursion contracts by `kappa`, which
    /// must also be below one.
    pub fn with_base(a: u64, p: f64, c_low: f64) -> Result<Self> {
        let (l, r) = base_inequality(c_low, p, a);
        if !strictly_greater(l, r) {
            return Err(Error::Inadmissible(format!(
                "C^floor(log2 a) = {c_low:.6}^{} = {l:.6} is not > max{{a, a 2^(p-1)}} = {r:.6} (a={a}, p={p})",
                floor_log2(a)
            )));
        }
        let constants = recursion_constants(a, p, c_low)?;
        if p <= 1.0 && !(constants.kappa < 1.0) {
            return Err(Error::Inadmissible(format!(
                "kappa = a / C^(p floor(log2 a)) = {:.6} >= 1 for a={a}, p={p}",
                constants.kappa
            )));
        }
        Ok(Self {
            a,
            p,
            c_low,
            constants,
        })
    }

    /// Smallest admissible base in `[2, a_max]`.
    pub fn select(c_low: f64, p: f64, a_max: u64) -> Result<Self> {
        let mut first_err = None;
        for a in 2..=a_max {
            match Self::with_base(a, p, c_low) {
                Ok(plan) => return Ok(plan),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(Error::Inadmissible(format!(
            "no base a in [2, {a_max}] for C_low={c_low:.6}, p={p}; at a=2: {}",
            first_err.map_or_else(String::new, |e| e.to_string())
        )))
    }

    /// Per-coordinate plans for the multi-base variant (`a_s` may differ).
    pub fn select_per_axis(c_lows: &[f64], p: f64, a_max: u64) -> Result<Vec<Self>> {
        c_lows.iter().map(|&c| Self::select(c, p, a_max)).collect()
    }

    /// Contraction factor of the maximal-moment recursion in this regime.
    pub fn contraction(&self) -> f64 {
        if self.p <= 1.0 {
            self.constants.kappa
        } else {
            self.constants.c
        }
    }

    /// Coefficient on the driving term of the rectangular recursion.
    pub fn rect_driving_coefficient(&self) -> f64 {
        if self.p <= 1.0 {
            1.0
        } else {
            self.constants.d_ap
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_bounds_are_exact() {
        let b = doubling_bounds(&ScalingFunction::power(1.5), 1.0, 1e6).unwrap();
        assert!((b.c_low - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((b.c_high - 2f64.powf(1.5)).abs() < 1e-12);
        let b = doubling_bounds(&ScalingFunction::power(1.0), 1.0, 1e6).unwrap();
        assert!((b.c_low - 2.0).abs() < 1e-12 && (b.c_high - 2.0).abs() < 1e-12);
        assert!(b.points >= 1000);
    }

    #[test]
    fn power_log_bounds() {
        let b = doubling_bounds(&ScalingFunction::power_log(0.8, 1.2), 1.0, 1e6).unwrap();
        assert!(b.c_low > 1.0 && b.c_high.is_finite() && b.c_low <= b.c_high);
    }

    #[test]
    fn flat_function_is_rejected() {
        let t = ScalingFunction::table(vec![1.0, 10.0, 1e6], vec![1.0, 5.0, 5.0]).unwrap();
        assert!(matches!(doubling_bounds(&t, 1.0, 1e6), Err(Error::NotDoubling(_))));
    }

    #[test]
    fn base_selection() {
        let c = 2f64.powf(1.5);
        assert_eq!(select_base(c, 1.0, 64), Some(2));
        assert_eq!(select_base(c, 2.0, 64), Some(8));
        assert_eq!(select_base(1.05, 2.0, 64), None);
    }

    #[test]
    fn printed_constants() {
        assert_eq!(d_ap(2, 2.0), 4.0);
        assert_eq!(d_ap(3, 1.0), 4.0);
        let k = recursion_constants(2, 2.0, 2f64.powf(1.5)).unwrap();
        assert!((k.c - 0.375).abs() < 1e-15);
        assert!(matches!(recursion_constants(2, 2.0, 1.5), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn d_ap_matches_written_out_sum() {
        for a in 2..=16u64 {
            for p in [0.5, 1.0, 1.5, 2.0, 3.0] {
                // (a-1)^{p-1} + (a-2)^{p-1} + ... + 1 + (a-1), left to right
                let mut bracket = 0.0;
                let mut j = a - 1;
                while j >= 1 {
                    bracket += (j as f64).powf(p - 1.0);
                    j -= 1;
                }
                bracket += (a - 1) as f64;
                let literal = 2f64.powf(p - 1.0) * bracket;
                assert!((d_ap(a, p) - literal).abs() <= 1e-12 * literal);
            }
        }
    }

    #[test]
    fn selection_with_p_at_least_one_gives_contraction() {
        for i in 0..200 {
            let c_low = 1.01 + i as f64 * 0.05;
            for p in [1.0, 1.5, 2.0, 3.0] {
                if let Some(a) = select_base(c_low, p, 64) {
                    let (l, r) = base_inequality(c_low, p, a);
                    assert!(strictly_greater(l, r));
                    assert!(recursion_constants(a, p, c_low).unwrap().c < 1.0);
                }
            }
        }
    }

    #[test]
    fn plan_refuses_with_numbers() {
        let e = BasePlan::with_base(2, 2.0, 2.0).unwrap_err().to_string();
        assert!(e.contains("4.000000"), "{e}");
        let plan = BasePlan::select(2f64.powf(1.5), 2.0, 64).unwrap();
        assert_eq!(plan.a, 8);
    }
}
