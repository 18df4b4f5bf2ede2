use super::kernel::LfssConfig;
use super::simulate::LfssSimulator;
use crate::error::{arg, Result};
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::stats::{quantile_sorted, sorted};

/// Setup of an operator-scaling comparison `Z(E t)` against `Π b_j^{H_j} Z(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCheck {
    pub b: Vec<u64>,
    pub t: Vec<u64>,
    pub quantiles: Vec<f64>,
    pub replicates: usize,
    /// Width of the order-statistic bands in binomial standard deviations.
    pub z: f64,
    /// Exponents used for the predicted factor; `None` means the true `H`.
    pub exponents: Option<Vec<f64>>,
}

impl ScalingCheck {
    pub fn new(b: Vec<u64>, t: Vec<u64>, replicates: usize) -> Self {
        Self {
            b,
            t,
            quantiles: vec![0.1, 0.25, 0.75, 0.9],
            replicates,
            z: 3.0,
            exponents: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub q: f64,
    /// Empirical quantile of `Z(E t)`.
    pub scaled: f64,
    /// `factor × ` empirical quantile of `Z(t)`.
    pub predicted: f64,
    pub scaled_band: (f64, f64),
    pub predicted_band: (f64, f64),
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub factor: f64,
    pub rows: Vec<QuantileRow>,
    /// Largest `|scaled − predicted| / |predicted|` over the grid.
    pub max_discrepancy: f64,
    pub pass: bool,
}

/// Order-statistic confidence band for the `q`-quantile of a sorted sample.
pub fn quantile_band(sorted: &[f64], q: f64, z: f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let half = z * (n * q * (1.0 - q)).sqrt();
    let lo = ((n * q - half).floor().max(0.0) as usize).min(sorted.len() - 1);
    let hi = ((n * q + half).ceil() as usize).min(sorted.len() - 1);
    (sorted[lo], sorted[hi])
}

pub fn check_operator_scaling(
    cfg: &LfssConfig,
    check: &ScalingCheck,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<ScalingReport> {
    let d = cfg.dim();
    if check.b.len() != d || check.t.len() != d {
        return arg("b and t need one entry per dimension");
    }
    if check.b.contains(&0) || check.t.contains(&0) {
        return arg("b and t must be positive");
    }
    if check.replicates < 10 {
        return arg("need at least 10 replicates");
    }
    let exps = check.exponents.clone().unwrap_or_else(|| cfg.hurst.clone());
    let factor: f64 = (0..d).map(|j| (check.b[j] as f64).powf(exps[j])).product();
    let bt: Vec<u64> = (0..d).map(|j| check.b[j] * check.t[j]).collect();
    let shape: Vec<usize> = (0..d).map(|j| bt[j].max(check.t[j]) as usize).collect();
    let sim = LfssSimulator::new(cfg, &shape)?;

    let pairs = threads.map(check.replicates, |i| -> Result<(f64, f64)> {
        let f = sim.simulate(&stream.replicate(i), &ThreadBudget::sequential())?;
        let table = crate::lattice::PrefixSumTable::new(&f);
        let at = |n: &[u64]| {
            let hi: Vec<usize> = n.iter().map(|&x| x as usize).collect();
            table.box_sum_relative(&vec![0; d], &hi)
        };
        Ok((at(&check.t), at(&bt)))
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let base = sorted(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let scaled = sorted(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());

    let mut rows = Vec::new();
    let mut max_discrepancy = 0.0f64;
    for &q in &check.quantiles {
        let s = quantile_sorted(&scaled, q);
        let p = factor * quantile_sorted(&base, q);
        let sb = quantile_band(&scaled, q, check.z);
        let pb = quantile_band(&base, q, check.z);
        let pb = (factor * pb.0, factor * pb.1);
        let within = sb.0 <= pb.1 && pb.0 <= sb.1;
        max_discrepancy = max_discrepancy.max((s - p).abs() / p.abs());
        rows.push(QuantileRow {
            q,
            scaled: s,
            predicted: p,
            scaled_band: sb,
            predicted_band: pb,
            within,
        });
    }
    let pass = rows.iter().all(|r| r.within);
    Ok(ScalingReport {
        factor,
        rows,
        max_discrepancy,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scaling_passes() {
        let cfg = LfssConfig::new(vec![0.8], 1.5).unwrap();
        let check = ScalingCheck::new(vec![1], vec![8], 4000);
        let r = check_operator_scaling(&cfg, &check, &Stream::new(2, "id"), &ThreadBudget::sequential()).unwrap();
        assert!(r.pass && r.max_discrepancy == 0.0);
    }

    #[test]
    fn wrong_exponent_fails_with_enough_samples() {
        let cfg = LfssConfig::new(vec![0.8], 1.5).unwrap();
        let mut check = ScalingCheck::new(vec![2], vec![8], 20_000);
        let good = check_operator_scaling(&cfg, &check, &Stream::new(3, "os"), &ThreadBudget::sequential()).unwrap();
        assert!(good.pass, "{good:?}");
        check.exponents = Some(vec![1.0]);
        let bad = check_operator_scaling(&cfg, &check, &Stream::new(3, "os"), &ThreadBudget::sequential()).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn band_contains_the_quantile() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let (lo, hi) = quantile_band(&xs, 0.5, 3.0);
        assert!(lo < 499.5 && hi > 499.5);
        assert!(hi - lo < 100.0);
    }
}
