use crate::error::{arg, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::PrefixSumTable;
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::stable::LfssConfig;
use crate::stats::linear_fit;

use super::estimate::{require_finite_moment, MomentEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct LawRow {
    /// Every axis uses the exponent `n`.
    pub n: u64,
    pub probe: Vec<u64>,
    pub estimate: MomentEstimate,
    /// `C_{α,p} · a^{p n Σ H_j}` with the estimated constant.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfssLawReport {
    pub a: u64,
    pub p: f64,
    pub hurst: Vec<f64>,
    /// `E|S(0; ⟨1⟩)|^p`.
    pub c_alpha_p: MomentEstimate,
    pub rows: Vec<LawRow>,
    /// `(n, E(n+1)/E(n))` at the first probe, for consecutive grid levels.
    pub consecutive: Vec<(u64, f64)>,
    /// `a^{p Σ H_j}`.
    pub expected_ratio: f64,
    /// Slope of `log E(n)` against `n` at the first probe.
    pub slope: f64,
    pub slope_se: f64,
    /// `p Σ H_j log a`.
    pub expected_slope: f64,
    /// Largest `|E_m − E_0| / sqrt(se_m² + se_0²)` over probes and levels.
    pub max_shift_z: f64,
}

impl LfssLawReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,probe,estimate,std_error,predicted,ratio\n");
        for r in &self.rows {
            let probe: Vec<String> = r.probe.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:.6}\n",
                r.n,
                probe.join(" "),
                r.estimate.value,
                r.estimate.std_error,
                r.predicted,
                r.estimate.value / r.predicted
            ));
        }
        out
    }

    pub fn max_ratio_error(&self) -> f64 {
        self.consecutive
            .iter()
            .map(|&(_, r)| (r / self.expected_ratio - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Moments of LFSS increment sums over the cubes `(m, m + a^n⟨1⟩]` against
/// the self-similar law `C_{α,p} a^{p n Σ H_j}`, with the constant taken from
/// the unit cell at the origin.
#[allow(clippy::too_many_arguments)]
pub fn lfss_moment_law(
    cfg: &LfssConfig,
    a: u64,
    p: f64,
    n_grid: &[u64],
    probes: &[Vec<u64>],
    replicates: usize,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<LfssLawReport> {
    require_finite_moment(p, Some(cfg.alpha))?;
    let d = cfg.dim();
    if a < 2 {
        return arg("base must be at least 2");
    }
    if n_grid.is_empty() || replicates < 2 {
        return arg("need a nonempty grid and at least two replicates");
    }
    let probes: Vec<Vec<u64>> = if probes.is_empty() { vec![vec![0; d]] } else { probes.to_vec() };
    if probes.iter().any(|m| m.len() != d) {
        return arg(format!("probes must have {d} coordinates"));
    }
    let top = n_grid.iter().copied().max().unwrap_or(0);
    let side = a.checked_pow(top as u32).ok_or_else(|| crate::error::Error::Argument("a^n overflows".into()))?;
    let extent: Vec<u64> = (0..d).map(|j| probes.iter().map(|m| m[j]).max().unwrap_or(0) + side).collect();
    let sampler = GeneratorSpec::Lfss(cfg.clone()).sampler(&extent)?;

    // column 0 is the unit cell at the origin, then (level, probe) pairs
    let cells: Vec<(u64, Vec<u64>)> = n_grid
        .iter()
        .flat_map(|&n| probes.iter().map(move |m| (n, m.clone())))
        .collect();
    let per_rep = threads.map(replicates, |i| -> Result<Vec<f64>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let table = PrefixSumTable::new(&field);
        let mut out = Vec::with_capacity(cells.len() + 1);
        out.push(table.rect_sum(&vec![0; d], &vec![1; d])?.abs().powf(p));
        for (n, m) in &cells {
            let size = vec![a.pow(*n as u32); d];
            out.push(table.rect_sum(m, &size)?.abs().powf(p));
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let column = |k: usize| -> Vec<f64> { per_rep.iter().map(|r| r[k]).collect() };
    let seed = stream.seed();
    let c_alpha_p = MomentEstimate::from_powered(&column(0), p, seed, Some(cfg.alpha));

    let sum_h: f64 = cfg.hurst.iter().sum();
    let af = a as f64;
    let mut rows = Vec::with_capacity(cells.len());
    for (k, (n, m)) in cells.iter().enumerate() {
        let estimate = MomentEstimate::from_powered(&column(k + 1), p, seed, Some(cfg.alpha));
        rows.push(LawRow {
            n: *n,
            probe: m.clone(),
            estimate,
            predicted: c_alpha_p.value * af.powf(p * *n as f64 * sum_h),
        });
    }
    let np = probes.len();
    let first: Vec<&LawRow> = rows.iter().step_by(np).collect();
    let consecutive: Vec<(u64, f64)> = first
        .windows(2)
        .filter(|w| w[1].n == w[0].n + 1)
        .map(|w| (w[0].n, w[1].estimate.value / w[0].estimate.value))
        .collect();
    let xs: Vec<f64> = first.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = first.iter().map(|r| r.estimate.value.ln()).collect();
    let (slope, slope_se) = if xs.len() >= 2 {
        let fit = linear_fit(&xs, &ys);
        (fit.slope, fit.slope_se)
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut max_shift_z = 0.0f64;
    for group in rows.chunks(np) {
        let base = &group[0].estimate;
        for r in &group[1..] {
            let se = (base.std_error.powi(2) + r.estimate.std_error.powi(2)).sqrt();
            if se > 0.0 {
                max_shift_z = max_shift_z.max((r.estimate.value - base.value).abs() / se);
            }
        }
    }
    Ok(LfssLawReport {
        a,
        p,
        hurst: cfg.hurst.clone(),
        c_alpha_p,
        rows,
        consecutive,
        expected_ratio: af.powf(p * sum_h),
        slope,
        slope_se,
        expected_slope: p * sum_h * af.ln(),
        max_shift_z,
    })
}
