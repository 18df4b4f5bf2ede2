use crate::error::{arg, Error, Result};
use crate::lattice::{for_each_in_box, LatticeField};
use crate::moments::MomentEstimate;
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::scaling::ScalingFunction;
use crate::stable::{sheet_from_increments, LfssConfig, LfssSimulator};

/// Default lattice subdivisions per unit for continuum suprema.
pub const DEFAULT_REFINEMENT: u64 = 4;

/// A sheet sampler on the refined lattice `(1/ρ) ℤ^d ∩ [0, side]^d`.
///
/// `Z(k/ρ)` has the joint law of `ρ^{−Σ H_j} Z(k)`, so the integer-lattice
/// sheet on `[0, ρ·side]^d` is simulated and rescaled.
struct RefinedSheet {
    sim: LfssSimulator,
    scale: f64,
}

impl RefinedSheet {
    fn new(cfg: &LfssConfig, side: u64, refinement: u64) -> Result<Self> {
        if refinement == 0 {
            return arg("refinement must be at least 1");
        }
        let n = (side * refinement) as usize;
        let shape = vec![n.max(1); cfg.dim()];
        let sum_h: f64 = cfg.hurst.iter().sum();
        Ok(Self {
            sim: LfssSimulator::new(cfg, &shape)?,
            scale: (refinement as f64).powf(-sum_h),
        })
    }

    fn sample(&self, stream: &Stream) -> Result<LatticeField> {
        let inc = self.sim.simulate(stream, &ThreadBudget::sequential())?;
        let mut sheet = sheet_from_increments(&inc)?;
        let s = self.scale;
        sheet.values_mut().iter_mut().for_each(|v| *v *= s);
        Ok(sheet)
    }
}

/// `sup |Z(t) − Z(lo)|` over refined lattice points `t ∈ [lo, hi]`, visiting
/// every `step`-th point; indices are in refined units.
pub(crate) fn lattice_sup(sheet: &LatticeField, lo: &[u64], hi: &[u64], step: u64) -> f64 {
    let base = sheet.value_at(lo).expect("inside sheet");
    let steps: Vec<u64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / step).collect();
    let mut best = 0.0f64;
    let mut t = vec![0; lo.len()];
    for_each_in_box(&vec![0; lo.len()], &steps, |k| {
        for j in 0..k.len() {
            t[j] = lo[j] + k[j] * step;
        }
        best = best.max((sheet.value_at(&t).expect("inside sheet") - base).abs());
    });
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTailSetup {
    pub eta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub a: u64,
    /// Diagonal block levels `n ≥ 1`: `T_n = [a^n, a^{n+1}]^d`.
    pub blocks: Vec<u64>,
    pub refinement: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub n: u64,
    /// Fraction of replicates with the block sup at or above the threshold.
    pub probability: f64,
    pub threshold: f64,
    /// `C · u^{−γ} · B(T_n)`, the maximal-tail bound at threshold `u` with
    /// `B` the interval shape of [`Interval::bound_shape`], `C` fitted on the
    /// first block.
    pub bound: f64,
    pub dominated: bool,
    /// `C' · Π (n log a)^{−γ(1/α + ε)}`, the asymptotic form, `C'` fitted on
    /// the first block.
    pub asymptotic_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTailReport {
    pub exponent: f64,
    pub constant: f64,
    pub rows: Vec<BlockRow>,
    /// Fraction of blocks after the first with `probability ≤ bound`.
    pub dominance: f64,
    pub probability_sum: f64,
    pub bound_sum: f64,
    pub refinement: u64,
}

impl BlockTailReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,probability,threshold,bound,dominated,asymptotic_bound\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{:e},{},{:e}\n",
                r.n, r.probability, r.threshold, r.bound, r.dominated, r.asymptotic_bound
            ));
        }
        out
    }
}

/// `γ < α` and `γ(1/α + ε) > 1`; returns `γ(1/α + ε)`.
pub fn block_tail_exponent(gamma: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    let x = gamma * (1.0 / alpha + epsilon);
    if !(gamma > 0.0 && gamma < alpha) {
        return Err(Error::Precondition(format!("requires 0 < γ < α; got γ = {gamma}, α = {alpha}")));
    }
    if !(epsilon > 0.0) || !(x > 1.0) {
        return Err(Error::Precondition(format!(
            "requires ε > 0 and γ(1/α + ε) > 1; got γ(1/α + ε) = {gamma}·({:.6} + {epsilon}) = {x:.6}",
            1.0 / alpha
        )));
    }
    Ok(x)
}

/// Block-tail probabilities of the sheet over `T_n` against the
/// `Π φ_j(a^{n_j})` thresholds with `φ_j = (1 + x^{H_j}) log(1+x)^{1/α+ε}`.
pub fn run_lfss_block_tail(
    cfg: &LfssConfig,
    setup: &BlockTailSetup,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<BlockTailReport> {
    cfg.require_theorem_regime()?;
    let exponent = block_tail_exponent(setup.gamma, cfg.alpha, setup.epsilon)?;
    if !(setup.eta > 0.0) || setup.replicates == 0 || setup.a < 2 {
        return arg("need η > 0, a >= 2 and at least one replicate");
    }
    if setup.blocks.is_empty() || setup.blocks.iter().any(|&n| n == 0) {
        return arg("block levels must be at least 1");
    }
    let d = cfg.dim();
    let a = setup.a;
    let rho = setup.refinement;
    let top = *setup.blocks.iter().max().expect("nonempty");
    let sheet = RefinedSheet::new(cfg, a.pow(top as u32 + 1), rho)?;
    let phis: Vec<ScalingFunction> =
        cfg.hurst.iter().map(|&h| ScalingFunction::power_log(h, 1.0 / cfg.alpha + setup.epsilon)).collect();
    let thresholds: Vec<f64> = setup
        .blocks
        .iter()
        .map(|&n| setup.eta * phis.iter().map(|phi| phi.eval(a.pow(n as u32) as f64)).product::<f64>())
        .collect();

    let hits = threads.map(setup.replicates, |i| -> Result<Vec<bool>> {
        let z = sheet.sample(&stream.replicate(i))?;
        Ok(setup
            .blocks
            .iter()
            .zip(&thresholds)
            .map(|(&n, &u)| {
                let lo = vec![a.pow(n as u32) * rho; d];
                let hi = vec![a.pow(n as u32 + 1) * rho; d];
                lattice_sup(&z, &lo, &hi, 1) >= u
            })
            .collect())
    });
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
    let reps = setup.replicates as f64;
    let asymptotic = |n: u64| ((n as f64) * (a as f64).ln()).powf(-exponent * d as f64);
    let shapes: Vec<f64> = setup
        .blocks
        .iter()
        .zip(&thresholds)
        .map(|(&n, &u)| {
            let iv = Interval::new(vec![a.pow(n as u32) as f64; d], vec![a.pow(n as u32 + 1) as f64; d]);
            u.powf(-setup.gamma) * iv.bound_shape(&cfg.hurst, setup.gamma)
        })
        .collect();
    let probs: Vec<f64> = (0..setup.blocks.len())
        .map(|k| hits.iter().filter(|h| h[k]).count() as f64 / reps)
        .collect();
    let constant = probs[0] / shapes[0];
    let asymptotic_constant = probs[0] / asymptotic(setup.blocks[0]);
    let rows: Vec<BlockRow> = setup
        .blocks
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let bound = constant * shapes[k];
            BlockRow {
                n,
                probability: probs[k],
                threshold: thresholds[k],
                bound,
                dominated: probs[k] <= bound,
                asymptotic_bound: asymptotic_constant * asymptotic(n),
            }
        })
        .collect();
    let later = rows.len().saturating_sub(1);
    let dominance = if later == 0 {
        1.0
    } else {
        rows[1..].iter().filter(|r| r.dominated).count() as f64 / later as f64
    };
    Ok(BlockTailReport {
        exponent,
        constant,
        dominance,
        probability_sum: probs.iter().sum(),
        bound_sum: rows.iter().map(|r| r.bound).sum(),
        rows,
        refinement: rho,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Interval {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// `Π (b_j − a_j)^{H_j γ} + Σ_k a_k^{H_k γ} Π_{j≠k} (b_j − a_j)^{H_j γ}`.
    pub fn bound_shape(&self, hurst: &[f64], gamma: f64) -> f64 {
        let side = |j: usize| (self.hi[j] - self.lo[j]).powf(hurst[j] * gamma);
        let d = hurst.len();
        let full: f64 = (0..d).map(side).product();
        let mixed: f64 = (0..d)
            .map(|k| self.lo[k].powf(hurst[k] * gamma) * (0..d).filter(|&j| j != k).map(side).product::<f64>())
            .sum();
        full + mixed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupMomentRow {
    pub interval: Interval,
    pub estimate: MomentEstimate,
    pub shape: f64,
    /// `estimate / (C₆ · shape)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupMomentReport {
    pub gamma: f64,
    pub refinement: u64,
    /// Fitted on the first interval.
    pub c6: f64,
    pub rows: Vec<SupMomentRow>,
}

impl SupMomentReport {
    pub fn ratio_range(&self) -> (f64, f64) {
        self.rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)))
    }
}

/// `E sup_{t ∈ T} |Z(t) − Z(A)|^γ` on the refined lattice for each interval,
/// against the maximal-moment bound with `C₆` fitted on the first interval.
pub fn estimate_sup_increment_moment(
    cfg: &LfssConfig,
    intervals: &[Interval],
    gamma: f64,
    refinement: u64,
    replicates: usize,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<SupMomentReport> {
    if !(gamma > 0.0 && gamma < cfg.alpha) {
        return Err(Error::Precondition(format!(
            "requires 0 < γ < α; got γ = {gamma}, α = {}",
            cfg.alpha
        )));
    }
    let d = cfg.dim();
    if intervals.is_empty() || replicates < 2 {
        return arg("need at least one interval and two replicates");
    }
    let rho = refinement as f64;
    let mut idx = Vec::new();
    let mut side = 1u64;
    for iv in intervals {
        if iv.lo.len() != d || iv.hi.len() != d {
            return arg(format!("intervals must have {d} coordinates"));
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for j in 0..d {
            let (l, h) = (iv.lo[j] * rho, iv.hi[j] * rho);
            if !(iv.lo[j] > 0.0) || h < l {
                return arg("intervals need 0 < a_j <= b_j");
            }
            if (l - l.round()).abs() > 1e-9 || (h - h.round()).abs() > 1e-9 {
                return arg(format!("interval endpoints must lie on the 1/{refinement} lattice"));
            }
            lo.push(l.round() as u64);
            hi.push(h.round() as u64);
        }
        side = side.max(hi.iter().copied().max().unwrap_or(0).div_ceil(refinement));
        idx.push((lo, hi));
    }
    let sheet = RefinedSheet::new(cfg, side, refinement)?;
    let per_rep = threads.map(replicates, |i| -> Result<Vec<f64>> {
        let z = sheet.sample(&stream.replicate(i))?;
        Ok(idx.iter().map(|(lo, hi)| lattice_sup(&z, lo, hi, 1).powf(gamma)).collect())
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let seed = stream.seed();
    let mut rows = Vec::new();
    for (k, iv) in intervals.iter().enumerate() {
        let col: Vec<f64> = per_rep.iter().map(|r| r[k]).collect();
        rows.push(SupMomentRow {
            interval: iv.clone(),
            estimate: MomentEstimate::from_powered(&col, gamma, seed, Some(cfg.alpha)),
            shape: iv.bound_shape(&cfg.hurst, gamma),
            ratio: 0.0,
        });
    }
    let c6 = rows[0].estimate.value / rows[0].shape;
    for r in &mut rows {
        r.ratio = if c6 > 0.0 { r.estimate.value / (c6 * r.shape) } else { 0.0 };
    }
    Ok(SupMomentReport {
        gamma,
        refinement,
        c6,
        rows,
    })
}
