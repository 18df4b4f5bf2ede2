//! Deterministic checks of the quasi-stationary, orthogonal and
//! quasi-orthogonal sufficient conditions, plus the `C₅` estimate.

use crate::error::{arg, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::PrefixSumTable;
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::scaling::ScalingFunction;
use crate::stable::VarianceMap;
use crate::stats::mean_se;

use super::series::{series_verdict, Verdict, VerdictRule};

/// A truncated series with its dyadic level terms and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub partial_sum: f64,
    /// Upper bound on the omitted tail, when one is known in closed form.
    pub tail_bound: Option<f64>,
    pub level_terms: Vec<f64>,
    pub tail_ratio: Option<f64>,
    pub verdict: Verdict,
}

impl SeriesSummary {
    fn from_levels(level_terms: Vec<f64>, partial_sum: f64, tail_bound: Option<f64>, rule: VerdictRule) -> Self {
        let (tail_ratio, verdict) = if level_terms.iter().any(|t| !t.is_finite()) || !partial_sum.is_finite() {
            (None, Verdict::Diverges)
        } else {
            series_verdict(&level_terms, rule)
        };
        Self {
            partial_sum,
            tail_bound,
            level_terms,
            tail_ratio,
            verdict,
        }
    }

    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }
}

/// Sums of `term(n)` over `n ∈ [2^ℓ, 2^{ℓ+1})` for `ℓ < levels`.
pub fn dyadic_blocks(term: &dyn Fn(u64) -> f64, levels: u32) -> Vec<f64> {
    (0..levels)
        .map(|l| (1u64 << l..1u64 << (l + 1)).map(term).sum())
        .collect()
}

/// Level terms of a product series `Σ Π_i t_i(n_i)` when the level of `n`
/// is its largest dyadic block index: `Π C_i(ℓ) − Π C_i(ℓ−1)`, where `C_i`
/// are the cumulative block sums of each factor.
fn product_levels(blocks: &[Vec<f64>]) -> Vec<f64> {
    let levels = blocks.iter().map(|b| b.len()).min().unwrap_or(0);
    let mut cum = vec![0.0; blocks.len()];
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        for (c, b) in cum.iter_mut().zip(blocks) {
            *c += b[l];
        }
        let now: f64 = cum.iter().product();
        out.push(now - prev);
        prev = now;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiStationaryReport {
    pub a: u64,
    /// `D = Σ_n Σ_m a^n a^m / (φ₁(a^n)² φ₂(a^m)²)`.
    pub d_value: f64,
    pub d_verdict: Verdict,
    /// Tail sums `T_j(k) = Σ_{n ≥ k} a^n / φ_j(a^n)²` for `k ≤ levels`.
    pub tails: [Vec<f64>; 2],
    /// `Σ_{i,j ≥ 1} f(i,j) h(i,j)` over `i, j ≤ a^levels`.
    pub fh: SeriesSummary,
    /// `Σ_{n,m} Σ_{i ≤ a^n, j ≤ a^m} a^n a^m f(i,j) / (φ₁² φ₂²)`, truncated.
    pub chain_lhs: f64,
    /// `D f(0,0) + Σ_{i,j ≥ 1} f(i,j) h(i,j)`.
    pub chain_stated: f64,
    /// The same with the border terms `i = 0` or `j = 0` included.
    pub chain_corrected: f64,
}

impl QuasiStationaryReport {
    /// `h(i,j) = T₁(⌊log_a i⌋) T₂(⌊log_a j⌋)` for `i, j ≥ 1`.
    pub fn h(&self, i: u64, j: u64) -> f64 {
        let k1 = floor_log(i.max(1), self.a) as usize;
        let k2 = floor_log(j.max(1), self.a) as usize;
        let t = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
        t(&self.tails[0], k1) * t(&self.tails[1], k2)
    }

    pub fn chain_stated_holds(&self) -> bool {
        self.chain_lhs <= self.chain_stated * (1.0 + 1e-12)
    }

    pub fn chain_corrected_holds(&self) -> bool {
        self.chain_lhs <= self.chain_corrected * (1.0 + 1e-12)
    }

    pub fn summary(&self) -> String {
        format!(
            "a = {}\nD = {}\nD_verdict = {}\nh(1,1) = {}\nsum_fh = {:e}\nsum_fh_verdict = {}\nchain_lhs = {:e}\nchain_stated = {:e} ({})\nchain_corrected = {:e} ({})\n",
            self.a,
            self.d_value,
            self.d_verdict,
            self.h(1, 1),
            self.fh.partial_sum,
            self.fh.verdict,
            self.chain_lhs,
            self.chain_stated,
            if self.chain_stated_holds() { "holds" } else { "fails" },
            self.chain_corrected,
            if self.chain_corrected_holds() { "holds" } else { "fails" },
        )
    }
}

fn floor_log(x: u64, a: u64) -> u32 {
    let mut k = 0;
    let mut p = a;
    while p <= x {
        k += 1;
        match p.checked_mul(a) {
            Some(q) => p = q,
            None => break,
        }
    }
    k
}

fn ceil_log(x: u64, a: u64) -> u32 {
    if x <= 1 {
        return 0;
    }
    let k = floor_log(x, a);
    if a.pow(k) == x {
        k
    } else {
        k + 1
    }
}

/// The two-dimensional quasi-stationary condition for a correlation bound
/// `f`. Sums over `n` run to `n_levels` (at least 60 terms for `D` and the
/// tails); the double sums over `(i, j)` run over `[0, a^levels]²`.
pub fn check_quasi_stationary_condition(
    f: &dyn Fn(u64, u64) -> f64,
    phi1: &ScalingFunction,
    phi2: &ScalingFunction,
    a: u64,
    levels: u32,
    rule: VerdictRule,
) -> Result<QuasiStationaryReport> {
    if a < 2 {
        return arg("base must be at least 2");
    }
    let top = a.checked_pow(levels).filter(|&t| t <= 1 << 13).ok_or_else(|| {
        crate::error::Error::Argument(format!("a^levels = {a}^{levels} is too large for the double sum"))
    })?;
    let n_terms = 60.max(levels as usize + 1);
    let terms = |phi: &ScalingFunction| -> Vec<f64> {
        (0..n_terms)
            .map(|n| {
                let x = (a as f64).powi(n as i32);
                x / phi.eval(x).powi(2)
            })
            .collect()
    };
    let (t1, t2) = (terms(phi1), terms(phi2));
    let tails = |t: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; t.len() + 1];
        for k in (0..t.len()).rev() {
            out[k] = out[k + 1] + t[k];
        }
        out.truncate(t.len());
        out
    };
    let (tail1, tail2) = (tails(&t1), tails(&t2));
    let (_, v1) = series_verdict(&t1, rule);
    let (_, v2) = series_verdict(&t2, rule);
    let d_verdict = match (v1, v2) {
        (Verdict::Converges, Verdict::Converges) => Verdict::Converges,
        (Verdict::Diverges, _) | (_, Verdict::Diverges) => Verdict::Diverges,
        _ => Verdict::Inconclusive,
    };
    let d_value = if d_verdict == Verdict::Diverges { f64::INFINITY } else { tail1[0] * tail2[0] };

    // truncated tails for the chain's left side, which stops at n = levels
    let cut = |t: &[f64], k: u32| -> f64 { t[k as usize..=levels as usize].iter().sum() };
    let mut level_terms = vec![0.0; levels as usize + 1];
    let (mut fh_sum, mut lhs, mut border) = (0.0, 0.0, 0.0);
    for i in 0..=top {
        let (hi1, lo1) = (floor_log(i.max(1), a), ceil_log(i, a));
        for j in 0..=top {
            let (hi2, lo2) = (floor_log(j.max(1), a), ceil_log(j, a));
            let fij = f(i, j);
            if fij == 0.0 {
                continue;
            }
            lhs += fij * cut(&t1, lo1) * cut(&t2, lo2);
            let h = tail1[hi1 as usize] * tail2[hi2 as usize];
            if i >= 1 && j >= 1 {
                fh_sum += fij * h;
                level_terms[hi1.max(hi2) as usize] += fij * h;
            } else if i + j > 0 {
                border += fij * h;
            }
        }
    }
    let stated = d_value * f(0, 0) + fh_sum;
    Ok(QuasiStationaryReport {
        a,
        d_value,
        d_verdict,
        tails: [tail1, tail2],
        fh: SeriesSummary::from_levels(level_terms, fh_sum, None, rule),
        chain_lhs: lhs,
        chain_stated: stated,
        chain_corrected: stated + border,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalReport {
    pub dim: usize,
    pub n_max: u64,
    /// `Σ σ²(n) Π (log(1+n_i)/n_i)²`.
    pub klesov: SeriesSummary,
    /// `Σ σ²(n) / Π n_i²`.
    pub weakened: SeriesSummary,
}

impl OrthogonalReport {
    pub fn verdicts_agree(&self) -> bool {
        self.klesov.verdict == self.weakened.verdict
    }
}

/// Both orthogonal-field series over `[1, n_max]^d`. Separable variance
/// maps let each be computed as a product of one-dimensional sums.
pub fn check_orthogonal_conditions(
    sigma2: &VarianceMap,
    dim: usize,
    n_max: u64,
    rule: VerdictRule,
) -> Result<OrthogonalReport> {
    if dim == 0 || n_max == 0 {
        return arg("need dim >= 1 and n_max >= 1");
    }
    let (scale, beta) = match *sigma2 {
        VarianceMap::Constant(c) => (c, 0.0),
        VarianceMap::ProductPower { beta } => (1.0, beta),
    };
    let levels = 64 - n_max.leading_zeros() - 1; // full dyadic blocks inside [1, n_max]
    let summarize = |w: &dyn Fn(f64) -> f64, tail: Option<f64>| -> SeriesSummary {
        let t = |n: u64| (n as f64).powf(beta) * w(n as f64);
        let one: f64 = (1..=n_max).map(t).sum();
        let partial = scale * one.powi(dim as i32);
        let blocks = dyadic_blocks(&t, levels);
        let mut level_terms = product_levels(&vec![blocks; dim]);
        level_terms.iter_mut().for_each(|x| *x *= scale);
        // tail of the product: Π(one + τ) − Π one
        let tail_bound = tail.map(|tau| scale * ((one + tau).powi(dim as i32) - one.powi(dim as i32)));
        SeriesSummary::from_levels(level_terms, partial, tail_bound, rule)
    };
    let nf = n_max as f64;
    // ∫_N^∞ x^{β−2} dx for β < 1
    let weakened_tail = (beta < 1.0).then(|| nf.powf(beta - 1.0) / (1.0 - beta));
    let klesov = summarize(&|x: f64| (x.ln_1p() / x).powi(2), None);
    let weakened = summarize(&|x: f64| 1.0 / (x * x), weakened_tail);
    Ok(OrthogonalReport {
        dim,
        n_max,
        klesov,
        weakened,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct C5Row {
    pub n: Vec<u64>,
    pub probe: Vec<u64>,
    /// `E S(m, 2^n)² / E S(0, 2^n)²`.
    pub ratio: f64,
    pub numerator_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C5Estimate {
    pub rows: Vec<C5Row>,
    pub c5: f64,
}

/// `sup_m E S(m, 2^n)² / E S(0, 2^n)²` over probed `m` and the given
/// exponent vectors. Probes default to `0`, `2^n` and `2^{n_j} e_j`.
pub fn estimate_c5(
    generator: &GeneratorSpec,
    exponents: &[Vec<u64>],
    probes: Option<&[Vec<u64>]>,
    replicates: usize,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<C5Estimate> {
    let d = exponents.first().map_or(0, |n| n.len());
    if d == 0 || exponents.iter().any(|n| n.len() != d) || replicates < 2 {
        return arg("need exponent vectors of one common dimension and at least two replicates");
    }
    let mut cells = Vec::new();
    let mut extent = vec![1u64; d];
    for n in exponents {
        let size: Vec<u64> = n.iter().map(|&k| 1u64 << k).collect();
        let mut ms = vec![vec![0; d]];
        match probes {
            Some(p) => ms.extend(p.iter().cloned()),
            None => {
                ms.push(size.clone());
                if d > 1 {
                    for j in 0..d {
                        let mut m = vec![0; d];
                        m[j] = size[j];
                        ms.push(m);
                    }
                }
            }
        }
        for m in &ms {
            if m.len() != d {
                return arg(format!("probes must have {d} coordinates"));
            }
            for j in 0..d {
                extent[j] = extent[j].max(m[j] + size[j]);
            }
        }
        cells.push((n.clone(), size, ms));
    }
    let sampler = generator.sampler(&extent)?;
    let per_rep = threads.map(replicates, |i| -> Result<Vec<f64>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let table = PrefixSumTable::new(&field);
        let mut out = Vec::new();
        for (_, size, ms) in &cells {
            for m in ms {
                out.push(table.rect_sum(m, size)?.powi(2));
            }
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut col = 0;
    for (n, _, ms) in &cells {
        let mut base = None;
        for m in ms {
            let v: Vec<f64> = per_rep.iter().map(|r| r[col]).collect();
            col += 1;
            let e = mean_se(&v);
            let b = *base.get_or_insert(e.mean);
            rows.push(C5Row {
                n: n.clone(),
                probe: m.clone(),
                ratio: if b > 0.0 { e.mean / b } else { 1.0 },
                numerator_se: e.se,
            });
        }
    }
    let c5 = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(C5Estimate { rows, c5 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoriczReport {
    /// `Σ_{m,n} ρ(m,n)`.
    pub rho: SeriesSummary,
    /// `Σ_{i,k ≥ 1} log²(i+1) log²(k+1) / (λ₁(i)² λ₂(k)²)` with `σ ≡ 1`.
    pub moricz: SeriesSummary,
    /// `Σ_k 1/λ_j(k)²` for `j = 1, 2`.
    pub improved: [SeriesSummary; 2],
}

impl MoriczReport {
    pub fn rho_holds(&self) -> bool {
        self.rho.converges()
    }

    pub fn moricz_holds(&self) -> bool {
        self.moricz.converges()
    }

    /// Holds only on a convergent verdict for both sequences.
    pub fn improved_holds(&self) -> bool {
        self.improved.iter().all(SeriesSummary::converges)
    }

    pub fn summary(&self) -> String {
        let line = |name: &str, s: &SeriesSummary| {
            format!("{name} = {:e} ({}, {})\n", s.partial_sum, s.verdict, if s.converges() { "holds" } else { "fails" })
        };
        let mut out = line("sum_rho", &self.rho);
        out.push_str(&line("moricz", &self.moricz));
        out.push_str(&line("improved_1", &self.improved[0]));
        out.push_str(&line("improved_2", &self.improved[1]));
        out
    }
}

/// The quasi-orthogonal conditions, truncated at `2^levels − 1` per index.
pub fn check_moricz_quasi_orthogonal(
    rho: &dyn Fn(u64, u64) -> f64,
    lambda1: &ScalingFunction,
    lambda2: &ScalingFunction,
    levels: u32,
    rule: VerdictRule,
) -> Result<MoriczReport> {
    if levels == 0 || levels > 24 {
        return arg("levels must lie in [1, 24]");
    }
    let top = (1u64 << levels) - 1;

    // ρ over [0, top]², levels by the larger dyadic index (0 joins block 0)
    let rho_levels = if levels <= 12 {
        let mut lv = vec![0.0; levels as usize];
        let mut total = 0.0;
        for m in 0..=top {
            for n in 0..=top {
                let r = rho(m, n);
                total += r;
                lv[floor_log(m.max(n).max(1), 2) as usize] += r;
            }
        }
        SeriesSummary::from_levels(lv, total, None, rule)
    } else {
        return arg("ρ table is limited to 12 levels");
    };

    let w = |lambda: &ScalingFunction| {
        let l = lambda.clone();
        move |k: u64| (k as f64).ln_1p().powi(2) / l.eval(k as f64).powi(2)
    };
    let (w1, w2) = (w(lambda1), w(lambda2));
    let b1 = dyadic_blocks(&w1, levels);
    let b2 = dyadic_blocks(&w2, levels);
    let moricz_total = b1.iter().sum::<f64>() * b2.iter().sum::<f64>();
    let moricz = SeriesSummary::from_levels(product_levels(&[b1, b2]), moricz_total, None, rule);

    let improved = [lambda1, lambda2].map(|lambda| {
        let t = |k: u64| 1.0 / lambda.eval(k as f64).powi(2);
        let blocks = dyadic_blocks(&t, levels);
        let total = blocks.iter().sum();
        SeriesSummary::from_levels(blocks, total, None, rule)
    });
    Ok(MoriczReport { rho: rho_levels, moricz, improved })
}
