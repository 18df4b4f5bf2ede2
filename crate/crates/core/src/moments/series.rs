use std::fmt;

use crate::error::{arg, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{for_each_in_box, Norm, PrefixSumTable, ShellTable};
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::scaling::{doubling_bounds, BasePlan, ScalingFunction};
use crate::stats::{linear_fit, mean_se};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "converges" => Some(Verdict::Converges),
            "diverges" => Some(Verdict::Diverges),
            "inconclusive" => Some(Verdict::Inconclusive),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds on the fitted tail ratio of successive level terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRule {
    pub converge_below: f64,
    pub diverge_above: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self {
            converge_below: 0.95,
            diverge_above: 1.05,
        }
    }
}

/// Geometric tail ratio of `terms` fitted on the last half, and the verdict.
///
/// The ratio is `exp(slope)` of a least-squares line through
/// `(i, log term_i)` over the nonzero terms in the second half. A second half
/// made only of zeros counts as convergent; fewer than two nonzero terms
/// otherwise give no ratio.
pub fn series_verdict(terms: &[f64], rule: VerdictRule) -> (Option<f64>, Verdict) {
    if terms.is_empty() {
        return (None, Verdict::Inconclusive);
    }
    let start = terms.len() / 2;
    let tail = &terms[start..];
    if tail.iter().all(|&t| t == 0.0) {
        return (Some(0.0), Verdict::Converges);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0 && t.is_finite())
        .map(|(i, &t)| ((start + i) as f64, t.ln()))
        .unzip();
    if tail.iter().any(|t| !t.is_finite()) {
        return (None, Verdict::Diverges);
    }
    if xs.len() < 2 {
        return (None, Verdict::Inconclusive);
    }
    let r = linear_fit(&xs, &ys).slope.exp();
    let v = if r < rule.converge_below {
        Verdict::Converges
    } else if r > rule.diverge_above {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    (Some(r), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    /// Exponent vector (one entry for spherical and one-dimensional series).
    pub n: Vec<u64>,
    pub term: f64,
    pub std_error: f64,
    /// Probe offset attaining the sup, when there was a choice.
    pub probe: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeriesReport {
    pub rows: Vec<SeriesRow>,
    /// Sum of the row terms with `max_j n_j = ℓ`, for `ℓ = 0, 1, …`.
    pub level_terms: Vec<f64>,
    /// Running sums of `level_terms`.
    pub partial_sums: Vec<f64>,
    pub tail_ratio: Option<f64>,
    pub verdict: Verdict,
    /// Constants and settings echoed for the record.
    pub constants: Vec<(String, String)>,
}

impl MomentSeriesReport {
    pub fn from_rows(rows: Vec<SeriesRow>, rule: VerdictRule, constants: Vec<(String, String)>) -> Self {
        let levels = rows.iter().map(|r| level_of(&r.n) + 1).max().unwrap_or(0);
        let mut level_terms = vec![0.0; levels];
        for r in &rows {
            level_terms[level_of(&r.n)] += r.term;
        }
        let mut partial_sums = Vec::with_capacity(levels);
        let mut acc = 0.0;
        for &t in &level_terms {
            acc += t;
            partial_sums.push(acc);
        }
        let (tail_ratio, verdict) = series_verdict(&level_terms, rule);
        Self {
            rows,
            level_terms,
            partial_sums,
            tail_ratio,
            verdict,
            constants,
        }
    }

    /// The same term table normalized by `to` instead of `from`. The sup over
    /// probes is unaffected since the normalization only depends on `n`.
    pub fn renormalized(
        &self,
        from: &[ScalingFunction],
        to: &[ScalingFunction],
        bases: &[u64],
        p: f64,
        rule: VerdictRule,
    ) -> Self {
        let factor = |n: &[u64]| -> f64 {
            n.iter()
                .enumerate()
                .map(|(j, &k)| {
                    let x = (bases[j] as f64).powi(k as i32);
                    (from[j].eval(x) / to[j].eval(x)).powf(p)
                })
                .product()
        };
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let c = factor(&r.n);
                SeriesRow {
                    term: r.term * c,
                    std_error: r.std_error * c,
                    ..r.clone()
                }
            })
            .collect();
        let mut constants = self.constants.clone();
        constants.retain(|(k, _)| !k.starts_with("phi") && !k.starts_with("plan"));
        for (j, phi) in to.iter().enumerate() {
            constants.push((format!("phi{}", j + 1), phi.to_string()));
        }
        Self::from_rows(rows, rule, constants)
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// One row per exponent vector: `n1..nd,level,term,std_error,partial_sum`,
    /// where the partial sum runs over rows in table order.
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(1, |r| r.n.len());
        let mut out = String::new();
        for j in 1..=d {
            out.push_str(&format!("n{j},"));
        }
        out.push_str("level,term,std_error,partial_sum\n");
        let mut acc = 0.0;
        for r in &self.rows {
            acc += r.term;
            for x in &r.n {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{},{:e},{:e},{:e}\n", level_of(&r.n), r.term, r.std_error, acc));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.constants {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("levels = {}\n", self.level_terms.len()));
        s.push_str(&format!("partial_sum = {:e}\n", self.total()));
        match self.tail_ratio {
            Some(r) => s.push_str(&format!("tail_ratio = {r:.6}\n")),
            None => s.push_str("tail_ratio = none\n"),
        }
        s.push_str(&format!("verdict = {}\n", self.verdict));
        s
    }
}

fn level_of(n: &[u64]) -> usize {
    n.iter().copied().max().unwrap_or(0) as usize
}

/// How the sup over `m` is approximated.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeSet {
    /// `m = 0` alone for stationary generators, [`ProbeSet::Default`] otherwise.
    Auto,
    /// `m = 0`, `m = a^n` and `m = a^{n_j} e_j` for each axis.
    Default,
    Fixed(Vec<Vec<u64>>),
}

/// Whether an inadmissible base plan stops the computation or is only recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanCheck {
    Enforce,
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSetup {
    pub p: f64,
    pub n_max: u64,
    pub replicates: usize,
    pub probes: ProbeSet,
    pub plan_check: PlanCheck,
    pub rule: VerdictRule,
}

impl SeriesSetup {
    pub fn new(p: f64, n_max: u64, replicates: usize) -> Self {
        Self {
            p,
            n_max,
            replicates,
            probes: ProbeSet::Auto,
            plan_check: PlanCheck::Enforce,
            rule: VerdictRule::default(),
        }
    }
}

/// Doubling bounds of `phi` over the range the series touches, and the
/// base plan check for base `a`. Returns a note describing the outcome.
pub(crate) fn plan_note(phi: &ScalingFunction, a: u64, p: f64, n_max: u64, check: PlanCheck) -> Result<String> {
    let x_max = (a as f64).powi(n_max as i32 + 1).max(2.0);
    let outcome = doubling_bounds(phi, 1.0, x_max).and_then(|b| BasePlan::with_base(a, p, b.c_low).map(|plan| (b, plan)));
    match outcome {
        Ok((b, plan)) => Ok(format!(
            "admissible (C_low = {:.6}, c = {:.6}, D_ap = {:.6})",
            b.c_low, plan.constants.c, plan.constants.d_ap
        )),
        Err(e) => match check {
            PlanCheck::Enforce => Err(e),
            PlanCheck::Report => Ok(format!("not admissible: {e}")),
        },
    }
}

fn pow_u(a: u64, n: u64) -> Result<u64> {
    a.checked_pow(n as u32)
        .ok_or_else(|| crate::error::Error::Argument(format!("{a}^{n} overflows")))
}

/// Probe offsets for one exponent vector.
fn rect_probes(probes: &ProbeSet, stationary: bool, an: &[u64]) -> Vec<Vec<u64>> {
    let d = an.len();
    match probes {
        ProbeSet::Auto if stationary => vec![vec![0; d]],
        ProbeSet::Fixed(ms) => ms.clone(),
        _ => {
            let mut v = vec![vec![0; d], an.to_vec()];
            if d > 1 {
                for j in 0..d {
                    let mut m = vec![0; d];
                    m[j] = an[j];
                    v.push(m);
                }
            }
            v
        }
    }
}

/// Monte-Carlo terms of the rectangular moment series
/// `Σ_n sup_m E|S(m; a_1^{n_1}, …, a_d^{n_d})|^p / Π φ_j(a_j^{n_j})^p`.
pub fn condition_series_rect(
    generator: &GeneratorSpec,
    phis: &[ScalingFunction],
    bases: &[u64],
    setup: &SeriesSetup,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<MomentSeriesReport> {
    let d = phis.len();
    if d == 0 || bases.len() != d {
        return arg("need one normalizer and one base per dimension");
    }
    if setup.replicates == 0 {
        return arg("need at least one replicate");
    }
    let mut constants = vec![
        ("geometry".to_string(), "rect".to_string()),
        ("generator".to_string(), generator.to_string()),
        ("p".to_string(), setup.p.to_string()),
        ("n_max".to_string(), setup.n_max.to_string()),
        ("replicates".to_string(), setup.replicates.to_string()),
        ("bases".to_string(), format!("{bases:?}")),
    ];
    for j in 0..d {
        let note = plan_note(&phis[j], bases[j], setup.p, setup.n_max, setup.plan_check)?;
        constants.push((format!("phi{}", j + 1), phis[j].to_string()));
        constants.push((format!("plan{}", j + 1), note));
    }

    let stationary = generator.is_stationary();
    let mut cells: Vec<(Vec<u64>, Vec<u64>, Vec<Vec<u64>>)> = Vec::new();
    let mut extent = vec![1u64; d];
    let mut err = None;
    for_each_in_box(&vec![0; d], &vec![setup.n_max; d], |n| {
        let an: Result<Vec<u64>> = (0..d).map(|j| pow_u(bases[j], n[j])).collect();
        match an {
            Ok(an) => {
                let probes = rect_probes(&setup.probes, stationary, &an);
                for m in &probes {
                    for j in 0..d {
                        extent[j] = extent[j].max(m[j] + an[j]);
                    }
                }
                cells.push((n.to_vec(), an, probes));
            }
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    constants.push((
        "probes".to_string(),
        match (&setup.probes, stationary) {
            (ProbeSet::Auto, true) => "m = 0 (stationary)".to_string(),
            (ProbeSet::Fixed(ms), _) => format!("{ms:?}"),
            _ => "0, a^n, a^n_j e_j".to_string(),
        },
    ));

    let sampler = generator.sampler(&extent)?;
    let p = setup.p;
    let per_rep = threads.map(setup.replicates, |i| -> Result<Vec<f64>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let table = PrefixSumTable::new(&field);
        let mut out = Vec::new();
        for (_, an, probes) in &cells {
            for m in probes {
                out.push(table.rect_sum(m, an)?.abs().powf(p));
            }
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cells.len());
    let mut col = 0;
    for (n, an, probes) in &cells {
        let norm: f64 = (0..d).map(|j| phis[j].eval(an[j] as f64).powf(p)).product();
        let mut best: Option<(f64, f64, Vec<u64>)> = None;
        for m in probes {
            let vals: Vec<f64> = per_rep.iter().map(|r| r[col]).collect();
            col += 1;
            let ms = mean_se(&vals);
            let (t, se) = (ms.mean / norm, ms.se / norm);
            if best.as_ref().is_none_or(|b| t > b.0) {
                best = Some((t, se, m.clone()));
            }
        }
        let (term, std_error, m) = best.expect("at least one probe");
        rows.push(SeriesRow {
            n: n.clone(),
            term,
            std_error,
            probe: (probes.len() > 1).then_some(m),
        });
    }
    Ok(MomentSeriesReport::from_rows(rows, setup.rule, constants))
}

/// Monte-Carlo terms of `Σ_n sup_m E|S(m; a^n)|^p / f(a^n)^p` over annuli
/// `Q_{m+a^n} \ Q_m`, with probes `m ∈ {0, a^n}` unless fixed.
#[allow(clippy::too_many_arguments)]
pub fn condition_series_sphere(
    generator: &GeneratorSpec,
    f: &ScalingFunction,
    a: u64,
    norm: Norm,
    dim: usize,
    setup: &SeriesSetup,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<MomentSeriesReport> {
    if dim == 0 {
        return arg("dimension must be positive");
    }
    let note = plan_note(f, a, setup.p, setup.n_max, setup.plan_check)?;
    let constants = vec![
        ("geometry".to_string(), format!("sphere ({})", norm.name())),
        ("generator".to_string(), generator.to_string()),
        ("f".to_string(), f.to_string()),
        ("a".to_string(), a.to_string()),
        ("p".to_string(), setup.p.to_string()),
        ("n_max".to_string(), setup.n_max.to_string()),
        ("replicates".to_string(), setup.replicates.to_string()),
        ("plan".to_string(), note),
    ];
    let mut cells = Vec::new();
    let mut r_max = 1u64;
    for n in 0..=setup.n_max {
        let an = pow_u(a, n)?;
        let probes: Vec<u64> = match &setup.probes {
            ProbeSet::Fixed(ms) => ms.iter().map(|m| m[0]).collect(),
            _ => vec![0, an],
        };
        for &m in &probes {
            r_max = r_max.max(m + an);
        }
        cells.push((n, an, probes));
    }
    let sampler = generator.sampler(&vec![r_max; dim])?;
    let p = setup.p;
    let per_rep = threads.map(setup.replicates, |i| -> Result<Vec<f64>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let table = ShellTable::new(&field, norm, r_max)?;
        let mut out = Vec::new();
        for (_, an, probes) in &cells {
            for &m in probes {
                out.push(table.annulus_sum(m, *an)?.abs().powf(p));
            }
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut col = 0;
    for (n, an, probes) in &cells {
        let fn_p = f.eval(*an as f64).powf(p);
        let mut best: Option<(f64, f64, u64)> = None;
        for &m in probes {
            let vals: Vec<f64> = per_rep.iter().map(|r| r[col]).collect();
            col += 1;
            let ms = mean_se(&vals);
            if best.is_none_or(|b| ms.mean / fn_p > b.0) {
                best = Some((ms.mean / fn_p, ms.se / fn_p, m));
            }
        }
        let (term, std_error, m) = best.expect("probes nonempty");
        rows.push(SeriesRow {
            n: vec![*n],
            term,
            std_error,
            probe: Some(vec![m]),
        });
    }
    Ok(MomentSeriesReport::from_rows(rows, setup.rule, constants))
}

/// Deterministic series `Σ_n g(a^{n_1}, …, a^{n_d}) / Π φ_j(a^{n_j})^p`.
pub fn corollary_bound_series(
    g: &dyn Fn(&[f64]) -> f64,
    phis: &[ScalingFunction],
    a: u64,
    p: f64,
    n_max: u64,
    rule: VerdictRule,
) -> MomentSeriesReport {
    let d = phis.len();
    let mut rows = Vec::new();
    for_each_in_box(&vec![0; d], &vec![n_max; d], |n| {
        let x: Vec<f64> = n.iter().map(|&k| (a as f64).powi(k as i32)).collect();
        let denom: f64 = (0..d).map(|j| phis[j].eval(x[j]).powf(p)).product();
        rows.push(SeriesRow {
            n: n.to_vec(),
            term: g(&x) / denom,
            std_error: 0.0,
            probe: None,
        });
    });
    let constants = vec![
        ("a".to_string(), a.to_string()),
        ("p".to_string(), p.to_string()),
        ("n_max".to_string(), n_max.to_string()),
    ];
    MomentSeriesReport::from_rows(rows, rule, constants)
}
