//! The desk-scale acceptance suite.
//!
//! Eleven criteria, each a quantitative proxy for one of the toolkit's
//! claims. Every stochastic criterion draws from streams under
//! `suite/c<id>` of one master seed and reduces its outputs to a 64-bit
//! fingerprint, which criterion 11 compares across thread budgets.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{arg, Result};
use crate::generator::GeneratorSpec;
use crate::harness::{run_slln, SllnExperiment, SllnGeometry, TheoremMode};
use crate::lattice::{
    for_each_in_box, maximal_sum, rect_partial_sum, spherical_partial_sum, spherical_running_max, FieldMeta, LatticeField,
    MultiIndex, Norm,
};
use crate::moments::{
    check_moricz_quasi_orthogonal, check_orthogonal_conditions, check_quasi_stationary_condition, condition_series_rect,
    estimate_recursion_trace, lfss_moment_law, PlanCheck, ProbeSet, RecursionGeometry, RecursionSetup, RecursionTrace,
    SeriesSetup, Verdict, VerdictRule,
};
use crate::parallel::ThreadBudget;
use crate::rng::{fnv1a64, Stream};
use crate::scaling::{base_inequality, BasePlan, recursion_constants, select_base, ScalingFunction, ToeplitzWeights};
use crate::stable::{check_operator_scaling, CovarianceModel, IidLaw, LfssConfig, ScalingCheck, StableParams, VarianceMap};
use crate::stats::ecf_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub summary: &'static str,
    /// Draws random numbers, so takes part in the determinism check.
    pub seeded: bool,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion {
        id: 1,
        name: "sampler-law",
        summary: "SaS empirical characteristic function within 0.02 at 1e5 draws (alpha 0.8, 1, 1.5, 2); Gaussian variance 2 sigma^2 within 3%",
        seeded: true,
    },
    Criterion {
        id: 2,
        name: "sum-oracles",
        summary: "rectangular, spherical, maximal and running-max sums equal brute-force enumeration on boxes up to 6^3",
        seeded: true,
    },
    Criterion {
        id: 3,
        name: "constants",
        summary: "D_{2,2} = D_{3,1} = 4; select_base(2^1.5, p = 2) = 8; c < 1 whenever a base is selected",
        seeded: false,
    },
    Criterion {
        id: 4,
        name: "toeplitz",
        summary: "row sums telescope and stay <= 1 on 200 random configs; decaying inputs give strictly smaller tail sups per doubling",
        seeded: true,
    },
    Criterion {
        id: 5,
        name: "lfss-moment-law",
        summary: "d=1 LFSS (H 0.8, alpha 1.5, p 1, a 2): consecutive moment ratios within 10% of 2^0.8, log-slope over n = 4..10 within 0.05",
        seeded: true,
    },
    Criterion {
        id: 6,
        name: "operator-scaling",
        summary: "d=1, b=2 quantiles inside the Monte Carlo band at 1e5 replicates; exponent H+0.2 falls outside",
        seeded: true,
    },
    Criterion {
        id: 7,
        name: "condition-dichotomy",
        summary: "LFSS moment series converges with the log factor and does not without it (same draws)",
        seeded: true,
    },
    Criterion {
        id: 8,
        name: "slln-decay",
        summary: "iid SaS (alpha 1.5, d 2): median tail sup at 2^10 at most half its value at 2^4 over 32 replicates; under-normalized control does not decay",
        seeded: true,
    },
    Criterion {
        id: 9,
        name: "recursion",
        summary: "F(n+1) <= c F(n) + D (driving term) within 2 standard errors on the sphere and d=2 rectangle settings; all gaps >= 0",
        seeded: true,
    },
    Criterion {
        id: 10,
        name: "corollary-checkers",
        summary: "quasi-stationary D = h(1,1) = 4; Basel partial sum within 1e-4 plus tail; lambda(k) = sqrt k fails the improved condition",
        seeded: false,
    },
    Criterion {
        id: 11,
        name: "determinism",
        summary: "every seeded criterion has the same fingerprint under thread budgets 1 and 8",
        seeded: false,
    },
];

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub threads: usize,
    /// Multiplies every numeric tolerance; `0` turns near-misses into failures.
    pub tolerance_scale: f64,
    /// Criteria to run; empty means all.
    pub only: Vec<u8>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            threads: 1,
            tolerance_scale: 1.0,
            only: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub fingerprint: Option<u64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub seed: u64,
    pub threads: usize,
    pub tolerance_scale: f64,
    pub outcomes: Vec<Outcome>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.pass).count()
    }

    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let _ = writeln!(
                s,
                "{:>2}  {:<20} {}  {:>7.1}s  {}",
                o.id,
                o.name,
                if o.pass { "PASS" } else { "FAIL" },
                o.seconds,
                o.detail
            );
        }
        let _ = writeln!(s, "{} of {} criteria passed (seed {})", self.outcomes.len() - self.failures(), self.outcomes.len(), self.seed);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,name,pass,seconds,fingerprint,detail\n");
        for o in &self.outcomes {
            let fp = o.fingerprint.map(|f| format!("{f:016x}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{:.3},{},\"{}\"", o.id, o.name, o.pass, o.seconds, fp, o.detail.replace('"', "'"));
        }
        s
    }
}

/// Pass flag, a human-readable detail line and the numbers that are fingerprinted.
struct Measured {
    pass: bool,
    detail: String,
    data: Vec<f64>,
}

struct Ctx {
    seed: u64,
    threads: ThreadBudget,
    tol: f64,
}

impl Ctx {
    fn stream(&self, id: u8) -> Stream {
        Stream::new(self.seed, format!("suite/c{id}"))
    }
}

fn fingerprint(data: &[f64]) -> u64 {
    let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect();
    fnv1a64(&bytes)
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    if let Some(bad) = opts.only.iter().find(|&&id| criterion(id).is_none()) {
        return arg(format!("no criterion {bad}; ids run from 1 to {}", CRITERIA.len()));
    }
    if !(opts.tolerance_scale >= 0.0) {
        return arg("tolerance scale must be nonnegative");
    }
    let ctx = Ctx {
        seed: opts.seed,
        threads: ThreadBudget::new(opts.threads),
        tol: opts.tolerance_scale,
    };
    let selected: Vec<&Criterion> = CRITERIA.iter().filter(|c| opts.only.is_empty() || opts.only.contains(&c.id)).collect();
    let mut outcomes: Vec<Outcome> = Vec::new();
    for c in selected {
        let start = Instant::now();
        let (pass, detail, fp) = if c.id == 11 {
            let m = determinism(&ctx, &outcomes)?;
            (m.pass, m.detail, None)
        } else {
            let m = measure(c.id, &ctx)?;
            (m.pass, m.detail, c.seeded.then(|| fingerprint(&m.data)))
        };
        outcomes.push(Outcome {
            id: c.id,
            name: c.name,
            pass,
            detail,
            fingerprint: fp,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SuiteReport {
        seed: opts.seed,
        threads: ctx.threads.threads(),
        tolerance_scale: opts.tolerance_scale,
        outcomes,
    })
}

fn measure(id: u8, ctx: &Ctx) -> Result<Measured> {
    match id {
        1 => sampler_law(ctx),
        2 => sum_oracles(ctx),
        3 => constants(ctx),
        4 => toeplitz(ctx),
        5 => lfss_law(ctx),
        6 => operator_scaling(ctx),
        7 => dichotomy(ctx),
        8 => slln_decay(ctx),
        9 => recursion(ctx),
        10 => corollaries(ctx),
        _ => arg(format!("no criterion {id}")),
    }
}

/// Reruns every seeded criterion under budgets 1 and 8, reusing results
/// already computed at one of them.
fn determinism(ctx: &Ctx, done: &[Outcome]) -> Result<Measured> {
    let mut mismatched = Vec::new();
    let mut checked = 0;
    for c in CRITERIA.iter().filter(|c| c.seeded) {
        let mut prints = Vec::new();
        for budget in [1usize, 8] {
            let cached = done.iter().find(|o| o.id == c.id).filter(|_| ctx.threads.threads() == budget);
            let fp = match cached.and_then(|o| o.fingerprint) {
                Some(fp) => fp,
                None => {
                    let sub = Ctx {
                        seed: ctx.seed,
                        threads: ThreadBudget::new(budget),
                        tol: ctx.tol,
                    };
                    fingerprint(&measure(c.id, &sub)?.data)
                }
            };
            prints.push(fp);
        }
        checked += 1;
        if prints[0] != prints[1] {
            mismatched.push(c.id);
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{checked} seeded criteria identical under 1 and 8 threads")
    } else {
        format!("fingerprints differ for criteria {mismatched:?}")
    };
    Ok(Measured {
        pass: mismatched.is_empty(),
        detail,
        data: Vec::new(),
    })
}

fn iid_stable(alpha: f64) -> Result<GeneratorSpec> {
    Ok(GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(StableParams::standard(alpha)?))))
}

fn sampler_law(ctx: &Ctx) -> Result<Measured> {
    const DRAWS: usize = 100_000;
    const CHUNKS: usize = 10;
    let stream = ctx.stream(1);
    let draw = |params: StableParams, name: &str| -> Vec<f64> {
        let s = stream.child(name);
        ctx.threads
            .map(CHUNKS, |i| {
                let mut rng = s.replicate(i).rng();
                (0..DRAWS / CHUNKS).map(|_| params.sample(&mut rng)).collect::<Vec<f64>>()
            })
            .concat()
    };
    let thetas = [0.25, 0.5, 1.0, 2.0, 3.0];
    let mut worst = 0.0f64;
    let mut data = Vec::new();
    let mut parts = Vec::new();
    for alpha in [0.8, 1.0, 1.5, 2.0] {
        let params = StableParams::standard(alpha)?;
        let x = draw(params, &format!("alpha-{alpha}"));
        let err = thetas
            .iter()
            .map(|&t| (ecf_real(&x, t) - params.characteristic_function(t)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        parts.push(format!("{alpha}:{err:.4}"));
        data.extend_from_slice(&x[..16]);
        data.push(err);
    }
    let sigma = 0.7;
    let x = draw(StableParams::new(2.0, sigma)?, "gaussian");
    let second = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let rel = (second / (2.0 * sigma * sigma) - 1.0).abs();
    data.push(second);
    Ok(Measured {
        pass: worst < 0.02 * ctx.tol && rel < 0.03 * ctx.tol,
        detail: format!("max ECF error {worst:.4} ({}), variance off by {:.2}%", parts.join(" "), 100.0 * rel),
        data,
    })
}

fn random_field(shape: &[usize], stream: &Stream, integer: bool) -> Result<LatticeField> {
    use rand::Rng;
    let mut rng = stream.rng();
    LatticeField::from_fn(shape, FieldMeta::default(), |_| {
        if integer {
            f64::from(rng.random_range(-9i32..=9))
        } else {
            rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-3i32..=3))
        }
    })
}

/// `|got − want|` against zero for integer fields, `1e-12 × mass` otherwise.
fn sums_agree(got: f64, want: f64, mass: f64, integer: bool, tol: f64) -> bool {
    if integer {
        got == want
    } else {
        (got - want).abs() <= 1e-12 * tol * mass.max(f64::MIN_POSITIVE)
    }
}

fn sum_oracles(ctx: &Ctx) -> Result<Measured> {
    const SIDE: u64 = 6;
    let stream = ctx.stream(2);
    let mut checks = 0u64;
    let mut failures = Vec::new();
    let mut data = Vec::new();
    for d in 1..=3usize {
        for integer in [true, false] {
            let kind = if integer { "int" } else { "float" };
            let f = random_field(&vec![SIDE as usize; d], &stream.child(format!("rect-{d}-{kind}")), integer)?;
            let top = SIDE - 1;
            // brute force (m, m+n] and its absolute mass
            let brute = |m: &[u64], n: &[u64]| -> (f64, f64) {
                if n.contains(&0) {
                    return (0.0, 0.0);
                }
                let lo: Vec<u64> = m.iter().map(|x| x + 1).collect();
                let hi: Vec<u64> = m.iter().zip(n).map(|(a, b)| a + b).collect();
                let (mut s, mut mass) = (0.0, 0.0);
                for_each_in_box(&lo, &hi, |k| {
                    let v = f.value_at(k).expect("inside");
                    s += v;
                    mass += v.abs();
                });
                (s, mass)
            };
            for_each_in_box(&vec![0; d], &vec![top; d], |m| {
                let room: Vec<u64> = m.iter().map(|x| top - x).collect();
                for_each_in_box(&vec![0; d], &room, |n| {
                    let (want, mass) = brute(m, n);
                    let got = rect_partial_sum(&f, &MultiIndex::from_slice(m), &MultiIndex::from_slice(n)).expect("in range");
                    checks += 1;
                    if !sums_agree(got, want, mass, integer, ctx.tol) {
                        failures.push(format!("rect d={d} m={m:?} n={n:?}"));
                    }
                    data.push(got);
                    if n.contains(&0) {
                        return;
                    }
                    for s in 0..=d {
                        let mut lo = vec![1u64; d];
                        lo[s..].copy_from_slice(&n[s..]);
                        let (mut best, mut best_mass) = (0.0f64, 0.0);
                        for_each_in_box(&lo, n, |k| {
                            let (v, w) = brute(m, k);
                            if v.abs() > best {
                                best = v.abs();
                            }
                            best_mass = f64::max(best_mass, w);
                        });
                        let got = maximal_sum(&f, &MultiIndex::from_slice(m), &MultiIndex::from_slice(n), s).expect("in range");
                        checks += 1;
                        if !sums_agree(got, best, best_mass, integer, ctx.tol) {
                            failures.push(format!("maximal d={d} m={m:?} n={n:?} s={s}"));
                        }
                    }
                });
            });
            let g = random_field(&vec![SIDE as usize + 1; d], &stream.child(format!("sphere-{d}-{kind}")), integer)?;
            for norm in [Norm::L2, Norm::Max] {
                let inside = |k: &[u64], r: u64| {
                    r >= 1
                        && match norm {
                            Norm::Max => k.iter().all(|&c| c <= r),
                            Norm::L2 => k.iter().map(|&c| c * c).sum::<u64>() <= r * r,
                        }
                };
                let annulus = |m: u64, n: u64| -> (f64, f64) {
                    let (mut s, mut mass) = (0.0, 0.0);
                    for_each_in_box(&vec![0; d], &vec![SIDE; d], |k| {
                        if inside(k, m + n) && !inside(k, m) {
                            let v = g.value_at(k).expect("inside");
                            s += v;
                            mass += v.abs();
                        }
                    });
                    (s, mass)
                };
                for m in 0..=SIDE {
                    for n in 0..=SIDE - m {
                        let (want, mass) = annulus(m, n);
                        let got = spherical_partial_sum(&g, m, n, norm)?;
                        checks += 1;
                        if !sums_agree(got, want, mass, integer, ctx.tol) {
                            failures.push(format!("sphere {} d={d} m={m} n={n}", norm.name()));
                        }
                        data.push(got);
                        if n == 0 {
                            continue;
                        }
                        let (mut best, mut best_mass) = (0.0f64, 0.0f64);
                        for k in 1..=n {
                            let (v, w) = annulus(m, k);
                            best = best.max(v.abs());
                            best_mass = best_mass.max(w);
                        }
                        let got = spherical_running_max(&g, m, n, norm)?;
                        checks += 1;
                        if !sums_agree(got, best, best_mass, integer, ctx.tol) {
                            failures.push(format!("running-max {} d={d} m={m} n={n}", norm.name()));
                        }
                    }
                }
            }
        }
    }
    let detail = match failures.first() {
        None => format!("{checks} queries match enumeration"),
        Some(f) => format!("{} of {checks} queries differ, first: {f}", failures.len()),
    };
    Ok(Measured {
        pass: failures.is_empty(),
        detail,
        data,
    })
}

fn constants(ctx: &Ctx) -> Result<Measured> {
    let d22 = recursion_constants(2, 2.0, 4.0)?.d_ap;
    let d31 = recursion_constants(3, 1.0, 4.0)?.d_ap;
    let c_low = 2f64.powf(1.5);
    let selected = select_base(c_low, 2.0, 64);
    // independent scan: C^⌊log₂ a⌋ against 2a, strict
    let scanned = (2..=64u64).find(|&a| {
        let k = 63 - a.leading_zeros();
        let lhs = 2f64.powf(1.5 * k as f64);
        lhs > 2.0 * a as f64 * (1.0 + 1e-12)
    });
    // the literal inequality forces c < 1 for p >= 1; below that BasePlan
    // keeps scanning until c < 1 as well
    let mut c_violations = Vec::new();
    let mut selections = 0;
    for ci in 0..40 {
        let c_low = 1.05 + 0.1 * ci as f64;
        for pi in 0..25 {
            let p = 0.2 + 0.1 * pi as f64;
            if p >= 1.0 {
                if let Some(a) = select_base(c_low, p, 64) {
                    selections += 1;
                    let (l, r) = base_inequality(c_low, p, a);
                    match recursion_constants(a, p, c_low) {
                        Ok(k) if k.c < 1.0 && l > r => {}
                        _ => c_violations.push((c_low, p, a)),
                    }
                }
            }
            if let Ok(plan) = BasePlan::select(c_low, p, 64) {
                selections += 1;
                if !(plan.constants.c < 1.0) {
                    c_violations.push((c_low, p, plan.a));
                }
            }
        }
    }
    let tol = 1e-15 * ctx.tol;
    let pass = (d22 - 4.0).abs() <= tol
        && (d31 - 4.0).abs() <= tol
        && selected == Some(8)
        && scanned == Some(8)
        && c_violations.is_empty();
    Ok(Measured {
        pass,
        detail: format!(
            "D_(2,2) = {d22}, D_(3,1) = {d31}, select_base = {selected:?} (scan {scanned:?}), c < 1 on {selections} selections, {} violations",
            c_violations.len()
        ),
        data: Vec::new(),
    })
}

fn toeplitz(ctx: &Ctx) -> Result<Measured> {
    use rand::Rng;
    let mut rng = ctx.stream(4).rng();
    let mut worst_telescope = 0.0f64;
    let mut worst_row = 0.0f64;
    let mut data = Vec::new();
    for _ in 0..200 {
        let d = rng.random_range(1..=3usize);
        let a = rng.random_range(2..=6u64);
        let phis: Vec<ScalingFunction> = (0..d)
            .map(|_| match rng.random_range(0..3) {
                0 => ScalingFunction::power(rng.random_range(0.2..3.0)),
                1 => ScalingFunction::power_log(rng.random_range(0.2..1.0), rng.random_range(0.0..2.0)),
                _ => ScalingFunction::power(rng.random_range(0.2..1.5)).with_log_factor(rng.random_range(0.0..1.0)),
            })
            .collect();
        let tw = ToeplitzWeights::new(phis, a)?;
        let n: Vec<u64> = (0..d).map(|_| rng.random_range(0..6u64)).collect();
        let s = tw.row_sum(&n);
        worst_telescope = worst_telescope.max((s - tw.row_sum_closed_form(&n)).abs());
        worst_row = worst_row.max(s);
        data.push(s);
    }
    let tol = 1e-12 * ctx.tol;

    let reference = ToeplitzWeights::new(vec![ScalingFunction::power(1.0)], 2)?;
    let worst_reference = (0..30u64)
        .map(|n| (reference.row_sum(&[n]) - (1.0 - 2f64.powi(-(n as i32) - 1))).abs())
        .fold(0.0, f64::max);

    // in d = 3 the largest t(m) sits at |m| = 2, so the first doubling only
    // ties; strict decay is required from there on
    let mut decays = true;
    let cases: [(usize, Vec<ScalingFunction>, u64); 3] = [
        (1, vec![ScalingFunction::power(1.0)], 1),
        (2, vec![ScalingFunction::power(1.0), ScalingFunction::power_log(0.5, 1.0)], 1),
        (3, vec![ScalingFunction::power(1.0); 3], 2),
    ];
    for (d, phis, strict_from) in cases {
        let side = if d == 3 { 17 } else { 65 };
        let input = LatticeField::from_fn(&vec![side; d], FieldMeta::default(), |k| {
            let r = *k.iter().max().expect("d >= 1") as f64;
            1.0 / (r + 1.0)
        })?;
        let tail = ToeplitzWeights::new(phis, 2)?.transform(&input)?.doubling_tail();
        decays &= tail.windows(2).all(|w| w[1].1 < w[0].1 || (w[0].0 < strict_from && w[1].1 <= w[0].1));
        data.extend(tail.iter().map(|t| t.1));
    }
    let pass = worst_telescope <= tol && worst_row <= 1.0 + tol && worst_reference <= tol && decays;
    Ok(Measured {
        pass,
        detail: format!(
            "telescoping error {worst_telescope:.1e}, largest row sum {worst_row:.6}, reference error {worst_reference:.1e}, tail sups strictly decreasing: {decays}"
        ),
        data,
    })
}

fn lfss_law(ctx: &Ctx) -> Result<Measured> {
    let cfg = LfssConfig::new(vec![0.8], 1.5)?;
    let grid: Vec<u64> = (4..=10).collect();
    let r = lfss_moment_law(&cfg, 2, 1.0, &grid, &[], 10_000, &ctx.stream(5), &ctx.threads)?;
    let ratio_err = r.max_ratio_error();
    let slope_err = (r.slope - r.expected_slope).abs();
    let mut data: Vec<f64> = r.rows.iter().map(|row| row.estimate.value).collect();
    data.push(r.c_alpha_p.value);
    Ok(Measured {
        pass: ratio_err < 0.10 * ctx.tol && slope_err < 0.05 * ctx.tol,
        detail: format!(
            "ratios within {:.1}% of {:.4}, slope {:.4} vs {:.4}",
            100.0 * ratio_err,
            r.expected_ratio,
            r.slope,
            r.expected_slope
        ),
        data,
    })
}

fn operator_scaling(ctx: &Ctx) -> Result<Measured> {
    let cfg = LfssConfig::new(vec![0.8], 1.5)?;
    let mut check = ScalingCheck::new(vec![2], vec![8], 100_000);
    check.z *= ctx.tol;
    let good = check_operator_scaling(&cfg, &check, &ctx.stream(6), &ctx.threads)?;
    check.exponents = Some(vec![1.0]);
    let control = check_operator_scaling(&cfg, &check, &ctx.stream(6), &ctx.threads)?;
    let mut data: Vec<f64> = good.rows.iter().flat_map(|r| [r.scaled, r.predicted]).collect();
    data.extend(control.rows.iter().map(|r| r.predicted));
    Ok(Measured {
        pass: good.pass && !control.pass,
        detail: format!(
            "H = 0.8: {}/{} quantiles in band (max discrepancy {:.3}); H + 0.2: {}/{} in band",
            good.rows.iter().filter(|r| r.within).count(),
            good.rows.len(),
            good.max_discrepancy,
            control.rows.iter().filter(|r| r.within).count(),
            control.rows.len()
        ),
        data,
    })
}

fn dichotomy(ctx: &Ctx) -> Result<Measured> {
    let (h, alpha, eps, p) = (0.8, 1.5, 0.5, 1.0);
    let rho = 1.0 / alpha + eps;
    let cfg = LfssConfig::new(vec![h], alpha)?;
    let gen = GeneratorSpec::Lfss(cfg);
    let with_log = vec![ScalingFunction::power_log(h, rho)];
    let without = vec![ScalingFunction::power_log(h, 0.0)];
    let mut setup = SeriesSetup::new(p, 12, 2000);
    setup.plan_check = PlanCheck::Report;
    let report = condition_series_rect(&gen, &with_log, &[2], &setup, &ctx.stream(7), &ctx.threads)?;
    let bare = report.renormalized(&with_log, &without, &[2], p, setup.rule);
    let data: Vec<f64> = report.level_terms.clone();
    let pass = p * rho > 1.0 && report.verdict == Verdict::Converges && bare.verdict != Verdict::Converges;
    let ratio = |r: Option<f64>| r.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    Ok(Measured {
        pass,
        detail: format!(
            "p(1/alpha+eps) = {:.3}; with log: {} (tail ratio {}), without: {} (tail ratio {})",
            p * rho,
            report.verdict,
            ratio(report.tail_ratio),
            bare.verdict,
            ratio(bare.tail_ratio)
        ),
        data,
    })
}

fn slln_decay(ctx: &Ctx) -> Result<Measured> {
    let alpha = 1.5;
    let gen = iid_stable(alpha)?;
    let checkpoints: Vec<u64> = (4..=10).map(|e| 1u64 << e).collect();
    let phi = ScalingFunction::power_log(1.0 / alpha, 1.0 / alpha + 0.5);
    let mut run = SllnExperiment::new(gen.clone(), SllnGeometry::Rect, 2, vec![phi; 2], checkpoints.clone(), 32);
    run.theorem_mode = Some(TheoremMode {
        check: PlanCheck::Report,
        a: 2,
        p: 1.0,
    });
    let stream = ctx.stream(8);
    let main = run_slln(&run, &stream.child("theorem"), &ctx.threads)?;
    let mut control = SllnExperiment::new(gen, SllnGeometry::Rect, 2, vec![ScalingFunction::power(0.5 / alpha); 2], checkpoints, 32);
    control.negative_control = true;
    let ctrl = run_slln(&control, &stream.child("control"), &ctx.threads)?;
    let mut data = main.median.clone();
    data.extend(&ctrl.median);
    Ok(Measured {
        pass: main.decayed && main.expectation_met() && ctrl.expectation_met(),
        detail: format!(
            "median ratio 2^10 / 2^4 = {:.3} (decayed {}); control ratio {:.3} (decayed {})",
            main.decay_ratio, main.decayed, ctrl.decay_ratio, ctrl.decayed
        ),
        data,
    })
}

/// Checks recomputed at `2 × tol` standard errors.
fn trace_holds(t: &RecursionTrace, tol: f64) -> (usize, bool) {
    let bad = t.checks.iter().filter(|c| c.slack < -2.0 * tol * c.slack_se).count();
    (bad, t.min_gap >= 0.0)
}

fn recursion(ctx: &Ctx) -> Result<Measured> {
    let alpha = 1.5;
    let gen = iid_stable(alpha)?;
    let stream = ctx.stream(9);
    let mut traces = Vec::new();
    let sphere = RecursionGeometry::Sphere {
        f: ScalingFunction::power(2.0 / alpha + 0.2),
        a: 2,
        p: 1.0,
        norm: Norm::Max,
        dim: 2,
    };
    let setup = |reps| RecursionSetup {
        n_max: 5,
        replicates: reps,
        probes: ProbeSet::Auto,
    };
    traces.push(("sphere", estimate_recursion_trace(&gen, &sphere, &setup(800), &stream.child("sphere"), &ctx.threads)?));
    for s in [1usize, 2] {
        let rect = RecursionGeometry::Rect {
            s,
            phis: vec![ScalingFunction::power(1.2); 2],
            a: 2,
            p: 1.0,
            fixed: vec![2, 2],
        };
        let name = if s == 1 { "rect s=1" } else { "rect s=2" };
        traces.push((name, estimate_recursion_trace(&gen, &rect, &setup(400), &stream.child(name), &ctx.threads)?));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    let mut data = Vec::new();
    for (name, t) in &traces {
        let (bad, gaps) = trace_holds(t, ctx.tol);
        pass &= bad == 0 && gaps;
        parts.push(format!("{name}: {} levels, {bad} violations, min gap {:.3}", t.checks.len(), t.min_gap));
        data.extend(t.levels.iter().flat_map(|l| [l.f, l.drive]));
    }
    Ok(Measured {
        pass,
        detail: parts.join("; "),
        data,
    })
}

fn corollaries(ctx: &Ctx) -> Result<Measured> {
    let rule = VerdictRule::default();
    let x = ScalingFunction::power(1.0);
    let qs = check_quasi_stationary_condition(&|i, j| 0.5f64.powi((i + j) as i32), &x, &x, 2, 10, rule)?;
    let exact = 1e-12 * ctx.tol;
    let qs_ok = (qs.d_value - 4.0).abs() <= exact && (qs.h(1, 1) - 4.0).abs() <= exact;

    let basel = check_orthogonal_conditions(&VarianceMap::Constant(1.0), 1, 10_000, rule)?;
    let tail = basel.weakened.tail_bound.unwrap_or(f64::INFINITY);
    let gap = std::f64::consts::PI.powi(2) / 6.0 - basel.weakened.partial_sum;
    let basel_ok = gap >= 0.0 && gap <= (1e-4 + tail) * ctx.tol;

    let rho = |m: u64, n: u64| 0.5f64.powi((m + n) as i32);
    let sqrt = ScalingFunction::power(0.5);
    let mz = check_moricz_quasi_orthogonal(&rho, &sqrt, &sqrt, 10, rule)?;
    let flagged = !mz.improved_holds();
    Ok(Measured {
        pass: qs_ok && basel_ok && flagged,
        detail: format!(
            "D = {}, h(1,1) = {}; pi^2/6 minus partial sum = {gap:.3e} (tail bound {tail:.1e}); sqrt k flagged: {flagged}",
            qs.d_value,
            qs.h(1, 1)
        ),
        data: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_consecutive() {
        for (i, c) in CRITERIA.iter().enumerate() {
            assert_eq!(c.id as usize, i + 1);
        }
        assert!(criterion(12).is_none());
    }

    #[test]
    fn cheap_criteria_pass() {
        let r = run_suite(&SuiteOptions {
            only: vec![2, 3, 4, 10],
            ..SuiteOptions::default()
        })
        .unwrap();
        assert!(r.all_passed(), "{}", r.table());
    }

    #[test]
    fn zero_tolerance_fails() {
        let r = run_suite(&SuiteOptions {
            only: vec![1],
            tolerance_scale: 0.0,
            ..SuiteOptions::default()
        })
        .unwrap();
        assert!(!r.all_passed());
        assert!(r.table().contains("FAIL"));
    }

    #[test]
    fn unknown_id_is_an_error() {
        let opts = SuiteOptions {
            only: vec![0],
            ..SuiteOptions::default()
        };
        assert!(run_suite(&opts).is_err());
    }

    #[test]
    fn fingerprint_sees_every_bit() {
        assert_ne!(fingerprint(&[1.0]), fingerprint(&[1.0 + f64::EPSILON]));
        assert_ne!(fingerprint(&[0.0]), fingerprint(&[-0.0]));
    }
}
