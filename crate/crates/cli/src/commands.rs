use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;

use slln_core::harness::{run_slln, SllnExperiment, SllnGeometry, TheoremMode};
use slln_core::lattice::{FieldMeta, GeneratorId};
use slln_core::moments::{
    condition_series_rect, condition_series_sphere, estimate_abs_moment, estimate_recursion_trace, lfss_moment_law,
    check_orthogonal_conditions, MomentEstimate, ProbeSet, RecursionGeometry, RecursionSetup, ScalarLaw, SeriesSetup,
    VerdictRule,
};
use slln_core::stable::{sheet_from_increments, IidLaw, LfssSimulator, VarianceMap, DEFAULT_MEMORY_BUDGET};
use slln_core::suite::{run_suite, SuiteOptions, CRITERIA};
use slln_core::{CovarianceModel, GeneratorSpec, LatticeField, PrefixSumTable, Stream, ThreadBudget, ToeplitzWeights};

use crate::build::{self, Expect};
use crate::config::{fmt_f64, Config};
use crate::exit::{Failure, EXPECTATION_FAILED, OK, USAGE};
use crate::output::OutDir;

pub struct Run<'a> {
    pub seed: u64,
    pub threads: &'a ThreadBudget,
    pub cfg: &'a Config,
    pub out: &'a mut OutDir,
}

impl Run<'_> {
    fn stream(&self, name: &str) -> Stream {
        Stream::new(self.seed, name)
    }
}

fn status(ok: bool) -> u8 {
    if ok {
        OK
    } else {
        EXPECTATION_FAILED
    }
}

fn to_usize(v: &[u64]) -> Vec<usize> {
    v.iter().map(|&x| x as usize).collect()
}

pub fn simulate(run: &mut Run) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let gen = build::generator(cfg)?;
    let shape = cfg.u64s_req("simulate.shape")?;
    if shape.contains(&0) {
        return Err(Failure::config("simulate.shape entries must be positive"));
    }
    if let Some(d) = gen.required_dim() {
        if d != shape.len() {
            return Err(Failure::config(format!("simulate.shape has {} entries but the generator is {d}-dimensional", shape.len())));
        }
    }
    let format = cfg.choice("simulate.format", &["binary", "csv"], "binary")?;
    let field_kind = cfg.choice("simulate.field", &["increments", "sheet"], "increments")?;
    let budget = cfg.u64_or("simulate.memory_budget", DEFAULT_MEMORY_BUDGET)?;
    cfg.finish()?;

    let stream = run.stream("simulate");
    let field = match &gen {
        GeneratorSpec::Lfss(c) => {
            let mut f = LfssSimulator::with_budget(c, &to_usize(&shape), budget)?.simulate(&stream, run.threads)?;
            f.set_meta(FieldMeta {
                generator: GeneratorId::LfssIncrements,
                seed: stream.seed(),
            });
            if field_kind == "sheet" {
                sheet_from_increments(&f)?
            } else {
                f
            }
        }
        other => {
            if field_kind == "sheet" {
                return Err(Failure::config("simulate.field = sheet needs generator.kind = lfss"));
            }
            let required = shape.iter().product::<u64>().saturating_mul(8);
            if required > budget {
                return Err(slln_core::Error::Memory {
                    required,
                    allowed: budget,
                }
                .into());
            }
            let extent: Vec<u64> = shape.iter().map(|s| s - 1).collect();
            other.sampler(&extent)?.sample(&stream)?
        }
    };
    let mut bytes = Vec::new();
    let name = if format == "binary" {
        field.write_binary(&mut bytes)?;
        "field.bin"
    } else {
        field.write_csv(&mut bytes)?;
        "field.csv"
    };
    let sum = run.out.write(name, &bytes)?;
    println!("{name}: shape {:?}, offset {:?}, sha256 {sum}", field.shape(), field.offset());
    Ok(OK)
}

fn scalar_law(gen: &GeneratorSpec) -> Result<ScalarLaw, Failure> {
    match gen {
        GeneratorSpec::Zero => Ok(ScalarLaw::Constant(0.0)),
        GeneratorSpec::Constant(c) => Ok(ScalarLaw::Constant(*c)),
        GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Gaussian { sigma })) => Ok(ScalarLaw::Gaussian { sigma: *sigma }),
        GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(p))) => Ok(ScalarLaw::Stable(*p)),
        _ => Err(Failure::config("moments.target = scalar needs a zero, constant, gaussian or stable generator")),
    }
}

fn tail_index(gen: &GeneratorSpec) -> Option<f64> {
    let alpha = match gen {
        GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(p))) => p.alpha,
        GeneratorSpec::Lfss(c) => c.alpha,
        _ => return None,
    };
    (alpha < 2.0).then_some(alpha)
}

fn estimate_csv(rows: &[(String, MomentEstimate)]) -> String {
    let mut s = String::from("target,p,value,std_error,replicates,heavy_tail\n");
    for (label, e) in rows {
        let _ = writeln!(s, "{label},{},{:e},{:e},{},{}", fmt_f64(e.p), e.value, e.std_error, e.replicates, e.heavy_tail);
    }
    s
}

pub fn estimate_moments(run: &mut Run) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let target = cfg.choice("moments.target", &["scalar", "box", "law"], "box")?;
    let p = cfg.f64_or("moments.p", 1.0)?;
    let replicates = cfg.u64_or("moments.replicates", 1000)? as usize;
    let stream = run.stream("estimate-moments");
    match target.as_str() {
        "scalar" => {
            let law = scalar_law(&build::generator(cfg)?)?;
            cfg.finish()?;
            let e = estimate_abs_moment(law, p, replicates, &stream, run.threads)?;
            println!("E|X|^{p} = {:.6e} ± {:.2e}", e.value, e.std_error);
            run.out.write("moments.csv", estimate_csv(&[("scalar".into(), e)]).as_bytes())?;
        }
        "box" => {
            let gen = build::generator(cfg)?;
            let n = cfg.u64s_req("moments.n")?;
            let m = cfg.u64s_or("moments.m", &vec![0; n.len()])?;
            cfg.finish()?;
            if m.len() != n.len() {
                return Err(Failure::config("moments.m and moments.n need the same length"));
            }
            if let Some(a) = tail_index(&gen) {
                if p >= a {
                    return Err(Failure::config(format!("E|S|^p is infinite for p = {p} >= alpha = {a}; need p < alpha")));
                }
            }
            if replicates < 2 {
                return Err(Failure::config("moments.replicates must be at least 2"));
            }
            let extent: Vec<u64> = m.iter().zip(&n).map(|(a, b)| a + b).collect();
            let sampler = gen.sampler(&extent)?;
            let sums = run.threads.map(replicates, |i| -> slln_core::Result<f64> {
                let f = sampler.sample(&stream.replicate(i))?;
                PrefixSumTable::new(&f).rect_sum(&m, &n)
            });
            let sums = sums.into_iter().collect::<slln_core::Result<Vec<f64>>>()?;
            let e = MomentEstimate::from_values(&sums, p, stream.seed(), tail_index(&gen));
            println!("E|S(m; n)|^{p} = {:.6e} ± {:.2e}", e.value, e.std_error);
            run.out.write("moments.csv", estimate_csv(&[("box".into(), e)]).as_bytes())?;
        }
        _ => {
            let lfss = build::lfss_required(cfg)?;
            let a = cfg.u64_or("moments.a", 2)?;
            let levels = cfg.u64s_req("moments.levels")?;
            cfg.finish()?;
            let r = lfss_moment_law(&lfss, a, p, &levels, &[], replicates, &stream, run.threads)?;
            println!(
                "C = {:.6e}; slope {:.5} (expected {:.5}); worst consecutive ratio error {:.2}%",
                r.c_alpha_p.value,
                r.slope,
                r.expected_slope,
                100.0 * r.max_ratio_error()
            );
            run.out.write("law.csv", r.to_csv().as_bytes())?;
        }
    }
    Ok(OK)
}

pub fn check_conditions(run: &mut Run) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let kind = cfg.choice("conditions.kind", &["rect", "sphere", "recursion", "orthogonal"], "rect")?;
    let rule = VerdictRule::default();
    if kind == "orthogonal" {
        let dim = cfg.u64_or("conditions.dim", 1)? as usize;
        let n_max = cfg.u64_or("conditions.n_max", 10_000)?;
        let sigma2 = if cfg.contains("conditions.variance") {
            VarianceMap::Constant(cfg.f64_req("conditions.variance")?)
        } else {
            VarianceMap::ProductPower {
                beta: cfg.f64_or("conditions.beta", 0.0)?,
            }
        };
        let expect = Expect::parse(cfg, "conditions.expect")?;
        cfg.finish()?;
        let r = check_orthogonal_conditions(&sigma2, dim, n_max, rule)?;
        let mut s = String::from("series,partial_sum,tail_bound,tail_ratio,verdict\n");
        for (name, x) in [("klesov", &r.klesov), ("weakened", &r.weakened)] {
            let _ = writeln!(
                s,
                "{name},{:e},{},{},{}",
                x.partial_sum,
                x.tail_bound.map_or(String::new(), |t| format!("{t:e}")),
                x.tail_ratio.map_or(String::new(), |t| format!("{t:.6}")),
                x.verdict
            );
        }
        run.out.write("orthogonal.csv", s.as_bytes())?;
        println!("klesov: {}; weakened: {}", r.klesov.verdict, r.weakened.verdict);
        return Ok(status(expect.met(r.klesov.verdict) && expect.met(r.weakened.verdict)));
    }

    let gen = build::generator(cfg)?;
    let dim = build::dimension(cfg, &gen, "conditions.dim")?;
    let p = cfg.f64_or("conditions.p", 1.0)?;
    let n_max = cfg.u64_or("conditions.n_max", 6)?;
    let replicates = cfg.u64_or("conditions.replicates", 500)? as usize;
    let stream = run.stream("check-conditions");

    if kind == "recursion" {
        let geometry = cfg.choice("conditions.geometry", &["rect", "sphere"], "rect")?;
        let a = cfg.u64_or("conditions.a", 2)?;
        let geo = if geometry == "sphere" {
            RecursionGeometry::Sphere {
                f: build::scaling(cfg, "conditions.f")?,
                a,
                p,
                norm: build::norm(cfg, "conditions.norm")?,
                dim,
            }
        } else {
            RecursionGeometry::Rect {
                s: cfg.u64_or("conditions.s", 1)? as usize,
                phis: build::normalizers(cfg, "conditions", dim)?,
                a,
                p,
                fixed: cfg.u64s_or("conditions.fixed", &vec![1; dim])?,
            }
        };
        let expect = cfg.choice("conditions.expect", &["any", "holds", "violated"], "any")?;
        cfg.finish()?;
        let setup = RecursionSetup {
            n_max,
            replicates,
            probes: ProbeSet::Auto,
        };
        let t = estimate_recursion_trace(&gen, &geo, &setup, &stream, run.threads)?;
        let holds = t.violations() == 0 && t.min_gap >= 0.0;
        let summary = format!(
            "contraction = {:.6}\ncoefficient = {:.6}\nmin_gap = {:e}\nviolations = {}\nholds = {holds}\n",
            t.contraction,
            t.coefficient,
            t.min_gap,
            t.violations()
        );
        run.out.write("recursion.csv", t.to_csv().as_bytes())?;
        run.out.write("summary.txt", summary.as_bytes())?;
        print!("{summary}");
        return Ok(status(match expect.as_str() {
            "holds" => holds,
            "violated" => !holds,
            _ => true,
        }));
    }

    let mut setup = SeriesSetup::new(p, n_max, replicates);
    setup.plan_check = build::plan_check(cfg, "conditions.plan_check")?;
    let report = if kind == "sphere" {
        let f = build::scaling(cfg, "conditions.f")?;
        let a = cfg.u64_or("conditions.a", 2)?;
        let norm = build::norm(cfg, "conditions.norm")?;
        let expect = Expect::parse(cfg, "conditions.expect")?;
        cfg.finish()?;
        (condition_series_sphere(&gen, &f, a, norm, dim, &setup, &stream, run.threads)?, expect)
    } else {
        let phis = build::normalizers(cfg, "conditions", dim)?;
        let mut bases = cfg.u64s_or("conditions.a", &[2])?;
        if bases.len() == 1 {
            bases = vec![bases[0]; dim];
        }
        let expect = Expect::parse(cfg, "conditions.expect")?;
        cfg.finish()?;
        (condition_series_rect(&gen, &phis, &bases, &setup, &stream, run.threads)?, expect)
    };
    let (report, expect) = report;
    run.out.write("series.csv", report.to_csv().as_bytes())?;
    run.out.write("summary.txt", report.summary().as_bytes())?;
    print!("{}", report.summary());
    Ok(status(expect.met(report.verdict)))
}

pub fn slln(run: &mut Run) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let gen = build::generator(cfg)?;
    let dim = build::dimension(cfg, &gen, "slln.dim")?;
    let geometry = match cfg.choice("slln.geometry", &["rect", "sphere"], "rect")?.as_str() {
        "rect" => SllnGeometry::Rect,
        _ => SllnGeometry::Sphere(build::norm(cfg, "slln.norm")?),
    };
    let phis = match geometry {
        SllnGeometry::Rect => build::normalizers(cfg, "slln", dim)?,
        SllnGeometry::Sphere(_) => build::normalizers(cfg, "slln", 1)?,
    };
    let mut exp = SllnExperiment::new(
        gen,
        geometry,
        dim,
        phis,
        cfg.u64s_req("slln.checkpoints")?,
        cfg.u64_or("slln.replicates", 32)? as usize,
    );
    exp.decay_factor = cfg.f64_or("slln.decay_factor", exp.decay_factor)?;
    exp.subgrid_ratio = cfg.f64_or("slln.subgrid_ratio", exp.subgrid_ratio)?;
    exp.negative_control = cfg.bool_or("slln.negative_control", false)?;
    let mode = cfg.choice("slln.theorem_mode", &["off", "enforce", "report"], "off")?;
    if mode != "off" {
        exp.theorem_mode = Some(TheoremMode {
            check: build::plan_check(cfg, "slln.theorem_mode")?,
            a: cfg.u64_or("slln.a", 2)?,
            p: cfg.f64_or("slln.p", 1.0)?,
        });
    }
    cfg.finish()?;
    let t = run_slln(&exp, &run.stream("slln"), run.threads)?;
    run.out.write("tailsup.csv", t.to_csv().as_bytes())?;
    run.out.write("summary.txt", t.summary().as_bytes())?;
    print!("{}", t.summary());
    Ok(status(t.expectation_met()))
}

fn read_field(path: &Path) -> Result<LatticeField, Failure> {
    let file = std::fs::File::open(path).map_err(|e| Failure::config(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let field = if path.extension().is_some_and(|e| e == "csv") {
        LatticeField::read_csv(reader, FieldMeta::default())?
    } else {
        LatticeField::read_binary(reader)?
    };
    Ok(field)
}

pub fn toeplitz(run: &mut Run) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let dim = cfg.u64_or("toeplitz.dim", 1)? as usize;
    let phis = build::normalizers(cfg, "toeplitz", dim)?;
    let a = cfg.u64_or("toeplitz.a", 2)?;
    let input = cfg.choice("toeplitz.input", &["decay", "constant", "file"], "decay")?;
    let s = match input.as_str() {
        "file" => {
            let f = read_field(Path::new(&cfg.str_req("toeplitz.path")?))?;
            cfg.finish()?;
            f
        }
        kind => {
            let n_max = cfg.u64_or("toeplitz.n_max", 64)? as usize;
            let rate = if kind == "decay" { cfg.f64_or("toeplitz.rate", 1.0)? } else { 0.0 };
            let value = if kind == "constant" { cfg.f64_or("toeplitz.value", 1.0)? } else { 1.0 };
            cfg.finish()?;
            LatticeField::from_fn(&vec![n_max + 1; dim], FieldMeta::default(), |k| {
                let r = *k.iter().max().expect("d >= 1") as f64;
                value / (r + 1.0).powf(rate)
            })?
        }
    };
    let t = ToeplitzWeights::new(phis, a)?.transform(&s)?;
    let mut field = Vec::new();
    t.t.write_csv(&mut field)?;
    run.out.write("transform.csv", &field)?;
    let mut tail = String::from("N,tail_sup\n");
    for (n, v) in t.doubling_tail() {
        let _ = writeln!(tail, "{n},{v:e}");
    }
    run.out.write("tail.csv", tail.as_bytes())?;
    print!("{tail}");
    Ok(OK)
}

pub fn list_criteria() {
    for c in &CRITERIA {
        println!("{:>2}  {:<20} {}", c.id, c.name, c.summary);
    }
}

pub fn paper_suite(run: &mut Run, only: &[u8]) -> Result<u8, Failure> {
    let cfg = run.cfg;
    let tolerance_scale = cfg.f64_or("suite.tolerance_scale", 1.0)?;
    cfg.note("suite.only", if only.is_empty() { "all".to_string() } else { format!("{only:?}") });
    cfg.finish()?;
    if only.iter().any(|&id| !CRITERIA.iter().any(|c| c.id == id)) {
        return Err(Failure {
            code: USAGE,
            message: format!("--only takes criterion ids 1 to {}", CRITERIA.len()),
        });
    }
    let opts = SuiteOptions {
        seed: run.seed,
        threads: run.threads.threads(),
        tolerance_scale,
        only: only.to_vec(),
    };
    let report = run_suite(&opts)?;
    print!("{}", report.table());
    run.out.write("suite.csv", report.to_csv().as_bytes())?;
    Ok(status(report.all_passed()))
}
