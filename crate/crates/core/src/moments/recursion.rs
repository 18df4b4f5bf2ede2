use std::collections::BTreeSet;

use crate::error::{arg, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{maximal_sums_all, Norm, PrefixSumTable, ShellTable};
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::scaling::{doubling_bounds, BasePlan, ScalingFunction};
use crate::stats::mean_se;

use super::series::ProbeSet;

#[derive(Debug, Clone, PartialEq)]
pub enum RecursionGeometry {
    /// Running maxima of spherical sums, normalized by `f`.
    Sphere {
        f: ScalingFunction,
        a: u64,
        p: f64,
        norm: Norm,
        dim: usize,
    },
    /// `F_{s,s−1}` of the rectangular maximal sums, stepping `n_s` with the
    /// other exponents held at `fixed[j]` (`fixed[s−1]` is ignored).
    Rect {
        s: usize,
        phis: Vec<ScalingFunction>,
        a: u64,
        p: f64,
        fixed: Vec<u64>,
    },
}

impl RecursionGeometry {
    fn p(&self) -> f64 {
        match self {
            RecursionGeometry::Sphere { p, .. } | RecursionGeometry::Rect { p, .. } => *p,
        }
    }

    fn a(&self) -> u64 {
        match self {
            RecursionGeometry::Sphere { a, .. } | RecursionGeometry::Rect { a, .. } => *a,
        }
    }

    fn dim(&self) -> usize {
        match self {
            RecursionGeometry::Sphere { dim, .. } => *dim,
            RecursionGeometry::Rect { phis, .. } => phis.len(),
        }
    }

    /// The normalizer whose doubling constant drives the contraction.
    fn stepped_phi(&self) -> &ScalingFunction {
        match self {
            RecursionGeometry::Sphere { f, .. } => f,
            RecursionGeometry::Rect { s, phis, .. } => &phis[*s - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionLevel {
    pub n: u64,
    /// `F(n)` over the probe set of level `n`.
    pub f: f64,
    pub f_se: f64,
    /// `F(n)` over the shifted probes feeding level `n+1`.
    pub f_shifted: f64,
    pub drive: f64,
    pub drive_se: f64,
    /// `contraction · F(n) + coefficient · drive(n)`, the bound on `F(n+1)`.
    pub bound_next: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionCheck {
    /// The level being bounded, `n + 1`.
    pub n: u64,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
    pub slack_se: f64,
    /// `slack < −2 · slack_se`.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrace {
    pub levels: Vec<RecursionLevel>,
    pub checks: Vec<RecursionCheck>,
    pub contraction: f64,
    pub coefficient: f64,
    /// Smallest per-replicate normalized gap seen; never negative.
    pub min_gap: f64,
    pub replicates: usize,
    pub plan: BasePlan,
}

impl RecursionTrace {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| c.violated).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,F,F_se,drive,drive_se,bound_next,lhs_next,slack,slack_se,violated\n");
        for (i, l) in self.levels.iter().enumerate() {
            let c = self.checks.get(i);
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},",
                l.n, l.f, l.f_se, l.drive, l.drive_se, l.bound_next
            ));
            match c {
                Some(c) => out.push_str(&format!("{:e},{:e},{:e},{}\n", c.lhs, c.slack, c.slack_se, c.violated)),
                None => out.push_str(",,,\n"),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionSetup {
    pub n_max: u64,
    pub replicates: usize,
    pub probes: ProbeSet,
}

/// One `(level, probe)` evaluation: normalized gap and driving value.
struct Query {
    probe: Vec<u64>,
    size: Vec<u64>,
    norm: f64,
}

/// Monte-Carlo check of the level recursion
/// `F(n+1) ≤ contraction · F(n) + coefficient · drive(n)`.
///
/// `F(n+1)` is taken over the probe set of level `n+1`; the right side at
/// level `n` is taken over the probes shifted by `l·a^n` (`l < a`) along the
/// stepped direction, which are exactly the offsets the splitting argument
/// uses, so the inequality holds in expectation on the finite probe set.
pub fn estimate_recursion_trace(
    generator: &GeneratorSpec,
    geometry: &RecursionGeometry,
    setup: &RecursionSetup,
    stream: &Stream,
    threads: &ThreadBudget,
) -> Result<RecursionTrace> {
    let (a, p, d) = (geometry.a(), geometry.p(), geometry.dim());
    if d == 0 {
        return arg("dimension must be positive");
    }
    if setup.replicates < 2 {
        return arg("need at least two replicates");
    }
    let x_max = (a as f64).powi(setup.n_max as i32 + 1);
    let bounds = doubling_bounds(geometry.stepped_phi(), 1.0, x_max)?;
    let plan = BasePlan::with_base(a, p, bounds.c_low)?;
    let (contraction, coefficient) = match geometry {
        RecursionGeometry::Sphere { .. } => (plan.constants.c, plan.constants.d_ap),
        RecursionGeometry::Rect { s, fixed, .. } => {
            if *s == 0 || *s > d || fixed.len() != d {
                return arg(format!("need 1 <= s <= {d} and {d} fixed exponents"));
            }
            (plan.contraction(), plan.rect_driving_coefficient())
        }
    };

    let step_axis = match geometry {
        RecursionGeometry::Sphere { .. } => 0,
        RecursionGeometry::Rect { s, .. } => s - 1,
    };
    let pw = |n: u64| a.pow(n as u32);
    let size_at = |n: u64| -> Vec<u64> {
        match geometry {
            RecursionGeometry::Sphere { .. } => vec![pw(n)],
            RecursionGeometry::Rect { fixed, .. } => {
                let mut v: Vec<u64> = fixed.iter().map(|&k| pw(k)).collect();
                v[step_axis] = pw(n);
                v
            }
        }
    };
    let norm_at = |size: &[u64]| -> f64 {
        match geometry {
            RecursionGeometry::Sphere { f, .. } => f.eval(size[0] as f64).powf(p),
            RecursionGeometry::Rect { phis, .. } => {
                size.iter().zip(phis).map(|(&x, phi)| phi.eval(x as f64).powf(p)).product()
            }
        }
    };
    let pdim = match geometry {
        RecursionGeometry::Sphere { .. } => 1,
        RecursionGeometry::Rect { .. } => d,
    };
    let stationary = generator.is_stationary() && matches!(geometry, RecursionGeometry::Rect { .. });
    let lhs_probes = |n: u64| -> Vec<Vec<u64>> {
        match &setup.probes {
            ProbeSet::Fixed(ms) => ms.clone(),
            ProbeSet::Auto if stationary => vec![vec![0; pdim]],
            _ => {
                let size = size_at(n);
                let shift: Vec<u64> = (0..pdim).map(|j| size[j]).collect();
                vec![vec![0; pdim], shift]
            }
        }
    };
    let shifted = |n: u64| -> Vec<Vec<u64>> {
        if stationary {
            return vec![vec![0; pdim]];
        }
        let mut set = BTreeSet::new();
        for m in lhs_probes(n + 1) {
            for l in 0..a {
                let mut v = m.clone();
                v[if pdim == 1 { 0 } else { step_axis }] += l * pw(n);
                set.insert(v);
            }
        }
        set.into_iter().collect()
    };

    // queries, and which of them make up each level's sets
    let mut queries: Vec<Query> = Vec::new();
    let mut index = std::collections::BTreeMap::new();
    let mut add = |level: u64, probe: Vec<u64>, queries: &mut Vec<Query>| -> usize {
        *index.entry((level, probe.clone())).or_insert_with(|| {
            let size = size_at(level);
            let norm = norm_at(&size);
            queries.push(Query {
                probe,
                size,
                norm,
            });
            queries.len() - 1
        })
    };
    let mut lhs_sets = Vec::new();
    let mut rhs_sets = Vec::new();
    for n in 0..=setup.n_max {
        lhs_sets.push(lhs_probes(n).into_iter().map(|m| add(n, m, &mut queries)).collect::<Vec<_>>());
        rhs_sets.push(if n < setup.n_max {
            shifted(n).into_iter().map(|m| add(n, m, &mut queries)).collect::<Vec<_>>()
        } else {
            Vec::new()
        });
    }
    let mut extent = vec![1u64; d];
    for q in &queries {
        match geometry {
            RecursionGeometry::Sphere { .. } => {
                let r = q.probe[0] + q.size[0];
                extent.iter_mut().for_each(|e| *e = (*e).max(r));
            }
            RecursionGeometry::Rect { .. } => {
                for j in 0..d {
                    extent[j] = extent[j].max(q.probe[j] + q.size[j]);
                }
            }
        }
    }

    let sampler = generator.sampler(&extent)?;
    let s_rect = match geometry {
        RecursionGeometry::Rect { s, .. } => *s,
        _ => 0,
    };
    // per replicate: (gap, drive) for each query
    let per_rep = threads.map(setup.replicates, |i| -> Result<Vec<(f64, f64)>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let mut out = Vec::with_capacity(queries.len());
        match geometry {
            RecursionGeometry::Sphere { norm, .. } => {
                let table = ShellTable::new(&field, *norm, extent[0])?;
                for q in &queries {
                    let (m, s) = table.running_max(q.probe[0], q.size[0])?;
                    let (mp, sp) = (m.powf(p), s.powf(p));
                    out.push(((mp - sp) / q.norm, sp / q.norm));
                }
            }
            RecursionGeometry::Rect { .. } => {
                let table = PrefixSumTable::new(&field);
                for q in &queries {
                    let ms = maximal_sums_all(&table, &q.probe, &q.size)?;
                    let (hi, lo) = (ms[s_rect].powf(p), ms[s_rect - 1].powf(p));
                    out.push(((hi - lo) / q.norm, lo / q.norm));
                }
            }
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let mut min_gap = f64::INFINITY;
    let stats: Vec<((f64, f64), (f64, f64))> = (0..queries.len())
        .map(|k| {
            let gaps: Vec<f64> = per_rep.iter().map(|r| r[k].0).collect();
            let drives: Vec<f64> = per_rep.iter().map(|r| r[k].1).collect();
            min_gap = gaps.iter().copied().fold(min_gap, f64::min);
            let g = mean_se(&gaps);
            let dr = mean_se(&drives);
            ((g.mean, g.se), (dr.mean, dr.se))
        })
        .collect();
    let sup = |set: &[usize], pick: fn(&((f64, f64), (f64, f64))) -> (f64, f64)| -> (f64, f64) {
        set.iter()
            .map(|&k| pick(&stats[k]))
            .fold((f64::NEG_INFINITY, 0.0), |b, x| if x.0 > b.0 { x } else { b })
    };

    let mut levels = Vec::new();
    for n in 0..=setup.n_max {
        let (f, f_se) = sup(&lhs_sets[n as usize], |s| s.0);
        let (f_shifted, fs_se, drive, drive_se) = if n < setup.n_max {
            let (fs, fse) = sup(&rhs_sets[n as usize], |s| s.0);
            let (dv, dse) = sup(&rhs_sets[n as usize], |s| s.1);
            (fs, fse, dv, dse)
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        let _ = fs_se;
        levels.push(RecursionLevel {
            n,
            f,
            f_se,
            f_shifted,
            drive,
            drive_se,
            bound_next: contraction * f_shifted + coefficient * drive,
        });
    }
    let mut checks = Vec::new();
    for n in 0..setup.n_max as usize {
        let (_, fs_se) = sup(&rhs_sets[n], |s| s.0);
        let lvl = &levels[n];
        let next = &levels[n + 1];
        let slack = lvl.bound_next - next.f;
        let slack_se = ((contraction * fs_se).powi(2) + (coefficient * lvl.drive_se).powi(2) + next.f_se.powi(2)).sqrt();
        checks.push(RecursionCheck {
            n: n as u64 + 1,
            lhs: next.f,
            bound: lvl.bound_next,
            slack,
            slack_se,
            violated: slack < -2.0 * slack_se,
        });
    }
    Ok(RecursionTrace {
        levels,
        checks,
        contraction,
        coefficient,
        min_gap,
        replicates: setup.replicates,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{CovarianceModel, IidLaw, StableParams};

    fn iid(alpha: f64) -> GeneratorSpec {
        GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(StableParams::standard(alpha).unwrap())))
    }

    fn setup(n_max: u64, replicates: usize) -> RecursionSetup {
        RecursionSetup {
            n_max,
            replicates,
            probes: ProbeSet::Auto,
        }
    }

    #[test]
    fn sphere_recursion_holds() {
        let alpha = 1.5;
        let geo = RecursionGeometry::Sphere {
            f: ScalingFunction::power(2.0 / alpha + 0.2),
            a: 2,
            p: 1.0,
            norm: Norm::Max,
            dim: 2,
        };
        let t = estimate_recursion_trace(&iid(alpha), &geo, &setup(4, 600), &Stream::new(5, "rec"), &ThreadBudget::sequential())
            .unwrap();
        assert_eq!(t.levels[0].f, 0.0);
        assert!(t.min_gap >= 0.0);
        assert_eq!(t.violations(), 0, "{}", t.to_csv());
    }

    #[test]
    fn rect_gap_nonnegative_and_zero_at_first_level() {
        for (s, p, beta) in [(1, 1.0, 1.2), (2, 1.0, 1.2), (2, 1.2, 1.5)] {
            let geo = RecursionGeometry::Rect {
                s,
                phis: vec![ScalingFunction::power(beta); 2],
                a: 2,
                p,
                fixed: vec![2, 2],
            };
            let t = estimate_recursion_trace(&iid(1.5), &geo, &setup(4, 300), &Stream::new(6, "rect"), &ThreadBudget::sequential())
                .unwrap();
            assert_eq!(t.levels[0].f, 0.0);
            assert!(t.min_gap >= 0.0);
            assert_eq!(t.violations(), 0, "s={s} p={p}\n{}", t.to_csv());
        }
    }

    #[test]
    fn inadmissible_plan_is_refused() {
        let geo = RecursionGeometry::Sphere {
            f: ScalingFunction::power(0.5),
            a: 2,
            p: 1.0,
            norm: Norm::Max,
            dim: 1,
        };
        assert!(estimate_recursion_trace(&iid(1.5), &geo, &setup(3, 10), &Stream::new(1, "x"), &ThreadBudget::sequential())
            .is_err());
    }

    #[test]
    fn nonstationary_generator_uses_shifted_probes() {
        let g = GeneratorSpec::Model(CovarianceModel::Orthogonal(crate::stable::VarianceMap::ProductPower { beta: 0.5 }));
        let geo = RecursionGeometry::Rect {
            s: 1,
            phis: vec![ScalingFunction::power(1.2)],
            a: 2,
            p: 1.0,
            fixed: vec![0],
        };
        let t = estimate_recursion_trace(&g, &geo, &setup(5, 400), &Stream::new(7, "o"), &ThreadBudget::sequential()).unwrap();
        assert_eq!(t.violations(), 0, "{}", t.to_csv());
        assert!(t.levels[1].f_shifted >= 0.0);
    }
}
