use crate::error::{arg, Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{for_each_in_box, Norm, PrefixSumTable, ShellTable};
use crate::moments::PlanCheck;
use crate::parallel::ThreadBudget;
use crate::rng::Stream;
use crate::scaling::{doubling_bounds, BasePlan, ScalingFunction};
use crate::stats::{quantile_sorted, sorted};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SllnGeometry {
    /// `S(0; n)` over boxes `[1, n]`, one normalizer per axis, `|n| = max_j n_j`.
    Rect,
    /// `S(0; r)` over the balls `Q_r`, a single normalizer.
    Sphere(Norm),
}

/// How inadmissible normalizers are treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremMode {
    pub check: PlanCheck,
    pub a: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SllnExperiment {
    pub generator: GeneratorSpec,
    pub geometry: SllnGeometry,
    pub dim: usize,
    pub phis: Vec<ScalingFunction>,
    /// Strictly increasing values of `|n|`.
    pub checkpoints: Vec<u64>,
    pub replicates: usize,
    /// Ratio of the per-axis geometric subgrid of tracked `n` (rect only).
    pub subgrid_ratio: f64,
    /// Required drop of the median tail sup from the first to the last checkpoint.
    pub decay_factor: f64,
    /// The run is a control that is expected not to decay.
    pub negative_control: bool,
    pub theorem_mode: Option<TheoremMode>,
}

impl SllnExperiment {
    pub fn new(generator: GeneratorSpec, geometry: SllnGeometry, dim: usize, phis: Vec<ScalingFunction>, checkpoints: Vec<u64>, replicates: usize) -> Self {
        Self {
            generator,
            geometry,
            dim,
            phis,
            checkpoints,
            replicates,
            subgrid_ratio: 2.0,
            decay_factor: 2.0,
            negative_control: false,
            theorem_mode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailSupSeries {
    pub checkpoints: Vec<u64>,
    /// `per_replicate[i][k] = T_i(N_k)`.
    pub per_replicate: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    pub p90: Vec<f64>,
    /// `median(last) / median(first)`; zero when both vanish.
    pub decay_ratio: f64,
    pub decayed: bool,
    pub negative_control: bool,
    pub tracked: usize,
    pub plan_notes: Vec<String>,
}

impl TailSupSeries {
    /// Decay observed on a normal run, or absent on a negative control.
    pub fn expectation_met(&self) -> bool {
        self.decayed != self.negative_control
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("checkpoint");
        for i in 0..self.per_replicate.len() {
            out.push_str(&format!(",rep{i}"));
        }
        out.push_str(",median,p90\n");
        for (k, n) in self.checkpoints.iter().enumerate() {
            out.push_str(&n.to_string());
            for r in &self.per_replicate {
                out.push_str(&format!(",{:e}", r[k]));
            }
            out.push_str(&format!(",{:e},{:e}\n", self.median[k], self.p90[k]));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "decay_ratio = {:.6}\ndecayed = {}\nnegative_control = {}\nexpectation_met = {}\ntracked = {}\n",
            self.decay_ratio,
            self.decayed,
            self.negative_control,
            self.expectation_met(),
            self.tracked
        );
        for n in &self.plan_notes {
            s.push_str(&format!("plan = {n}\n"));
        }
        s
    }
}

fn geometric_grid(top: u64, ratio: f64, extra: &[u64]) -> Vec<u64> {
    let mut v: Vec<u64> = extra.to_vec();
    let mut x = 1.0f64;
    while x.round() as u64 <= top {
        v.push(x.round() as u64);
        x *= ratio;
    }
    v.push(top);
    v.sort_unstable();
    v.dedup();
    v
}

pub fn run_slln(exp: &SllnExperiment, stream: &Stream, threads: &ThreadBudget) -> Result<TailSupSeries> {
    let d = exp.dim;
    let cps = &exp.checkpoints;
    if d == 0 || cps.is_empty() || cps[0] == 0 || cps.windows(2).any(|w| w[1] <= w[0]) {
        return arg("checkpoints must be positive and strictly increasing");
    }
    if exp.replicates == 0 {
        return arg("need at least one replicate");
    }
    if !(exp.subgrid_ratio > 1.0) || !(exp.decay_factor >= 1.0) {
        return arg("subgrid ratio must exceed 1 and the decay factor must be at least 1");
    }
    let nphi = match exp.geometry {
        SllnGeometry::Rect => d,
        SllnGeometry::Sphere(_) => 1,
    };
    if exp.phis.len() != nphi {
        return arg(format!("expected {nphi} normalizers, got {}", exp.phis.len()));
    }
    let top = *cps.last().expect("nonempty");

    let mut plan_notes = Vec::new();
    if let Some(tm) = exp.theorem_mode {
        for phi in &exp.phis {
            let x_max = (tm.a as f64) * top as f64;
            let verdict = doubling_bounds(phi, 1.0, x_max).and_then(|b| BasePlan::with_base(tm.a, tm.p, b.c_low));
            match (verdict, tm.check) {
                (Ok(plan), _) => plan_notes.push(format!("{phi}: admissible, c = {:.6}", plan.constants.c)),
                (Err(e), PlanCheck::Enforce) => {
                    return Err(match e {
                        Error::Inadmissible(m) => Error::Inadmissible(format!("{phi}: {m}")),
                        other => other,
                    })
                }
                (Err(e), PlanCheck::Report) => plan_notes.push(format!("{phi}: {e}")),
            }
        }
    }

    // tracked indices with their |n|, sorted by |n| descending
    let mut tracked: Vec<(u64, Vec<u64>)> = Vec::new();
    match exp.geometry {
        SllnGeometry::Rect => {
            let grid = geometric_grid(top, exp.subgrid_ratio, cps);
            let idx = vec![grid.len() as u64 - 1; d];
            for_each_in_box(&vec![0; d], &idx, |k| {
                let n: Vec<u64> = k.iter().map(|&i| grid[i as usize]).collect();
                let norm = *n.iter().max().expect("d >= 1");
                if norm >= cps[0] {
                    tracked.push((norm, n));
                }
            });
        }
        SllnGeometry::Sphere(_) => {
            for r in cps[0]..=top {
                tracked.push((r, vec![r]));
            }
        }
    }
    tracked.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
    let norms: Vec<f64> = tracked
        .iter()
        .map(|(_, n)| n.iter().zip(&exp.phis).map(|(&x, phi)| phi.eval(x as f64)).product())
        .collect();

    let sampler = exp.generator.sampler(&vec![top; d])?;
    let per_replicate = threads.map(exp.replicates, |i| -> Result<Vec<f64>> {
        let field = sampler.sample(&stream.replicate(i))?;
        let values: Vec<f64> = match exp.geometry {
            SllnGeometry::Rect => {
                let table = PrefixSumTable::new(&field);
                let zero = vec![0; d];
                tracked
                    .iter()
                    .map(|(_, n)| table.rect_sum(&zero, n))
                    .collect::<Result<_>>()?
            }
            SllnGeometry::Sphere(norm) => {
                let table = ShellTable::new(&field, norm, top)?;
                tracked.iter().map(|(_, n)| table.annulus_sum(0, n[0])).collect::<Result<_>>()?
            }
        };
        // running max from the largest |n| down, read off at each checkpoint
        let mut out = vec![0.0; cps.len()];
        let mut best = 0.0f64;
        let mut k = cps.len();
        for (j, (norm, _)) in tracked.iter().enumerate() {
            while k > 0 && *norm < cps[k - 1] {
                k -= 1;
                out[k] = best;
            }
            best = best.max((values[j] / norms[j]).abs());
        }
        while k > 0 {
            k -= 1;
            out[k] = best;
        }
        Ok(out)
    });
    let per_replicate = per_replicate.into_iter().collect::<Result<Vec<_>>>()?;

    let column = |k: usize| sorted(&per_replicate.iter().map(|r| r[k]).collect::<Vec<_>>());
    let median: Vec<f64> = (0..cps.len()).map(|k| quantile_sorted(&column(k), 0.5)).collect();
    let p90: Vec<f64> = (0..cps.len()).map(|k| quantile_sorted(&column(k), 0.9)).collect();
    let (first, last) = (median[0], *median.last().expect("nonempty"));
    let decay_ratio = if first > 0.0 { last / first } else { 0.0 };
    let decayed = last <= first / exp.decay_factor;
    Ok(TailSupSeries {
        checkpoints: cps.clone(),
        per_replicate,
        median,
        p90,
        decay_ratio,
        decayed,
        negative_control: exp.negative_control,
        tracked: tracked.len(),
        plan_notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{CovarianceModel, IidLaw, StableParams};

    fn iid() -> GeneratorSpec {
        GeneratorSpec::Model(CovarianceModel::Iid(IidLaw::Stable(StableParams::standard(1.5).unwrap())))
    }

    #[test]
    fn zero_field() {
        let e = SllnExperiment::new(GeneratorSpec::Zero, SllnGeometry::Rect, 2, vec![ScalingFunction::power(1.0); 2], vec![4, 16, 64], 3);
        let t = run_slln(&e, &Stream::new(1, "z"), &ThreadBudget::sequential()).unwrap();
        assert!(t.per_replicate.iter().flatten().all(|&v| v == 0.0));
        assert!(t.expectation_met());
    }

    #[test]
    fn tail_sup_is_nonincreasing() {
        let e = SllnExperiment::new(iid(), SllnGeometry::Rect, 2, vec![ScalingFunction::power(0.9); 2], vec![2, 4, 8, 16, 32, 64], 8);
        let t = run_slln(&e, &Stream::new(2, "m"), &ThreadBudget::sequential()).unwrap();
        for r in &t.per_replicate {
            assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
        }
        let s = SllnExperiment::new(iid(), SllnGeometry::Sphere(Norm::L2), 2, vec![ScalingFunction::power(1.5)], vec![2, 8, 32], 4);
        let t = run_slln(&s, &Stream::new(2, "s"), &ThreadBudget::sequential()).unwrap();
        for r in &t.per_replicate {
            assert!(r.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(t.decayed);
    }

    #[test]
    fn under_normalization_does_not_decay() {
        let mut e = SllnExperiment::new(iid(), SllnGeometry::Rect, 1, vec![ScalingFunction::power(1.0 / 3.0)], vec![16, 64, 256, 1024], 16);
        e.negative_control = true;
        let t = run_slln(&e, &Stream::new(3, "n"), &ThreadBudget::sequential()).unwrap();
        assert!(!t.decayed);
        assert!(t.expectation_met());
    }

    #[test]
    fn theorem_mode_guard_is_total() {
        let mut e = SllnExperiment::new(iid(), SllnGeometry::Rect, 1, vec![ScalingFunction::power_log(1.0 / 1.5, 1.0 / 1.5 + 0.5)], vec![4, 8], 2);
        e.theorem_mode = Some(TheoremMode {
            check: PlanCheck::Enforce,
            a: 2,
            p: 1.0,
        });
        let err = run_slln(&e, &Stream::new(1, "t"), &ThreadBudget::sequential()).unwrap_err();
        assert!(matches!(err, Error::Inadmissible(_)), "{err}");
        assert!(err.to_string().contains("is not >"));
        e.theorem_mode.as_mut().unwrap().check = PlanCheck::Report;
        let t = run_slln(&e, &Stream::new(1, "t"), &ThreadBudget::sequential()).unwrap();
        assert_eq!(t.plan_notes.len(), 1);
    }
}
