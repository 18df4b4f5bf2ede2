//! Discretized LFSS increments.
//!
//! Along each axis the stable measure is carried by a list of cells:
//!
//! * fine cells of width `h` covering `[−F, N)` (with `F` the near zone),
//! * unit cells covering `[−U, −F)`,
//! * geometrically growing far blocks covering `[−L, −U)`.
//!
//! Unit masses inside `[−F, N)` are sums of the fine masses, so all three
//! zones read one coherent random measure. Each zone contributes cell
//! averages of the increment kernel, computed from its antiderivative.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::kernel::{ConvMethod, IncrementKernel, LfssConfig};
use super::sampler::standard_sas;
use crate::error::{Error, Result};
use crate::lattice::{FieldMeta, GeneratorId, LatticeField, PrefixSumTable};
use crate::parallel::ThreadBudget;
use crate::quad::QuadSpec;
use crate::rng::Stream;

const FAR_RATIO: f64 = 1.125;
const INITIAL_TRUNCATION: f64 = 1024.0;
const TRUNCATION_GROWTH: f64 = 4.0;
/// Above this many multiply-adds per line the mid zone goes through the FFT.
const AUTO_FFT_WORK: usize = 1 << 16;
/// Default memory budget for one simulated field, in bytes.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

/// Truncation length and the α-mass it discards, relative to the full
/// increment-kernel mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub length: f64,
    pub discarded: f64,
    pub kernel_mass: f64,
}

/// Picks `L`: the configured one (checked against `δ`), or the first of
/// `1024·4^k` whose discarded mass is at most `δ`.
pub fn resolve_truncation(cfg: &LfssConfig, axis: usize) -> Result<Truncation> {
    let kernel = IncrementKernel { e: cfg.exponent(axis) };
    let mass = super::kernel::kernel_alpha_mass(cfg.hurst[axis], cfg.alpha, QuadSpec::default())?;
    if kernel.e == 0.0 {
        return Ok(Truncation {
            length: cfg.truncation.unwrap_or(1.0),
            discarded: 0.0,
            kernel_mass: mass,
        });
    }
    let rel = |l: f64| -> Result<f64> { Ok(kernel.tail_mass(l, cfg.alpha)? / mass) };
    if let Some(l) = cfg.truncation {
        let discarded = rel(l)?;
        if discarded > cfg.delta {
            return Err(Error::Truncation {
                discarded,
                limit: cfg.delta,
                length: l,
            });
        }
        return Ok(Truncation {
            length: l,
            discarded,
            kernel_mass: mass,
        });
    }
    let mut l = INITIAL_TRUNCATION;
    loop {
        let discarded = rel(l)?;
        if discarded <= cfg.delta {
            return Ok(Truncation {
                length: l,
                discarded,
                kernel_mass: mass,
            });
        }
        if l * TRUNCATION_GROWTH > cfg.truncation_max {
            return Err(Error::Truncation {
                discarded,
                limit: cfg.delta,
                length: l,
            });
        }
        l *= TRUNCATION_GROWTH;
    }
}

/// Cell-averaged increment kernel for one axis.
///
/// `fine[k']` averages `ψ` over `[−1 + k'h, −1 + (k'+1)h)` for the near
/// zone `x ∈ [−1, F)`; `unit[i]` averages it over `[F+i, F+i+1)`; `far_edges`
/// are the block edges `D_b` in distance behind the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementWeights {
    pub kernel: IncrementKernel,
    pub alpha: f64,
    pub cells_per_unit: usize,
    pub near_units: usize,
    pub fine: Vec<f64>,
    pub unit: Vec<f64>,
    pub far_edges: Vec<f64>,
    pub truncation: Truncation,
}

impl IncrementWeights {
    /// Weights for `axis` with `mid_units` unit coefficients before the far
    /// blocks start (at distance `near_units + mid_units`).
    pub fn new(cfg: &LfssConfig, axis: usize, mid_units: usize) -> Result<Self> {
        let kernel = IncrementKernel { e: cfg.exponent(axis) };
        let r = cfg.cells_per_unit();
        let f = cfg.near_units as usize;
        let h = 1.0 / r as f64;
        let truncation = resolve_truncation(cfg, axis)?;
        let fine = (0..(f + 1) * r)
            .map(|k| kernel.cell_average(-1.0 + k as f64 * h, -1.0 + (k + 1) as f64 * h))
            .collect();
        let unit = if kernel.e == 0.0 {
            vec![0.0; mid_units]
        } else {
            (0..mid_units)
                .map(|i| kernel.cell_average((f + i) as f64, (f + i + 1) as f64))
                .collect()
        };
        let start = (f + mid_units) as f64;
        let mut far_edges = vec![start];
        if kernel.e != 0.0 {
            let mut d = start;
            while d < truncation.length {
                d = (d * FAR_RATIO).max(d + 1.0).min(truncation.length);
                far_edges.push(d);
            }
        }
        Ok(Self {
            kernel,
            alpha: cfg.alpha,
            cells_per_unit: r,
            near_units: f,
            fine,
            unit,
            far_edges,
            truncation,
        })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    /// Coefficient of the unit cell `[−k−1, −k)` for the site at the origin,
    /// i.e. the average of `ψ` over `[k, k+1)`.
    pub fn unit_coefficient(&self, k: usize) -> f64 {
        self.kernel.cell_average(k as f64, (k + 1) as f64)
    }

    /// Far-block weight for the site whose increment spans `[q, q+1]`.
    pub fn far_weight(&self, q: usize, b: usize) -> f64 {
        let (d0, d1) = (self.far_edges[b], self.far_edges[b + 1]);
        self.kernel.cell_average(q as f64 + d0, q as f64 + d1)
    }

    pub fn far_blocks(&self) -> usize {
        self.far_edges.len() - 1
    }

    /// `Σ |c|^α · (cell length)` over all zones for one site, which should
    /// approach the kernel's α-mass as `h → 0` and `L → ∞`.
    pub fn alpha_norm(&self) -> f64 {
        let a = self.alpha;
        let h = self.step();
        let near: f64 = self.fine.iter().map(|c| c.abs().powf(a) * h).sum();
        let mid: f64 = self.unit.iter().map(|c| c.abs().powf(a)).sum();
        let far: f64 = (0..self.far_blocks())
            .map(|b| self.far_weight(0, b).abs().powf(a) * (self.far_edges[b + 1] - self.far_edges[b]))
            .sum();
        near + mid + far
    }
}

/// Per-axis weights with the default mid zone of 1024 units.
pub fn increment_weights(cfg: &LfssConfig) -> Result<Vec<IncrementWeights>> {
    (0..cfg.dim()).map(|j| IncrementWeights::new(cfg, j, 1024)).collect()
}

/// The linear map from standard noise on one axis' cell list to the `n`
/// increments of that axis. Cell scales `(length)^{1/α}` are folded in.
pub struct AxisOperator {
    n: usize,
    r: usize,
    f: usize,
    /// Units in `[−U, −F)`.
    u_pure: usize,
    weights: IncrementWeights,
    fine_scale: f64,
    /// `n × B` far weights times block scales.
    far: Vec<f64>,
    mid: MidConv,
}

enum MidConv {
    None,
    Direct,
    Fft {
        size: usize,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        kernel: Vec<Complex64>,
    },
}

impl std::fmt::Debug for AxisOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisOperator")
            .field("n", &self.n)
            .field("cells", &self.cells())
            .field("truncation", &self.weights.truncation)
            .finish()
    }
}

impl AxisOperator {
    pub fn new(cfg: &LfssConfig, axis: usize, n: usize) -> Result<Self> {
        Self::with_method(cfg, axis, n, cfg.conv)
    }

    pub fn with_method(cfg: &LfssConfig, axis: usize, n: usize, method: ConvMethod) -> Result<Self> {
        if n == 0 {
            return crate::error::arg("axis length must be positive");
        }
        let f = cfg.near_units as usize;
        let r = cfg.cells_per_unit();
        let e = cfg.exponent(axis);
        // Pure unit cells reach back to U = 2n + 256, or to L if that is shorter.
        let trunc = resolve_truncation(cfg, axis)?;
        let u_total = if e == 0.0 {
            f
        } else {
            (2 * n + 256).min(trunc.length.floor() as usize).max(f)
        };
        let u_pure = u_total - f;
        // Mid coefficients a(i), i < V with V = n − 1 − F + U.
        let v_len = (n + u_total).saturating_sub(1 + f);
        let weights = IncrementWeights::new(cfg, axis, v_len.max(1))?;
        let weights = IncrementWeights {
            far_edges: rebase_far(&weights, u_total as f64),
            ..weights
        };
        let alpha = cfg.alpha;
        let fine_scale = (1.0 / r as f64).powf(1.0 / alpha);
        let b = weights.far_blocks();
        let mut far = vec![0.0; n * b];
        for q in 0..n {
            for bi in 0..b {
                let len = weights.far_edges[bi + 1] - weights.far_edges[bi];
                far[q * b + bi] = weights.far_weight(q, bi) * len.powf(1.0 / alpha);
            }
        }
        let mid = if e == 0.0 || v_len == 0 {
            MidConv::None
        } else {
            let fft = match method {
                ConvMethod::Direct => false,
                ConvMethod::Fft => true,
                ConvMethod::Auto => n * v_len > AUTO_FFT_WORK,
            };
            if fft {
                let size = (v_len + n).next_power_of_two();
                let mut planner = FftPlanner::<f64>::new();
                let forward = planner.plan_fft_forward(size);
                let inverse = planner.plan_fft_inverse(size);
                let mut kernel: Vec<Complex64> = (0..size)
                    .map(|i| Complex64::new(if i < v_len { weights.unit[i] } else { 0.0 }, 0.0))
                    .collect();
                forward.process(&mut kernel);
                MidConv::Fft {
                    size,
                    forward,
                    inverse,
                    kernel,
                }
            } else {
                MidConv::Direct
            }
        };
        Ok(Self {
            n,
            r,
            f,
            u_pure,
            weights,
            fine_scale,
            far,
            mid,
        })
    }

    pub fn outputs(&self) -> usize {
        self.n
    }

    fn fine_cells(&self) -> usize {
        (self.f + self.n) * self.r
    }

    /// Length of the noise vector this operator consumes.
    pub fn cells(&self) -> usize {
        self.fine_cells() + self.u_pure + self.weights.far_blocks()
    }

    pub fn weights(&self) -> &IncrementWeights {
        &self.weights
    }

    pub fn truncation(&self) -> Truncation {
        self.weights.truncation
    }

    /// Applies the operator to one noise line of length [`Self::cells`].
    pub fn apply(&self, noise: &[f64], out: &mut [f64]) {
        debug_assert_eq!(noise.len(), self.cells());
        debug_assert_eq!(out.len(), self.n);
        let (n, r, f) = (self.n, self.r, self.f);
        let nf = self.fine_cells();
        let fine = &noise[..nf];
        let near = &self.weights.fine;
        for q in 0..n {
            // Site n = q+1 reads fine cells j = nR−1−k', stored at j + FR.
            let top = (q + 1 + f) * r - 1;
            let mut acc = 0.0;
            for (k, &c) in near.iter().enumerate() {
                acc += c * fine[top - k];
            }
            out[q] = acc * self.fine_scale;
        }

        if !matches!(self.mid, MidConv::None) {
            let u_total = self.u_pure + f;
            let v_len = (n + u_total) - 1 - f;
            let g = u_total - f - 1;
            let mut m = Vec::with_capacity(v_len);
            m.extend_from_slice(&noise[nf..nf + self.u_pure]);
            for v in self.u_pure..v_len {
                // unit u = v − U ≥ −F, fine cells j ∈ [uR, uR+R) at index j + FR
                let start = (v - self.u_pure) * r;
                let s: f64 = fine[start..start + r].iter().sum();
                m.push(s * self.fine_scale);
            }
            match &self.mid {
                MidConv::Direct => {
                    let a = &self.weights.unit;
                    for q in 0..n {
                        let t = q + g;
                        let mut acc = 0.0;
                        for i in 0..=t.min(v_len - 1) {
                            acc += a[i] * m[t - i];
                        }
                        out[q] += acc;
                    }
                }
                MidConv::Fft {
                    size,
                    forward,
                    inverse,
                    kernel,
                } => {
                    let mut buf: Vec<Complex64> = (0..*size)
                        .map(|i| Complex64::new(if i < v_len { m[i] } else { 0.0 }, 0.0))
                        .collect();
                    forward.process(&mut buf);
                    for (x, k) in buf.iter_mut().zip(kernel) {
                        *x *= k;
                    }
                    inverse.process(&mut buf);
                    let scale = 1.0 / *size as f64;
                    for q in 0..n {
                        out[q] += buf[q + g].re * scale;
                    }
                }
                MidConv::None => unreachable!(),
            }
        }

        let b = self.weights.far_blocks();
        if b > 0 {
            let far_noise = &noise[nf + self.u_pure..];
            for q in 0..n {
                let row = &self.far[q * b..(q + 1) * b];
                out[q] += row.iter().zip(far_noise).map(|(w, z)| w * z).sum::<f64>();
            }
        }
    }
}

fn rebase_far(w: &IncrementWeights, start: f64) -> Vec<f64> {
    let mut edges = vec![start];
    if w.kernel.e != 0.0 {
        let l = w.truncation.length;
        let mut d = start;
        while d < l {
            d = (d * FAR_RATIO).max(d + 1.0).min(l);
            edges.push(d);
        }
    }
    edges
}

/// Reusable simulator for one configuration and one output shape.
#[derive(Debug)]
pub struct LfssSimulator {
    cfg: LfssConfig,
    shape: Vec<usize>,
    ops: Vec<AxisOperator>,
    /// Axis-0 cells per independently seeded chunk.
    chunk: usize,
}

impl LfssSimulator {
    pub fn new(cfg: &LfssConfig, shape: &[usize]) -> Result<Self> {
        Self::with_budget(cfg, shape, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(cfg: &LfssConfig, shape: &[usize], memory_budget: u64) -> Result<Self> {
        if shape.len() != cfg.dim() {
            return Err(Error::Dimension {
                expected: cfg.dim(),
                got: shape.len(),
            });
        }
        let ops = shape
            .iter()
            .enumerate()
            .map(|(j, &n)| AxisOperator::new(cfg, j, n))
            .collect::<Result<Vec<_>>>()?;
        let required = memory_required(&ops);
        if required > memory_budget {
            return Err(Error::Memory {
                required,
                allowed: memory_budget,
            });
        }
        let slab: usize = ops[1..].iter().map(|o| o.cells()).product();
        Ok(Self {
            cfg: cfg.clone(),
            shape: shape.to_vec(),
            ops,
            chunk: (4096 / slab.max(1)).max(1),
        })
    }

    pub fn config(&self) -> &LfssConfig {
        &self.cfg
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn operators(&self) -> &[AxisOperator] {
        &self.ops
    }

    /// Increments `ξ(n)` for `n ∈ [1, shape]`, stored with offset `⟨1⟩`.
    pub fn simulate(&self, stream: &Stream, threads: &ThreadBudget) -> Result<LatticeField> {
        let d = self.shape.len();
        let c0 = self.ops[0].cells();
        let rest_out: usize = self.shape[1..].iter().product();
        let slab_cells: Vec<usize> = self.ops[1..].iter().map(|o| o.cells()).collect();
        let slab_len: usize = slab_cells.iter().product();
        let chunks = c0.div_ceil(self.chunk);

        // Reduced slabs, row c of `cols` holds the slab at axis-0 cell c.
        let parts = threads.map(chunks, |ci| {
            let mut rng = stream.child(format!("chunk-{ci}")).rng();
            let lo = ci * self.chunk;
            let hi = (lo + self.chunk).min(c0);
            let mut out = Vec::with_capacity((hi - lo) * rest_out);
            let mut noise = vec![0.0; slab_len];
            for _ in lo..hi {
                for z in noise.iter_mut() {
                    *z = standard_sas(self.cfg.alpha, &mut rng);
                }
                let (reduced, _) = reduce_axes(&noise, &slab_cells, &self.ops[1..]);
                out.extend_from_slice(&reduced);
            }
            out
        });
        let mut cols = Vec::with_capacity(c0 * rest_out);
        for p in parts {
            cols.extend(p);
        }

        // Axis 0 last: each of the `rest_out` columns is one noise line.
        let n0 = self.shape[0];
        let mut values = vec![0.0; n0 * rest_out];
        let mut line = vec![0.0; c0];
        let mut res = vec![0.0; n0];
        for col in 0..rest_out {
            for c in 0..c0 {
                line[c] = cols[c * rest_out + col];
            }
            self.ops[0].apply(&line, &mut res);
            for q in 0..n0 {
                values[q * rest_out + col] = res[q] * self.cfg.kappa;
            }
        }
        LatticeField::new(
            self.shape.clone(),
            vec![1; d],
            values,
            FieldMeta {
                generator: GeneratorId::LfssIncrements,
                seed: stream.seed(),
            },
        )
    }
}

fn memory_required(ops: &[AxisOperator]) -> u64 {
    let c0 = ops[0].cells() as u64;
    let rest_out: u64 = ops[1..].iter().map(|o| o.outputs() as u64).product();
    let slab: u64 = ops[1..].iter().map(|o| o.cells() as u64).product();
    let out: u64 = ops.iter().map(|o| o.outputs() as u64).product();
    8 * (c0 * rest_out + 2 * slab + out + c0)
}

/// Applies `ops[j]` along axis `j` of a row-major array, last axis first.
fn reduce_axes(data: &[f64], shape: &[usize], ops: &[AxisOperator]) -> (Vec<f64>, Vec<usize>) {
    let mut cur = data.to_vec();
    let mut shape = shape.to_vec();
    for axis in (0..shape.len()).rev() {
        let op = &ops[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let m = op.outputs();
        let mut next = vec![0.0; outer * m * inner];
        let mut line = vec![0.0; len];
        let mut res = vec![0.0; m];
        for o in 0..outer {
            for i in 0..inner {
                for k in 0..len {
                    line[k] = cur[(o * len + k) * inner + i];
                }
                op.apply(&line, &mut res);
                for k in 0..m {
                    next[(o * m + k) * inner + i] = res[k];
                }
            }
        }
        cur = next;
        shape[axis] = m;
    }
    (cur, shape)
}

/// One increment field on `[1, shape]` with the default memory budget.
pub fn simulate_increment_field(cfg: &LfssConfig, shape: &[usize], stream: &Stream) -> Result<LatticeField> {
    LfssSimulator::new(cfg, shape)?.simulate(stream, &ThreadBudget::sequential())
}

/// The sheet `Z(n) = S(0; n)` on `[0, shape]^d`, zero whenever some `n_j = 0`.
pub fn sheet_from_increments(field: &LatticeField) -> Result<LatticeField> {
    let table = PrefixSumTable::new(field);
    let ext: Vec<usize> = field.shape().iter().map(|s| s + 1).collect();
    let d = ext.len();
    let meta = FieldMeta {
        generator: GeneratorId::LfssSheet,
        seed: field.meta().seed,
    };
    LatticeField::from_fn(&ext, meta, |n| {
        if n.contains(&0) {
            return 0.0;
        }
        let hi: Vec<usize> = n.iter().map(|&x| x as usize).collect();
        table.box_sum_relative(&vec![0; d], &hi)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{rect_partial_sum, MultiIndex};
    use crate::stats::{ecf_real, mean_se};

    fn cfg(h: &[f64], alpha: f64) -> LfssConfig {
        LfssConfig::new(h.to_vec(), alpha).unwrap()
    }

    #[test]
    fn indicator_kernel_gives_unit_cells() {
        let c = cfg(&[1.0 / 1.5], 1.5);
        let w = &increment_weights(&c).unwrap()[0];
        let r = w.cells_per_unit;
        for (k, &v) in w.fine.iter().enumerate() {
            assert!((v - if k < r { 1.0 } else { 0.0 }).abs() < 1e-12, "k={k} v={v}");
        }
        assert!(w.unit.iter().all(|&v| v == 0.0));
        assert_eq!(w.far_blocks(), 0);
    }

    #[test]
    fn tail_coefficients_decay_as_power() {
        let c = cfg(&[0.8], 1.5);
        let w = &increment_weights(&c).unwrap()[0];
        let e = c.exponent(0);
        let ratio = w.unit_coefficient(128) / w.unit_coefficient(64);
        let want = 2f64.powf(e - 1.0);
        assert!((ratio / want - 1.0).abs() < 0.01, "{ratio} vs {want}");
    }

    #[test]
    fn discrete_alpha_norm_matches_quadrature() {
        for h in [0.6, 0.75, 0.8] {
            let c = cfg(&[h], 1.5);
            let w = &increment_weights(&c).unwrap()[0];
            let want = w.truncation.kernel_mass * (1.0 - w.truncation.discarded);
            let got = w.alpha_norm();
            assert!((got / want - 1.0).abs() < 0.01, "H={h}: {got} vs {want}");
        }
    }

    #[test]
    fn fixed_truncation_too_short_is_refused() {
        let c = cfg(&[0.8], 1.5).with_truncation(Some(100.0)).unwrap();
        let e = resolve_truncation(&c, 0).unwrap_err();
        assert!(matches!(e, Error::Truncation { .. }));
        assert!(e.to_string().contains("raise the truncation length"));
    }

    #[test]
    fn fft_and_direct_agree() {
        let c = cfg(&[0.8], 1.5);
        let n = 1024;
        let direct = AxisOperator::with_method(&c, 0, n, ConvMethod::Direct).unwrap();
        let fft = AxisOperator::with_method(&c, 0, n, ConvMethod::Fft).unwrap();
        assert_eq!(direct.cells(), fft.cells());
        let mut rng = Stream::new(3, "fft-line").rng();
        let noise: Vec<f64> = (0..direct.cells()).map(|_| standard_sas(1.5, &mut rng)).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        direct.apply(&noise, &mut a);
        fft.apply(&noise, &mut b);
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn operator_matches_dense_kernel_sum() {
        // Brute force over the cell list with the kernel averages written out.
        let c = cfg(&[0.75], 1.4).with_near_units(2).unwrap().with_step(0.25).unwrap();
        let n = 5;
        let op = AxisOperator::with_method(&c, 0, n, ConvMethod::Direct).unwrap();
        let k = IncrementKernel { e: c.exponent(0) };
        let mut rng = Stream::new(9, "dense").rng();
        let noise: Vec<f64> = (0..op.cells()).map(|_| standard_sas(1.4, &mut rng)).collect();
        let mut got = vec![0.0; n];
        op.apply(&noise, &mut got);
        let (r, f) = (4usize, 2i64);
        let h: f64 = 0.25;
        let u = (op.u_pure as i64) + f;
        let nf = (f as usize + n) * r;
        let sc = h.powf(1.0 / 1.4);
        for q in 0..n {
            let site = q as f64; // increment over [q, q+1]
            let mut want = 0.0;
            for (idx, z) in noise[..nf].iter().enumerate() {
                let j = idx as i64 - f * r as i64;
                let s0 = j as f64 * h;
                let x1 = site - s0;
                let x0 = x1 - h;
                if x0 >= f as f64 {
                    // mid zone: whole unit floor(s0) through its unit average
                    let unit = (s0).floor();
                    let xa = site - unit - 1.0;
                    want += k.cell_average(xa, xa + 1.0) * z * sc;
                } else {
                    want += k.cell_average(x0, x1) * z * sc;
                }
            }
            for v in 0..op.u_pure {
                let unit = (v as i64 - u) as f64;
                let xa = site - unit - 1.0;
                want += k.cell_average(xa, xa + 1.0) * noise[nf + v];
            }
            for b in 0..op.weights.far_blocks() {
                let len = op.weights.far_edges[b + 1] - op.weights.far_edges[b];
                want += op.weights.far_weight(q, b) * len.powf(1.0 / 1.4) * noise[nf + op.u_pure + b];
            }
            assert!((got[q] - want).abs() < 1e-10 * (1.0 + want.abs()), "q={q}: {} vs {want}", got[q]);
        }
    }

    #[test]
    fn independent_case_factorizes() {
        // H = 1/α: unit-scale i.i.d. SαS, so the ECF of a sum of two sites
        // is the product of the single-site ECFs.
        let c = cfg(&[1.0 / 1.5], 1.5);
        let sim = LfssSimulator::new(&c, &[4]).unwrap();
        let reps = 20_000;
        let base = Stream::new(21, "iid-lfss");
        let (mut x0, mut x3, mut sum) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..reps {
            let f = sim.simulate(&base.replicate(i), &ThreadBudget::sequential()).unwrap();
            let v = f.values();
            x0.push(v[0]);
            x3.push(v[3]);
            sum.push(v[0] + v[3]);
        }
        for theta in [0.5, 1.0] {
            let target = (-(theta as f64).powf(1.5)).exp();
            assert!((ecf_real(&x0, theta) - target).abs() < 0.03);
            let prod = ecf_real(&x0, theta) * ecf_real(&x3, theta);
            assert!((ecf_real(&sum, theta) - prod).abs() < 0.03);
        }
    }

    #[test]
    fn unit_scale_at_one() {
        // E|X|^p for SαS of scale 1 with p = 1/2 has a closed form; check
        // the increment at one site by Monte Carlo.
        let c = cfg(&[0.8], 1.5);
        let sim = LfssSimulator::new(&c, &[1]).unwrap();
        let base = Stream::new(4, "unit-scale");
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps)
            .map(|i| sim.simulate(&base.replicate(i), &ThreadBudget::sequential()).unwrap().values()[0].abs().sqrt())
            .collect();
        let mut rng = Stream::new(4, "reference").rng();
        let ys: Vec<f64> = (0..reps).map(|_| standard_sas(1.5, &mut rng).abs().sqrt()).collect();
        let (a, b) = (mean_se(&xs), mean_se(&ys));
        assert!((a.mean - b.mean).abs() < 4.0 * (a.se.hypot(b.se)), "{a:?} vs {b:?}");
    }

    #[test]
    fn deterministic_across_threads() {
        let c = cfg(&[0.8, 0.7], 1.5);
        let sim = LfssSimulator::new(&c, &[6, 5]).unwrap();
        let s = Stream::new(77, "det");
        let a = sim.simulate(&s, &ThreadBudget::sequential()).unwrap();
        let b = sim.simulate(&s, &ThreadBudget::new(4)).unwrap();
        assert_eq!(a.values(), b.values());
        let other = sim.simulate(&Stream::new(78, "det"), &ThreadBudget::sequential()).unwrap();
        assert_ne!(a.values(), other.values());
    }

    #[test]
    fn sheet_vanishes_on_axes_and_sums_increments() {
        let c = cfg(&[0.8, 0.75], 1.5);
        let inc = simulate_increment_field(&c, &[8, 8], &Stream::new(5, "sheet")).unwrap();
        let sheet = sheet_from_increments(&inc).unwrap();
        assert_eq!(sheet.shape(), &[9, 9]);
        for i in 0..9u64 {
            assert_eq!(sheet.value_at(&[0, i]).unwrap(), 0.0);
            assert_eq!(sheet.value_at(&[i, 0]).unwrap(), 0.0);
        }
        for a in 1..=8u64 {
            for b in 1..=8u64 {
                let mut direct = 0.0;
                for i in 0..a as usize {
                    for j in 0..b as usize {
                        direct += inc.values()[i * 8 + j];
                    }
                }
                let z = sheet.value_at(&[a, b]).unwrap();
                assert!((z - direct).abs() < 1e-12 * (1.0 + direct.abs()));
                assert!((z - rect_partial_sum(&inc, &MultiIndex::from(vec![0u64, 0]), &MultiIndex::from(vec![a, b])).unwrap()).abs() < 1e-12 * (1.0 + z.abs()));
            }
        }
        // rectangle increment by inclusion–exclusion
        let z = |a: u64, b: u64| sheet.value_at(&[a, b]).unwrap();
        let rect = z(7, 6) - z(3, 6) - z(7, 2) + z(3, 2);
        let direct: f64 = (3..7).flat_map(|i| (2..6).map(move |j| (i, j))).map(|(i, j)| inc.values()[i * 8 + j]).sum();
        assert!((rect - direct).abs() < 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn memory_budget_refusal() {
        let c = cfg(&[0.8, 0.8], 1.5);
        match LfssSimulator::with_budget(&c, &[64, 64], 1 << 10) {
            Err(Error::Memory { required, allowed }) => {
                assert!(required > allowed);
                assert_eq!(allowed, 1 << 10);
            }
            other => panic!("expected memory refusal, got {other:?}"),
        }
    }
}
