use super::function::ScalingFunction;
use crate::error::{arg, Error, Result};
use crate::lattice::{for_each_in_box, FieldMeta, LatticeField, PrefixSumTable};

/// Weights `w(n; k) = Π_j (φ_j(a^{k_j+1}) − φ_j(a^{k_j})) / φ_j(a^{n_j+1})`
/// for `k ≤ n`, zero otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzWeights {
    phis: Vec<ScalingFunction>,
    a: u64,
}

impl ToeplitzWeights {
    pub fn new(phis: Vec<ScalingFunction>, a: u64) -> Result<Self> {
        if phis.is_empty() {
            return arg("need one normalizer per dimension");
        }
        if a < 2 {
            return arg(format!("base must be >= 2, got {a}"));
        }
        Ok(Self { phis, a })
    }

    pub fn dim(&self) -> usize {
        self.phis.len()
    }

    pub fn base(&self) -> u64 {
        self.a
    }

    fn phi_at(&self, j: usize, e: u64) -> f64 {
        self.phis[j].eval((self.a as f64).powi(e as i32))
    }

    /// Numerator factor `φ_j(a^{k+1}) − φ_j(a^k)`.
    fn increment(&self, j: usize, k: u64) -> f64 {
        self.phi_at(j, k + 1) - self.phi_at(j, k)
    }

    pub fn weight(&self, n: &[u64], k: &[u64]) -> f64 {
        assert_eq!(n.len(), self.dim());
        assert_eq!(k.len(), self.dim());
        if k.iter().zip(n).any(|(a, b)| a > b) {
            return 0.0;
        }
        (0..self.dim())
            .map(|j| self.increment(j, k[j]) / self.phi_at(j, n[j] + 1))
            .product()
    }

    /// `Σ_k w(n; k)`, summed term by term.
    pub fn row_sum(&self, n: &[u64]) -> f64 {
        let mut s = 0.0;
        for_each_in_box(&vec![0; self.dim()], n, |k| s += self.weight(n, k));
        s
    }

    /// Closed form of the row sum by telescoping: `Π_j (1 − φ_j(1)/φ_j(a^{n_j+1}))`.
    pub fn row_sum_closed_form(&self, n: &[u64]) -> f64 {
        (0..self.dim())
            .map(|j| 1.0 - self.phi_at(j, 0) / self.phi_at(j, n[j] + 1))
            .product()
    }

    /// `t(m) = Σ_k w(m; k) s(k)` for every `m ∈ [0, n_max]^d`.
    ///
    /// `s` must be a field on exactly `[0, n_max]^d`. The weights factor as
    /// `u(k) / v(m)`, so each `t(m)` is one prefix-table query.
    pub fn transform(&self, s: &LatticeField) -> Result<ToeplitzTransform> {
        let d = self.dim();
        if s.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: s.dim(),
            });
        }
        if s.offset().iter().any(|&o| o != 0) || s.shape().windows(2).any(|w| w[0] != w[1]) {
            return arg("toeplitz input must be a cube [0, n_max]^d");
        }
        let side = s.shape()[0];
        let n_max = side as u64 - 1;
        let incs: Vec<Vec<f64>> = (0..d).map(|j| (0..=n_max).map(|k| self.increment(j, k)).collect()).collect();
        let denoms: Vec<Vec<f64>> = (0..d).map(|j| (0..=n_max).map(|m| self.phi_at(j, m + 1)).collect()).collect();

        let us = LatticeField::from_fn(s.shape(), FieldMeta::default(), |k| {
            let u: f64 = (0..d).map(|j| incs[j][k[j] as usize]).product();
            u * s.value_at(k).expect("same box")
        })?;
        let table = PrefixSumTable::new(&us);
        let t = LatticeField::from_fn(s.shape(), FieldMeta::default(), |m| {
            let hi: Vec<usize> = m.iter().map(|&x| x as usize + 1).collect();
            let v: f64 = (0..d).map(|j| denoms[j][m[j] as usize]).product();
            table.box_sum_relative(&vec![0; d], &hi) / v
        })?;

        // tail_sup[N] = max_{|m| >= N} |t(m)|, a suffix maximum over the ℓ∞ norm.
        let mut by_norm = vec![0.0f64; side];
        for_each_in_box(&vec![0; d], &vec![n_max; d], |m| {
            let r = *m.iter().max().expect("d >= 1") as usize;
            by_norm[r] = by_norm[r].max(t.value_at(m).expect("same box").abs());
        });
        let mut tail_sup = by_norm;
        for r in (0..side - 1).rev() {
            tail_sup[r] = tail_sup[r].max(tail_sup[r + 1]);
        }
        Ok(ToeplitzTransform { t, tail_sup })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzTransform {
    /// `t(m)` on `[0, n_max]^d`.
    pub t: LatticeField,
    /// `tail_sup[N] = max_{N ≤ |m| ≤ n_max} |t(m)|`.
    pub tail_sup: Vec<f64>,
}

impl ToeplitzTransform {
    /// Tail sups at `N = 1, 2, 4, …` while `N ≤ n_max`.
    pub fn doubling_tail(&self) -> Vec<(u64, f64)> {
        let mut out = Vec::new();
        let mut n = 1usize;
        while n < self.tail_sup.len() {
            out.push((n as u64, self.tail_sup[n]));
            n *= 2;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use rand::Rng;

    fn identity_weights() -> ToeplitzWeights {
        ToeplitzWeights::new(vec![ScalingFunction::power(1.0)], 2).unwrap()
    }

    #[test]
    fn geometric_reference_case() {
        let tw = identity_weights();
        for n in 0..30u64 {
            for k in 0..=n {
                let w = tw.weight(&[n], &[k]);
                assert!((w - 2f64.powi(k as i32 - n as i32 - 1)).abs() < 1e-15);
            }
            assert_eq!(tw.weight(&[n], &[n + 1]), 0.0);
            let want = 1.0 - 2f64.powi(-(n as i32) - 1);
            assert!((tw.row_sum(&[n]) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn row_sums_telescope_on_random_configs() {
        let mut rng = Stream::new(5, "toeplitz-configs").rng();
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
            let tw = ToeplitzWeights::new(phis, a).unwrap();
            let n: Vec<u64> = (0..d).map(|_| rng.random_range(0..6u64)).collect();
            let s = tw.row_sum(&n);
            let closed = tw.row_sum_closed_form(&n);
            assert!((s - closed).abs() <= 1e-12, "{s} vs {closed}");
            assert!(s <= 1.0 + 1e-12);
            for_each_in_box(&vec![0; d], &n, |k| assert!(tw.weight(&n, k) >= 0.0));
        }
    }

    #[test]
    fn transform_zero_and_constant_inputs() {
        let tw = ToeplitzWeights::new(vec![ScalingFunction::power(1.0); 2], 2).unwrap();
        let zero = LatticeField::zeros(&[8, 8]).unwrap();
        let r = tw.transform(&zero).unwrap();
        assert!(r.t.values().iter().all(|&v| v == 0.0));
        let one = LatticeField::from_fn(&[8, 8], FieldMeta::default(), |_| 1.0).unwrap();
        let r = tw.transform(&one).unwrap();
        assert!(r.t.values().iter().all(|&v| v <= 1.0));
        let direct = tw.row_sum(&[3, 5]);
        assert!((r.t.value_at(&[3, 5]).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn harmonic_input_decays() {
        let tw = identity_weights();
        let s = LatticeField::from_fn(&[41], FieldMeta::default(), |k| 1.0 / (k[0] + 1) as f64).unwrap();
        let r = tw.transform(&s).unwrap();
        let t = r.t.values();
        // t(0) = t(1) = 1/2, strictly decreasing from m = 1 on.
        assert!((t[0] - 0.5).abs() < 1e-15 && (t[1] - 0.5).abs() < 1e-15);
        assert!(t[1..].windows(2).all(|w| w[1] < w[0]));
        let tail = r.doubling_tail();
        assert!(tail.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(r.tail_sup.windows(2).all(|w| w[1] <= w[0]));
    }
}
