use super::field::LatticeField;
use super::index::{for_each_in_box, Norm};
use super::prefix::DoubleDouble;
use crate::error::{arg, Error, Result};

/// Sums of a field over the lattice shells `Q_r \ Q_{r-1}`, `r = 1..=r_max`.
///
/// Every point `k` belongs to the shell `R(k) = max(1, ⌈‖k‖⌉)`, so that
/// `Q_r = {k : R(k) ≤ r}` for integer `r`, including `Q_0 = ∅`. Spherical
/// sums over annuli are then contiguous ranges of shells.
#[derive(Debug, Clone)]
pub struct ShellTable {
    norm: Norm,
    /// `cum[r]` is the sum over `Q_r`; `cum[0] = 0`.
    cum: Vec<DoubleDouble>,
}

impl ShellTable {
    /// Requires the field box to contain the cube `[0, r_max]^d`.
    pub fn new(field: &LatticeField, norm: Norm, r_max: u64) -> Result<Self> {
        check_cube(field, r_max)?;
        let d = field.dim();
        let mut shells = vec![DoubleDouble::default(); r_max as usize + 1];
        if r_max > 0 {
            for_each_in_box(&vec![0; d], &vec![r_max; d], |k| {
                let r = norm.ceil_radius(k).max(1);
                if r <= r_max {
                    let v = field.value_at(k).expect("inside checked cube");
                    shells[r as usize] = shells[r as usize].add(DoubleDouble::from_f64(v));
                }
            });
        }
        let mut cum = Vec::with_capacity(shells.len());
        let mut acc = DoubleDouble::default();
        for (r, s) in shells.into_iter().enumerate() {
            if r > 0 {
                acc = acc.add(s);
            }
            cum.push(acc);
        }
        Ok(Self { norm, cum })
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn r_max(&self) -> u64 {
        self.cum.len() as u64 - 1
    }

    /// Sum over `Q_{m+n} \ Q_m`.
    pub fn annulus_sum(&self, m: u64, n: u64) -> Result<f64> {
        let outer = m.checked_add(n).filter(|&r| r <= self.r_max()).ok_or_else(|| Error::Range {
            axis: 0,
            value: m.saturating_add(n).min(i64::MAX as u64) as i64,
            lo: 0,
            hi: self.r_max() as i64,
        })?;
        Ok(self.cum[outer as usize].add(self.cum[m as usize].neg()).value())
    }

    /// `M(m; n) = max_{1 ≤ k ≤ n} |S(m; k)|`, together with `|S(m; n)|`.
    pub fn running_max(&self, m: u64, n: u64) -> Result<(f64, f64)> {
        if n < 1 {
            return arg("running maximum needs n >= 1");
        }
        self.annulus_sum(m, n)?;
        let base = self.cum[m as usize];
        let mut best = 0.0f64;
        let mut last = 0.0;
        for k in 1..=n {
            last = self.cum[(m + k) as usize].add(base.neg()).value().abs();
            best = best.max(last);
        }
        Ok((best, last))
    }
}

fn check_cube(field: &LatticeField, r: u64) -> Result<()> {
    for axis in 0..field.dim() {
        let lo = field.offset()[axis];
        let hi = lo + field.shape()[axis] as u64 - 1;
        let range = |value: u64| Error::Range {
            axis,
            value: value as i64,
            lo: lo as i64,
            hi: hi as i64,
        };
        if lo > 0 {
            return Err(range(0));
        }
        if r > hi {
            return Err(range(r));
        }
    }
    Ok(())
}

/// `S(m; n)` over the annulus `Q_{n+m} \ Q_m` in the given norm.
pub fn spherical_partial_sum(field: &LatticeField, m: u64, n: u64, norm: Norm) -> Result<f64> {
    let r = m.checked_add(n).ok_or_else(|| Error::Argument("radius overflow".into()))?;
    ShellTable::new(field, norm, r)?.annulus_sum(m, n)
}

/// `M(m; n) = max_{k=1..n} |S(m; k)|`.
pub fn spherical_running_max(field: &LatticeField, m: u64, n: u64, norm: Norm) -> Result<f64> {
    if n < 1 {
        return arg("running maximum needs n >= 1");
    }
    let r = m.checked_add(n).ok_or_else(|| Error::Argument("radius overflow".into()))?;
    Ok(ShellTable::new(field, norm, r)?.running_max(m, n)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::field::FieldMeta;
    use crate::lattice::index::{IndexDomain, MultiIndex};
    use crate::stats::KahanSum;

    fn annulus_brute(field: &LatticeField, m: u64, n: u64, norm: Norm) -> f64 {
        let dom = IndexDomain::Annulus {
            inner: m,
            width: n,
            norm,
            dim: field.dim(),
        };
        dom.enumerate()
            .iter()
            .map(|k: &MultiIndex| field.value_at(k.coords()).unwrap())
            .collect::<KahanSum>()
            .value()
    }

    fn ones(d: usize, side: usize) -> LatticeField {
        LatticeField::from_fn(&vec![side; d], FieldMeta::default(), |_| 1.0).unwrap()
    }

    #[test]
    fn ball_counts() {
        let f = ones(2, 8);
        assert_eq!(spherical_partial_sum(&f, 0, 2, Norm::L2).unwrap(), 6.0);
        assert_eq!(spherical_partial_sum(&f, 3, 0, Norm::L2).unwrap(), 0.0);
        assert_eq!(spherical_partial_sum(&f, 1, 1, Norm::Max).unwrap(), 5.0);
    }

    #[test]
    fn running_max_on_positive_field_is_ball_size() {
        let f = ones(2, 10);
        for n in 1..=8u64 {
            let count = IndexDomain::Ball {
                radius: n as f64,
                norm: Norm::L2,
                dim: 2,
            }
            .enumerate()
            .len() as f64;
            assert_eq!(spherical_running_max(&f, 0, n, Norm::L2).unwrap(), count);
        }
        assert!(spherical_running_max(&f, 0, 0, Norm::L2).is_err());
    }

    #[test]
    fn alternating_field_matches_brute() {
        for d in 1..=2usize {
            let f = LatticeField::from_fn(&vec![18; d], FieldMeta::default(), |k| {
                if k.iter().sum::<u64>() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .unwrap();
            for norm in [Norm::L2, Norm::Max] {
                for m in 0..=8u64 {
                    for n in 1..=8u64 {
                        let want = (1..=n)
                            .map(|k| annulus_brute(&f, m, k, norm).abs())
                            .fold(0.0, f64::max);
                        let got = spherical_running_max(&f, m, n, norm).unwrap();
                        assert_eq!(got, want, "d={d} m={m} n={n} {norm:?}");
                        assert!(got >= spherical_partial_sum(&f, m, n, norm).unwrap().abs());
                    }
                }
            }
        }
    }

    #[test]
    fn annuli_telescope() {
        let f = LatticeField::from_fn(&[12, 12, 12], FieldMeta::default(), |k| {
            ((k[0] * 7 + k[1] * 3 + k[2]) % 11) as f64 - 5.0
        })
        .unwrap();
        let t = ShellTable::new(&f, Norm::L2, 11).unwrap();
        let whole = t.annulus_sum(0, 11).unwrap();
        let parts: f64 = [(0, 3), (3, 4), (7, 4)].iter().map(|&(m, n)| t.annulus_sum(m, n).unwrap()).sum();
        assert_eq!(whole, parts);
        assert_eq!(whole, annulus_brute(&f, 0, 11, Norm::L2));
    }

    #[test]
    fn needs_origin_cube() {
        let f = ones(2, 4);
        assert!(matches!(
            spherical_partial_sum(&f, 2, 2, Norm::Max),
            Err(Error::Range { axis: 0, value: 4, .. })
        ));
    }
}
