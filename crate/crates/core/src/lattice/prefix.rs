use super::field::{strides, LatticeField};
use super::index::MultiIndex;
use crate::error::{Error, Result};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Summed-area table over a [`LatticeField`]: entry `j` (per-axis, padded by
/// one leading zero layer) holds the sum of all values at relative indices
/// `< j`. Kept in double-double so inclusion–exclusion does not cancel away
/// the answer on large boxes of heavy-tailed values.
#[derive(Debug, Clone)]
pub struct PrefixSumTable {
    shape: Vec<usize>,
    offset: Vec<u64>,
    ext: Vec<usize>,
    ext_strides: Vec<usize>,
    cum: Vec<DoubleDouble>,
}

impl PrefixSumTable {
    pub fn new(field: &LatticeField) -> Self {
        let shape = field.shape().to_vec();
        let d = shape.len();
        let ext: Vec<usize> = shape.iter().map(|s| s + 1).collect();
        let ext_strides = strides(&ext);
        let total: usize = ext.iter().product();
        let mut cum = vec![DoubleDouble::default(); total];

        let src_strides = strides(&shape);
        for (pos, &v) in field.values().iter().enumerate() {
            let mut rem = pos;
            let mut dst = 0;
            for i in 0..d {
                let c = rem / src_strides[i];
                rem %= src_strides[i];
                dst += (c + 1) * ext_strides[i];
            }
            cum[dst] = DoubleDouble::from_f64(v);
        }
        // Running sums along each axis in turn.
        for axis in 0..d {
            let st = ext_strides[axis];
            let len = ext[axis];
            for base in 0..total {
                if (base / st) % len != 0 {
                    continue;
                }
                let mut acc = DoubleDouble::default();
                for j in 0..len {
                    let p = base + j * st;
                    acc = acc.add(cum[p]);
                    cum[p] = acc;
                }
            }
        }
        Self {
            shape,
            offset: field.offset().to_vec(),
            ext,
            ext_strides,
            cum,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn offset(&self) -> &[u64] {
        &self.offset
    }

    /// Sum over the relative half-open box `[lo, hi)`. Callers guarantee
    /// `lo ≤ hi ≤ shape` componentwise.
    pub fn box_sum_relative(&self, lo: &[usize], hi: &[usize]) -> f64 {
        self.box_sum_dd(lo, hi).value()
    }

    fn box_sum_dd(&self, lo: &[usize], hi: &[usize]) -> DoubleDouble {
        let d = self.dim();
        if lo.iter().zip(hi).any(|(a, b)| a >= b) {
            return DoubleDouble::default();
        }
        let mut acc = DoubleDouble::default();
        for mask in 0u32..(1 << d) {
            let mut pos = 0;
            let mut neg = false;
            for i in 0..d {
                let c = if mask & (1 << i) != 0 {
                    neg = !neg;
                    lo[i]
                } else {
                    hi[i]
                };
                pos += c * self.ext_strides[i];
            }
            let v = self.cum[pos];
            acc = acc.add(if neg { v.neg() } else { v });
        }
        acc
    }

    /// `S(m; n) = Σ_{k ∈ (m, m+n]} ξ(k)`. A zero component of `n` gives the
    /// empty sum.
    pub fn rect_sum(&self, m: &[u64], n: &[u64]) -> Result<f64> {
        let (lo, hi) = self.relative_bounds(m, n)?;
        Ok(self.box_sum_relative(&lo, &hi))
    }

    /// Translates `(m, m+n]` into table indices, with a range error naming
    /// the first offending axis.
    pub(crate) fn relative_bounds(&self, m: &[u64], n: &[u64]) -> Result<(Vec<usize>, Vec<usize>)> {
        let d = self.dim();
        if m.len() != d || n.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: if m.len() != d { m.len() } else { n.len() },
            });
        }
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for axis in 0..d {
            let box_lo = self.offset[axis];
            let box_hi = box_lo + self.shape[axis] as u64 - 1;
            let range = |value: u64| Error::Range {
                axis,
                value: value.min(i64::MAX as u64) as i64,
                lo: box_lo as i64,
                hi: box_hi as i64,
            };
            if n[axis] == 0 {
                lo.push(0);
                hi.push(0);
                continue;
            }
            let first = m[axis] + 1;
            let last = m[axis].checked_add(n[axis]).ok_or_else(|| range(u64::MAX))?;
            if first < box_lo {
                return Err(range(first));
            }
            if last > box_hi {
                return Err(range(last));
            }
            lo.push((first - box_lo) as usize);
            hi.push((last - box_lo + 1) as usize);
        }
        Ok((lo, hi))
    }

    pub fn total(&self) -> f64 {
        let zero = vec![0; self.dim()];
        self.box_sum_relative(&zero, &self.shape)
    }

    /// Number of padded entries per axis.
    pub fn extent(&self) -> &[usize] {
        &self.ext
    }
}

/// One-shot `S(m; n)` through a fresh prefix table.
pub fn rect_partial_sum(field: &LatticeField, m: &MultiIndex, n: &MultiIndex) -> Result<f64> {
    PrefixSumTable::new(field).rect_sum(m.coords(), n.coords())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::field::FieldMeta;
    use crate::lattice::index::for_each_in_box;
    use crate::stats::KahanSum;
    use proptest::prelude::*;

    fn brute(field: &LatticeField, m: &[u64], n: &[u64]) -> f64 {
        let lo: Vec<u64> = m.iter().map(|x| x + 1).collect();
        let hi: Vec<u64> = m.iter().zip(n).map(|(a, b)| a + b).collect();
        let mut s = KahanSum::new();
        for_each_in_box(&lo, &hi, |k| s.add(field.value_at(k).unwrap()));
        s.value()
    }

    #[test]
    fn ones_field_counts() {
        let f = LatticeField::from_fn(&[4, 3], FieldMeta::default(), |_| 1.0).unwrap();
        let s = rect_partial_sum(&f, &MultiIndex::from_slice(&[0, 0]), &MultiIndex::from_slice(&[3, 2])).unwrap();
        assert_eq!(s, 6.0);
    }

    #[test]
    fn one_dimensional_direct() {
        let f = LatticeField::from_fn(&[4], FieldMeta::default(), |k| (k[0] + 1) as f64).unwrap();
        let s = rect_partial_sum(&f, &MultiIndex::from_slice(&[1]), &MultiIndex::from_slice(&[2])).unwrap();
        assert_eq!(s, 7.0);
    }

    #[test]
    fn out_of_box_names_axis() {
        let f = LatticeField::zeros(&[5, 5]).unwrap();
        let t = PrefixSumTable::new(&f);
        match t.rect_sum(&[0, 2], &[3, 3]) {
            Err(Error::Range { axis: 1, value: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integer_field_exhaustive_5cube() {
        let mut state = 12345u64;
        let f = LatticeField::from_fn(&[5, 5, 5], FieldMeta::default(), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 201) as f64 - 100.0
        })
        .unwrap();
        let t = PrefixSumTable::new(&f);
        let mut checked = 0;
        for_each_in_box(&[0, 0, 0], &[3, 3, 3], |m| {
            let nmax: Vec<u64> = m.iter().map(|&x| 4 - x).collect();
            for_each_in_box(&[1, 1, 1], &nmax, |n| {
                assert_eq!(t.rect_sum(m, n).unwrap(), brute(&f, m, n));
                checked += 1;
            });
        });
        assert_eq!(checked, 1000);
    }

    #[test]
    fn cancellation_heavy_floats() {
        // Huge values that cancel pairwise leave a small exact remainder.
        let f = LatticeField::from_fn(&[64, 64], FieldMeta::default(), |k| {
            let big = if (k[0] + k[1]) % 2 == 0 { 1e15 } else { -1e15 };
            big + 1e-3 * (k[0] as f64) + 0.1
        })
        .unwrap();
        let t = PrefixSumTable::new(&f);
        let got = t.rect_sum(&[0, 0], &[62, 62]).unwrap();
        let want = brute(&f, &[0, 0], &[62, 62]);
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }

    proptest! {
        #[test]
        fn float_queries_match_brute(vals in prop::collection::vec(-1e6f64..1e6, 36), m0 in 0u64..5, m1 in 0u64..5, n0 in 1u64..6, n1 in 1u64..6) {
            prop_assume!(m0 + n0 <= 5 && m1 + n1 <= 5);
            let f = LatticeField::new(vec![6, 6], vec![0, 0], vals, FieldMeta::default()).unwrap();
            let t = PrefixSumTable::new(&f);
            let got = t.rect_sum(&[m0, m1], &[n0, n1]).unwrap();
            let want = brute(&f, &[m0, m1], &[n0, n1]);
            let scale: f64 = f.values().iter().map(|v| v.abs()).sum();
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300) || (got - want).abs() <= 1e-15 * scale);
        }
    }
}
