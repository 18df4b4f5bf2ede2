use super::field::LatticeField;
use super::index::{for_each_in_box, MultiIndex};
use super::prefix::PrefixSumTable;
use crate::error::{arg, Result};

/// `M_s(m; n)`: the largest `|S(m; k_1..k_s, n_{s+1}..n_d)|` over
/// `1 ≤ k_j ≤ n_j`. `M_0 = |S(m; n)|`.
pub fn maximal_sum_in(table: &PrefixSumTable, m: &[u64], n: &[u64], s: usize) -> Result<f64> {
    let d = table.dim();
    if s > d {
        return arg(format!("maximal sum order {s} outside [0, {d}]"));
    }
    table.relative_bounds(m, n)?;
    if n.iter().any(|&x| x == 0) {
        return arg("maximal sum needs n >= 1 componentwise");
    }
    let mut lo = vec![1u64; d];
    lo[s..].copy_from_slice(&n[s..]);
    let mut best = 0.0f64;
    for_each_in_box(&lo, n, |k| {
        best = best.max(table.rect_sum(m, k).expect("inside checked box").abs());
    });
    Ok(best)
}

/// `[M_0, M_1, …, M_d]` from a single sweep of the box `[1, n]`.
///
/// Each `k` is admissible for `M_s` exactly when `k_j = n_j` for all `j > s`,
/// so the values are running maxima over a nested family and
/// `M_0 ≤ M_1 ≤ … ≤ M_d` holds exactly.
pub fn maximal_sums_all(table: &PrefixSumTable, m: &[u64], n: &[u64]) -> Result<Vec<f64>> {
    let d = table.dim();
    table.relative_bounds(m, n)?;
    if n.iter().any(|&x| x == 0) {
        return arg("maximal sum needs n >= 1 componentwise");
    }
    let mut by_order = vec![0.0f64; d + 1];
    for_each_in_box(&vec![1; d], n, |k| {
        let t = (0..d).rev().find(|&j| k[j] < n[j]).map_or(0, |j| j + 1);
        let v = table.rect_sum(m, k).expect("inside checked box").abs();
        if v > by_order[t] {
            by_order[t] = v;
        }
    });
    for s in 1..=d {
        by_order[s] = by_order[s].max(by_order[s - 1]);
    }
    Ok(by_order)
}

pub fn maximal_sum(field: &LatticeField, m: &MultiIndex, n: &MultiIndex, s: usize) -> Result<f64> {
    maximal_sum_in(&PrefixSumTable::new(field), m.coords(), n.coords(), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::field::FieldMeta;
    use crate::stats::KahanSum;

    fn brute(field: &LatticeField, m: &[u64], n: &[u64], s: usize) -> f64 {
        let d = m.len();
        let mut lo = vec![1u64; d];
        lo[s..].copy_from_slice(&n[s..]);
        let mut best = 0.0f64;
        for_each_in_box(&lo, n, |k| {
            let a: Vec<u64> = m.iter().map(|x| x + 1).collect();
            let b: Vec<u64> = m.iter().zip(k).map(|(x, y)| x + y).collect();
            let mut sum = KahanSum::new();
            for_each_in_box(&a, &b, |p| sum.add(field.value_at(p).unwrap()));
            best = best.max(sum.value().abs());
        });
        best
    }

    #[test]
    fn order_zero_is_abs_rect_sum() {
        let f = LatticeField::from_fn(&[4, 4], FieldMeta::default(), |k| k[0] as f64 - k[1] as f64 * 2.0).unwrap();
        let t = PrefixSumTable::new(&f);
        let m = [0, 1];
        let n = [3, 2];
        assert_eq!(maximal_sum_in(&t, &m, &n, 0).unwrap(), t.rect_sum(&m, &n).unwrap().abs());
    }

    #[test]
    fn checkerboard_example() {
        // ξ(1,1)=1, ξ(1,2)=-1, ξ(2,1)=-1, ξ(2,2)=1 on the (0, (2,2)] square.
        let f = LatticeField::from_fn(&[3, 3], FieldMeta::default(), |k| {
            if k[0] == 0 || k[1] == 0 {
                0.0
            } else if (k[0] + k[1]) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .unwrap();
        let v = maximal_sum(&f, &MultiIndex::from_slice(&[0, 0]), &MultiIndex::from_slice(&[2, 2]), 2).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn bad_order_is_rejected() {
        let f = LatticeField::zeros(&[3, 3]).unwrap();
        assert!(maximal_sum(&f, &MultiIndex::zeros(2), &MultiIndex::ones(2), 3).is_err());
    }

    #[test]
    fn random_4cube_all_orders() {
        let mut state = 99u64;
        let f = LatticeField::from_fn(&[4, 4, 4], FieldMeta::default(), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 40) % 19) as f64 - 9.0
        })
        .unwrap();
        let t = PrefixSumTable::new(&f);
        for_each_in_box(&[0, 0, 0], &[2, 2, 2], |m| {
            let nmax: Vec<u64> = m.iter().map(|x| 3 - x).collect();
            for_each_in_box(&[1, 1, 1], &nmax, |n| {
                let all = maximal_sums_all(&t, m, n).unwrap();
                for s in 0..=3 {
                    let want = brute(&f, m, n, s);
                    assert_eq!(maximal_sum_in(&t, m, n, s).unwrap(), want);
                    assert_eq!(all[s], want);
                }
                assert!(all.windows(2).all(|w| w[0] <= w[1]));
            });
        });
    }
}
