use std::cmp::Ordering;
use std::fmt;

use crate::error::{arg, Result};

/// A point of the nonnegative integer lattice of dimension `d ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u64>);

impl MultiIndex {
    pub fn new(coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return arg("multi-index must have at least one coordinate");
        }
        Ok(Self(coords))
    }

    /// Panics on an empty slice; for literals in code and tests.
    pub fn from_slice(coords: &[u64]) -> Self {
        Self::new(coords.to_vec()).expect("nonempty multi-index")
    }

    pub fn zeros(d: usize) -> Self {
        Self::splat(d, 0)
    }

    pub fn ones(d: usize) -> Self {
        Self::splat(d, 1)
    }

    pub fn splat(d: usize, v: u64) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self(vec![v; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u64 {
        self.0[i]
    }

    /// ℓ∞ norm `|n|`.
    pub fn max_norm(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Squared ℓ² norm, exact in integers.
    pub fn sq_norm(&self) -> u128 {
        self.0.iter().map(|&c| u128::from(c) * u128::from(c)).sum()
    }

    /// ℓ² norm `‖n‖`.
    pub fn l2_norm(&self) -> f64 {
        (self.sq_norm() as f64).sqrt()
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.l2_norm(),
            Norm::Max => self.max_norm() as f64,
        }
    }

    /// Product of coordinates (lattice volume of `(0, n]`).
    pub fn volume(&self) -> u128 {
        self.0.iter().map(|&c| u128::from(c)).product()
    }

    /// Componentwise partial order: `self ≤ other` iff every coordinate is.
    pub fn le(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn partial_cmp_lattice(&self, other: &Self) -> Option<Ordering> {
        match (self.le(other), other.le(self)) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `base^{n_i}` per coordinate; `None` on overflow.
    pub fn pow_of(base: u64, exps: &Self) -> Option<Self> {
        exps.0
            .iter()
            .map(|&e| u32::try_from(e).ok().and_then(|e| base.checked_pow(e)))
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn with(&self, axis: usize, value: u64) -> Self {
        let mut c = self.0.clone();
        c[axis] = value;
        Self(c)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u64>> for MultiIndex {
    fn from(v: Vec<u64>) -> Self {
        Self::new(v).expect("nonempty multi-index")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Euclidean norm.
    L2,
    /// Max norm; balls are cubes `[0, r]^d`.
    Max,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::Max => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Norm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Some(Norm::L2),
            "linf" | "max" | "l-inf" | "inf" => Some(Norm::Max),
            _ => None,
        }
    }

    /// Smallest integer radius `R ≥ 0` with `‖k‖ ≤ R`.
    pub fn ceil_radius(self, k: &[u64]) -> u64 {
        match self {
            Norm::Max => k.iter().copied().max().unwrap_or(0),
            Norm::L2 => {
                let sq: u128 = k.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
                ceil_sqrt(sq)
            }
        }
    }
}

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

fn ceil_sqrt(n: u128) -> u64 {
    let r = isqrt(n);
    (if r * r == n { r } else { r + 1 }) as u64
}

/// Finite index sets of the lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexDomain {
    /// `[lo, hi]`, inclusive; empty unless `lo ≤ hi`.
    Rectangle { lo: MultiIndex, hi: MultiIndex },
    /// `Q_r = {k : ‖k‖ ≤ r}` with the convention `Q_0 = ∅`.
    Ball { radius: f64, norm: Norm, dim: usize },
    /// `Q_{inner+width} \ Q_inner`.
    Annulus {
        inner: u64,
        width: u64,
        norm: Norm,
        dim: usize,
    },
}

impl IndexDomain {
    pub fn dim(&self) -> usize {
        match self {
            IndexDomain::Rectangle { lo, .. } => lo.dim(),
            IndexDomain::Ball { dim, .. } | IndexDomain::Annulus { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, k: &MultiIndex) -> bool {
        if k.dim() != self.dim() {
            return false;
        }
        match self {
            IndexDomain::Rectangle { lo, hi } => lo.le(k) && k.le(hi),
            IndexDomain::Ball { radius, norm, .. } => in_ball(k, *radius, *norm),
            IndexDomain::Annulus {
                inner, width, norm, ..
            } => {
                in_ball(k, (inner + width) as f64, *norm) && !in_ball(k, *inner as f64, *norm)
            }
        }
    }

    /// Enclosing box `[0, hi]` or `[lo, hi]`; `None` when trivially empty.
    fn bounding_box(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        match self {
            IndexDomain::Rectangle { lo, hi } => {
                if lo.dim() != hi.dim() || !lo.le(hi) {
                    None
                } else {
                    Some((lo.coords().to_vec(), hi.coords().to_vec()))
                }
            }
            IndexDomain::Ball { radius, dim, .. } => {
                if *radius <= 0.0 || !radius.is_finite() {
                    None
                } else {
                    Some((vec![0; *dim], vec![radius.floor() as u64; *dim]))
                }
            }
            IndexDomain::Annulus {
                inner, width, dim, ..
            } => {
                if *width == 0 {
                    None
                } else {
                    Some((vec![0; *dim], vec![inner + width; *dim]))
                }
            }
        }
    }

    /// All points of the domain in lexicographic order (first coordinate most
    /// significant). An empty rectangle yields an empty list.
    pub fn enumerate(&self) -> Vec<MultiIndex> {
        let Some((lo, hi)) = self.bounding_box() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for_each_in_box(&lo, &hi, |k| {
            let mi = MultiIndex(k.to_vec());
            if self.contains(&mi) {
                out.push(mi);
            }
        });
        out
    }
}

fn in_ball(k: &MultiIndex, radius: f64, norm: Norm) -> bool {
    // Q_0 = ∅
    if radius <= 0.0 {
        return false;
    }
    match norm {
        Norm::Max => (k.max_norm() as f64) <= radius,
        Norm::L2 => {
            if radius.fract() == 0.0 && radius < 1e18 {
                let r = radius as u128;
                k.sq_norm() <= r * r
            } else {
                (k.sq_norm() as f64) <= radius * radius
            }
        }
    }
}

/// Visits every point of the inclusive box `[lo, hi]` in lexicographic order.
pub fn for_each_in_box<F: FnMut(&[u64])>(lo: &[u64], hi: &[u64], mut f: F) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut k = lo.to_vec();
    loop {
        f(&k);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k[axis] < hi[axis] {
                k[axis] += 1;
                for j in axis + 1..d {
                    k[j] = lo[j];
                }
                break;
            }
        }
    }
}

/// Free-function form of [`IndexDomain::enumerate`].
pub fn enumerate_domain(dom: &IndexDomain) -> Vec<MultiIndex> {
    dom.enumerate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn mi(c: &[u64]) -> MultiIndex {
        MultiIndex::from_slice(c)
    }

    #[test]
    fn norms_and_order() {
        let n = mi(&[3, 4]);
        assert_eq!(n.max_norm(), 4);
        assert_eq!(n.l2_norm(), 5.0);
        assert!(mi(&[1, 2]).le(&n));
        assert!(!mi(&[4, 0]).le(&n));
        assert_eq!(mi(&[4, 0]).partial_cmp_lattice(&n), None);
    }

    #[test]
    fn singleton_rectangle() {
        let dom = IndexDomain::Rectangle {
            lo: mi(&[1, 1]),
            hi: mi(&[1, 1]),
        };
        assert_eq!(dom.enumerate(), vec![mi(&[1, 1])]);
    }

    #[test]
    fn empty_rectangle_is_not_an_error() {
        let dom = IndexDomain::Rectangle {
            lo: mi(&[2, 0]),
            hi: mi(&[1, 5]),
        };
        assert!(dom.enumerate().is_empty());
    }

    #[test]
    fn euclidean_ball_radius_two() {
        let pts = IndexDomain::Ball {
            radius: 2.0,
            norm: Norm::L2,
            dim: 2,
        }
        .enumerate();
        // exhaustive scan of k1^2 + k2^2 <= 4 on [0,2]^2
        let mut expect = BTreeSet::new();
        for a in 0..=2u64 {
            for b in 0..=2u64 {
                if a * a + b * b <= 4 {
                    expect.insert(mi(&[a, b]));
                }
            }
        }
        assert_eq!(expect.len(), 6);
        assert_eq!(pts.iter().cloned().collect::<BTreeSet<_>>(), expect);
        assert!(pts.windows(2).all(|w| w[0] < w[1]), "lexicographic order");
    }

    #[test]
    fn max_ball_is_cube() {
        let pts = IndexDomain::Ball {
            radius: 1.0,
            norm: Norm::Max,
            dim: 2,
        }
        .enumerate();
        assert_eq!(pts, vec![mi(&[0, 0]), mi(&[0, 1]), mi(&[1, 0]), mi(&[1, 1])]);
        for r in 1..5u64 {
            for d in 1..4 {
                let n = IndexDomain::Ball {
                    radius: r as f64 + 0.5,
                    norm: Norm::Max,
                    dim: d,
                }
                .enumerate()
                .len();
                assert_eq!(n as u64, (r + 1).pow(d as u32));
            }
        }
    }

    #[test]
    fn zero_ball_is_empty() {
        for norm in [Norm::L2, Norm::Max] {
            assert!(IndexDomain::Ball {
                radius: 0.0,
                norm,
                dim: 3
            }
            .enumerate()
            .is_empty());
        }
    }

    #[test]
    fn annulus_is_ball_difference() {
        for norm in [Norm::L2, Norm::Max] {
            let outer: BTreeSet<_> = IndexDomain::Ball {
                radius: 5.0,
                norm,
                dim: 2,
            }
            .enumerate()
            .into_iter()
            .collect();
            let inner: BTreeSet<_> = IndexDomain::Ball {
                radius: 2.0,
                norm,
                dim: 2,
            }
            .enumerate()
            .into_iter()
            .collect();
            let ann: BTreeSet<_> = IndexDomain::Annulus {
                inner: 2,
                width: 3,
                norm,
                dim: 2,
            }
            .enumerate()
            .into_iter()
            .collect();
            assert_eq!(ann, outer.difference(&inner).cloned().collect());
            assert!(ann.is_disjoint(&inner));
        }
    }

    #[test]
    fn ceil_radius_matches_definition() {
        for a in 0..20u64 {
            for b in 0..20u64 {
                let r = Norm::L2.ceil_radius(&[a, b]);
                let sq = a * a + b * b;
                assert!(r * r >= sq);
                assert!(r == 0 || (r - 1) * (r - 1) < sq);
            }
        }
    }
}
