//! Shared fixtures for the kernel benchmarks.

use slln_core::lattice::FieldMeta;
use slln_core::{LatticeField, StableParams, Stream};

/// SαS noise on `shape` starting at `origin` on every axis, reproducible
/// from `seed`.
pub fn noise_field(shape: &[usize], origin: u64, alpha: f64, seed: u64) -> LatticeField {
    let n: usize = shape.iter().product();
    let mut values = vec![0.0; n];
    StableParams::standard(alpha)
        .expect("valid alpha")
        .fill(&mut Stream::new(seed, "bench/noise").rng(), &mut values);
    let offset = vec![origin; shape.len()];
    LatticeField::new(shape.to_vec(), offset, values, FieldMeta::default()).expect("consistent shape")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_is_reproducible() {
        let a = super::noise_field(&[8, 8], 1, 1.5, 3);
        assert_eq!(a.values(), super::noise_field(&[8, 8], 1, 1.5, 3).values());
        assert_eq!(a.len(), 64);
    }
}
