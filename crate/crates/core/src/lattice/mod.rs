//! Multi-indices, index domains and exact partial sums over lattice fields.

mod field;
mod index;
mod maximal;
mod prefix;
mod sphere;

pub use field::{FieldMeta, GeneratorId, LatticeField};
pub use index::{enumerate_domain, for_each_in_box, IndexDomain, MultiIndex, Norm};
pub use maximal::{maximal_sum, maximal_sum_in, maximal_sums_all};
pub use prefix::{rect_partial_sum, DoubleDouble, PrefixSumTable};
pub use sphere::{spherical_partial_sum, spherical_running_max, ShellTable};
