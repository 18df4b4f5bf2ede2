//! End-to-end law-of-large-numbers runs and the LFSS block-tail diagnostics.

mod block_tail;
mod slln;

pub use block_tail::{
    block_tail_exponent, estimate_sup_increment_moment, run_lfss_block_tail, BlockRow, BlockTailReport,
    BlockTailSetup, Interval, SupMomentReport, SupMomentRow, DEFAULT_REFINEMENT,
};
pub use slln::{run_slln, SllnExperiment, SllnGeometry, TailSupSeries, TheoremMode};
