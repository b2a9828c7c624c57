//! MAGM sampling by accept-reject over ball-dropping proposals.

mod colors;
mod proposal;
mod sampler;

pub use colors::{
    build_color_index, expected_count, sample_colors, ColorAssignment, ColorClass, ColorIndex,
};
pub use proposal::{
    build_proposals, effective_lambda, Block, CountMatrixView, LambdaEntry, ProposalFamily,
};
pub use sampler::{
    sample_magm_ar, sample_magm_simple, MagmSampler, SampleStats, SimpleSampler,
};

pub use crate::edges::dedupe;
