//! Seedable samplers for Kronecker product graphs and multiplicative
//! attribute graphs.
//!
//! KPGM graphs are sampled exactly or with the ball-dropping process (BDP).
//! MAGM graphs are sampled by accept-reject over four BDP proposals, one per
//! pair of frequent/infrequent color classes, at a cost close to linear in
//! the expected edge count.
//!
//! Every random draw goes through an [`RngStream`], so a seed and a command
//! line fully determine the output.

pub mod bdp;
pub mod bench;
pub mod edges;
pub mod error;
pub mod magm;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod stats;

pub use bdp::{sample_bdp, sample_bdp_parallel, sample_kpgm_bdp, Ball, BallDropper};
pub use edges::{dedupe, Edge, EdgeHeader, EdgeList};
pub use error::{Error, Result};
pub use magm::{
    build_color_index, sample_colors, sample_magm_ar, sample_magm_simple, ColorAssignment,
    ColorIndex, MagmSampler, SimpleSampler,
};
pub use oracle::{build_gamma, sample_kpgm_exact, sample_magm_exact, sample_poisson_exact};
pub use params::{
    expected_edges, gamma_entry, psi_entry, ExpectedEdgeSummary, InitiatorMatrix, ModelConfig,
    MuVector, ParamStack,
};
pub use rng::RngStream;
