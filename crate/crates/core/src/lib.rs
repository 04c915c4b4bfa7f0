//! Photon-number statistics and optimization of heralded single-photon
//! sources that spatially multiplex several binary-division time
//! multiplexers.
//!
//! The crate is organised bottom-up:
//!
//! * [`photon_stats`] - pair statistics per window and threshold heralding,
//! * [`transmission`] - net transmission matrix of the bulk-optics layout,
//! * [`engine`] - exact output distribution for both priority logics,
//! * [`oracle`] - independent Monte-Carlo simulation of the same process,
//! * [`optimize`] - λ optimization and `(M, N)` sweeps,
//! * [`reference`], [`config`], [`report`] - reproduction tables, run
//!   configuration and CSV output used by the command-line tool.

pub mod config;
pub mod engine;
pub mod error;
pub mod optimize;
pub mod oracle;
pub mod photon_stats;
pub mod reference;
pub mod report;
pub mod special;
pub mod transmission;

pub use engine::{output_distribution, single_photon_probability, PhotonNumberDistribution};
pub use error::{Error, Result};
pub use photon_stats::{
    herald_convolve, pair_distribution, HeraldedInputDistribution, PairSourceModel, SourceKind,
};
pub use transmission::{
    build_matrix, spatial_arm_transmissions, time_window_transmission, LossParameters,
    MultiplexerLayout, PriorityLogic, TransmissionMatrix,
};
