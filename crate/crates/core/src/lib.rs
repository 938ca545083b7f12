//! Energy-efficient power control for multi-cell NOMA downlinks: two
//! fractional-programming solvers, the deep-unfolded models built from them,
//! and an experiment harness.

pub mod autodiff;
pub mod error;
pub mod fp_closedform;
pub mod fp_numerical;
pub mod grid;
pub mod harness;
pub mod links;
pub mod netmodel;
pub mod unfold_fum;
pub mod unfold_masum;

pub use error::{Error, Result};
pub use grid::UserGrid;
pub use netmodel::{ChannelRealization, LinkMetrics, NetworkConfig, PowerAllocation};
