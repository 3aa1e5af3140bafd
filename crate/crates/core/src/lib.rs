//! Monte Carlo simulator for multi-UAV decode-and-forward relaying in a
//! multi-user massive-MIMO downlink.
//!
//! The pipeline for one candidate configuration is:
//!
//! 1. [`geometry`] and [`channel`] turn a [`geometry::NetworkLayout`] into a
//!    [`channel::ChannelSet`] (BS→UAV, UAV→user and BS→user mmWave channels).
//! 2. [`clustering`] associates every user with exactly one UAV.
//! 3. [`beamforming`] builds the RF and baseband stages at the BS and each UAV
//!    and scales the power allocation to the transmit budgets.
//! 4. [`rates`] evaluates first-hop, second-hop and end-to-end rates.
//!
//! [`pso`] and [`placement`] search UAV positions and power allocations on top
//! of that pipeline, and [`harness`] drives Monte Carlo sweeps from a config
//! file.

pub mod beamforming;
pub mod channel;
pub mod clustering;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod placement;
pub mod pso;
pub mod rates;

pub use error::{Error, Result};
