//! Emulating shot-noise-limited local energies in Green's function Monte
//! Carlo on the transverse-field Ising chain.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the periodic TFI chain and its single-flip connectivity.
//! - [`trial`]: normalized trial amplitude tables (Jastrow, exact ground
//!   state, uniform).
//! - [`exact`]: matrix-free Lanczos ground state and variational energies.
//! - [`shots`]: multinomial measurement emulation and noisy amplitudes.
//! - [`gfmc`]: the importance-sampled single-walker GFMC and its estimators.
//! - [`scaling`]: shot-budget sweeps, prefactor and exponential fits, and
//!   runtime extrapolation.
//! - [`config`] and [`seed`]: run configuration and per-task seeds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exact;
pub mod gfmc;
pub mod model;
pub mod scaling;
pub mod seed;
pub mod shots;
pub mod trial;

pub use error::{Error, Result};
pub use exact::{ground_state, variational_energy, GroundStateResult};
pub use gfmc::{average_local_energy, local_energy, reweighted_energy, run_chain, ChainRecord, GfmcConfig};
pub use model::{SpinConfig, TfiModel};
pub use scaling::{ScalingResult, SweepPoint, TrialKind};
pub use seed::derive_seed;
pub use shots::{noisy_amplitudes, sample_counts, ShotCounts};
pub use trial::{AmplitudeTable, JastrowParams, TableKind, TrialSpec};
