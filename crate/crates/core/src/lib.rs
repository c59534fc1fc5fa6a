// NaN-rejecting guards are written as negated comparisons throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Dynamical renormalization group for the Ohmic spin-boson model.
//!
//! The flow of the two-level-system frequency `Δ` and decay rate `γ` under
//! progressive removal of bath modes is integrated in [`flow`], mapped onto
//! real time and fed to the time-local equations of motion in [`dynamics`].
//! The spontaneous-emission limit has an exact solution in [`se_exact`],
//! checked in turn by the brute-force [`oracle`].

pub mod bath;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod oracle;
pub mod reference;
pub mod rk;
pub mod se_exact;

pub use bath::{CutoffShape, DiscreteBath, SpectralParams};
pub use dynamics::{BlochState, BlochTrajectory, Component, DampedCosineFit};
pub use error::{DrgError, Result};
pub use flow::{FlowConfig, FlowModel, FlowState, FlowTrajectory, RateSchedule};
pub use reference::NibaValues;
pub use se_exact::{AmplitudeSeries, RatePair};
