//! Decentralized power control for slotted spread-spectrum Aloha with
//! successive interference cancellation (SIC).
//!
//! * [`power_model`] solves the transmit-power distributions that keep the
//!   SNIR constant through the SIC process, under perfect, fractional-residual
//!   and constant-residual cancellation.
//! * [`sim`] is a chip-synchronous waveform-level Monte Carlo simulator used
//!   to check the analytic interference and SNIR predictions.
//! * [`experiments`] runs parameter sweeps and flatness reports and writes CSV.
//! * [`validate`] bundles the property checks behind the `validate` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod lambert;
pub mod power_model;
pub mod quadrature;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use lambert::{lambert_w0, lambert_w0_exp};
pub use power_model::{solve_model, ChannelParams, DbValue, PowerModel, SicModel};
