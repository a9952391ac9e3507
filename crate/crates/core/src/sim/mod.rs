//! Chip-synchronous Monte Carlo of slotted spread-spectrum Aloha with SIC.
//!
//! One slot carries `K` users. Each user draws a power from the solved
//! [`PowerModel`](crate::PowerModel), a uniform phase, a fresh random
//! antipodal spreading sequence of `n` chips and `L` BPSK symbols. The
//! receiver sorts users by power, then matched-filters, decodes and cancels
//! them strongest-first, leaving the residual prescribed by the SIC model.

mod campaign;
mod moments;
mod rng;
mod sic;
mod slot;

pub(crate) use campaign::fmt_f64;
pub use campaign::{run_campaign, AggregateStats, BinStats, WeakerCountStats};
pub use moments::{crosscorrelation_moments, CrossCorrMoments};
pub use rng::slot_rng;
pub use sic::{run_sic, SicTrace, UserOutcome};
pub use slot::{matched_filter, synthesize_slot, Signature, SlotRealization, UserSignal, Waveform};

use crate::error::{config, Result};
use crate::power_model::{ChannelParams, PowerModel, SicModel};

/// When a user counts as decoded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeRule {
    /// Every user decodes; measures the SNIR profile under the assumption
    /// that all stronger users were cancelled.
    Genie,
    /// Decoded iff the exact SNIR reaches `gamma_dec`. The first failure
    /// stops SIC and every weaker user stays undecoded.
    Threshold { gamma_dec: f64 },
}

/// Default number of equal-probability power bins in a campaign.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Chips per symbol, `n`.
    pub spreading_factor: usize,
    /// Symbols per packet, `L`.
    pub packet_len: usize,
    /// Users per slot, `K`.
    pub users_per_slot: usize,
    pub channel: ChannelParams,
    pub sic: SicModel,
    pub decode_rule: DecodeRule,
    pub slots: usize,
    pub seed: u64,
    /// Equal-probability power bins used by [`run_campaign`].
    pub bins: usize,
}

/// Integer user count closest to the design load: `1 + round(beta * n)`.
pub fn design_users(beta: f64, spreading_factor: usize) -> usize {
    1 + (beta * spreading_factor as f64).round() as usize
}

impl SystemConfig {
    /// A configuration matching `model`, with `K` chosen from its load.
    pub fn for_model(
        model: &PowerModel,
        spreading_factor: usize,
        packet_len: usize,
        slots: usize,
        decode_rule: DecodeRule,
        seed: u64,
    ) -> Self {
        Self {
            spreading_factor,
            packet_len,
            users_per_slot: design_users(model.beta(), spreading_factor),
            channel: model.params(),
            sic: model.sic(),
            decode_rule,
            slots,
            seed,
            bins: DEFAULT_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spreading_factor < 2 {
            return Err(config(format!(
                "spreading factor must be at least 2, got {}",
                self.spreading_factor
            )));
        }
        if self.packet_len < 1 {
            return Err(config("packet length must be at least 1 symbol"));
        }
        if self.users_per_slot < 1 {
            return Err(config("at least one user per slot is required"));
        }
        if self.slots < 1 {
            return Err(config("at least one slot is required"));
        }
        if self.bins < 1 {
            return Err(config("at least one power bin is required"));
        }
        if let DecodeRule::Threshold { gamma_dec } = self.decode_rule {
            if !(gamma_dec.is_finite() && gamma_dec > 0.0) {
                return Err(config(format!("gamma_dec must be positive, got {gamma_dec}")));
            }
        }
        self.sic.validate(self.channel.pmax())
    }

    /// `(K - 1) / n`.
    pub fn effective_load(&self) -> f64 {
        (self.users_per_slot - 1) as f64 / self.spreading_factor as f64
    }

    pub(crate) fn check_model(&self, model: &PowerModel) -> Result<()> {
        if model.sic() != self.sic || model.params() != self.channel {
            return Err(config(
                "power model was solved for a different SIC model or channel",
            ));
        }
        Ok(())
    }
}
