use super::slot::{SlotRealization, Waveform};
use super::{DecodeRule, SystemConfig};

/// Outcome for one user, in cancellation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    /// Index into `SlotRealization::users`.
    pub user: usize,
    pub power: f64,
    pub decoded: bool,
    /// `p / (noise + measured_interference)` at the time the user is processed.
    pub exact_snir: f64,
    /// Conditional interference power given this slot's sequences and
    /// phases: `sum_j p~_j rho_ji^2 cos^2(phi_j - phi_i)`, where `p~_j` is
    /// the full power of users still present and the residual power of
    /// cancelled ones.
    pub measured_interference: f64,
    /// Diagnostic estimate of the same quantity from the `L` matched-filter
    /// outputs: mean squared error around `sqrt(p) b[h]` minus `noise / 2`.
    pub empirical_interference: f64,
    /// Residual power left behind by this user's cancellation (zero if the
    /// user was not decoded).
    pub residual_applied: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SicTrace {
    /// Strongest first.
    pub outcomes: Vec<UserOutcome>,
    pub num_decoded: usize,
    /// Rank of the first decoding failure, or `K` if none failed.
    pub stop_index: usize,
    /// Energy of the stored waveform after the last cancellation.
    pub final_energy: f64,
}

/// Runs power-ordered SIC over one slot.
pub fn run_sic(slot: &SlotRealization, config: &SystemConfig) -> SicTrace {
    let k = slot.users.len();
    let noise = config.channel.noise_power();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        slot.users[b]
            .power
            .total_cmp(&slot.users[a].power)
            .then(a.cmp(&b))
    });

    let trig: Vec<(f64, f64)> = slot.users.iter().map(|u| u.phase.sin_cos()).collect();
    // Power each user currently contributes to the stored waveform.
    let mut present: Vec<f64> = slot.users.iter().map(|u| u.power).collect();
    let mut waveform = slot.received();
    let mut outcomes = Vec::with_capacity(k);
    let mut stopped = false;
    let mut stop_index = k;
    let mut num_decoded = 0;

    for (rank, &i) in order.iter().enumerate() {
        let user = &slot.users[i];
        let (si, ci) = trig[i];
        let mut interference = 0.0;
        for (j, other) in slot.users.iter().enumerate() {
            if j == i {
                continue;
            }
            let rho = user.signature.crosscorrelation(&other.signature);
            let (sj, cj) = trig[j];
            let cos = cj * ci + sj * si;
            interference += present[j] * rho * rho * cos * cos;
        }
        let exact_snir = user.power / (noise + interference);
        let empirical_interference = empirical_interference(slot, i, &waveform, trig[i], noise);

        let decoded = !stopped
            && match config.decode_rule {
                DecodeRule::Genie => true,
                DecodeRule::Threshold { gamma_dec } => exact_snir >= gamma_dec,
            };
        let mut residual_applied = 0.0;
        if decoded {
            let residual_amp = config.sic.residual_amplitude(user.power);
            waveform.add_user(user, -(user.power.sqrt() - residual_amp));
            residual_applied = config.sic.residual_power(user.power);
            present[i] = residual_applied;
            num_decoded += 1;
        } else if !stopped {
            stopped = true;
            stop_index = rank;
        }
        outcomes.push(UserOutcome {
            user: i,
            power: user.power,
            decoded,
            exact_snir,
            measured_interference: interference,
            empirical_interference,
            residual_applied,
        });
    }

    SicTrace {
        outcomes,
        num_decoded,
        stop_index,
        final_energy: waveform.energy(),
    }
}

fn empirical_interference(
    slot: &SlotRealization,
    i: usize,
    waveform: &Waveform,
    (sin, cos): (f64, f64),
    noise: f64,
) -> f64 {
    let user = &slot.users[i];
    let amp = user.power.sqrt();
    let mut acc = 0.0;
    for (h, &b) in user.symbols.iter().enumerate() {
        let (re, im) = waveform.correlate(h, &user.chips);
        let err = re * cos + im * sin - amp * f64::from(b);
        acc += err * err;
    }
    acc / user.symbols.len() as f64 - noise / 2.0
}
