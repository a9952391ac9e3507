use std::io::{self, Write};

use rayon::prelude::*;

use super::rng::slot_rng;
use super::sic::run_sic;
use super::slot::synthesize_slot;
use super::{design_users, SystemConfig};
use crate::error::{config as config_error, Error, Result};
use crate::power_model::PowerModel;

/// Per power-bin statistics over all users of all slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub lower: f64,
    pub upper: f64,
    /// Conditional mean power of the bin under the model.
    pub center: f64,
    pub count: u64,
    pub mean_power: f64,
    pub mean_snir: f64,
    pub var_snir: f64,
    pub mean_interference: f64,
    pub var_interference: f64,
    /// Analytic interference at `center` using the effective load `(K-1)/n`.
    pub expected_interference: f64,
    pub mean_empirical_interference: f64,
}

/// Number of co-slot users weaker than a probe power.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakerCountStats {
    pub probe_power: f64,
    pub samples: u64,
    pub mean: f64,
    pub variance: f64,
    /// `(K - 1) F(probe)`.
    pub expected_mean: f64,
    /// `(K - 1) F(probe) (1 - F(probe))`.
    pub expected_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub slots: usize,
    pub users_per_slot: usize,
    pub effective_load: f64,
    pub target_snir: f64,
    pub bins: Vec<BinStats>,
    pub mean_snir: f64,
    /// RMS of `(exact_snir - target) / target` over all users.
    pub snir_rms_error: f64,
    pub mean_decoded_fraction: f64,
    pub crosscorr_mean: f64,
    /// Mean `rho^2` over all user pairs of all slots.
    pub crosscorr_second_moment: f64,
    pub weaker_count: WeakerCountStats,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    count: u64,
    power: f64,
    snir: f64,
    snir_sq: f64,
    interference: f64,
    interference_sq: f64,
    empirical: f64,
}

impl Moments {
    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        self.power += o.power;
        self.snir += o.snir;
        self.snir_sq += o.snir_sq;
        self.interference += o.interference;
        self.interference_sq += o.interference_sq;
        self.empirical += o.empirical;
    }
}

struct SlotSummary {
    bins: Vec<Moments>,
    decoded: usize,
    snir_sq_err: f64,
    rho: f64,
    rho_sq: f64,
    pairs: u64,
    weaker: usize,
}

/// Runs `config.slots` independent slots and aggregates the SIC traces.
///
/// Slots run in parallel on the current rayon pool; each slot draws from
/// its own stream and partial sums are merged in slot order, so the result
/// is identical for any number of worker threads.
pub fn run_campaign(config: &SystemConfig, model: &PowerModel) -> Result<AggregateStats> {
    config.validate()?;
    config.check_model(model)?;
    if model.is_degenerate() {
        return Err(Error::Degenerate { pmax: model.pmax() });
    }
    let design = design_users(model.beta(), config.spreading_factor);
    let mismatch = (config.users_per_slot as f64 - 1.0) - model.beta() * config.spreading_factor as f64;
    if mismatch.abs() > 0.5 + 1e-9 {
        return Err(config_error(format!(
            "{} users per slot do not match the design load beta = {:.6} at n = {} (expected K = {design})",
            config.users_per_slot,
            model.beta(),
            config.spreading_factor
        )));
    }

    let bins = config.bins;
    let edges: Vec<f64> = (0..=bins)
        .map(|b| model.quantile(b as f64 / bins as f64))
        .collect::<Result<_>>()?;
    let probe = model.quantile(0.5)?;
    let target = config.channel.target_snir();

    let summaries: Vec<SlotSummary> = (0..config.slots)
        .into_par_iter()
        .map(|s| summarize_slot(config, model, s as u64, bins, probe, target))
        .collect::<Result<_>>()?;

    let mut acc = vec![Moments::default(); bins];
    let (mut decoded, mut sq_err, mut rho, mut rho_sq, mut pairs) = (0usize, 0.0, 0.0, 0.0, 0u64);
    let (mut weaker, mut weaker_sq) = (0.0, 0.0);
    for s in &summaries {
        for (a, b) in acc.iter_mut().zip(&s.bins) {
            a.merge(b);
        }
        decoded += s.decoded;
        sq_err += s.snir_sq_err;
        rho += s.rho;
        rho_sq += s.rho_sq;
        pairs += s.pairs;
        weaker += s.weaker as f64;
        weaker_sq += (s.weaker * s.weaker) as f64;
    }

    let load = config.effective_load();
    let k = config.users_per_slot;
    let total_users = (k * config.slots) as f64;
    let mut bin_stats = Vec::with_capacity(bins);
    let mut snir_sum = 0.0;
    for (b, m) in acc.iter().enumerate() {
        let (lower, upper) = (edges[b], edges[b + 1]);
        let center = model.conditional_mean(lower, upper)?;
        snir_sum += m.snir;
        let n = m.count as f64;
        bin_stats.push(BinStats {
            lower,
            upper,
            center,
            count: m.count,
            mean_power: m.power / n,
            mean_snir: m.snir / n,
            var_snir: sample_variance(m.snir, m.snir_sq, n),
            mean_interference: m.interference / n,
            var_interference: sample_variance(m.interference, m.interference_sq, n),
            expected_interference: model.expected_interference_at_load(center, load)?,
            mean_empirical_interference: m.empirical / n,
        });
    }

    let slots = config.slots as f64;
    let f = model.cdf(probe);
    let others = (k - 1) as f64;
    Ok(AggregateStats {
        slots: config.slots,
        users_per_slot: k,
        effective_load: load,
        target_snir: target,
        bins: bin_stats,
        mean_snir: snir_sum / total_users,
        snir_rms_error: (sq_err / total_users).sqrt(),
        mean_decoded_fraction: decoded as f64 / total_users,
        crosscorr_mean: if pairs > 0 { rho / pairs as f64 } else { 0.0 },
        crosscorr_second_moment: if pairs > 0 { rho_sq / pairs as f64 } else { 0.0 },
        weaker_count: WeakerCountStats {
            probe_power: probe,
            samples: config.slots as u64,
            mean: weaker / slots,
            variance: sample_variance(weaker, weaker_sq, slots),
            expected_mean: others * f,
            expected_variance: others * f * (1.0 - f),
        },
    })
}

fn sample_variance(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0)
}

fn summarize_slot(
    config: &SystemConfig,
    model: &PowerModel,
    index: u64,
    bins: usize,
    probe: f64,
    target: f64,
) -> Result<SlotSummary> {
    let mut rng = slot_rng(config.seed, index);
    let slot = synthesize_slot(config, model, &mut rng)?;
    let trace = run_sic(&slot, config);

    let mut out = vec![Moments::default(); bins];
    let mut sq_err = 0.0;
    for o in &trace.outcomes {
        let b = ((model.cdf(o.power) * bins as f64) as usize).min(bins - 1);
        let m = &mut out[b];
        m.count += 1;
        m.power += o.power;
        m.snir += o.exact_snir;
        m.snir_sq += o.exact_snir * o.exact_snir;
        m.interference += o.measured_interference;
        m.interference_sq += o.measured_interference * o.measured_interference;
        m.empirical += o.empirical_interference;
        let e = (o.exact_snir - target) / target;
        sq_err += e * e;
    }

    let (mut rho, mut rho_sq, mut pairs) = (0.0, 0.0, 0u64);
    for (i, a) in slot.users.iter().enumerate() {
        for b in &slot.users[i + 1..] {
            let r = a.signature.crosscorrelation(&b.signature);
            rho += r;
            rho_sq += r * r;
            pairs += 1;
        }
    }

    // Co-slot users of the last user, compared against the probe power.
    let k = slot.users.len();
    let weaker = slot.users[..k - 1]
        .iter()
        .filter(|u| u.power < probe)
        .count();

    Ok(SlotSummary {
        bins: out,
        decoded: trace.num_decoded,
        snir_sq_err: sq_err,
        rho,
        rho_sq,
        pairs,
        weaker,
    })
}

/// Formats a float with 17 significant digits, which round-trips exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl AggregateStats {
    /// Per-bin CSV, one row per power bin.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "bin,lower,upper,center,count,mean_power,mean_snir,var_snir,mean_interference,var_interference,expected_interference,mean_empirical_interference"
        )?;
        for (i, b) in self.bins.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(b.lower),
                fmt_f64(b.upper),
                fmt_f64(b.center),
                b.count,
                fmt_f64(b.mean_power),
                fmt_f64(b.mean_snir),
                fmt_f64(b.var_snir),
                fmt_f64(b.mean_interference),
                fmt_f64(b.var_interference),
                fmt_f64(b.expected_interference),
                fmt_f64(b.mean_empirical_interference),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Largest per-bin `|mean_snir - target| / target`.
    pub fn max_snir_deviation(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| (b.mean_snir - self.target_snir).abs() / self.target_snir)
            .fold(0.0, f64::max)
    }

    /// Largest per-bin relative gap between measured and analytic interference.
    pub fn max_interference_deviation(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| (b.mean_interference - b.expected_interference).abs() / b.expected_interference)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DecodeRule;
    use crate::{solve_model, ChannelParams, SicModel};

    fn small(sic: SicModel, slots: usize) -> (SystemConfig, PowerModel) {
        let model = solve_model(sic, ChannelParams::new(1.0, 1.0, 4.0).unwrap()).unwrap();
        let cfg = SystemConfig::for_model(&model, 32, 4, slots, DecodeRule::Genie, 17);
        (cfg, model)
    }

    #[test]
    fn counts_sum_to_all_users() {
        let (cfg, model) = small(SicModel::Perfect, 12);
        let stats = run_campaign(&cfg, &model).unwrap();
        let total: u64 = stats.bins.iter().map(|b| b.count).sum();
        assert_eq!(total, (cfg.users_per_slot * cfg.slots) as u64);
        assert_eq!(stats.bins.len(), 20);
        assert!(stats.bins.iter().all(|b| b.var_snir >= 0.0 && b.var_interference >= 0.0));
        assert_eq!(stats.mean_decoded_fraction, 1.0);
    }

    #[test]
    fn deterministic_across_runs_and_thread_counts() {
        let (cfg, model) = small(SicModel::ConstantResidual { epsilon: 0.5 }, 16);
        let a = run_campaign(&cfg, &model).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let b = pool.install(|| run_campaign(&cfg, &model)).unwrap();
            assert_eq!(a.to_csv_string(), b.to_csv_string());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_load_mismatch_and_zero_slots() {
        let (mut cfg, model) = small(SicModel::Perfect, 4);
        cfg.users_per_slot += 3;
        assert!(matches!(run_campaign(&cfg, &model), Err(Error::Config(_))));
        let (mut cfg, model) = small(SicModel::Perfect, 4);
        cfg.slots = 0;
        assert!(matches!(run_campaign(&cfg, &model), Err(Error::Config(_))));
    }

    #[test]
    fn csv_has_header_and_one_row_per_bin() {
        let (cfg, model) = small(SicModel::Perfect, 2);
        let csv = run_campaign(&cfg, &model).unwrap().to_csv_string();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 21);
        assert!(lines[0].starts_with("bin,lower,upper"));
        assert_eq!(lines[1].split(',').count(), 12);
    }
}
