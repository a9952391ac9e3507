use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::SystemConfig;
use crate::error::Result;
use crate::power_model::PowerModel;

/// Random antipodal spreading sequence, one bit per chip (set bit = +1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    bits: Vec<u64>,
    len: usize,
}

impl Signature {
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = len.div_ceil(64);
        let mut bits: Vec<u64> = (0..words).map(|_| rng.random()).collect();
        if !len.is_multiple_of(64) {
            bits[words - 1] &= (1u64 << (len % 64)) - 1;
        }
        Self { bits, len }
    }

    /// Builds a signature from chip signs (`true` = +1).
    pub fn from_signs(signs: &[bool]) -> Self {
        let mut bits = vec![0u64; signs.len().div_ceil(64)];
        for (c, &s) in signs.iter().enumerate() {
            if s {
                bits[c / 64] |= 1 << (c % 64);
            }
        }
        Self {
            bits,
            len: signs.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sign(&self, chip: usize) -> bool {
        self.bits[chip / 64] >> (chip % 64) & 1 == 1
    }

    /// Unit-energy chip values `±1/sqrt(n)`.
    pub fn chips(&self) -> Vec<f64> {
        let a = 1.0 / (self.len as f64).sqrt();
        (0..self.len)
            .map(|c| if self.sign(c) { a } else { -a })
            .collect()
    }

    /// Exact crosscorrelation `<s_i, s_j>` of two unit-energy signatures.
    pub fn crosscorrelation(&self, other: &Signature) -> f64 {
        debug_assert_eq!(self.len, other.len);
        let disagree: u32 = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        (self.len as f64 - 2.0 * disagree as f64) / self.len as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSignal {
    pub power: f64,
    /// Carrier phase in `[0, 2π)`.
    pub phase: f64,
    pub signature: Signature,
    /// Cached `signature.chips()`.
    pub chips: Vec<f64>,
    /// BPSK symbols, each `±1`.
    pub symbols: Vec<i8>,
}

impl UserSignal {
    pub fn new(power: f64, phase: f64, signature: Signature, symbols: Vec<i8>) -> Self {
        let chips = signature.chips();
        Self {
            power,
            phase,
            signature,
            chips,
            symbols,
        }
    }
}

/// Complex baseband samples for one slot, `packet_len` blocks of `n` chips.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    chips_per_symbol: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Waveform {
    pub fn zeros(chips_per_symbol: usize, symbols: usize) -> Self {
        Self {
            chips_per_symbol,
            re: vec![0.0; chips_per_symbol * symbols],
            im: vec![0.0; chips_per_symbol * symbols],
        }
    }

    pub fn symbols(&self) -> usize {
        self.re.len() / self.chips_per_symbol
    }

    /// Complex sample `(re, im)` at chip `c` of symbol `h`.
    pub fn sample(&self, h: usize, c: usize) -> (f64, f64) {
        let k = h * self.chips_per_symbol + c;
        (self.re[k], self.im[k])
    }

    /// Total energy `sum |y|^2` over the slot.
    pub fn energy(&self) -> f64 {
        dot(&self.re, &self.re) + dot(&self.im, &self.im)
    }

    /// Energy of symbol interval `h`.
    pub fn symbol_energy(&self, h: usize) -> f64 {
        let r = self.range(h);
        dot(&self.re[r.clone()], &self.re[r.clone()]) + dot(&self.im[r.clone()], &self.im[r])
    }

    fn range(&self, h: usize) -> std::ops::Range<usize> {
        h * self.chips_per_symbol..(h + 1) * self.chips_per_symbol
    }

    /// Adds `amplitude * e^{j phase} * b[h] * s` for every symbol `h`.
    pub fn add_user(&mut self, user: &UserSignal, amplitude: f64) {
        let (sin, cos) = user.phase.sin_cos();
        let (ar, ai) = (amplitude * cos, amplitude * sin);
        let n = self.chips_per_symbol;
        let blocks = self.re.chunks_exact_mut(n).zip(self.im.chunks_exact_mut(n));
        for ((re, im), &b) in blocks.zip(&user.symbols) {
            let b = f64::from(b);
            axpy(ar * b, &user.chips, re);
            axpy(ai * b, &user.chips, im);
        }
    }

    /// `<y_h, chips>` as `(re, im)`.
    pub fn correlate(&self, h: usize, chips: &[f64]) -> (f64, f64) {
        let r = self.range(h);
        (dot(&self.re[r.clone()], chips), dot(&self.im[r], chips))
    }

    fn add(&mut self, other: &Waveform) {
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += b;
        }
    }
}

/// Multi-lane dot product; the lane split lets the compiler vectorize
/// without reassociating floating point sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Everything random about one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRealization {
    pub spreading_factor: usize,
    pub packet_len: usize,
    pub users: Vec<UserSignal>,
    /// Complex circular Gaussian noise per chip, variance `noise/2` per
    /// dimension, so a unit-energy matched filter sees complex variance `noise`.
    pub noise: Waveform,
}

impl SlotRealization {
    /// Sum of all user waveforms without noise.
    pub fn signal(&self) -> Waveform {
        let mut w = Waveform::zeros(self.spreading_factor, self.packet_len);
        for u in &self.users {
            w.add_user(u, u.power.sqrt());
        }
        w
    }

    /// Received waveform: users plus noise.
    pub fn received(&self) -> Waveform {
        let mut w = self.signal();
        w.add(&self.noise);
        w
    }
}

/// Draws one slot. Draw order is fixed (per user: power, phase, chips,
/// symbols; then noise), so a seeded stream reproduces the slot exactly.
pub fn synthesize_slot<R: Rng + ?Sized>(
    config: &SystemConfig,
    model: &PowerModel,
    rng: &mut R,
) -> Result<SlotRealization> {
    config.validate()?;
    config.check_model(model)?;
    let n = config.spreading_factor;
    let len = config.packet_len;
    let mut users = Vec::with_capacity(config.users_per_slot);
    for _ in 0..config.users_per_slot {
        let power = model.sample_one(rng)?;
        let phase = rng.random::<f64>() * TAU;
        let signature = Signature::random(n, rng);
        let symbols = random_symbols(len, rng);
        users.push(UserSignal::new(power, phase, signature, symbols));
    }
    let std = (config.channel.noise_power() / 2.0).sqrt();
    let mut noise = Waveform::zeros(n, len);
    for (re, im) in noise.re.iter_mut().zip(noise.im.iter_mut()) {
        *re = std * rng.sample::<f64, _>(StandardNormal);
        *im = std * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(SlotRealization {
        spreading_factor: n,
        packet_len: len,
        users,
        noise,
    })
}

fn random_symbols<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<i8> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let word: u64 = rng.random();
        let take = (len - out.len()).min(64);
        out.extend((0..take).map(|k| if word >> k & 1 == 1 { 1 } else { -1 }));
    }
    out
}

/// Real matched-filter statistic `Re{e^{-j phi_i} <y_h, s_i>}` for user
/// `user` at symbol `h` of `waveform`.
pub fn matched_filter(slot: &SlotRealization, user: usize, h: usize, waveform: &Waveform) -> f64 {
    let u = &slot.users[user];
    let (re, im) = waveform.correlate(h, &u.chips);
    let (sin, cos) = u.phase.sin_cos();
    re * cos + im * sin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{slot_rng, DecodeRule};
    use crate::{solve_model, ChannelParams, SicModel};

    fn setup(n: usize, len: usize, k: usize, noise: f64) -> (SystemConfig, PowerModel) {
        let params = ChannelParams::new(noise, 1.0, 4.0).unwrap();
        let model = solve_model(SicModel::Perfect, params).unwrap();
        let mut cfg = SystemConfig::for_model(&model, n, len, 1, DecodeRule::Genie, 9);
        cfg.users_per_slot = k;
        (cfg, model)
    }

    #[test]
    fn single_user_signal_is_exact() {
        let (cfg, model) = setup(31, 5, 1, 1.0);
        let slot = synthesize_slot(&cfg, &model, &mut slot_rng(1, 0)).unwrap();
        let w = slot.signal();
        let u = &slot.users[0];
        let a = u.power.sqrt();
        let (sin, cos) = u.phase.sin_cos();
        for h in 0..5 {
            for c in 0..31 {
                let b = f64::from(u.symbols[h]);
                let (re, im) = w.sample(h, c);
                assert_eq!(re, a * cos * b * u.chips[c]);
                assert_eq!(im, a * sin * b * u.chips[c]);
            }
        }
    }

    #[test]
    fn signatures_have_unit_energy_and_users_carry_their_power() {
        let (cfg, model) = setup(37, 3, 6, 1.0);
        let slot = synthesize_slot(&cfg, &model, &mut slot_rng(2, 0)).unwrap();
        for u in &slot.users {
            let e: f64 = u.chips.iter().map(|c| c * c).sum();
            assert!((e - 1.0).abs() < 1e-12);
            let mut w = Waveform::zeros(37, 3);
            w.add_user(u, u.power.sqrt());
            for h in 0..3 {
                assert!((w.symbol_energy(h) - u.power).abs() <= 1e-10 * u.power);
            }
            assert!((0.0..TAU).contains(&u.phase));
            assert!(u.symbols.iter().all(|&b| b == 1 || b == -1));
        }
    }

    #[test]
    fn synthesis_is_deterministic_per_stream() {
        let (cfg, model) = setup(16, 4, 5, 1.0);
        let a = synthesize_slot(&cfg, &model, &mut slot_rng(3, 7)).unwrap();
        let b = synthesize_slot(&cfg, &model, &mut slot_rng(3, 7)).unwrap();
        let c = synthesize_slot(&cfg, &model, &mut slot_rng(3, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn crosscorrelation_matches_chip_dot_product() {
        let mut rng = slot_rng(4, 0);
        for n in [2, 7, 64, 100, 256] {
            let a = Signature::random(n, &mut rng);
            let b = Signature::random(n, &mut rng);
            let direct: f64 = a.chips().iter().zip(b.chips()).map(|(x, y)| x * y).sum();
            assert!((a.crosscorrelation(&b) - direct).abs() < 1e-12);
            assert_eq!(a.crosscorrelation(&a), 1.0);
        }
    }

    #[test]
    fn matched_filter_single_user_no_noise() {
        let (cfg, model) = setup(64, 6, 1, 1.0);
        let slot = synthesize_slot(&cfg, &model, &mut slot_rng(5, 0)).unwrap();
        let w = slot.signal();
        let u = &slot.users[0];
        for h in 0..6 {
            let y = matched_filter(&slot, 0, h, &w);
            assert!((y - u.power.sqrt() * f64::from(u.symbols[h])).abs() < 1e-12);
        }
    }

    #[test]
    fn matched_filter_two_user_oracle() {
        // Hand-built pair with known crosscorrelation 0.5 (n = 8, 2 disagreements).
        let s1 = Signature::from_signs(&[true, true, true, true, true, true, true, true]);
        let s2 = Signature::from_signs(&[true, true, true, true, true, true, false, false]);
        assert_eq!(s1.crosscorrelation(&s2), 0.5);
        let (p1, p2, phi1, phi2) = (3.0, 1.5, 0.7, 2.1);
        let u1 = UserSignal::new(p1, phi1, s1, vec![1, -1]);
        let u2 = UserSignal::new(p2, phi2, s2, vec![-1, -1]);
        let slot = SlotRealization {
            spreading_factor: 8,
            packet_len: 2,
            users: vec![u1, u2],
            noise: Waveform::zeros(8, 2),
        };
        let w = slot.received();
        for (h, (b1, b2)) in [(1.0, -1.0), (-1.0, -1.0)].into_iter().enumerate() {
            let expected = p2.sqrt() * b2 + p1.sqrt() * (phi1 - phi2).cos() * 0.5 * b1;
            assert!((matched_filter(&slot, 1, h, &w) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn filtered_noise_variance() {
        let (cfg, model) = setup(8, 100_000, 1, 2.0);
        let slot = synthesize_slot(&cfg, &model, &mut slot_rng(6, 0)).unwrap();
        let ys: Vec<f64> = (0..100_000)
            .map(|h| matched_filter(&slot, 0, h, &slot.noise))
            .collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        assert!((var / 1.0 - 1.0).abs() < 0.03, "var={var}");
    }

    #[test]
    fn rejects_mismatched_model() {
        let (mut cfg, model) = setup(8, 2, 2, 1.0);
        cfg.sic = SicModel::FractionalResidual { alpha: 0.2 };
        assert!(synthesize_slot(&cfg, &model, &mut slot_rng(0, 0)).is_err());
    }
}
