use std::f64::consts::TAU;

use rand::Rng;

use super::rng::slot_rng;
use super::slot::Signature;

/// Sample moments of the crosscorrelation between two independent random
/// signatures, with and without a uniform relative phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCorrMoments {
    pub draws: usize,
    /// Mean of `rho`.
    pub mean: f64,
    /// Sample standard deviation of `rho`.
    pub std_dev: f64,
    /// Mean of `rho^2`; tends to `1/n`.
    pub second_moment: f64,
    /// Mean of `Re(e^{j phi} rho)`.
    pub phased_mean: f64,
    /// Mean of `Re(e^{j phi} rho)^2`; tends to `1/(2n)`.
    pub phased_second_moment: f64,
}

/// Draws `draws` fresh signature pairs and phases of length `n`.
pub fn crosscorrelation_moments(n: usize, draws: usize, seed: u64) -> CrossCorrMoments {
    let mut rng = slot_rng(seed, u64::MAX);
    let (mut s1, mut s2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let a = Signature::random(n, &mut rng);
        let b = Signature::random(n, &mut rng);
        let phi = rng.random::<f64>() * TAU;
        let rho = a.crosscorrelation(&b);
        let x = rho * phi.cos();
        s1 += rho;
        s2 += rho * rho;
        p1 += x;
        p2 += x * x;
    }
    let d = draws as f64;
    let mean = s1 / d;
    let var = ((s2 - d * mean * mean) / (d - 1.0)).max(0.0);
    CrossCorrMoments {
        draws,
        mean,
        std_dev: var.sqrt(),
        second_moment: s2 / d,
        phased_mean: p1 / d,
        phased_second_moment: p2 / d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_at_n256() {
        let m = crosscorrelation_moments(256, 10_000, 1);
        let n = 256.0;
        assert!(m.mean.abs() < 3.0 * m.std_dev / (m.draws as f64).sqrt());
        assert!((m.second_moment * n - 1.0).abs() < 0.02, "{}", m.second_moment * n);
        assert!(
            (m.phased_second_moment * 2.0 * n - 1.0).abs() < 0.03,
            "{}",
            m.phased_second_moment * 2.0 * n
        );
    }
}
