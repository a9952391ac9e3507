//! Property suite run by the `validate` command.

use std::f64::consts::{E, LN_10};

use crate::experiments::flatness_report;
use crate::lambert::lambert_w0;
use crate::power_model::{solve_model, ChannelParams, DbValue, PowerModel, SicModel};
use crate::quadrature::adaptive_simpson;
use crate::sim::{
    crosscorrelation_moments, run_campaign, run_sic, slot_rng, synthesize_slot, DecodeRule,
    SystemConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            detail,
        });
    }
}

fn models_for(params: ChannelParams) -> Vec<PowerModel> {
    [
        SicModel::Perfect,
        SicModel::FractionalResidual { alpha: 0.3 },
        SicModel::ConstantResidual {
            epsilon: 0.25 * params.pmax(),
        },
    ]
    .into_iter()
    .filter_map(|sic| solve_model(sic, params).ok())
    .collect()
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
}

/// Bisection on the constant-residual pmin condition.
fn bisect_pmin(eps: f64, params: ChannelParams) -> f64 {
    let g = params.target_snir();
    let floor = g * params.noise_power();
    let pmax = params.pmax();
    let f = |pmin: f64| pmin - floor - eps * ((pmax - eps) / (pmin - eps)).ln();
    let (mut lo, mut hi) = (eps, pmax);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Runs every analytic property on `params` plus two fixed parameter sets,
/// and a few small Monte Carlo checks seeded with `seed`.
pub fn run_validation(params: ChannelParams, seed: u64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut sets = vec![params];
    sets.extend(
        [(0.5, 2.0, 10.0), (2.0, 0.5, 3.0)]
            .into_iter()
            .filter_map(|(n, g, p)| ChannelParams::new(n, g, p).ok()),
    );
    let models: Vec<PowerModel> = sets.iter().flat_map(|&p| models_for(p)).collect();

    let worst = [0.0, 0.1, 1.0, E, 3.0, 10.0, 100.0]
        .iter()
        .map(|&x| {
            let w = lambert_w0(x).unwrap_or(f64::NAN);
            (w * w.exp() - x).abs() / x.max(1.0)
        })
        .fold(0.0, f64::max);
    report.push("lambert-w residual", worst <= 1e-12, format!("max scaled residual {worst:.3e}"));

    let worst = models
        .iter()
        .map(|m| (adaptive_simpson(|p| m.pdf(p), m.pmin(), m.pmax(), 1e-11) - 1.0).abs())
        .fold(0.0, f64::max);
    report.push("pdf normalization", worst <= 1e-9, format!("max |integral - 1| {worst:.3e}"));

    let worst = models
        .iter()
        .flat_map(|m| {
            (0..=100).map(move |i| {
                let u = i as f64 / 100.0;
                m.quantile(u).map(|p| (m.cdf(p) - u).abs()).unwrap_or(f64::INFINITY)
            })
        })
        .fold(0.0, f64::max);
    report.push("quantile/cdf round trip", worst <= 1e-10, format!("max error {worst:.3e}"));

    let worst = models
        .iter()
        .flat_map(|m| {
            let g = m.params().target_snir();
            grid(m.pmin(), m.pmax(), 1000).map(move |p| {
                m.analytic_snir(p)
                    .map(|s| (s - g).abs() / g)
                    .unwrap_or(f64::INFINITY)
            })
        })
        .fold(0.0, f64::max);
    report.push("flat analytic SNIR", worst <= 1e-9, format!("max relative deviation {worst:.3e}"));

    let worst = models
        .iter()
        .flat_map(|m| {
            grid(m.pmin(), m.pmax(), 7).map(move |p| {
                let below = adaptive_simpson(|q| q * m.pdf(q), m.pmin(), p, 1e-12);
                let above = match m.sic() {
                    SicModel::Perfect => 0.0,
                    SicModel::FractionalResidual { alpha } => {
                        alpha * adaptive_simpson(|q| q * m.pdf(q), p, m.pmax(), 1e-12)
                    }
                    SicModel::ConstantResidual { epsilon } => {
                        epsilon * adaptive_simpson(|q| m.pdf(q), p, m.pmax(), 1e-12)
                    }
                };
                let quad = 0.5 * m.beta() * (below + above);
                m.expected_interference(p)
                    .map(|c| (c - quad).abs())
                    .unwrap_or(f64::INFINITY)
            })
        })
        .fold(0.0, f64::max);
    report.push(
        "interference closed form vs quadrature",
        worst <= 1e-9,
        format!("max abs difference {worst:.3e}"),
    );

    let mut reductions_ok = true;
    for &p in &sets {
        let Ok(perfect) = solve_model(SicModel::Perfect, p) else {
            continue;
        };
        for sic in [
            SicModel::FractionalResidual { alpha: 0.0 },
            SicModel::ConstantResidual { epsilon: 0.0 },
        ] {
            let Ok(m) = solve_model(sic, p) else {
                reductions_ok = false;
                continue;
            };
            reductions_ok &= m.pmin() == perfect.pmin() && m.beta() == perfect.beta();
            for x in grid(perfect.pmin(), perfect.pmax(), 25) {
                reductions_ok &= m.pdf(x) == perfect.pdf(x)
                    && m.cdf(x) == perfect.cdf(x)
                    && m.expected_interference(x) == perfect.expected_interference(x);
            }
        }
    }
    report.push("zero-residual reductions", reductions_ok, "alpha = 0 and epsilon = 0 vs perfect".into());

    let mut monotone = true;
    for &p in &sets {
        let betas = |f: &dyn Fn(f64) -> SicModel, hi: f64| -> Vec<f64> {
            grid(0.0, hi, 100)
                .map(|v| solve_model(f(v), p).map(|m| m.beta()).unwrap_or(f64::NAN))
                .collect()
        };
        let a = betas(&|alpha| SicModel::FractionalResidual { alpha }, 0.99);
        let e = betas(&|epsilon| SicModel::ConstantResidual { epsilon }, p.pmax() - 1e-6);
        monotone &= a.windows(2).all(|w| w[1] < w[0]) && e.windows(2).all(|w| w[1] < w[0]);
    }
    report.push("load decreases with residual", monotone, "alpha and epsilon grids".into());

    let mut worst = 0.0_f64;
    for &p in &sets {
        for frac in [1e-3, 0.1, 0.5, 0.9, 0.999] {
            let eps = frac * p.pmax();
            match solve_model(SicModel::ConstantResidual { epsilon: eps }, p) {
                Ok(m) => {
                    let oracle = bisect_pmin(eps, p);
                    worst = worst.max((m.pmin() - oracle).abs() / oracle);
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    report.push(
        "constant-residual solver vs bisection",
        worst <= 1e-9,
        format!("max relative pmin error {worst:.3e}"),
    );

    let worst = models
        .iter()
        .flat_map(|m| {
            grid(m.pmin_db(), m.pmax_db(), 41).map(move |theta| {
                let p = DbValue(theta).to_linear();
                let lin = m.pdf(p) * p * LN_10 / 10.0;
                if lin == 0.0 {
                    0.0
                } else {
                    (m.pdf_db(theta) - lin).abs() / lin
                }
            })
        })
        .fold(0.0, f64::max);
    report.push("dB change of variables", worst <= 1e-12, format!("max relative error {worst:.3e}"));

    if let Ok(m) = solve_model(SicModel::Perfect, params) {
        let n = 100_000;
        let mut rng = slot_rng(seed, 0);
        let mut xs = m.sample(&mut rng, n).unwrap_or_default();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = m.cdf(x);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        report.push("sampling vs cdf (KS)", xs.len() == n && ks < 0.01, format!("KS distance {ks:.4}"));
    }

    let mom = crosscorrelation_moments(256, 100_000, seed);
    let r2 = mom.second_moment * 256.0;
    let r2p = mom.phased_second_moment * 512.0;
    report.push(
        "crosscorrelation moments",
        (r2 - 1.0).abs() < 0.02 && (r2p - 1.0).abs() < 0.03,
        format!("n E[rho^2] = {r2:.4}, 2n E[Re(e^jphi rho)^2] = {r2p:.4}"),
    );

    if let Ok(model) = solve_model(SicModel::Perfect, params) {
        let cfg = SystemConfig::for_model(&model, 32, 8, 1, DecodeRule::Genie, seed);
        let exact = synthesize_slot(&cfg, &model, &mut slot_rng(seed, 0))
            .map(|slot| {
                let t = run_sic(&slot, &cfg);
                let noise = slot.noise.energy();
                (t.final_energy - noise).abs() / noise
            })
            .unwrap_or(f64::INFINITY);
        report.push("perfect cancellation exactness", exact <= 1e-9, format!("relative residual {exact:.3e}"));

        let cfg = SystemConfig::for_model(&model, 32, 4, 24, DecodeRule::Genie, seed);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .ok()
            .and_then(|p| p.install(|| run_campaign(&cfg, &model)).ok());
        let two = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .ok()
            .and_then(|p| p.install(|| run_campaign(&cfg, &model)).ok());
        let same = one.is_some() && one == two;
        report.push("campaign determinism across threads", same, "1 vs 2 workers".into());

        let cfg = SystemConfig::for_model(&model, 64, 2, 300, DecodeRule::Genie, seed);
        match flatness_report(&model, &cfg) {
            Ok(rep) => report.push(
                "Monte Carlo SNIR flatness",
                rep.max_abs_snir_deviation < 0.05,
                format!("max per-bin deviation {:.4}", rep.max_abs_snir_deviation),
            ),
            Err(e) => report.push("Monte Carlo SNIR flatness", false, e.to_string()),
        }
    }

    report
}
