//! Load sweeps over the residual-cancellation parameters and flat-SNIR
//! reports comparing the analytic model with Monte Carlo campaigns.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::power_model::{solve_model, ChannelParams, PowerModel, SicModel};
use crate::sim::{design_users, fmt_f64, run_campaign, AggregateStats, DecodeRule, SystemConfig};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed_2016;

/// Points in the default figure grids.
pub const DEFAULT_GRID_POINTS: usize = 50;

/// Largest alpha in the default alpha grid.
pub const DEFAULT_ALPHA_MAX: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParameter {
    Alpha,
    Epsilon,
}

impl SweptParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweptParameter::Alpha => "alpha",
            SweptParameter::Epsilon => "epsilon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alpha" => Some(SweptParameter::Alpha),
            "epsilon" => Some(SweptParameter::Epsilon),
            _ => None,
        }
    }

    pub fn sic(&self, value: f64) -> SicModel {
        match self {
            SweptParameter::Alpha => SicModel::FractionalResidual { alpha: value },
            SweptParameter::Epsilon => SicModel::ConstantResidual { epsilon: value },
        }
    }

    /// Evenly spaced grid over `[0, 0.98]` for alpha or `[0, pmax]` for epsilon.
    pub fn default_grid(&self, pmax: f64, points: usize) -> Vec<f64> {
        let hi = match self {
            SweptParameter::Alpha => DEFAULT_ALPHA_MAX,
            SweptParameter::Epsilon => pmax,
        };
        linspace(0.0, hi, points)
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i == points - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Monte Carlo settings attached to each sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOverrides {
    pub spreading_factor: usize,
    pub packet_len: usize,
    pub slots: usize,
    pub decode_rule: DecodeRule,
    pub seed: u64,
}

impl Default for McOverrides {
    fn default() -> Self {
        Self {
            spreading_factor: 256,
            packet_len: 100,
            slots: 2000,
            decode_rule: DecodeRule::Genie,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub fixed: ChannelParams,
    /// Run a campaign at every grid point when set.
    pub mc: Option<McOverrides>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(config("sweep grid is empty"));
        }
        if let Some(w) = self.grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(config(format!(
                "sweep grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for &v in &self.grid {
            let ok = match self.parameter {
                SweptParameter::Alpha => v.is_finite() && (0.0..1.0).contains(&v),
                SweptParameter::Epsilon => v.is_finite() && v >= 0.0 && v <= self.fixed.pmax(),
            };
            if !ok {
                return Err(config(format!(
                    "{} = {v} outside its valid range",
                    self.parameter.name()
                )));
            }
        }
        Ok(())
    }

    fn spreading_factor(&self) -> usize {
        self.mc.map_or(McOverrides::default().spreading_factor, |m| m.spreading_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McColumns {
    pub mean_snir: f64,
    pub snir_rms: f64,
    pub decoded_fraction: f64,
}

/// One grid point. Analytic columns are `None` when the point is infeasible;
/// `error` then carries the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub parameter: SweptParameter,
    pub value: f64,
    pub pmin: Option<f64>,
    pub beta: Option<f64>,
    pub beta_eff: Option<f64>,
    pub mc: Option<McColumns>,
    pub error: Option<String>,
}

/// Solves every grid point (and runs a campaign per point when MC is
/// enabled). Records come back in grid order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let n = spec.spreading_factor();
    Ok(spec
        .grid
        .par_iter()
        .map(|&value| sweep_point(spec, value, n))
        .collect())
}

fn sweep_point(spec: &SweepSpec, value: f64, n: usize) -> SweepRecord {
    let mut record = SweepRecord {
        parameter: spec.parameter,
        value,
        pmin: None,
        beta: None,
        beta_eff: None,
        mc: None,
        error: None,
    };
    let model = match solve_model(spec.parameter.sic(value), spec.fixed) {
        Ok(m) => m,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.pmin = Some(model.pmin());
    record.beta = Some(model.beta());
    record.beta_eff = Some((design_users(model.beta(), n) - 1) as f64 / n as f64);
    if let Some(mc) = spec.mc {
        let cfg = SystemConfig::for_model(
            &model,
            mc.spreading_factor,
            mc.packet_len,
            mc.slots,
            mc.decode_rule,
            mc.seed,
        );
        match run_campaign(&cfg, &model) {
            Ok(stats) => {
                record.mc = Some(McColumns {
                    mean_snir: stats.mean_snir,
                    snir_rms: stats.snir_rms_error,
                    decoded_fraction: stats.mean_decoded_fraction,
                })
            }
            Err(e) => record.error = Some(e.to_string()),
        }
    }
    record
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes sweep records as CSV:
/// `param,value,pmin,beta,beta_eff[,mc_mean_snir,mc_snir_rms,mc_decoded_frac],error`.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], with_mc: bool, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec!["param", "value", "pmin", "beta", "beta_eff"];
    if with_mc {
        header.extend(["mc_mean_snir", "mc_snir_rms", "mc_decoded_frac"]);
    }
    header.push("error");
    out.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.parameter.name().to_string(),
            fmt_f64(r.value),
            fmt_opt(r.pmin),
            fmt_opt(r.beta),
            fmt_opt(r.beta_eff),
        ];
        if with_mc {
            row.push(fmt_opt(r.mc.map(|m| m.mean_snir)));
            row.push(fmt_opt(r.mc.map(|m| m.snir_rms)));
            row.push(fmt_opt(r.mc.map(|m| m.decoded_fraction)));
        }
        row.push(r.error.clone().unwrap_or_default());
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn sweep_csv_string(records: &[SweepRecord], with_mc: bool) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(records, with_mc, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Reads back a CSV produced by [`write_sweep_csv`].
pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let with_mc = header.iter().any(|h| h == "mc_mean_snir");
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name}")))
    };
    let (ip, iv, imin, ib, ie, ierr) = (
        col("param")?,
        col("value")?,
        col("pmin")?,
        col("beta")?,
        col("beta_eff")?,
        col("error")?,
    );
    let mc_cols = if with_mc {
        Some((col("mc_mean_snir")?, col("mc_snir_rms")?, col("mc_decoded_frac")?))
    } else {
        None
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let opt = |i: usize| -> Result<Option<f64>> {
            let s = get(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
        };
        let parameter = SweptParameter::parse(get(ip))
            .ok_or_else(|| Error::Parse(format!("unknown parameter {:?}", get(ip))))?;
        let value = opt(iv)?.ok_or_else(|| Error::Parse("missing value".into()))?;
        let mc = match mc_cols {
            Some((a, b, c)) => match (opt(a)?, opt(b)?, opt(c)?) {
                (Some(mean_snir), Some(snir_rms), Some(decoded_fraction)) => Some(McColumns {
                    mean_snir,
                    snir_rms,
                    decoded_fraction,
                }),
                _ => None,
            },
            None => None,
        };
        let error = Some(get(ierr).to_string()).filter(|s| !s.is_empty());
        out.push(SweepRecord {
            parameter,
            value,
            pmin: opt(imin)?,
            beta: opt(ib)?,
            beta_eff: opt(ie)?,
            mc,
            error,
        });
    }
    Ok(out)
}

/// One power bin of a flat-SNIR report.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessRow {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub count: u64,
    pub analytic_snir: f64,
    pub mc_mean_snir: f64,
    /// `(mc - analytic) / analytic`.
    pub snir_deviation: f64,
    pub analytic_interference: f64,
    pub mc_interference: f64,
    pub interference_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub rows: Vec<FlatnessRow>,
    pub max_abs_snir_deviation: f64,
    pub max_abs_interference_deviation: f64,
    pub stats: AggregateStats,
}

/// Runs a campaign and lays the per-bin SNIR next to the design target.
pub fn flatness_report(model: &PowerModel, mc_config: &SystemConfig) -> Result<FlatnessReport> {
    let stats = run_campaign(mc_config, model)?;
    let target = model.params().target_snir();
    let rows: Vec<FlatnessRow> = stats
        .bins
        .iter()
        .map(|b| {
            let int_dev = if b.expected_interference == 0.0 {
                b.mean_interference
            } else {
                (b.mean_interference - b.expected_interference) / b.expected_interference
            };
            FlatnessRow {
                lower: b.lower,
                upper: b.upper,
                center: b.center,
                count: b.count,
                analytic_snir: target,
                mc_mean_snir: b.mean_snir,
                snir_deviation: (b.mean_snir - target) / target,
                analytic_interference: b.expected_interference,
                mc_interference: b.mean_interference,
                interference_deviation: int_dev,
            }
        })
        .collect();
    let max_abs_snir_deviation = rows.iter().map(|r| r.snir_deviation.abs()).fold(0.0, f64::max);
    let max_abs_interference_deviation = rows
        .iter()
        .map(|r| r.interference_deviation.abs())
        .fold(0.0, f64::max);
    Ok(FlatnessReport {
        rows,
        max_abs_snir_deviation,
        max_abs_interference_deviation,
        stats,
    })
}

impl FlatnessReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let f = fmt_f64;
        writeln!(
            w,
            "bin,lower,upper,center,count,analytic_snir,mc_mean_snir,snir_deviation,analytic_interference,mc_interference,interference_deviation"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{},{},{}",
                f(r.lower),
                f(r.upper),
                f(r.center),
                r.count,
                f(r.analytic_snir),
                f(r.mc_mean_snir),
                f(r.snir_deviation),
                f(r.analytic_interference),
                f(r.mc_interference),
                f(r.interference_deviation)
            )?;
        }
        writeln!(w, "# max_abs_snir_deviation,{}", f(self.max_abs_snir_deviation))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}
