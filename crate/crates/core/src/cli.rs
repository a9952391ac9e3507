//! Command-line front end.
//!
//! Every power-valued flag takes linear units; each has a `-db` twin in
//! decibels. Values may also come from a flat `key = value` file passed with
//! `--config`, whose keys are the long flag names (`pmax`, `target-snir`). Flags win
//! over the file.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::experiments::{
    sweep, sweep_csv_string, McOverrides, SweepSpec, SweptParameter, DEFAULT_GRID_POINTS,
    DEFAULT_SEED,
};
use crate::power_model::{solve_model, ChannelParams, DbValue, PowerModel, SicModel};
use crate::sim::{fmt_f64, run_campaign, slot_rng, DecodeRule, SystemConfig, DEFAULT_BINS};
use crate::validate::run_validation;

/// Directory that relative `--output` paths are resolved against.
pub const OUTPUT_DIR_ENV: &str = "SSA_SIC_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ssa-sic", version, about = "Power control for spread-spectrum Aloha with SIC")]
struct Cli {
    /// Flat key = value file supplying defaults for any flag
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for Monte Carlo work (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for pmin and the load beta and print them
    Analyze {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Also print a pdf table with this many rows over [pmin, pmax]
        #[arg(long, value_name = "ROWS")]
        table: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Draw transmit powers, one per line
    Sample {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Number of draws
        #[arg(long, value_name = "N")]
        count: Option<usize>,
        /// Print powers in dB instead of linear units
        #[arg(long)]
        db: bool,
        /// RNG seed [default: 1592598550]
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a Monte Carlo campaign and write per-bin statistics as CSV
    Simulate {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Equal-probability power bins
        #[arg(long, value_name = "N")]
        bins: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sweep alpha or epsilon and write the load curve as CSV
    Sweep {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Swept parameter
        #[arg(long, value_name = "alpha|epsilon")]
        param: Option<String>,
        /// Comma-separated grid values (alpha is a fraction, epsilon is linear power)
        #[arg(long, value_name = "V1,V2,...")]
        grid: Option<String>,
        /// Points in the default grid when --grid is absent
        #[arg(long, value_name = "N")]
        points: Option<usize>,
        /// Run a campaign at every grid point
        #[arg(long)]
        mc: bool,
        #[command(flatten)]
        mc_args: McArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the property suite; exits 3 on the first failing check
    Validate {
        #[command(flatten)]
        channel: ChannelArgs,
        /// RNG seed for the statistical checks
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Perfect,
    FracResidual,
    ConstResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecodeKind {
    Genie,
    Threshold,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// SIC model [default: perfect]
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Residual fraction for frac-residual, in [0, 1) (dimensionless)
    #[arg(long, value_name = "FRACTION")]
    alpha: Option<f64>,
    /// Residual power for const-residual (linear)
    #[arg(long, value_name = "LINEAR", conflicts_with = "epsilon_db")]
    epsilon: Option<f64>,
    /// Residual power for const-residual (dB)
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    epsilon_db: Option<f64>,
    /// Receiver noise power sigma^2 (linear) [default: 1]
    #[arg(long, value_name = "LINEAR", conflicts_with = "noise_db")]
    noise: Option<f64>,
    /// Receiver noise power sigma^2 (dB)
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    noise_db: Option<f64>,
    /// Target SNIR gamma (linear ratio) [default: 1]
    #[arg(long, value_name = "LINEAR", conflicts_with = "target_snir_db")]
    target_snir: Option<f64>,
    /// Target SNIR gamma (dB)
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    target_snir_db: Option<f64>,
    /// Maximum received power (linear) [default: 4]
    #[arg(long, value_name = "LINEAR", conflicts_with = "pmax_db")]
    pmax: Option<f64>,
    /// Maximum received power (dB)
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pmax_db: Option<f64>,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Spreading factor n (chips per symbol) [default: 256]
    #[arg(long = "n", value_name = "CHIPS")]
    spreading_factor: Option<usize>,
    /// Packet length L (symbols) [default: 100]
    #[arg(long, value_name = "SYMBOLS")]
    packet_len: Option<usize>,
    /// Number of slots [default: 2000]
    #[arg(long, value_name = "N")]
    slots: Option<usize>,
    /// Decoding rule [default: genie]
    #[arg(long, value_enum)]
    decode: Option<DecodeKind>,
    /// SNIR threshold for --decode threshold (linear ratio) [default: 0.8 x target]
    #[arg(long, value_name = "LINEAR")]
    gamma_dec: Option<f64>,
    /// RNG seed [default: 1592598550]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write to this file instead of stdout; relative paths resolve against $SSA_SIC_OUTPUT_DIR when set
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse(_) => EXIT_USAGE,
            Error::Domain(_) | Error::Infeasible(_) | Error::Degenerate { .. } => EXIT_INFEASIBLE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Values read from `--config`.
#[derive(Debug, Default)]
struct FileValues(HashMap<String, String>);

const KNOWN_KEYS: &[&str] = &[
    "model", "alpha", "epsilon", "epsilon-db", "noise", "noise-db", "target-snir",
    "target-snir-db", "pmax", "pmax-db", "table", "count", "db", "n", "packet-len", "slots",
    "decode", "gamma-dec", "seed", "bins", "param", "grid", "points", "mc", "output", "threads",
];

impl FileValues {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> CliResult<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("config line {}: unknown key {key}", i + 1)));
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config: invalid value for {key}: {v}"))),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }

    fn choice<T: ValueEnum>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => T::from_str(v, true)
                .map(Some)
                .map_err(|_| CliError::usage(format!("config: invalid value for {key}: {v}"))),
        }
    }

    /// Linear value from the first of: linear flag, dB flag, file linear, file dB.
    fn power(&self, lin: Option<f64>, db: Option<f64>, key: &str) -> CliResult<Option<f64>> {
        if let Some(v) = lin {
            return Ok(Some(v));
        }
        if let Some(d) = db {
            return Ok(Some(DbValue(d).to_linear()));
        }
        if let Some(v) = self.get::<f64>(None, key)? {
            return Ok(Some(v));
        }
        Ok(self
            .get::<f64>(None, &format!("{key}-db"))?
            .map(|d| DbValue(d).to_linear()))
    }
}

fn resolve_channel(c: &ChannelArgs, file: &FileValues) -> CliResult<ChannelParams> {
    let noise = file.power(c.noise, c.noise_db, "noise")?.unwrap_or(1.0);
    let gamma = file.power(c.target_snir, c.target_snir_db, "target-snir")?.unwrap_or(1.0);
    let pmax = file.power(c.pmax, c.pmax_db, "pmax")?.unwrap_or(4.0);
    Ok(ChannelParams::new(noise, gamma, pmax)?)
}

fn resolve_sic(c: &ChannelArgs, file: &FileValues, pmax: f64) -> CliResult<SicModel> {
    let sic = match file.choice(c.model, "model")?.unwrap_or(ModelKind::Perfect) {
        ModelKind::Perfect => SicModel::Perfect,
        ModelKind::FracResidual => SicModel::FractionalResidual {
            alpha: file
                .get(c.alpha, "alpha")?
                .ok_or_else(|| CliError::usage("--alpha is required for --model frac-residual"))?,
        },
        ModelKind::ConstResidual => SicModel::ConstantResidual {
            epsilon: file
                .power(c.epsilon, c.epsilon_db, "epsilon")?
                .ok_or_else(|| CliError::usage("--epsilon is required for --model const-residual"))?,
        },
    };
    sic.validate(pmax)?;
    Ok(sic)
}

fn resolve_model(c: &ChannelArgs, file: &FileValues) -> CliResult<PowerModel> {
    let params = resolve_channel(c, file)?;
    let sic = resolve_sic(c, file, params.pmax())?;
    Ok(solve_model(sic, params)?)
}

fn resolve_mc(m: &McArgs, file: &FileValues, target: f64) -> CliResult<McOverrides> {
    let d = McOverrides::default();
    let decode_rule = match file.choice(m.decode, "decode")?.unwrap_or(DecodeKind::Genie) {
        DecodeKind::Genie => DecodeRule::Genie,
        DecodeKind::Threshold => DecodeRule::Threshold {
            gamma_dec: file.get(m.gamma_dec, "gamma-dec")?.unwrap_or(0.8 * target),
        },
    };
    let mc = McOverrides {
        spreading_factor: file.get(m.spreading_factor, "n")?.unwrap_or(d.spreading_factor),
        packet_len: file.get(m.packet_len, "packet-len")?.unwrap_or(d.packet_len),
        slots: file.get(m.slots, "slots")?.unwrap_or(d.slots),
        decode_rule,
        seed: file.get(m.seed, "seed")?.unwrap_or(DEFAULT_SEED),
    };
    if mc.slots == 0 {
        return Err(CliError::usage("--slots must be at least 1"));
    }
    if mc.spreading_factor < 2 {
        return Err(CliError::usage("--n must be at least 2"));
    }
    if mc.packet_len == 0 {
        return Err(CliError::usage("--packet-len must be at least 1"));
    }
    if let DecodeRule::Threshold { gamma_dec } = decode_rule {
        if !(gamma_dec.is_finite() && gamma_dec > 0.0) {
            return Err(CliError::usage("--gamma-dec must be positive"));
        }
    }
    Ok(mc)
}

fn resolve_output(out: &OutputArgs, file: &FileValues) -> CliResult<Option<PathBuf>> {
    let path: Option<PathBuf> = file.get(out.output.clone(), "output")?;
    Ok(path.map(|p| match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if p.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p,
    }))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, or to `stdout` when no path is given.
fn emit(path: Option<&Path>, contents: &str, stdout: &mut dyn Write) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::usage(format!("write failed: {e}"));
    match path {
        None => stdout.write_all(contents.as_bytes()).map_err(io_err),
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).map_err(io_err)?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
            tmp.write_all(contents.as_bytes()).map_err(io_err)?;
            tmp.as_file().sync_all().map_err(io_err)?;
            tmp.persist(path).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}

fn analyze(model: &PowerModel, table: Option<usize>) -> String {
    let p = model.params();
    let db = |x: f64| DbValue::from_linear(x).0;
    let mut s = String::new();
    let _ = writeln!(s, "model        {}", model.sic().name());
    match model.sic() {
        SicModel::Perfect => {}
        SicModel::FractionalResidual { alpha } => {
            let _ = writeln!(s, "alpha        {alpha}");
        }
        SicModel::ConstantResidual { epsilon } => {
            let _ = writeln!(s, "epsilon      {} ({:.6} dB)", fmt_f64(epsilon), db(epsilon));
        }
    }
    let _ = writeln!(s, "noise        {} ({:.6} dB)", fmt_f64(p.noise_power()), db(p.noise_power()));
    let _ = writeln!(s, "target_snir  {} ({:.6} dB)", fmt_f64(p.target_snir()), db(p.target_snir()));
    let _ = writeln!(s, "pmax         {} ({:.6} dB)", fmt_f64(p.pmax()), model.pmax_db());
    let _ = writeln!(s, "pmin         {} ({:.6} dB)", fmt_f64(model.pmin()), model.pmin_db());
    let _ = writeln!(s, "beta         {}", fmt_f64(model.beta()));
    let floor = p.target_snir() * p.noise_power();
    let _ = writeln!(
        s,
        "feasibility  target_snir * noise = {} <= pmax = {}",
        fmt_f64(floor),
        fmt_f64(p.pmax())
    );
    if model.is_degenerate() {
        let _ = writeln!(s, "note         epsilon = pmax: point mass at pmax, beta is the limiting value");
    }
    if let Some(rows) = table.filter(|&r| r > 0 && !model.is_degenerate()) {
        let _ = writeln!(s, "p,pdf,p_db,pdf_db");
        for i in 0..rows {
            let x = if rows == 1 {
                model.pmin()
            } else if i == rows - 1 {
                model.pmax()
            } else {
                model.pmin() + (model.pmax() - model.pmin()) * i as f64 / (rows - 1) as f64
            };
            let theta = db(x);
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_f64(x),
                fmt_f64(model.pdf(x)),
                fmt_f64(theta),
                fmt_f64(model.pdf_db(theta))
            );
        }
    }
    s
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("--grid: not a number: {v}")))
        })
        .collect()
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let file = FileValues::load(cli.config.as_deref())?;
    match cli.command {
        Command::Analyze { channel, table, out } => {
            let model = resolve_model(&channel, &file)?;
            let table = file.get(table, "table")?;
            let text = analyze(&model, table);
            emit(resolve_output(&out, &file)?.as_deref(), &text, stdout)?;
        }
        Command::Sample {
            channel,
            count,
            db,
            seed,
            out,
        } => {
            let model = resolve_model(&channel, &file)?;
            let count = file.get(count, "count")?.unwrap_or(10);
            let db = file.flag(db, "db")?;
            let seed = file.get(seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let path = resolve_output(&out, &file)?;
            let mut text = String::new();
            if count > 0 {
                let draws = model.sample(&mut slot_rng(seed, 0), count)?;
                for p in draws {
                    let v = if db { DbValue::from_linear(p).0 } else { p };
                    let _ = writeln!(text, "{}", fmt_f64(v));
                }
            }
            emit(path.as_deref(), &text, stdout)?;
        }
        Command::Simulate {
            channel,
            mc,
            bins,
            out,
        } => {
            let model = resolve_model(&channel, &file)?;
            let mc = resolve_mc(&mc, &file, model.params().target_snir())?;
            let mut cfg = SystemConfig::for_model(
                &model,
                mc.spreading_factor,
                mc.packet_len,
                mc.slots,
                mc.decode_rule,
                mc.seed,
            );
            cfg.bins = file.get(bins, "bins")?.unwrap_or(DEFAULT_BINS);
            if cfg.bins == 0 {
                return Err(CliError::usage("--bins must be at least 1"));
            }
            let path = resolve_output(&out, &file)?;
            let start = Instant::now();
            let stats = run_with_threads(cli.threads, &file, || run_campaign(&cfg, &model))??;
            emit(path.as_deref(), &stats.to_csv_string(), stdout)?;
            let _ = writeln!(
                stderr,
                "mean SNIR {:.6} (target {}), decoded fraction {:.6}, K = {}, {} slots, wall time {:.3} s",
                stats.mean_snir,
                model.params().target_snir(),
                stats.mean_decoded_fraction,
                stats.users_per_slot,
                stats.slots,
                start.elapsed().as_secs_f64()
            );
        }
        Command::Sweep {
            channel,
            param,
            grid,
            points,
            mc,
            mc_args,
            out,
        } => {
            let fixed = resolve_channel(&channel, &file)?;
            let name: String = file.get(param, "param")?.unwrap_or_else(|| "alpha".into());
            let parameter = SweptParameter::parse(&name)
                .ok_or_else(|| CliError::usage(format!("--param must be alpha or epsilon, got {name}")))?;
            let grid = match file.get::<String>(grid, "grid")? {
                Some(g) => parse_grid(&g)?,
                None => {
                    let points = file.get(points, "points")?.unwrap_or(DEFAULT_GRID_POINTS);
                    parameter.default_grid(fixed.pmax(), points)
                }
            };
            let with_mc = file.flag(mc, "mc")?;
            let spec = SweepSpec {
                parameter,
                grid,
                fixed,
                mc: if with_mc {
                    Some(resolve_mc(&mc_args, &file, fixed.target_snir())?)
                } else {
                    None
                },
            };
            spec.validate()?;
            let path = resolve_output(&out, &file)?;
            let records = run_with_threads(cli.threads, &file, || sweep(&spec))??;
            emit(path.as_deref(), &sweep_csv_string(&records, with_mc), stdout)?;
        }
        Command::Validate { channel, seed } => {
            let params = resolve_channel(&channel, &file)?;
            let seed = file.get(seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let report = run_with_threads(cli.threads, &file, || run_validation(params, seed))?;
            for c in &report.checks {
                let _ = writeln!(
                    stdout,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if let Some(c) = report.first_failure() {
                let _ = writeln!(stderr, "validation failed: {}: {}", c.name, c.detail);
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(EXIT_OK)
}

fn run_with_threads<T: Send>(
    threads: Option<usize>,
    file: &FileValues,
    f: impl FnOnce() -> T + Send,
) -> CliResult<T> {
    match file.get(threads, "threads")? {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}"))),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
