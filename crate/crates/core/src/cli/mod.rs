//! Command-line front end: `sweep`, `degradation`, `mscale` and `plot`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime or numerical
//! error, 3 I/O error.

pub mod config;
pub mod svg;
pub mod table;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::detector::DetectorKind;
use crate::modem::Modulation;
use crate::quantizer::Resolution;
use crate::simulator::{self, BerCurve, SimError};

pub use config::{Experiment, Overrides};
use table::{DegradationRow, SweepRow, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { field, reason } => {
                CliError::Config(format!("field `{field}`: {reason}"))
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mimo-adc",
    version,
    about = "BER of uplink massive MIMO with low-resolution ADCs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER versus Eb/N0 for every configured curve.
    Sweep(RunArgs),
    /// Extra Eb/N0 needed at the target BER relative to full precision.
    Degradation(RunArgs),
    /// Degradation as a function of the number of BS antennas.
    Mscale(RunArgs),
    /// Render a sweep or degradation CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// zf or mmse (comma-separated for several).
    #[arg(long)]
    pub detector: Option<String>,
    /// qpsk or 16qam (comma-separated for several).
    #[arg(long = "mod")]
    pub modulation: Option<String>,
    /// ADC resolutions, e.g. 1,2,3,4,inf.
    #[arg(long)]
    pub bits: Option<String>,
    /// BS antennas (comma-separated for several).
    #[arg(long)]
    pub m: Option<String>,
    /// Users.
    #[arg(long)]
    pub k: Option<String>,
    /// Eb/N0 grid in dB as START:STEP:STOP or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub ebn0: Option<String>,
    /// Channel realizations per point.
    #[arg(long)]
    pub channels: Option<String>,
    /// Symbol vectors per realization.
    #[arg(long)]
    pub vectors: Option<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Target BER for degradation.
    #[arg(long = "target-ber")]
    pub target_ber: Option<String>,
    /// on: fixed budgets; off: allow early stop at 2000 errors.
    #[arg(long)]
    pub deterministic: Option<String>,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            detector: self.detector.clone(),
            modulation: self.modulation.clone(),
            bits: self.bits.clone(),
            m: self.m.clone(),
            k: self.k.clone(),
            ebn0: self.ebn0.clone(),
            channels: self.channels.clone(),
            vectors: self.vectors.clone(),
            seed: self.seed.clone(),
            target_ber: self.target_ber.clone(),
            deterministic: self.deterministic.clone(),
        }
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        Experiment::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV produced by sweep, degradation or mscale.
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Help and version requests exit 0.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(args) => {
            let exp = args.experiment()?;
            let path = cmd_sweep(&exp, &args.out)?;
            println!("wrote {}", path.display());
        }
        Command::Degradation(args) => {
            let exp = args.experiment()?;
            let (rows_path, curves_path) = cmd_degradation(&exp, &args.out, "degradation")?;
            println!(
                "wrote {} and {}",
                rows_path.display(),
                curves_path.display()
            );
        }
        Command::Mscale(args) => {
            let exp = args.experiment()?;
            let (rows_path, curves_path) = cmd_degradation(&exp, &args.out, "mscale")?;
            println!(
                "wrote {} and {}",
                rows_path.display(),
                curves_path.display()
            );
        }
        Command::Plot(args) => {
            let path = cmd_plot(&args.input, &args.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Runs every (modulation, detector, M) combination with all requested
/// resolutions sharing one set of random streams.
pub fn run_curves(exp: &Experiment, bits: &[Resolution]) -> Result<Vec<BerCurve>, CliError> {
    let mut curves = Vec::new();
    for &modulation in &exp.modulations {
        for &detector in &exp.detectors {
            for &m in &exp.m_values {
                let cfg = exp.sim_config(m, modulation, detector);
                curves.extend(simulator::run_family(&cfg, bits)?);
            }
        }
    }
    Ok(curves)
}

fn sweep_csv(curves: &[BerCurve]) -> Result<Vec<u8>, CliError> {
    let rows: Vec<SweepRow> = curves.iter().flat_map(table::sweep_rows).collect();
    let mut buf = Vec::new();
    table::write_sweep(&mut buf, &rows)?;
    Ok(buf)
}

/// Writes `sweep.csv` and returns its path.
pub fn cmd_sweep(exp: &Experiment, out: &Path) -> Result<PathBuf, CliError> {
    let curves = run_curves(exp, &exp.bits)?;
    for c in &curves {
        print!("{c}");
    }
    let bytes = sweep_csv(&curves)?;
    ensure_dir(out)?;
    let path = out.join("sweep.csv");
    write_file(&path, &bytes)?;
    Ok(path)
}

/// Degradation rows for a set of curves, each measured against the
/// full-precision curve of the same (modulation, detector, M, K).
pub fn degradation_rows(
    curves: &[BerCurve],
    target_ber: f64,
) -> Result<Vec<DegradationRow>, CliError> {
    let key = |c: &BerCurve| {
        (
            c.config.modulation,
            c.config.detector,
            c.config.m_antennas,
            c.config.k_users,
        )
    };
    let references: BTreeMap<_, &BerCurve> = curves
        .iter()
        .filter(|c| c.config.quantizer_bits.is_infinite())
        .map(|c| (key(c), c))
        .collect();
    let mut rows = Vec::new();
    for c in curves {
        let reference = references
            .get(&key(c))
            .ok_or_else(|| CliError::Runtime("missing full-precision reference curve".into()))?;
        let degradation_db = match simulator::ber_degradation(c, reference, target_ber) {
            Ok(d) => Some(d),
            Err(e) => {
                println!(
                    "  {} {} M={} bits={}: {e}",
                    c.config.modulation,
                    c.config.detector,
                    c.config.m_antennas,
                    c.config.quantizer_bits
                );
                None
            }
        };
        rows.push(DegradationRow {
            modulation: c.config.modulation,
            detector: c.config.detector,
            bits: c.config.quantizer_bits,
            m: c.config.m_antennas,
            k: c.config.k_users,
            target_ber,
            degradation_db,
        });
    }
    Ok(rows)
}

/// Runs the curves needed for a degradation table (adding the
/// full-precision reference when absent) and writes `<stem>.csv` plus the
/// underlying curves as `<stem>_curves.csv`.
pub fn cmd_degradation(
    exp: &Experiment,
    out: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf), CliError> {
    let mut bits = exp.bits.clone();
    if !bits.contains(&Resolution::Infinite) {
        bits.push(Resolution::Infinite);
    }
    let curves = run_curves(exp, &bits)?;
    let rows = degradation_rows(&curves, exp.target_ber)?;
    for r in &rows {
        match r.degradation_db {
            Some(d) => println!(
                "{} {} M={} bits={}: {d:+.2} dB",
                r.modulation, r.detector, r.m, r.bits
            ),
            None => println!(
                "{} {} M={} bits={}: not achieved",
                r.modulation, r.detector, r.m, r.bits
            ),
        }
    }
    let mut buf = Vec::new();
    table::write_degradation(&mut buf, &rows)?;
    let curve_bytes = sweep_csv(&curves)?;
    ensure_dir(out)?;
    let rows_path = out.join(format!("{stem}.csv"));
    let curves_path = out.join(format!("{stem}_curves.csv"));
    write_file(&rows_path, &buf)?;
    write_file(&curves_path, &curve_bytes)?;
    Ok((rows_path, curves_path))
}

fn sweep_chart(rows: &[SweepRow]) -> svg::LineChart {
    type CurveKey = (Modulation, DetectorKind, usize, usize, Resolution);
    let mut groups: BTreeMap<CurveKey, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.modulation, r.detector, r.m, r.k, r.bits))
            .or_default()
            .push((r.ebn0_db, r.ber));
    }
    let series = groups
        .into_iter()
        .map(|((modulation, detector, m, k, bits), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let bits = match bits {
                Resolution::Infinite => "full precision".to_string(),
                Resolution::Finite(b) => format!("{b}-bit"),
            };
            svg::Series {
                name: format!(
                    "{} {} M={m} K={k} {bits}",
                    modulation.as_str().to_uppercase(),
                    detector.as_str().to_uppercase()
                ),
                points,
            }
        })
        .collect();
    svg::LineChart {
        title: "BER versus Eb/N0".into(),
        x_label: "Eb/N0 (dB)".into(),
        y_label: "BER".into(),
        log_y: true,
        x_ticks: None,
        series,
    }
}

fn degradation_chart(rows: &[DegradationRow]) -> svg::LineChart {
    let distinct_m: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.m).collect();
    let by_m = distinct_m.len() > 1;
    let max_bits = rows
        .iter()
        .filter_map(|r| match r.bits {
            Resolution::Finite(b) => Some(b),
            Resolution::Infinite => None,
        })
        .max()
        .unwrap_or(0);
    let bits_x = |b: Resolution| match b {
        Resolution::Finite(b) => b as f64,
        Resolution::Infinite => max_bits as f64 + 1.0,
    };

    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let y = r.degradation_db.unwrap_or(f64::NAN);
        if by_m {
            let name = format!(
                "{} {} {}-bit",
                r.modulation.as_str().to_uppercase(),
                r.detector.as_str().to_uppercase(),
                r.bits
            );
            groups.entry(name).or_default().push((r.m as f64, y));
        } else {
            let name = format!(
                "{} {} M={}",
                r.modulation.as_str().to_uppercase(),
                r.detector.as_str().to_uppercase(),
                r.m
            );
            groups.entry(name).or_default().push((bits_x(r.bits), y));
        }
    }
    let series = groups
        .into_iter()
        .map(|(name, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            svg::Series { name, points }
        })
        .collect();

    let (x_label, x_ticks) = if by_m {
        (
            "BS antennas M".to_string(),
            Some(
                distinct_m
                    .iter()
                    .map(|&m| (m as f64, m.to_string()))
                    .collect(),
            ),
        )
    } else {
        let mut ticks: Vec<(f64, String)> =
            (1..=max_bits).map(|b| (b as f64, b.to_string())).collect();
        if rows.iter().any(|r| r.bits.is_infinite()) {
            ticks.push((max_bits as f64 + 1.0, "inf".into()));
        }
        ("ADC resolution (bits)".to_string(), Some(ticks))
    };
    svg::LineChart {
        title: format!("BER degradation at BER {:e}", rows[0].target_ber),
        x_label,
        y_label: "degradation (dB)".into(),
        log_y: false,
        x_ticks,
        series,
    }
}

/// Renders SVG text for a parsed table.
pub fn render_table(table: &Table) -> String {
    match table {
        Table::Sweep(rows) => sweep_chart(rows).render(),
        Table::Degradation(rows) => degradation_chart(rows).render(),
    }
}

/// Reads a result CSV and writes `<out>/<stem>.svg`.
pub fn cmd_plot(input: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let file = fs::File::open(input)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", input.display())))?;
    let table = table::read_table(file).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", input.display())),
        other => other,
    })?;
    let svg = render_table(&table);
    ensure_dir(out)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let path = out.join(format!("{stem}.svg"));
    write_file(&path, svg.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod e2e;
