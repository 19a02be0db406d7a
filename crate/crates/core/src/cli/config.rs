//! Experiment manifests: a TOML file whose keys match the command-line
//! flags, with every key overridable from the command line.
//!
//! ```toml
//! [system]
//! m = 100            # or a list, e.g. [50, 100, 200, 400]
//! k = 10
//!
//! [link]
//! mod = "qpsk"       # or ["qpsk", "16qam"]
//! detector = "zf"    # or ["zf", "mmse"]
//! bits = [1, 2, 3, 4, "inf"]
//!
//! [run]
//! ebn0 = "-16:1:4"   # START:STEP:STOP, or an explicit list
//! channels = 100
//! vectors = 2000
//! seed = 2018
//! deterministic = true
//!
//! [metric]
//! target_ber = 1e-4
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::detector::DetectorKind;
use crate::modem::Modulation;
use crate::quantizer::Resolution;
use crate::simulator::{SimConfig, DEFAULT_REALIZATIONS, DEFAULT_SEED, DEFAULT_VECTORS};

use super::CliError;

pub const DEFAULT_GRID: &str = "-16:1:20";
pub const DEFAULT_TARGET_BER: f64 = 1e-4;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BitsValue {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridValue {
    Range(String),
    List(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    #[serde(alias = "m_antennas")]
    m: Option<OneOrMany<i64>>,
    #[serde(alias = "k_users")]
    k: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    #[serde(rename = "mod", alias = "modulation")]
    modulation: Option<OneOrMany<String>>,
    detector: Option<OneOrMany<String>>,
    #[serde(alias = "quantizer_bits")]
    bits: Option<OneOrMany<BitsValue>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(alias = "ebn0_grid_db")]
    ebn0: Option<GridValue>,
    #[serde(alias = "n_channel_realizations")]
    channels: Option<i64>,
    #[serde(alias = "n_vectors_per_realization")]
    vectors: Option<i64>,
    #[serde(alias = "master_seed")]
    seed: Option<u64>,
    deterministic: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSection {
    target_ber: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    link: LinkSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    metric: MetricSection,
}

/// Raw command-line overrides, still as text.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub detector: Option<String>,
    pub modulation: Option<String>,
    pub bits: Option<String>,
    pub m: Option<String>,
    pub k: Option<String>,
    pub ebn0: Option<String>,
    pub channels: Option<String>,
    pub vectors: Option<String>,
    pub seed: Option<String>,
    pub target_ber: Option<String>,
    pub deterministic: Option<String>,
}

/// A fully resolved experiment: the cartesian product of its list-valued
/// fields defines the curves to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub m_values: Vec<usize>,
    pub k_users: usize,
    pub modulations: Vec<Modulation>,
    pub detectors: Vec<DetectorKind>,
    pub bits: Vec<Resolution>,
    pub ebn0_grid_db: Vec<f64>,
    pub channels: usize,
    pub vectors: usize,
    pub seed: u64,
    pub target_ber: f64,
    pub deterministic: bool,
}

fn cfg_err(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {reason}"))
}

fn positive(field: &str, v: i64) -> Result<usize, CliError> {
    if v < 1 {
        return Err(cfg_err(field, format!("must be at least 1, got {v}")));
    }
    Ok(v as usize)
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Parses `START:STEP:STOP` (inclusive stop) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(cfg_err(
                "ebn0",
                format!("expected START:STEP:STOP, got `{s}`"),
            ));
        }
        let num = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| cfg_err("ebn0", format!("`{t}` is not a number")))
        };
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 {
            return Err(cfg_err("ebn0", "step must be positive"));
        }
        if stop < start {
            return Err(cfg_err("ebn0", "stop is below start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(cfg_err("ebn0", "grid has too many points"));
        }
        // round away accumulated binary error so values print cleanly
        return Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect());
    }
    split_list(s)
        .into_iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| cfg_err("ebn0", format!("`{t}` is not a number")))
        })
        .collect()
}

fn parse_bits_text(t: &str) -> Result<Resolution, CliError> {
    t.parse::<Resolution>().map_err(|e| cfg_err("bits", e))
}

fn parse_bool(field: &str, s: &str) -> Result<bool, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(cfg_err(field, format!("expected on/off, got `{other}`"))),
    }
}

fn parse_int(field: &str, s: &str) -> Result<i64, CliError> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| cfg_err(field, format!("`{s}` is not an integer")))
}

fn dedup_sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

impl Experiment {
    /// Loads `path` (if any) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Io(format!("cannot read config {}: {e}", p.display()))
                })?;
                parse_config_text(&text).map_err(|e| match e {
                    CliError::Config(msg) => CliError::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })?
            }
            None => ConfigFile::default(),
        };
        Self::resolve(file, overrides)
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        Self::resolve(parse_config_text(text)?, overrides)
    }

    fn resolve(file: ConfigFile, o: &Overrides) -> Result<Self, CliError> {
        let m_values: Vec<i64> = match &o.m {
            Some(s) => split_list(s)
                .into_iter()
                .map(|t| parse_int("m", t))
                .collect::<Result<_, _>>()?,
            None => file
                .system
                .m
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec![100]),
        };
        let k = match &o.k {
            Some(s) => parse_int("k", s)?,
            None => file.system.k.unwrap_or(10),
        };
        let modulations: Vec<String> = match &o.modulation {
            Some(s) => split_list(s).into_iter().map(String::from).collect(),
            None => file
                .link
                .modulation
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec!["qpsk".into()]),
        };
        let detectors: Vec<String> = match &o.detector {
            Some(s) => split_list(s).into_iter().map(String::from).collect(),
            None => file
                .link
                .detector
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec!["zf".into()]),
        };
        let bits: Vec<Resolution> = match &o.bits {
            Some(s) => split_list(s)
                .into_iter()
                .map(parse_bits_text)
                .collect::<Result<_, _>>()?,
            None => match file.link.bits {
                Some(v) => v
                    .into_vec()
                    .into_iter()
                    .map(|b| match b {
                        BitsValue::Int(i) => parse_bits_text(&i.to_string()),
                        BitsValue::Text(t) => parse_bits_text(&t),
                    })
                    .collect::<Result<_, _>>()?,
                None => vec![
                    Resolution::Finite(1),
                    Resolution::Finite(2),
                    Resolution::Finite(3),
                    Resolution::Finite(4),
                    Resolution::Infinite,
                ],
            },
        };
        let grid = match (&o.ebn0, file.run.ebn0) {
            (Some(s), _) => parse_grid(s)?,
            (None, Some(GridValue::Range(s))) => parse_grid(&s)?,
            (None, Some(GridValue::List(v))) => v,
            (None, None) => parse_grid(DEFAULT_GRID)?,
        };
        let channels = match &o.channels {
            Some(s) => parse_int("channels", s)?,
            None => file.run.channels.unwrap_or(DEFAULT_REALIZATIONS as i64),
        };
        let vectors = match &o.vectors {
            Some(s) => parse_int("vectors", s)?,
            None => file.run.vectors.unwrap_or(DEFAULT_VECTORS as i64),
        };
        let seed = match &o.seed {
            Some(s) => s
                .trim()
                .parse::<u64>()
                .map_err(|_| cfg_err("seed", format!("`{s}` is not a 64-bit unsigned integer")))?,
            None => file.run.seed.unwrap_or(DEFAULT_SEED),
        };
        let target_ber = match &o.target_ber {
            Some(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| cfg_err("target_ber", format!("`{s}` is not a number")))?,
            None => file.metric.target_ber.unwrap_or(DEFAULT_TARGET_BER),
        };
        let deterministic = match &o.deterministic {
            Some(s) => parse_bool("deterministic", s)?,
            None => file.run.deterministic.unwrap_or(true),
        };

        let k_users = positive("k", k)?;
        let m_values = m_values
            .into_iter()
            .map(|m| positive("m", m))
            .collect::<Result<Vec<_>, _>>()?;
        if m_values.is_empty() {
            return Err(cfg_err("m", "no values given"));
        }
        if let Some(&m) = m_values.iter().find(|&&m| m < k_users) {
            return Err(cfg_err(
                "m",
                format!("must be >= k (got m={m}, k={k_users})"),
            ));
        }
        let modulations = modulations
            .iter()
            .map(|s| s.parse::<Modulation>().map_err(|e| cfg_err("mod", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let detectors = detectors
            .iter()
            .map(|s| {
                s.parse::<DetectorKind>()
                    .map_err(|e| cfg_err("detector", e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if modulations.is_empty() {
            return Err(cfg_err("mod", "no values given"));
        }
        if detectors.is_empty() {
            return Err(cfg_err("detector", "no values given"));
        }
        if bits.is_empty() {
            return Err(cfg_err("bits", "no values given"));
        }
        if grid.is_empty() {
            return Err(cfg_err("ebn0", "grid is empty"));
        }
        if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
            return Err(cfg_err(
                "ebn0",
                format!("grid must be strictly ascending ({} then {})", w[0], w[1]),
            ));
        }
        if !(target_ber > 0.0 && target_ber < 1.0) {
            return Err(cfg_err(
                "target_ber",
                format!("must lie in (0, 1), got {target_ber}"),
            ));
        }

        Ok(Self {
            m_values: dedup_sorted(m_values),
            k_users,
            modulations: dedup_sorted(modulations),
            detectors: dedup_sorted(detectors),
            bits: dedup_sorted(bits),
            ebn0_grid_db: grid,
            channels: positive("channels", channels)?,
            vectors: positive("vectors", vectors)?,
            seed,
            target_ber,
            deterministic,
        })
    }

    /// Simulator config for one (M, modulation, detector) combination, with
    /// the first requested resolution.
    pub fn sim_config(
        &self,
        m: usize,
        modulation: Modulation,
        detector: DetectorKind,
    ) -> SimConfig {
        let mut cfg = SimConfig::new(
            m,
            self.k_users,
            modulation,
            detector,
            self.bits[0],
            self.ebn0_grid_db.clone(),
        )
        .with_budget(self.channels, self.vectors)
        .with_seed(self.seed);
        cfg.deterministic = self.deterministic;
        cfg
    }
}

fn parse_config_text(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}
