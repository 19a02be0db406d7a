//! Monte Carlo BER engine and the SNR-degradation metric.
//!
//! A point on a BER curve sums integer error counts over independent
//! channel realizations. Realization `i` of a run draws everything (channel,
//! bits, noise) from the stream derived from `(master_seed, i)`, in a fixed
//! order: the channel first, then per symbol vector the `K q` payload bits
//! followed by `M` complex noise samples. Nothing about the quantizer or the
//! Eb/N0 value changes what is drawn, so curves that differ only in ADC
//! resolution or SNR see identical channels, bits and (unit) noise.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{self, realization_stream, ChannelError, NoiseModel};
use crate::detector::{DetectionMatrix, DetectorError, DetectorKind};
use crate::modem::{Constellation, Modulation};
use crate::quantizer::{QuantizerError, QuantizerSpec, Resolution};

pub const DEFAULT_SEED: u64 = 2018;
pub const DEFAULT_REALIZATIONS: usize = 100;
pub const DEFAULT_VECTORS: usize = 2000;
/// Retries after a singular channel draw before a realization is aborted.
pub const MAX_SINGULAR_RETRIES: u32 = 3;
/// Error count at which a point may stop early when determinism is off.
pub const EARLY_STOP_ERRORS: u64 = 2000;
/// Realizations evaluated between early-stop checks.
const EARLY_STOP_BATCH: usize = 10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("realization {index} aborted after {attempts} singular channel draws: {source}")]
    RealizationAborted {
        index: usize,
        attempts: u32,
        #[source]
        source: DetectorError,
    },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// One experiment: a single (M, K, modulation, detector, resolution) over an
/// Eb/N0 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m_antennas: usize,
    pub k_users: usize,
    pub modulation: Modulation,
    pub detector: DetectorKind,
    pub quantizer_bits: Resolution,
    pub ebn0_grid_db: Vec<f64>,
    pub n_channel_realizations: usize,
    pub n_vectors_per_realization: usize,
    pub master_seed: u64,
    pub sigma_x2: f64,
    /// Fixed budgets when true; otherwise a point may stop once it has
    /// [`EARLY_STOP_ERRORS`] errors.
    pub deterministic: bool,
}

impl SimConfig {
    pub fn new(
        m_antennas: usize,
        k_users: usize,
        modulation: Modulation,
        detector: DetectorKind,
        quantizer_bits: Resolution,
        ebn0_grid_db: Vec<f64>,
    ) -> Self {
        Self {
            m_antennas,
            k_users,
            modulation,
            detector,
            quantizer_bits,
            ebn0_grid_db,
            n_channel_realizations: DEFAULT_REALIZATIONS,
            n_vectors_per_realization: DEFAULT_VECTORS,
            master_seed: DEFAULT_SEED,
            sigma_x2: 1.0,
            deterministic: true,
        }
    }

    pub fn with_budget(mut self, realizations: usize, vectors: usize) -> Self {
        self.n_channel_realizations = realizations;
        self.n_vectors_per_realization = vectors;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_bits(mut self, bits: Resolution) -> Self {
        self.quantizer_bits = bits;
        self
    }

    pub fn with_detector(mut self, detector: DetectorKind) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.ebn0_grid_db = grid;
        self
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Bits carried by one realization.
    pub fn bits_per_realization(&self) -> u64 {
        (self.n_vectors_per_realization * self.k_users * self.bits_per_symbol()) as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.k_users == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.m_antennas < self.k_users {
            return Err(invalid(
                "m",
                format!(
                    "must be >= k (got m={}, k={})",
                    self.m_antennas, self.k_users
                ),
            ));
        }
        if self.n_channel_realizations == 0 {
            return Err(invalid("channels", "must be at least 1"));
        }
        if self.n_vectors_per_realization == 0 {
            return Err(invalid("vectors", "must be at least 1"));
        }
        if self.ebn0_grid_db.is_empty() {
            return Err(invalid("ebn0", "grid is empty"));
        }
        if self.ebn0_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(invalid("ebn0", "grid contains a non-finite value"));
        }
        if let Some(w) = self.ebn0_grid_db.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(
                "ebn0",
                format!("grid must be strictly ascending ({} then {})", w[0], w[1]),
            ));
        }
        if !(self.sigma_x2 > 0.0 && self.sigma_x2.is_finite()) {
            return Err(invalid("sigma_x2", "must be positive"));
        }
        if let Resolution::Finite(b) = self.quantizer_bits {
            Resolution::finite(b).map_err(|e| invalid("bits", e.to_string()))?;
        }
        if self.n_channel_realizations as u64 >= 1 << 48 {
            return Err(invalid("channels", "too many realizations"));
        }
        Ok(())
    }
}

/// Integer outcome of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RealizationCounts {
    pub bit_errors: u64,
    pub bits: u64,
}

impl RealizationCounts {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
}

impl BerPoint {
    pub fn from_counts(ebn0_db: f64, counts: &[RealizationCounts]) -> Self {
        let bit_errors = counts.iter().map(|c| c.bit_errors).sum();
        let bits_total = counts.iter().map(|c| c.bits).sum();
        Self {
            ebn0_db,
            bit_errors,
            bits_total,
            ber: if bits_total == 0 {
                0.0
            } else {
                bit_errors as f64 / bits_total as f64
            },
        }
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn binomial_standard_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits_total as f64).sqrt()
    }
}

/// Standard error of the pooled BER from the spread of per-realization BERs.
///
/// Errors within a realization share one channel, so this is the honest
/// Monte Carlo error of the channel-averaged estimate. With a single
/// realization it falls back to the binomial formula.
pub fn batch_standard_error(counts: &[RealizationCounts]) -> f64 {
    let r = counts.len();
    if r < 2 {
        return BerPoint::from_counts(0.0, counts).binomial_standard_error();
    }
    let bers: Vec<f64> = counts.iter().map(RealizationCounts::ber).collect();
    sample_std(&bers) / (r as f64).sqrt()
}

/// Standard error of the difference of two BER estimates computed on the
/// same realizations (common random numbers).
pub fn paired_standard_error(a: &[RealizationCounts], b: &[RealizationCounts]) -> f64 {
    assert_eq!(
        a.len(),
        b.len(),
        "paired estimates need equal realization counts"
    );
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.ber() - y.ber()).collect();
    if diffs.len() < 2 {
        return 0.0;
    }
    sample_std(&diffs) / (diffs.len() as f64).sqrt()
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub config: SimConfig,
    pub points: Vec<BerPoint>,
}

/// A curve together with the per-realization counts behind every point.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailedCurve {
    pub curve: BerCurve,
    /// `realizations[p][i]` is realization `i` at grid point `p`.
    pub realizations: Vec<Vec<RealizationCounts>>,
}

/// Per-(Eb/N0) state shared by all realizations of a point.
struct PointSetup {
    sigma_n2: f64,
    noise: NoiseModel,
    quantizers: Vec<QuantizerSpec>,
}

impl PointSetup {
    fn new(cfg: &SimConfig, ebn0_db: f64, resolutions: &[Resolution]) -> Result<Self, SimError> {
        let sigma_n2 =
            channel::noise_variance_from_ebn0(ebn0_db, cfg.bits_per_symbol(), cfg.sigma_x2);
        let noise = NoiseModel::new(sigma_n2)?;
        let quantizers = resolutions
            .iter()
            .map(|&r| QuantizerSpec::for_receiver(r, cfg.k_users, cfg.sigma_x2, sigma_n2))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            sigma_n2,
            noise,
            quantizers,
        })
    }
}

/// Outcome of one realization for several resolutions at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizationOutcome {
    /// One entry per requested resolution, in request order.
    pub counts: Vec<RealizationCounts>,
    /// ChaCha word position of the stream once the realization finished.
    pub stream_words: u128,
    /// Singular-channel retries consumed.
    pub retries: u32,
}

fn simulate(
    cfg: &SimConfig,
    constellation: &Constellation,
    setup: &PointSetup,
    index: usize,
) -> Result<RealizationOutcome, SimError> {
    let (m, k) = (cfg.m_antennas, cfg.k_users);
    let q = constellation.bits_per_symbol();

    let mut attempt = 0;
    let (mut rng, h, detector) = loop {
        let mut rng = realization_stream(cfg.master_seed, index as u64, attempt);
        let h = channel::draw_channel(m, k, &mut rng)?;
        match DetectionMatrix::build(cfg.detector, &h, setup.sigma_n2, cfg.sigma_x2) {
            Ok(det) => break (rng, h, det),
            Err(DetectorError::SingularChannel(_)) if attempt < MAX_SINGULAR_RETRIES => {
                attempt += 1
            }
            Err(source @ DetectorError::SingularChannel(_)) => {
                return Err(SimError::RealizationAborted {
                    index,
                    attempts: attempt + 1,
                    source,
                })
            }
            Err(e) => return Err(e.into()),
        }
    };

    let n_res = setup.quantizers.len();
    let mut errors = vec![0u64; n_res];
    let words_per_vector = (k * q).div_ceil(64);
    let label_mask = (1u64 << q) - 1;
    let per_dim_std = setup.noise.per_dim_std();

    let mut labels = vec![0u32; k];
    let mut x = vec![Complex64::new(0.0, 0.0); k];
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    let mut n = vec![Complex64::new(0.0, 0.0); m];
    let mut r = vec![Complex64::new(0.0, 0.0); m];
    let mut x_hat = vec![Complex64::new(0.0, 0.0); k];

    for _ in 0..cfg.n_vectors_per_realization {
        // payload: K q bits packed LSB-first into whole 64-bit words
        let mut user = 0;
        for _ in 0..words_per_vector {
            let mut word: u64 = rng.random();
            let mut left = 64 / q;
            while left > 0 && user < k {
                labels[user] = (word & label_mask) as u32;
                word >>= q;
                left -= 1;
                user += 1;
            }
        }
        for (xs, &lab) in x.iter_mut().zip(&labels) {
            *xs = constellation.point_for_label(lab);
        }

        h.mul_vec_into(&x, &mut y);
        channel::fill_noise(&mut n, per_dim_std, &mut rng);
        for (ys, ns) in y.iter_mut().zip(&n) {
            *ys += ns;
        }

        for (quantizer, err) in setup.quantizers.iter().zip(errors.iter_mut()) {
            quantizer.apply_into(&y, &mut r);
            detector.detect_into(&r, &mut x_hat);
            for (&z, &lab) in x_hat.iter().zip(&labels) {
                *err += u64::from((constellation.decide_label(z) ^ lab).count_ones());
            }
        }
    }

    let bits = cfg.bits_per_realization();
    Ok(RealizationOutcome {
        counts: errors
            .into_iter()
            .map(|bit_errors| RealizationCounts { bit_errors, bits })
            .collect(),
        stream_words: rng.get_word_pos(),
        retries: attempt,
    })
}

fn check_index(cfg: &SimConfig, index: usize) -> Result<(), SimError> {
    if index >= cfg.n_channel_realizations {
        return Err(invalid(
            "channels",
            format!(
                "realization index {index} out of range for {} realizations",
                cfg.n_channel_realizations
            ),
        ));
    }
    Ok(())
}

/// Runs realization `index` at one Eb/N0 for several resolutions, sharing
/// the channel, detector, bits and noise across them.
pub fn run_realization_multi(
    cfg: &SimConfig,
    ebn0_db: f64,
    index: usize,
    resolutions: &[Resolution],
) -> Result<RealizationOutcome, SimError> {
    cfg.validate()?;
    check_index(cfg, index)?;
    let constellation = Constellation::new(cfg.modulation);
    let setup = PointSetup::new(cfg, ebn0_db, resolutions)?;
    simulate(cfg, &constellation, &setup, index)
}

/// Bit errors and bits of one realization for `cfg.quantizer_bits`.
pub fn run_realization(
    cfg: &SimConfig,
    ebn0_db: f64,
    index: usize,
) -> Result<RealizationCounts, SimError> {
    Ok(run_realization_multi(cfg, ebn0_db, index, &[cfg.quantizer_bits])?.counts[0])
}

/// Per-realization counts at one point, `[realization][resolution]`.
fn point_counts(
    cfg: &SimConfig,
    constellation: &Constellation,
    setup: &PointSetup,
) -> Result<Vec<Vec<RealizationCounts>>, SimError> {
    let total = cfg.n_channel_realizations;
    if cfg.deterministic {
        return (0..total)
            .into_par_iter()
            .map(|i| simulate(cfg, constellation, setup, i).map(|o| o.counts))
            .collect();
    }
    let n_res = setup.quantizers.len();
    let mut out: Vec<Vec<RealizationCounts>> = Vec::with_capacity(total);
    let mut start = 0;
    while start < total {
        let end = (start + EARLY_STOP_BATCH).min(total);
        let batch: Vec<Vec<RealizationCounts>> = (start..end)
            .into_par_iter()
            .map(|i| simulate(cfg, constellation, setup, i).map(|o| o.counts))
            .collect::<Result<_, _>>()?;
        out.extend(batch);
        start = end;
        let done = (0..n_res)
            .all(|j| out.iter().map(|c| c[j].bit_errors).sum::<u64>() >= EARLY_STOP_ERRORS);
        if done {
            break;
        }
    }
    Ok(out)
}

/// Per-realization counts for `cfg.quantizer_bits` at one point.
pub fn run_point_detailed(
    cfg: &SimConfig,
    ebn0_db: f64,
) -> Result<Vec<RealizationCounts>, SimError> {
    cfg.validate()?;
    let constellation = Constellation::new(cfg.modulation);
    let setup = PointSetup::new(cfg, ebn0_db, &[cfg.quantizer_bits])?;
    Ok(point_counts(cfg, &constellation, &setup)?
        .into_iter()
        .map(|c| c[0])
        .collect())
}

pub fn run_point(cfg: &SimConfig, ebn0_db: f64) -> Result<BerPoint, SimError> {
    Ok(BerPoint::from_counts(
        ebn0_db,
        &run_point_detailed(cfg, ebn0_db)?,
    ))
}

/// Sweeps the grid once for several resolutions, returning one detailed
/// curve per resolution. Each curve equals what [`run_sweep`] produces for
/// `cfg.with_bits(resolution)`.
pub fn run_family_detailed(
    cfg: &SimConfig,
    resolutions: &[Resolution],
) -> Result<Vec<DetailedCurve>, SimError> {
    cfg.validate()?;
    if resolutions.is_empty() {
        return Err(invalid("bits", "no resolutions requested"));
    }
    let constellation = Constellation::new(cfg.modulation);
    let setups = cfg
        .ebn0_grid_db
        .iter()
        .map(|&e| PointSetup::new(cfg, e, resolutions))
        .collect::<Result<Vec<_>, _>>()?;

    // [point][realization][resolution]
    let per_point: Vec<Vec<Vec<RealizationCounts>>> = if cfg.deterministic {
        let r = cfg.n_channel_realizations;
        let flat: Vec<Vec<RealizationCounts>> = (0..setups.len() * r)
            .into_par_iter()
            .map(|t| simulate(cfg, &constellation, &setups[t / r], t % r).map(|o| o.counts))
            .collect::<Result<_, _>>()?;
        let mut it = flat.into_iter();
        (0..setups.len())
            .map(|_| it.by_ref().take(r).collect())
            .collect()
    } else {
        setups
            .iter()
            .map(|s| point_counts(cfg, &constellation, s))
            .collect::<Result<_, _>>()?
    };

    Ok(resolutions
        .iter()
        .enumerate()
        .map(|(j, &res)| {
            let realizations: Vec<Vec<RealizationCounts>> = per_point
                .iter()
                .map(|point| point.iter().map(|c| c[j]).collect())
                .collect();
            let points = cfg
                .ebn0_grid_db
                .iter()
                .zip(&realizations)
                .map(|(&e, counts)| BerPoint::from_counts(e, counts))
                .collect();
            DetailedCurve {
                curve: BerCurve {
                    config: cfg.clone().with_bits(res),
                    points,
                },
                realizations,
            }
        })
        .collect())
}

pub fn run_family(cfg: &SimConfig, resolutions: &[Resolution]) -> Result<Vec<BerCurve>, SimError> {
    Ok(run_family_detailed(cfg, resolutions)?
        .into_iter()
        .map(|d| d.curve)
        .collect())
}

pub fn run_sweep(cfg: &SimConfig) -> Result<BerCurve, SimError> {
    Ok(run_family(cfg, &[cfg.quantizer_bits])?.remove(0))
}

/// Why a curve has no interpolated crossing of the target BER.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CrossingError {
    #[error("curve never reaches BER {target:e} within the grid")]
    NotAchieved { target: f64 },
    #[error("curve is already below BER {target:e} at the first grid point")]
    BelowGridStart { target: f64 },
    #[error("crossing of BER {target:e} lands next to a zero-error point at {ebn0_db} dB")]
    ZeroCountBracket { target: f64, ebn0_db: f64 },
}

impl CrossingError {
    pub fn is_not_achieved(&self) -> bool {
        matches!(self, CrossingError::NotAchieved { .. })
    }
}

/// Eb/N0 (dB) at which the curve first reaches `target_ber`, interpolating
/// linearly in `log10(BER)` between the bracketing grid points.
pub fn snr_at_ber(curve: &BerCurve, target_ber: f64) -> Result<f64, CrossingError> {
    snr_at_ber_points(&curve.points, target_ber)
}

pub fn snr_at_ber_points(points: &[BerPoint], target: f64) -> Result<f64, CrossingError> {
    let j = points
        .iter()
        .position(|p| p.ber <= target)
        .ok_or(CrossingError::NotAchieved { target })?;
    let hit = &points[j];
    if hit.ber == target {
        return Ok(hit.ebn0_db);
    }
    if j == 0 {
        return Err(CrossingError::BelowGridStart { target });
    }
    if hit.ber <= 0.0 {
        return Err(CrossingError::ZeroCountBracket {
            target,
            ebn0_db: hit.ebn0_db,
        });
    }
    let prev = &points[j - 1];
    let (l0, l1, lt) = (prev.ber.log10(), hit.ber.log10(), target.log10());
    Ok(prev.ebn0_db + (lt - l0) / (l1 - l0) * (hit.ebn0_db - prev.ebn0_db))
}

/// Extra Eb/N0 (dB) the test curve needs over the reference to reach
/// `target_ber`.
pub fn ber_degradation(
    test: &BerCurve,
    reference: &BerCurve,
    target_ber: f64,
) -> Result<f64, CrossingError> {
    Ok(snr_at_ber(test, target_ber)? - snr_at_ber(reference, target_ber)?)
}

impl fmt::Display for BerCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "{} {} M={} K={} bits={}",
            c.modulation, c.detector, c.m_antennas, c.k_users, c.quantizer_bits
        )?;
        for p in &self.points {
            writeln!(
                f,
                "  {:>7.2} dB  {:>10.3e}  ({}/{})",
                p.ebn0_db, p.ber, p.bit_errors, p.bits_total
            )?;
        }
        Ok(())
    }
}
