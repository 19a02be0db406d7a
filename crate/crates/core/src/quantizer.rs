//! Uniform mid-riser quantizer applied per real and imaginary component.
//!
//! For `b` bits there are `N = 2^b` cells. Thresholds sit at integer
//! multiples of the step `Δ` from `-(N/2 - 1)Δ` to `(N/2 - 1)Δ`, the two
//! outer cells extend to infinity, and cell `i` (1-based) outputs
//! `(i - N/2 - 1/2)Δ`. Cells are closed below and open above, so an input
//! exactly on a threshold goes to the upper cell.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

pub const MAX_BITS: u8 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizerError {
    #[error("quantizer input is not finite: {0}")]
    NonFinite(f64),
    #[error("quantizer resolution must be 1..=8 bits or `inf`, got `{0}`")]
    InvalidBits(String),
    #[error("quantizer step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("quantize_vector expects a column vector, got {rows}x{cols}")]
    NotColumn { rows: usize, cols: usize },
    #[error("full-precision quantizer has no scalar characteristic")]
    Unbounded,
}

/// ADC resolution: a finite bit depth or full precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resolution {
    Finite(u8),
    Infinite,
}

impl Resolution {
    pub fn finite(bits: u8) -> Result<Self, QuantizerError> {
        if (1..=MAX_BITS).contains(&bits) {
            Ok(Resolution::Finite(bits))
        } else {
            Err(QuantizerError::InvalidBits(bits.to_string()))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Resolution::Infinite)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Finite(b) => write!(f, "{b}"),
            Resolution::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = QuantizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") {
            return Ok(Resolution::Infinite);
        }
        t.parse::<u8>()
            .ok()
            .and_then(|b| Resolution::finite(b).ok())
            .ok_or_else(|| QuantizerError::InvalidBits(t.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    resolution: Resolution,
    step: f64,
    half_levels: f64,
    max_index: f64,
}

impl QuantizerSpec {
    pub fn finite(bits: u8, step: f64) -> Result<Self, QuantizerError> {
        let resolution = Resolution::finite(bits)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(QuantizerError::InvalidStep(step));
        }
        let n = (1u32 << bits) as f64;
        Ok(Self {
            resolution,
            step,
            half_levels: n / 2.0,
            max_index: n,
        })
    }

    /// Full-precision passthrough.
    pub fn infinite() -> Self {
        Self {
            resolution: Resolution::Infinite,
            step: f64::INFINITY,
            half_levels: f64::INFINITY,
            max_index: f64::INFINITY,
        }
    }

    /// Step scaled to the analytic per-dimension receive level:
    /// `Δ = optimal_gaussian_step(b) * receive_std_per_dim(K, σx², σn²)`.
    pub fn for_receiver(
        resolution: Resolution,
        k_users: usize,
        sigma_x2: f64,
        sigma_n2: f64,
    ) -> Result<Self, QuantizerError> {
        match resolution {
            Resolution::Infinite => Ok(Self::infinite()),
            Resolution::Finite(b) => {
                let step =
                    optimal_gaussian_step(b) * receive_std_per_dim(k_users, sigma_x2, sigma_n2);
                Self::finite(b, step)
            }
        }
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    /// Step size; infinite for the full-precision spec.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `N = 2^b`, or `None` at full precision.
    pub fn levels(&self) -> Option<usize> {
        match self.resolution {
            Resolution::Finite(b) => Some(1usize << b),
            Resolution::Infinite => None,
        }
    }

    /// Output values `r_1 < ... < r_N`.
    pub fn codebook(&self) -> Option<Vec<f64>> {
        let n = self.levels()?;
        Some((1..=n).map(|i| self.level(i as f64)).collect())
    }

    /// Input thresholds `y_2 < ... < y_N` (the finite interval endpoints).
    pub fn thresholds(&self) -> Option<Vec<f64>> {
        let n = self.levels()? as i64;
        Some(
            (2..=n)
                .map(|i| (-(n / 2) - 1 + i) as f64 * self.step)
                .collect(),
        )
    }

    #[inline]
    fn level(&self, index: f64) -> f64 {
        (index - self.half_levels - 0.5) * self.step
    }

    /// Scalar quantizer for a finite-resolution spec.
    pub fn quantize_real(&self, y: f64) -> Result<f64, QuantizerError> {
        if !y.is_finite() {
            return Err(QuantizerError::NonFinite(y));
        }
        if self.resolution.is_infinite() {
            return Err(QuantizerError::Unbounded);
        }
        Ok(self.apply(y))
    }

    /// Unchecked scalar path: identity at full precision, otherwise the
    /// mid-riser characteristic. Inputs must be finite.
    #[inline]
    pub fn apply(&self, y: f64) -> f64 {
        if self.resolution.is_infinite() {
            return y;
        }
        let index = ((y / self.step).floor() + self.half_levels + 1.0).clamp(1.0, self.max_index);
        self.level(index)
    }

    #[inline]
    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.apply(z.re), self.apply(z.im))
    }

    /// Quantizes `src` into `dst` component-wise.
    #[inline]
    pub fn apply_into(&self, src: &[Complex64], dst: &mut [Complex64]) {
        if self.resolution.is_infinite() {
            dst.copy_from_slice(src);
            return;
        }
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = self.apply_complex(s);
        }
    }

    /// `Q(Re y) + j Q(Im y)` for a column vector.
    pub fn quantize_vector(&self, y: &ComplexMatrix) -> Result<ComplexMatrix, QuantizerError> {
        if !y.is_column() {
            return Err(QuantizerError::NotColumn {
                rows: y.rows(),
                cols: y.cols(),
            });
        }
        if self.resolution.is_infinite() {
            return Ok(y.clone());
        }
        let out = y
            .as_slice()
            .iter()
            .map(|z| {
                Ok(Complex64::new(
                    self.quantize_real(z.re)?,
                    self.quantize_real(z.im)?,
                ))
            })
            .collect::<Result<Vec<_>, QuantizerError>>()?;
        Ok(ComplexMatrix::column(out))
    }
}

/// Standard deviation of each real component of a received sample, for `K`
/// users of power `σx²` plus complex noise of variance `σn²`.
pub fn receive_std_per_dim(k_users: usize, sigma_x2: f64, sigma_n2: f64) -> f64 {
    ((k_users as f64 * sigma_x2 + sigma_n2) / 2.0).sqrt()
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const INTEGRATION_LIMIT: f64 = 12.0;
const PANEL_WIDTH: f64 = 0.02;

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[(Q(X) - X)^2]` for `X ~ N(0, 1)`, integrated numerically over
/// `[-12, 12]` with breakpoints at the quantizer thresholds.
pub fn gaussian_mse(bits: u8, step: f64) -> f64 {
    let spec = QuantizerSpec::finite(bits, step).expect("valid quantizer");
    let mut breaks = vec![-INTEGRATION_LIMIT];
    breaks.extend(
        spec.thresholds()
            .unwrap()
            .into_iter()
            .filter(|t| t.abs() < INTEGRATION_LIMIT),
    );
    breaks.push(INTEGRATION_LIMIT);

    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        // every point of [a, b) maps to the same output
        let out = spec.apply(0.5 * (a + b));
        let panels = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            total += gauss_legendre(lo, lo + h, |x| (out - x).powi(2) * std_normal_pdf(x));
        }
    }
    total
}

fn minimize_step(bits: u8) -> f64 {
    // log-spaced scan to bracket the minimum, then golden-section refinement
    const SCAN: usize = 400;
    let (lo, hi) = (1e-3f64, 4.0f64);
    let ratio = (hi / lo).ln() / (SCAN - 1) as f64;
    let grid: Vec<f64> = (0..SCAN).map(|i| lo * (ratio * i as f64).exp()).collect();
    let values: Vec<f64> = grid.iter().map(|&d| gaussian_mse(bits, d)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = gaussian_mse(bits, c);
    let mut fd = gaussian_mse(bits, d);
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gaussian_mse(bits, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gaussian_mse(bits, d);
        }
    }
    0.5 * (a + b)
}

/// Step minimizing the quantization MSE of a standard normal input.
///
/// Computed on first use for each bit depth and cached.
pub fn optimal_gaussian_step(bits: u8) -> f64 {
    static CACHE: [OnceLock<f64>; MAX_BITS as usize] =
        [const { OnceLock::new() }; MAX_BITS as usize];
    assert!(
        (1..=MAX_BITS).contains(&bits),
        "bits must be in 1..=8, got {bits}"
    );
    *CACHE[bits as usize - 1].get_or_init(|| minimize_step(bits))
}
