//! i.i.d. Rayleigh channels, complex Gaussian noise and the Eb/N0 axis.
//!
//! Every realization draws from its own ChaCha8 stream selected by
//! `(master_seed, realization_index, attempt)`, so a realization's samples
//! do not depend on which thread runs it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

pub type RandomStream = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel dimensions: need m_antennas >= k_users >= 1, got M={m}, K={k}")]
    InvalidDimension { m: usize, k: usize },
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoiseVariance(f64),
}

/// Stream for one realization attempt.
///
/// The ChaCha stream id packs the realization index in the low 48 bits and
/// the retry attempt above it.
pub fn realization_stream(master_seed: u64, realization_index: u64, attempt: u32) -> RandomStream {
    assert!(
        realization_index < 1 << 48,
        "realization index out of range"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(realization_index | (u64::from(attempt) << 48));
    rng
}

/// `(g1 + j g2) * scale` with `g1`, `g2` standard normal, real part drawn first.
#[inline]
fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Complex64 {
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Complex64::new(g1 * scale, g2 * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub seed_tag: u64,
}

/// Draws an `M x K` matrix with i.i.d. CN(0, 1) entries in row-major order.
pub fn draw_channel<R: Rng + ?Sized>(
    m_antennas: usize,
    k_users: usize,
    rng: &mut R,
) -> Result<ComplexMatrix, ChannelError> {
    if k_users == 0 || m_antennas < k_users {
        return Err(ChannelError::InvalidDimension {
            m: m_antennas,
            k: k_users,
        });
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok(ComplexMatrix::from_fn(m_antennas, k_users, |_, _| {
        gaussian_pair(rng, scale)
    }))
}

/// Draws a realization tagged with its index.
pub fn draw_realization<R: Rng + ?Sized>(
    m_antennas: usize,
    k_users: usize,
    seed_tag: u64,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    Ok(ChannelRealization {
        h: draw_channel(m_antennas, k_users, rng)?,
        seed_tag,
    })
}

/// Complex noise variance per receive antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma_n2: f64,
}

impl NoiseModel {
    pub fn new(sigma_n2: f64) -> Result<Self, ChannelError> {
        if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) {
            return Err(ChannelError::InvalidNoiseVariance(sigma_n2));
        }
        Ok(Self { sigma_n2 })
    }

    pub fn from_ebn0(ebn0_db: f64, bits_per_symbol: usize, es: f64) -> Result<Self, ChannelError> {
        Self::new(noise_variance_from_ebn0(ebn0_db, bits_per_symbol, es))
    }

    #[inline]
    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }

    /// Standard deviation of the real (or imaginary) part.
    #[inline]
    pub fn per_dim_std(&self) -> f64 {
        (self.sigma_n2 / 2.0).sqrt()
    }
}

/// `N0 = Es / (q 10^(Eb/N0 / 10))`: complex noise variance per antenna for
/// symbol energy `es` and `q` bits per symbol.
pub fn noise_variance_from_ebn0(ebn0_db: f64, bits_per_symbol: usize, es: f64) -> f64 {
    es / (bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// `M x 1` vector of i.i.d. CN(0, sigma_n2) samples.
pub fn draw_noise<R: Rng + ?Sized>(
    m_antennas: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> ComplexMatrix {
    let mut out = vec![Complex64::new(0.0, 0.0); m_antennas];
    fill_noise(&mut out, noise.per_dim_std(), rng);
    ComplexMatrix::column(out)
}

/// Fills `out` with `(g1 + j g2) * per_dim_std`; same draw order as
/// [`draw_noise`].
#[inline]
pub fn fill_noise<R: Rng + ?Sized>(out: &mut [Complex64], per_dim_std: f64, rng: &mut R) {
    for z in out.iter_mut() {
        *z = gaussian_pair(rng, per_dim_std);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLES: usize = 1_000_000;

    #[test]
    fn ebn0_conversion_examples() {
        assert!((noise_variance_from_ebn0(0.0, 2, 1.0) - 0.5).abs() < 1e-15);
        assert!((noise_variance_from_ebn0(10.0, 4, 1.0) - 0.025).abs() < 1e-15);
        for q in [2usize, 4] {
            let db = -10.0 * (q as f64).log10();
            assert!((noise_variance_from_ebn0(db, q, 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ebn0_conversion_monotone_and_linear() {
        let mut prev = f64::INFINITY;
        for i in -40..=40 {
            let v = noise_variance_from_ebn0(i as f64 * 0.5, 2, 1.0);
            assert!(v < prev);
            prev = v;
        }
        let a = noise_variance_from_ebn0(3.0, 4, 1.0);
        assert!((noise_variance_from_ebn0(3.0, 4, 2.5) - 2.5 * a).abs() < 1e-15);
    }

    #[test]
    fn channel_moments() {
        let mut rng = realization_stream(11, 0, 0);
        let h = draw_channel(1000, 1000, &mut rng).unwrap();
        let n = h.as_slice().len() as f64;
        let power = h.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let mean_re = h.as_slice().iter().map(|z| z.re).sum::<f64>() / n;
        let mean_im = h.as_slice().iter().map(|z| z.im).sum::<f64>() / n;
        assert!((power - 1.0).abs() < 0.005, "power {power}");
        assert!(mean_re.abs() < 0.005 && mean_im.abs() < 0.005);
        let corr = h.as_slice().iter().map(|z| z.re * z.im).sum::<f64>() / n / 0.5;
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn noise_moments() {
        let mut rng = realization_stream(12, 3, 0);
        let noise = NoiseModel::new(0.5).unwrap();
        let v = draw_noise(SAMPLES, &noise, &mut rng);
        let n = SAMPLES as f64;
        let var = v.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var - 0.5).abs() < 0.005, "var {var}");
        let re_var = v.as_slice().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        assert!((re_var - 0.25).abs() < 0.0025);
        let corr = v.as_slice().iter().map(|z| z.re * z.im).sum::<f64>() / n / 0.25;
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn zero_noise_limit_is_zero_vector() {
        let noise = NoiseModel { sigma_n2: 0.0 };
        let mut rng = realization_stream(1, 1, 0);
        let v = draw_noise(8, &noise, &mut rng);
        assert!(v.as_slice().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn draws_are_deterministic() {
        let a = draw_channel(8, 4, &mut realization_stream(5, 9, 0)).unwrap();
        let b = draw_channel(8, 4, &mut realization_stream(5, 9, 0)).unwrap();
        assert_eq!(a, b);
        let noise = NoiseModel::new(0.3).unwrap();
        assert_eq!(
            draw_noise(16, &noise, &mut realization_stream(5, 9, 0)),
            draw_noise(16, &noise, &mut realization_stream(5, 9, 0))
        );
    }

    #[test]
    fn streams_differ_by_index_and_attempt() {
        let base = draw_channel(4, 2, &mut realization_stream(5, 0, 0)).unwrap();
        assert_ne!(
            base,
            draw_channel(4, 2, &mut realization_stream(5, 1, 0)).unwrap()
        );
        assert_ne!(
            base,
            draw_channel(4, 2, &mut realization_stream(5, 0, 1)).unwrap()
        );
        assert_ne!(
            base,
            draw_channel(4, 2, &mut realization_stream(6, 0, 0)).unwrap()
        );
    }

    #[test]
    fn rejects_bad_dimensions_and_variance() {
        let mut rng = realization_stream(0, 0, 0);
        assert_eq!(
            draw_channel(4, 8, &mut rng),
            Err(ChannelError::InvalidDimension { m: 4, k: 8 })
        );
        assert!(draw_channel(4, 0, &mut rng).is_err());
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
    }
}
