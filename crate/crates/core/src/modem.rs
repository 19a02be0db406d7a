//! Gray-labeled QPSK and 16-QAM constellations with unit average energy.
//!
//! Points are indexed `i_level * L + q_level`, where `L` is the number of
//! levels per axis and levels ascend from the most negative amplitude. A
//! point's label is the per-axis Gray code of its I level (high bits)
//! followed by that of its Q level (low bits). Bits are `u8` values in
//! `{0, 1}`, most significant label bit first.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModemError {
    #[error("bit sequence length {len} is not a multiple of {bits_per_symbol}")]
    LengthNotDivisible { len: usize, bits_per_symbol: usize },
    #[error("bit sequences differ in length ({sent} vs {decided})")]
    LengthMismatch { sent: usize, decided: usize },
    #[error("unknown modulation `{0}` (expected qpsk or 16qam)")]
    UnknownModulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" | "16-qam" => Ok(Modulation::Qam16),
            other => Err(ModemError::UnknownModulation(other.to_string())),
        }
    }
}

#[inline]
fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    bits_per_symbol: usize,
    /// Amplitude levels of one axis, ascending, already energy-normalized.
    axis_levels: Vec<f64>,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    /// Point index for each label value.
    index_of_label: Vec<usize>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let (raw, norm): (&[f64], f64) = match modulation {
            Modulation::Qpsk => (&[-1.0, 1.0], 2f64.sqrt()),
            Modulation::Qam16 => (&[-3.0, -1.0, 1.0, 3.0], 10f64.sqrt()),
        };
        let bits_per_symbol = modulation.bits_per_symbol();
        let half = bits_per_symbol / 2;
        let axis_levels: Vec<f64> = raw.iter().map(|a| a / norm).collect();
        let l = axis_levels.len();
        let mut points = Vec::with_capacity(l * l);
        let mut labels = Vec::with_capacity(l * l);
        for (ii, &re) in axis_levels.iter().enumerate() {
            for (qi, &im) in axis_levels.iter().enumerate() {
                points.push(Complex64::new(re, im));
                labels.push(((gray(ii) << half) | gray(qi)) as u32);
            }
        }
        let mut index_of_label = vec![0; l * l];
        for (idx, &lab) in labels.iter().enumerate() {
            index_of_label[lab as usize] = idx;
        }
        Self {
            modulation,
            bits_per_symbol,
            axis_levels,
            points,
            labels,
            index_of_label,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Labels as integers, most significant bit first when expanded.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn label_bits(&self, index: usize) -> Vec<u8> {
        let lab = self.labels[index];
        (0..self.bits_per_symbol)
            .rev()
            .map(|s| ((lab >> s) & 1) as u8)
            .collect()
    }

    #[inline]
    pub fn point_for_label(&self, label: u32) -> Complex64 {
        self.points[self.index_of_label[label as usize]]
    }

    /// Mean of `|s|^2` over the constellation.
    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Index of the point nearest to `z`, ties going to the lowest index.
    ///
    /// For a square grid the joint minimum-distance decision separates into
    /// independent per-axis decisions, and taking the lower level on an axis
    /// tie yields the lowest joint index.
    #[inline]
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let l = self.axis_levels.len();
        self.nearest_level(z.re) * l + self.nearest_level(z.im)
    }

    #[inline]
    fn nearest_level(&self, v: f64) -> usize {
        let levels = &self.axis_levels;
        let mut best = 0;
        let mut best_d = (v - levels[0]).abs();
        for (i, &a) in levels.iter().enumerate().skip(1) {
            let d = (v - a).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Label of the decided point for `z`.
    #[inline]
    pub fn decide_label(&self, z: Complex64) -> u32 {
        self.labels[self.nearest_index(z)]
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
        let q = self.bits_per_symbol;
        if !bits.len().is_multiple_of(q) {
            return Err(ModemError::LengthNotDivisible {
                len: bits.len(),
                bits_per_symbol: q,
            });
        }
        Ok(bits
            .chunks_exact(q)
            .map(|chunk| {
                let label = chunk
                    .iter()
                    .fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
                self.point_for_label(label)
            })
            .collect())
    }

    pub fn demodulate(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &z in symbols {
            out.extend(self.label_bits(self.nearest_index(z)));
        }
        out
    }
}

pub fn make_constellation(modulation: Modulation) -> Constellation {
    Constellation::new(modulation)
}

/// Hamming distance between two equally long bit sequences.
pub fn count_bit_errors(sent: &[u8], decided: &[u8]) -> Result<usize, ModemError> {
    if sent.len() != decided.len() {
        return Err(ModemError::LengthMismatch {
            sent: sent.len(),
            decided: decided.len(),
        });
    }
    Ok(sent
        .iter()
        .zip(decided)
        .filter(|(a, b)| (*a & 1) != (*b & 1))
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_nearest(c: &Constellation, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in c.points().iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn qpsk_points() {
        let c = make_constellation(Modulation::Qpsk);
        assert_eq!(c.size(), 4);
        for p in c.points() {
            assert!((p.norm_sqr() - 1.0).abs() < 1e-15);
            assert!((p.re.abs() - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn qam16_energy_and_corners() {
        let c = make_constellation(Modulation::Qam16);
        assert_eq!(c.size(), 16);
        // sum over {±1,±3}^2 of a^2+b^2 is 160
        let raw: f64 = c.points().iter().map(|p| p.norm_sqr() * 10.0).sum();
        assert!((raw - 160.0).abs() < 1e-12);
        assert!((c.average_energy() - 1.0).abs() < 1e-12);
        let corners = c
            .points()
            .iter()
            .filter(|p| (p.norm_sqr() - 1.8).abs() < 1e-12)
            .count();
        assert_eq!(corners, 4);
    }

    #[test]
    fn unit_energy_both_schemes() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            assert!((make_constellation(m).average_energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_are_a_permutation() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let c = make_constellation(m);
            let mut labels = c.labels().to_vec();
            labels.sort_unstable();
            assert_eq!(labels, (0..c.size() as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let c = make_constellation(m);
            let spacing = match m {
                Modulation::Qpsk => 2.0 / 2f64.sqrt(),
                Modulation::Qam16 => 2.0 / 10f64.sqrt(),
            };
            let mut pairs = 0;
            for i in 0..c.size() {
                for j in (i + 1)..c.size() {
                    if ((c.points()[i] - c.points()[j]).norm() - spacing).abs() < 1e-12 {
                        pairs += 1;
                        assert_eq!((c.labels()[i] ^ c.labels()[j]).count_ones(), 1);
                    }
                }
            }
            // grid-adjacent pairs in an L x L grid: 2 L (L - 1)
            let l = (c.size() as f64).sqrt() as usize;
            assert_eq!(pairs, 2 * l * (l - 1));
        }
    }

    #[test]
    fn modulate_examples() {
        let c = make_constellation(Modulation::Qpsk);
        for i in 0..4 {
            assert_eq!(c.modulate(&c.label_bits(i)).unwrap(), vec![c.points()[i]]);
        }
        assert_eq!(c.modulate(&[0, 1, 1, 0, 0, 0, 1, 1]).unwrap().len(), 4);

        let c = make_constellation(Modulation::Qam16);
        let mut bits = Vec::new();
        let mut expected = Vec::new();
        for label in 0..16u32 {
            bits.extend((0..4).rev().map(|s| ((label >> s) & 1) as u8));
            expected.push(c.point_for_label(label));
        }
        assert_eq!(c.modulate(&bits).unwrap(), expected);
    }

    #[test]
    fn modulate_rejects_ragged_length() {
        let c = make_constellation(Modulation::Qam16);
        assert_eq!(
            c.modulate(&[0, 1, 1]),
            Err(ModemError::LengthNotDivisible {
                len: 3,
                bits_per_symbol: 4
            })
        );
    }

    #[test]
    fn demodulate_examples() {
        let c = make_constellation(Modulation::Qpsk);
        for i in 0..4 {
            assert_eq!(c.demodulate(&[c.points()[i]]), c.label_bits(i));
        }
        let first_quadrant = c
            .points()
            .iter()
            .position(|p| p.re > 0.0 && p.im > 0.0)
            .unwrap();
        assert_eq!(
            c.demodulate(&[Complex64::new(0.9, 1.1)]),
            c.label_bits(first_quadrant)
        );
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let c = make_constellation(Modulation::Qam16);
        // origin is equidistant from the four inner points
        let idx = c.nearest_index(Complex64::new(0.0, 0.0));
        let inner: Vec<usize> = (0..16)
            .filter(|&i| (c.points()[i].norm_sqr() - 0.2).abs() < 1e-12)
            .collect();
        assert_eq!(idx, *inner.iter().min().unwrap());
        assert_eq!(idx, brute_force_nearest(&c, Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn round_trip_random_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let c = make_constellation(m);
            let bits: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2u8)).collect();
            assert_eq!(c.demodulate(&c.modulate(&bits).unwrap()), bits);
        }
    }

    #[test]
    fn count_bit_errors_examples() {
        assert_eq!(count_bit_errors(&[1, 0, 1], &[1, 0, 1]).unwrap(), 0);
        let a = [0, 1, 0, 1, 1, 0, 0, 1];
        let b: Vec<u8> = a.iter().map(|x| 1 - x).collect();
        assert_eq!(count_bit_errors(&a, &b).unwrap(), 8);
        assert_eq!(count_bit_errors(&[0, 1, 1, 0], &[0, 0, 1, 1]).unwrap(), 2);
        assert_eq!(
            count_bit_errors(&[0, 1], &[0]),
            Err(ModemError::LengthMismatch {
                sent: 2,
                decided: 1
            })
        );
    }

    #[test]
    fn parse_modulation() {
        assert_eq!("QPSK".parse::<Modulation>().unwrap(), Modulation::Qpsk);
        assert_eq!("16qam".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert!("8psk".parse::<Modulation>().is_err());
    }

    proptest! {
        #[test]
        fn per_axis_slicer_matches_brute_force(re in -2.0f64..2.0, im in -2.0f64..2.0, qam in any::<bool>()) {
            let c = make_constellation(if qam { Modulation::Qam16 } else { Modulation::Qpsk });
            let z = Complex64::new(re, im);
            prop_assert_eq!(c.nearest_index(z), brute_force_nearest(&c, z));
        }

        #[test]
        fn small_noise_keeps_qam16_label(idx in 0usize..16, r in 0.0f64..0.999, theta in 0.0f64..std::f64::consts::TAU) {
            let c = make_constellation(Modulation::Qam16);
            let delta = Complex64::from_polar(r / 10f64.sqrt(), theta);
            prop_assert_eq!(c.decide_label(c.points()[idx] + delta), c.labels()[idx]);
        }

        #[test]
        fn neighbor_decision_costs_one_bit(idx in 0usize..16, dir in 0usize..4) {
            let c = make_constellation(Modulation::Qam16);
            let step = 2.0 / 10f64.sqrt();
            let shift = [Complex64::new(step, 0.0), Complex64::new(-step, 0.0), Complex64::new(0.0, step), Complex64::new(0.0, -step)][dir];
            let neighbor = c.points()[idx] + shift;
            if let Some(j) = c.points().iter().position(|p| (p - neighbor).norm() < 1e-9) {
                let sent = c.label_bits(idx);
                let decided = c.demodulate(&[c.points()[j]]);
                prop_assert_eq!(count_bit_errors(&sent, &decided).unwrap(), 1);
            }
        }

        #[test]
        fn single_symbol_round_trip(label in 0u32..16) {
            let c = make_constellation(Modulation::Qam16);
            let bits: Vec<u8> = (0..4).rev().map(|s| ((label >> s) & 1) as u8).collect();
            prop_assert_eq!(c.demodulate(&c.modulate(&bits).unwrap()), bits);
        }
    }
}
