//! Uniform quantizers for feedback angles and stream gains.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::givens::GivensAngles;
use crate::{Error, Result};

pub const AVG_SNR_MIN_DB: f64 = -10.0;
pub const AVG_SNR_MAX_DB: f64 = 53.75;
pub const AVG_SNR_STEP_DB: f64 = 0.25;
pub const DELTA_SNR_MIN_DB: f64 = -8.0;
pub const DELTA_SNR_MAX_DB: f64 = 7.0;

/// Mid-rise angle grids: `φ̂ = (k+½)·2π/2^bφ`, `ψ̂ = (k+½)·π/2^(bψ+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleQuantizer {
    pub phi_bits: u8,
    pub psi_bits: u8,
}

impl Default for AngleQuantizer {
    fn default() -> Self {
        AngleQuantizer { phi_bits: 9, psi_bits: 7 }
    }
}

impl AngleQuantizer {
    pub fn new(phi_bits: i32, psi_bits: i32) -> Result<Self> {
        let ok = |b: i32| (1..=16).contains(&b);
        if !ok(phi_bits) || !ok(psi_bits) {
            return Err(Error::config(format!("angle bit widths must be in 1..=16, got ({phi_bits}, {psi_bits})")));
        }
        Ok(AngleQuantizer { phi_bits: phi_bits as u8, psi_bits: psi_bits as u8 })
    }

    pub fn phi_step(&self) -> f64 {
        TAU / (1u32 << self.phi_bits) as f64
    }

    pub fn psi_step(&self) -> f64 {
        PI / 2.0 / (1u32 << self.psi_bits) as f64
    }

    pub fn quantize_phi(&self, phi: f64) -> u16 {
        let levels = 1u32 << self.phi_bits;
        // floor picks the mid-rise cell whose centre is nearest.
        let k = (phi.rem_euclid(TAU) / self.phi_step()).floor() as i64;
        k.rem_euclid(levels as i64) as u16
    }

    pub fn quantize_psi(&self, psi: f64) -> u16 {
        let levels = 1i64 << self.psi_bits;
        let k = (psi / self.psi_step()).floor() as i64;
        k.clamp(0, levels - 1) as u16
    }

    pub fn dequantize_phi(&self, k: u16) -> f64 {
        (k as f64 + 0.5) * self.phi_step()
    }

    pub fn dequantize_psi(&self, k: u16) -> f64 {
        (k as f64 + 0.5) * self.psi_step()
    }

    /// Indices in feedback order: all φ, then all ψ.
    pub fn quantize(&self, angles: &GivensAngles) -> Vec<u16> {
        angles
            .phi
            .iter()
            .map(|&p| self.quantize_phi(p))
            .chain(angles.psi.iter().map(|&p| self.quantize_psi(p)))
            .collect()
    }

    pub fn dequantize(&self, indices: &[u16]) -> GivensAngles {
        let half = indices.len() / 2;
        GivensAngles {
            phi: indices[..half].iter().map(|&k| self.dequantize_phi(k)).collect(),
            psi: indices[half..].iter().map(|&k| self.dequantize_psi(k)).collect(),
        }
    }
}

/// Quantized stream gain: subcarrier-averaged SNR index plus per-subcarrier
/// delta indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GainReport {
    /// 8-bit index, `avg = −10 + 0.25·k` dB.
    pub avg_index: u8,
    /// 4-bit indices, `delta = −8 + k` dB.
    pub delta_indices: Vec<u8>,
}

impl GainReport {
    pub fn avg_snr_db(&self) -> f64 {
        AVG_SNR_MIN_DB + AVG_SNR_STEP_DB * self.avg_index as f64
    }

    pub fn delta_snr_db(&self, q: usize) -> f64 {
        DELTA_SNR_MIN_DB + self.delta_indices[q] as f64
    }
}

/// Quantizes `SNR_q = σ₁,q²/σ²` (dB) into an average and per-subcarrier deltas.
pub fn quantize_gain(sigma1: &[f64], noise_variance: f64) -> Result<GainReport> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid(format!("gain reference noise variance must be positive, got {noise_variance}")));
    }
    if sigma1.is_empty() {
        return Err(Error::invalid("no subcarriers to quantize"));
    }
    if let Some(bad) = sigma1.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("singular value must be positive, got {bad}")));
    }
    let snr_db: Vec<f64> = sigma1.iter().map(|s| 10.0 * (s * s / noise_variance).log10()).collect();
    let avg = snr_db.iter().sum::<f64>() / snr_db.len() as f64;
    let avg_index = ((avg - AVG_SNR_MIN_DB) / AVG_SNR_STEP_DB).round().clamp(0.0, 255.0) as u8;
    let delta_indices = snr_db
        .iter()
        .map(|s| ((s - avg).round().clamp(DELTA_SNR_MIN_DB, DELTA_SNR_MAX_DB) - DELTA_SNR_MIN_DB) as u8)
        .collect();
    Ok(GainReport { avg_index, delta_indices })
}

/// `σ̂₁,q = sqrt(σ²·10^((avĝ + deltâ_q)/10))`.
pub fn dequantize_gain(report: &GainReport, noise_variance: f64) -> Vec<f64> {
    let avg = report.avg_snr_db();
    (0..report.delta_indices.len())
        .map(|q| (noise_variance * 10f64.powf((avg + report.delta_snr_db(q)) / 10.0)).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_widths_are_validated() {
        assert!(AngleQuantizer::new(0, 7).is_err());
        assert!(AngleQuantizer::new(9, -1).is_err());
        assert_eq!(AngleQuantizer::new(9, 7).unwrap(), AngleQuantizer::default());
    }

    #[test]
    fn phi_zero_maps_to_first_cell_centre() {
        let q = AngleQuantizer::new(9, 7).unwrap();
        let back = q.dequantize_phi(q.quantize_phi(0.0));
        assert!((back - PI / 512.0).abs() < 1e-15);
        assert!(back.abs() <= PI / 512.0 + 1e-15);
    }

    #[test]
    fn psi_error_is_at_most_half_step() {
        let q = AngleQuantizer::new(9, 7).unwrap();
        let psi = PI / 4.0;
        assert!((q.dequantize_psi(q.quantize_psi(psi)) - psi).abs() <= PI / 512.0 + 1e-15);
    }

    #[test]
    fn grid_points_are_fixed_points() {
        let q = AngleQuantizer::new(7, 5).unwrap();
        for k in 0..(1u16 << 7) {
            assert_eq!(q.quantize_phi(q.dequantize_phi(k)), k);
        }
        for k in 0..(1u16 << 5) {
            assert_eq!(q.quantize_psi(q.dequantize_psi(k)), k);
        }
        // Closed upper end of the ψ domain lands in the last cell.
        assert_eq!(q.quantize_psi(PI / 2.0), 31);
    }

    #[test]
    fn flat_on_grid_profile_round_trips_exactly() {
        let noise = 1e-3;
        let snr_db = 20.25;
        let s = (noise * 10f64.powf(snr_db / 10.0)).sqrt();
        let r = quantize_gain(&[s; 16], noise).unwrap();
        assert!(r.delta_indices.iter().all(|&d| d == 8));
        assert!((r.avg_snr_db() - snr_db).abs() < 1e-12);
        for x in dequantize_gain(&r, noise) {
            assert!((x / s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_offset_rounds_to_zero_delta() {
        let noise = 1.0;
        let to_sigma = |db: f64| 10f64.powf(db / 20.0);
        // Mean of {10.4, 9.6} is 10; deltas ±0.4 dB round to 0.
        let r = quantize_gain(&[to_sigma(10.4), to_sigma(9.6)], noise).unwrap();
        assert_eq!(r.delta_indices, vec![8, 8]);
    }

    #[test]
    fn random_profiles_stay_within_worst_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = 0.01;
        let mut worst = 0.0f64;
        for _ in 0..2000 {
            let avg: f64 = rng.random_range(-9.0..52.0);
            let snr: Vec<f64> = (0..32).map(|_| avg + rng.random_range(-7.0..6.0)).collect();
            let mean = snr.iter().sum::<f64>() / 32.0;
            // Keep inside the clamp ranges.
            if !(AVG_SNR_MIN_DB..=AVG_SNR_MAX_DB).contains(&mean)
                || snr.iter().any(|s| !(DELTA_SNR_MIN_DB..=DELTA_SNR_MAX_DB).contains(&(s - mean)))
            {
                continue;
            }
            let sig: Vec<f64> = snr.iter().map(|s| (noise * 10f64.powf(s / 10.0)).sqrt()).collect();
            let r = quantize_gain(&sig, noise).unwrap();
            for (q, x) in dequantize_gain(&r, noise).iter().enumerate() {
                let back = 10.0 * (x * x / noise).log10();
                worst = worst.max((back - snr[q]).abs());
            }
        }
        assert!(worst <= 0.625 + 1e-9, "worst {worst}");
    }

    #[test]
    fn non_positive_singular_value_is_rejected() {
        assert!(quantize_gain(&[1.0, 0.0], 1.0).is_err());
        assert!(quantize_gain(&[1.0], 0.0).is_err());
    }
}
