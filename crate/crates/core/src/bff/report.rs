use std::fmt::Write as _;

use crate::channel::CsiTensor;
use crate::linalg::{CMatrix, C64};
use crate::{Error, Result};

use super::givens::{compress_v, decompress_v};
use super::quant::{dequantize_gain, quantize_gain, AngleQuantizer, GainReport};
use super::svd::client_svd;

/// One client's compressed single-stream feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct BffReport {
    pub client: u16,
    /// Transmit (AP) antenna count `N_A`.
    pub n_tx: u8,
    /// Receive (client) antenna count `N_u`.
    pub n_rx: u8,
    pub quantizer: AngleQuantizer,
    /// Per subcarrier: `φ₁…φ_{N_A−1}, ψ₁…ψ_{N_A−1}` indices.
    pub angle_indices: Vec<Vec<u16>>,
    pub gain: GainReport,
}

const HEADER_LEN: usize = 8;

impl BffReport {
    pub fn num_subcarriers(&self) -> usize {
        self.angle_indices.len()
    }

    /// Dequantized strongest right singular vectors.
    pub fn vectors(&self) -> Vec<crate::CVector> {
        self.angle_indices.iter().map(|idx| decompress_v(&self.quantizer.dequantize(idx))).collect()
    }

    /// Packs the record: a little-endian header `(u: u16, Q: u16, N_A: u8,
    /// N_u: u8, bφ: u8, bψ: u8)` followed by an LSB-first bitstream holding
    /// the 8-bit average SNR index and, per subcarrier, the 4-bit delta index
    /// and the angle indices in feedback order. The tail is zero padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.client.to_le_bytes());
        out.extend_from_slice(&(self.angle_indices.len() as u16).to_le_bytes());
        out.extend_from_slice(&[self.n_tx, self.n_rx, self.quantizer.phi_bits, self.quantizer.psi_bits]);
        let half = self.n_tx.saturating_sub(1) as usize;
        let mut bits = BitWriter::default();
        bits.push(self.gain.avg_index as u32, 8);
        for (q, idx) in self.angle_indices.iter().enumerate() {
            bits.push(self.gain.delta_indices[q] as u32, 4);
            for (i, &k) in idx.iter().enumerate() {
                let w = if i < half { self.quantizer.phi_bits } else { self.quantizer.psi_bits };
                bits.push(k as u32, w as u32);
            }
        }
        out.extend(bits.finish());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode("feedback header truncated".into()));
        }
        let client = u16::from_le_bytes([bytes[0], bytes[1]]);
        let q = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
        let (n_tx, n_rx) = (bytes[4], bytes[5]);
        let quantizer = AngleQuantizer::new(bytes[6] as i32, bytes[7] as i32)
            .map_err(|e| Error::Decode(e.to_string()))?;
        if n_tx < 2 {
            return Err(Error::Decode(format!("unsupported N_A = {n_tx}")));
        }
        let half = n_tx as usize - 1;
        let per_q = 4 + half * (quantizer.phi_bits as usize + quantizer.psi_bits as usize);
        let total_bits = 8 + q * per_q;
        let expect = HEADER_LEN + total_bits.div_ceil(8);
        if bytes.len() != expect {
            return Err(Error::Decode(format!("expected {expect} bytes, got {}", bytes.len())));
        }
        let mut rd = BitReader::new(&bytes[HEADER_LEN..]);
        let avg_index = rd.take(8) as u8;
        let mut delta_indices = Vec::with_capacity(q);
        let mut angle_indices = Vec::with_capacity(q);
        for _ in 0..q {
            delta_indices.push(rd.take(4) as u8);
            let mut idx = Vec::with_capacity(2 * half);
            for i in 0..2 * half {
                let w = if i < half { quantizer.phi_bits } else { quantizer.psi_bits };
                idx.push(rd.take(w as u32) as u16);
            }
            angle_indices.push(idx);
        }
        Ok(BffReport { client, n_tx, n_rx, quantizer, angle_indices, gain: GainReport { avg_index, delta_indices } })
    }

    /// Structured-text debug dump.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# bff client={} q={} n_tx={} n_rx={} phi_bits={} psi_bits={} avg_snr_db={}\n",
            self.client,
            self.num_subcarriers(),
            self.n_tx,
            self.n_rx,
            self.quantizer.phi_bits,
            self.quantizer.psi_bits,
            self.gain.avg_snr_db()
        );
        for (q, idx) in self.angle_indices.iter().enumerate() {
            let _ = write!(s, "{q} delta_db={}", self.gain.delta_snr_db(q));
            for k in idx {
                let _ = write!(s, " {k}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    n: u32,
}

impl BitWriter {
    fn push(&mut self, value: u32, width: u32) {
        debug_assert!(width == 32 || value < (1u32 << width));
        self.acc |= (value as u64) << self.n;
        self.n += width;
        while self.n >= 8 {
            self.bytes.push(self.acc as u8);
            self.acc >>= 8;
            self.n -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.n > 0 {
            self.bytes.push(self.acc as u8);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn take(&mut self, width: u32) -> u32 {
        let mut v = 0u32;
        for i in 0..width {
            let p = self.pos + i as usize;
            let bit = (self.bytes[p / 8] >> (p % 8)) & 1;
            v |= (bit as u32) << i;
        }
        self.pos += width as usize;
        v
    }
}

/// Builds the feedback of one client from its CSI. `noise_variance` is the
/// client's noise reference for the SNR report.
pub fn build_bff(csi: &CsiTensor, noise_variance: f64, client: u16, quantizer: AngleQuantizer) -> Result<BffReport> {
    if csi.n_tx < 2 || csi.n_tx > u8::MAX as usize || csi.n_rx > u8::MAX as usize {
        return Err(Error::invalid(format!("unsupported feedback dimensions {}x{}", csi.n_rx, csi.n_tx)));
    }
    if csi.num_subcarriers() > u16::MAX as usize {
        return Err(Error::invalid("too many subcarriers for the feedback record"));
    }
    let svds = client_svd(csi);
    let mut angle_indices = Vec::with_capacity(svds.len());
    let mut sigma1 = Vec::with_capacity(svds.len());
    for t in &svds {
        let (s, v) = t.strongest();
        let angles = compress_v(v.as_slice())?;
        angle_indices.push(quantizer.quantize(&angles));
        sigma1.push(s);
    }
    let gain = quantize_gain(&sigma1, noise_variance)?;
    Ok(BffReport { client, n_tx: csi.n_tx as u8, n_rx: csi.n_rx as u8, quantizer, angle_indices, gain })
}

/// `R̃ ≈ (1/(Q·N_u)) Σ_q v̂_q σ̂_q² v̂_qᴴ` from dequantized angles and gains.
pub fn approx_covariance(report: &BffReport, noise_variance: f64) -> CMatrix {
    let n = report.n_tx as usize;
    let q = report.num_subcarriers();
    let mut r = CMatrix::zeros(n, n);
    if q == 0 {
        return r;
    }
    let gains = dequantize_gain(&report.gain, noise_variance);
    for (v, g) in report.vectors().iter().zip(&gains) {
        r += (v * v.adjoint()) * C64::new(g * g, 0.0);
    }
    r.unscale((q * report.n_rx as usize) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob, hermitian_eigen};
    use crate::scene::steering_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rank_one_csi(aod: f64, gain: f64, q: usize) -> CsiTensor {
        let a = steering_vector(aod, 4, 0.5).unwrap();
        let b = steering_vector(0.2, 4, 0.5).unwrap();
        let h = (b * a.adjoint()) * C64::new(gain, 0.0);
        CsiTensor::new(vec![h; q], 0.0).unwrap()
    }

    #[test]
    fn noiseless_rank_one_vector_fidelity() {
        let csi = rank_one_csi(-0.4, 1.0, 8);
        let r = build_bff(&csi, 1e-3, 0, AngleQuantizer::default()).unwrap();
        let truth = steering_vector(-0.4, 4, 0.5).unwrap().unscale(2.0);
        for v in r.vectors() {
            assert!((v.adjoint() * &truth)[(0, 0)].norm() >= 0.999);
        }
    }

    #[test]
    fn shape_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let slices: Vec<CMatrix> =
            (0..512).map(|_| CMatrix::from_fn(4, 4, |_, _| C64::new(rng.random(), rng.random()))).collect();
        let csi = CsiTensor::new(slices, 0.1).unwrap();
        let a = build_bff(&csi, 0.1, 3, AngleQuantizer::default()).unwrap();
        let b = build_bff(&csi, 0.1, 3, AngleQuantizer::default()).unwrap();
        assert_eq!(a.angle_indices.len(), 512);
        assert_eq!(a.gain.delta_indices.len(), 512);
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(BffReport::from_bytes(&a.to_bytes()).unwrap(), a);
    }

    #[test]
    fn record_layout_is_bit_exact() {
        let r = BffReport {
            client: 0x0102,
            n_tx: 2,
            n_rx: 1,
            quantizer: AngleQuantizer::new(3, 2).unwrap(),
            angle_indices: vec![vec![5, 2]],
            gain: GainReport { avg_index: 0xA5, delta_indices: vec![0x9] },
        };
        // Bits LSB first: A5 | 1001 | 101 | 10 → 0xA5, then 1001 101 1(0) packed.
        let bytes = r.to_bytes();
        assert_eq!(&bytes[..8], &[0x02, 0x01, 0x01, 0x00, 2, 1, 3, 2]);
        assert_eq!(bytes[8], 0xA5);
        // delta 9 = 1001b at bits 0..4, φ 5 = 101b at 4..7, ψ 2 = 10b at 7..9.
        assert_eq!(bytes[9], 0x09 | (0x5 << 4) | ((0x2 & 1) << 7));
        assert_eq!(bytes[10], 0x2 >> 1);
        assert_eq!(bytes.len(), 11);
        assert_eq!(BffReport::from_bytes(&bytes).unwrap(), r);
        assert!(BffReport::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn single_subcarrier_rank_one_normalization() {
        // avg index 40 → 0 dB, delta index 8 → 0 dB, so σ̂² = σ² = Q·N_u = 4.
        let q = AngleQuantizer::default();
        let e1 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let r = BffReport {
            client: 0,
            n_tx: 4,
            n_rx: 4,
            quantizer: q,
            angle_indices: vec![q.quantize(&crate::bff::compress_v(&e1).unwrap())],
            gain: GainReport { avg_index: 40, delta_indices: vec![8] },
        };
        let cov = approx_covariance(&r, 4.0);
        let v = &r.vectors()[0];
        assert!(frob(&(&cov - v * v.adjoint())) < 1e-12);
        // Mid-rise ψ centres sit half a step off zero.
        let mut e = CMatrix::zeros(4, 4);
        e[(0, 0)] = C64::new(1.0, 0.0);
        assert!(frob(&(cov - e)) < 2e-2);
    }

    #[test]
    fn covariance_is_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let slices: Vec<CMatrix> =
            (0..32).map(|_| CMatrix::from_fn(4, 4, |_, _| C64::new(rng.random(), rng.random()))).collect();
        let csi = CsiTensor::new(slices, 0.5).unwrap();
        let rep = build_bff(&csi, 0.5, 0, AngleQuantizer::default()).unwrap();
        let r = approx_covariance(&rep, 0.5);
        assert!(frob(&(&r - r.adjoint())) == 0.0);
        assert!(hermitian_eigen(&r).values.iter().all(|&l| l >= -1e-12));
    }
}
