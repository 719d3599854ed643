//! Radar and communication channel synthesis, NDP transmission and
//! least-squares CSI extraction.
//!
//! Vectorization convention: `vec(H)` stacks the columns of the `N_P × N_A`
//! matrix, so entry `a·N_P + p` holds `H[p, a]`. With that convention a
//! single radar path `a(ϑ) β aᴴ(φ)` vectorizes to
//! `(conj(a(φ)) ⊗ a(ϑ)) β`; [`joint_steering`] builds exactly this vector
//! and the estimators rely on it.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{CMatrix, CVector, C64};
use crate::scene::{angle_of, steering_unchecked, AngleSet, Scenario, FIELD_LIMIT_DEG};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Range of the extra path length of client multipath components, meters.
pub const MULTIPATH_EXCESS_RANGE_M: (f64, f64) = (3.0, 30.0);

/// Joint AoD/AoA steering vector `conj(a(φ)) ⊗ a(ϑ)` of length `n_a·n_p`.
pub fn joint_steering(aod: f64, aoa: f64, n_a: usize, n_p: usize, spacing: f64) -> CVector {
    let tx = steering_unchecked(aod, n_a, spacing);
    let rx = steering_unchecked(aoa, n_p, spacing);
    let mut out = CVector::zeros(n_a * n_p);
    for a in 0..n_a {
        let t = tx[a].conj();
        for p in 0..n_p {
            out[a * n_p + p] = t * rx[p];
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vectorize(h: &CMatrix) -> CVector {
    CVector::from_column_slice(h.as_slice())
}

/// The NDP training matrix `S_q`: a normalized Sylvester-Hadamard mapping
/// (rows = AP antennas, columns = HE-LTF symbols), identical on every
/// subcarrier.
pub fn ndp_signal(_q: usize, n_a: usize) -> Result<CMatrix> {
    if n_a == 0 || !n_a.is_power_of_two() {
        return Err(Error::config(format!("NDP mapping needs a power-of-two antenna count, got {n_a}")));
    }
    let scale = 1.0 / (n_a as f64).sqrt();
    Ok(CMatrix::from_fn(n_a, n_a, |r, c| {
        let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign * scale, 0.0)
    }))
}

/// Per-subcarrier complex channel estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTensor {
    pub n_rx: usize,
    pub n_tx: usize,
    pub slices: Vec<CMatrix>,
    /// Per-entry noise variance σ² of the estimates.
    pub noise_variance: f64,
}

const CSI_MAGIC: &[u8; 4] = b"CSI1";

impl CsiTensor {
    pub fn new(slices: Vec<CMatrix>, noise_variance: f64) -> Result<Self> {
        let (n_rx, n_tx) = slices.first().map(|m| m.shape()).unwrap_or((0, 0));
        if slices.iter().any(|m| m.shape() != (n_rx, n_tx)) {
            return Err(Error::invalid("inconsistent CSI slice dimensions"));
        }
        Ok(CsiTensor { n_rx, n_tx, slices, noise_variance })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.slices.len()
    }

    /// Binary dump: magic, `n_rx`, `n_tx`, `q` as u32 LE, σ² as f64 LE, then
    /// row-major `(re, im)` f64 LE pairs per subcarrier.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 16 * self.n_rx * self.n_tx * self.slices.len());
        out.extend_from_slice(CSI_MAGIC);
        for v in [self.n_rx, self.n_tx, self.slices.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.noise_variance.to_le_bytes());
        for m in &self.slices {
            for r in 0..self.n_rx {
                for c in 0..self.n_tx {
                    out.extend_from_slice(&m[(r, c)].re.to_le_bytes());
                    out.extend_from_slice(&m[(r, c)].im.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..4] != CSI_MAGIC {
            return Err(Error::Decode("missing CSI header".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (n_rx, n_tx, q) = (u32_at(4), u32_at(8), u32_at(12));
        let noise_variance = f64_at(16);
        let need = 24 + 16 * n_rx * n_tx * q;
        if bytes.len() != need {
            return Err(Error::Decode(format!("expected {need} bytes, got {}", bytes.len())));
        }
        let mut pos = 24;
        let mut slices = Vec::with_capacity(q);
        for _ in 0..q {
            let mut m = CMatrix::zeros(n_rx, n_tx);
            for r in 0..n_rx {
                for c in 0..n_tx {
                    m[(r, c)] = C64::new(f64_at(pos), f64_at(pos + 8));
                    pos += 16;
                }
            }
            slices.push(m);
        }
        Ok(CsiTensor { n_rx, n_tx, slices, noise_variance })
    }

    /// Structured-text dump, one row-major line per subcarrier.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# csi n_rx={} n_tx={} q={} noise_variance={}\n",
            self.n_rx,
            self.n_tx,
            self.slices.len(),
            self.noise_variance
        );
        for (q, m) in self.slices.iter().enumerate() {
            let _ = write!(s, "{q}");
            for r in 0..self.n_rx {
                for c in 0..self.n_tx {
                    let _ = write!(s, " {} {}", m[(r, c)].re, m[(r, c)].im);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Radar channel between the AP and the PWR (direct path and clutter
/// already suppressed).
#[derive(Debug, Clone)]
pub struct RadarChannel {
    /// `H^r_q`, `N_P × N_A`.
    pub matrices: Vec<CMatrix>,
    /// `β^r_{q,k}`, indexed `[q][k]`.
    pub coefficients: Vec<Vec<C64>>,
    /// Bistatic delays, seconds.
    pub delays: Vec<f64>,
    pub angles: AngleSet,
    pub n_tx: usize,
    pub n_rx: usize,
    pub spacing: f64,
}

impl RadarChannel {
    /// `A(Θ)·diag(β_q)·Aᴴ(Φ)` recomputed from the stored factors.
    pub fn reconstruct(&self, q: usize) -> CMatrix {
        let mut h = CMatrix::zeros(self.n_rx, self.n_tx);
        for (k, beta) in self.coefficients[q].iter().enumerate() {
            let rx = steering_unchecked(self.angles.aoa[k], self.n_rx, self.spacing);
            let tx = steering_unchecked(self.angles.aod[k], self.n_tx, self.spacing);
            h += (rx * tx.adjoint()) * *beta;
        }
        h
    }

    pub fn mean_path_power(&self) -> f64 {
        let n: usize = self.coefficients.iter().map(|c| c.len()).sum();
        if n == 0 {
            return 0.0;
        }
        self.coefficients.iter().flatten().map(|b| b.norm_sqr()).sum::<f64>() / n as f64
    }
}

/// Communication channel between the AP and one client.
#[derive(Debug, Clone)]
pub struct CommChannel {
    /// `H^c_{u,q}`, `N_u × N_A`.
    pub matrices: Vec<CMatrix>,
    /// `β^c_{u,q}`, length `N_u` per subcarrier.
    pub los_coefficients: Vec<CVector>,
    /// `B^c_{u,q}`, `N_u × (K_u − 1)` per subcarrier.
    pub multipath_coefficients: Vec<CMatrix>,
    pub los_aod: f64,
    pub multipath_aods: Vec<f64>,
    pub n_tx: usize,
    pub spacing: f64,
}

impl CommChannel {
    pub fn los_part(&self, q: usize) -> CMatrix {
        let a = steering_unchecked(self.los_aod, self.n_tx, self.spacing);
        &self.los_coefficients[q] * a.adjoint()
    }

    pub fn multipath_part(&self, q: usize) -> CMatrix {
        let n_rx = self.los_coefficients[q].len();
        let mut out = CMatrix::zeros(n_rx, self.n_tx);
        for (m, &aod) in self.multipath_aods.iter().enumerate() {
            let a = steering_unchecked(aod, self.n_tx, self.spacing);
            out += self.multipath_coefficients[q].column(m) * a.adjoint();
        }
        out
    }

    /// Σ_q ‖LoS‖²_F / Σ_q ‖multipath‖²_F from the stored factors.
    pub fn k_factor_linear(&self) -> f64 {
        let (mut los, mut mp) = (0.0, 0.0);
        for q in 0..self.matrices.len() {
            los += crate::linalg::frob_sq(&self.los_part(q));
            mp += crate::linalg::frob_sq(&self.multipath_part(q));
        }
        los / mp
    }
}

/// Raw bistatic amplitude with unit reflectivity, before normalization.
fn bistatic_amplitude(d_tx: f64, d_rx: f64) -> f64 {
    1.0 / ((4.0 * PI).powf(1.5) * d_tx * d_rx)
}

/// Raw free-space LoS amplitude on the same scale as [`bistatic_amplitude`].
fn los_amplitude(d: f64) -> f64 {
    1.0 / (4.0 * PI * d)
}

const MIN_RANGE_M: f64 = 1e-6;

fn target_ranges(scenario: &Scenario) -> Result<Vec<(f64, f64)>> {
    scenario
        .targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let d1 = scenario.ap_position.distance(&t.position);
            let d2 = scenario.pwr_position.distance(&t.position);
            if d1 < MIN_RANGE_M || d2 < MIN_RANGE_M {
                return Err(Error::InvalidGeometry(format!("target {k} co-located with the AP or PWR")));
            }
            Ok((d1, d2))
        })
        .collect()
}

/// Global amplitude scale making `mean_k |β^r_k|² = 1`; shared by the radar
/// and communication channels so their relative levels stay physical.
pub fn amplitude_scale(scenario: &Scenario) -> Result<f64> {
    let ranges = target_ranges(scenario)?;
    if ranges.is_empty() {
        return Ok(1.0);
    }
    let mean_sq = ranges.iter().map(|&(a, b)| bistatic_amplitude(a, b).powi(2)).sum::<f64>() / ranges.len() as f64;
    Ok(1.0 / mean_sq.sqrt())
}

fn delay_phasor(q: usize, spacing: f64, tau: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * q as f64 * spacing * tau)
}

fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * PI * rng.random::<f64>()
}

/// Synthesizes `H^r_q = A(Θ) B_q Aᴴ(Φ)` for all subcarriers.
pub fn synth_radar_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<RadarChannel> {
    let ranges = target_ranges(scenario)?;
    let angles = scenario.angles()?;
    let scale = amplitude_scale(scenario)?;
    let n_tx = scenario.ap_array.num_elements;
    let n_rx = scenario.pwr_array.num_elements;
    let spacing = scenario.ap_array.spacing;
    if (scenario.pwr_array.spacing - spacing).abs() > 0.0 {
        return Err(Error::config("AP and PWR arrays must share the element spacing"));
    }

    let phases: Vec<f64> = ranges.iter().map(|_| uniform_phase(rng)).collect();
    let delays: Vec<f64> = ranges.iter().map(|&(a, b)| (a + b) / SPEED_OF_LIGHT).collect();
    let amps: Vec<f64> = ranges.iter().map(|&(a, b)| scale * bistatic_amplitude(a, b)).collect();

    let tx: Vec<CVector> = angles.aod.iter().map(|&a| steering_unchecked(a, n_tx, spacing)).collect();
    let rx: Vec<CVector> = angles.aoa.iter().map(|&a| steering_unchecked(a, n_rx, spacing)).collect();
    let outer: Vec<CMatrix> = tx.iter().zip(&rx).map(|(t, r)| r * t.adjoint()).collect();

    let q_count = scenario.num_subcarriers;
    let mut matrices = Vec::with_capacity(q_count);
    let mut coefficients = Vec::with_capacity(q_count);
    for q in 0..q_count {
        let betas: Vec<C64> = (0..amps.len())
            .map(|k| C64::from_polar(amps[k], phases[k]) * delay_phasor(q, scenario.subcarrier_spacing, delays[k]))
            .collect();
        let mut h = CMatrix::zeros(n_rx, n_tx);
        for (o, b) in outer.iter().zip(&betas) {
            h += o * *b;
        }
        matrices.push(h);
        coefficients.push(betas);
    }
    Ok(RadarChannel { matrices, coefficients, delays, angles, n_tx, n_rx, spacing })
}

/// Synthesizes `H^c_{u,q} = β_{u,q} aᴴ(φ_u) + B_{u,q} Aᴴ(Φ_u)` for client `u`.
pub fn synth_comm_channel<R: Rng + ?Sized>(scenario: &Scenario, u: usize, rng: &mut R) -> Result<CommChannel> {
    let client = scenario
        .clients
        .get(u)
        .ok_or_else(|| Error::invalid(format!("client {u} does not exist")))?;
    let k_db = client.ricean_k_factor_db;
    if k_db.is_nan() || k_db == f64::NEG_INFINITY {
        return Err(Error::config(format!("Ricean K-factor must be a number, got {k_db}")));
    }
    let n_tx = scenario.ap_array.num_elements;
    let n_rx = client.array.num_elements;
    let spacing = scenario.ap_array.spacing;
    let limit = FIELD_LIMIT_DEG.to_radians();

    let d_los = scenario.ap_position.distance(&client.position);
    if d_los < MIN_RANGE_M {
        return Err(Error::InvalidGeometry(format!("client {u} co-located with the AP")));
    }
    let los_aod = angle_of(&scenario.ap_position, &scenario.ap_array.boresight, &client.position)?;
    let los_aoa = angle_of(&client.position, &client.array.boresight, &scenario.ap_position)?;
    let tau_los = d_los / SPEED_OF_LIGHT;
    let los_amp = amplitude_scale(scenario)? * los_amplitude(d_los);
    let los_phase = uniform_phase(rng);
    let los_rx = steering_unchecked(los_aoa, n_rx, spacing);

    let n_mp = if k_db.is_infinite() { 0 } else { client.num_multipath };
    let mut mp_aods = Vec::with_capacity(n_mp);
    let mut mp_rx = Vec::with_capacity(n_mp);
    let mut mp_tau = Vec::with_capacity(n_mp);
    let mut mp_phase = Vec::with_capacity(n_mp);
    let mut mp_weight = Vec::with_capacity(n_mp);
    for _ in 0..n_mp {
        mp_aods.push(limit * (2.0 * rng.random::<f64>() - 1.0));
        mp_rx.push(steering_unchecked(limit * (2.0 * rng.random::<f64>() - 1.0), n_rx, spacing));
        let (lo, hi) = MULTIPATH_EXCESS_RANGE_M;
        mp_tau.push(tau_los + (lo + (hi - lo) * rng.random::<f64>()) / SPEED_OF_LIGHT);
        mp_phase.push(uniform_phase(rng));
        let w: f64 = Exp1.sample(rng);
        mp_weight.push(w);
    }
    let w_sum: f64 = mp_weight.iter().sum();

    let q_count = scenario.num_subcarriers;
    let mut los_coefficients = Vec::with_capacity(q_count);
    let mut multipath_coefficients = Vec::with_capacity(q_count);
    for q in 0..q_count {
        let g = C64::from_polar(los_amp, los_phase) * delay_phasor(q, scenario.subcarrier_spacing, tau_los);
        los_coefficients.push(los_rx.map(|z| z * g));
        let mut b = CMatrix::zeros(n_rx, n_mp);
        for m in 0..n_mp {
            let amp = (mp_weight[m] / w_sum).sqrt();
            let c = C64::from_polar(amp, mp_phase[m]) * delay_phasor(q, scenario.subcarrier_spacing, mp_tau[m]);
            b.set_column(m, &mp_rx[m].map(|z| z * c));
        }
        multipath_coefficients.push(b);
    }

    let mut channel = CommChannel {
        matrices: Vec::new(),
        los_coefficients,
        multipath_coefficients,
        los_aod,
        multipath_aods: mp_aods,
        n_tx,
        spacing,
    };

    if n_mp > 0 {
        // Rescale the multipath block so the K-factor holds exactly over the band.
        let (mut los_e, mut mp_e) = (0.0, 0.0);
        for q in 0..q_count {
            los_e += crate::linalg::frob_sq(&channel.los_part(q));
            mp_e += crate::linalg::frob_sq(&channel.multipath_part(q));
        }
        if mp_e > 0.0 {
            let target = los_e / 10f64.powf(k_db / 10.0);
            let s = (target / mp_e).sqrt();
            for b in &mut channel.multipath_coefficients {
                *b *= C64::new(s, 0.0);
            }
        }
    }

    channel.matrices = (0..q_count).map(|q| channel.los_part(q) + channel.multipath_part(q)).collect();
    Ok(channel)
}

/// Noise variance for an SNR in dB given unit mean radar path power;
/// `+inf` means noiseless.
pub fn noise_variance_for_snr(snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("invalid SNR {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(10f64.powf(-snr_db / 10.0))
}

/// Transmits the NDP over `channel`, adds AWGN and equalizes with `S_qᴴ`.
pub fn observe_with_variance<R: Rng + ?Sized>(
    channel: &[CMatrix],
    noise_variance: f64,
    rng: &mut R,
) -> Result<CsiTensor> {
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid(format!("invalid noise variance {noise_variance}")));
    }
    let Some(first) = channel.first() else {
        return CsiTensor::new(Vec::new(), noise_variance);
    };
    let (n_rx, n_tx) = first.shape();
    let s = ndp_signal(0, n_tx)?;
    let s_h = s.adjoint();
    let std = (noise_variance / 2.0).sqrt();
    let mut slices = Vec::with_capacity(channel.len());
    for h in channel {
        if h.shape() != (n_rx, n_tx) {
            return Err(Error::invalid("inconsistent channel dimensions"));
        }
        let mut z = h * &s;
        if noise_variance > 0.0 {
            for v in z.iter_mut() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                *v += C64::new(std * re, std * im);
            }
        }
        slices.push(z * &s_h);
    }
    CsiTensor::new(slices, noise_variance)
}

/// CSI observation at `snr_db` (unit mean path power convention).
pub fn observe_csi<R: Rng + ?Sized>(channel: &[CMatrix], snr_db: f64, rng: &mut R) -> Result<CsiTensor> {
    observe_with_variance(channel, noise_variance_for_snr(snr_db)?, rng)
}
