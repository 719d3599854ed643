use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::bff::{approx_covariance, build_bff, AngleQuantizer, BffReport};
use crate::channel::{noise_variance_for_snr, observe_with_variance, synth_comm_channel, synth_radar_channel};
use crate::estimator::{
    associate, music_2d, music_client, radar_sample_cov, AngleGrid, Association, ClientCovariance, CovarianceSet,
    LocalizationInput, LocalizationResult, Localizer, PreEstimate, SearchConfig, NOISE_FLOOR,
};
use crate::scene::{sample_scenario, Scenario, ScenarioConfig};
use crate::{Error, Result};

/// Resampling budget for one trial before giving up.
pub const MAX_TRIAL_ATTEMPTS: u32 = 100;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial attempt, derived only from its coordinates.
pub fn trial_seed(master: u64, snr_index: usize, trial: usize, attempt: u32) -> u64 {
    let mut h = splitmix64(master);
    for part in [snr_index as u64, trial as u64, attempt as u64] {
        h = splitmix64(h ^ part);
    }
    h
}

/// Everything the PWR has once the sounding exchange is over.
#[derive(Debug, Clone)]
pub struct SoundingData {
    pub covariances: CovarianceSet,
    pub reports: Vec<BffReport>,
    pub client_aods: Vec<f64>,
    pub association: Association,
    pub pre: PreEstimate,
}

/// Settings of the PWR processing chain.
#[derive(Debug, Clone, Copy)]
pub struct ProcessingSettings {
    pub quantizer: AngleQuantizer,
    pub gate: f64,
    pub radar_grid: AngleGrid,
    pub client_grid: AngleGrid,
}

impl ProcessingSettings {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Ok(ProcessingSettings {
            quantizer: config.quantizer()?,
            gate: config.gate(),
            radar_grid: AngleGrid::radar_default(),
            client_grid: AngleGrid::client_default(),
        })
    }
}

impl Default for ProcessingSettings {
    fn default() -> Self {
        ProcessingSettings {
            quantizer: AngleQuantizer::default(),
            gate: 10f64.to_radians(),
            radar_grid: AngleGrid::radar_default(),
            client_grid: AngleGrid::client_default(),
        }
    }
}

/// Runs the sounding session on `scenario`: the AP sends the NDP, the PWR
/// and each client estimate their CSI, clients send feedback, and the PWR
/// builds its covariances and pre-estimates.
pub fn sound<R: rand::Rng + ?Sized>(
    scenario: &Scenario,
    snr_db: f64,
    settings: &ProcessingSettings,
    rng: &mut R,
) -> Result<SoundingData> {
    let sigma2 = noise_variance_for_snr(snr_db)?;
    let radar = synth_radar_channel(scenario, rng)?;
    let comms = (0..scenario.num_clients())
        .map(|u| synth_comm_channel(scenario, u, rng))
        .collect::<Result<Vec<_>>>()?;

    let radar_csi = observe_with_variance(&radar.matrices, sigma2, rng)?;
    let gain_reference = sigma2.max(NOISE_FLOOR);
    let mut reports = Vec::with_capacity(comms.len());
    for (u, c) in comms.iter().enumerate() {
        let csi = observe_with_variance(&c.matrices, sigma2, rng)?;
        let report = build_bff(&csi, gain_reference, u as u16, settings.quantizer)?;
        // The PWR only sees the serialized record.
        reports.push(BffReport::from_bytes(&report.to_bytes())?);
    }

    let spacing = scenario.ap_array.spacing;
    let clients: Vec<ClientCovariance> = reports
        .iter()
        .map(|r| ClientCovariance {
            client: r.client as usize,
            matrix: approx_covariance(r, gain_reference),
            n_rx: r.n_rx as usize,
        })
        .collect();
    let covariances = CovarianceSet {
        radar: radar_sample_cov(&radar_csi),
        clients,
        radar_noise_variance: sigma2,
        client_noise_variance: sigma2,
        num_subcarriers: scenario.num_subcarriers,
        n_tx: scenario.ap_array.num_elements,
        n_rx: scenario.pwr_array.num_elements,
        spacing,
    };

    let peaks = music_2d(
        &covariances.radar,
        scenario.num_targets(),
        &settings.radar_grid,
        &settings.radar_grid,
        covariances.n_tx,
        covariances.n_rx,
        spacing,
    )?;
    let client_aods = covariances
        .clients
        .iter()
        .map(|c| music_client(&c.matrix, &settings.client_grid, spacing).map(|p| p.aod))
        .collect::<Result<Vec<_>>>()?;
    let radar_aods: Vec<f64> = peaks.peaks.iter().map(|p| p.aod).collect();
    let association = associate(&client_aods, &radar_aods, settings.gate);
    let pre = PreEstimate::from_music(&peaks, &client_aods, &association);
    Ok(SoundingData { covariances, reports, client_aods, association, pre })
}

/// One completed trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub snr_index: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    /// Attempts discarded for infeasible geometry.
    pub resamples: u32,
    pub scenario: Scenario,
    pub sounding: SoundingData,
    /// One per method, in the order the methods were given.
    pub results: Vec<LocalizationResult>,
}

fn resamplable(e: &Error) -> bool {
    matches!(
        e,
        Error::InfeasibleGeometry { .. } | Error::InvalidGeometry(_) | Error::OutOfField { .. } | Error::NoIntersection
    )
}

/// Runs one trial end to end. All methods consume the same sounding data.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    scenario_config: &ScenarioConfig,
    settings: &ProcessingSettings,
    search: &SearchConfig,
    methods: &[Arc<dyn Localizer>],
    master_seed: u64,
    snr_index: usize,
    snr_db: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let mut last_err = None;
    for attempt in 0..MAX_TRIAL_ATTEMPTS {
        let seed = trial_seed(master_seed, snr_index, trial, attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prepared = sample_scenario(scenario_config, &mut rng)
            .and_then(|scenario| sound(&scenario, snr_db, settings, &mut rng).map(|s| (scenario, s)));
        let (scenario, sounding) = match prepared {
            Ok(v) => v,
            Err(e) if resamplable(&e) => {
                log::debug!("trial {trial} attempt {attempt} resampled: {e}");
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let geometry = scenario.geometry();
        let input = LocalizationInput { pre: &sounding.pre, covs: &sounding.covariances, geometry: &geometry, search };
        let results = methods.iter().map(|m| m.localize(&input)).collect::<Result<Vec<_>>>()?;
        return Ok(TrialOutcome { snr_index, snr_db, trial, seed, resamples: attempt, scenario, sounding, results });
    }
    Err(last_err.unwrap_or(Error::InfeasibleGeometry { attempts: MAX_TRIAL_ATTEMPTS as usize }))
}
