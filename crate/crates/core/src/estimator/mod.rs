//! PWR-side estimation: sample covariances, MUSIC pre-estimation, client
//! association, concentrated log-likelihoods and the localization methods.

mod assign;
mod covariance;
mod likelihood;
mod methods;
mod music;
mod search;

pub use assign::{associate, hungarian, Association};
pub use covariance::{client_sample_cov, radar_sample_cov, ClientCovariance, CovarianceSet};
pub use likelihood::{loglik_client, loglik_radar, radar_residual, RadarLikelihood, NOISE_FLOOR};
pub use methods::{
    HybridAlternatingSummation, LocalizationInput, LocalizationResult, Localizer, MethodRegistry, MusicBff,
    MusicNdp, NdpAlternatingSummation, TargetEstimate,
};
pub use music::{music_2d, music_client, AngleGrid, ClientSpectrumPeak, MusicPeaks, Peak};
pub use search::{alternating_summation, PreEstimate, SearchConfig, TargetPreEstimate};
