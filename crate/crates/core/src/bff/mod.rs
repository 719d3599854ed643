//! Client-side beamforming feedback generation and PWR-side interception.
//!
//! A client takes the SVD of each subcarrier's CSI, keeps the strongest
//! right singular vector, compresses it into Givens angles and quantizes
//! both the angles and the stream gain. The PWR decodes the record and
//! rebuilds an approximate client channel covariance from it.

mod givens;
mod quant;
mod report;
mod svd;

pub use givens::{compress_v, decompress_v, GivensAngles};
pub use quant::{
    dequantize_gain, quantize_gain, AngleQuantizer, GainReport, AVG_SNR_MAX_DB, AVG_SNR_MIN_DB, AVG_SNR_STEP_DB,
    DELTA_SNR_MAX_DB, DELTA_SNR_MIN_DB,
};
pub use report::{approx_covariance, build_bff, BffReport};
pub use svd::{client_svd, phase_normalize, SvdTriple};
