//! Passive Wi-Fi radar (PWR) multitarget localization during an 802.11ax
//! MU-MIMO channel sounding session.
//!
//! The crate simulates the sounding exchange (AP null data packet, client
//! CSI estimation, compressed beamforming feedback) and implements the
//! PWR-side processing: sample covariances, MUSIC pre-estimation, client
//! association and per-target maximum-likelihood refinement that fuses the
//! radar covariance with covariances rebuilt from intercepted feedback.
//!
//! Module map:
//! - [`scene`]: geometry, angle conventions, steering vectors.
//! - [`channel`]: radar and communication channel synthesis, CSI observation.
//! - [`bff`]: client SVD, Givens compression, gain quantization, feedback codec.
//! - [`estimator`]: covariances, MUSIC, association, likelihoods and the
//!   localization strategies behind the [`estimator::Localizer`] trait.
//! - [`harness`]: Monte-Carlo driver, scoring and CSV output.

pub mod bff;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod scene;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
