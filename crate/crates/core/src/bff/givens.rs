//! Single-column Givens-rotation compression in the 802.11 feedback form
//! `v = D(φ) · G₂ᵀ(ψ₂) ⋯ G_Nᵀ(ψ_N) · e₁`.

use std::f64::consts::{PI, TAU};

use crate::linalg::{CVector, C64};
use crate::{Error, Result};

use super::svd::phase_normalize;

/// Angles of one compressed column: `N−1` phases in `[0, 2π)` followed by
/// `N−1` rotations in `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensAngles {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl GivensAngles {
    pub fn dim(&self) -> usize {
        self.phi.len() + 1
    }
}

/// Decomposes a unit vector into Givens angles. The vector is first rotated
/// so its last entry is real non-negative; the absolute phase is not coded.
pub fn compress_v(v: &[C64]) -> Result<GivensAngles> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("cannot compress a zero or non-finite vector"));
    }
    let ph = phase_normalize(v);
    let w: Vec<C64> = v.iter().map(|z| z * ph / norm).collect();
    let n = w.len();

    let phi: Vec<f64> = w[..n - 1].iter().map(|z| z.arg().rem_euclid(TAU)).collect();
    let mags: Vec<f64> = w.iter().map(|z| z.norm()).collect();

    let mut psi = Vec::with_capacity(n - 1);
    let mut head = mags[0];
    for &m in &mags[1..] {
        psi.push(m.atan2(head).clamp(0.0, PI / 2.0));
        head = head.hypot(m);
    }
    Ok(GivensAngles { phi, psi })
}

/// Rebuilds the phase-normalized unit vector from its angles.
pub fn decompress_v(angles: &GivensAngles) -> CVector {
    let n = angles.dim();
    let mut x = vec![0.0f64; n];
    x[0] = 1.0;
    // Rightmost rotation acts first.
    for l in (1..n).rev() {
        let (s, c) = angles.psi[l - 1].sin_cos();
        let (x0, xl) = (x[0], x[l]);
        x[0] = c * x0 - s * xl;
        x[l] = s * x0 + c * xl;
    }
    CVector::from_iterator(
        n,
        x.iter().enumerate().map(|(i, &m)| {
            if i < n - 1 {
                C64::from_polar(m, angles.phi[i])
            } else {
                C64::new(m, 0.0)
            }
        }),
    )
}
