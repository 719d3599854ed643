//! MUSIC pre-estimation on the radar covariance and the beamforming
//! spectrum on client covariances.

use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigen, quad_form, CMatrix, C64};
use crate::scene::steering_unchecked;
use crate::{Error, Result};

/// Uniform angle grid, stored in degrees for exact reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub start_deg: f64,
    pub step_deg: f64,
    pub count: usize,
}

impl AngleGrid {
    /// Closed grid `start, start+step, …, ≤ stop`.
    pub fn degrees(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::config(format!("bad angle grid {start}..{stop} step {step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(AngleGrid { start_deg: start, step_deg: step, count })
    }

    /// ±80° at 0.5°, the radar pre-estimation grid.
    pub fn radar_default() -> Self {
        Self::degrees(-80.0, 80.0, 0.5).unwrap()
    }

    /// ±80° at 0.25°, the client spectrum grid.
    pub fn client_default() -> Self {
        Self::degrees(-80.0, 80.0, 0.25).unwrap()
    }

    pub fn angle(&self, i: usize) -> f64 {
        (self.start_deg + self.step_deg * i as f64).to_radians()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.angle(i)).collect()
    }

    pub fn step(&self) -> f64 {
        self.step_deg.to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub aod: f64,
    pub aoa: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicPeaks {
    /// Descending by height.
    pub peaks: Vec<Peak>,
    /// Signal/noise split ambiguous (tied eigenvalues) or flat spectrum.
    pub degenerate: bool,
    /// Fewer than `K` strict local maxima; padded with the highest grid values.
    pub fallback: bool,
}

/// Per-eigenvector weights of the noise projector. A cluster of eigenvalues
/// tied across the signal/noise boundary is split fractionally, which is the
/// average over every admissible choice of noise basis.
fn noise_weights(values: &[f64], k: usize) -> (Vec<f64>, bool) {
    let n = values.len();
    let mut w: Vec<f64> = (0..n).map(|i| if i >= k { 1.0 } else { 0.0 }).collect();
    if k == 0 || k >= n {
        return (w, false);
    }
    let tol = 1e-9 * values[0].abs().max(values[n - 1].abs());
    if values[k - 1] - values[k] > tol {
        return (w, false);
    }
    let lo = (0..k).find(|&i| values[i] - values[k] <= tol).unwrap_or(k - 1);
    let hi = (k..n).rev().find(|&i| values[k - 1] - values[i] <= tol).unwrap_or(k);
    let size = hi - lo + 1;
    let frac = (hi + 1 - k) as f64 / size as f64;
    for wi in &mut w[lo..=hi] {
        *wi = frac;
    }
    (w, true)
}

/// Two-dimensional MUSIC over (AoD, AoA) grids; returns the `k` highest
/// strict local maxima (8-neighbourhood).
pub fn music_2d(
    r: &CMatrix,
    k: usize,
    aod_grid: &AngleGrid,
    aoa_grid: &AngleGrid,
    n_a: usize,
    n_p: usize,
    spacing: f64,
) -> Result<MusicPeaks> {
    let n = n_a * n_p;
    if r.shape() != (n, n) {
        return Err(Error::invalid(format!("radar covariance must be {n}x{n}")));
    }
    if k >= n {
        return Err(Error::invalid(format!("MUSIC needs K < N_A·N_P, got K = {k}")));
    }
    if aod_grid.count == 0 || aoa_grid.count == 0 {
        return Err(Error::config("empty MUSIC grid"));
    }
    if k == 0 {
        return Ok(MusicPeaks { peaks: Vec::new(), degenerate: false, fallback: false });
    }

    let eig = hermitian_eigen(r);
    let (weights, mut degenerate) = noise_weights(&eig.values, k);
    let used: Vec<(usize, f64)> = weights.iter().cloned().enumerate().filter(|(_, w)| *w > 0.0).collect();

    let rx: Vec<Vec<C64>> =
        (0..aoa_grid.count).map(|j| steering_unchecked(aoa_grid.angle(j), n_p, spacing).as_slice().to_vec()).collect();

    let (na, nb) = (aod_grid.count, aoa_grid.count);
    let mut spec = vec![0.0f64; na * nb];
    let mut proj = vec![C64::new(0.0, 0.0); used.len() * n_p];
    for i in 0..na {
        let tx = steering_unchecked(aod_grid.angle(i), n_a, spacing);
        // proj[e][p] = Σ_a conj(E[a·N_P + p, e]) · conj(tx[a]).
        for (slot, &(e, _)) in used.iter().enumerate() {
            for p in 0..n_p {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..n_a {
                    acc += (eig.vectors[(a * n_p + p, e)] * tx[a]).conj();
                }
                proj[slot * n_p + p] = acc;
            }
        }
        for (j, rxj) in rx.iter().enumerate() {
            let mut den = 0.0;
            for (slot, &(_, w)) in used.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..n_p {
                    acc += proj[slot * n_p + p] * rxj[p];
                }
                den += w * acc.norm_sqr();
            }
            spec[i * nb + j] = 1.0 / den.max(f64::MIN_POSITIVE);
        }
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in &spec {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if hi - lo <= 1e-12 * hi.abs() {
        degenerate = true;
    }

    let mut maxima: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..na {
        for j in 0..nb {
            let s = spec[i * nb + j];
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= na as i64 || jj >= nb as i64 {
                        continue;
                    }
                    if spec[ii as usize * nb + jj as usize] >= s {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                maxima.push((s, i, j));
            }
        }
    }
    let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    maxima.sort_by(order);
    let fallback = maxima.len() < k;
    maxima.truncate(k);
    if fallback {
        let mut all: Vec<(f64, usize, usize)> =
            (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).map(|(i, j)| (spec[i * nb + j], i, j)).collect();
        all.sort_by(order);
        for cand in all {
            if maxima.len() >= k {
                break;
            }
            if !maxima.iter().any(|m| m.1 == cand.1 && m.2 == cand.2) {
                maxima.push(cand);
            }
        }
        maxima.sort_by(order);
        log::debug!("MUSIC found fewer than {k} local maxima; padded from the raw grid");
    }

    let peaks = maxima
        .into_iter()
        .map(|(h, i, j)| Peak { aod: aod_grid.angle(i), aoa: aoa_grid.angle(j), height: h })
        .collect();
    Ok(MusicPeaks { peaks, degenerate, fallback })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientSpectrumPeak {
    pub aod: f64,
    pub value: f64,
    /// Flat spectrum; the lowest grid index was returned.
    pub degenerate: bool,
}

/// Argmax over `grid` of the beamforming spectrum `aᴴ(φ) R a(φ)`.
pub fn music_client(r: &CMatrix, grid: &AngleGrid, spacing: f64) -> Result<ClientSpectrumPeak> {
    if grid.count == 0 {
        return Err(Error::config("empty client grid"));
    }
    let n = r.nrows();
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..grid.count {
        let a = steering_unchecked(grid.angle(i), n, spacing);
        let v = quad_form(r, a.as_slice());
        lo = lo.min(v);
        hi = hi.max(v);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let degenerate = hi - lo <= 1e-12 * hi.abs();
    Ok(ClientSpectrumPeak { aod: grid.angle(best_i), value: best, degenerate })
}
