//! Concentrated log-likelihoods in trace form, plus the residual form used
//! to cross-check them.

use crate::channel::{joint_steering, vectorize, CsiTensor};
use crate::linalg::{dotc, norm_sq, quad_form, CMatrix, CVector, C64};
use crate::scene::steering_unchecked;
use crate::{Error, Result};

/// Lower bound applied to noise variances so that noiseless runs keep finite
/// likelihood weights.
pub const NOISE_FLOOR: f64 = 1e-12;

/// A column whose residual energy after projection falls below this fraction
/// of its own energy is treated as lying in the span of the others.
const SPAN_TOL: f64 = 1e-9;

/// Tikhonov weight relative to the Gram trace for rank-deficient sets.
const TIKHONOV: f64 = 1e-9;

/// Radar likelihood `(Q/2σ²)·Tr{A′(A′)⁺ R̃}` bound to one covariance.
#[derive(Debug, Clone)]
pub struct RadarLikelihood<'a> {
    r: &'a CMatrix,
    scale: f64,
    n_a: usize,
    n_p: usize,
    spacing: f64,
}

/// Orthonormal basis of the columns held fixed during a sweep over one
/// target's candidates.
#[derive(Debug, Clone)]
pub struct FixedColumns {
    basis: Vec<CVector>,
    columns: Vec<CVector>,
    base: f64,
    degenerate: bool,
}

impl<'a> RadarLikelihood<'a> {
    pub fn new(r: &'a CMatrix, noise_variance: f64, num_subcarriers: usize, n_a: usize, n_p: usize, spacing: f64) -> Self {
        let scale = num_subcarriers as f64 / (2.0 * noise_variance.max(NOISE_FLOOR));
        RadarLikelihood { r, scale, n_a, n_p, spacing }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn column(&self, aod: f64, aoa: f64) -> CVector {
        joint_steering(aod, aoa, self.n_a, self.n_p, self.spacing)
    }

    /// Value and rank-deficiency flag for a full set of (AoD, AoA) pairs.
    pub fn evaluate(&self, angles: &[(f64, f64)]) -> (f64, bool) {
        let cols: Vec<CVector> = angles.iter().map(|&(d, a)| self.column(d, a)).collect();
        let (trace, degenerate) = projected_energy(self.r, &cols);
        (self.scale * trace, degenerate)
    }

    /// Prepares repeated evaluation with `fixed` columns and one free column.
    pub fn fix(&self, fixed: &[(f64, f64)]) -> FixedColumns {
        let columns: Vec<CVector> = fixed.iter().map(|&(d, a)| self.column(d, a)).collect();
        let (basis, degenerate) = orthonormalize(&columns);
        let base = if degenerate {
            projected_energy(self.r, &columns).0
        } else {
            basis.iter().map(|q| quad_form(self.r, q.as_slice())).sum()
        };
        FixedColumns { basis, columns, base, degenerate }
    }

    /// Value with the free column at `(aod, aoa)`.
    pub fn evaluate_with(&self, fixed: &FixedColumns, aod: f64, aoa: f64) -> (f64, bool) {
        self.evaluate_column(fixed, &self.column(aod, aoa))
    }

    /// As [`Self::evaluate_with`] for a precomputed joint steering vector.
    pub fn evaluate_column(&self, fixed: &FixedColumns, c: &CVector) -> (f64, bool) {
        if !fixed.degenerate {
            let mut r = c.clone();
            for q in &fixed.basis {
                let w = dotc(q.as_slice(), r.as_slice());
                r.axpy(-w, q, C64::new(1.0, 0.0));
            }
            let rr = norm_sq(r.as_slice());
            if rr > SPAN_TOL * norm_sq(c.as_slice()) {
                let gain = quad_form(self.r, r.as_slice()) / rr;
                return (self.scale * (fixed.base + gain), false);
            }
        }
        let mut all = fixed.columns.clone();
        all.push(c.clone());
        let (trace, _) = projected_energy(self.r, &all);
        (self.scale * trace, true)
    }
}

/// Modified Gram-Schmidt; the flag reports a column that lies (numerically)
/// in the span of the previous ones.
fn orthonormalize(cols: &[CVector]) -> (Vec<CVector>, bool) {
    let mut basis: Vec<CVector> = Vec::with_capacity(cols.len());
    let mut degenerate = false;
    for c in cols {
        let mut r = c.clone();
        for q in &basis {
            let w = dotc(q.as_slice(), r.as_slice());
            r.axpy(-w, q, C64::new(1.0, 0.0));
        }
        let rr = norm_sq(r.as_slice());
        if rr <= SPAN_TOL * norm_sq(c.as_slice()) {
            degenerate = true;
            continue;
        }
        basis.push(r.unscale(rr.sqrt()));
    }
    (basis, degenerate)
}

/// `Tr{P R}` for the projector onto span(`cols`), regularized when the
/// columns are (nearly) dependent.
fn projected_energy(r: &CMatrix, cols: &[CVector]) -> (f64, bool) {
    if cols.is_empty() {
        return (0.0, false);
    }
    let (basis, degenerate) = orthonormalize(cols);
    if !degenerate {
        return (basis.iter().map(|q| quad_form(r, q.as_slice())).sum(), false);
    }
    let a = CMatrix::from_columns(cols);
    let g = a.adjoint() * &a;
    let lambda = TIKHONOV * (0..g.nrows()).map(|i| g[(i, i)].re).sum::<f64>();
    let reg = &g + CMatrix::identity(g.nrows(), g.nrows()) * C64::new(lambda, 0.0);
    let m = a.adjoint() * r * &a;
    let value = match reg.cholesky() {
        Some(ch) => {
            let x = ch.solve(&m);
            (0..x.nrows()).map(|i| x[(i, i)].re).sum()
        }
        None => 0.0,
    };
    (value, true)
}

/// Radar log-likelihood for a set of (AoD, AoA) pairs. Returns the value and
/// a rank-deficiency flag.
pub fn loglik_radar(
    angles: &[(f64, f64)],
    r: &CMatrix,
    noise_variance: f64,
    num_subcarriers: usize,
    n_a: usize,
    n_p: usize,
    spacing: f64,
) -> Result<(f64, bool)> {
    if r.shape() != (n_a * n_p, n_a * n_p) {
        return Err(Error::invalid("radar covariance does not match the array sizes"));
    }
    if angles.iter().any(|(d, a)| !d.is_finite() || !a.is_finite()) {
        return Err(Error::invalid("non-finite candidate angle"));
    }
    Ok(RadarLikelihood::new(r, noise_variance, num_subcarriers, n_a, n_p, spacing).evaluate(angles))
}

/// Residual form `−(1/2σ²) Σ_q ‖h̃_q − A′β̂_q‖²` with `β̂_q = (A′)⁺h̃_q`, using
/// an SVD pseudo-inverse. Differs from [`loglik_radar`] by the
/// candidate-independent `−(1/2σ²) Σ_q ‖h̃_q‖²`.
pub fn radar_residual(angles: &[(f64, f64)], csi: &CsiTensor, noise_variance: f64, spacing: f64) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::invalid("residual needs at least one candidate"));
    }
    let (n_p, n_a) = (csi.n_rx, csi.n_tx);
    let cols: Vec<CVector> = angles.iter().map(|&(d, a)| joint_steering(d, a, n_a, n_p, spacing)).collect();
    let a = CMatrix::from_columns(&cols);
    let pinv = a.clone().pseudo_inverse(1e-12).map_err(Error::invalid)?;
    let mut total = 0.0;
    for h in &csi.slices {
        let v = vectorize(h);
        let beta = &pinv * &v;
        total += norm_sq((&v - &a * beta).as_slice());
    }
    Ok(-total / (2.0 * noise_variance.max(NOISE_FLOOR)))
}

/// Client log-likelihood `(Q·N_u/2σ²)·aᴴ(φ) R̃ a(φ)/N_A`.
pub fn loglik_client(
    aod: f64,
    r: &CMatrix,
    noise_variance: f64,
    num_subcarriers: usize,
    n_u: usize,
    spacing: f64,
) -> f64 {
    let n_a = r.nrows();
    if n_a == 0 {
        return 0.0;
    }
    let a = steering_unchecked(aod, n_a, spacing);
    let scale = (num_subcarriers * n_u) as f64 / (2.0 * noise_variance.max(NOISE_FLOOR));
    scale * quad_form(r, a.as_slice()) / n_a as f64
}
