use crate::channel::{vectorize, CsiTensor};
use crate::linalg::{hermitian_eigen, CMatrix};

/// Approximate covariance of one client's channel, rebuilt from its feedback.
#[derive(Debug, Clone)]
pub struct ClientCovariance {
    pub client: usize,
    pub matrix: CMatrix,
    /// Client antenna count `N_u`.
    pub n_rx: usize,
}

/// Everything the PWR likelihoods need.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    /// `(N_A·N_P) × (N_A·N_P)`.
    pub radar: CMatrix,
    pub clients: Vec<ClientCovariance>,
    pub radar_noise_variance: f64,
    pub client_noise_variance: f64,
    pub num_subcarriers: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub spacing: f64,
}

impl CovarianceSet {
    pub fn client(&self, u: usize) -> Option<&ClientCovariance> {
        self.clients.iter().find(|c| c.client == u)
    }

    /// Hermitian PSD check with tolerance `1e-12·trace`.
    pub fn is_psd(m: &CMatrix) -> bool {
        let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        let herm = crate::linalg::frob(&(m - m.adjoint())) <= 1e-12 * tr.abs().max(1e-300);
        herm && hermitian_eigen(m).values.iter().all(|&l| l >= -1e-12 * tr.abs())
    }
}

/// `(1/Q) Σ_q vec(H̃_q) vec(H̃_q)ᴴ`.
pub fn radar_sample_cov(csi: &CsiTensor) -> CMatrix {
    let n = csi.n_rx * csi.n_tx;
    let mut r = CMatrix::zeros(n, n);
    if csi.slices.is_empty() {
        return r;
    }
    for h in &csi.slices {
        let v = vectorize(h);
        r.ger(crate::C64::new(1.0, 0.0), &v, &v.conjugate(), crate::C64::new(1.0, 0.0));
    }
    r.unscale(csi.slices.len() as f64)
}

/// Full-CSI client covariance `(1/(Q·N_u)) Σ_q H̃_qᴴ H̃_q`.
pub fn client_sample_cov(csi: &CsiTensor) -> CMatrix {
    let mut r = CMatrix::zeros(csi.n_tx, csi.n_tx);
    if csi.slices.is_empty() {
        return r;
    }
    for h in &csi.slices {
        r += h.adjoint() * h;
    }
    r.unscale((csi.slices.len() * csi.n_rx) as f64)
}
