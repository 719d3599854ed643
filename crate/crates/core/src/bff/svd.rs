use crate::channel::CsiTensor;
use crate::linalg::{CMatrix, CVector, C64};

/// Economy SVD of one CSI slice, `H = U·diag(σ)·Vᴴ`.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub u: CMatrix,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> CMatrix {
        let s = CMatrix::from_diagonal(&CVector::from_iterator(
            self.singular_values.len(),
            self.singular_values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        &self.u * s * self.v.adjoint()
    }

    pub fn strongest(&self) -> (f64, CVector) {
        (self.singular_values[0], self.v.column(0).into_owned())
    }
}

/// Unit phasor that makes the last entry of `v` real non-negative.
pub fn phase_normalize(v: &[C64]) -> C64 {
    match v.last() {
        Some(z) if z.norm() > 0.0 => z.conj() / z.norm(),
        _ => C64::new(1.0, 0.0),
    }
}

/// Per-subcarrier SVD with singular values sorted descending and each right
/// singular vector rotated so its last entry is real non-negative (the
/// matching left vector takes the same phase).
pub fn client_svd(csi: &CsiTensor) -> Vec<SvdTriple> {
    csi.slices.iter().map(svd_slice).collect()
}

fn svd_slice(h: &CMatrix) -> SvdTriple {
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᴴ");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort keeps column order on ties.
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut uu = CMatrix::zeros(u.nrows(), r);
    let mut vv = CMatrix::zeros(v_t.ncols(), r);
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let v_col: Vec<C64> = v_t.row(src).iter().map(|z| z.conj()).collect();
        let ph = phase_normalize(&v_col);
        for (i, z) in v_col.iter().enumerate() {
            vv[(i, dst)] = z * ph;
        }
        for i in 0..u.nrows() {
            uu[(i, dst)] = u[(i, src)] * ph;
        }
        s.push(svd.singular_values[src]);
    }
    SvdTriple { u: uu, singular_values: s, v: vv }
}
