//! Small complex dense-matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Thin SVD `m = U diag(s) Vᴴ` with singular values in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_adjoint: CMatrix,
}

impl Svd {
    pub fn new(m: &CMatrix) -> Self {
        let svd = m.clone().svd(true, true);
        Svd {
            u: svd.u.expect("u requested"),
            singular_values: svd.singular_values.iter().copied().collect(),
            v_adjoint: svd.v_t.expect("v requested"),
        }
    }

    /// `U diag(s) Vᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_adjoint
    }

    /// Number of singular values above `tol` times the largest one.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|s| **s > tol * top).count()
    }
}

/// `log2 det(m)` for a Hermitian positive definite matrix.
pub fn log2_det_hpd(m: &CMatrix) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += l[(i, i)].re.ln();
    }
    let v = 2.0 * acc / std::f64::consts::LN_2;
    v.is_finite().then_some(v)
}

/// Ratio of extreme diagonal magnitudes; a cheap conditioning hint for error reports.
pub fn diag_condition(m: &CMatrix) -> f64 {
    let d: Vec<f64> = (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].norm()).collect();
    let hi = d.iter().cloned().fold(0.0, f64::max);
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}
