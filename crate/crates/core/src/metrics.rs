//! Latent-recovery losses and subspace alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::linalg::{procrustes_align, Matrix, OrthonormalFrame};

/// How well an estimated frame recovers the latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `‖Z − ẐQᵀ‖_F / √n` after Procrustes alignment.
    pub loss: f64,
    /// Cosines of the principal angles to the true frame, when known.
    pub alignment: Option<Vec<f64>>,
    pub method: Option<Method>,
}

/// Singular values of `WᵀŴ`, descending, clamped to `[0, 1]`.
pub fn subspace_alignment(w: &OrthonormalFrame, w_hat: &OrthonormalFrame) -> Result<Vec<f64>> {
    if w.d() != w_hat.d() || w.k() != w_hat.k() {
        return Err(Error::DimensionError(format!(
            "frames differ in shape: {}x{} vs {}x{}",
            w.d(),
            w.k(),
            w_hat.d(),
            w_hat.k()
        )));
    }
    let m = w.as_matrix().transpose() * w_hat.as_matrix();
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Principal angles in radians, ascending.
pub fn principal_angles(w: &OrthonormalFrame, w_hat: &OrthonormalFrame) -> Result<Vec<f64>> {
    Ok(subspace_alignment(w, w_hat)?.into_iter().map(f64::acos).collect())
}

/// Embeds `x` with `ẑ = X·Ŵ`, aligns to `z_true` by orthogonal Procrustes and
/// reports the per-sample RMS residual.
pub fn recovery_loss(z_true: &Matrix, x: &Matrix, w_hat: &OrthonormalFrame) -> Result<RecoveryReport> {
    let (n, k) = z_true.shape();
    if x.nrows() != n || x.ncols() != w_hat.d() || w_hat.k() != k {
        return Err(Error::DimensionError(format!(
            "z is {n}x{k}, x is {}x{}, Ŵ is {}x{}",
            x.nrows(),
            x.ncols(),
            w_hat.d(),
            w_hat.k()
        )));
    }
    let z_hat = x * w_hat.as_matrix();
    let q = procrustes_align(z_true, &z_hat)?.rotation;
    let loss = (z_true - z_hat * q.transpose()).norm() / (n as f64).sqrt();
    Ok(RecoveryReport {
        loss,
        alignment: None,
        method: None,
    })
}

/// [`recovery_loss`] plus the alignment to the true frame.
pub fn recovery_report(
    z_true: &Matrix,
    x: &Matrix,
    w_true: &OrthonormalFrame,
    w_hat: &OrthonormalFrame,
    method: Method,
) -> Result<RecoveryReport> {
    let mut r = recovery_loss(z_true, x, w_hat)?;
    r.alignment = Some(subspace_alignment(w_true, w_hat)?);
    r.method = Some(method);
    Ok(r)
}
