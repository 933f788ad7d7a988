//! Dense symmetric linear algebra.
//!
//! Matrices are small (d is at most a few dozen) so everything is dense and
//! backed by `nalgebra::DMatrix`. The symmetric eigensolver is a cyclic Jacobi
//! iteration, which is accurate to working precision on the eigenvectors and
//! fully deterministic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative off-diagonal Frobenius threshold for Jacobi convergence.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Numerical negativity tolerated by [`psd_sqrt`] before rejecting a matrix.
pub const PSD_TOL: f64 = 1e-10;

/// Tolerance on `WᵀW = I` for [`OrthonormalFrame`].
pub const ORTHO_TOL: f64 = 1e-10;

/// A square symmetric matrix. Construction mirrors the upper triangle into
/// the lower one, so `m[(i, j)] == m[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Builds from the upper triangle of `m`; the lower triangle is ignored.
    pub fn from_upper(mut m: Matrix) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c || r == 0 {
            return Err(Error::InvalidMatrix(format!(
                "expected a non-empty square matrix, got {r}x{c}"
            )));
        }
        for i in 0..r {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from `m`, requiring exact symmetry.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.is_square() && m != m.transpose() {
            return Err(Error::InvalidMatrix("matrix is not symmetric".into()));
        }
        Self::from_upper(m)
    }

    /// Averages `m` with its transpose.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidMatrix("matrix is not square".into()));
        }
        Self::from_upper((m + m.transpose()) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidMatrix("rows must form a square matrix".into()));
        }
        Self::new(Matrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(Matrix::identity(d, d))
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        SymMatrix(Matrix::identity(d, d) * s)
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(Matrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

pub(crate) fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// A `d × k` matrix with orthonormal columns (a point on the Stiefel manifold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct OrthonormalFrame(Matrix);

impl OrthonormalFrame {
    /// Wraps `m` after checking `mᵀm = I` to within [`ORTHO_TOL`].
    pub fn new(m: Matrix) -> Result<Self> {
        let (d, k) = m.shape();
        if k == 0 || k > d {
            return Err(Error::DimensionError(format!(
                "frame must satisfy 1 <= k <= d, got d={d}, k={k}"
            )));
        }
        let err = orthonormality_error(&m);
        if !(err <= ORTHO_TOL) {
            return Err(Error::InvalidMatrix(format!(
                "columns are not orthonormal (max |WᵀW - I| = {err:e})"
            )));
        }
        Ok(OrthonormalFrame(m))
    }

    /// Unit vector `(cos θ, sin θ)` as a 2×1 frame.
    pub fn planar(theta: f64) -> Self {
        OrthonormalFrame(Matrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]))
    }

    /// The first `k` standard basis vectors of ℝᵈ.
    pub fn standard(d: usize, k: usize) -> Result<Self> {
        Self::new(Matrix::identity(d, k))
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// The projector `WWᵀ`.
    pub fn projector(&self) -> SymMatrix {
        SymMatrix(&self.0 * self.0.transpose())
    }

    /// `W·Q` for a `k × k` orthogonal `Q`.
    pub fn rotate(&self, q: &Matrix) -> Result<Self> {
        if q.shape() != (self.k(), self.k()) {
            return Err(Error::DimensionError("rotation must be k x k".into()));
        }
        Self::new(&self.0 * q)
    }

    pub fn negated(&self) -> Self {
        OrthonormalFrame(-&self.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for OrthonormalFrame {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionError("ragged frame rows".into()));
        }
        OrthonormalFrame::new(Matrix::from_fn(d, k, |i, j| rows[i][j]))
    }
}

impl From<OrthonormalFrame> for Vec<Vec<f64>> {
    fn from(w: OrthonormalFrame) -> Self {
        w.to_rows()
    }
}

/// `max |mᵀm − I|`.
pub fn orthonormality_error(m: &Matrix) -> f64 {
    let g = m.transpose() * m;
    let k = g.nrows();
    (g - Matrix::identity(k, k)).amax()
}

/// Eigendecomposition of a symmetric matrix, values sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: DVector<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

impl EigenPairs {
    /// Eigenvectors of the `k` largest eigenvalues, with those eigenvalues.
    pub fn top(&self, k: usize) -> (Matrix, Vec<f64>) {
        let vecs = self.vectors.columns(0, k).into_owned();
        (vecs, self.values.iter().take(k).copied().collect())
    }

    /// Eigenvectors of the `k` smallest eigenvalues, smallest first.
    pub fn bottom(&self, k: usize) -> (Matrix, Vec<f64>) {
        let d = self.values.len();
        let idx: Vec<usize> = (d - k..d).rev().collect();
        let vecs = self.vectors.select_columns(idx.iter());
        (vecs, idx.iter().map(|&i| self.values[i]).collect())
    }

    /// Whether eigenvalues `k-1` and `k` (0-based, descending order) are tied
    /// to within a relative tolerance, making the top-`k` subspace ill-defined.
    pub fn gap_is_degenerate(&self, k: usize, rel_tol: f64) -> bool {
        let d = self.values.len();
        if k == 0 || k >= d {
            return false;
        }
        let scale = self.values.amax().max(f64::MIN_POSITIVE);
        (self.values[k - 1] - self.values[k]).abs() <= rel_tol * scale
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps visit `(p, q)` pairs in row-major order and stop once the
/// off-diagonal Frobenius norm falls below `1e-12 · ‖M‖_F`. Each eigenvector
/// is scaled so that its largest-magnitude entry is positive (first such
/// entry on ties).
pub fn sym_eig(m: &SymMatrix) -> Result<EigenPairs> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entries".into()));
    }
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n, n);
    let norm = a.norm();

    let mut converged = norm == 0.0;
    let mut sweeps = 0;
    while !converged {
        if off_diagonal_norm(&a) <= JACOBI_TOL * norm {
            converged = true;
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[(p, r)], a[(q, r)]);
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            sweeps,
            residual: off_diagonal_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their pivot order
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = v.select_columns(order.iter());
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(EigenPairs { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Modified Gram–Schmidt on the columns of `m`, in column order, with one
/// re-orthogonalization pass. Fails if a column is numerically dependent on
/// its predecessors.
pub fn gram_schmidt(m: &Matrix) -> Result<OrthonormalFrame> {
    let (d, k) = m.shape();
    if k == 0 || k > d {
        return Err(Error::DimensionError(format!(
            "cannot orthonormalize {k} columns in dimension {d}"
        )));
    }
    let mut q = m.clone();
    for j in 0..k {
        let orig = m.column(j).norm();
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        if !(nrm > 1e-12 * orig.max(f64::MIN_POSITIVE)) || !nrm.is_finite() {
            return Err(Error::InvalidMatrix(format!(
                "column {j} is linearly dependent on earlier columns"
            )));
        }
        q.column_mut(j).unscale_mut(nrm);
    }
    OrthonormalFrame::new(q)
}

/// Haar-distributed `d × k` frame: Gram–Schmidt of a Gaussian matrix.
pub fn sample_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<OrthonormalFrame> {
    if k == 0 || k > d {
        return Err(Error::DimensionError(format!(
            "sample_orthonormal needs 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    loop {
        let g = gaussian_matrix(d, k, rng);
        // a rank-deficient Gaussian draw has probability zero; redraw if it happens
        if let Ok(w) = gram_schmidt(&g) {
            return Ok(w);
        }
    }
}

/// `rows × cols` i.i.d. standard normal entries, filled row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut g = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    g
}

/// Symmetric square root `F` of a PSD matrix, so that `F·Fᵀ = M`.
///
/// Eigenvalues in `[-1e-10, 0)` are treated as zero, as are eigenvalues
/// below `1e-10 · max(1, λ_max)`, so the rank of `F` is the numerical rank of `M`.
pub fn psd_sqrt(m: &SymMatrix) -> Result<Matrix> {
    let eig = sym_eig(m)?;
    let n = m.dim();
    let min = eig.values[n - 1];
    if min < -PSD_TOL {
        return Err(Error::NotPsd { eigenvalue: min });
    }
    let cutoff = PSD_TOL * eig.values[0].abs().max(1.0);
    let roots = eig
        .values
        .map(|l| if l > cutoff { l.sqrt() } else { 0.0 });
    let scaled = Matrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] * roots[j]);
    Ok(&scaled * eig.vectors.transpose())
}

/// Numerical rank of a PSD matrix under the same cutoff as [`psd_sqrt`].
pub fn numerical_rank(m: &SymMatrix) -> Result<usize> {
    let eig = sym_eig(m)?;
    let cutoff = PSD_TOL * eig.values[0].abs().max(1.0);
    Ok(eig.values.iter().filter(|&&l| l > cutoff).count())
}

/// `(WWᵀ + σ²I)⁻¹ = σ⁻²(I − WWᵀ/(1+σ²))`, valid because `WᵀW = I`.
pub fn structured_inverse_iso(w: &OrthonormalFrame, sigma2: f64) -> Result<SymMatrix> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidNoise(format!(
            "isotropic variance must be > 0, got {sigma2}"
        )));
    }
    let d = w.d();
    let p = w.projector().into_inner();
    SymMatrix::from_upper((Matrix::identity(d, d) - p / (1.0 + sigma2)) / sigma2)
}

/// `(γI − WWᵀ)⁻¹ = γ⁻¹(I − WWᵀ/(1−γ))`; requires `γ > 1`.
pub fn structured_inverse_ortho(w: &OrthonormalFrame, gamma: f64) -> Result<SymMatrix> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::SingularModel(format!(
            "γI − WWᵀ needs γ > 1 to be positive definite, got γ = {gamma}"
        )));
    }
    let d = w.d();
    let p = w.projector().into_inner();
    SymMatrix::from_upper((Matrix::identity(d, d) - p / (1.0 - gamma)) / gamma)
}

/// Result of an orthogonal Procrustes fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    /// Orthogonal `k × k` matrix minimizing `‖Z_true − Z_hat·Qᵀ‖_F`.
    pub rotation: Matrix,
    /// Set when the cross-product matrix vanished and `rotation` is `I`.
    pub degenerate: bool,
}

/// Orthogonal Procrustes: `Q = V·Uᵀ` from the SVD `Z_hatᵀ Z_true = U Σ Vᵀ`.
pub fn procrustes_align(z_true: &Matrix, z_hat: &Matrix) -> Result<Procrustes> {
    if z_true.shape() != z_hat.shape() {
        return Err(Error::DimensionError(format!(
            "procrustes inputs differ in shape: {:?} vs {:?}",
            z_true.shape(),
            z_hat.shape()
        )));
    }
    let (n, k) = z_true.shape();
    if k == 0 || n < k {
        return Err(Error::DimensionError(format!(
            "procrustes needs n >= k >= 1, got n={n}, k={k}"
        )));
    }
    let cross = z_hat.transpose() * z_true;
    if cross.amax() == 0.0 {
        return Ok(Procrustes {
            rotation: Matrix::identity(k, k),
            degenerate: true,
        });
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::InvalidMatrix("SVD failed in procrustes alignment".into()));
        }
    };
    Ok(Procrustes {
        rotation: v_t.transpose() * u.transpose(),
        degenerate: false,
    })
}
