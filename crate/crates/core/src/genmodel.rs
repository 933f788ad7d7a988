//! The generative chain `z → x → x⁺`.
//!
//! `z` is drawn from a [`LatentSpec`], `x | z ~ N(Wz, A)` and
//! `x⁺ | x ~ N(x, B)`. The noise covariances are described by [`NoiseSpec`]s
//! and realized against a concrete frame `W`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, psd_sqrt, Matrix, OrthonormalFrame, SymMatrix, PSD_TOL};
use crate::seed::{hash_bytes, rng_from_seed};

/// A noise covariance, possibly defined relative to the signal frame `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `s·I` with `s > 0`.
    Isotropic { scale: f64 },
    /// `ℓ·I − WWᵀ` with `ℓ > 1`: eigenvalue `ℓ − 1` on `col(W)` and `ℓ` off it.
    OrthogonalComplement { level: f64 },
    /// Any fixed PSD matrix.
    Custom { cov: SymMatrix },
}

impl NoiseSpec {
    pub fn isotropic(scale: f64) -> Self {
        NoiseSpec::Isotropic { scale }
    }

    pub fn orthogonal(level: f64) -> Self {
        NoiseSpec::OrthogonalComplement { level }
    }

    pub fn custom(cov: SymMatrix) -> Self {
        NoiseSpec::Custom { cov }
    }

    /// Checks the variant bounds for a `d`-dimensional model.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            NoiseSpec::Isotropic { scale } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidNoise(format!(
                        "isotropic scale must be > 0, got {scale}"
                    )));
                }
            }
            NoiseSpec::OrthogonalComplement { level } => {
                if !(*level > 1.0) || !level.is_finite() {
                    return Err(Error::SingularModel(format!(
                        "orthogonal-complement level must be > 1, got {level}"
                    )));
                }
            }
            NoiseSpec::Custom { cov } => {
                if cov.dim() != d {
                    return Err(Error::DimensionError(format!(
                        "custom covariance is {0}x{0}, model dimension is {d}",
                        cov.dim()
                    )));
                }
                let eig = linalg::sym_eig(cov)?;
                let min = eig.values[d - 1];
                if min < -PSD_TOL {
                    return Err(Error::NotPsd { eigenvalue: min });
                }
            }
        }
        Ok(())
    }

    /// Dense covariance for signal matrix `w` (`d × k`). `w` need not be
    /// orthonormal, which lets finite-difference code evaluate nearby points.
    pub fn realize(&self, w: &Matrix) -> SymMatrix {
        let d = w.nrows();
        match self {
            NoiseSpec::Isotropic { scale } => SymMatrix::scaled_identity(d, *scale),
            NoiseSpec::OrthogonalComplement { level } => {
                let m = Matrix::identity(d, d) * *level - w * w.transpose();
                SymMatrix::from_upper(m).expect("square by construction")
            }
            NoiseSpec::Custom { cov } => cov.clone(),
        }
    }

    /// Whether the covariance moves with `W`.
    pub fn depends_on_frame(&self) -> bool {
        matches!(self, NoiseSpec::OrthogonalComplement { .. })
    }
}

/// The pair of noise specifications `(A, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Data noise `A` in `x | z ~ N(Wz, A)`.
    pub data: NoiseSpec,
    /// Augmentation noise `B` in `x⁺ | x ~ N(x, B)`.
    pub augmentation: NoiseSpec,
}

impl NoiseModel {
    pub fn new(data: NoiseSpec, augmentation: NoiseSpec) -> Self {
        NoiseModel { data, augmentation }
    }

    /// `A = σ²I`, `B = ε²I`.
    pub fn isotropic(sigma2: f64, eps2: f64) -> Self {
        Self::new(NoiseSpec::isotropic(sigma2), NoiseSpec::isotropic(eps2))
    }

    /// `A = ρI − WWᵀ`, `B = γI − WWᵀ`.
    pub fn orthogonal(rho: f64, gamma: f64) -> Self {
        Self::new(NoiseSpec::orthogonal(rho), NoiseSpec::orthogonal(gamma))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.data.validate(d)?;
        self.augmentation.validate(d)
    }
}

/// Concrete parameters `(W, A, B)` of the generative chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w: OrthonormalFrame,
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub noise: NoiseModel,
}

impl ModelParams {
    pub fn d(&self) -> usize {
        self.w.d()
    }

    pub fn k(&self) -> usize {
        self.w.k()
    }

    /// 64-bit hash of the realized parameters.
    pub fn provenance_hash(&self) -> u64 {
        let canon = serde_json::json!({
            "w": self.w.to_rows(),
            "a": self.a.to_rows(),
            "b": self.b.to_rows(),
        });
        hash_bytes(canon.to_string().as_bytes())
    }
}

/// Realizes `a_spec` and `b_spec` against `w`.
pub fn make_params(
    d: usize,
    k: usize,
    w: OrthonormalFrame,
    a_spec: NoiseSpec,
    b_spec: NoiseSpec,
) -> Result<ModelParams> {
    if k == 0 || k > d {
        return Err(Error::DimensionError(format!(
            "need 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    if w.d() != d || w.k() != k {
        return Err(Error::DimensionError(format!(
            "frame is {}x{}, expected {d}x{k}",
            w.d(),
            w.k()
        )));
    }
    let noise = NoiseModel::new(a_spec, b_spec);
    noise.validate(d)?;
    let a = noise.data.realize(w.as_matrix());
    let b = noise.augmentation.realize(w.as_matrix());
    Ok(ModelParams { w, a, b, noise })
}

/// One component of a latent Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

/// Distribution of the latent `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentSpec {
    StandardGaussian { k: usize },
    Mixture { components: Vec<MixtureComponent> },
}

impl LatentSpec {
    pub fn k(&self) -> usize {
        match self {
            LatentSpec::StandardGaussian { k } => *k,
            LatentSpec::Mixture { components } => components.first().map_or(0, |c| c.mean.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentSpec::StandardGaussian { k } => {
                if *k == 0 {
                    return Err(Error::DimensionError("latent dimension must be >= 1".into()));
                }
            }
            LatentSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::ConfigError("mixture needs at least one component".into()));
                }
                let k = self.k();
                if k == 0 {
                    return Err(Error::DimensionError("latent dimension must be >= 1".into()));
                }
                let mut total = 0.0;
                for (i, c) in components.iter().enumerate() {
                    if !(c.weight > 0.0 && c.weight <= 1.0) {
                        return Err(Error::ConfigError(format!(
                            "mixture weight {i} must lie in (0, 1], got {}",
                            c.weight
                        )));
                    }
                    if c.mean.len() != k || c.cov.dim() != k {
                        return Err(Error::DimensionError(format!(
                            "mixture component {i} does not match latent dimension {k}"
                        )));
                    }
                    if c.mean.iter().any(|m| !m.is_finite()) {
                        return Err(Error::ConfigError(format!("mixture mean {i} is not finite")));
                    }
                    let eig = linalg::sym_eig(&c.cov)?;
                    if eig.values[k - 1] < -PSD_TOL {
                        return Err(Error::NotPsd {
                            eigenvalue: eig.values[k - 1],
                        });
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::ConfigError(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn provenance_hash(&self) -> u64 {
        let canon = serde_json::to_string(self).expect("latent spec serializes");
        hash_bytes(canon.as_bytes())
    }
}

/// Draws `n` i.i.d. latents as the rows of an `n × k` matrix.
///
/// Mixture rows draw the component index first, then `μ + L·g`.
pub fn sample_latents<R: Rng + ?Sized>(spec: &LatentSpec, n: usize, rng: &mut R) -> Result<Matrix> {
    spec.validate()?;
    let k = spec.k();
    let mut z = Matrix::zeros(n, k);
    match spec {
        LatentSpec::StandardGaussian { .. } => {
            for i in 0..n {
                for j in 0..k {
                    z[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        LatentSpec::Mixture { components } => {
            let chooser = WeightedIndex::new(components.iter().map(|c| c.weight))
                .map_err(|e| Error::ConfigError(format!("mixture weights: {e}")))?;
            let factors = components
                .iter()
                .map(|c| psd_sqrt(&c.cov))
                .collect::<Result<Vec<_>>>()?;
            let mut g = DVector::zeros(k);
            for i in 0..n {
                let c = chooser.sample(rng);
                for v in g.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let draw = &factors[c] * &g;
                for j in 0..k {
                    z[(i, j)] = components[c].mean[j] + draw[j];
                }
            }
        }
    }
    Ok(z)
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub params_hash: u64,
    pub latent_hash: u64,
    pub seed: Option<u64>,
}

/// `n` sampled triples `(z_i, x_i, x_i⁺)`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub z: Matrix,
    pub x: Matrix,
    pub x_plus: Matrix,
    pub provenance: Option<Provenance>,
}

impl PairedDataset {
    /// Validates shapes and finiteness. `z` may have zero columns when the
    /// latents are unknown.
    pub fn from_arrays(z: Matrix, x: Matrix, x_plus: Matrix) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::DimensionError("dataset must contain at least one row".into()));
        }
        if z.nrows() != n || x_plus.nrows() != n {
            return Err(Error::DimensionError("z, x and x⁺ must have the same row count".into()));
        }
        if x.ncols() != x_plus.ncols() || x.ncols() == 0 {
            return Err(Error::DimensionError("x and x⁺ must share a non-zero width".into()));
        }
        if z.iter().chain(x.iter()).chain(x_plus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("dataset contains non-finite values".into()));
        }
        Ok(PairedDataset {
            z,
            x,
            x_plus,
            provenance: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Latent width; zero when latents were not recorded.
    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    /// Rows `x_i − x_i⁺`.
    pub fn deltas(&self) -> Matrix {
        &self.x - &self.x_plus
    }
}

/// Samples `n` triples from the chain. Noise is `F·g` with `F = psd_sqrt(cov)`
/// factored once up front.
pub fn sample_dataset<R: Rng + ?Sized>(
    params: &ModelParams,
    latent: &LatentSpec,
    n: usize,
    rng: &mut R,
) -> Result<PairedDataset> {
    if latent.k() != params.k() {
        return Err(Error::DimensionError(format!(
            "latent dimension {} does not match W with k={}",
            latent.k(),
            params.k()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionError("n must be >= 1".into()));
    }
    let d = params.d();
    let fa = psd_sqrt(&params.a)?;
    let fb = psd_sqrt(&params.b)?;
    let z = sample_latents(latent, n, rng)?;

    let ga = linalg::gaussian_matrix(n, d, rng);
    let gb = linalg::gaussian_matrix(n, d, rng);
    let x = &z * params.w.as_matrix().transpose() + ga * fa.transpose();
    let x_plus = &x + gb * fb.transpose();
    Ok(PairedDataset {
        z,
        x,
        x_plus,
        provenance: Some(Provenance {
            params_hash: params.provenance_hash(),
            latent_hash: latent.provenance_hash(),
            seed: None,
        }),
    })
}

/// [`sample_dataset`] with a generator built from `seed`, recorded in the provenance.
pub fn sample_dataset_seeded(
    params: &ModelParams,
    latent: &LatentSpec,
    n: usize,
    seed: u64,
) -> Result<PairedDataset> {
    let mut rng = rng_from_seed(seed);
    let mut data = sample_dataset(params, latent, n, &mut rng)?;
    if let Some(p) = data.provenance.as_mut() {
        p.seed = Some(seed);
    }
    Ok(data)
}
