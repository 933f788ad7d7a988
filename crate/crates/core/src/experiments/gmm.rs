//! Orthogonal-noise model with a one-dimensional Gaussian-mixture latent.
//!
//! Fits PCA and the non-contrastive estimator to one sample and compares the
//! resulting 1-d embeddings with the true latents.
//!
//! The default mixture has means `(-1, 0, 1)` and variances `0.01`, so the
//! latent variance (about 0.57) stays below the noise level `ρ = 1.01` that
//! `A = ρI − wwᵀ` places orthogonal to the signal. The direction of maximal
//! variance is then orthogonal to `w`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fmt17;
use super::kde::{kde, KdeCurve};
use crate::error::{Error, Result};
use crate::estimators::{fit_pca, fit_ssl};
use crate::genmodel::{make_params, sample_dataset, LatentSpec, MixtureComponent, NoiseSpec, PairedDataset};
use crate::likelihood::sufficient_stats;
use crate::linalg::{procrustes_align, sample_orthonormal, Matrix, OrthonormalFrame, SymMatrix};
use crate::metrics::subspace_alignment;
use crate::seed::{derive_named, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmDemoConfig {
    pub d: usize,
    pub n: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for GmmDemoConfig {
    fn default() -> Self {
        GmmDemoConfig {
            d: 2,
            n: 1000,
            weights: vec![0.4, 0.4, 0.2],
            means: vec![-1.0, 0.0, 1.0],
            variances: vec![0.01, 0.01, 0.01],
            rho: 1.01,
            gamma: 1.01,
            seed: 42,
        }
    }
}

impl GmmDemoConfig {
    pub fn latent(&self) -> LatentSpec {
        LatentSpec::Mixture {
            components: self
                .weights
                .iter()
                .zip(&self.means)
                .zip(&self.variances)
                .map(|((&weight, &m), &v)| MixtureComponent {
                    weight,
                    mean: vec![m],
                    cov: SymMatrix::scaled_identity(1, v),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.means.len() || self.weights.len() != self.variances.len() {
            return Err(Error::ConfigError(
                "weights, means and variances must have the same length".into(),
            ));
        }
        if self.d < 2 {
            return Err(Error::ConfigError("d must be >= 2".into()));
        }
        if self.n < 2 {
            return Err(Error::ConfigError("n must be >= 2".into()));
        }
        if !(self.rho > 1.0) || !(self.gamma > 1.0) {
            return Err(Error::ConfigError(format!(
                "rho and gamma must be > 1, got rho={}, gamma={}",
                self.rho, self.gamma
            )));
        }
        self.latent().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmDemoResult {
    pub w_true: OrthonormalFrame,
    pub w_pca: OrthonormalFrame,
    pub w_ssl: OrthonormalFrame,
    pub alignment_pca: f64,
    pub alignment_ssl: f64,
    /// Columns: true latent, PCA embedding, SSL embedding (sign-aligned).
    pub embeddings: Matrix,
    pub kde_true: KdeCurve,
    pub kde_pca: KdeCurve,
    pub kde_ssl: KdeCurve,
    pub data: PairedDataset,
}

impl GmmDemoResult {
    pub fn embeddings_csv(&self) -> String {
        let mut out = String::from("index,z_true,z_pca,z_ssl\n");
        for (i, row) in self.embeddings.row_iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", fmt17(row[0]), fmt17(row[1]), fmt17(row[2]));
        }
        out
    }

    pub fn points_csv(&self) -> String {
        let d = self.data.d();
        let mut out = String::from("index");
        for j in 1..=d {
            let _ = write!(out, ",x{j}");
        }
        for j in 1..=d {
            let _ = write!(out, ",xplus{j}");
        }
        out.push('\n');
        for i in 0..self.data.n() {
            let _ = write!(out, "{i}");
            for j in 0..d {
                let _ = write!(out, ",{}", fmt17(self.data.x[(i, j)]));
            }
            for j in 0..d {
                let _ = write!(out, ",{}", fmt17(self.data.x_plus[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn kde_csv(curve: &KdeCurve) -> String {
    let mut out = String::from("x,density\n");
    for (x, f) in curve.eval_points.iter().zip(&curve.densities) {
        let _ = writeln!(out, "{},{}", fmt17(*x), fmt17(*f));
    }
    out
}

/// Sign-aligned 1-d embedding `X·ŵ`.
fn embed(z: &Matrix, x: &Matrix, w: &OrthonormalFrame) -> Result<Matrix> {
    let z_hat = x * w.as_matrix();
    let q = procrustes_align(z, &z_hat)?.rotation;
    Ok(z_hat * q.transpose())
}

pub fn run_gmm_demo(config: &GmmDemoConfig) -> Result<GmmDemoResult> {
    config.validate()?;
    let latent = config.latent();
    let w_true = sample_orthonormal(config.d, 1, &mut rng_from_seed(derive_named(config.seed, "w")))?;
    let params = make_params(
        config.d,
        1,
        w_true.clone(),
        NoiseSpec::orthogonal(config.rho),
        NoiseSpec::orthogonal(config.gamma),
    )?;
    let mut rng = rng_from_seed(derive_named(config.seed, "data"));
    let data = sample_dataset(&params, &latent, config.n, &mut rng)?;
    let stats = sufficient_stats(&data);
    let w_pca = fit_pca(&stats, 1)?.w_hat;
    let w_ssl = fit_ssl(&stats, 1)?.w_hat;

    let e_pca = embed(&data.z, &data.x, &w_pca)?;
    let e_ssl = embed(&data.z, &data.x, &w_ssl)?;
    let n = data.n();
    let embeddings = Matrix::from_fn(n, 3, |i, j| match j {
        0 => data.z[(i, 0)],
        1 => e_pca[(i, 0)],
        _ => e_ssl[(i, 0)],
    });
    let col = |j: usize| embeddings.column(j).iter().copied().collect::<Vec<_>>();

    Ok(GmmDemoResult {
        alignment_pca: subspace_alignment(&w_true, &w_pca)?[0],
        alignment_ssl: subspace_alignment(&w_true, &w_ssl)?[0],
        kde_true: kde(&col(0), None)?,
        kde_pca: kde(&col(1), None)?,
        kde_ssl: kde(&col(2), None)?,
        w_true,
        w_pca,
        w_ssl,
        embeddings,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_demo_separates_the_estimators() {
        let r = run_gmm_demo(&GmmDemoConfig::default()).unwrap();
        assert!(r.alignment_ssl >= 0.99, "{}", r.alignment_ssl);
        assert!(r.alignment_pca <= 0.3, "{}", r.alignment_pca);
        assert_eq!(r.kde_ssl.local_maxima(), 3);
        assert!(r.kde_pca.local_maxima() < 3);
        assert_eq!(r.embeddings.nrows(), 1000);
    }

    #[test]
    fn single_component_mixture() {
        let cfg = GmmDemoConfig {
            weights: vec![1.0],
            means: vec![0.5],
            variances: vec![0.2],
            ..GmmDemoConfig::default()
        };
        let r = run_gmm_demo(&cfg).unwrap();
        assert!(r.alignment_ssl >= 0.99);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let cfg = GmmDemoConfig {
            weights: vec![0.5, 0.4, 0.2],
            ..GmmDemoConfig::default()
        };
        assert!(matches!(run_gmm_demo(&cfg), Err(Error::ConfigError(_))));
    }

    #[test]
    fn csv_headers() {
        let cfg = GmmDemoConfig {
            n: 10,
            ..GmmDemoConfig::default()
        };
        let r = run_gmm_demo(&cfg).unwrap();
        assert!(r.embeddings_csv().starts_with("index,z_true,z_pca,z_ssl\n0,"));
        assert!(r.points_csv().starts_with("index,x1,x2,xplus1,xplus2\n"));
        assert_eq!(r.points_csv().lines().count(), 11);
    }
}
