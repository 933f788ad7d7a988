//! Sufficient statistics, the exact negative log-likelihood and the
//! unnormalized log-posterior.
//!
//! Each pair contributes `(Δ_i, x_i)` with `Δ_i = x_i − x_i⁺`, a zero-mean
//! Gaussian in ℝ²ᵈ with block-diagonal covariance `diag(B, WWᵀ + A)`. The two
//! blocks are handled separately and the 2d×2d matrix is never formed.
//!
//! [`neg_log_likelihood`] returns the per-sample objective
//!
//! ```text
//! L(W) = log det B + log det(WWᵀ + A) + (Tr(B⁻¹ S_Δ) + Tr((WWᵀ + A)⁻¹ S_x)) / n
//! ```
//!
//! so that `log p(data | W) = −(n/2)·L(W) − n·d·log 2π`.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{NoiseModel, NoiseSpec, PairedDataset};
use crate::linalg::{structured_inverse_iso, structured_inverse_ortho, Matrix, OrthonormalFrame, SymMatrix};

/// Scatter matrices of the augmentation differences and the anchors.
///
/// `s_delta` is stored as the positive sum `Σ ΔᵢΔᵢᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub s_delta: SymMatrix,
    pub s_x: SymMatrix,
    pub n: usize,
}

impl SufficientStats {
    /// Statistics of an empty sample: both scatters zero, `n = 0`.
    pub fn empty(d: usize) -> Self {
        SufficientStats {
            s_delta: SymMatrix::zeros(d),
            s_x: SymMatrix::zeros(d),
            n: 0,
        }
    }

    pub fn d(&self) -> usize {
        self.s_x.dim()
    }
}

pub fn sufficient_stats(data: &PairedDataset) -> SufficientStats {
    let delta = data.deltas();
    let s_delta = SymMatrix::from_upper(delta.transpose() * &delta).expect("square");
    let s_x = SymMatrix::from_upper(data.x.transpose() * &data.x).expect("square");
    SufficientStats {
        s_delta,
        s_x,
        n: data.n(),
    }
}

/// `(log det M, Tr(M⁻¹ S))` for one diagonal block of the covariance.
struct BlockTerms {
    log_det: f64,
    trace: f64,
}

fn dense_block(cov: &Matrix, scatter: &SymMatrix, what: &str) -> Result<BlockTerms> {
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
        Error::SingularModel(format!("{what} is not positive definite"))
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol.solve(scatter.as_matrix()).trace();
    Ok(BlockTerms { log_det, trace })
}

fn augmentation_block(w: &OrthonormalFrame, spec: &NoiseSpec, s_delta: &SymMatrix) -> Result<BlockTerms> {
    let (d, k) = (w.d() as f64, w.k() as f64);
    match spec {
        NoiseSpec::Isotropic { scale } => {
            if !(*scale > 0.0) {
                return Err(Error::SingularModel("augmentation noise B = 0".into()));
            }
            Ok(BlockTerms {
                log_det: d * scale.ln(),
                trace: s_delta.trace() / scale,
            })
        }
        NoiseSpec::OrthogonalComplement { level } => {
            let inv = structured_inverse_ortho(w, *level)?;
            Ok(BlockTerms {
                log_det: k * (level - 1.0).ln() + (d - k) * level.ln(),
                trace: inv.as_matrix().dot(s_delta.as_matrix()),
            })
        }
        NoiseSpec::Custom { cov } => dense_block(cov.as_matrix(), s_delta, "augmentation covariance B"),
    }
}

fn data_block(w: &OrthonormalFrame, spec: &NoiseSpec, s_x: &SymMatrix) -> Result<BlockTerms> {
    let (d, k) = (w.d() as f64, w.k() as f64);
    match spec {
        NoiseSpec::Isotropic { scale } => {
            let inv = structured_inverse_iso(w, *scale).map_err(|_| {
                Error::SingularModel(format!("WWᵀ + σ²I needs σ² > 0, got {scale}"))
            })?;
            Ok(BlockTerms {
                log_det: k * (1.0 + scale).ln() + (d - k) * scale.ln(),
                trace: inv.as_matrix().dot(s_x.as_matrix()),
            })
        }
        // WWᵀ + (ρI − WWᵀ) = ρI
        NoiseSpec::OrthogonalComplement { level } => {
            if !(*level > 0.0) {
                return Err(Error::SingularModel(format!("ρI needs ρ > 0, got {level}")));
            }
            Ok(BlockTerms {
                log_det: d * level.ln(),
                trace: s_x.trace() / level,
            })
        }
        NoiseSpec::Custom { cov } => {
            let m = w.projector().into_inner() + cov.as_matrix();
            dense_block(&m, s_x, "WWᵀ + A")
        }
    }
}

fn combine(aug: BlockTerms, dat: BlockTerms, n: usize) -> f64 {
    let traces = if n == 0 {
        0.0
    } else {
        (aug.trace + dat.trace) / n as f64
    };
    aug.log_det + dat.log_det + traces
}

fn check_dims(d: usize, stats: &SufficientStats) -> Result<()> {
    if stats.d() != d || stats.s_delta.dim() != d {
        return Err(Error::DimensionError(format!(
            "statistics are {0}x{0}, model dimension is {d}",
            stats.d()
        )));
    }
    Ok(())
}

/// Per-sample negative log-likelihood objective (constants and the factor
/// ½ dropped). Uses the closed-form inverses and log-determinants for the
/// isotropic and orthogonal-complement noise forms, Cholesky otherwise.
pub fn neg_log_likelihood(w: &OrthonormalFrame, noise: &NoiseModel, stats: &SufficientStats) -> Result<f64> {
    check_dims(w.d(), stats)?;
    let aug = augmentation_block(w, &noise.augmentation, &stats.s_delta)?;
    let dat = data_block(w, &noise.data, &stats.s_x)?;
    Ok(combine(aug, dat, stats.n))
}

/// The same objective for explicit covariance matrices, by Cholesky. `w`
/// need not have orthonormal columns.
pub fn neg_log_likelihood_dense(w: &Matrix, a: &SymMatrix, b: &SymMatrix, stats: &SufficientStats) -> Result<f64> {
    let d = w.nrows();
    check_dims(d, stats)?;
    if a.dim() != d || b.dim() != d {
        return Err(Error::DimensionError("A and B must be d x d".into()));
    }
    let aug = dense_block(b.as_matrix(), &stats.s_delta, "augmentation covariance B")?;
    let c = w * w.transpose() + a.as_matrix();
    let dat = dense_block(&c, &stats.s_x, "WWᵀ + A")?;
    Ok(combine(aug, dat, stats.n))
}

/// Prior over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Haar measure on the Stiefel manifold.
    Uniform,
    /// Density `∝ exp(κ·Tr(W₀ᵀW))` (matrix von Mises–Fisher).
    MatrixConcentration { mode: OrthonormalFrame, kappa: f64 },
}

impl PriorSpec {
    pub fn validate(&self, d: usize, k: usize) -> Result<()> {
        if let PriorSpec::MatrixConcentration { mode, kappa } = self {
            if !(*kappa >= 0.0) || !kappa.is_finite() {
                return Err(Error::InvalidPrior(format!("κ must be finite and >= 0, got {kappa}")));
            }
            if mode.d() != d || mode.k() != k {
                return Err(Error::InvalidPrior(format!(
                    "prior mode is {}x{}, expected {d}x{k}",
                    mode.d(),
                    mode.k()
                )));
            }
        }
        Ok(())
    }

    /// Unnormalized log density.
    pub fn log_density(&self, w: &Matrix) -> f64 {
        match self {
            PriorSpec::Uniform => 0.0,
            PriorSpec::MatrixConcentration { mode, kappa } => kappa * mode.as_matrix().dot(w),
        }
    }
}

/// `log P(W) − (n/2)·L(W)`, i.e. the log-posterior up to an additive constant.
pub fn log_posterior(
    w: &OrthonormalFrame,
    noise: &NoiseModel,
    stats: &SufficientStats,
    prior: &PriorSpec,
) -> Result<f64> {
    prior.validate(w.d(), w.k())?;
    let lp = prior.log_density(w.as_matrix());
    if stats.n == 0 {
        check_dims(w.d(), stats)?;
        return Ok(lp);
    }
    let nll = neg_log_likelihood(w, noise, stats)?;
    Ok(lp - 0.5 * stats.n as f64 * nll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::{make_params, sample_dataset, LatentSpec};
    use crate::linalg::{gaussian_matrix, sample_orthonormal};
    use crate::seed::rng_from_seed;
    use std::f64::consts::PI;

    fn dataset(d: usize, k: usize, noise: &NoiseModel, n: usize, seed: u64) -> (OrthonormalFrame, PairedDataset) {
        let mut rng = rng_from_seed(seed);
        let w = sample_orthonormal(d, k, &mut rng).unwrap();
        let p = make_params(d, k, w.clone(), noise.data.clone(), noise.augmentation.clone()).unwrap();
        let data = sample_dataset(&p, &LatentSpec::StandardGaussian { k }, n, &mut rng).unwrap();
        (w, data)
    }

    #[test]
    fn identical_pairs_give_zero_delta_scatter() {
        let x = gaussian_matrix(4, 3, &mut rng_from_seed(1));
        let data = PairedDataset::from_arrays(Matrix::zeros(4, 0), x.clone(), x).unwrap();
        let s = sufficient_stats(&data);
        assert_eq!(s.s_delta, SymMatrix::zeros(3));
    }

    #[test]
    fn single_pair_by_hand() {
        let x = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let xp = Matrix::zeros(1, 2);
        let data = PairedDataset::from_arrays(Matrix::zeros(1, 0), x, xp).unwrap();
        let s = sufficient_stats(&data);
        let e1e1 = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(s.s_delta, e1e1);
        assert_eq!(s.s_x, e1e1);
        assert_eq!(s.n, 1);
    }

    #[test]
    fn stats_match_per_pair_accumulation() {
        let mut rng = rng_from_seed(2);
        let x = gaussian_matrix(3, 2, &mut rng);
        let xp = gaussian_matrix(3, 2, &mut rng);
        let data = PairedDataset::from_arrays(Matrix::zeros(3, 0), x.clone(), xp.clone()).unwrap();
        let s = sufficient_stats(&data);
        let mut sd = Matrix::zeros(2, 2);
        let mut sx = Matrix::zeros(2, 2);
        for i in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    sd[(a, b)] += (x[(i, a)] - xp[(i, a)]) * (x[(i, b)] - xp[(i, b)]);
                    sx[(a, b)] += x[(i, a)] * x[(i, b)];
                }
            }
        }
        assert!((s.s_delta.as_matrix() - sd).amax() < 1e-14);
        assert!((s.s_x.as_matrix() - sx).amax() < 1e-14);
        assert!(s.s_delta.trace() >= 0.0);
    }

    #[test]
    fn scalar_reduction() {
        let (a, b) = (0.7f64, 0.3f64);
        let (sd, sx) = (2.5, 4.0);
        let stats = SufficientStats {
            s_delta: SymMatrix::scaled_identity(1, sd),
            s_x: SymMatrix::scaled_identity(1, sx),
            n: 1,
        };
        let expect = b.ln() + (1.0f64 + a).ln() + sd / b + sx / (1.0 + a);
        for w in [1.0, -1.0] {
            let w = OrthonormalFrame::new(Matrix::from_element(1, 1, w)).unwrap();
            let noise = NoiseModel::isotropic(a, b);
            let got = neg_log_likelihood(&w, &noise, &stats).unwrap();
            assert!((got - expect).abs() < 1e-14);
            let dense = neg_log_likelihood_dense(
                w.as_matrix(),
                &SymMatrix::scaled_identity(1, a),
                &SymMatrix::scaled_identity(1, b),
                &stats,
            )
            .unwrap();
            assert!((dense - expect).abs() < 1e-14);
        }
    }

    /// Direct evaluation of Σᵢ log N((Δᵢ, xᵢ); 0, Σ) with the 2d×2d matrix.
    fn full_gaussian_log_density(data: &PairedDataset, a: &Matrix, b: &Matrix, w: &Matrix) -> f64 {
        let d = data.d();
        let mut sigma = Matrix::zeros(2 * d, 2 * d);
        sigma.view_mut((0, 0), (d, d)).copy_from(b);
        sigma.view_mut((d, d), (d, d)).copy_from(&(w * w.transpose() + a));
        let inv = sigma.clone().try_inverse().unwrap();
        let det = sigma.determinant();
        let delta = data.deltas();
        let mut total = 0.0;
        for i in 0..data.n() {
            let mut u = nalgebra::DVector::zeros(2 * d);
            for j in 0..d {
                u[j] = delta[(i, j)];
                u[d + j] = data.x[(i, j)];
            }
            let q = (u.transpose() * &inv * &u)[(0, 0)];
            total += -0.5 * ((2 * d) as f64 * (2.0 * PI).ln() + det.ln() + q);
        }
        total
    }

    #[test]
    fn blockwise_matches_full_gaussian_density() {
        let d = 2;
        for (seed, noise) in [
            (10, NoiseModel::isotropic(0.3, 0.7)),
            (11, NoiseModel::orthogonal(1.2, 1.5)),
        ] {
            let (_, data) = dataset(d, 1, &noise, 5, seed);
            let stats = sufficient_stats(&data);
            // evaluate at a frame other than the generating one
            let w = OrthonormalFrame::planar(0.4);
            let a = noise.data.realize(w.as_matrix());
            let b = noise.augmentation.realize(w.as_matrix());
            let n = data.n() as f64;
            let oracle = -2.0 / n * full_gaussian_log_density(&data, a.as_matrix(), b.as_matrix(), w.as_matrix())
                - (2 * d) as f64 * (2.0 * PI).ln();
            let got = neg_log_likelihood(&w, &noise, &stats).unwrap();
            assert!((got - oracle).abs() <= 1e-8 * oracle.abs(), "{got} vs {oracle}");
        }
    }

    #[test]
    fn isotropic_difference_identity() {
        let (sigma2, eps2) = (0.4, 0.9);
        let noise = NoiseModel::isotropic(sigma2, eps2);
        let (_, data) = dataset(4, 2, &noise, 200, 12);
        let stats = sufficient_stats(&data);
        let mut rng = rng_from_seed(13);
        let w1 = sample_orthonormal(4, 2, &mut rng).unwrap();
        let w2 = sample_orthonormal(4, 2, &mut rng).unwrap();
        let tr = |w: &OrthonormalFrame| (w.as_matrix().transpose() * stats.s_x.as_matrix() * w.as_matrix()).trace();
        let lhs = neg_log_likelihood(&w1, &noise, &stats).unwrap() - neg_log_likelihood(&w2, &noise, &stats).unwrap();
        let rhs = (tr(&w2) - tr(&w1)) / (sigma2 * (1.0 + sigma2)) / stats.n as f64;
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn orderings_follow_the_trace_criteria() {
        let mut rng = rng_from_seed(14);
        let candidates: Vec<_> = (0..12).map(|_| sample_orthonormal(3, 1, &mut rng).unwrap()).collect();
        let quad = |s: &SymMatrix, w: &OrthonormalFrame| (w.as_matrix().transpose() * s.as_matrix() * w.as_matrix()).trace();

        let iso = NoiseModel::isotropic(0.2, 0.5);
        let (_, data) = dataset(3, 1, &iso, 300, 15);
        let stats = sufficient_stats(&data);
        for a in &candidates {
            for b in &candidates {
                let la = neg_log_likelihood(a, &iso, &stats).unwrap();
                let lb = neg_log_likelihood(b, &iso, &stats).unwrap();
                if quad(&stats.s_x, a) > quad(&stats.s_x, b) + 1e-9 {
                    assert!(la < lb);
                }
            }
        }

        let ortho = NoiseModel::orthogonal(1.3, 1.4);
        let (_, data) = dataset(3, 1, &ortho, 300, 16);
        let stats = sufficient_stats(&data);
        for a in &candidates {
            for b in &candidates {
                let la = neg_log_likelihood(a, &ortho, &stats).unwrap();
                let lb = neg_log_likelihood(b, &ortho, &stats).unwrap();
                if quad(&stats.s_delta, a) < quad(&stats.s_delta, b) - 1e-9 {
                    assert!(la < lb);
                }
            }
        }
    }

    #[test]
    fn invariant_to_right_rotation() {
        let noise = NoiseModel::orthogonal(1.1, 1.7);
        let (_, data) = dataset(5, 3, &noise, 50, 17);
        let stats = sufficient_stats(&data);
        let mut rng = rng_from_seed(18);
        let w = sample_orthonormal(5, 3, &mut rng).unwrap();
        let q = sample_orthonormal(3, 3, &mut rng).unwrap().into_inner();
        let wq = w.rotate(&q).unwrap();
        let l1 = neg_log_likelihood(&w, &noise, &stats).unwrap();
        let l2 = neg_log_likelihood(&wq, &noise, &stats).unwrap();
        assert!((l1 - l2).abs() < 1e-10 * l1.abs());
    }

    #[test]
    fn structured_and_dense_paths_agree() {
        let mut rng = rng_from_seed(19);
        for noise in [NoiseModel::isotropic(0.3, 0.2), NoiseModel::orthogonal(1.05, 1.8)] {
            let (_, data) = dataset(4, 2, &noise, 100, 20);
            let stats = sufficient_stats(&data);
            let w = sample_orthonormal(4, 2, &mut rng).unwrap();
            let a = noise.data.realize(w.as_matrix());
            let b = noise.augmentation.realize(w.as_matrix());
            let s = neg_log_likelihood(&w, &noise, &stats).unwrap();
            let dn = neg_log_likelihood_dense(w.as_matrix(), &a, &b, &stats).unwrap();
            assert!((s - dn).abs() < 1e-10 * s.abs().max(1.0));
        }
    }

    #[test]
    fn singular_b_is_rejected() {
        let w = OrthonormalFrame::standard(2, 1).unwrap();
        let b = SymMatrix::from_upper(Matrix::identity(2, 2) - w.projector().into_inner()).unwrap();
        let noise = NoiseModel::new(NoiseSpec::isotropic(1.0), NoiseSpec::custom(b));
        let stats = SufficientStats::empty(2);
        assert!(matches!(
            neg_log_likelihood(&w, &noise, &stats),
            Err(Error::SingularModel(_))
        ));
    }

    #[test]
    fn uniform_prior_argmax_is_mle_argmin() {
        let noise = NoiseModel::orthogonal(1.2, 1.2);
        let (_, data) = dataset(2, 1, &noise, 40, 21);
        let stats = sufficient_stats(&data);
        let grid: Vec<_> = (0..180).map(|i| OrthonormalFrame::planar(i as f64 * PI / 180.0)).collect();
        let argmin = (0..grid.len())
            .min_by(|&i, &j| {
                neg_log_likelihood(&grid[i], &noise, &stats)
                    .unwrap()
                    .total_cmp(&neg_log_likelihood(&grid[j], &noise, &stats).unwrap())
            })
            .unwrap();
        let argmax = (0..grid.len())
            .max_by(|&i, &j| {
                log_posterior(&grid[i], &noise, &stats, &PriorSpec::Uniform)
                    .unwrap()
                    .total_cmp(&log_posterior(&grid[j], &noise, &stats, &PriorSpec::Uniform).unwrap())
            })
            .unwrap();
        assert_eq!(argmin, argmax);
    }

    #[test]
    fn zero_concentration_equals_uniform() {
        let noise = NoiseModel::isotropic(0.5, 0.5);
        let (w0, data) = dataset(3, 1, &noise, 30, 22);
        let stats = sufficient_stats(&data);
        let prior = PriorSpec::MatrixConcentration { mode: w0, kappa: 0.0 };
        let mut rng = rng_from_seed(23);
        for _ in 0..5 {
            let w = sample_orthonormal(3, 1, &mut rng).unwrap();
            let u = log_posterior(&w, &noise, &stats, &PriorSpec::Uniform).unwrap();
            let c = log_posterior(&w, &noise, &stats, &prior).unwrap();
            assert_eq!(u, c);
        }
    }

    #[test]
    fn concentration_prior_pulls_map_toward_mode() {
        let noise = NoiseModel::orthogonal(1.5, 1.5);
        let (_, data) = dataset(2, 1, &noise, 3, 24);
        let stats = sufficient_stats(&data);
        let grid: Vec<f64> = (0..3600).map(|i| i as f64 * 2.0 * PI / 3600.0).collect();
        let best = |prior: &PriorSpec| {
            grid.iter()
                .copied()
                .max_by(|&a, &b| {
                    let la = log_posterior(&OrthonormalFrame::planar(a), &noise, &stats, prior).unwrap();
                    let lb = log_posterior(&OrthonormalFrame::planar(b), &noise, &stats, prior).unwrap();
                    la.total_cmp(&lb)
                })
                .unwrap()
        };
        let mle = best(&PriorSpec::Uniform);
        // place the prior mode 0.6 rad away from the MLE
        let mode_angle = mle + 0.6;
        let prior = PriorSpec::MatrixConcentration {
            mode: OrthonormalFrame::planar(mode_angle),
            kappa: 50.0,
        };
        let map = best(&prior);
        let dist = |a: f64, b: f64| {
            let t = (a - b).rem_euclid(PI);
            t.min(PI - t)
        };
        assert!(dist(map, mode_angle) < dist(mle, mode_angle));
    }

    #[test]
    fn negative_kappa_rejected() {
        let w = OrthonormalFrame::standard(2, 1).unwrap();
        let prior = PriorSpec::MatrixConcentration { mode: w.clone(), kappa: -1.0 };
        assert!(matches!(
            log_posterior(&w, &NoiseModel::isotropic(1.0, 1.0), &SufficientStats::empty(2), &prior),
            Err(Error::InvalidPrior(_))
        ));
    }
}
