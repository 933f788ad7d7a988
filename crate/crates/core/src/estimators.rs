//! Estimators of the signal frame `W`.
//!
//! * [`fit_pca`]: top-`k` eigenvectors of the anchor scatter `S_x`; the MLE
//!   under isotropic data and augmentation noise.
//! * [`fit_ssl`]: bottom-`k` eigenvectors of the augmentation scatter
//!   `S_Δ = Σ ΔᵢΔᵢᵀ`; the MLE under orthogonal-complement noise, and the
//!   minimizer of `Σᵢ ‖Wᵀxᵢ − Wᵀxᵢ⁺‖²` over orthonormal `W`.
//! * [`fit_numeric`]: direct minimization of the likelihood objective over
//!   the Stiefel manifold, used to cross-check the two closed forms.
//! * [`sample_posterior_mh`]: random-walk Metropolis on frames.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::NoiseModel;
use crate::likelihood::{log_posterior, neg_log_likelihood_dense, PriorSpec, SufficientStats};
use crate::linalg::{gaussian_matrix, gram_schmidt, sample_orthonormal, sym_eig, Matrix, OrthonormalFrame, SymMatrix};
use crate::seed::rng_from_seed;

/// Relative tolerance for flagging a tie at the `k`-th eigenvalue.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Ssl,
    Numeric,
    Map,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Pca => "pca",
            Method::Ssl => "ssl",
            Method::Numeric => "numeric",
            Method::Map => "map",
        };
        f.write_str(s)
    }
}

/// An estimated frame together with the criterion values that selected it.
///
/// For PCA these are the top-`k` eigenvalues of `S_x`; for SSL the negated
/// bottom-`k` eigenvalues of `S_Δ` (both descending). Numeric and MAP fits
/// report the Rayleigh quotients of `S_x` on `Ŵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEstimate {
    pub w_hat: OrthonormalFrame,
    pub criterion_values: Vec<f64>,
    pub method: Method,
    /// The `k`-th and `(k+1)`-th eigenvalues tie, so only a frame, not a
    /// unique subspace, was returned.
    pub degenerate_spectrum: bool,
}

fn check_k(stats: &SufficientStats, k: usize) -> Result<()> {
    let d = stats.d();
    if k == 0 || k > d {
        return Err(Error::DimensionError(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    Ok(())
}

/// Top-`k` eigenvectors of `S_x`.
pub fn fit_pca(stats: &SufficientStats, k: usize) -> Result<SubspaceEstimate> {
    check_k(stats, k)?;
    let eig = sym_eig(&stats.s_x)?;
    let (vecs, vals) = eig.top(k);
    Ok(SubspaceEstimate {
        w_hat: OrthonormalFrame::new(vecs)?,
        criterion_values: vals,
        method: Method::Pca,
        degenerate_spectrum: eig.gap_is_degenerate(k, DEGENERACY_TOL),
    })
}

/// Eigenvectors of the `k` smallest eigenvalues of `S_Δ` (the top `k` of
/// `−S_Δ`), i.e. the least-variance directions of the augmentation
/// differences.
pub fn fit_ssl(stats: &SufficientStats, k: usize) -> Result<SubspaceEstimate> {
    check_k(stats, k)?;
    let d = stats.d();
    let eig = sym_eig(&stats.s_delta)?;
    let (vecs, vals) = eig.bottom(k);
    Ok(SubspaceEstimate {
        w_hat: OrthonormalFrame::new(vecs)?,
        criterion_values: vals.into_iter().map(|v| -v).collect(),
        method: Method::Ssl,
        degenerate_spectrum: eig.gap_is_degenerate(d - k, DEGENERACY_TOL),
    })
}

/// Settings for [`fit_numeric`] and [`fit_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericConfig {
    /// Angle resolution of the exhaustive search used when `d = 2, k = 1`.
    pub grid_step: f64,
    pub max_iter: usize,
    /// Stop once an accepted step changes the objective by less than this.
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            grid_step: 1e-4,
            max_iter: 10_000,
            tol: 1e-10,
            starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericFit {
    pub estimate: SubspaceEstimate,
    /// Objective at the returned frame.
    pub objective: f64,
    pub converged: bool,
    /// Objective at each multi-start initialization (empty for the planar grid).
    pub initial_objectives: Vec<f64>,
}

/// Minimizes the likelihood objective over orthonormal `W` without using
/// either closed form.
///
/// The objective is evaluated with dense Cholesky factorizations of the
/// noise covariances realized at each candidate. For `d = 2, k = 1` the
/// search is exhaustive over `θ ∈ [0, π)` followed by a golden-section
/// refinement; otherwise it runs multi-start projected gradient descent with
/// central finite-difference gradients and a Gram–Schmidt retraction.
pub fn fit_numeric(stats: &SufficientStats, noise: &NoiseModel, k: usize, config: &NumericConfig) -> Result<NumericFit> {
    check_k(stats, k)?;
    noise.validate(stats.d())?;
    let objective = |w: &Matrix| -> f64 {
        let a = noise.data.realize(w);
        let b = noise.augmentation.realize(w);
        neg_log_likelihood_dense(w, &a, &b, stats).unwrap_or(f64::INFINITY)
    };
    minimize_on_frames(&objective, stats, k, config, PI, Method::Numeric)
}

/// Maximum a posteriori frame: minimizes `−log P(W) + (n/2)·L(W)` with the
/// same search as [`fit_numeric`].
pub fn fit_map(
    stats: &SufficientStats,
    noise: &NoiseModel,
    prior: &PriorSpec,
    k: usize,
    config: &NumericConfig,
) -> Result<NumericFit> {
    check_k(stats, k)?;
    noise.validate(stats.d())?;
    prior.validate(stats.d(), k)?;
    let half_n = 0.5 * stats.n as f64;
    let objective = |w: &Matrix| -> f64 {
        let lik = if stats.n == 0 {
            0.0
        } else {
            let a = noise.data.realize(w);
            let b = noise.augmentation.realize(w);
            match neg_log_likelihood_dense(w, &a, &b, stats) {
                Ok(v) => half_n * v,
                Err(_) => return f64::INFINITY,
            }
        };
        lik - prior.log_density(w)
    };
    // a non-uniform prior distinguishes W from −W
    let span = match prior {
        PriorSpec::Uniform => PI,
        PriorSpec::MatrixConcentration { .. } => 2.0 * PI,
    };
    minimize_on_frames(&objective, stats, k, config, span, Method::Map)
}

fn minimize_on_frames(
    f: &dyn Fn(&Matrix) -> f64,
    stats: &SufficientStats,
    k: usize,
    config: &NumericConfig,
    planar_span: f64,
    method: Method,
) -> Result<NumericFit> {
    let d = stats.d();
    let (w, objective, converged, initial_objectives) = if d == 2 && k == 1 {
        let (theta, value) = planar_search(f, planar_span, config.grid_step);
        (OrthonormalFrame::planar(theta), value, true, Vec::new())
    } else {
        multi_start_descent(f, d, k, config)?
    };
    let rq = SymMatrix::from_upper(w.as_matrix().transpose() * stats.s_x.as_matrix() * w.as_matrix())?;
    let criterion_values = sym_eig(&rq)?.values.iter().copied().collect();
    Ok(NumericFit {
        estimate: SubspaceEstimate {
            w_hat: w,
            criterion_values,
            method,
            degenerate_spectrum: false,
        },
        objective,
        converged,
        initial_objectives,
    })
}

fn planar_search(f: &dyn Fn(&Matrix) -> f64, span: f64, step: f64) -> (f64, f64) {
    let eval = |t: f64| f(OrthonormalFrame::planar(t).as_matrix());
    let count = (span / step).ceil() as usize;
    let mut best = (0.0, eval(0.0));
    for i in 1..count {
        let t = i as f64 * step;
        let v = eval(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let (t, v) = golden_section(&eval, best.0 - step, best.0 + step, 1e-13);
    if v < best.1 {
        (t.rem_euclid(span), v)
    } else {
        best
    }
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

type DescentOutcome = (OrthonormalFrame, f64, bool, Vec<f64>);

fn multi_start_descent(f: &dyn Fn(&Matrix) -> f64, d: usize, k: usize, config: &NumericConfig) -> Result<DescentOutcome> {
    if config.starts == 0 {
        return Err(Error::ConfigError("numeric fit needs at least one start".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let inits = (0..config.starts)
        .map(|_| sample_orthonormal(d, k, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let initial_objectives: Vec<f64> = inits.iter().map(|w| f(w.as_matrix())).collect();
    let mut best: Option<(OrthonormalFrame, f64, bool)> = None;
    // ties resolved by lowest start index
    for w0 in inits {
        let (w, v, conv) = projected_descent(f, w0, config);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((w, v, conv));
        }
    }
    let (w, v, conv) = best.expect("at least one start");
    Ok((w, v, conv, initial_objectives))
}

fn fd_gradient(f: &dyn Fn(&Matrix) -> f64, w: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(w.nrows(), w.ncols());
    let mut probe = w.clone();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let h = 1e-6 * (1.0 + w[(i, j)].abs());
            probe[(i, j)] = w[(i, j)] + h;
            let up = f(&probe);
            probe[(i, j)] = w[(i, j)] - h;
            let down = f(&probe);
            probe[(i, j)] = w[(i, j)];
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}

fn projected_descent(f: &dyn Fn(&Matrix) -> f64, w0: OrthonormalFrame, config: &NumericConfig) -> (OrthonormalFrame, f64, bool) {
    let mut w = w0;
    let mut fw = f(w.as_matrix());
    let mut step = 1.0;
    for _ in 0..config.max_iter {
        let g = fd_gradient(f, w.as_matrix());
        let wtg = w.as_matrix().transpose() * &g;
        let sym = (&wtg + wtg.transpose()) * 0.5;
        let rg = g - w.as_matrix() * sym;
        let slope = rg.norm_squared();
        if slope == 0.0 || !slope.is_finite() {
            return (w, fw, slope == 0.0);
        }

        let mut t = step * 2.0;
        let accepted = loop {
            if t < 1e-20 {
                break None;
            }
            if let Ok(cand) = gram_schmidt(&(w.as_matrix() - &rg * t)) {
                let fc = f(cand.as_matrix());
                if fc <= fw - 1e-4 * t * slope {
                    break Some((cand, fc));
                }
            }
            t *= 0.5;
        };
        let Some((cand, fc)) = accepted else {
            // no descent step exists at finite-difference resolution
            return (w, fw, true);
        };
        let change = fw - fc;
        w = cand;
        fw = fc;
        step = t;
        if change.abs() < config.tol {
            return (w, fw, true);
        }
    }
    (w, fw, false)
}

/// Settings for [`sample_posterior_mh`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MhConfig {
    pub k: usize,
    /// Proposal scale τ in `W' = orthonormalize(W + τG)`.
    pub step: f64,
    pub burn_in: usize,
    pub thin: usize,
    /// Starting frame; drawn uniformly when absent.
    pub initial: Option<OrthonormalFrame>,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            k: 1,
            step: 0.05,
            burn_in: 1000,
            thin: 1,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub samples: Vec<OrthonormalFrame>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    /// Acceptance rate fell outside `[0.05, 0.95]`.
    pub acceptance_warning: bool,
}

/// Random-walk Metropolis over `d × k` frames for an arbitrary log target.
///
/// Proposals `W' = gram_schmidt(W + τG)` with i.i.d. normal `G`; acceptance
/// uses only the difference `logpost(W') − logpost(W)`. Targets returning an
/// error are treated as zero density.
pub fn metropolis_on_frames<R, F>(
    logpost: F,
    d: usize,
    n_samples: usize,
    config: &MhConfig,
    rng: &mut R,
) -> Result<PosteriorChain>
where
    R: Rng + ?Sized,
    F: Fn(&OrthonormalFrame) -> Result<f64>,
{
    let k = config.k;
    if n_samples == 0 {
        return Err(Error::ConfigError("n_samples must be >= 1".into()));
    }
    if config.thin == 0 || !(config.step > 0.0) {
        return Err(Error::ConfigError("thin must be >= 1 and step > 0".into()));
    }
    let mut w = match &config.initial {
        Some(w) if w.d() == d && w.k() == k => w.clone(),
        Some(_) => return Err(Error::DimensionError("initial frame has the wrong shape".into())),
        None => sample_orthonormal(d, k, rng)?,
    };
    let mut lp = logpost(&w).unwrap_or(f64::NEG_INFINITY);

    let total = config.burn_in + n_samples * config.thin;
    let mut samples = Vec::with_capacity(n_samples);
    let mut accepted = 0usize;
    for it in 0..total {
        let g = gaussian_matrix(d, k, rng);
        let u: f64 = rng.random();
        if let Ok(cand) = gram_schmidt(&(w.as_matrix() + g * config.step)) {
            let lc = logpost(&cand).unwrap_or(f64::NEG_INFINITY);
            let diff = lc - lp;
            if lc > f64::NEG_INFINITY && (diff >= 0.0 || u.ln() < diff) {
                w = cand;
                lp = lc;
                if it >= config.burn_in {
                    accepted += 1;
                }
            }
        }
        if it >= config.burn_in && (it - config.burn_in + 1).is_multiple_of(config.thin) {
            samples.push(w.clone());
        }
    }
    let acceptance_rate = accepted as f64 / (n_samples * config.thin) as f64;
    Ok(PosteriorChain {
        samples,
        acceptance_rate,
        acceptance_warning: !(0.05..=0.95).contains(&acceptance_rate),
    })
}

/// Posterior samples of `W` under `prior` given the sufficient statistics.
pub fn sample_posterior_mh<R: Rng + ?Sized>(
    stats: &SufficientStats,
    noise: &NoiseModel,
    prior: &PriorSpec,
    n_samples: usize,
    config: &MhConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let d = stats.d();
    if config.k == 0 || config.k > d {
        return Err(Error::DimensionError(format!("need 1 <= k <= d, got k={}, d={d}", config.k)));
    }
    noise.validate(d)?;
    prior.validate(d, config.k)?;
    metropolis_on_frames(|w| log_posterior(w, noise, stats, prior), d, n_samples, config, rng)
}
