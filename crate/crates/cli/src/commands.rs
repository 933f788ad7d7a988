//! Subcommand implementations. Each resolved invocation is pure data, so a
//! manifest can replay it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use ssl_genlab::estimators::{fit_map, fit_numeric, NumericConfig};
use ssl_genlab::experiments::gmm::kde_csv;
use ssl_genlab::experiments::{fmt17, run_gmm_demo, run_sweep, svg, GmmDemoConfig, SweepConfig};
use ssl_genlab::linalg::{gram_schmidt, sample_orthonormal};
use ssl_genlab::metrics::{recovery_loss, subspace_alignment};
use ssl_genlab::seed::{derive_named, rng_from_seed};
use ssl_genlab::{
    fit_pca, fit_ssl, make_params, sample_dataset, sample_posterior_mh, sufficient_stats, Method, OrthonormalFrame,
    PairedDataset, SufficientStats,
};

use crate::config::{load_json, CliError, CliResult, ModelConfig};
use crate::data;
use crate::output::{OutputSet, RunManifest, MANIFEST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub model: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRun {
    pub data: PathBuf,
    pub method: Method,
    pub k: usize,
    pub model: Option<ModelConfig>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub sweep: SweepConfig,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmRun {
    pub gmm: GmmDemoConfig,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRun {
    pub data: Option<PathBuf>,
    pub model: ModelConfig,
    pub samples: usize,
}

/// A fully resolved run: every default and the seed are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "kebab-case")]
pub enum Invocation {
    Sample(SampleRun),
    Fit(FitRun),
    Sweep(SweepRun),
    GmmDemo(GmmRun),
    Posterior(PosteriorRun),
}

impl Invocation {
    pub fn seed(&self) -> u64 {
        match self {
            Invocation::Sample(r) => r.model.seed.unwrap_or_default(),
            Invocation::Fit(r) => r.seed,
            Invocation::Sweep(r) => r.sweep.base_seed,
            Invocation::GmmDemo(r) => r.gmm.seed,
            Invocation::Posterior(r) => r.model.seed.unwrap_or_default(),
        }
    }

    fn run(&self) -> CliResult<OutputSet> {
        match self {
            Invocation::Sample(r) => run_sample(r),
            Invocation::Fit(r) => run_fit(r),
            Invocation::Sweep(r) => run_sweep_cmd(r),
            Invocation::GmmDemo(r) => run_gmm(r),
            Invocation::Posterior(r) => run_posterior(r),
        }
    }
}

/// Runs `inv`, then writes its outputs and manifest to `out`.
pub fn execute(inv: &Invocation, out: &Path) -> CliResult<Vec<PathBuf>> {
    let start = Instant::now();
    let mut files = inv.run()?;
    let manifest = RunManifest {
        invocation: inv.clone(),
        seed: inv.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: files.names(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    files.add_json(MANIFEST, &manifest)?;
    files.commit(out)
}

pub fn load_manifest(path: &Path) -> CliResult<RunManifest> {
    load_json(path)
}

fn frame_rows(w: &OrthonormalFrame) -> Vec<Vec<f64>> {
    w.to_rows()
}

fn draw_frame(model: &ModelConfig, seed: u64) -> CliResult<OrthonormalFrame> {
    Ok(match &model.w {
        Some(w) => w.clone(),
        None => sample_orthonormal(model.d, model.k, &mut rng_from_seed(derive_named(seed, "w")))?,
    })
}

#[derive(Serialize)]
struct ParamsReport {
    w: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    params_hash: u64,
    latent_hash: u64,
}

fn run_sample(r: &SampleRun) -> CliResult<OutputSet> {
    let model = &r.model;
    model.validate()?;
    let seed = model.seed.unwrap_or_default();
    let w = draw_frame(model, seed)?;
    let params = make_params(
        model.d,
        model.k,
        w,
        model.noise.data.clone(),
        model.noise.augmentation.clone(),
    )?;
    let latent = model.latent_spec();
    let ds = sample_dataset(&params, &latent, model.n, &mut rng_from_seed(derive_named(seed, "data")))?;
    let mut out = OutputSet::default();
    out.add("dataset.csv", data::to_csv(&ds));
    out.add_json(
        "params.json",
        &ParamsReport {
            w: frame_rows(&params.w),
            a: params.a.to_rows(),
            b: params.b.to_rows(),
            params_hash: params.provenance_hash(),
            latent_hash: latent.provenance_hash(),
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct FitReport {
    method: Method,
    k: usize,
    w_hat: Vec<Vec<f64>>,
    criterion_values: Vec<f64>,
    degenerate_spectrum: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    /// `model` when the model config fixes `w`, `regression` when it is
    /// estimated by least squares of `x` on the `z` columns.
    #[serde(skip_serializing_if = "Option::is_none")]
    true_w_source: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_loss: Option<f64>,
}

/// Least-squares `W` from `x ≈ Wz`, orthonormalized.
fn regress_frame(ds: &PairedDataset) -> Option<OrthonormalFrame> {
    let ztz = ds.z.transpose() * &ds.z;
    let coef: DMatrix<f64> = ztz.try_inverse()? * ds.z.transpose() * &ds.x;
    gram_schmidt(&coef.transpose()).ok()
}

fn require_model(model: &Option<ModelConfig>, method: Method, d: usize) -> CliResult<&ModelConfig> {
    let m = model
        .as_ref()
        .ok_or_else(|| CliError::config(format!("method `{method}` needs --model (noise covariances A, B)")))?;
    m.validate()?;
    if m.d != d {
        return Err(CliError::config(format!("`d`: model has d={}, data has d={d}", m.d)));
    }
    Ok(m)
}

fn run_fit(r: &FitRun) -> CliResult<OutputSet> {
    let ds = data::read_csv(&r.data)?;
    let (d, k) = (ds.d(), r.k);
    if k == 0 || k > d {
        return Err(CliError::config(format!("`k`: need 1 <= k <= d, got k={k}, d={d}")));
    }
    let stats = sufficient_stats(&ds);
    let numeric_cfg = |m: &ModelConfig| NumericConfig {
        seed: derive_named(r.seed, "numeric"),
        ..m.numeric.clone()
    };
    let (est, objective, converged) = match r.method {
        Method::Pca => (fit_pca(&stats, k)?, None, None),
        Method::Ssl => (fit_ssl(&stats, k)?, None, None),
        Method::Numeric => {
            let m = require_model(&r.model, r.method, d)?;
            let f = fit_numeric(&stats, &m.noise, k, &numeric_cfg(m))?;
            (f.estimate, Some(f.objective), Some(f.converged))
        }
        Method::Map => {
            let m = require_model(&r.model, r.method, d)?;
            let f = fit_map(&stats, &m.noise, &m.prior, k, &numeric_cfg(m))?;
            (f.estimate, Some(f.objective), Some(f.converged))
        }
    };

    let from_model = r
        .model
        .as_ref()
        .and_then(|m| m.w.clone())
        .filter(|w| w.d() == d && w.k() == k)
        .map(|w| ("model", w));
    let truth = from_model.or_else(|| {
        (ds.k() == k)
            .then(|| regress_frame(&ds))
            .flatten()
            .map(|w| ("regression", w))
    });
    let alignment = truth
        .as_ref()
        .map(|(_, w)| subspace_alignment(w, &est.w_hat))
        .transpose()?;
    let loss = if ds.k() == k {
        Some(recovery_loss(&ds.z, &ds.x, &est.w_hat)?.loss)
    } else {
        None
    };

    let report = FitReport {
        method: r.method,
        k,
        w_hat: frame_rows(&est.w_hat),
        criterion_values: est.criterion_values.clone(),
        degenerate_spectrum: est.degenerate_spectrum,
        objective,
        converged,
        true_w_source: truth.map(|(s, _)| s),
        alignment,
        recovery_loss: loss,
    };
    let mut out = OutputSet::default();
    out.add_json("fit.json", &report)?;
    Ok(out)
}

fn run_sweep_cmd(r: &SweepRun) -> CliResult<OutputSet> {
    let result = run_sweep(&r.sweep)?;
    let mut out = OutputSet::default();
    out.add("sweep.csv", result.to_csv());
    if r.svg {
        out.add("heatmap.svg", svg::heatmap(&result));
    }
    Ok(out)
}

#[derive(Serialize)]
struct GmmFrames {
    w_true: Vec<Vec<f64>>,
    w_pca: Vec<Vec<f64>>,
    w_ssl: Vec<Vec<f64>>,
    alignment_pca: f64,
    alignment_ssl: f64,
    kde_bandwidth: [f64; 3],
    kde_local_maxima: [usize; 3],
}

fn run_gmm(r: &GmmRun) -> CliResult<OutputSet> {
    let res = run_gmm_demo(&r.gmm)?;
    let mut out = OutputSet::default();
    out.add("embeddings.csv", res.embeddings_csv());
    out.add("points.csv", res.points_csv());
    out.add("kde_true.csv", kde_csv(&res.kde_true));
    out.add("kde_pca.csv", kde_csv(&res.kde_pca));
    out.add("kde_ssl.csv", kde_csv(&res.kde_ssl));
    let curves = [&res.kde_true, &res.kde_pca, &res.kde_ssl];
    out.add_json(
        "frames.json",
        &GmmFrames {
            w_true: frame_rows(&res.w_true),
            w_pca: frame_rows(&res.w_pca),
            w_ssl: frame_rows(&res.w_ssl),
            alignment_pca: res.alignment_pca,
            alignment_ssl: res.alignment_ssl,
            kde_bandwidth: curves.map(|c| c.bandwidth),
            kde_local_maxima: curves.map(|c| c.local_maxima()),
        },
    )?;
    if r.svg {
        out.add(
            "kde.svg",
            svg::kde_overlay(&[
                ("true", &res.kde_true, "black"),
                ("PCA", &res.kde_pca, "#d62728"),
                ("SSL", &res.kde_ssl, "#1f77b4"),
            ]),
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct PosteriorReport {
    samples: usize,
    acceptance_rate: f64,
    acceptance_warning: bool,
    /// Sample mean of `WWᵀ`.
    mean_projector: Vec<Vec<f64>>,
    /// Mean cosine of the principal angles to the SSL estimate, when data
    /// were given.
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_alignment_to_ssl: Option<f64>,
}

fn run_posterior(r: &PosteriorRun) -> CliResult<OutputSet> {
    let model = &r.model;
    model.validate()?;
    let (d, k) = (model.d, model.k);
    let stats = match &r.data {
        Some(path) => {
            let ds = data::read_csv(path)?;
            if ds.d() != d {
                return Err(CliError::config(format!("`d`: model has d={d}, data has d={}", ds.d())));
            }
            sufficient_stats(&ds)
        }
        None => SufficientStats::empty(d),
    };
    let mut mh = model.mh.clone();
    mh.k = k;
    let seed = model.seed.unwrap_or_default();
    let chain = sample_posterior_mh(
        &stats,
        &model.noise,
        &model.prior,
        r.samples,
        &mh,
        &mut rng_from_seed(derive_named(seed, "mh")),
    )?;
    if chain.acceptance_warning {
        eprintln!(
            "warning: acceptance rate {:.3} is outside [0.05, 0.95]; consider changing mh.step",
            chain.acceptance_rate
        );
    }

    let mut csv = String::from("index");
    for i in 1..=d {
        if k == 1 {
            let _ = write!(csv, ",w{i}");
        } else {
            for j in 1..=k {
                let _ = write!(csv, ",w{i}_{j}");
            }
        }
    }
    csv.push('\n');
    let mut proj = DMatrix::<f64>::zeros(d, d);
    for (s, w) in chain.samples.iter().enumerate() {
        let _ = write!(csv, "{s}");
        let m = w.as_matrix();
        for i in 0..d {
            for j in 0..k {
                let _ = write!(csv, ",{}", fmt17(m[(i, j)]));
            }
        }
        csv.push('\n');
        proj += m * m.transpose();
    }
    proj /= chain.samples.len() as f64;

    let mean_alignment_to_ssl = if stats.n > 0 {
        let w_ssl = fit_ssl(&stats, k)?.w_hat;
        let mut total = 0.0;
        for w in &chain.samples {
            let c = subspace_alignment(&w_ssl, w)?;
            total += c.iter().sum::<f64>() / k as f64;
        }
        Some(total / chain.samples.len() as f64)
    } else {
        None
    };

    let mut out = OutputSet::default();
    out.add("chain.csv", csv);
    out.add_json(
        "posterior.json",
        &PosteriorReport {
            samples: chain.samples.len(),
            acceptance_rate: chain.acceptance_rate,
            acceptance_warning: chain.acceptance_warning,
            mean_projector: proj.row_iter().map(|r| r.iter().copied().collect()).collect(),
            mean_alignment_to_ssl,
        },
    )?;
    Ok(out)
}
