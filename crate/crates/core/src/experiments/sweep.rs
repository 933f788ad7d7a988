//! Grid sweeps of `L_PCA − L_SSL` over noise parameters.
//!
//! Every replication redraws `W`, the latents and all noise. Seeds are
//! derived by hashing: `cell_seed = H(base_seed, cell)` and
//! `rep_seed = H(cell_seed, rep)`, so results do not depend on how work is
//! scheduled across threads.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fmt17;
use crate::error::{Error, Result};
use crate::estimators::{fit_pca, fit_ssl};
use crate::genmodel::{make_params, sample_dataset, LatentSpec, NoiseModel};
use crate::likelihood::sufficient_stats;
use crate::linalg::sample_orthonormal;
use crate::metrics::recovery_loss;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Rows are σ² (`A = σ²I`), columns ε² (`B = ε²I`).
    Isotropic,
    /// Rows are ρ (`A = ρI − WWᵀ`), columns γ (`B = γI − WWᵀ`).
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub regime: Regime,
    pub grid_a: Vec<f64>,
    pub grid_b: Vec<f64>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

impl SweepConfig {
    /// 10×10 grid over ρ, γ ∈ [1.01, 2], `d = 2, k = 1, n = 1000`.
    pub fn orthogonal_default(reps: usize, base_seed: u64) -> Self {
        SweepConfig {
            regime: Regime::Orthogonal,
            grid_a: linspace(1.01, 2.0, 10),
            grid_b: linspace(1.01, 2.0, 10),
            d: 2,
            k: 1,
            n: 1000,
            reps,
            base_seed,
        }
    }

    /// 5×5 grid over σ², ε² ∈ [0.01, 1], `d = 2, k = 1, n = 1000`.
    pub fn isotropic_default(reps: usize, base_seed: u64) -> Self {
        SweepConfig {
            regime: Regime::Isotropic,
            grid_a: linspace(0.01, 1.0, 5),
            grid_b: linspace(0.01, 1.0, 5),
            d: 2,
            k: 1,
            n: 1000,
            reps,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_a.is_empty() || self.grid_b.is_empty() {
            return Err(Error::ConfigError("grids must be non-empty".into()));
        }
        let (bound, what) = match self.regime {
            Regime::Orthogonal => (1.0, "orthogonal-regime grid values (ρ, γ) must be > 1"),
            Regime::Isotropic => (0.0, "isotropic-regime grid values (σ², ε²) must be > 0"),
        };
        if let Some(v) = self
            .grid_a
            .iter()
            .chain(&self.grid_b)
            .find(|v| !(**v > bound) || !v.is_finite())
        {
            return Err(Error::ConfigError(format!("{what}, got {v}")));
        }
        if self.k == 0 || self.k > self.d {
            return Err(Error::ConfigError(format!(
                "need 1 <= k <= d, got d={}, k={}",
                self.d, self.k
            )));
        }
        if self.reps == 0 {
            return Err(Error::ConfigError("reps must be >= 1".into()));
        }
        if self.n < self.k {
            return Err(Error::ConfigError("n must be >= k".into()));
        }
        Ok(())
    }

    pub fn noise(&self, a: f64, b: f64) -> NoiseModel {
        match self.regime {
            Regime::Isotropic => NoiseModel::isotropic(a, b),
            Regime::Orthogonal => NoiseModel::orthogonal(a, b),
        }
    }

    pub fn cell_seed(&self, row: usize, col: usize) -> u64 {
        derive_seed(self.base_seed, (row * self.grid_b.len() + col) as u64)
    }
}

/// Summary of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: usize,
    pub col: usize,
    pub row_param: f64,
    pub col_param: f64,
    /// Mean of `L_PCA − L_SSL`; positive means SSL recovered the latents better.
    pub mean_diff: f64,
    /// Sample standard deviation over `√reps` (NaN for a single rep).
    pub se_diff: f64,
    pub reps: usize,
    pub cell_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Row-major over `(grid_a, grid_b)`.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, row: usize, col: usize) -> &CellResult {
        &self.cells[row * self.config.grid_b.len() + col]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_param,col_param,mean_diff,se_diff,reps,cell_seed\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(c.row_param),
                fmt17(c.col_param),
                fmt17(c.mean_diff),
                fmt17(c.se_diff),
                c.reps,
                c.cell_seed
            );
        }
        out
    }
}

/// One replication: returns `L_PCA − L_SSL`.
pub fn replicate(config: &SweepConfig, a: f64, b: f64, rep_seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(rep_seed);
    let (d, k) = (config.d, config.k);
    let w = sample_orthonormal(d, k, &mut rng)?;
    let noise = config.noise(a, b);
    let params = make_params(d, k, w, noise.data, noise.augmentation)?;
    let data = sample_dataset(&params, &LatentSpec::StandardGaussian { k }, config.n, &mut rng)?;
    let stats = sufficient_stats(&data);
    let pca = fit_pca(&stats, k)?;
    let ssl = fit_ssl(&stats, k)?;
    let l_pca = recovery_loss(&data.z, &data.x, &pca.w_hat)?.loss;
    let l_ssl = recovery_loss(&data.z, &data.x, &ssl.w_hat)?.loss;
    Ok(l_pca - l_ssl)
}

/// Runs every cell and replication on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let (rows, cols, reps) = (config.grid_a.len(), config.grid_b.len(), config.reps);
    let jobs: Vec<(usize, usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).flat_map(move |c| (0..reps).map(move |i| (r, c, i))))
        .collect();
    let diffs = jobs
        .par_iter()
        .map(|&(r, c, i)| {
            let seed = derive_seed(config.cell_seed(r, c), i as u64);
            replicate(config, config.grid_a[r], config.grid_b[c], seed)
        })
        .collect::<Result<Vec<f64>>>()?;

    let cells = diffs
        .chunks(reps)
        .enumerate()
        .map(|(idx, xs)| {
            let (row, col) = (idx / cols, idx % cols);
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let se = if reps > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
                (var / reps as f64).sqrt()
            } else {
                f64::NAN
            };
            CellResult {
                row,
                col,
                row_param: config.grid_a[row],
                col_param: config.grid_b[col],
                mean_diff: mean,
                se_diff: se,
                reps,
                cell_seed: config.cell_seed(row, col),
            }
        })
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        cells,
    })
}
