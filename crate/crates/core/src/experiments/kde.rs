//! One-dimensional Gaussian kernel density estimation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of evaluation points used when none are supplied.
pub const DEFAULT_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub eval_points: Vec<f64>,
    pub densities: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Trapezoid-rule integral of the density over the evaluation points.
    pub fn integral(&self) -> f64 {
        self.eval_points
            .windows(2)
            .zip(self.densities.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
            .sum()
    }

    /// Number of strict interior local maxima.
    pub fn local_maxima(&self) -> usize {
        self.densities
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2])
            .count()
    }

    pub fn peak(&self) -> f64 {
        self.densities.iter().copied().fold(0.0, f64::max)
    }
}

/// Silverman's rule `1.06 · std · n^(-1/5)`, with the unbiased sample std.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("KDE needs at least 2 values, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::DegenerateData("KDE input has zero variance".into()));
    }
    Ok(1.06 * std * (n as f64).powf(-0.2))
}

/// Gaussian KDE of `values`. Without `eval_points`, evaluates on
/// [`DEFAULT_POINTS`] uniform points spanning the data range ± 3 bandwidths.
pub fn kde(values: &[f64], eval_points: Option<&[f64]>) -> Result<KdeCurve> {
    let h = silverman_bandwidth(values)?;
    let points = match eval_points {
        Some(p) => p.to_vec(),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
            super::linspace(lo, hi, DEFAULT_POINTS)
        }
    };
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    let densities = points
        .iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve {
        eval_points: points,
        densities,
        bandwidth: h,
    })
}
