//! Monte Carlo experiments: parameter sweeps comparing PCA with the
//! non-contrastive estimator, and the Gaussian-mixture demonstration.

pub mod gmm;
pub mod kde;
pub mod svg;
pub mod sweep;

pub use gmm::{run_gmm_demo, GmmDemoConfig, GmmDemoResult};
pub use kde::{kde, silverman_bandwidth, KdeCurve};
pub use sweep::{linspace, run_sweep, CellResult, Regime, SweepConfig, SweepResult};

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
