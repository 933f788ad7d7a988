//! Errors, JSON config loading and model-config validation.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ssl_genlab::estimators::{MhConfig, NumericConfig};
use ssl_genlab::{LatentSpec, NoiseModel, NoiseSpec, OrthonormalFrame, PriorSpec};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data (exit 2).
    Config(String),
    /// Filesystem failure (exit 3).
    Io(String),
    /// Anything else that stopped the run (exit 1).
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<ssl_genlab::Error> for CliError {
    fn from(e: ssl_genlab::Error) -> Self {
        use ssl_genlab::Error as E;
        match e {
            E::ConfigError(_)
            | E::InvalidNoise(_)
            | E::SingularModel(_)
            | E::InvalidPrior(_)
            | E::DimensionError(_)
            | E::NotPsd { .. }
            | E::InvalidMatrix(_) => CliError::Config(e.to_string()),
            E::ConvergenceFailure { .. } | E::DegenerateData(_) => CliError::Run(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads and deserializes a JSON file. Schema errors carry the path to the
/// offending key.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            inner.to_string()
        } else {
            format!("at `{path}`: {inner}")
        }
    })
}

/// Generative model plus the estimator settings that depend on it. Used by
/// `sample`, and as the `--model` file of `fit` and `posterior`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub k: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentSpec>,
    /// Signal frame; drawn uniformly from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<OrthonormalFrame>,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub mh: MhConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_n() -> usize {
    1000
}

fn default_prior() -> PriorSpec {
    PriorSpec::Uniform
}

fn check_noise(spec: &NoiseSpec, key: &str, symbol: &str, d: usize) -> CliResult<()> {
    match spec {
        NoiseSpec::OrthogonalComplement { level } if !(*level > 1.0) || !level.is_finite() => {
            Err(CliError::config(format!(
                "`{key}.level`: orthogonal-complement noise requires {symbol} > 1, got {level}"
            )))
        }
        NoiseSpec::Isotropic { scale } if !(*scale > 0.0) || !scale.is_finite() => Err(CliError::config(
            format!("`{key}.scale`: isotropic noise requires {symbol} > 0, got {scale}"),
        )),
        _ => spec
            .validate(d)
            .map_err(|e| CliError::config(format!("`{key}`: {e}"))),
    }
}

impl ModelConfig {
    pub fn validate(&self) -> CliResult<()> {
        let (d, k) = (self.d, self.k);
        if k == 0 || k > d {
            return Err(CliError::config(format!("`k`: need 1 <= k <= d, got k={k}, d={d}")));
        }
        if self.n == 0 {
            return Err(CliError::config("`n`: must be >= 1"));
        }
        let (a_sym, b_sym) = match self.noise.data {
            NoiseSpec::OrthogonalComplement { .. } => ("ρ", "γ"),
            _ => ("σ²", "ε²"),
        };
        check_noise(&self.noise.data, "noise.data", a_sym, d)?;
        check_noise(&self.noise.augmentation, "noise.augmentation", b_sym, d)?;
        if let Some(latent) = &self.latent {
            latent
                .validate()
                .map_err(|e| CliError::config(format!("`latent`: {e}")))?;
            if latent.k() != k {
                return Err(CliError::config(format!(
                    "`latent`: dimension {} does not match k={k}",
                    latent.k()
                )));
            }
        }
        if let Some(w) = &self.w {
            if w.d() != d || w.k() != k {
                return Err(CliError::config(format!(
                    "`w`: frame is {}x{}, expected {d}x{k}",
                    w.d(),
                    w.k()
                )));
            }
        }
        self.prior
            .validate(d, k)
            .map_err(|e| CliError::config(format!("`prior`: {e}")))?;
        Ok(())
    }

    pub fn latent_spec(&self) -> LatentSpec {
        self.latent.clone().unwrap_or(LatentSpec::StandardGaussian { k: self.k })
    }
}

/// `--seed` wins over a seed stored in the config; 42 otherwise.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config).unwrap_or(DEFAULT_SEED)
}
