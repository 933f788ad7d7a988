//! `ssl-genlab`: sample, fit and run experiments on the latent-variable
//! model of non-contrastive learning.

mod commands;
mod config;
mod data;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ssl_genlab::experiments::{GmmDemoConfig, SweepConfig};
use ssl_genlab::{LatentSpec, Method};

use commands::{FitRun, GmmRun, Invocation, PosteriorRun, SampleRun, SweepRun};
use config::{load_json, resolve_seed, CliError, CliResult, ModelConfig};

#[derive(Parser, Debug)]
#[command(name = "ssl-genlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base seed for every random stream (default 42; overrides a seed in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "SSL_GENLAB_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a paired dataset from a model config.
    Sample { config: PathBuf },
    /// Estimate the signal subspace from a dataset CSV.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Subspace dimension; defaults to the number of z columns, then the model's k.
        #[arg(long)]
        k: Option<usize>,
        /// Model config; required for `numeric` and `map`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Monte Carlo sweep of L_PCA − L_SSL over a noise grid.
    Sweep {
        /// Sweep config; a preset grid is used when omitted.
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RegimeArg::Orthogonal)]
        regime: RegimeArg,
        /// Replications per cell (overrides the config).
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Gaussian-mixture latent demonstration.
    GmmDemo { config: Option<PathBuf> },
    /// Metropolis–Hastings samples of W.
    Posterior {
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV; without it the chain samples the prior.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
    },
    /// Re-run the invocation recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Pca,
    Ssl,
    Numeric,
    Map,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pca => Method::Pca,
            MethodArg::Ssl => Method::Ssl,
            MethodArg::Numeric => Method::Numeric,
            MethodArg::Map => Method::Map,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RegimeArg {
    Orthogonal,
    Isotropic,
}

fn resolve_model(path: &Path, seed_flag: Option<u64>) -> CliResult<ModelConfig> {
    let mut m: ModelConfig = load_json(path)?;
    m.seed = Some(resolve_seed(seed_flag, m.seed));
    if m.latent.is_none() {
        m.latent = Some(LatentSpec::StandardGaussian { k: m.k });
    }
    Ok(m)
}

fn resolve(cli: &Cli) -> CliResult<Invocation> {
    let seed = cli.seed;
    Ok(match &cli.command {
        Command::Sample { config } => Invocation::Sample(SampleRun {
            model: resolve_model(config, seed)?,
        }),
        Command::Fit { data, method, k, model } => {
            let model = model.as_ref().map(|p| resolve_model(p, seed)).transpose()?;
            let k = match k {
                Some(k) => *k,
                None => {
                    let z_cols = data::read_csv(data)?.k();
                    match (z_cols, &model) {
                        (0, Some(m)) => m.k,
                        (0, None) => return Err(CliError::config("`k`: no z columns in the data; pass --k")),
                        (z, _) => z,
                    }
                }
            };
            Invocation::Fit(FitRun {
                data: data.clone(),
                method: (*method).into(),
                k,
                seed: resolve_seed(seed, model.as_ref().and_then(|m| m.seed)),
                model,
            })
        }
        Command::Sweep { config, regime, reps } => {
            let mut sweep = match config {
                Some(p) => {
                    let mut c: SweepConfig = load_json(p)?;
                    c.base_seed = resolve_seed(seed, Some(c.base_seed));
                    c
                }
                None => {
                    let (reps, seed) = (reps.unwrap_or(100), resolve_seed(seed, None));
                    match regime {
                        RegimeArg::Orthogonal => SweepConfig::orthogonal_default(reps, seed),
                        RegimeArg::Isotropic => SweepConfig::isotropic_default(reps, seed),
                    }
                }
            };
            if let Some(r) = reps {
                sweep.reps = *r;
            }
            Invocation::Sweep(SweepRun { sweep, svg: cli.svg })
        }
        Command::GmmDemo { config } => {
            let mut gmm: GmmDemoConfig = match config {
                Some(p) => load_json(p)?,
                None => GmmDemoConfig::default(),
            };
            if let Some(s) = seed {
                gmm.seed = s;
            }
            Invocation::GmmDemo(GmmRun { gmm, svg: cli.svg })
        }
        Command::Posterior { model, data, samples } => Invocation::Posterior(PosteriorRun {
            data: data.clone(),
            model: resolve_model(model, seed)?,
            samples: *samples,
        }),
        Command::Replay { manifest } => commands::load_manifest(manifest)?.invocation,
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("`--threads`: must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Run(e.to_string()))?;
    pool.install(|| {
        let inv = resolve(cli)?;
        let written = commands::execute(&inv, &cli.out)?;
        for p in written {
            println!("{}", p.display());
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
