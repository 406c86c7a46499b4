//! Experiment harness for the `ergodec` binary.
//!
//! Exit codes: 0 when every verdict passes, 1 when some verdict fails, 2 for
//! schema or usage errors, 3 for capacity errors, 4 for any other failure.

pub mod config;
pub mod experiments;
pub mod record;

use ergodec_core::error::Error;

pub use record::ResultRecord;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Core(Error::Parse(_)) => 2,
            CliError::Core(Error::Capacity { .. }) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Definetti,
    Kolmogorov,
    SigmaFinite,
    Orbital,
    Validate,
}

/// Seed used when neither the flag nor the config sets one.
pub const DEFAULT_SEED: u64 = 42;

/// Runs `experiment` on the TOML text (or defaults); `seed` overrides the config.
/// Returns the record and the output directory named in the config, if any.
pub fn run(experiment: Experiment, config_text: Option<&str>, seed: Option<u64>) -> Result<(ResultRecord, Option<String>), CliError> {
    macro_rules! go {
        ($ty:ty, $f:path) => {{
            let mut cfg: $ty = config::parse(config_text)?;
            let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            cfg.seed = Some(seed);
            let out = cfg.out.take();
            ($f(&cfg, seed)?, out)
        }};
    }
    Ok(match experiment {
        Experiment::Definetti => go!(config::DefinettiConfig, experiments::definetti),
        Experiment::Kolmogorov => go!(config::KolmogorovToml, experiments::kolmogorov),
        Experiment::SigmaFinite => go!(config::SigmaFiniteConfig, experiments::sigma_finite),
        Experiment::Orbital => go!(config::OrbitalConfig, experiments::orbital),
        Experiment::Validate => go!(config::ValidateConfig, experiments::validate),
    })
}
