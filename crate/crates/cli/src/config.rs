//! Flat TOML configuration, one schema per subcommand.
//!
//! Every key is optional and falls back to the documented default; unknown
//! keys are schema violations. `seed` and `out` may also be given on the
//! command line, which takes precedence.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `definetti`: decompose an exchangeable mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefinettiConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    /// `"mixture"` (finite Bernoulli mixture) or `"polya"` (Beta mixing).
    pub model: String,
    pub weights: Vec<String>,
    pub params: Vec<String>,
    pub alpha: String,
    pub beta: String,
    pub window: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub mc_samples: usize,
    pub min_gap: f64,
    pub representative_probes: usize,
    pub residual_depth: usize,
    /// Allowed error on recovered weights and centers.
    pub recovery_tolerance: f64,
    pub residual_tolerance: f64,
    pub ks_tolerance: f64,
}

impl Default for DefinettiConfig {
    fn default() -> Self {
        DefinettiConfig {
            seed: None,
            out: None,
            model: "mixture".into(),
            weights: vec!["3/10".into(), "7/10".into()],
            params: vec!["1/5".into(), "4/5".into()],
            alpha: "2".into(),
            beta: "3".into(),
            window: 4096,
            samples: 20_000,
            tolerance: 1e-3,
            mc_samples: 2048,
            min_gap: 0.05,
            representative_probes: 8,
            residual_depth: 3,
            recovery_tolerance: 0.02,
            residual_tolerance: 0.01,
            ks_tolerance: 0.02,
        }
    }
}

/// `kolmogorov`: the full-group demonstrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KolmogorovToml {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub atom_bound: usize,
    pub window: usize,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for KolmogorovToml {
    fn default() -> Self {
        KolmogorovToml { seed: None, out: None, atom_bound: 4, window: 4096, samples: 10_000, tolerance: 0.02 }
    }
}

/// `sigma-finite`: `P_f`, decomposition and class invariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SigmaFiniteConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    /// Orbit labels `0..orbits` of the model that is decomposed and reweighted.
    pub orbits: usize,
    pub reweightings: usize,
    pub pairs: usize,
    /// Labels available to the random models of the pair and round-trip sweeps.
    pub random_labels: usize,
    pub roundtrip_models: usize,
}

impl Default for SigmaFiniteConfig {
    fn default() -> Self {
        SigmaFiniteConfig { seed: None, out: None, orbits: 3, reweightings: 100, pairs: 10, random_labels: 6, roundtrip_models: 50 }
    }
}

/// `orbital`: the mass-escape / convergence dichotomy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitalConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    /// 1-based positions of the ones of the finite-support point.
    pub ones: Vec<usize>,
    pub escape_top: usize,
    pub density: String,
    pub typical_window: usize,
    pub tolerance: f64,
    pub mc_samples: usize,
    pub limit_tolerance: f64,
}

impl Default for OrbitalConfig {
    fn default() -> Self {
        OrbitalConfig {
            seed: None,
            out: None,
            ones: vec![1, 2, 3],
            escape_top: 1000,
            density: "1/2".into(),
            typical_window: 4096,
            tolerance: 1e-3,
            mc_samples: 2048,
            limit_tolerance: 0.03,
        }
    }
}

/// `validate`: the exact property suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub cocycle_trials: usize,
    pub cocycle_level: usize,
    pub cocycle_window: usize,
    pub conditional_window: usize,
    pub conditional_level: usize,
    pub dictionary_depth: usize,
    pub tower_window: usize,
    pub tower_max_level: usize,
    pub fubini_max_window: usize,
    pub fubini_max_level: usize,
    pub invariance_window: usize,
    pub invariance_max_level: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            seed: None,
            out: None,
            cocycle_trials: 1000,
            cocycle_level: 6,
            cocycle_window: 16,
            conditional_window: 4,
            conditional_level: 2,
            dictionary_depth: 2,
            tower_window: 6,
            tower_max_level: 5,
            fubini_max_window: 4,
            fubini_max_level: 3,
            invariance_window: 6,
            invariance_max_level: 5,
        }
    }
}

pub fn parse<T: DeserializeOwned + Default>(text: Option<&str>) -> Result<T, CliError> {
    match text {
        None => Ok(T::default()),
        Some(t) => toml::from_str(t).map_err(|e| CliError::Schema(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: DefinettiConfig = parse(Some("")).unwrap();
        assert_eq!(c.samples, 20_000);
        assert_eq!(c.weights, ["3/10", "7/10"]);
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected() {
        assert!(matches!(parse::<ValidateConfig>(Some("cocycle_trails = 3")), Err(CliError::Schema(_))));
        assert!(matches!(parse::<OrbitalConfig>(Some("ones = \"1,2\"")), Err(CliError::Schema(_))));
    }

    #[test]
    fn overrides_are_applied() {
        let c: KolmogorovToml = parse(Some("samples = 50\nseed = 9")).unwrap();
        assert_eq!((c.samples, c.seed, c.window), (50, Some(9), 4096));
    }
}
