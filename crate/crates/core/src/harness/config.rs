use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::BundleSpec;
use crate::error::{Error, Result};
use crate::pseudo::SymbolSpec;
use crate::weights::SlowVaryWeight;

/// The named experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    InterpExactness,
    InterpEquivalence,
    AtlasIndependence,
    Duality,
    EmbeddingCriterion,
    Sharpness,
    FredholmIndex,
    IndexInvariance,
    RestrictedIsomorphism,
    Apriori,
    Regularity,
    Sewing,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::InterpExactness,
        Suite::InterpEquivalence,
        Suite::AtlasIndependence,
        Suite::Duality,
        Suite::EmbeddingCriterion,
        Suite::Sharpness,
        Suite::FredholmIndex,
        Suite::IndexInvariance,
        Suite::RestrictedIsomorphism,
        Suite::Apriori,
        Suite::Regularity,
        Suite::Sewing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::InterpExactness => "interp-exactness",
            Suite::InterpEquivalence => "interp-equivalence",
            Suite::AtlasIndependence => "atlas-independence",
            Suite::Duality => "duality",
            Suite::EmbeddingCriterion => "embedding-criterion",
            Suite::Sharpness => "sharpness",
            Suite::FredholmIndex => "fredholm-index",
            Suite::IndexInvariance => "index-invariance",
            Suite::RestrictedIsomorphism => "restricted-isomorphism",
            Suite::Apriori => "apriori",
            Suite::Regularity => "regularity",
            Suite::Sewing => "sewing",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown suite '{name}'")))
    }

    pub fn summary(self) -> &'static str {
        match self {
            Suite::InterpExactness => "interpolated Sobolev forms equal the refined norm on the diagonal model",
            Suite::InterpEquivalence => "interpolated and direct bundle forms are equivalent, constants stable in N",
            Suite::AtlasIndependence => "bundle norms from two atlases are equivalent, ratio bracket stable in N",
            Suite::Duality => "pairing bound with constant 1 on the torus, stable empirical constant on bundles",
            Suite::EmbeddingCriterion => "convergence classifier for the single-log family against r > 1/2",
            Suite::Sharpness => "1/(k log k): bounded H^{1/2} norm, growing sup norm",
            Suite::FredholmIndex => "kernel, cokernel and index of elliptic symbols at several bands",
            Suite::IndexInvariance => "same index and kernels across (s, φ)",
            Suite::RestrictedIsomorphism => "restricted solves: residuals and condition numbers across N",
            Suite::Apriori => "a priori estimate constants and commutator order drop",
            Suite::Regularity => "solution norm over data norm at shifted indices, flat in N",
            Suite::Sewing => "sewing left-inverts flattening; sewing bound constant stable in N",
        }
    }

    /// Defaults used when a configuration omits a field.
    pub fn defaults(self) -> Experiment {
        let log = SlowVaryWeight::log_power(1.0);
        let base = Experiment {
            suite: self,
            seed: 0,
            cutoffs: vec![32],
            weights: vec![log.clone()],
            s: 0.5,
            epsilon: 1.0,
            delta: 1.0,
            sigma: None,
            q: 0,
            spaces: Vec::new(),
            bundles: vec!["trivial".into(), "twisted".into()],
            symbols: Vec::new(),
            samples: 100,
            decay: 2.0,
            band: None,
            exponents: Vec::new(),
            output_dir: None,
            workers: 4,
        };
        match self {
            Suite::InterpExactness => Experiment {
                cutoffs: vec![64],
                weights: vec![
                    SlowVaryWeight::constant(),
                    log,
                    SlowVaryWeight::log_power(0.5),
                    SlowVaryWeight::iterated_log(vec![1.0, 1.0]).expect("valid weight"),
                ],
                ..base
            },
            Suite::InterpEquivalence => Experiment {
                cutoffs: vec![16, 32],
                ..base
            },
            Suite::AtlasIndependence | Suite::Duality => Experiment {
                cutoffs: vec![16, 32, 64],
                ..base
            },
            Suite::EmbeddingCriterion => Experiment {
                exponents: vec![0.6, 1.0, 2.0, 0.0, 0.25, 0.5],
                cutoffs: vec![1],
                ..base
            },
            Suite::Sharpness => Experiment {
                cutoffs: vec![1 << 10, 1 << 14],
                weights: vec![SlowVaryWeight::constant()],
                ..base
            },
            Suite::FredholmIndex => Experiment {
                cutoffs: vec![32, 64],
                s: 0.0,
                weights: vec![SlowVaryWeight::constant()],
                symbols: vec![
                    SymbolSpec::Identity { rank: 1 },
                    SymbolSpec::Derivative,
                    SymbolSpec::Winding { w: 1 },
                    SymbolSpec::Winding { w: 2 },
                ],
                ..base
            },
            Suite::IndexInvariance => Experiment {
                symbols: vec![SymbolSpec::Winding { w: 1 }],
                spaces: vec![
                    SpaceConfig {
                        s: 0.0,
                        weight: SlowVaryWeight::constant(),
                    },
                    SpaceConfig { s: 1.0, weight: log.clone() },
                    SpaceConfig {
                        s: -0.5,
                        weight: log.reciprocal(),
                    },
                ],
                ..base
            },
            Suite::RestrictedIsomorphism => Experiment {
                cutoffs: vec![32, 64, 128],
                samples: 50,
                decay: 1.0,
                band: Some(8),
                symbols: vec![SymbolSpec::Winding { w: 1 }, SymbolSpec::DerivativePlusCos],
                ..base
            },
            Suite::Apriori => Experiment {
                cutoffs: vec![32, 64, 128],
                s: 0.0,
                decay: 3.0,
                symbols: vec![SymbolSpec::Winding { w: 1 }, SymbolSpec::VariableElliptic],
                ..base
            },
            Suite::Regularity => Experiment {
                cutoffs: vec![32, 64, 128],
                s: 0.0,
                symbols: vec![SymbolSpec::Multiplier { order: 1.0 }, SymbolSpec::VariableElliptic],
                ..base
            },
            Suite::Sewing => Experiment {
                cutoffs: vec![16, 32, 64],
                bundles: vec!["trivial".into(), "twisted".into(), "rotation".into()],
                ..base
            },
        }
    }

    /// Human-readable description with the default configuration.
    pub fn describe(self) -> String {
        let d = self.defaults();
        let mut out = format!("{}: {}\n\ndefaults:\n", self.name(), self.summary());
        out.push_str(&toml::to_string_pretty(&d.to_config()).unwrap_or_default());
        out
    }
}

/// One `(s, φ)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub s: f64,
    pub weight: SlowVaryWeight,
}

/// Index parameters; absent entries take the suite default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<i32>,
}

/// Configuration file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<SlowVaryWeight>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<IndexConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spaces: Option<Vec<SpaceConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundles: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<SymbolSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(self) -> Result<Experiment> {
        let suite = Suite::from_name(&self.suite)?;
        let d = suite.defaults();
        let idx = self.indices.unwrap_or_default();
        let exp = Experiment {
            suite,
            seed: self.seed.unwrap_or(d.seed),
            cutoffs: self.cutoffs.unwrap_or(d.cutoffs),
            weights: self.weights.unwrap_or(d.weights),
            s: idx.s.unwrap_or(d.s),
            epsilon: idx.epsilon.unwrap_or(d.epsilon),
            delta: idx.delta.unwrap_or(d.delta),
            sigma: idx.sigma.or(d.sigma),
            q: idx.q.unwrap_or(d.q),
            spaces: self.spaces.unwrap_or(d.spaces),
            bundles: self.bundles.unwrap_or(d.bundles),
            symbols: self.symbols.unwrap_or(d.symbols),
            samples: self.samples.unwrap_or(d.samples),
            decay: self.decay.unwrap_or(d.decay),
            band: self.band.or(d.band),
            exponents: self.exponents.unwrap_or(d.exponents),
            output_dir: self.output_dir.or(d.output_dir),
            workers: self.workers.unwrap_or(d.workers),
        };
        exp.validate()?;
        Ok(exp)
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub suite: Suite,
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    pub weights: Vec<SlowVaryWeight>,
    pub s: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: Option<f64>,
    pub q: i32,
    pub spaces: Vec<SpaceConfig>,
    pub bundles: Vec<String>,
    pub symbols: Vec<SymbolSpec>,
    pub samples: usize,
    pub decay: f64,
    pub band: Option<usize>,
    pub exponents: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
}

impl Experiment {
    fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() {
            return Err(Error::Config("the cutoff list N is empty".into()));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("cutoffs {:?} are not strictly increasing", self.cutoffs)));
        }
        if self.cutoffs[0] == 0 {
            return Err(Error::Config("cutoffs must be positive".into()));
        }
        if self.weights.is_empty() {
            return Err(Error::Config("at least one weight is required".into()));
        }
        for name in &self.bundles {
            BundleSpec::named(name)?;
        }
        for s in &self.symbols {
            s.build().map_err(|e| Error::Config(format!("symbol {}: {e}", s.label())))?;
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.delta > 0.0) {
            return Err(Error::Config("epsilon and delta must be positive".into()));
        }
        if !self.decay.is_finite() {
            return Err(Error::Config("decay must be finite".into()));
        }
        Ok(())
    }

    /// Back to the file representation, with every field explicit.
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            suite: self.suite.name().into(),
            seed: Some(self.seed),
            cutoffs: Some(self.cutoffs.clone()),
            weights: Some(self.weights.clone()),
            indices: Some(IndexConfig {
                s: Some(self.s),
                epsilon: Some(self.epsilon),
                delta: Some(self.delta),
                sigma: self.sigma,
                q: Some(self.q),
            }),
            spaces: (!self.spaces.is_empty()).then(|| self.spaces.clone()),
            bundles: Some(self.bundles.clone()),
            symbols: (!self.symbols.is_empty()).then(|| self.symbols.clone()),
            samples: Some(self.samples),
            decay: Some(self.decay),
            band: self.band,
            exponents: (!self.exponents.is_empty()).then(|| self.exponents.clone()),
            output_dir: self.output_dir.clone(),
            workers: None,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form. The
    /// worker count does not enter the hash.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_config()).expect("config serializes");
        Sha256::digest(&canonical).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(self.suite.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_round_trips_through_toml() {
        for suite in Suite::ALL {
            let d = suite.defaults();
            d.validate().unwrap();
            let text = toml::to_string(&d.to_config()).unwrap();
            let back: ExperimentConfig = toml::from_str(&text).unwrap();
            let resolved = back.resolve().unwrap();
            assert_eq!(resolved.hash(), d.hash());
            assert_eq!(Suite::from_name(suite.name()).unwrap(), suite);
            assert!(suite.describe().contains(suite.name()));
        }
    }

    #[test]
    fn weights_parse_from_records() {
        let cfg: ExperimentConfig =
            toml::from_str("suite = \"interp-exactness\"\nweights = [{ exponents = [] }, { exponents = [1.0, 1.0] }]\n")
                .unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.weights[1].depth(), 2);
        assert!((exp.weights[1].splice_point() - std::f64::consts::E.exp()).abs() < 1e-12);
    }
}
