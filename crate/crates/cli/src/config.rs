//! Experiment configuration. Unknown keys are rejected at parse time.

use std::path::{Path, PathBuf};

use hss_core::bounds::{check_delta, BoundKind, TransductiveSettings};
use hss_core::corpus::FamilySpec;
use hss_core::loss::LossSpec;
use hss_core::sample::{DiscreteDistribution, DistributionSpec};
use hss_core::stability::StabilityConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::report::Format;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Monte Carlo `R̂◦_{S,T}` on the experiment's `(S, T)`.
    DdRademacher { n_draws: usize },
    /// Enumerated `R̂◦_{S,T}`; needs `m ≤ 20` and a finite family.
    DdRademacherExact,
    /// Pooled-set relaxation on the experiment's `(S, T)`.
    UnionRademacher { subsample_count: usize, n_draws: usize },
    /// `R◦_m` averaged over fresh `(S, T)` pairs; feeds the Rademacher branch.
    ExpectedRademacher { n_pairs: usize, n_draws: usize },
    /// `R̂◦_{U,m}` on `U = S ∪ T'` with `|T'| = n`; feeds the Theorem 1 report.
    TransductiveRademacher { n: usize, max_subsets: usize, n_draws: usize },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::DdRademacher { .. } => "dd-rademacher",
            EstimatorSpec::DdRademacherExact => "dd-rademacher-exact",
            EstimatorSpec::UnionRademacher { .. } => "union-rademacher",
            EstimatorSpec::ExpectedRademacher { .. } => "expected-rademacher",
            EstimatorSpec::TransductiveRademacher { .. } => "transductive-rademacher",
        }
    }

    fn validate(&self) -> CliResult<()> {
        let positive = |v: usize, what: &str| if v == 0 { Err(CliError::Validation(format!("{}: {what} must be positive", self.name()))) } else { Ok(()) };
        match *self {
            EstimatorSpec::DdRademacher { n_draws } => positive(n_draws, "n_draws"),
            EstimatorSpec::DdRademacherExact => Ok(()),
            EstimatorSpec::UnionRademacher { subsample_count, n_draws } => positive(subsample_count, "subsample_count").and(positive(n_draws, "n_draws")),
            EstimatorSpec::ExpectedRademacher { n_pairs, n_draws } => positive(n_pairs, "n_pairs").and(positive(n_draws, "n_draws")),
            EstimatorSpec::TransductiveRademacher { n, max_subsets, n_draws } => {
                positive(n, "n").and(positive(max_subsets, "max_subsets")).and(positive(n_draws, "n_draws"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationChecks {
    /// Seeds for the bagging multiplicity coverage check.
    #[serde(default)]
    pub multiplicity_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { dir: None, formats: default_formats() }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json]
}

fn default_bounds() -> Vec<BoundKind> {
    vec![BoundKind::Theorem2Min]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub distribution: DistributionSpec,
    pub family: FamilySpec,
    #[serde(default)]
    pub loss: LossSpec,
    pub m: usize,
    /// Sample draws for the coverage check; 0 skips it.
    pub n_trials: usize,
    pub delta: f64,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub stability: StabilityConfig,
    /// Bounds checked for coverage.
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundKind>,
    /// Required when `bounds` contains `theorem1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transductive: Option<TransductiveSettings>,
    #[serde(default)]
    pub application: ApplicationChecks,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Checks everything that does not need computation.
    pub fn validate(&self) -> CliResult<()> {
        if self.m == 0 {
            return Err(CliError::Validation("m must be at least 1".into()));
        }
        check_delta(self.delta)?;
        DiscreteDistribution::from_spec(&self.distribution)?;
        for e in &self.estimators {
            e.validate()?;
        }
        if self.stability.n_samples == 0 || (!self.stability.exhaustive && self.stability.n_perturbations == 0) {
            return Err(CliError::Validation("stability needs positive n_samples and n_perturbations".into()));
        }
        if self.bounds.contains(&BoundKind::Theorem1) {
            match self.transductive {
                Some(t) if t.n > 0 && t.n_sign_draws > 0 && t.max_subsets > 0 => {}
                _ => return Err(CliError::Validation("theorem1 coverage needs a transductive block with positive n, n_sign_draws, max_subsets".into())),
            }
        }
        if self.bounds.contains(&BoundKind::Fv) {
            return Err(CliError::Validation("fv coverage needs an algorithm stability coefficient; use `bound fv` instead".into()));
        }
        if self.outputs.formats.is_empty() {
            return Err(CliError::Validation("outputs.formats must not be empty".into()));
        }
        Ok(())
    }
}
