//! Hypothesis sets built from a sample-dependent feature map composed with
//! a fixed finite family of Lipschitz heads.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pcr::principal_projector;
use crate::error::{HssError, Result};
use crate::hypothesis::{FeatureMapFn, FeatureMapSet, HeadFamily, Hypothesis, HypothesisFamily, HypothesisSet};
use crate::rng::SeededRng;
use crate::sample::{replace_point, DiscreteDistribution, LabeledSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FeatureMapKind {
    /// `Φ_S(x) = Π_S x`, the projection onto the top-`k` principal subspace.
    TopKPca { k: usize, min_gap: f64 },
    /// `Φ(x) = tanh(A x)` with a seeded random `A`; independent of `S`.
    FixedRandom { dim_out: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMapConfig {
    pub map_kind: FeatureMapKind,
    /// Declared sensitivity `Δ` of the map.
    pub sensitivity_delta: f64,
    /// Linear head weights; each must satisfy `‖w‖ ≤ gamma`.
    pub heads: Vec<Vec<f64>>,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct FeatureMapFamily {
    config: FeatureMapConfig,
    heads: Vec<Hypothesis>,
}

pub fn feature_map_family(config: FeatureMapConfig) -> Result<FeatureMapFamily> {
    if config.heads.is_empty() {
        return Err(HssError::EmptyHypothesisSet);
    }
    if !(config.gamma >= 0.0) || !(config.sensitivity_delta >= 0.0) {
        return Err(HssError::invalid("γ and Δ must be nonnegative"));
    }
    for w in &config.heads {
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > config.gamma + 1e-12 {
            return Err(HssError::invalid(format!("head with norm {n} is not {}-Lipschitz", config.gamma)));
        }
    }
    let heads = config.heads.iter().map(|w| Hypothesis::linear(w.clone(), 0.0)).collect();
    Ok(FeatureMapFamily { config, heads })
}

impl FeatureMapFamily {
    pub fn config(&self) -> &FeatureMapConfig {
        &self.config
    }

    /// `Φ_S`.
    pub fn feature_map(&self, s: &LabeledSample) -> Result<FeatureMapFn> {
        match &self.config.map_kind {
            FeatureMapKind::TopKPca { k, min_gap } => {
                let p = principal_projector(s, *k, *min_gap)?.matrix;
                Ok(Arc::new(move |x: &[f64]| (&p * DVector::from_column_slice(x)).iter().copied().collect()))
            }
            FeatureMapKind::FixedRandom { dim_out, seed } => {
                let d = s.dim();
                let mut g = SeededRng::new(*seed).generator();
                let scale = 1.0 / (d as f64).sqrt();
                let a: Vec<Vec<f64>> = (0..*dim_out).map(|_| (0..d).map(|_| g.gen_range(-1.0..1.0) * scale).collect()).collect();
                Ok(Arc::new(move |x: &[f64]| a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>().tanh()).collect()))
            }
        }
    }

    /// Largest `‖Φ_S(x) − Φ_{S'}(x)‖` over sampled replacements and probes;
    /// errors when it exceeds the declared sensitivity.
    pub fn spot_check_sensitivity(
        &self,
        s: &LabeledSample,
        d: &DiscreteDistribution,
        probes: &[Vec<f64>],
        n_perturbations: usize,
        rng: &SeededRng,
    ) -> Result<f64> {
        let base = self.feature_map(s)?;
        let mut g = rng.generator();
        let mut worst: f64 = 0.0;
        for t in 0..n_perturbations {
            let other = self.feature_map(&replace_point(s, t % s.len(), d.sample_point(&mut g))?)?;
            for x in probes {
                let (a, b) = (base(x), other(x));
                worst = worst.max(a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt());
            }
        }
        if worst > self.config.sensitivity_delta * (1.0 + 1e-9) + 1e-12 {
            return Err(HssError::SensitivityViolation { declared: self.config.sensitivity_delta, measured: worst });
        }
        Ok(worst)
    }

    /// `β = μ γ Δ` from the declared sensitivity.
    pub fn beta_certificate(&self, mu: f64) -> f64 {
        beta_certificate(mu, self.config.gamma, self.config.sensitivity_delta)
    }
}

impl HypothesisFamily for FeatureMapFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        Ok(HypothesisSet::FeatureMap(FeatureMapSet::new(self.feature_map(sample)?, HeadFamily::Finite(self.heads.clone()))?))
    }
}

/// `β = μ γ Δ`.
pub fn beta_certificate(mu: f64, gamma: f64, delta: f64) -> f64 {
    mu * gamma * delta
}
