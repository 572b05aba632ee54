//! Named hypothesis-set families with their certified coefficients, and a
//! reference set of small instances.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::applications::bagging::{bagging_family, BaggingConfig};
use crate::applications::distillation::{distillation_family, DistillConfig, StudentGrid, Teacher};
use crate::applications::feature_map::{feature_map_family, FeatureMapConfig, FeatureMapKind};
use crate::applications::pcr::{pcr_family, PcrConfig};
use crate::applications::sco::{diameter_certificate, sco_mixture_family, ScoMixConfig};
use crate::error::{HssError, Result};
use crate::hypothesis::{
    FeatureMapFn, FeatureMapSet, FixedFamily, HeadFamily, Hypothesis, HypothesisFamily, HypothesisSet, L1Mix, LabelMeanFamily, MixConstraint,
};
use crate::loss::{LossFunction, LossSpec};
use crate::rng::SeededRng;
use crate::sample::{DiscreteDistribution, LabeledPoint, LabeledSample};

/// A family chosen by name with its configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "config", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Data-independent constant predictors.
    Constants { values: Vec<f64> },
    /// The singleton `{label mean of S}`.
    LabelMean,
    /// The `keep` constants of `grid` with the smallest empirical risk on `S`.
    TopErm { grid: Vec<f64>, keep: usize },
    Bagging(BaggingConfig),
    Sco(ScoMixConfig),
    FeatureMap(FeatureMapConfig),
    Distillation(DistillConfig),
    Pcr(PcrConfig),
}

/// Uniform-in-`S` coefficients that hold by construction; `None` when no
/// closed form is available.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Certificates {
    pub beta: Option<f64>,
    pub delta_max: Option<f64>,
}

impl Certificates {
    /// `χ ≤ Δ + β ≤ Δ_max + β`, capped at the loss bound 1.
    pub fn chi(&self) -> Option<f64> {
        Some((self.delta_max? + self.beta?).min(1.0))
    }
}

#[derive(Clone)]
pub struct BuiltFamily {
    pub family: Arc<dyn HypothesisFamily>,
    pub certificates: Certificates,
}

impl std::fmt::Debug for BuiltFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltFamily").field("certificates", &self.certificates).finish()
    }
}

/// Constants of `grid` with the `keep` smallest empirical risks, ties
/// broken by grid position.
#[derive(Debug, Clone)]
pub struct TopErmFamily {
    pub grid: Vec<f64>,
    pub keep: usize,
    pub loss: LossFunction,
}

impl HypothesisFamily for TopErmFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let m = sample.len() as f64;
        // rounding makes the ranking independent of summation order
        let risk = |c: f64| (sample.iter().map(|z| self.loss.eval(c, z.y)).sum::<f64>() / m * 1e9).round() as i64;
        let mut order: Vec<(i64, usize)> = self.grid.iter().enumerate().map(|(i, &c)| (risk(c), i)).collect();
        order.sort_unstable();
        let mut kept: Vec<usize> = order.into_iter().take(self.keep).map(|(_, i)| i).collect();
        kept.sort_unstable();
        HypothesisSet::finite(kept.into_iter().map(|i| Hypothesis::constant(self.grid[i])).collect())
    }
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() { 0.0 } else { hi - lo }
}

fn label_range(d: &DiscreteDistribution) -> f64 {
    spread(&d.support().iter().map(|z| z.y).collect::<Vec<_>>())
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Constants { .. } => "constants",
            FamilySpec::LabelMean => "label-mean",
            FamilySpec::TopErm { .. } => "top-erm",
            FamilySpec::Bagging(_) => "bagging",
            FamilySpec::Sco(_) => "sco",
            FamilySpec::FeatureMap(_) => "feature-map",
            FamilySpec::Distillation(_) => "distillation",
            FamilySpec::Pcr(_) => "pcr",
        }
    }

    /// Instantiates the family for samples of size `m` drawn from `d`.
    /// `rng` fixes any algorithmic randomness (subsamples, SGD streams).
    pub fn build(&self, d: &DiscreteDistribution, m: usize, delta: f64, loss: &LossFunction, rng: &SeededRng) -> Result<BuiltFamily> {
        let mu = loss.lipschitz();
        let y_range = label_range(d);
        let loss_cap = |v: f64| v.min(1.0);
        let (family, certificates): (Arc<dyn HypothesisFamily>, Certificates) = match self {
            FamilySpec::Constants { values } => {
                let set = HypothesisSet::finite(values.iter().map(|&c| Hypothesis::constant(c)).collect())?;
                (Arc::new(FixedFamily(set)), Certificates { beta: Some(0.0), delta_max: Some(loss_cap(mu * spread(values))) })
            }
            FamilySpec::LabelMean => (Arc::new(LabelMeanFamily), Certificates { beta: Some(loss_cap(mu * y_range / m as f64)), delta_max: Some(0.0) }),
            FamilySpec::TopErm { grid, keep } => {
                if *keep == 0 || *keep > grid.len() {
                    return Err(HssError::invalid("top-erm needs 1 ≤ keep ≤ grid size"));
                }
                let fam = TopErmFamily { grid: grid.clone(), keep: *keep, loss: loss.clone() };
                (Arc::new(fam), Certificates { beta: None, delta_max: Some(loss_cap(mu * spread(grid))) })
            }
            FamilySpec::Bagging(cfg) => {
                let (fam, _) = bagging_family(cfg.clone(), m, delta, rng)?;
                let beta = fam.realized_stability(mu);
                (Arc::new(fam), Certificates { beta: Some(beta), delta_max: Some(1.0) })
            }
            FamilySpec::Sco(cfg) => {
                let r = cfg.radius_for(m);
                let x_max = d.support().iter().map(LabeledPoint::norm).fold(0.0, f64::max);
                let dm = loss_cap(diameter_certificate(mu, r, cfg.weight_norm_cap) * x_max);
                (Arc::new(sco_mixture_family(cfg.clone(), rng)?), Certificates { beta: None, delta_max: Some(dm) })
            }
            FamilySpec::FeatureMap(cfg) => {
                let fam = feature_map_family(cfg.clone())?;
                let beta = match cfg.map_kind {
                    FeatureMapKind::FixedRandom { .. } => 0.0,
                    FeatureMapKind::TopKPca { .. } => fam.beta_certificate(mu),
                };
                (Arc::new(fam), Certificates { beta: Some(loss_cap(beta)), delta_max: Some(1.0) })
            }
            FamilySpec::Distillation(cfg) => {
                let fam = distillation_family(cfg.clone())?;
                let certificates = match (&cfg.teacher, &cfg.student_grid) {
                    (Teacher::LabelMean, StudentGrid::Offsets { values }) => {
                        let radius = cfg.anti.map_or(cfg.gamma, |a| a.min(cfg.gamma));
                        let kept: Vec<f64> = values.iter().copied().filter(|c| c.abs() <= radius).collect();
                        Certificates { beta: Some(loss_cap(mu * y_range / m as f64)), delta_max: Some(loss_cap(mu * spread(&kept))) }
                    }
                    _ => Certificates { beta: None, delta_max: Some(loss_cap(2.0 * mu * cfg.gamma)) },
                };
                (Arc::new(fam), certificates)
            }
            FamilySpec::Pcr(cfg) => (Arc::new(pcr_family(cfg.clone())?), Certificates { beta: None, delta_max: Some(1.0) }),
        };
        Ok(BuiltFamily { family, certificates })
    }
}

/// `H_S = {x ↦ Σ_j α_j x^S_j · x : ‖α‖₁ ≤ Λ₁}`.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpanFamily {
    pub lambda1: f64,
}

impl HypothesisFamily for SampleSpanFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let anchors = sample.iter().map(|z| Hypothesis::linear(z.x.clone(), 0.0)).collect();
        Ok(HypothesisSet::L1Mix(L1Mix::new(anchors, MixConstraint::L1Ball { total: self.lambda1 })?))
    }
}

/// The data-independent ball `{x ↦ w·x : ‖w‖₂ ≤ Λ}` in `dim` dimensions.
pub fn norm_ball_set(lambda: f64, dim: usize) -> Result<HypothesisSet> {
    let identity: FeatureMapFn = Arc::new(|x: &[f64]| x.to_vec());
    let candidates = (0..dim)
        .flat_map(|j| [1.0, -1.0].map(|s| (0..dim).map(|i| if i == j { s * lambda } else { 0.0 }).collect()))
        .collect();
    Ok(HypothesisSet::FeatureMap(FeatureMapSet::new(identity, HeadFamily::NormBall { radius: lambda, candidates })?))
}

/// A family together with the distribution and loss it is evaluated under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub label: String,
    pub family: FamilySpec,
    pub distribution: crate::sample::DistributionSpec,
    #[serde(default)]
    pub loss: LossSpec,
}

impl Instance {
    pub fn distribution(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::from_spec(&self.distribution)
    }
}

/// Five inputs on `[0, 1]` with `P(y = 1 | x) = 0.2 + 0.6 x`.
pub fn reference_distribution() -> DiscreteDistribution {
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for i in 0..5 {
        let x = i as f64 / 4.0;
        let p1 = 0.2 + 0.6 * x;
        support.push(LabeledPoint::new(vec![x], 0.0));
        probs.push(0.2 * (1.0 - p1));
        support.push(LabeledPoint::new(vec![x], 1.0));
        probs.push(0.2 * p1);
    }
    let total: f64 = probs.iter().sum();
    let last = probs.len() - 1;
    probs[last] += 1.0 - total;
    DiscreteDistribution::new(support, probs).expect("reference distribution is valid")
}

fn probes() -> Vec<Vec<f64>> {
    (0..5).map(|i| vec![i as f64 / 4.0]).collect()
}

/// Finite families whose sups are exact, one per construction.
pub fn finite_specs() -> Vec<FamilySpec> {
    vec![
        FamilySpec::Constants { values: vec![0.2, 0.4, 0.6, 0.8] },
        FamilySpec::LabelMean,
        FamilySpec::TopErm { grid: (0..=10).map(|i| i as f64 / 10.0).collect(), keep: 3 },
        FamilySpec::Distillation(DistillConfig {
            teacher: Teacher::LabelMean,
            gamma: 0.15,
            student_grid: StudentGrid::Offsets { values: vec![-0.2, -0.1, 0.0, 0.1, 0.2] },
            anti: None,
            probes: probes(),
        }),
        FamilySpec::Bagging(BaggingConfig {
            k: 6,
            p: 2,
            cap_c: 2.0,
            base_learner: crate::applications::bagging::BaseLearner::LabelMean,
            beta_a: 0.5,
            weights: crate::applications::bagging::BaggingWeights::Grid,
        }),
        FamilySpec::FeatureMap(FeatureMapConfig {
            map_kind: FeatureMapKind::FixedRandom { dim_out: 2, seed: 11 },
            sensitivity_delta: 0.0,
            heads: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, -0.8]],
            gamma: 1.0,
        }),
    ]
}

/// The reference instances: every finite spec under the reference
/// distribution and absolute loss.
pub fn reference_instances() -> Vec<Instance> {
    let spec = reference_distribution().to_spec();
    finite_specs()
        .into_iter()
        .map(|family| Instance { label: family.name().to_string(), family, distribution: spec.clone(), loss: LossSpec::Absolute })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::draw_sample;

    #[test]
    fn spec_round_trip() {
        for spec in finite_specs() {
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<FamilySpec>(&json).unwrap(), spec, "{json}");
        }
        let bad = r#"{"name":"constants","config":{"values":[0.1],"extra":1}}"#;
        assert!(serde_json::from_str::<FamilySpec>(bad).is_err());
        assert!(serde_json::from_str::<FamilySpec>(r#"{"name":"label-mean"}"#).is_ok());
        assert!(serde_json::from_str::<FamilySpec>(r#"{"name":"label-mean","cfg":{}}"#).is_err());
    }

    #[test]
    fn top_erm_keeps_best_constants() {
        let fam = TopErmFamily { grid: vec![0.0, 0.5, 1.0], keep: 1, loss: LossFunction::squared() };
        let s = LabeledSample::new(vec![LabeledPoint::new(vec![0.0], 0.4), LabeledPoint::new(vec![0.0], 0.6)]).unwrap();
        let set = fam.hypothesis_set(&s).unwrap();
        assert_eq!(set.members().unwrap()[0].predict(&[0.0]), 0.5);
    }

    #[test]
    fn every_reference_instance_builds_finite_sets() {
        let d = reference_distribution();
        let loss = LossFunction::absolute();
        for inst in reference_instances() {
            let built = inst.family.build(&d, 8, 0.1, &loss, &SeededRng::new(1)).unwrap();
            let s = draw_sample(&d, 8, &SeededRng::new(2)).unwrap();
            assert!(built.family.hypothesis_set(&s).unwrap().is_finite(), "{}", inst.label);
            assert!(built.certificates.delta_max.is_some());
        }
    }

    #[test]
    fn distillation_certificates() {
        let d = reference_distribution();
        let b = finite_specs()[3].build(&d, 30, 0.1, &LossFunction::absolute(), &SeededRng::new(0)).unwrap();
        assert!((b.certificates.beta.unwrap() - 1.0 / 30.0).abs() < 1e-15);
        assert!((b.certificates.delta_max.unwrap() - 0.2).abs() < 1e-15);
        assert!((b.certificates.chi().unwrap() - (0.2 + 1.0 / 30.0)).abs() < 1e-15);
    }
}
