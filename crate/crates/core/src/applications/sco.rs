//! Mixtures of strongly convex SGD solutions:
//! `H_S = {Σ α_j ŵ^S_j : α ∈ Δ_K ∩ B_1(α_0, r)}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HssError, Result};
use crate::hypothesis::{Hypothesis, HypothesisFamily, HypothesisSet, L1Mix, MixConstraint};
use crate::rng::SeededRng;
use crate::sample::LabeledSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoMixConfig {
    pub k_algorithms: usize,
    /// Simplex center; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    /// L1 radius; `1/(2μD√m)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Norm cap `D` of every SGD iterate.
    pub weight_norm_cap: f64,
    pub sgd_steps: usize,
    /// Ridge penalty `λ` of the objective `½(w·x − y)² + (λ/2)‖w‖²`.
    pub strong_convexity: f64,
    /// Lipschitz constant `μ` of the loss.
    #[serde(default = "one")]
    pub mu: f64,
    /// Multiplier on the `1/(λt)` step size.
    #[serde(default = "one")]
    pub step_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ScoMixConfig {
    fn validate(&self) -> Result<()> {
        if self.k_algorithms == 0 || self.sgd_steps == 0 {
            return Err(HssError::invalid("K and sgd_steps must be positive"));
        }
        if !(self.weight_norm_cap > 0.0) || !(self.strong_convexity > 0.0) || !(self.mu > 0.0) {
            return Err(HssError::invalid("D, λ and μ must be positive"));
        }
        if let Some(a) = &self.alpha0 {
            if a.len() != self.k_algorithms {
                return Err(HssError::Dimension { what: "alpha0", expected: self.k_algorithms, got: a.len() });
            }
        }
        Ok(())
    }

    pub fn radius_for(&self, m: usize) -> f64 {
        self.radius.unwrap_or_else(|| auto_radius(self.mu, self.weight_norm_cap, m))
    }
}

/// `r = 1/(2μD√m)`.
pub fn auto_radius(mu: f64, d: f64, m: usize) -> f64 {
    1.0 / (2.0 * mu * d * (m as f64).sqrt())
}

/// `2μrD`.
pub fn diameter_certificate(mu: f64, r: f64, d: f64) -> f64 {
    2.0 * mu * r * d
}

/// `√(e/m) + √e μβ + 4√((1/m + 2μβ) ln(6/δ))`.
pub fn sco_gap_bound(m: usize, mu: f64, beta: f64, delta: f64) -> f64 {
    let mf = m as f64;
    let e = std::f64::consts::E;
    (e / mf).sqrt() + e.sqrt() * mu * beta + 4.0 * ((1.0 / mf + 2.0 * mu * beta) * (6.0 / delta).ln()).sqrt()
}

/// Projected SGD on regularized least squares with step `scale/(λt)`,
/// visiting indices drawn from `rng`.
pub fn sgd_run(s: &LabeledSample, lambda: f64, cap: f64, steps: usize, scale: f64, rng: &SeededRng) -> Result<Vec<f64>> {
    let mut g = rng.generator();
    let mut w = vec![0.0; s.dim()];
    for t in 1..=steps {
        let z = &s.points()[g.gen_range(0..s.len())];
        let resid: f64 = w.iter().zip(&z.x).map(|(a, b)| a * b).sum::<f64>() - z.y;
        let eta = scale / (lambda * t as f64);
        for (wi, xi) in w.iter_mut().zip(&z.x) {
            *wi -= eta * (resid * xi + lambda * *wi);
        }
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !n.is_finite() {
            return Err(HssError::Divergence(format!("SGD iterate is not finite at step {t}")));
        }
        if n > cap {
            w.iter_mut().for_each(|v| *v *= cap / n);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct ScoMixtureFamily {
    pub config: ScoMixConfig,
    pub rng: SeededRng,
}

pub fn sco_mixture_family(config: ScoMixConfig, rng: &SeededRng) -> Result<ScoMixtureFamily> {
    config.validate()?;
    Ok(ScoMixtureFamily { config, rng: *rng })
}

impl ScoMixtureFamily {
    /// `ŵ^S_1, …, ŵ^S_K`; run `j` uses stream `j`.
    pub fn anchor_weights(&self, s: &LabeledSample) -> Result<Vec<Vec<f64>>> {
        let c = &self.config;
        (0..c.k_algorithms)
            .map(|j| sgd_run(s, c.strong_convexity, c.weight_norm_cap, c.sgd_steps, c.step_scale, &self.rng.derive(j as u64)))
            .collect()
    }
}

impl HypothesisFamily for ScoMixtureFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let k = self.config.k_algorithms;
        let anchors = self.anchor_weights(sample)?.into_iter().map(|w| Hypothesis::linear(w, 0.0)).collect();
        let center = self.config.alpha0.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
        let radius = self.config.radius_for(sample.len());
        Ok(HypothesisSet::L1Mix(L1Mix::new(anchors, MixConstraint::SimplexBall { center, radius })?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossFunction;
    use crate::sample::LabeledPoint;
    use crate::stability::diameters_of;

    fn config(radius: Option<f64>) -> ScoMixConfig {
        ScoMixConfig { k_algorithms: 4, alpha0: None, radius, weight_norm_cap: 1.0, sgd_steps: 200, strong_convexity: 0.1, mu: 1.0, step_scale: 1.0 }
    }

    fn sample(m: usize) -> LabeledSample {
        LabeledSample::new((0..m).map(|i| {
            let a = i as f64 * 0.7;
            LabeledPoint::new(vec![a.cos() * 0.8, a.sin() * 0.6], 0.5 * a.cos())
        }).collect()).unwrap()
    }

    #[test]
    fn values() {
        let r = auto_radius(1.0, 1.0, 100);
        assert!((r - 0.05).abs() < 1e-15);
        assert!((diameter_certificate(1.0, r, 1.0) - 0.1).abs() < 1e-15);
        assert!(((std::f64::consts::E / 100.0).sqrt() - 0.164_87).abs() < 1e-5);
        assert!(sco_gap_bound(100, 1.0, 0.0, 0.1) > 0.164_87);
    }

    #[test]
    fn zero_radius_is_singleton() {
        let fam = sco_mixture_family(config(Some(0.0)), &SeededRng::new(1)).unwrap();
        let s = sample(30);
        let d = diameters_of(&fam.hypothesis_set(&s).unwrap(), &s, &LossFunction::absolute()).unwrap();
        assert_eq!((d.delta, d.delta_max), (0.0, 0.0));
    }

    #[test]
    fn diameter_within_certificate() {
        let fam = sco_mixture_family(config(None), &SeededRng::new(2)).unwrap();
        let s = sample(100);
        let d = diameters_of(&fam.hypothesis_set(&s).unwrap(), &s, &LossFunction::absolute()).unwrap();
        assert!(d.exact && d.delta_max <= 0.1 + 1e-12, "{d:?}");
    }

    #[test]
    fn iterates_respect_cap_and_divergence_is_reported() {
        let s = sample(20);
        let w = sgd_run(&s, 0.01, 0.5, 500, 1.0, &SeededRng::new(3)).unwrap();
        assert!(w.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.5 + 1e-12);
        assert!(matches!(sgd_run(&s, 0.01, 0.5, 10, f64::INFINITY, &SeededRng::new(3)), Err(HssError::Divergence(_))));
    }
}
