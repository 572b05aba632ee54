//! Bagging with capped mixing weights: `H_S = {Σ w_i A(B_i) : w ∈ Δ_k^{C/k}}`
//! over `k` index subsamples `B_i` of size `p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::ridge_solve;
use crate::combinatorics::random_combination;
use crate::error::{HssError, Result};
use crate::hypothesis::{Hypothesis, HypothesisFamily, HypothesisSet, L1Mix, MixConstraint};
use crate::rng::SeededRng;
use crate::sample::LabeledSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseLearner {
    LabelMean,
    /// Ridge regression on features augmented with a constant column.
    Ridge { lambda: f64 },
}

impl BaseLearner {
    pub fn fit(&self, b: &LabeledSample) -> Result<Hypothesis> {
        match self {
            BaseLearner::LabelMean => Ok(Hypothesis::constant(b.iter().map(|z| z.y).sum::<f64>() / b.len() as f64)),
            BaseLearner::Ridge { lambda } => {
                let xs: Vec<Vec<f64>> = b.iter().map(|z| z.x.iter().copied().chain([1.0]).collect()).collect();
                let ys: Vec<f64> = b.iter().map(|z| z.y).collect();
                let mut w = ridge_solve(&xs, &ys, *lambda)?;
                let bias = w.pop().unwrap_or(0.0);
                Ok(Hypothesis::linear(w, bias))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaggingWeights {
    /// The whole capped simplex.
    #[default]
    CappedSimplex,
    /// The finite candidate grid of the capped simplex: uniform weights and
    /// one water-filled vertex per cyclic priority order.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaggingConfig {
    pub k: usize,
    pub p: usize,
    /// Weight cap numerator `C`, so every weight is at most `C/k`.
    pub cap_c: f64,
    pub base_learner: BaseLearner,
    /// Declared uniform stability of the base learner.
    pub beta_a: f64,
    #[serde(default)]
    pub weights: BaggingWeights,
}

impl BaggingConfig {
    fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(HssError::invalid("k and p must be positive"));
        }
        if self.p > m {
            return Err(HssError::invalid(format!("subsample size p = {} exceeds m = {m}", self.p)));
        }
        if !(self.cap_c >= 1.0) || self.cap_c > self.k as f64 + 1e-12 {
            return Err(HssError::invalid("C must lie in [1, k]"));
        }
        if !(self.beta_a >= 0.0) {
            return Err(HssError::invalid("β_A must be nonnegative"));
        }
        Ok(())
    }

    pub fn cap(&self) -> f64 {
        self.cap_c / self.k as f64
    }
}

/// Bagging family with index subsamples fixed by the seed.
#[derive(Debug, Clone)]
pub struct BaggingFamily {
    pub config: BaggingConfig,
    pub m: usize,
    pub subsamples: Vec<Vec<usize>>,
}

/// `k` subsamples of `p` distinct indices from `0..m`.
pub fn draw_subsamples(k: usize, p: usize, m: usize, rng: &SeededRng) -> Vec<Vec<usize>> {
    (0..k).map(|i| random_combination(m, p, &mut rng.derive(i as u64).generator())).collect()
}

/// Largest number of subsamples sharing one index.
pub fn max_multiplicity(subsamples: &[Vec<usize>], m: usize) -> usize {
    let mut counts = vec![0usize; m];
    for b in subsamples {
        for &i in b {
            counts[i] += 1;
        }
    }
    counts.into_iter().max().unwrap_or(0)
}

/// `t = kp/m + √(2kp ln(m/δ)/m)`.
pub fn multiplicity_bound(k: usize, p: usize, m: usize, delta: f64) -> f64 {
    let (k, p, m) = (k as f64, p as f64, m as f64);
    k * p / m + (2.0 * k * p * (m / delta).ln() / m).sqrt()
}

/// `(p/m + √(2p ln(1/δ)/(km))) C μ β_A`.
pub fn stability_bound(k: usize, p: usize, m: usize, delta: f64, cap_c: f64, mu: f64, beta_a: f64) -> f64 {
    let (k, p, m) = (k as f64, p as f64, m as f64);
    (p / m + (2.0 * p * (1.0 / delta).ln() / (k * m)).sqrt()) * cap_c * mu * beta_a
}

/// `μ √(2p ln(4m)/m)`.
pub fn rademacher_envelope(mu: f64, p: usize, m: usize) -> f64 {
    let (p, m) = (p as f64, m as f64);
    mu * (2.0 * p * (4.0 * m).ln() / m).sqrt()
}

/// Gap term `2μ√(2p ln(4m)/m) + [1 + 2(p + √(2pm ln(1/δ)/k)) C μ β_A] √(ln(2/δ)/(2m))`.
pub fn bagging_gap_bound(k: usize, p: usize, m: usize, delta: f64, cap_c: f64, mu: f64, beta_a: f64) -> f64 {
    let (kf, pf, mf) = (k as f64, p as f64, m as f64);
    let inner = pf + (2.0 * pf * mf * (1.0 / delta).ln() / kf).sqrt();
    2.0 * rademacher_envelope(mu, p, m) + (1.0 + 2.0 * inner * cap_c * mu * beta_a) * ((2.0 / delta).ln() / (2.0 * mf)).sqrt()
}

/// Builds the family and returns it with the multiplicity bound `t`.
pub fn bagging_family(config: BaggingConfig, m: usize, delta: f64, rng: &SeededRng) -> Result<(BaggingFamily, f64)> {
    config.validate(m)?;
    crate::bounds::check_delta(delta)?;
    let subsamples = draw_subsamples(config.k, config.p, m, rng);
    let t = multiplicity_bound(config.k, config.p, m, delta);
    Ok((BaggingFamily { config, m, subsamples }, t))
}

impl BaggingFamily {
    /// `μ β_A min(1, (C/k) t̂)` with `t̂` the realized maximum multiplicity;
    /// a certified stability for this seed.
    pub fn realized_stability(&self, mu: f64) -> f64 {
        let t = max_multiplicity(&self.subsamples, self.m) as f64;
        mu * self.config.beta_a * (self.config.cap() * t).min(1.0)
    }

    fn base_hypotheses(&self, sample: &LabeledSample) -> Result<Vec<Hypothesis>> {
        if sample.len() != self.m {
            return Err(HssError::Dimension { what: "bagging sample size", expected: self.m, got: sample.len() });
        }
        self.subsamples.iter().map(|b| self.config.base_learner.fit(&sample.select(b)?)).collect()
    }
}

impl HypothesisFamily for BaggingFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let anchors = self.base_hypotheses(sample)?;
        let constraint = MixConstraint::CappedSimplex { cap: self.config.cap() };
        match self.config.weights {
            BaggingWeights::CappedSimplex => Ok(HypothesisSet::L1Mix(L1Mix::new(anchors, constraint)?)),
            BaggingWeights::Grid => {
                let grid = constraint.candidate_weights(anchors.len());
                HypothesisSet::finite(grid.into_iter().map(|w| Hypothesis::mixture(&anchors, w)).collect())
            }
        }
    }
}

/// Fraction of `n_seeds` subsample draws whose maximum multiplicity is at
/// most `t`.
pub fn multiplicity_coverage(k: usize, p: usize, m: usize, delta: f64, n_seeds: usize, rng: &SeededRng) -> (f64, f64) {
    let t = multiplicity_bound(k, p, m, delta);
    let ok = (0..n_seeds)
        .into_par_iter()
        .filter(|&j| max_multiplicity(&draw_subsamples(k, p, m, &rng.derive(j as u64)), m) as f64 <= t)
        .count();
    (ok as f64 / n_seeds as f64, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::LabeledPoint;

    #[test]
    fn formula_values() {
        let t = multiplicity_bound(100, 10, 100, 0.01);
        assert!((t - 23.572).abs() < 1e-3, "{t}");
        assert!((rademacher_envelope(1.0, 4, 100) - 0.692_327_35).abs() < 1e-8);
        assert!(stability_bound(10, 5, 100, 0.1, 2.0, 1.0, 0.0) == 0.0);
    }

    #[test]
    fn full_cap_is_simplex() {
        let cfg = BaggingConfig { k: 4, p: 2, cap_c: 4.0, base_learner: BaseLearner::LabelMean, beta_a: 0.5, weights: BaggingWeights::CappedSimplex };
        assert_eq!(cfg.cap(), 1.0);
        assert!(bagging_family(cfg.clone(), 1, 0.1, &SeededRng::new(0)).is_err());
        let (fam, _) = bagging_family(cfg, 6, 0.1, &SeededRng::new(0)).unwrap();
        let s = LabeledSample::new((0..6).map(|i| LabeledPoint::new(vec![0.0], (i % 2) as f64)).collect()).unwrap();
        let set = fam.hypothesis_set(&s).unwrap();
        assert!(matches!(set, HypothesisSet::L1Mix(_)));
    }

    #[test]
    fn subsamples_are_distinct_indices() {
        let subs = draw_subsamples(20, 5, 12, &SeededRng::new(4));
        assert!(subs.iter().all(|b| b.len() == 5 && b.windows(2).all(|w| w[0] < w[1]) && b[4] < 12));
        assert_eq!(max_multiplicity(&[vec![0, 1], vec![1, 2], vec![1, 3]], 4), 3);
    }

    #[test]
    fn grid_variant_is_finite_and_stable() {
        let cfg = BaggingConfig { k: 6, p: 3, cap_c: 2.0, base_learner: BaseLearner::LabelMean, beta_a: 1.0 / 3.0, weights: BaggingWeights::Grid };
        let (fam, _) = bagging_family(cfg, 10, 0.1, &SeededRng::new(2)).unwrap();
        let s = LabeledSample::new((0..10).map(|i| LabeledPoint::new(vec![i as f64], (i % 3 == 0) as u8 as f64)).collect()).unwrap();
        let set = fam.hypothesis_set(&s).unwrap();
        assert_eq!(set.members().unwrap().len(), 7);
        assert!(fam.realized_stability(1.0) <= 1.0 / 3.0 + 1e-15);
    }

    #[test]
    fn ridge_base_learner() {
        let b = LabeledSample::new((0..5).map(|i| LabeledPoint::new(vec![i as f64], 2.0 * i as f64 + 1.0)).collect()).unwrap();
        let h = BaseLearner::Ridge { lambda: 1e-9 }.fit(&b).unwrap();
        assert!((h.predict(&[10.0]) - 21.0).abs() < 1e-4);
    }
}
