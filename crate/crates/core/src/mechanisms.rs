//! Exponential mechanism over sensitivity-bounded scores, numerical
//! differential-privacy checks and the max-of-p tail reduction.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HssError, Result};
use crate::hypothesis::HypothesisFamily;
use crate::loss::LossFunction;
use crate::oracle::{exact_sup_gap, OracleBudget};
use crate::rng::SeededRng;
use crate::sample::{DiscreteDistribution, LabeledSample};

/// Selection probabilities `∝ exp(ε f_k / (2Δ))`, with an appended zero
/// score when `include_zero_arm`.
pub fn softmax_probs(scores: &[f64], epsilon: f64, sensitivity: f64, include_zero_arm: bool) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(HssError::invalid("need at least one score"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(HssError::invalid("ε must be positive"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(HssError::NotFinite("score"));
    }
    if !(sensitivity >= 0.0) {
        return Err(HssError::invalid("Δ must be nonnegative"));
    }
    let mut all = scores.to_vec();
    if include_zero_arm {
        all.push(0.0);
    }
    if sensitivity == 0.0 {
        if all.iter().any(|&s| s != all[0]) {
            return Err(HssError::invalid("Δ = 0 with unequal scores leaves the temperature undefined"));
        }
        return Ok(vec![1.0 / all.len() as f64; all.len()]);
    }
    let scale = epsilon / (2.0 * sensitivity);
    let top = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = all.iter().map(|s| ((s - top) * scale).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutput {
    pub chosen_index: usize,
    pub probs: Vec<f64>,
    pub epsilon: f64,
}

pub fn exponential_mechanism(scores: &[f64], epsilon: f64, sensitivity: f64, include_zero_arm: bool, rng: &SeededRng) -> Result<MechanismOutput> {
    let probs = softmax_probs(scores, epsilon, sensitivity, include_zero_arm)?;
    let u: f64 = rng.generator().gen();
    let mut acc = 0.0;
    let mut chosen = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = k;
            break;
        }
    }
    Ok(MechanismOutput { chosen_index: chosen, probs, epsilon })
}

/// `E_{k∼A}[f_k]` in closed form; the zero arm contributes 0.
pub fn expected_score(scores: &[f64], epsilon: f64, sensitivity: f64, include_zero_arm: bool) -> Result<f64> {
    let probs = softmax_probs(scores, epsilon, sensitivity, include_zero_arm)?;
    Ok(scores.iter().zip(&probs).map(|(s, p)| s * p).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxVsExpectation {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `max_k f_k ≤ E_{k∼A}[f_k] + (2Δ/ε) ln p`.
pub fn check_max_vs_expectation(scores: &[f64], epsilon: f64, sensitivity: f64) -> Result<MaxVsExpectation> {
    let lhs = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rhs = expected_score(scores, epsilon, sensitivity, false)? + 2.0 * sensitivity / epsilon * (scores.len() as f64).ln();
    Ok(MaxVsExpectation { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// A collection of `p` datasets, one per score.
pub type SuperSample = Vec<LabeledSample>;

pub type Scorer = Arc<dyn Fn(usize, &SuperSample) -> f64 + Send + Sync>;

/// `p` score functions `f_k(𝕊)` with a declared common sensitivity.
#[derive(Clone)]
pub struct ScoreFamily {
    pub p: usize,
    pub scorer: Scorer,
    pub sensitivity: f64,
}

impl fmt::Debug for ScoreFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreFamily").field("p", &self.p).field("sensitivity", &self.sensitivity).finish_non_exhaustive()
    }
}

impl ScoreFamily {
    pub fn new(p: usize, sensitivity: f64, scorer: impl Fn(usize, &SuperSample) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if p == 0 {
            return Err(HssError::invalid("p must be at least 1"));
        }
        if !(sensitivity >= 0.0) {
            return Err(HssError::invalid("sensitivity must be nonnegative"));
        }
        Ok(ScoreFamily { p, scorer: Arc::new(scorer), sensitivity })
    }

    pub fn scores(&self, data: &SuperSample) -> Vec<f64> {
        (0..self.p).map(|k| (self.scorer)(k, data)).collect()
    }

    /// Largest `|f_k(𝕊) − f_k(𝕊')|` over the pairs.
    pub fn measured_sensitivity(&self, pairs: &[(SuperSample, SuperSample)]) -> f64 {
        pairs
            .iter()
            .flat_map(|(a, b)| self.scores(a).into_iter().zip(self.scores(b)).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Errors when any probe pair exceeds the declared sensitivity.
    pub fn verify_sensitivity(&self, pairs: &[(SuperSample, SuperSample)], tol: f64) -> Result<f64> {
        let measured = self.measured_sensitivity(pairs);
        if measured > self.sensitivity * (1.0 + tol) + tol {
            return Err(HssError::SensitivityViolation { declared: self.sensitivity, measured });
        }
        Ok(measured)
    }
}

/// Largest probability ratio `P[A(𝕊)=k] / P[A(𝕊')=k]` over pairs, both
/// orders, and indices.
pub fn max_dp_ratio(fam: &ScoreFamily, epsilon: f64, pairs: &[(SuperSample, SuperSample)], include_zero_arm: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        let pa = softmax_probs(&fam.scores(a), epsilon, fam.sensitivity, include_zero_arm)?;
        let pb = softmax_probs(&fam.scores(b), epsilon, fam.sensitivity, include_zero_arm)?;
        for (x, y) in pa.iter().zip(&pb) {
            worst = worst.max(x / y).max(y / x);
        }
    }
    Ok(worst)
}

/// True iff every ratio is at most `e^ε (1 + tol)`.
pub fn check_dp_ratio(fam: &ScoreFamily, epsilon: f64, pairs: &[(SuperSample, SuperSample)], include_zero_arm: bool, tol: f64) -> Result<bool> {
    Ok(max_dp_ratio(fam, epsilon, pairs, include_zero_arm)? <= epsilon.exp() * (1.0 + tol))
}

/// `f_k(𝕊) = sup_{h ∈ H_{S_k}} R(h) − R̂_{S_k}(h)`, with declared sensitivity
/// `1/m + 2β`.
pub fn psi_score_family(
    family: Arc<dyn HypothesisFamily>,
    d: DiscreteDistribution,
    loss: LossFunction,
    p: usize,
    m: usize,
    beta: f64,
) -> Result<ScoreFamily> {
    let budget = OracleBudget::default();
    ScoreFamily::new(p, 1.0 / m as f64 + 2.0 * beta, move |k, data| {
        exact_sup_gap(family.as_ref(), &d, &data[k], &loss, &budget).unwrap_or(f64::NAN)
    })
}

pub type Sampler = dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub empirical_prob: f64,
    /// `ln 2 / p`
    pub budget: f64,
    pub std_error: f64,
    /// `2 Ê[max{0, X_1, …, X_p}]`
    pub threshold: f64,
    /// The sampler never produced a positive maximum, so the threshold is 0
    /// and the inequality is outside its intended regime.
    pub degenerate: bool,
}

impl TailCheck {
    /// `empirical_prob ≤ ln2/p + 3·σ_b` with `σ_b` the binomial std error at
    /// the budget, or trivially for degenerate samplers.
    pub fn holds(&self, n_outer: usize) -> bool {
        let b = self.budget.min(1.0);
        self.degenerate || self.empirical_prob <= self.budget + 3.0 * (b * (1.0 - b) / n_outer as f64).sqrt()
    }
}

/// Nested Monte Carlo estimate of `P[X ≥ 2E max{0, X_1, …, X_p}]`.
pub fn lemma_su_tail_check(sampler: &Sampler, p: usize, n_outer: usize, rng: &SeededRng) -> Result<TailCheck> {
    if p == 0 || n_outer == 0 {
        return Err(HssError::invalid("p and n_outer must be at least 1"));
    }
    let inner = rng.fork("max");
    let maxes: Vec<f64> = (0..n_outer)
        .into_par_iter()
        .map(|j| {
            let mut g = inner.derive(j as u64).generator();
            (0..p).map(|_| sampler(&mut g)).fold(0.0, f64::max)
        })
        .collect();
    let threshold = 2.0 * maxes.iter().sum::<f64>() / n_outer as f64;
    let outer = rng.fork("tail");
    let hits: Vec<bool> = (0..n_outer)
        .into_par_iter()
        .map(|j| sampler(&mut outer.derive(j as u64).generator()) >= threshold)
        .collect();
    let k = hits.iter().filter(|&&h| h).count() as f64;
    let q = k / n_outer as f64;
    Ok(TailCheck {
        empirical_prob: q,
        budget: std::f64::consts::LN_2 / p as f64,
        std_error: (q * (1.0 - q) / n_outer as f64).sqrt(),
        threshold,
        degenerate: threshold <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::LabeledPoint;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_probs(&[0.3, 0.3], 1.0, 0.5, false).unwrap(), vec![0.5, 0.5]);
        let (eps, d) = (0.7, 0.2);
        let p = softmax_probs(&[1.0, 1.0 - 2.0 * d * 3f64.ln() / eps], eps, d, false).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert_eq!(softmax_probs(&[0.0], 1.0, 1.0, true).unwrap(), vec![0.5, 0.5]);
        assert!(softmax_probs(&[0.0, 1.0], 1.0, 0.0, false).is_err());
        assert_eq!(softmax_probs(&[2.0, 2.0], 1.0, 0.0, false).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn shift_invariance() {
        let s = [0.1, -0.4, 0.9];
        let shifted: Vec<f64> = s.iter().map(|x| x + 3.0).collect();
        let a = softmax_probs(&s, 0.5, 0.1, false).unwrap();
        let b = softmax_probs(&shifted, 0.5, 0.1, false).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        let a = softmax_probs(&s, 0.5, 0.1, true).unwrap();
        let b = softmax_probs(&shifted, 0.5, 0.1, true).unwrap();
        assert!(b[3] < a[3]);
    }

    #[test]
    fn mechanism_samples_valid_index() {
        let out = exponential_mechanism(&[0.0, 5.0, 0.0], 10.0, 0.1, false, &SeededRng::new(1)).unwrap();
        assert_eq!(out.chosen_index, 1);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_vs_expectation_example() {
        let r = check_max_vs_expectation(&[1.0, 0.0], 1.0, 0.5).unwrap();
        let e = E1 / (E1 + 1.0);
        assert!((r.rhs - (e + 2f64.ln())).abs() < 1e-12 && r.holds);
        let r = check_max_vs_expectation(&[0.4; 4], 1.0, 0.5).unwrap();
        assert!(r.holds);
    }

    const E1: f64 = std::f64::consts::E;

    fn marked(m: usize, k: usize) -> LabeledSample {
        LabeledSample::new((0..m).map(|i| LabeledPoint::new(vec![0.0], if i < k { 1.0 } else { 0.0 })).collect()).unwrap()
    }

    #[test]
    fn counting_scorer_is_private() {
        let m = 5;
        let fam = ScoreFamily::new(3, 1.0 / m as f64, move |k, data: &SuperSample| {
            data[k].iter().filter(|z| z.y == 1.0).count() as f64 / m as f64
        })
        .unwrap();
        let base: SuperSample = vec![marked(m, 2), marked(m, 0), marked(m, 4)];
        let mut pairs = Vec::new();
        for k in 0..3 {
            for j in 0..=m {
                let mut a = base.clone();
                let mut b = base.clone();
                a[k] = marked(m, j.min(m));
                b[k] = marked(m, (j + 1).min(m));
                pairs.push((a, b));
            }
        }
        assert!(fam.verify_sensitivity(&pairs, 1e-12).is_ok());
        for eps in [0.1, 0.5, 1.0] {
            assert!(check_dp_ratio(&fam, eps, &pairs, false, 1e-9).unwrap());
            assert!(check_dp_ratio(&fam, eps, &pairs, true, 1e-9).unwrap());
        }
        let constant = ScoreFamily::new(3, 0.1, |_, _: &SuperSample| 0.5).unwrap();
        assert_eq!(max_dp_ratio(&constant, 0.1, &pairs, false).unwrap(), 1.0);
    }

    #[test]
    fn violated_sensitivity_breaks_privacy() {
        let m = 10;
        // arm 0 gains 2/m while every other arm loses 2/m: declared Δ is half the truth
        let fam = ScoreFamily::new(100, 1.0 / m as f64, move |k, data: &SuperSample| {
            let c = data[0].iter().filter(|z| z.y == 1.0).count() as f64 * 2.0 / m as f64;
            if k == 0 {
                c
            } else {
                -c
            }
        })
        .unwrap();
        let a: SuperSample = vec![marked(m, 0)];
        let b: SuperSample = vec![marked(m, 1)];
        let pairs = vec![(a, b)];
        assert!(fam.verify_sensitivity(&pairs, 1e-12).is_err());
        assert!(!check_dp_ratio(&fam, 0.1, &pairs, false, 1e-9).unwrap());
    }

    #[test]
    fn su_tail_uniform() {
        let u = |g: &mut ChaCha8Rng| g.gen::<f64>();
        let t = lemma_su_tail_check(&u, 10, 100_000, &SeededRng::new(5)).unwrap();
        assert!(!t.degenerate && t.holds(100_000), "{t:?}");
        let zero = |_: &mut ChaCha8Rng| 0.0;
        let t = lemma_su_tail_check(&zero, 10, 1000, &SeededRng::new(5)).unwrap();
        assert!(t.degenerate && t.empirical_prob == 1.0);
    }
}
