//! Generalization bound calculators and the empirical coverage harness.

use std::collections::BTreeMap;
use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HssError, Result};
use crate::complexity::{pooled_union, transductive_rademacher_mc};
use crate::hypothesis::{HypothesisFamily, Target};
use crate::loss::LossFunction;
use crate::oracle::{exact_sup_gap, OracleBudget};
use crate::rng::SeededRng;
use crate::sample::{draw_sample, DiscreteDistribution};

pub const BRANCH_RADEMACHER: &str = "rademacher";
pub const BRANCH_CV_STABILITY: &str = "cv-stability";
pub const BRANCH_MAX_DIAMETER: &str = "max-diameter";

/// Rejects confidence levels outside `(0, 1)`.
pub fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(HssError::invalid(format!("δ = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// The stability bounds hold for every `δ > 0`; values with `δ ≥ 1` are
/// accepted and simply describe a vacuous probability statement.
fn check_positive_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(HssError::invalid(format!("δ = {delta} must be positive")));
    }
    Ok(())
}

fn check_coefficient(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(HssError::invalid(format!("{name} = {v} must be nonnegative")));
    }
    Ok(())
}

/// Coefficients consumed by the bound calculators. Absent values disable
/// the branches that need them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub delta: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trans_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_fv: Option<f64>,
}

impl BoundInputs {
    pub fn new(m: usize, delta: f64) -> Self {
        BoundInputs { m, delta, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        check_positive_delta(self.delta)?;
        if self.m == 0 {
            return Err(HssError::invalid("m must be at least 1"));
        }
        check_coefficient("beta", self.beta)?;
        for (name, v) in [
            ("chi", self.chi),
            ("chi_bar", self.chi_bar),
            ("delta_max", self.delta_max),
            ("rad", self.rad),
            ("trans_rad", self.trans_rad),
            ("gamma_fv", self.gamma_fv),
        ] {
            if let Some(v) = v {
                check_coefficient(name, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub branch_values: BTreeMap<String, f64>,
    pub min_value: f64,
    pub vacuous: bool,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn from_branches(branch_values: BTreeMap<String, f64>, inputs: BoundInputs) -> Result<Self> {
        let min_value = branch_values.values().copied().fold(f64::INFINITY, f64::min);
        if branch_values.is_empty() {
            return Err(HssError::invalid("no bound branch has all of its coefficients"));
        }
        Ok(BoundReport { branch_values, min_value, vacuous: min_value > 1.0, inputs })
    }
}

/// Gap bound `2 R̂◦_{U,m} + 3√((1/m+1/n) ln(2/δ)) + 2√((1/m+1/n)³ m n)`.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    check_delta(inputs.delta)?;
    let n = inputs.n.filter(|&n| n > 0).ok_or_else(|| HssError::invalid("theorem 1 needs n ≥ 1"))?;
    let trans_rad = inputs.trans_rad.ok_or_else(|| HssError::invalid("theorem 1 needs trans_rad"))?;
    Ok(2.0 * trans_rad + theorem1_slack(inputs.m, n, inputs.delta))
}

/// The additive terms of the transductive bound.
pub fn theorem1_slack(m: usize, n: usize, delta: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let s = 1.0 / mf + 1.0 / nf;
    3.0 * (s * (2.0 / delta).ln()).sqrt() + 2.0 * (s.powi(3) * mf * nf).sqrt()
}

pub fn theorem1_report(inputs: &BoundInputs) -> Result<BoundReport> {
    let v = theorem1_bound(inputs)?;
    BoundReport::from_branches(BTreeMap::from([("transductive".to_string(), v)]), inputs.clone())
}

/// `min{2R◦, χ̄} + (1 + 2βm)√(ln(1/δ)/(2m))`, using whichever of `rad`
/// and `chi_bar` is available.
pub fn theorem2_rademacher_branch(inputs: &BoundInputs) -> Result<Option<f64>> {
    inputs.validate()?;
    let lead = [inputs.rad.map(|r| 2.0 * r), inputs.chi_bar].into_iter().flatten().fold(f64::INFINITY, f64::min);
    if !lead.is_finite() {
        return Ok(None);
    }
    let m = inputs.m as f64;
    Ok(Some(lead + (1.0 + 2.0 * inputs.beta * m) * ((1.0 / inputs.delta).ln() / (2.0 * m)).sqrt()))
}

/// `√e χ + 4√((1/m + 2β) ln(6/δ))`.
pub fn theorem2_cv_branch(inputs: &BoundInputs) -> Result<Option<f64>> {
    inputs.validate()?;
    let m = inputs.m as f64;
    Ok(inputs
        .chi
        .map(|chi| E.sqrt() * chi + 4.0 * ((1.0 / m + 2.0 * inputs.beta) * (6.0 / inputs.delta).ln()).sqrt()))
}

/// `48(3β + Δ_max) ln m ln(5m³/δ) + √((4/m) ln(4/δ))`.
pub fn theorem2_diameter_branch(inputs: &BoundInputs) -> Result<Option<f64>> {
    inputs.validate()?;
    let Some(dm) = inputs.delta_max else { return Ok(None) };
    if inputs.m < 2 {
        return Err(HssError::invalid("the max-diameter branch needs m ≥ 2"));
    }
    let m = inputs.m as f64;
    Ok(Some(48.0 * (3.0 * inputs.beta + dm) * m.ln() * (5.0 * m.powi(3) / inputs.delta).ln() + (4.0 / m * (4.0 / inputs.delta).ln()).sqrt()))
}

/// All available branches of the stability bound and their minimum.
pub fn theorem2_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let mut branches = BTreeMap::new();
    for (name, v) in [
        (BRANCH_RADEMACHER, theorem2_rademacher_branch(inputs)?),
        (BRANCH_CV_STABILITY, theorem2_cv_branch(inputs)?),
        (BRANCH_MAX_DIAMETER, theorem2_diameter_branch(inputs)?),
    ] {
        if let Some(v) = v {
            branches.insert(name.to_string(), v);
        }
    }
    BoundReport::from_branches(branches, inputs.clone())
}

/// Uniform-stability bound `47γ ln m ln(5m³/δ) + √((4/m) ln(4/δ))`. The
/// constant is 47 here and 48 in the max-diameter branch; both are kept.
pub fn fv_bound(gamma: f64, m: usize, delta: f64) -> Result<f64> {
    check_positive_delta(delta)?;
    check_coefficient("gamma", gamma)?;
    if m < 2 {
        return Err(HssError::invalid("m must be at least 2"));
    }
    let mf = m as f64;
    Ok(47.0 * gamma * mf.ln() * (5.0 * mf.powi(3) / delta).ln() + (4.0 / mf * (4.0 / delta).ln()).sqrt())
}

/// `KL(Q ‖ P)` over a finite space, natural log.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(HssError::Dimension { what: "prior length", expected: q.len(), got: p.len() });
    }
    let mut kl = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi < 0.0 || pi < 0.0 || !qi.is_finite() || !pi.is_finite() {
            return Err(HssError::invalid("probabilities must be finite and nonnegative"));
        }
        if qi > 0.0 {
            if pi == 0.0 {
                return Err(HssError::Divergence("Q is not absolutely continuous with respect to P".into()));
            }
            kl += qi * (qi / pi).ln();
        }
    }
    for (name, v) in [("Q", q), ("P", p)] {
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(HssError::invalid(format!("{name} must sum to 1")));
        }
    }
    Ok(kl.max(0.0))
}

/// Gibbs-risk bound `R̂ + (4 + e^{-1/2})√(max{KL,1}/m) + √(ln(1/δ)/(2m))`
/// for `δ ∈ (0, 1]`.
pub fn pac_bayes_bound(q: &[f64], p: &[f64], empirical_gibbs_risk: f64, m: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(HssError::invalid(format!("δ = {delta} must lie in (0, 1]")));
    }
    if m == 0 {
        return Err(HssError::invalid("m must be at least 1"));
    }
    let kl = kl_divergence(q, p)?;
    let mf = m as f64;
    Ok(empirical_gibbs_risk + pac_bayes_complexity(kl, m) + ((1.0 / delta).ln() / (2.0 * mf)).sqrt())
}

/// `(4 + e^{-1/2})√(max{KL,1}/m)`.
pub fn pac_bayes_complexity(kl: f64, m: usize) -> f64 {
    (4.0 + (-0.5f64).exp()) * (kl.max(1.0) / m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Theorem1,
    Theorem2Min,
    Theorem2Rademacher,
    Theorem2CvStability,
    Theorem2MaxDiameter,
    Fv,
}

impl BoundKind {
    /// Bound value for fixed coefficients.
    pub fn evaluate(&self, inputs: &BoundInputs) -> Result<f64> {
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| HssError::invalid(format!("missing coefficients for {what}")));
        match self {
            BoundKind::Theorem1 => theorem1_bound(inputs),
            BoundKind::Theorem2Min => Ok(theorem2_bound(inputs)?.min_value),
            BoundKind::Theorem2Rademacher => need(theorem2_rademacher_branch(inputs)?, "the Rademacher branch"),
            BoundKind::Theorem2CvStability => need(theorem2_cv_branch(inputs)?, "the CV-stability branch"),
            BoundKind::Theorem2MaxDiameter => need(theorem2_diameter_branch(inputs)?, "the max-diameter branch"),
            BoundKind::Fv => fv_bound(need(inputs.gamma_fv, "the uniform-stability bound")?, inputs.m, inputs.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kind: BoundKind,
    pub bound: f64,
    pub violation_rate: f64,
    pub mean_slack: f64,
    pub max_gap: f64,
    /// `δ + 3√(δ(1−δ)/n_trials)`.
    pub allowed_rate: f64,
    pub n_trials: usize,
}

impl CoverageReport {
    pub fn holds(&self) -> bool {
        self.violation_rate <= self.allowed_rate
    }
}

/// Exact `sup_{h ∈ H_S} R(h) − R̂_S(h)` on `n_trials` fresh samples, in
/// draw order. Trial `j` draws from stream `j` of `rng`.
pub fn sup_gaps(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    m: usize,
    n_trials: usize,
    rng: &SeededRng,
    budget: &OracleBudget,
) -> Result<Vec<f64>> {
    (0..n_trials)
        .into_par_iter()
        .map(|j| {
            let s = draw_sample(d, m, &rng.derive(j as u64))?;
            exact_sup_gap(family, d, &s, loss, budget)
        })
        .collect()
}

/// Coverage of a fixed bound value against precomputed sup-gaps.
pub fn coverage_of(kind: BoundKind, bound: f64, gaps: &[f64], delta: f64) -> CoverageReport {
    let n = gaps.len();
    let violations = gaps.iter().filter(|&&g| g > bound).count();
    CoverageReport {
        kind,
        bound,
        violation_rate: violations as f64 / n as f64,
        mean_slack: gaps.iter().map(|g| bound - g).sum::<f64>() / n as f64,
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        allowed_rate: delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt(),
        n_trials: n,
    }
}

/// Fraction of sample draws whose exact sup-gap exceeds the bound built
/// from the supplied (certified or estimated) coefficients.
#[allow(clippy::too_many_arguments)]
pub fn validate_bound_coverage(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    kind: BoundKind,
    inputs: &BoundInputs,
    n_trials: usize,
    rng: &SeededRng,
    budget: &OracleBudget,
) -> Result<CoverageReport> {
    if n_trials == 0 {
        return Err(HssError::invalid("n_trials must be at least 1"));
    }
    let bound = kind.evaluate(inputs)?;
    let gaps = sup_gaps(family, d, loss, inputs.m, n_trials, rng, budget)?;
    Ok(coverage_of(kind, bound, &gaps, inputs.delta))
}

/// Settings for the sampled-`U` Theorem 1 harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransductiveSettings {
    /// Ghost-sample size `n`.
    pub n: usize,
    /// Sign draws for the transductive complexity of each `U`.
    pub n_sign_draws: usize,
    /// Sub-samples pooled into `H̄_{U,m}`; all of them when fewer.
    pub max_subsets: usize,
}

/// Theorem 1 coverage where each trial evaluates the transductive term on
/// its own `U = S ∪ T` (a sampled `U`, not the maximum over all `U`).
/// `bound` in the report is the mean per-trial bound.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_sampled_coverage(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    m: usize,
    delta: f64,
    settings: &TransductiveSettings,
    n_trials: usize,
    rng: &SeededRng,
    budget: &OracleBudget,
) -> Result<CoverageReport> {
    check_delta(delta)?;
    if n_trials == 0 {
        return Err(HssError::invalid("n_trials must be at least 1"));
    }
    let n = settings.n;
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|j| {
            let key = rng.derive(j as u64);
            let s = draw_sample(d, m, &key.fork("s"))?;
            let t = draw_sample(d, n, &key.fork("t"))?;
            let u = s.concat(&t)?;
            let (set, _) = pooled_union(family, &u, m, settings.max_subsets, &key.fork("pool"))?;
            let tr = transductive_rademacher_mc(&set, &u, m, n, Target::Loss(loss), settings.n_sign_draws, &key.fork("signs"))?;
            let inputs = BoundInputs { n: Some(n), trans_rad: Some(tr.value.max(0.0)), ..BoundInputs::new(m, delta) };
            Ok((theorem1_bound(&inputs)?, exact_sup_gap(family, d, &s, loss, budget)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let nt = n_trials as f64;
    Ok(CoverageReport {
        kind: BoundKind::Theorem1,
        bound: trials.iter().map(|t| t.0).sum::<f64>() / nt,
        violation_rate: trials.iter().filter(|(b, g)| g > b).count() as f64 / nt,
        mean_slack: trials.iter().map(|(b, g)| b - g).sum::<f64>() / nt,
        max_gap: trials.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max),
        allowed_rate: delta + 3.0 * (delta * (1.0 - delta) / nt).sqrt(),
        n_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn theorem1_values() {
        assert!(close(theorem1_slack(100, 100, 0.5) - 3.0 * (0.02 * 4f64.ln()).sqrt(), 2.0 * 0.08f64.sqrt(), 1e-12));
        assert!(close(2.0 * 0.08f64.sqrt(), 0.565_69, 1e-5));
        let mut inp = BoundInputs { n: Some(100), trans_rad: Some(0.0), ..BoundInputs::new(100, 0.05) };
        let b0 = theorem1_bound(&inp).unwrap();
        assert!(close(b0, 1.380_546, 1e-6), "{b0}");
        assert!(theorem1_report(&inp).unwrap().vacuous);
        inp.trans_rad = Some(0.125);
        assert!(close(theorem1_bound(&inp).unwrap() - b0, 0.25, 1e-12));
        inp.delta = 1.0;
        assert!(theorem1_bound(&inp).is_err());
    }

    #[test]
    fn theorem2_spot_values() {
        let b2 = BoundInputs { rad: Some(0.1), ..BoundInputs::new(100, (-2f64).exp()) };
        assert!(close(theorem2_rademacher_branch(&b2).unwrap().unwrap(), 0.3, 1e-12));
        let b3 = BoundInputs { chi: Some(0.0), ..BoundInputs::new(100, 6.0 / E) };
        assert!(close(theorem2_cv_branch(&b3).unwrap().unwrap(), 0.4, 1e-12));
        let b4 = BoundInputs { delta_max: Some(0.0), ..BoundInputs::new(100, 4.0 / E) };
        assert!(close(theorem2_diameter_branch(&b4).unwrap().unwrap(), 0.2, 1e-12));
        assert!(close(fv_bound(0.0, 100, 4.0 / E).unwrap(), 0.2, 1e-12));
    }

    #[test]
    fn min_over_branches() {
        let inp = BoundInputs { beta: 0.001, rad: Some(0.1), chi: Some(0.05), chi_bar: Some(0.3), delta_max: Some(0.01), ..BoundInputs::new(200, 0.1) };
        let r = theorem2_bound(&inp).unwrap();
        assert_eq!(r.branch_values.len(), 3);
        assert!(r.branch_values.values().all(|&v| r.min_value <= v));
        assert!(theorem2_bound(&BoundInputs::new(10, 0.1)).is_err());
    }

    #[test]
    fn branch_four_against_fv() {
        let (beta, dm) = (0.001, 0.002);
        let inp = BoundInputs { beta, delta_max: Some(dm), ..BoundInputs::new(50, 0.1) };
        let b4 = theorem2_diameter_branch(&inp).unwrap().unwrap();
        let fv = fv_bound(3.0 * beta + dm, 50, 0.1).unwrap();
        let tail = (4.0 / 50.0 * 40f64.ln()).sqrt();
        assert!(close((b4 - tail) / (fv - tail), 48.0 / 47.0, 1e-12));
    }

    #[test]
    fn pac_bayes_values() {
        let u = [0.5, 0.5];
        let c = pac_bayes_bound(&u, &u, 0.0, 100, 1.0).unwrap();
        assert!(close(c, 0.460_65, 1e-5), "{c}");
        let p = [1.0 / E, 1.0 - 1.0 / E];
        assert!(close(kl_divergence(&[1.0, 0.0], &p).unwrap(), 1.0, 1e-12));
        assert!(close(pac_bayes_bound(&[1.0, 0.0], &p, 0.0, 100, 1.0).unwrap(), c, 1e-12));
        assert!(matches!(pac_bayes_bound(&[0.5, 0.5], &[1.0, 0.0], 0.0, 10, 0.5), Err(HssError::Divergence(_))));
    }

    #[test]
    fn monotone_in_coefficients() {
        let mut prev = 0.0;
        for i in 0..20 {
            let c = i as f64 * 0.01;
            let inp = BoundInputs { beta: c, rad: Some(c), chi: Some(c), delta_max: Some(c), ..BoundInputs::new(40, 0.1) };
            let v = theorem2_bound(&inp).unwrap();
            let total: f64 = v.branch_values.values().sum();
            assert!(total >= prev);
            prev = total;
        }
    }

    #[test]
    fn delta_validation() {
        assert!(check_delta(0.0).is_err() && check_delta(1.0).is_err() && check_delta(f64::NAN).is_err());
        assert!(fv_bound(0.1, 1, 0.1).is_err());
        assert!(fv_bound(0.1, 10, 0.0).is_err());
        assert!(theorem2_bound(&BoundInputs { chi: Some(0.1), ..BoundInputs::new(10, -0.5) }).is_err());
    }
}
