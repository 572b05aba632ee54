//! Hypothesis-set stability β, CV-stability χ/χ̄ and the diameters Δ̄/Δ/Δ_max.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HssError, Result};
use crate::hypothesis::{Hypothesis, HypothesisFamily, HypothesisSet, Target};
use crate::loss::LossFunction;
use crate::rng::SeededRng;
use crate::sample::{draw_sample, replace_point, DiscreteDistribution, LabeledPoint, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directionality {
    LowerBound,
    Exact,
}

impl Directionality {
    fn from_exact(exact: bool) -> Self {
        if exact {
            Directionality::Exact
        } else {
            Directionality::LowerBound
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta_hat: f64,
    pub chi_hat: f64,
    pub chi_std_error: f64,
    pub chi_bar_hat: f64,
    pub chi_bar_std_error: f64,
    pub delta_bar_hat: f64,
    pub delta_hat: f64,
    pub delta_max_hat: f64,
    pub n_samples: usize,
    pub n_perturbations: usize,
    pub n_probe_points: usize,
    pub directionality: Directionality,
}

impl StabilityReport {
    pub fn zero() -> Self {
        StabilityReport {
            beta_hat: 0.0,
            chi_hat: 0.0,
            chi_std_error: 0.0,
            chi_bar_hat: 0.0,
            chi_bar_std_error: 0.0,
            delta_bar_hat: 0.0,
            delta_hat: 0.0,
            delta_max_hat: 0.0,
            n_samples: 0,
            n_perturbations: 0,
            n_probe_points: 0,
            directionality: Directionality::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub value: f64,
    pub exact: bool,
    pub n_perturbations: usize,
    pub n_probe_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvEstimate {
    pub chi: f64,
    pub std_error: f64,
    pub n_perturbations: usize,
    pub exact: bool,
}

/// Per-sample diameters: `delta` averages the per-point diameter over `S`
/// (the summand of Δ̄ and Δ), `delta_max` maximizes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameters {
    pub delta_bar: f64,
    pub delta: f64,
    pub delta_max: f64,
    pub exact: bool,
}

/// Loss table of candidates (rows) at probe points (columns).
struct LossTable {
    rows: Vec<Vec<f64>>,
    exact: bool,
}

impl LossTable {
    fn new(set: &HypothesisSet, probes: &[LabeledPoint], loss: &LossFunction) -> Result<Self> {
        let cands: Vec<Hypothesis> = set.candidates();
        if cands.is_empty() {
            return Err(HssError::EmptyHypothesisSet);
        }
        let rows = cands.iter().map(|h| probes.iter().map(|z| h.loss(z, loss)).collect()).collect();
        Ok(LossTable { rows, exact: set.is_finite() })
    }
}

/// `max_{a ∈ A} min_{b ∈ B} max_z |L(a,z) − L(b,z)|`.
fn directed_distance(a: &LossTable, b: &LossTable) -> f64 {
    a.rows
        .iter()
        .map(|ra| {
            b.rows
                .iter()
                .map(|rb| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn check_probes(probes: &[LabeledPoint]) -> Result<()> {
    if probes.is_empty() {
        return Err(HssError::invalid("probe set must be nonempty"));
    }
    Ok(())
}

fn check_perturbations(n: usize) -> Result<()> {
    if n == 0 {
        return Err(HssError::invalid("n_perturbations must be at least 1"));
    }
    Ok(())
}

/// Default probe set: the support of `D` followed by the points of `S`.
pub fn default_probes(s: &LabeledSample, d: &DiscreteDistribution) -> Vec<LabeledPoint> {
    d.support().iter().chain(s.iter()).cloned().collect()
}

/// One perturbation: the replaced index and the replacement.
#[derive(Debug, Clone)]
struct Perturbation {
    index: usize,
    point: LabeledPoint,
    weight: f64,
}

fn sampled_perturbations(s: &LabeledSample, d: &DiscreteDistribution, n: usize, rng: &SeededRng) -> Vec<Perturbation> {
    (0..n)
        .map(|j| Perturbation {
            index: j % s.len(),
            point: d.sample_point(&mut rng.derive(j as u64).generator()),
            weight: 1.0 / n as f64,
        })
        .collect()
}

/// Every `(index, atom)` pair, weighted by `P(atom)/m`.
fn all_perturbations(s: &LabeledSample, d: &DiscreteDistribution) -> Vec<Perturbation> {
    let m = s.len() as f64;
    (0..s.len())
        .flat_map(|i| {
            d.support()
                .iter()
                .zip(d.probs())
                .map(move |(z, &p)| Perturbation { index: i, point: z.clone(), weight: p / m })
        })
        .collect()
}

struct PerturbationOutcome {
    beta: f64,
    chi_term: f64,
    exact: bool,
}

fn evaluate_perturbations(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    h_s: &HypothesisSet,
    base: &LossTable,
    probes: &[LabeledPoint],
    loss: &LossFunction,
    perturbations: &[Perturbation],
) -> Result<Vec<PerturbationOutcome>> {
    let target = Target::Loss(loss);
    perturbations
        .par_iter()
        .map(|p| {
            let s_prime = replace_point(s, p.index, p.point.clone())?;
            let h_prime = family.hypothesis_set(&s_prime)?;
            let table = LossTable::new(&h_prime, probes, loss)?;
            let beta = directed_distance(base, &table).max(directed_distance(&table, base));
            let z = &s.points()[p.index];
            let (lo, _, e1) = h_s.range_at(z, target)?;
            let (_, hi, e2) = h_prime.range_at(z, target)?;
            Ok(PerturbationOutcome { beta, chi_term: hi - lo, exact: table.exact && e1 && e2 })
        })
        .collect()
}

/// Empirical β: the largest two-sided matching distance between `H_S` and
/// `H_{S'}` over sampled one-point replacements `S'` (the replaced index
/// cycles through `S`, replacements come from `D`).
pub fn estimate_beta(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    d: &DiscreteDistribution,
    probes: &[LabeledPoint],
    loss: &LossFunction,
    n_perturbations: usize,
    rng: &SeededRng,
) -> Result<BetaEstimate> {
    check_probes(probes)?;
    check_perturbations(n_perturbations)?;
    beta_over(family, s, probes, loss, &sampled_perturbations(s, d, n_perturbations, rng), false)
}

/// β over every one-point replacement of `S` by an atom of `D`, probed on
/// the support of `D` and `S`. Exact for finite hypothesis sets.
pub fn estimate_beta_exact(family: &dyn HypothesisFamily, s: &LabeledSample, d: &DiscreteDistribution, loss: &LossFunction) -> Result<BetaEstimate> {
    beta_over(family, s, &default_probes(s, d), loss, &all_perturbations(s, d), true)
}

fn beta_over(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    probes: &[LabeledPoint],
    loss: &LossFunction,
    perturbations: &[Perturbation],
    exhaustive: bool,
) -> Result<BetaEstimate> {
    let h_s = family.hypothesis_set(s)?;
    let base = LossTable::new(&h_s, probes, loss)?;
    let out = evaluate_perturbations(family, s, &h_s, &base, probes, loss, perturbations)?;
    Ok(BetaEstimate {
        value: out.iter().map(|o| o.beta).fold(0.0, f64::max),
        exact: exhaustive && base.exact && out.iter().all(|o| o.exact),
        n_perturbations: perturbations.len(),
        n_probe_points: probes.len(),
    })
}

fn weighted_mean_and_se(values: &[f64], weights: &[f64], exact: bool) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let n = values.len();
    if exact || n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `E_{z'∼D, z∼S} sup_{h ∈ H_S, h' ∈ H_{S^{z↔z'}}} L(h', z) − L(h, z)` by
/// Monte Carlo over replacements.
pub fn estimate_cv_stability(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    n_perturbations: usize,
    rng: &SeededRng,
) -> Result<CvEstimate> {
    check_perturbations(n_perturbations)?;
    cv_over(family, s, loss, &sampled_perturbations(s, d, n_perturbations, rng), false)
}

/// The same expectation, enumerated over every index and atom.
pub fn estimate_cv_stability_exact(family: &dyn HypothesisFamily, s: &LabeledSample, d: &DiscreteDistribution, loss: &LossFunction) -> Result<CvEstimate> {
    cv_over(family, s, loss, &all_perturbations(s, d), true)
}

fn cv_over(family: &dyn HypothesisFamily, s: &LabeledSample, loss: &LossFunction, perturbations: &[Perturbation], exhaustive: bool) -> Result<CvEstimate> {
    let target = Target::Loss(loss);
    let h_s = family.hypothesis_set(s)?;
    let terms = perturbations
        .par_iter()
        .map(|p| {
            let h_prime = family.hypothesis_set(&replace_point(s, p.index, p.point.clone())?)?;
            let z = &s.points()[p.index];
            let (lo, _, e1) = h_s.range_at(z, target)?;
            let (_, hi, e2) = h_prime.range_at(z, target)?;
            Ok((hi - lo, e1 && e2))
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let weights: Vec<f64> = perturbations.iter().map(|p| p.weight).collect();
    let exact = exhaustive && terms.iter().all(|t| t.1);
    let (chi, std_error) = weighted_mean_and_se(&vals, &weights, exhaustive);
    Ok(CvEstimate { chi, std_error, n_perturbations: perturbations.len(), exact })
}

/// Per-point diameters `sup_{h,h' ∈ H_S} L(h', z) − L(h, z)` over `z ∈ S`.
pub fn estimate_diameters(family: &dyn HypothesisFamily, s: &LabeledSample, loss: &LossFunction) -> Result<Diameters> {
    let set = family.hypothesis_set(s)?;
    diameters_of(&set, s, loss)
}

pub fn diameters_of(set: &HypothesisSet, s: &LabeledSample, loss: &LossFunction) -> Result<Diameters> {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut exact = true;
    for z in s.iter() {
        let (lo, hi, e) = set.range_at(z, Target::Loss(loss))?;
        let d = (hi - lo).max(0.0);
        sum += d;
        max = max.max(d);
        exact &= e;
    }
    let mean = sum / s.len() as f64;
    Ok(Diameters { delta_bar: mean, delta: mean, delta_max: max, exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    /// Number of samples `S ∼ D^m` for the outer expectation/supremum.
    pub n_samples: usize,
    /// Replacements per sample; ignored when `exhaustive`.
    pub n_perturbations: usize,
    /// Enumerate every `(index, atom)` replacement instead of sampling.
    pub exhaustive: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { n_samples: 20, n_perturbations: 200, exhaustive: false }
    }
}

/// Per-sample coefficients computed on one shared set of replacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStability {
    pub beta: f64,
    pub chi: f64,
    pub chi_std_error: f64,
    pub diameters: Diameters,
    pub exact: bool,
}

/// β, χ and the diameters of one sample, sharing the replacements between
/// the β and χ computations and probing on `D`'s support plus `S`.
pub fn sample_stability(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    config: &StabilityConfig,
    rng: &SeededRng,
) -> Result<SampleStability> {
    let perturbations = if config.exhaustive {
        all_perturbations(s, d)
    } else {
        check_perturbations(config.n_perturbations)?;
        sampled_perturbations(s, d, config.n_perturbations, rng)
    };
    let probes = default_probes(s, d);
    let h_s = family.hypothesis_set(s)?;
    let base = LossTable::new(&h_s, &probes, loss)?;
    let out = evaluate_perturbations(family, s, &h_s, &base, &probes, loss, &perturbations)?;
    let diameters = diameters_of(&h_s, s, loss)?;
    let vals: Vec<f64> = out.iter().map(|o| o.chi_term).collect();
    let weights: Vec<f64> = perturbations.iter().map(|p| p.weight).collect();
    let (chi, chi_std_error) = weighted_mean_and_se(&vals, &weights, config.exhaustive);
    Ok(SampleStability {
        beta: out.iter().map(|o| o.beta).fold(0.0, f64::max),
        chi,
        chi_std_error,
        diameters,
        exact: config.exhaustive && base.exact && diameters.exact && out.iter().all(|o| o.exact),
    })
}

/// Draws `n_samples` samples from `D` and folds the per-sample coefficients:
/// suprema over `S` become maxima over the draws, expectations become means.
pub fn stability_report(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    m: usize,
    loss: &LossFunction,
    config: &StabilityConfig,
    rng: &SeededRng,
) -> Result<StabilityReport> {
    if config.n_samples == 0 {
        return Err(HssError::invalid("n_samples must be at least 1"));
    }
    let draws = (0..config.n_samples)
        .map(|j| {
            let key = rng.derive(j as u64);
            let s = draw_sample(d, m, &key.fork("sample"))?;
            let st = sample_stability(family, &s, d, loss, config, &key.fork("perturb"))?;
            Ok((s, st))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fold_report(&draws.iter().map(|(_, st)| *st).collect::<Vec<_>>(), m, d.support().len(), config))
}

fn fold_report(per_sample: &[SampleStability], m: usize, n_support: usize, config: &StabilityConfig) -> StabilityReport {
    let n = per_sample.len() as f64;
    let argmax_chi = per_sample
        .iter()
        .max_by(|a, b| a.chi.total_cmp(&b.chi))
        .expect("at least one sample");
    let chi_bar = per_sample.iter().map(|p| p.chi).sum::<f64>() / n;
    let chi_bar_var_mc = per_sample.iter().map(|p| p.chi_std_error.powi(2)).sum::<f64>() / (n * n);
    StabilityReport {
        beta_hat: per_sample.iter().map(|p| p.beta).fold(0.0, f64::max),
        chi_hat: argmax_chi.chi.max(0.0),
        chi_std_error: argmax_chi.chi_std_error,
        chi_bar_hat: chi_bar.max(0.0),
        chi_bar_std_error: chi_bar_var_mc.sqrt(),
        delta_bar_hat: per_sample.iter().map(|p| p.diameters.delta).sum::<f64>() / n,
        delta_hat: per_sample.iter().map(|p| p.diameters.delta).fold(0.0, f64::max),
        delta_max_hat: per_sample.iter().map(|p| p.diameters.delta_max).fold(0.0, f64::max),
        n_samples: per_sample.len(),
        n_perturbations: if config.exhaustive { m * n_support } else { config.n_perturbations },
        n_probe_points: n_support + m,
        directionality: Directionality::from_exact(per_sample.iter().all(|p| p.exact)),
    }
}

/// `χ ≤ Δ + β` and `χ̄ ≤ Δ̄ + β`, each within `tol`.
pub fn check_lemma1(report: &StabilityReport, tol: f64) -> bool {
    report.chi_hat <= report.delta_hat + report.beta_hat + tol && report.chi_bar_hat <= report.delta_bar_hat + report.beta_hat + tol
}

/// Lemma 1 check for estimated reports with a `k`-standard-error allowance
/// on top of a `1e-12` rounding floor.
pub fn check_lemma1_estimated(report: &StabilityReport, k: f64) -> bool {
    check_lemma1(report, k * report.chi_std_error.max(report.chi_bar_std_error) + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{FixedFamily, LabelMeanFamily};

    fn pt(x: f64, y: f64) -> LabeledPoint {
        LabeledPoint::new(vec![x], y)
    }

    fn binary() -> DiscreteDistribution {
        DiscreteDistribution::uniform(vec![pt(0.0, 0.0), pt(1.0, 1.0)]).unwrap()
    }

    fn sample(ys: &[f64]) -> LabeledSample {
        LabeledSample::new(ys.iter().map(|&y| pt(y, y)).collect()).unwrap()
    }

    #[test]
    fn data_independent_family_is_zero() {
        let fam = FixedFamily(HypothesisSet::finite(vec![Hypothesis::constant(0.1), Hypothesis::constant(0.7)]).unwrap());
        let s = sample(&[0.0, 1.0, 1.0]);
        let b = estimate_beta_exact(&fam, &s, &binary(), &LossFunction::absolute()).unwrap();
        assert_eq!(b.value, 0.0);
        assert!(b.exact);
    }

    #[test]
    fn label_mean_flip() {
        let s = sample(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let loss = LossFunction::absolute();
        let b = estimate_beta(&LabelMeanFamily, &s, &binary(), &default_probes(&s, &binary()), &loss, 50, &SeededRng::new(3)).unwrap();
        assert!(b.value <= 0.1 + 1e-12 && b.value >= 0.09, "{b:?}");
    }

    #[test]
    fn constant_shift_matches() {
        // H_S = {ℓ ≡ 0.2} when S has no label-1 point, {ℓ ≡ 0.2 + c} otherwise
        let fam = |s: &LabeledSample| {
            let c = if s.iter().any(|z| z.y == 1.0) { 0.15 } else { 0.0 };
            HypothesisSet::finite(vec![Hypothesis::table(vec![0.2 + c, 0.2 + c])])
        };
        let probes = vec![LabeledPoint::new(vec![0.0], 0.0), LabeledPoint::new(vec![1.0], 0.0)];
        let s = LabeledSample::new(vec![LabeledPoint::new(vec![0.0], 0.0); 3]).unwrap();
        let b = estimate_beta(&fam, &s, &binary(), &probes, &LossFunction::absolute(), 40, &SeededRng::new(1)).unwrap();
        assert!((b.value - 0.15).abs() < 1e-12);
    }

    #[test]
    fn constant_loss_cv_instance() {
        let fam = |s: &LabeledSample| {
            let v = if s.iter().any(|z| z.y == 1.0) { 0.5 } else { 0.2 };
            Ok(HypothesisSet::singleton(Hypothesis::constant(v)))
        };
        let d = DiscreteDistribution::point_mass(pt(0.0, 1.0));
        let s = LabeledSample::new(vec![pt(0.0, 0.0); 4]).unwrap();
        let cv = estimate_cv_stability_exact(&fam, &s, &d, &LossFunction::absolute()).unwrap();
        assert!((cv.chi - 0.3).abs() < 1e-12 && cv.exact);
        let cv = estimate_cv_stability(&fam, &s, &d, &LossFunction::absolute(), 25, &SeededRng::new(0)).unwrap();
        assert!((cv.chi - 0.3).abs() < 1e-12);
    }

    #[test]
    fn diameters_examples() {
        let s = sample(&[0.0, 1.0]);
        let loss = LossFunction::absolute();
        let single = FixedFamily(HypothesisSet::singleton(Hypothesis::constant(0.3)));
        let d = estimate_diameters(&single, &s, &loss).unwrap();
        assert_eq!((d.delta_bar, d.delta, d.delta_max), (0.0, 0.0, 0.0));
        let s0 = LabeledSample::new(vec![pt(0.0, 0.0); 3]).unwrap();
        let pair = FixedFamily(HypothesisSet::finite(vec![Hypothesis::constant(0.1), Hypothesis::constant(0.9)]).unwrap());
        let d = estimate_diameters(&pair, &s0, &loss).unwrap();
        for v in [d.delta_bar, d.delta, d.delta_max] {
            assert!((v - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma1_checks() {
        assert!(check_lemma1(&StabilityReport::zero(), 0.0));
        let mut r = StabilityReport::zero();
        r.chi_hat = 0.5;
        r.delta_hat = 0.3;
        r.beta_hat = 0.1;
        assert!(!check_lemma1(&r, 0.05));
    }

    #[test]
    fn exact_report_satisfies_lemma1() {
        let cfg = StabilityConfig { n_samples: 5, n_perturbations: 0, exhaustive: true };
        let r = stability_report(&LabelMeanFamily, &binary(), 6, &LossFunction::absolute(), &cfg, &SeededRng::new(8)).unwrap();
        assert_eq!(r.directionality, Directionality::Exact);
        assert!(check_lemma1(&r, 1e-9), "{r:?}");
        assert!(r.delta_hat <= r.delta_max_hat);
        assert!(r.delta_bar_hat <= r.delta_hat + 1e-15);
    }

    #[test]
    fn errors() {
        let s = sample(&[0.0]);
        let loss = LossFunction::absolute();
        assert!(estimate_beta(&LabelMeanFamily, &s, &binary(), &[], &loss, 1, &SeededRng::new(0)).is_err());
        assert!(estimate_beta(&LabelMeanFamily, &s, &binary(), &default_probes(&s, &binary()), &loss, 0, &SeededRng::new(0)).is_err());
    }
}
