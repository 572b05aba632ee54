//! Data-dependent, pooled and transductive Rademacher complexities, plus
//! the closed-form upper bounds for L1-mixture and norm-ball linear sets.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, for_each_combination, random_combination};
use crate::error::{HssError, Result};
use crate::hypothesis::{HypothesisFamily, HypothesisSet, SupValue, Target};
use crate::sample::{draw_sample, swap_by_mask, DiscreteDistribution, LabeledSample};
use crate::rng::SeededRng;

/// Largest `m` for which exhaustive sign enumeration is attempted.
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Draws per memoization chunk in the Monte Carlo estimators.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignScheme {
    Rademacher,
    /// Two-point signs `(m+n)/n` w.p. `n/(m+n)` and `-(m+n)/m` otherwise.
    Transductive { m: usize, n: usize },
}

impl SignScheme {
    /// The (positive, negative) values of a sign entry.
    pub fn levels(&self) -> (f64, f64) {
        match *self {
            SignScheme::Rademacher => (1.0, -1.0),
            SignScheme::Transductive { m, n } => {
                let t = (m + n) as f64;
                (t / n as f64, -t / m as f64)
            }
        }
    }

    /// Probability of the positive level.
    pub fn positive_prob(&self) -> f64 {
        match *self {
            SignScheme::Rademacher => 0.5,
            SignScheme::Transductive { m, n } => n as f64 / (m + n) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignVector {
    values: Vec<f64>,
    scheme: SignScheme,
}

impl SignVector {
    pub fn rademacher(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(HssError::invalid("Rademacher entries must be +1 or -1"));
        }
        Ok(Self { values, scheme: SignScheme::Rademacher })
    }

    pub fn draw<R: Rng + ?Sized>(scheme: SignScheme, len: usize, rng: &mut R) -> Self {
        let (pos, neg) = scheme.levels();
        let p = scheme.positive_prob();
        let values = (0..len).map(|_| if rng.gen::<f64>() < p { pos } else { neg }).collect();
        Self { values, scheme }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme(&self) -> SignScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), scheme: self.scheme }
    }
}

/// Value, standard error and provenance of an estimated complexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub n_draws: usize,
    pub exact: bool,
    pub lower_bound_of_sup: bool,
    pub scheme: SignScheme,
}

fn summarize(values: &[SupValue], scheme: SignScheme, exact_enumeration: bool) -> EstimateReport {
    let n = values.len();
    let mean = values.iter().map(|v| v.value).sum::<f64>() / n as f64;
    let all_exact = values.iter().all(|v| v.exact);
    let std_error = if exact_enumeration || n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v.value - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    EstimateReport {
        value: mean,
        std_error,
        n_draws: n,
        exact: exact_enumeration && all_exact,
        lower_bound_of_sup: !all_exact,
        scheme,
    }
}

fn check_draws(n_draws: usize) -> Result<()> {
    if n_draws == 0 {
        return Err(HssError::invalid("n_draws must be at least 1"));
    }
    Ok(())
}

/// Runs `draw` once per index with its own derived stream, memoizing on the
/// key returned by the draw's first stage. Results come back in index order.
fn memoized_draws<K, P, E>(n_draws: usize, rng: &SeededRng, pick: P, eval: E) -> Result<Vec<SupValue>>
where
    K: std::hash::Hash + Eq + Clone,
    P: Fn(&mut ChaCha8Rng) -> K + Sync,
    E: Fn(&K) -> Result<SupValue> + Sync,
{
    let chunks: Vec<Result<Vec<SupValue>>> = (0..n_draws.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut cache: HashMap<K, SupValue> = HashMap::new();
            let hi = ((c + 1) * CHUNK).min(n_draws);
            (c * CHUNK..hi)
                .map(|j| {
                    let key = pick(&mut rng.derive(j as u64).generator());
                    if let Some(v) = cache.get(&key) {
                        return Ok(*v);
                    }
                    let v = eval(&key)?;
                    cache.insert(key, v);
                    Ok(v)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n_draws);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn mask_signs(mask: &[u64], m: usize) -> Vec<f64> {
    (0..m).map(|i| if mask[i / 64] >> (i % 64) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// `m` fair sign bits packed into 64-bit words, drawn in index order.
fn random_mask(g: &mut ChaCha8Rng, m: usize) -> Vec<u64> {
    let mut mask = vec![0u64; m.div_ceil(64).max(1)];
    for i in 0..m {
        mask[i / 64] |= u64::from(g.gen::<bool>()) << (i % 64);
    }
    mask
}

fn check_pair(s: &LabeledSample, t: &LabeledSample) -> Result<usize> {
    if s.len() != t.len() {
        return Err(HssError::Dimension { what: "|T| must equal |S|", expected: s.len(), got: t.len() });
    }
    Ok(s.len())
}

/// One term of the data-dependent complexity: `(1/m) sup_{h ∈ H_{S_{T,σ}}} Σ σ_i g_h(z^T_i)`,
/// with bit `i` of `mask` set when `σ_i = -1`.
fn dd_term(family: &dyn HypothesisFamily, s: &LabeledSample, t: &LabeledSample, mask: &[u64], target: Target<'_>) -> Result<SupValue> {
    let m = s.len();
    let set = family.hypothesis_set(&swap_by_mask(s, t, mask))?;
    let sup = set.sup_weighted(t.points(), &mask_signs(mask, m), target)?;
    Ok(SupValue { value: sup.value / m as f64, exact: sup.exact })
}

/// Monte Carlo estimate of `R̂◦_{S,T}`.
pub fn dd_rademacher_mc(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    t: &LabeledSample,
    target: Target<'_>,
    n_draws: usize,
    rng: &SeededRng,
) -> Result<EstimateReport> {
    let m = check_pair(s, t)?;
    check_draws(n_draws)?;
    let vals = memoized_draws(
        n_draws,
        rng,
        |g| random_mask(g, m),
        |mask| dd_term(family, s, t, mask, target),
    )?;
    Ok(summarize(&vals, SignScheme::Rademacher, false))
}

/// Exact `R̂◦_{S,T}` by enumerating all `2^m` sign vectors in ascending mask
/// order (bit `i` set ⇔ `σ_i = -1`).
pub fn dd_rademacher_exact(family: &dyn HypothesisFamily, s: &LabeledSample, t: &LabeledSample, target: Target<'_>) -> Result<EstimateReport> {
    dd_rademacher_exact_capped(family, s, t, target, DEFAULT_EXACT_CAP)
}

pub fn dd_rademacher_exact_capped(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    t: &LabeledSample,
    target: Target<'_>,
    cap: usize,
) -> Result<EstimateReport> {
    let m = check_pair(s, t)?;
    if m > cap.min(63) {
        let pow = |k: usize| 1u128.checked_shl(k as u32).unwrap_or(u128::MAX);
        return Err(HssError::Budget { what: "sign vectors", needed: pow(m), budget: pow(cap.min(63)) });
    }
    let vals = (0..1u64 << m)
        .into_par_iter()
        .map(|mask| dd_term(family, s, t, &[mask], target))
        .collect::<Result<Vec<_>>>()?;
    if vals.iter().any(|v| !v.exact) {
        return Err(HssError::NotFinite("exact data-dependent Rademacher complexity"));
    }
    Ok(summarize(&vals, SignScheme::Rademacher, true))
}

/// Hypothesis sets `H_U` for size-`m` index subsets `U` of `pool`: every
/// subset when there are at most `max_subsets`, otherwise `max_subsets`
/// uniformly random ones. The flag reports whether enumeration was complete.
pub fn subsample_sets(
    family: &dyn HypothesisFamily,
    pool: &LabeledSample,
    m: usize,
    max_subsets: usize,
    rng: &SeededRng,
) -> Result<(Vec<HypothesisSet>, bool)> {
    let n = pool.len();
    if m == 0 || m > n {
        return Err(HssError::invalid(format!("sub-sample size {m} must be in 1..={n}")));
    }
    if max_subsets == 0 {
        return Err(HssError::invalid("need at least one sub-sample"));
    }
    let total = binomial(n as u64, m as u64);
    let index_sets: Vec<Vec<usize>> = if total <= max_subsets as u128 {
        let mut all = Vec::with_capacity(total as usize);
        for_each_combination(n, m, |c| all.push(c.to_vec()));
        all
    } else {
        let mut g = rng.generator();
        (0..max_subsets).map(|_| random_combination(n, m, &mut g)).collect()
    };
    let complete = total <= max_subsets as u128;
    let sets = index_sets
        .par_iter()
        .map(|idx| family.hypothesis_set(&pool.select(idx)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((sets, complete))
}

fn pooled_sup(sets: &[HypothesisSet], t: &LabeledSample, signs: &[f64], target: Target<'_>) -> Result<SupValue> {
    let mut best = SupValue { value: f64::NEG_INFINITY, exact: true };
    for set in sets {
        let v = set.sup_weighted(t.points(), signs, target)?;
        best = SupValue { value: best.value.max(v.value), exact: best.exact && v.exact };
    }
    Ok(best)
}

/// Standard empirical Rademacher complexity `R̂_T(H_{S,T})` of the union of
/// `H_U` over size-`m` sub-samples `U ⊆ S ∪ T` (all of them when
/// `subsample_count ≥ C(2m, m)`). Upper-bounds `R̂◦_{S,T}`.
pub fn union_rademacher(
    family: &dyn HypothesisFamily,
    s: &LabeledSample,
    t: &LabeledSample,
    target: Target<'_>,
    subsample_count: usize,
    n_draws: usize,
    rng: &SeededRng,
) -> Result<EstimateReport> {
    let m = check_pair(s, t)?;
    check_draws(n_draws)?;
    let (sets, complete) = subsample_sets(family, &s.concat(t)?, m, subsample_count, &rng.fork("subsamples"))?;
    let sign_rng = rng.fork("signs");
    let vals = memoized_draws(
        n_draws,
        &sign_rng,
        |g| random_mask(g, m),
        |mask| {
            pooled_sup(&sets, t, &mask_signs(mask, m), target).map(|v| SupValue { value: v.value / m as f64, exact: v.exact })
        },
    )?;
    let mut report = summarize(&vals, SignScheme::Rademacher, false);
    report.lower_bound_of_sup |= !complete;
    Ok(report)
}

/// `H̄_{U,m}`: union of `H_S` over size-`m` sub-samples `S ⊆ U`, exhaustive
/// when `C(|U|, m) ≤ max_subsets`.
pub fn pooled_union(
    family: &dyn HypothesisFamily,
    u: &LabeledSample,
    m: usize,
    max_subsets: usize,
    rng: &SeededRng,
) -> Result<(HypothesisSet, bool)> {
    let (sets, complete) = subsample_sets(family, u, m, max_subsets, rng)?;
    Ok((HypothesisSet::union(sets)?, complete))
}

/// Monte Carlo estimate of the transductive complexity `R̂◦_{U,m}` of
/// `family_union` on `U` with `|U| = m + n`.
pub fn transductive_rademacher_mc(
    family_union: &HypothesisSet,
    u: &LabeledSample,
    m: usize,
    n: usize,
    target: Target<'_>,
    n_draws: usize,
    rng: &SeededRng,
) -> Result<EstimateReport> {
    if m == 0 || n == 0 || u.len() != m + n {
        return Err(HssError::Dimension { what: "|U| must equal m + n", expected: m + n, got: u.len() });
    }
    check_draws(n_draws)?;
    let scheme = SignScheme::Transductive { m, n };
    let len = m + n;
    let vals = (0..n_draws)
        .into_par_iter()
        .map(|j| {
            let sigma = SignVector::draw(scheme, len, &mut rng.derive(j as u64).generator());
            let v = family_union.sup_weighted(u.points(), sigma.values(), target)?;
            Ok(SupValue { value: v.value / len as f64, exact: v.exact })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&vals, scheme, false))
}

/// Massart-style bound `r_T r_{S∪T} Λ₁ √(2 ln(4m)/m)` for the L1 mixtures of
/// sample-point linear functionals.
pub fn massart_l1_bound(lambda1: f64, s: &LabeledSample, t: &LabeledSample) -> Result<f64> {
    let m = check_pair(s, t)?;
    if lambda1 < 0.0 {
        return Err(HssError::invalid("Λ₁ must be nonnegative"));
    }
    let mf = m as f64;
    let r_t = (t.sum_sq_norms() / mf).sqrt();
    let r_st = s.max_norm().max(t.max_norm());
    Ok(r_t * r_st * lambda1 * (2.0 * (4.0 * mf).ln() / mf).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearNormBound {
    /// `Λ √(Σ ‖x_i‖²) / m`
    pub tight: f64,
    /// `Λ r / √m` with `r` the largest feature norm in `T`
    pub loose: f64,
}

pub fn linear_norm_bound(lambda: f64, t: &LabeledSample) -> Result<LinearNormBound> {
    if lambda < 0.0 {
        return Err(HssError::invalid("Λ must be nonnegative"));
    }
    let m = t.len() as f64;
    Ok(LinearNormBound { tight: lambda * t.sum_sq_norms().sqrt() / m, loose: lambda * t.max_norm() / m.sqrt() })
}

/// Estimate of `R◦_m(G) = E_{S,T}[R̂◦_{S,T}]` from `n_pairs` independent
/// `(S, T)` draws, each with an `n_draws` Monte Carlo inner estimate. The
/// standard error is the spread across pairs, which includes the inner noise.
pub fn expected_rademacher(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    m: usize,
    target: Target<'_>,
    n_pairs: usize,
    n_draws: usize,
    rng: &SeededRng,
) -> Result<EstimateReport> {
    if n_pairs == 0 {
        return Err(HssError::invalid("n_pairs must be at least 1"));
    }
    let reports = (0..n_pairs)
        .into_par_iter()
        .map(|j| {
            let key = rng.derive(j as u64);
            let s = draw_sample(d, m, &key.fork("s"))?;
            let t = draw_sample(d, m, &key.fork("t"))?;
            dd_rademacher_mc(family, &s, &t, target, n_draws, &key.fork("signs"))
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<SupValue> = reports.iter().map(|r| SupValue { value: r.value, exact: !r.lower_bound_of_sup }).collect();
    let mut out = summarize(&vals, SignScheme::Rademacher, false);
    out.n_draws = n_pairs * n_draws;
    Ok(out)
}

/// Radius `√([(mβ+1)² + m²β²] ln(2/δ) / (2m))` of the concentration of
/// `R̂◦_{S,T}` around `R◦_m` for a β-stable family.
pub fn concentration_bound(beta: f64, m: usize, delta: f64) -> Result<f64> {
    crate::bounds::check_delta(delta)?;
    if beta < 0.0 || m == 0 {
        return Err(HssError::invalid("need β ≥ 0 and m ≥ 1"));
    }
    let mf = m as f64;
    Ok((((mf * beta + 1.0).powi(2) + mf * mf * beta * beta) * (2.0 / delta).ln() / (2.0 * mf)).sqrt())
}
