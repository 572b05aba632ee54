//! Brute-force ground truth at small scale. Enumerations are exhaustive and
//! lexicographic; exceeding a budget is an error, never a fallback to
//! sampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, combinations, complement};
use crate::complexity::SignScheme;
use crate::error::{HssError, Result};
use crate::hypothesis::{Hypothesis, HypothesisFamily, HypothesisSet, Target};
use crate::loss::LossFunction;
use crate::mechanisms::expected_score;
use crate::risk::{empirical_risk, true_risk};
use crate::rng::SeededRng;
use crate::sample::{draw_sample, DiscreteDistribution, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBudget {
    pub max_sign_vectors: u128,
    pub max_partitions: u128,
    pub max_hypotheses: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_sign_vectors: 1 << 20, max_partitions: 12_870, max_hypotheses: 10_000 }
    }
}

impl OracleBudget {
    fn hypotheses(&self, set: &HypothesisSet) -> Result<Vec<Hypothesis>> {
        let members = set.members()?;
        if members.len() > self.max_hypotheses {
            return Err(HssError::Budget { what: "hypotheses", needed: members.len() as u128, budget: self.max_hypotheses as u128 });
        }
        Ok(members)
    }
}

/// `sup_{h ∈ H} R(h) − R̂_S(h)` over an enumerated finite set.
pub fn sup_gap_of_set(set: &HypothesisSet, d: &DiscreteDistribution, s: &LabeledSample, loss: &LossFunction, budget: &OracleBudget) -> Result<f64> {
    Ok(budget
        .hypotheses(set)?
        .iter()
        .map(|h| true_risk(h, d, loss) - empirical_risk(h, s, loss))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `Ψ(S, S) = sup_{h ∈ H_S} R(h) − R̂_S(h)`.
pub fn exact_sup_gap(family: &dyn HypothesisFamily, d: &DiscreteDistribution, s: &LabeledSample, loss: &LossFunction, budget: &OracleBudget) -> Result<f64> {
    sup_gap_of_set(&family.hypothesis_set(s)?, d, s, loss, budget)
}

/// Target values of every member at every point of `u`.
fn value_table(set: &HypothesisSet, u: &LabeledSample, target: Target<'_>, budget: &OracleBudget) -> Result<Vec<Vec<f64>>> {
    Ok(budget.hypotheses(set)?.iter().map(|h| u.iter().map(|z| target.value(h, z)).collect()).collect())
}

/// Exact `R̂◦_{U,m}` for a finite pooled set by enumerating all `2^{m+n}`
/// transductive sign patterns (bit `i` set ⇔ negative level at `i`).
pub fn exact_transductive_rademacher(
    set: &HypothesisSet,
    u: &LabeledSample,
    m: usize,
    n: usize,
    target: Target<'_>,
    budget: &OracleBudget,
) -> Result<f64> {
    let len = m + n;
    if m == 0 || n == 0 || u.len() != len {
        return Err(HssError::Dimension { what: "|U| must equal m + n", expected: len, got: u.len() });
    }
    if len >= 127 || (1u128 << len) > budget.max_sign_vectors {
        return Err(HssError::Budget { what: "sign vectors", needed: 1u128.checked_shl(len as u32).unwrap_or(u128::MAX), budget: budget.max_sign_vectors });
    }
    let table = value_table(set, u, target, budget)?;
    let scheme = SignScheme::Transductive { m, n };
    let (pos, neg) = scheme.levels();
    let p = scheme.positive_prob();
    let terms: Vec<f64> = (0..1u64 << len)
        .into_par_iter()
        .map(|mask| {
            let k = mask.count_ones() as i32;
            let weight = p.powi(len as i32 - k) * (1.0 - p).powi(k);
            let sup = table
                .iter()
                .map(|row| row.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { neg * v } else { pos * v }).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            weight * sup / len as f64
        })
        .collect();
    Ok(terms.iter().sum())
}

/// `E[Φ(S)]` with `Φ(S) = sup_{h ∈ H̄} R̂_T(h) − R̂_S(h)`, averaged over all
/// `C(m+n, m)` splits of `U` into `S` (lexicographic index sets) and
/// `T = U \ S`.
pub fn exact_transductive_expectation(
    set: &HypothesisSet,
    u: &LabeledSample,
    m: usize,
    n: usize,
    target: Target<'_>,
    budget: &OracleBudget,
) -> Result<f64> {
    let len = m + n;
    if m == 0 || n == 0 || u.len() != len {
        return Err(HssError::Dimension { what: "|U| must equal m + n", expected: len, got: u.len() });
    }
    let count = binomial(len as u64, m as u64);
    if count > budget.max_partitions {
        return Err(HssError::Budget { what: "partitions", needed: count, budget: budget.max_partitions });
    }
    let table = value_table(set, u, target, budget)?;
    let splits = combinations(len, m);
    let phis: Vec<f64> = splits
        .par_iter()
        .map(|s_idx| {
            let t_idx = complement(len, s_idx);
            table
                .iter()
                .map(|row| t_idx.iter().map(|&i| row[i]).sum::<f64>() / n as f64 - s_idx.iter().map(|&i| row[i]).sum::<f64>() / m as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(phis.iter().sum::<f64>() / count as f64)
}

/// `√(ln(2e)(m+n)³ / (2(mn)²))`, equal to `2√(ln(2e)/m)` when `m = n`.
pub fn lemma_trans_slack(m: usize, n: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    ((2.0 * std::f64::consts::E).ln() * (mf + nf).powi(3) / (2.0 * (mf * nf).powi(2))).sqrt()
}

/// `E_{k∼A}[f_k]` in closed form.
pub fn exact_expmech_expectation(scores: &[f64], epsilon: f64, sensitivity: f64, include_zero_arm: bool) -> Result<f64> {
    expected_score(scores, epsilon, sensitivity, include_zero_arm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationCheck {
    /// `P̂[sup R − R̂_S > ε]`
    pub lhs: f64,
    /// `P̂[sup R̂_T − R̂_S > ε/2]`
    pub ghost: f64,
    /// `5(σ_lhs + 2σ_ghost)` with binomial standard errors.
    pub slack: f64,
    pub holds: bool,
}

/// Monte Carlo check of `P[sup_{H_S} R − R̂_S > ε] ≤ 2 P[sup_{H_S} R̂_T − R̂_S > ε/2]`
/// for `n ε² ≥ 2` with `|T| = n`.
#[allow(clippy::too_many_arguments)]
pub fn symmetrization_check(
    family: &dyn HypothesisFamily,
    d: &DiscreteDistribution,
    loss: &LossFunction,
    m: usize,
    n: usize,
    epsilon: f64,
    n_trials: usize,
    rng: &SeededRng,
) -> Result<SymmetrizationCheck> {
    if (n as f64) * epsilon * epsilon < 2.0 {
        return Err(HssError::invalid("symmetrization needs n ε² ≥ 2"));
    }
    if n_trials == 0 {
        return Err(HssError::invalid("n_trials must be at least 1"));
    }
    let budget = OracleBudget::default();
    let events = (0..n_trials)
        .into_par_iter()
        .map(|j| {
            let key = rng.derive(j as u64);
            let s = draw_sample(d, m, &key.fork("S"))?;
            let t = draw_sample(d, n, &key.fork("T"))?;
            let members = budget.hypotheses(&family.hypothesis_set(&s)?)?;
            let (mut gap, mut ghost) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for h in &members {
                let rs = empirical_risk(h, &s, loss);
                gap = gap.max(true_risk(h, d, loss) - rs);
                ghost = ghost.max(empirical_risk(h, &t, loss) - rs);
            }
            Ok((gap > epsilon, ghost > epsilon / 2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let nt = n_trials as f64;
    let lhs = events.iter().filter(|e| e.0).count() as f64 / nt;
    let ghost = events.iter().filter(|e| e.1).count() as f64 / nt;
    let se = |q: f64| (q * (1.0 - q) / nt).sqrt();
    let slack = 5.0 * (se(lhs) + 2.0 * se(ghost));
    Ok(SymmetrizationCheck { lhs, ghost, slack, holds: lhs <= 2.0 * ghost + slack })
}
