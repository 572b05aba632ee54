//! Principal components regression: `H_S = {x ↦ w·Π_S x : ‖w‖ ≤ γ}` with
//! `Π_S` the projector onto the top-`k` principal subspace of `S`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{jacobi_eigen, JACOBI_TOLERANCE};
use crate::error::{HssError, Result};
use crate::hypothesis::{FeatureMapFn, FeatureMapSet, HeadFamily, HypothesisFamily, HypothesisSet};
use crate::rng::SeededRng;
use crate::sample::{draw_sample, replace_point, DiscreteDistribution, LabeledSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcrConfig {
    pub k_components: usize,
    pub norm_cap_gamma: f64,
    /// Smallest accepted gap `λ_k − λ_{k+1}` of the second-moment matrix.
    pub eigengap_lambda: f64,
    pub feature_radius_r: f64,
}

/// `Π_S` with the spectrum it came from.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigengap: f64,
}

/// Second-moment matrix `(1/m) Σ x_i x_iᵀ`.
pub fn second_moment(s: &LabeledSample) -> DMatrix<f64> {
    let d = s.dim();
    let mut c = DMatrix::zeros(d, d);
    for z in s.iter() {
        let x = DVector::from_column_slice(&z.x);
        c += &x * x.transpose();
    }
    c / s.len() as f64
}

/// Projector onto the span of the top-`k` eigenvectors of the sample's
/// second-moment matrix. Errors when the eigengap is below `min_gap`.
pub fn principal_projector(s: &LabeledSample, k: usize, min_gap: f64) -> Result<Projector> {
    let d = s.dim();
    if k == 0 || k > d || k > s.len() {
        return Err(HssError::invalid(format!("k = {k} must be in 1..=min(d = {d}, m = {})", s.len())));
    }
    let eig = jacobi_eigen(&second_moment(s), JACOBI_TOLERANCE)?;
    let next = eig.values.get(k).copied().unwrap_or(0.0);
    let gap = eig.values[k - 1] - next;
    if k < d && gap < min_gap {
        return Err(HssError::Eigengap { gap, tolerance: min_gap });
    }
    let u = eig.vectors.columns(0, k);
    Ok(Projector { matrix: u * u.transpose(), eigenvalues: eig.values, eigengap: gap })
}

/// Idempotence, symmetry and trace checks, each to `tol`.
pub fn projector_invariants(p: &DMatrix<f64>, k: usize, tol: f64) -> bool {
    (p * p - p).amax() <= tol && (p - p.transpose()).amax() <= tol && (p.trace() - k as f64).abs() <= tol
}

/// Data-independent head candidates: `±γ e_j` for each coordinate.
fn head_candidates(d: usize, gamma: f64) -> Vec<Vec<f64>> {
    (0..d)
        .flat_map(|j| {
            [1.0, -1.0].map(|s| {
                let mut w = vec![0.0; d];
                w[j] = s * gamma;
                w
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PcrFamily {
    pub config: PcrConfig,
}

impl HypothesisFamily for PcrFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let proj = principal_projector(sample, self.config.k_components, self.config.eigengap_lambda)?;
        let p = proj.matrix;
        let map: FeatureMapFn = Arc::new(move |x: &[f64]| (&p * DVector::from_column_slice(x)).iter().copied().collect());
        let gamma = self.config.norm_cap_gamma;
        Ok(HypothesisSet::FeatureMap(FeatureMapSet::new(
            map,
            HeadFamily::NormBall { radius: gamma, candidates: head_candidates(sample.dim(), gamma) },
        )?))
    }
}

pub fn pcr_family(config: PcrConfig) -> Result<PcrFamily> {
    if config.k_components == 0 || !(config.norm_cap_gamma >= 0.0) || !(config.eigengap_lambda >= 0.0) || !(config.feature_radius_r >= 0.0) {
        return Err(HssError::invalid("PCR config needs k ≥ 1 and nonnegative γ, λ, r"));
    }
    Ok(PcrFamily { config })
}

/// `γ r / √m`.
pub fn rademacher_certificate(gamma: f64, r: f64, m: usize) -> f64 {
    gamma * r / (m as f64).sqrt()
}

/// Mean operator-norm change `‖Π_S − Π_{S'}‖₂` under one-point replacements,
/// averaged over `n_samples` samples and `n_perturbations` replacements each.
pub fn projector_sensitivity(
    d: &DiscreteDistribution,
    m: usize,
    k: usize,
    n_samples: usize,
    n_perturbations: usize,
    rng: &SeededRng,
) -> Result<f64> {
    use rayon::prelude::*;
    let per_sample = (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let key = rng.derive(j as u64);
            let s = draw_sample(d, m, &key.fork("sample"))?;
            let base = principal_projector(&s, k, 0.0)?.matrix;
            let mut g = key.fork("perturb").generator();
            let mut total = 0.0;
            for t in 0..n_perturbations {
                let s2 = replace_point(&s, t % m, d.sample_point(&mut g))?;
                let p2 = principal_projector(&s2, k, 0.0)?.matrix;
                total += (&base - p2).singular_values().max();
            }
            Ok(total / n_perturbations as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_sample.iter().sum::<f64>() / n_samples as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::LabeledPoint;

    fn sample(rows: &[[f64; 3]]) -> LabeledSample {
        LabeledSample::new(rows.iter().map(|r| LabeledPoint::new(r.to_vec(), 0.0)).collect()).unwrap()
    }

    #[test]
    fn coordinate_subspace() {
        let s = sample(&[[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [2.0, 0.3, 0.0], [-1.0, -0.4, 0.0]]);
        let p = principal_projector(&s, 2, 1e-6).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((p.matrix.clone() - expect).amax() < 1e-9);
        assert!(projector_invariants(&p.matrix, 2, 1e-9));
    }

    #[test]
    fn eigengap_is_reported() {
        let s = sample(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]);
        assert!(matches!(principal_projector(&s, 1, 1e-6), Err(HssError::Eigengap { .. })));
    }

    #[test]
    fn certificate_value() {
        assert!((rademacher_certificate(1.0, 1.0, 100) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [50.0, 100.0, 200.0, 400.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 / x).collect();
        assert!((log_log_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }
}
