//! Distillation: students within sup-norm `γ` of a teacher `f*_S`, with an
//! optional on-sample constraint (anti-distillation).

use serde::{Deserialize, Serialize};

use super::linalg::solve_shifted;
use crate::error::{HssError, Result};
use crate::hypothesis::{BallAroundCenter, Hypothesis, HypothesisFamily, HypothesisSet, OnSampleConstraint};
use crate::sample::LabeledSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Teacher {
    LabelMean,
    /// Gaussian-kernel ridge regression `f(x) = Σ α_i k(x_i, x)` with
    /// `α = (K + λ m I)^{-1} y`.
    KernelRidge { bandwidth: f64, lambda: f64 },
}

impl Teacher {
    pub fn fit(&self, s: &LabeledSample) -> Result<Hypothesis> {
        match self {
            Teacher::LabelMean => Ok(Hypothesis::constant(s.iter().map(|z| z.y).sum::<f64>() / s.len() as f64)),
            Teacher::KernelRidge { bandwidth, lambda } => {
                if !(*bandwidth > 0.0) || !(*lambda > 0.0) {
                    return Err(HssError::invalid("kernel bandwidth and penalty must be positive"));
                }
                let xs: Vec<Vec<f64>> = s.iter().map(|z| z.x.clone()).collect();
                let bw = *bandwidth;
                let kernel = move |a: &[f64], b: &[f64]| (-a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / (2.0 * bw * bw)).exp();
                let m = xs.len();
                let gram: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| kernel(a, b)).collect()).collect();
                let alpha = solve_shifted(&gram, &s.iter().map(|z| z.y).collect::<Vec<_>>(), lambda * m as f64)?;
                let mut params = alpha.clone();
                params.extend(xs.iter().flatten().copied());
                Ok(Hypothesis::new(params, move |x| xs.iter().zip(&alpha).map(|(xi, a)| a * kernel(xi, x)).sum()))
            }
        }
    }

    /// Sup-norm sensitivity of the teacher when labels lie in an interval of
    /// length `label_range`, if known in closed form.
    pub fn sensitivity(&self, m: usize, label_range: f64) -> Option<f64> {
        match self {
            Teacher::LabelMean => Some(label_range / m as f64),
            Teacher::KernelRidge { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StudentGrid {
    /// Students `f*_S + c` for each constant offset `c`; the grid moves with
    /// the teacher.
    Offsets { values: Vec<f64> },
    /// Fixed constant students.
    Constants { values: Vec<f64> },
    /// Fixed linear students `x ↦ w·x + b`, `b` last.
    Linear { weights: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    pub teacher: Teacher,
    pub gamma: f64,
    pub student_grid: StudentGrid,
    /// On-sample radius `Δ_anti` of anti-distillation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anti: Option<f64>,
    /// Points on which `‖h − f*_S‖_∞ ≤ γ` is checked.
    pub probes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DistillationFamily {
    pub config: DistillConfig,
}

pub fn distillation_family(config: DistillConfig) -> Result<DistillationFamily> {
    if !(config.gamma >= 0.0) || config.anti.is_some_and(|a| !(a >= 0.0)) {
        return Err(HssError::invalid("γ and Δ_anti must be nonnegative"));
    }
    if config.probes.is_empty() {
        return Err(HssError::invalid("distillation needs at least one probe point"));
    }
    Ok(DistillationFamily { config })
}

impl DistillationFamily {
    fn grid(&self, teacher: &Hypothesis) -> Vec<Hypothesis> {
        match &self.config.student_grid {
            StudentGrid::Offsets { values } => values.iter().map(|&c| teacher.shifted(&Hypothesis::constant(c))).collect(),
            StudentGrid::Constants { values } => values.iter().map(|&c| Hypothesis::constant(c)).collect(),
            StudentGrid::Linear { weights } => weights
                .iter()
                .map(|w| {
                    let (b, w) = w.split_last().map_or((0.0, &[][..]), |(b, w)| (*b, w));
                    Hypothesis::linear(w.to_vec(), b)
                })
                .collect(),
        }
    }

    pub fn ball(&self, s: &LabeledSample) -> Result<BallAroundCenter> {
        let teacher = self.config.teacher.fit(s)?;
        let grid = self.grid(&teacher);
        let sample_x: Vec<Vec<f64>> = s.iter().map(|z| z.x.clone()).collect();
        let on_sample = self.config.anti.map(|radius| OnSampleConstraint { radius, points: &sample_x });
        BallAroundCenter::filter(teacher, self.config.gamma, &grid, &self.config.probes, on_sample)
    }
}

impl HypothesisFamily for DistillationFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        Ok(HypothesisSet::Ball(self.ball(sample)?))
    }
}

/// `μ β` for a `β`-sensitive teacher.
pub fn stability_certificate(mu: f64, teacher_beta: f64) -> f64 {
    mu * teacher_beta
}

/// Leading term `√e μ (Δ_anti + β)` of the anti-distillation bound.
pub fn anti_distillation_leading_term(mu: f64, delta_anti: f64, beta: f64) -> f64 {
    std::f64::consts::E.sqrt() * mu * (delta_anti + beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::LabeledPoint;

    fn sample(ys: &[f64]) -> LabeledSample {
        LabeledSample::new(ys.iter().enumerate().map(|(i, &y)| LabeledPoint::new(vec![i as f64 / 10.0], y)).collect()).unwrap()
    }

    fn probes() -> Vec<Vec<f64>> {
        (0..11).map(|i| vec![i as f64 / 10.0]).collect()
    }

    #[test]
    fn zero_radius_leaves_teacher() {
        let fam = distillation_family(DistillConfig {
            teacher: Teacher::LabelMean,
            gamma: 0.0,
            student_grid: StudentGrid::Offsets { values: vec![-0.1, 0.0, 0.1] },
            anti: None,
            probes: probes(),
        })
        .unwrap();
        let set = fam.hypothesis_set(&sample(&[0.0, 1.0, 1.0, 0.0])).unwrap();
        let members = set.members().unwrap();
        assert_eq!(members.len(), 1);
        assert!((members[0].predict(&[0.3]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn filter_and_empty() {
        let mut cfg = DistillConfig {
            teacher: Teacher::LabelMean,
            gamma: 0.15,
            student_grid: StudentGrid::Constants { values: vec![0.0, 0.4, 0.5, 0.6, 1.0] },
            anti: None,
            probes: probes(),
        };
        let fam = distillation_family(cfg.clone()).unwrap();
        assert_eq!(fam.hypothesis_set(&sample(&[0.0, 1.0])).unwrap().members().unwrap().len(), 3);
        cfg.student_grid = StudentGrid::Constants { values: vec![0.0, 1.0] };
        let fam = distillation_family(cfg).unwrap();
        assert!(matches!(fam.hypothesis_set(&sample(&[0.0, 1.0])), Err(HssError::EmptyHypothesisSet)));
    }

    #[test]
    fn anti_constraint_only_binds_on_sample() {
        // slope students differ from the constant teacher most at x = 1, which is off-sample
        let cfg = DistillConfig {
            teacher: Teacher::LabelMean,
            gamma: 1.0,
            student_grid: StudentGrid::Linear { weights: vec![vec![0.0, 0.5], vec![0.8, 0.5], vec![2.0, 0.5]] },
            anti: Some(0.1),
            probes: probes(),
        };
        let fam = distillation_family(cfg).unwrap();
        let s = LabeledSample::new(vec![LabeledPoint::new(vec![0.0], 0.0), LabeledPoint::new(vec![0.1], 1.0)]).unwrap();
        // on-sample deviations: 0, 0.08, 0.2
        assert_eq!(fam.hypothesis_set(&s).unwrap().members().unwrap().len(), 2);
    }

    #[test]
    fn kernel_ridge_fits() {
        let t = Teacher::KernelRidge { bandwidth: 0.2, lambda: 1e-6 };
        let s = sample(&[0.0, 1.0, 0.0, 1.0]);
        let f = t.fit(&s).unwrap();
        for z in s.iter() {
            assert!((f.predict(&z.x) - z.y).abs() < 1e-3);
        }
        assert!(t.sensitivity(10, 1.0).is_none());
    }

    #[test]
    fn certificates() {
        assert!((stability_certificate(1.0, Teacher::LabelMean.sensitivity(50, 1.0).unwrap()) - 0.02).abs() < 1e-15);
        assert!((anti_distillation_leading_term(1.0, 0.1, 0.01) - 0.181_36).abs() < 1e-5);
    }
}
