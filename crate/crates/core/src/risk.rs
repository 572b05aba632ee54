use crate::hypothesis::Hypothesis;
use crate::loss::LossFunction;
use crate::sample::{DiscreteDistribution, LabeledSample};

/// `R̂_S(h)`: mean loss over the sample.
pub fn empirical_risk(h: &Hypothesis, s: &LabeledSample, loss: &LossFunction) -> f64 {
    s.iter().map(|z| h.loss(z, loss)).sum::<f64>() / s.len() as f64
}

/// `R(h)`: exact expected loss under a finite-support distribution.
pub fn true_risk(h: &Hypothesis, d: &DiscreteDistribution, loss: &LossFunction) -> f64 {
    d.support().iter().zip(d.probs()).map(|(z, p)| p * h.loss(z, loss)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::LabeledPoint;

    fn pt(x: f64, y: f64) -> LabeledPoint {
        LabeledPoint::new(vec![x], y)
    }

    #[test]
    fn empirical() {
        let s = LabeledSample::new(vec![pt(0.0, 0.0), pt(1.0, 1.0)]).unwrap();
        let abs = LossFunction::absolute();
        assert_eq!(empirical_risk(&Hypothesis::linear(vec![1.0], 0.0), &s, &abs), 0.0);
        assert_eq!(empirical_risk(&Hypothesis::constant(0.5), &s, &abs), 0.5);
        let zeros = LabeledSample::new(vec![pt(0.0, 0.0), pt(2.0, 0.0)]).unwrap();
        assert_eq!(empirical_risk(&Hypothesis::constant(1.0), &zeros, &abs), 1.0);
    }

    #[test]
    fn expected() {
        let abs = LossFunction::absolute();
        let d = DiscreteDistribution::new(vec![pt(0.0, 0.0), pt(1.0, 1.0)], vec![0.25, 0.75]).unwrap();
        // losses (0, 1) under h ≡ 0
        assert_eq!(true_risk(&Hypothesis::constant(0.0), &d, &abs), 0.75);
        let s = LabeledSample::new(vec![pt(0.0, 0.3), pt(1.0, 0.9), pt(2.0, 0.1)]).unwrap();
        let h = Hypothesis::constant(0.4);
        let u = DiscreteDistribution::uniform(s.points().to_vec()).unwrap();
        assert!((true_risk(&h, &u, &abs) - empirical_risk(&h, &s, &abs)).abs() < 1e-15);
        assert!((true_risk(&h, &DiscreteDistribution::point_mass(pt(0.0, 0.9)), &abs) - 0.5).abs() < 1e-15);
    }
}
