//! Bounded losses `ℓ: Y' × Y → [0, 1]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type LossFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum LossKind {
    /// `min(|a - y|, 1)`
    Absolute,
    /// `min((a - y)^2, 1)`
    Squared,
    /// `min(max(0, 1 - y a), 1)`
    Hinge,
    /// User-supplied loss; outputs are clipped into `[0, 1]`.
    Custom { name: String, f: LossFn },
}

impl fmt::Debug for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Absolute => write!(f, "Absolute"),
            LossKind::Squared => write!(f, "Squared"),
            LossKind::Hinge => write!(f, "Hinge"),
            LossKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A loss clipped into `[0,1]` together with its declared Lipschitz
/// constant `μ` in the prediction.
#[derive(Debug, Clone)]
pub struct LossFunction {
    kind: LossKind,
    lipschitz_mu: f64,
}

impl LossFunction {
    pub fn absolute() -> Self {
        Self { kind: LossKind::Absolute, lipschitz_mu: 1.0 }
    }

    pub fn squared() -> Self {
        Self { kind: LossKind::Squared, lipschitz_mu: 2.0 }
    }

    /// Hinge loss for labels in `{-1, +1}`.
    pub fn hinge() -> Self {
        Self { kind: LossKind::Hinge, lipschitz_mu: 1.0 }
    }

    pub fn custom(name: impl Into<String>, lipschitz_mu: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: LossKind::Custom { name: name.into(), f: Arc::new(f) }, lipschitz_mu }
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_mu
    }

    pub fn eval(&self, a: f64, y: f64) -> f64 {
        let raw = match &self.kind {
            LossKind::Absolute => (a - y).abs(),
            LossKind::Squared => (a - y) * (a - y),
            LossKind::Hinge => (1.0 - y * a).max(0.0),
            LossKind::Custom { f, .. } => f(a, y),
        };
        if raw.is_nan() {
            1.0
        } else {
            raw.clamp(0.0, 1.0)
        }
    }

    /// Exact `(min, max)` of `ℓ(a, y)` over `a ∈ [lo, hi]`.
    ///
    /// The built-in kinds are clipped convex functions of `a`, so the max sits
    /// at an endpoint and the min at the clamped unconstrained minimizer.
    /// Returns `None` for custom losses.
    pub fn range_over(&self, lo: f64, hi: f64, y: f64) -> Option<(f64, f64)> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let argmin = match &self.kind {
            LossKind::Absolute | LossKind::Squared => y,
            LossKind::Hinge => {
                if y == 0.0 {
                    lo
                } else {
                    1.0 / y
                }
            }
            LossKind::Custom { .. } => return None,
        };
        let lmin = self.eval(argmin.clamp(lo, hi), y);
        let lmax = self.eval(lo, y).max(self.eval(hi, y));
        Some((lmin, lmax))
    }

    /// Largest observed `|ℓ(a,y) - ℓ(a',y)| / |a - a'|` over consecutive grid
    /// points; the declared constant holds on the grid iff this is `≤ μ`.
    pub fn probe_lipschitz(&self, grid: &[f64], labels: &[f64]) -> f64 {
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for &y in labels {
            for w in sorted.windows(2) {
                let da = w[1] - w[0];
                if da > 0.0 {
                    worst = worst.max((self.eval(w[1], y) - self.eval(w[0], y)).abs() / da);
                }
            }
        }
        worst
    }

    pub fn check_lipschitz(&self, grid: &[f64], labels: &[f64]) -> bool {
        self.probe_lipschitz(grid, labels) <= self.lipschitz_mu * (1.0 + 1e-9)
    }
}

/// Serializable choice among the built-in losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossSpec {
    #[default]
    Absolute,
    Squared,
    Hinge,
}

impl From<LossSpec> for LossFunction {
    fn from(spec: LossSpec) -> Self {
        match spec {
            LossSpec::Absolute => LossFunction::absolute(),
            LossSpec::Squared => LossFunction::squared(),
            LossSpec::Hinge => LossFunction::hinge(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect()
    }

    #[test]
    fn declared_lipschitz_constants_hold() {
        let g = grid();
        assert!(LossFunction::absolute().check_lipschitz(&g, &[0.0, 0.3, 1.0]));
        assert!(LossFunction::squared().check_lipschitz(&g, &[0.0, 0.3, 1.0]));
        assert!(LossFunction::hinge().check_lipschitz(&g, &[-1.0, 1.0]));
        let wrong = LossFunction::custom("steep", 1.0, |a, y| 3.0 * (a - y).abs());
        assert!(!wrong.check_lipschitz(&g, &[0.0]));
    }

    #[test]
    fn clipping() {
        assert_eq!(LossFunction::absolute().eval(5.0, 0.0), 1.0);
        assert_eq!(LossFunction::squared().eval(0.5, 0.0), 0.25);
        assert_eq!(LossFunction::hinge().eval(-3.0, 1.0), 1.0);
        assert_eq!(LossFunction::hinge().eval(2.0, 1.0), 0.0);
        assert_eq!(LossFunction::custom("neg", 0.0, |_, _| -1.0).eval(0.0, 0.0), 0.0);
    }

    #[test]
    fn custom_range_is_none() {
        assert!(LossFunction::custom("c", 1.0, |a, _| a).range_over(0.0, 1.0, 0.0).is_none());
    }

    proptest! {
        #[test]
        fn loss_in_unit_interval(a in -10.0f64..10.0, y in -2.0f64..2.0) {
            for l in [LossFunction::absolute(), LossFunction::squared(), LossFunction::hinge()] {
                let v = l.eval(a, y);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn range_matches_dense_scan(lo in -2.0f64..2.0, w in 0.0f64..2.0, y in prop::sample::select(vec![-1.0, 0.0, 0.3, 1.0])) {
            let hi = lo + w;
            for l in [LossFunction::absolute(), LossFunction::squared(), LossFunction::hinge()] {
                let (mn, mx) = l.range_over(lo, hi, y).unwrap();
                let mut smin = f64::INFINITY;
                let mut smax = f64::NEG_INFINITY;
                for i in 0..=2000 {
                    let a = lo + w * i as f64 / 2000.0;
                    let v = l.eval(a, y);
                    smin = smin.min(v);
                    smax = smax.max(v);
                }
                prop_assert!(mn <= smin + 1e-12);
                prop_assert!((mx - smax).abs() < 1e-12);
                // the scan's min is within one grid step of the exact min
                prop_assert!(smin - mn <= l.lipschitz() * w / 2000.0 + 1e-12);
            }
        }
    }
}
