//! Hypotheses, data-dependent hypothesis sets `H_S`, and the supremum
//! primitives every estimator is built on.

use std::fmt;
use std::sync::Arc;

use crate::error::{HssError, Result};
use crate::loss::LossFunction;
use crate::sample::{LabeledPoint, LabeledSample};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FeatureMapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A deterministic predictor `X → R` plus the parameters that identify it.
#[derive(Clone)]
pub struct Hypothesis {
    evaluator: Evaluator,
    params: Vec<f64>,
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hypothesis").field("params", &self.params).finish()
    }
}

impl Hypothesis {
    pub fn new(params: Vec<f64>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { evaluator: Arc::new(f), params }
    }

    pub fn from_evaluator(params: Vec<f64>, evaluator: Evaluator) -> Self {
        Self { evaluator, params }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c], move |_| c)
    }

    pub fn linear(weights: Vec<f64>, bias: f64) -> Self {
        let w = weights.clone();
        let mut params = weights;
        params.push(bias);
        Self::new(params, move |x| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias)
    }

    /// Lookup hypothesis: predicts `values[x[0]]`, for instances whose first
    /// feature is a point id. Out-of-range ids predict 0.
    pub fn table(values: Vec<f64>) -> Self {
        let v = values.clone();
        Self::new(values, move |x| {
            let id = x.first().copied().unwrap_or(-1.0);
            if id >= 0.0 && (id as usize) < v.len() {
                v[id as usize]
            } else {
                0.0
            }
        })
    }

    /// `x ↦ Σ_j weights_j f_j(x)`.
    pub fn mixture(anchors: &[Hypothesis], weights: Vec<f64>) -> Self {
        let evals: Vec<Evaluator> = anchors.iter().map(|h| h.evaluator.clone()).collect();
        let w = weights.clone();
        Self::new(weights, move |x| evals.iter().zip(&w).filter(|(_, &a)| a != 0.0).map(|(f, a)| a * f(x)).sum())
    }

    /// `x ↦ self(x) + offset(x)`.
    pub fn shifted(&self, offset: &Hypothesis) -> Self {
        let (f, g) = (self.evaluator.clone(), offset.evaluator.clone());
        let mut params = self.params.clone();
        params.extend_from_slice(&offset.params);
        Self::new(params, move |x| f(x) + g(x))
    }

    /// `x ↦ head(map(x))`.
    pub fn compose(map: &FeatureMapFn, head: &Hypothesis) -> Self {
        let (m, h) = (map.clone(), head.evaluator.clone());
        Self::new(head.params.clone(), move |x| h(&m(x)))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn loss(&self, z: &LabeledPoint, loss: &LossFunction) -> f64 {
        loss.eval(self.predict(&z.x), z.y)
    }
}

/// Whether a supremum is taken over raw predictions `h(x)` or over the loss
/// class `z ↦ L(h, z)`.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Loss(&'a LossFunction),
    Raw,
}

impl Target<'_> {
    #[inline]
    pub fn value(&self, h: &Hypothesis, z: &LabeledPoint) -> f64 {
        self.of_prediction(h.predict(&z.x), z.y)
    }

    #[inline]
    pub fn of_prediction(&self, a: f64, y: f64) -> f64 {
        match self {
            Target::Loss(l) => l.eval(a, y),
            Target::Raw => a,
        }
    }
}

/// A supremum together with whether it is exact or only a candidate-search
/// lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupValue {
    pub value: f64,
    pub exact: bool,
}

impl SupValue {
    fn combine(self, other: SupValue) -> SupValue {
        SupValue { value: self.value.max(other.value), exact: self.exact && other.exact }
    }
}

/// Feasible mixing weights of an [`L1Mix`] set.
#[derive(Debug, Clone, PartialEq)]
pub enum MixConstraint {
    /// `‖α‖₁ ≤ total`, no sign constraint.
    L1Ball { total: f64 },
    /// Simplex with every weight at most `cap`.
    CappedSimplex { cap: f64 },
    /// Simplex intersected with the L1 ball of `radius` around `center`.
    SimplexBall { center: Vec<f64>, radius: f64 },
}

impl MixConstraint {
    fn validate(&self, k: usize) -> Result<()> {
        match self {
            MixConstraint::L1Ball { total } if *total < 0.0 || !total.is_finite() => {
                Err(HssError::invalid("L1 ball total must be finite and nonnegative"))
            }
            MixConstraint::CappedSimplex { cap } if !cap.is_finite() || *cap * (k as f64) < 1.0 - 1e-12 => {
                Err(HssError::invalid(format!("capped simplex with cap {cap} over {k} anchors is empty")))
            }
            MixConstraint::SimplexBall { center, radius } => {
                if center.len() != k {
                    return Err(HssError::Dimension { what: "simplex center", expected: k, got: center.len() });
                }
                let s: f64 = center.iter().sum();
                if center.iter().any(|&a| a < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(HssError::invalid("simplex center must be a distribution"));
                }
                if *radius < 0.0 || !radius.is_finite() {
                    return Err(HssError::invalid("L1 radius must be finite and nonnegative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Exact `max_α c·α` over the constraint set and a maximizer.
    pub fn sup_linear(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let k = c.len();
        let mut alpha = vec![0.0; k];
        match self {
            MixConstraint::L1Ball { total } => {
                if k == 0 || *total == 0.0 {
                    return (0.0, alpha);
                }
                let j = (0..k).max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()).then(b.cmp(&a))).unwrap();
                alpha[j] = total * if c[j] < 0.0 { -1.0 } else { 1.0 };
                (total * c[j].abs(), alpha)
            }
            MixConstraint::CappedSimplex { cap } => {
                let mut order: Vec<usize> = (0..k).collect();
                order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
                water_fill(&order, *cap, &mut alpha);
                (dot(c, &alpha), alpha)
            }
            MixConstraint::SimplexBall { center, radius } => {
                alpha.copy_from_slice(center);
                let best = (0..k).max_by(|&a, &b| c[a].total_cmp(&c[b]).then(b.cmp(&a))).unwrap();
                let mut budget = (radius / 2.0).min(1.0 - center[best]);
                let mut donors: Vec<usize> = (0..k).filter(|&i| i != best).collect();
                donors.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
                for i in donors {
                    if budget <= 0.0 || c[i] >= c[best] {
                        break;
                    }
                    let t = budget.min(alpha[i]);
                    alpha[i] -= t;
                    alpha[best] += t;
                    budget -= t;
                }
                (dot(c, &alpha), alpha)
            }
        }
    }

    /// Deterministic, data-independent candidate weights: the center (or
    /// uniform point) and a family of vertices. Position `j` means the same
    /// weights for every sample.
    pub fn candidate_weights(&self, k: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        match self {
            MixConstraint::L1Ball { total } => {
                out.push(vec![0.0; k]);
                for j in 0..k {
                    for s in [1.0, -1.0] {
                        let mut a = vec![0.0; k];
                        a[j] = s * total;
                        out.push(a);
                    }
                }
            }
            MixConstraint::CappedSimplex { cap } => {
                out.push(vec![1.0 / k as f64; k]);
                for j in 0..k {
                    let order: Vec<usize> = (0..k).map(|i| (j + i) % k).collect();
                    let mut a = vec![0.0; k];
                    water_fill(&order, *cap, &mut a);
                    out.push(a);
                }
            }
            MixConstraint::SimplexBall { center, radius } => {
                out.push(center.clone());
                let half = radius / 2.0;
                for j in 0..k {
                    // move mass into j from all others proportionally
                    let rest = 1.0 - center[j];
                    let t = half.min(rest);
                    let mut a = center.clone();
                    if rest > 0.0 {
                        for (i, ai) in a.iter_mut().enumerate() {
                            if i != j {
                                *ai -= t * center[i] / rest;
                            }
                        }
                        a[j] += t;
                    }
                    out.push(a);
                }
                for i in 0..k {
                    for j in 0..k {
                        if i != j {
                            let t = half.min(center[i]);
                            let mut a = center.clone();
                            a[i] -= t;
                            a[j] += t;
                            out.push(a);
                        }
                    }
                }
            }
        }
        out
    }

    /// Whether `alpha` is feasible up to `tol`.
    pub fn contains(&self, alpha: &[f64], tol: f64) -> bool {
        match self {
            MixConstraint::L1Ball { total } => alpha.iter().map(|a| a.abs()).sum::<f64>() <= total + tol,
            MixConstraint::CappedSimplex { cap } => {
                (alpha.iter().sum::<f64>() - 1.0).abs() <= tol && alpha.iter().all(|&a| a >= -tol && a <= cap + tol)
            }
            MixConstraint::SimplexBall { center, radius } => {
                (alpha.iter().sum::<f64>() - 1.0).abs() <= tol
                    && alpha.iter().all(|&a| a >= -tol)
                    && alpha.iter().zip(center).map(|(a, b)| (a - b).abs()).sum::<f64>() <= radius + tol
            }
        }
    }
}

fn water_fill(order: &[usize], cap: f64, alpha: &mut [f64]) {
    let mut remaining = 1.0f64;
    for &j in order {
        if remaining <= 0.0 {
            break;
        }
        let t = cap.min(remaining);
        alpha[j] = t;
        remaining -= t;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `{ Σ_j α_j f_j : α ∈ constraint }` over anchor predictors `f_j`.
#[derive(Debug, Clone)]
pub struct L1Mix {
    anchors: Vec<Hypothesis>,
    constraint: MixConstraint,
}

impl L1Mix {
    pub fn new(anchors: Vec<Hypothesis>, constraint: MixConstraint) -> Result<Self> {
        if anchors.is_empty() {
            return Err(HssError::EmptyHypothesisSet);
        }
        constraint.validate(anchors.len())?;
        Ok(Self { anchors, constraint })
    }

    pub fn anchors(&self) -> &[Hypothesis] {
        &self.anchors
    }

    pub fn constraint(&self) -> &MixConstraint {
        &self.constraint
    }

    fn anchor_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.anchors.iter().map(|f| f.predict(x)).collect()
    }

    /// Exact `[min, max]` of `Σ α_j f_j(x)` over feasible `α`.
    pub fn prediction_interval(&self, x: &[f64]) -> (f64, f64) {
        let c = self.anchor_predictions(x);
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        (-self.constraint.sup_linear(&neg).0, self.constraint.sup_linear(&c).0)
    }
}

/// Members of a candidate grid within sup-norm `gamma` of `center`
/// (checked on a probe grid), already filtered.
#[derive(Debug, Clone)]
pub struct BallAroundCenter {
    pub center: Hypothesis,
    pub gamma: f64,
    members: Vec<Hypothesis>,
}

/// On-sample constraint `‖(h − center) 1_S‖_∞ ≤ radius`.
#[derive(Debug, Clone)]
pub struct OnSampleConstraint<'a> {
    pub radius: f64,
    pub points: &'a [Vec<f64>],
}

impl BallAroundCenter {
    pub fn filter(
        center: Hypothesis,
        gamma: f64,
        grid: &[Hypothesis],
        probes: &[Vec<f64>],
        on_sample: Option<OnSampleConstraint<'_>>,
    ) -> Result<Self> {
        let tol = 1e-12;
        let within = |h: &Hypothesis, xs: &[Vec<f64>], r: f64| xs.iter().all(|x| (h.predict(x) - center.predict(x)).abs() <= r + tol);
        let members: Vec<Hypothesis> = grid
            .iter()
            .filter(|h| within(h, probes, gamma))
            .filter(|h| on_sample.as_ref().is_none_or(|c| within(h, c.points, c.radius)))
            .cloned()
            .collect();
        if members.is_empty() {
            return Err(HssError::EmptyHypothesisSet);
        }
        Ok(Self { center, gamma, members })
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }
}

/// Head family composed with a learned feature map.
#[derive(Debug, Clone)]
pub enum HeadFamily {
    Finite(Vec<Hypothesis>),
    /// Linear heads `u ↦ w·u` with `‖w‖₂ ≤ radius`; `candidates` are the
    /// weight vectors tried when no closed form applies.
    NormBall { radius: f64, candidates: Vec<Vec<f64>> },
}

#[derive(Clone)]
pub struct FeatureMapSet {
    map: FeatureMapFn,
    heads: HeadFamily,
}

impl fmt::Debug for FeatureMapSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMapSet").field("heads", &self.heads).finish()
    }
}

impl FeatureMapSet {
    pub fn new(map: FeatureMapFn, heads: HeadFamily) -> Result<Self> {
        match &heads {
            HeadFamily::Finite(h) if h.is_empty() => return Err(HssError::EmptyHypothesisSet),
            HeadFamily::NormBall { radius, .. } if *radius < 0.0 => {
                return Err(HssError::invalid("norm-ball radius must be nonnegative"))
            }
            _ => {}
        }
        Ok(Self { map, heads })
    }

    pub fn map(&self) -> &FeatureMapFn {
        &self.map
    }

    pub fn heads(&self) -> &HeadFamily {
        &self.heads
    }

    fn features(&self, points: &[LabeledPoint]) -> Vec<Vec<f64>> {
        points.iter().map(|z| (self.map)(&z.x)).collect()
    }

    fn head_hypotheses(&self) -> Vec<Hypothesis> {
        match &self.heads {
            HeadFamily::Finite(h) => h.clone(),
            HeadFamily::NormBall { candidates, .. } => candidates.iter().map(|w| Hypothesis::linear(w.clone(), 0.0)).collect(),
        }
    }
}

/// A data-dependent hypothesis set `H_S`.
#[derive(Debug, Clone)]
pub enum HypothesisSet {
    Finite(Vec<Hypothesis>),
    L1Mix(L1Mix),
    Ball(BallAroundCenter),
    FeatureMap(FeatureMapSet),
    /// Union of sets, e.g. `H_{S,T}` or the pooled set over sub-samples of `U`.
    Union(Vec<HypothesisSet>),
}

impl HypothesisSet {
    pub fn finite(members: Vec<Hypothesis>) -> Result<Self> {
        if members.is_empty() {
            return Err(HssError::EmptyHypothesisSet);
        }
        Ok(HypothesisSet::Finite(members))
    }

    pub fn singleton(h: Hypothesis) -> Self {
        HypothesisSet::Finite(vec![h])
    }

    pub fn union(parts: Vec<HypothesisSet>) -> Result<Self> {
        if parts.is_empty() {
            return Err(HssError::EmptyHypothesisSet);
        }
        Ok(HypothesisSet::Union(parts))
    }

    /// True when the set is an explicit finite list, so sups are exact.
    pub fn is_finite(&self) -> bool {
        match self {
            HypothesisSet::Finite(_) | HypothesisSet::Ball(_) => true,
            HypothesisSet::FeatureMap(f) => matches!(f.heads, HeadFamily::Finite(_)),
            HypothesisSet::L1Mix(_) => false,
            HypothesisSet::Union(p) => p.iter().all(HypothesisSet::is_finite),
        }
    }

    /// All members of a finite set.
    pub fn members(&self) -> Result<Vec<Hypothesis>> {
        if !self.is_finite() {
            return Err(HssError::NotFinite("member enumeration"));
        }
        Ok(self.candidates())
    }

    /// Members of a finite set, or a deterministic candidate enumeration of a
    /// continuous one. Candidate positions are parameter-matched across
    /// samples for the same family.
    pub fn candidates(&self) -> Vec<Hypothesis> {
        match self {
            HypothesisSet::Finite(h) => h.clone(),
            HypothesisSet::Ball(b) => b.members.clone(),
            HypothesisSet::L1Mix(mix) => mix
                .constraint
                .candidate_weights(mix.anchors.len())
                .into_iter()
                .map(|a| Hypothesis::mixture(&mix.anchors, a))
                .collect(),
            HypothesisSet::FeatureMap(f) => f.head_hypotheses().iter().map(|h| Hypothesis::compose(&f.map, h)).collect(),
            HypothesisSet::Union(p) => p.iter().flat_map(HypothesisSet::candidates).collect(),
        }
    }

    /// `sup_{h ∈ H} Σ_i weights_i · g_h(z_i)` with `g_h` chosen by `target`.
    pub fn sup_weighted(&self, points: &[LabeledPoint], weights: &[f64], target: Target<'_>) -> Result<SupValue> {
        if points.len() != weights.len() {
            return Err(HssError::Dimension { what: "weights", expected: points.len(), got: weights.len() });
        }
        match self {
            HypothesisSet::Finite(h) => finite_sup(h, points, weights, target),
            HypothesisSet::Ball(b) => finite_sup(&b.members, points, weights, target),
            HypothesisSet::L1Mix(mix) => Ok(mix_sup(mix, points, weights, target)),
            HypothesisSet::FeatureMap(f) => feature_sup(f, points, weights, target),
            HypothesisSet::Union(parts) => {
                let mut acc: Option<SupValue> = None;
                for p in parts {
                    let v = p.sup_weighted(points, weights, target)?;
                    acc = Some(acc.map_or(v, |a| a.combine(v)));
                }
                acc.ok_or(HssError::EmptyHypothesisSet)
            }
        }
    }

    /// `(inf_h g_h(z), sup_h g_h(z), exact)` at a single point.
    pub fn range_at(&self, z: &LabeledPoint, target: Target<'_>) -> Result<(f64, f64, bool)> {
        let from_candidates = |c: &[Hypothesis]| -> Result<(f64, f64)> {
            if c.is_empty() {
                return Err(HssError::EmptyHypothesisSet);
            }
            Ok(c.iter().map(|h| target.value(h, z)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))))
        };
        match self {
            HypothesisSet::Finite(h) => from_candidates(h).map(|(a, b)| (a, b, true)),
            HypothesisSet::Ball(b) => from_candidates(&b.members).map(|(a, b)| (a, b, true)),
            HypothesisSet::L1Mix(mix) => {
                let (lo, hi) = mix.prediction_interval(&z.x);
                interval_range(lo, hi, z.y, target).map_or_else(|| from_candidates(&self.candidates()).map(|(a, b)| (a, b, false)), |(a, b)| Ok((a, b, true)))
            }
            HypothesisSet::FeatureMap(f) => match &f.heads {
                HeadFamily::Finite(h) => {
                    let phi = (f.map)(&z.x);
                    let vals = h.iter().map(|head| target.of_prediction(head.predict(&phi), z.y));
                    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    Ok((lo, hi, true))
                }
                HeadFamily::NormBall { radius, .. } => {
                    let r = radius * norm(&(f.map)(&z.x));
                    interval_range(-r, r, z.y, target).map_or_else(|| from_candidates(&self.candidates()).map(|(a, b)| (a, b, false)), |(a, b)| Ok((a, b, true)))
                }
            },
            HypothesisSet::Union(parts) => {
                let mut out = (f64::INFINITY, f64::NEG_INFINITY, true);
                for p in parts {
                    let (a, b, e) = p.range_at(z, target)?;
                    out = (out.0.min(a), out.1.max(b), out.2 && e);
                }
                Ok(out)
            }
        }
    }
}

fn interval_range(lo: f64, hi: f64, y: f64, target: Target<'_>) -> Option<(f64, f64)> {
    match target {
        Target::Raw => Some((lo, hi)),
        Target::Loss(l) => l.range_over(lo, hi, y),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn finite_sup(members: &[Hypothesis], points: &[LabeledPoint], weights: &[f64], target: Target<'_>) -> Result<SupValue> {
    if members.is_empty() {
        return Err(HssError::EmptyHypothesisSet);
    }
    let value = members
        .iter()
        .map(|h| points.iter().zip(weights).map(|(z, w)| w * target.value(h, z)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SupValue { value, exact: true })
}

fn mix_sup(mix: &L1Mix, points: &[LabeledPoint], weights: &[f64], target: Target<'_>) -> SupValue {
    let k = mix.anchors.len();
    // preds[i][j] = f_j(x_i)
    let preds: Vec<Vec<f64>> = points.iter().map(|z| mix.anchor_predictions(&z.x)).collect();
    let objective = |alpha: &[f64]| -> f64 {
        preds
            .iter()
            .zip(points)
            .zip(weights)
            .map(|((p, z), w)| w * target.of_prediction(dot(p, alpha), z.y))
            .sum()
    };
    let linear_coeffs = |scale: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..k).map(|j| preds.iter().enumerate().map(|(i, p)| scale(i) * p[j]).sum()).collect()
    };
    match target {
        Target::Raw => {
            let c = linear_coeffs(&|i| weights[i]);
            SupValue { value: mix.constraint.sup_linear(&c).0, exact: true }
        }
        Target::Loss(loss) => {
            let mut cands = mix.constraint.candidate_weights(k);
            let c = linear_coeffs(&|i| weights[i]);
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            cands.push(mix.constraint.sup_linear(&c).1);
            cands.push(mix.constraint.sup_linear(&neg).1);
            // one linearization step of the loss around the first candidate
            let base = cands[0].clone();
            let slope = |i: usize| {
                let a = dot(&preds[i], &base);
                let h = 1e-6;
                (loss.eval(a + h, points[i].y) - loss.eval(a - h, points[i].y)) / (2.0 * h)
            };
            let g = linear_coeffs(&|i| weights[i] * slope(i));
            cands.push(mix.constraint.sup_linear(&g).1);
            let value = cands.iter().map(|a| objective(a)).fold(f64::NEG_INFINITY, f64::max);
            SupValue { value, exact: false }
        }
    }
}

fn feature_sup(f: &FeatureMapSet, points: &[LabeledPoint], weights: &[f64], target: Target<'_>) -> Result<SupValue> {
    let feats = f.features(points);
    let eval_head = |head: &Hypothesis| -> f64 {
        feats.iter().zip(points).zip(weights).map(|((u, z), w)| w * target.of_prediction(head.predict(u), z.y)).sum()
    };
    match &f.heads {
        HeadFamily::Finite(heads) => {
            let value = heads.iter().map(eval_head).fold(f64::NEG_INFINITY, f64::max);
            Ok(SupValue { value, exact: true })
        }
        HeadFamily::NormBall { radius, candidates } => {
            let dim = feats.first().map_or(0, Vec::len);
            let mut u = vec![0.0; dim];
            for (phi, w) in feats.iter().zip(weights) {
                for (a, b) in u.iter_mut().zip(phi) {
                    *a += w * b;
                }
            }
            let n = norm(&u);
            match target {
                Target::Raw => Ok(SupValue { value: radius * n, exact: true }),
                Target::Loss(_) => {
                    let mut heads: Vec<Hypothesis> = candidates.iter().map(|w| Hypothesis::linear(w.clone(), 0.0)).collect();
                    if n > 0.0 {
                        for s in [1.0, -1.0] {
                            heads.push(Hypothesis::linear(u.iter().map(|a| s * radius * a / n).collect(), 0.0));
                        }
                    }
                    heads.push(Hypothesis::linear(vec![0.0; dim], 0.0));
                    let value = heads.iter().map(eval_head).fold(f64::NEG_INFINITY, f64::max);
                    Ok(SupValue { value, exact: false })
                }
            }
        }
    }
}

/// A map `S ↦ H_S`. Implementations must not depend on the order of `S`.
pub trait HypothesisFamily: Send + Sync {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet>;
}

impl<F> HypothesisFamily for F
where
    F: Fn(&LabeledSample) -> Result<HypothesisSet> + Send + Sync,
{
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        self(sample)
    }
}

/// Data-independent family `H_S = H`.
#[derive(Debug, Clone)]
pub struct FixedFamily(pub HypothesisSet);

impl HypothesisFamily for FixedFamily {
    fn hypothesis_set(&self, _sample: &LabeledSample) -> Result<HypothesisSet> {
        Ok(self.0.clone())
    }
}

/// `H_S = { x ↦ mean of the labels of S }`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelMeanFamily;

impl HypothesisFamily for LabelMeanFamily {
    fn hypothesis_set(&self, sample: &LabeledSample) -> Result<HypothesisSet> {
        let mean = sample.iter().map(|z| z.y).sum::<f64>() / sample.len() as f64;
        Ok(HypothesisSet::singleton(Hypothesis::constant(mean)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<LabeledPoint> {
        xs.iter().map(|&x| LabeledPoint::new(vec![x], 0.0)).collect()
    }

    #[test]
    fn capped_simplex_water_filling() {
        let c = MixConstraint::CappedSimplex { cap: 0.4 };
        let (v, a) = c.sup_linear(&[1.0, 3.0, 2.0]);
        for (got, want) in a.iter().zip([0.2, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((v - (0.2 + 1.2 + 0.8)).abs() < 1e-12);
        assert!(c.contains(&a, 1e-12));
    }

    #[test]
    fn full_cap_is_plain_simplex() {
        let c = MixConstraint::CappedSimplex { cap: 1.0 };
        let (v, a) = c.sup_linear(&[0.1, 0.7, -0.2]);
        assert_eq!(a, vec![0.0, 1.0, 0.0]);
        assert_eq!(v, 0.7);
    }

    #[test]
    fn simplex_ball_moves_half_radius() {
        let c = MixConstraint::SimplexBall { center: vec![0.25; 4], radius: 0.2 };
        let (v, a) = c.sup_linear(&[0.0, 1.0, 2.0, 3.0]);
        // 0.1 of mass moves from coordinate 0 to coordinate 3
        assert!((a[0] - 0.15).abs() < 1e-12 && (a[3] - 0.35).abs() < 1e-12);
        assert!((v - (0.25 + 0.5 + 3.0 * 0.35)).abs() < 1e-12);
        assert!(c.contains(&a, 1e-12));
    }

    #[test]
    fn simplex_ball_sup_beats_every_candidate() {
        let c = MixConstraint::SimplexBall { center: vec![0.5, 0.3, 0.2], radius: 0.7 };
        let coeffs = [0.3, -1.0, 0.8];
        let (v, _) = c.sup_linear(&coeffs);
        for a in c.candidate_weights(3) {
            assert!(c.contains(&a, 1e-12), "{a:?}");
            assert!(dot(&coeffs, &a) <= v + 1e-12);
        }
    }

    #[test]
    fn empty_capped_simplex_rejected() {
        let anchors = vec![Hypothesis::constant(0.0), Hypothesis::constant(1.0)];
        assert!(L1Mix::new(anchors, MixConstraint::CappedSimplex { cap: 0.3 }).is_err());
    }

    #[test]
    fn l1_ball_closed_form() {
        let anchors = vec![Hypothesis::linear(vec![1.0], 0.0), Hypothesis::linear(vec![-2.0], 0.0)];
        let set = HypothesisSet::L1Mix(L1Mix::new(anchors, MixConstraint::L1Ball { total: 1.5 }).unwrap());
        let p = pts(&[1.0, 2.0]);
        let s = set.sup_weighted(&p, &[1.0, -1.0], Target::Raw).unwrap();
        // c = (1 - 2, -2 + 4) = (-1, 2)
        assert!(s.exact);
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn finite_sup_and_range() {
        let set = HypothesisSet::finite(vec![Hypothesis::constant(0.2), Hypothesis::constant(0.9)]).unwrap();
        let loss = LossFunction::absolute();
        let p = pts(&[0.0, 0.0]);
        let s = set.sup_weighted(&p, &[1.0, 1.0], Target::Loss(&loss)).unwrap();
        assert!((s.value - 1.8).abs() < 1e-12 && s.exact);
        let (lo, hi, exact) = set.range_at(&p[0], Target::Loss(&loss)).unwrap();
        assert_eq!((lo, hi, exact), (0.2, 0.9, true));
        assert!(HypothesisSet::finite(vec![]).is_err());
    }

    #[test]
    fn mixture_interval_matches_candidates() {
        let anchors: Vec<_> = [0.1, 0.5, 0.9].iter().map(|&c| Hypothesis::constant(c)).collect();
        let mix = L1Mix::new(anchors, MixConstraint::SimplexBall { center: vec![1.0 / 3.0; 3], radius: 0.3 }).unwrap();
        let (lo, hi) = mix.prediction_interval(&[0.0]);
        assert!((hi - (0.5 + 0.15 * 0.8)).abs() < 1e-12, "{hi}");
        assert!((lo - (0.5 - 0.15 * 0.8)).abs() < 1e-12, "{lo}");
        let set = HypothesisSet::L1Mix(mix);
        for h in set.candidates() {
            let p = h.predict(&[0.0]);
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn norm_ball_raw_sup() {
        let map: FeatureMapFn = Arc::new(|x: &[f64]| x.to_vec());
        let set = HypothesisSet::FeatureMap(FeatureMapSet::new(map, HeadFamily::NormBall { radius: 2.0, candidates: vec![] }).unwrap());
        let p = vec![LabeledPoint::new(vec![3.0, 0.0], 0.0), LabeledPoint::new(vec![0.0, 4.0], 0.0)];
        let s = set.sup_weighted(&p, &[1.0, 1.0], Target::Raw).unwrap();
        assert!((s.value - 10.0).abs() < 1e-12 && s.exact);
    }

    #[test]
    fn union_combines() {
        let a = HypothesisSet::singleton(Hypothesis::constant(0.1));
        let b = HypothesisSet::singleton(Hypothesis::constant(0.7));
        let u = HypothesisSet::union(vec![a, b]).unwrap();
        assert!(u.is_finite());
        assert_eq!(u.members().unwrap().len(), 2);
        let s = u.sup_weighted(&pts(&[0.0]), &[1.0], Target::Raw).unwrap();
        assert_eq!(s.value, 0.7);
    }

    #[test]
    fn ball_filter() {
        let grid: Vec<_> = (0..=10).map(|i| Hypothesis::constant(i as f64 / 10.0)).collect();
        let probes = vec![vec![0.0]];
        let b = BallAroundCenter::filter(Hypothesis::constant(0.5), 0.2, &grid, &probes, None).unwrap();
        assert_eq!(b.members().len(), 5);
        assert!(BallAroundCenter::filter(Hypothesis::constant(0.55), 0.01, &grid, &probes, None).is_err());
    }

    #[test]
    fn table_hypothesis() {
        let h = Hypothesis::table(vec![0.3, 0.6]);
        assert_eq!(h.predict(&[1.0]), 0.6);
        assert_eq!(h.predict(&[5.0]), 0.0);
    }
}
