//! Labeled points, samples, finite-support distributions and the
//! index-wise swap/replace constructions.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::SignVector;
use crate::error::{HssError, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// Ordered multiset of labeled points. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledSample {
    points: Vec<LabeledPoint>,
}

impl LabeledSample {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| HssError::invalid("sample must contain at least one point"))?;
        let d = first.dim();
        for p in &points {
            if p.dim() != d {
                return Err(HssError::Dimension {
                    what: "feature dimension",
                    expected: d,
                    got: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(HssError::invalid("non-finite coordinate in sample"));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Option<&LabeledPoint> {
        self.points.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledPoint> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<LabeledPoint> {
        self.points
    }

    /// Sub-sample at the given positions (in the given order).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let pts = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .cloned()
                    .ok_or(HssError::IndexOutOfRange { index: i, len: self.len() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }

    /// `S` followed by `T`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        Self::new(pts)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(LabeledPoint::norm).fold(0.0, f64::max)
    }

    pub fn sum_sq_norms(&self) -> f64 {
        self.points.iter().map(|p| p.norm().powi(2)).sum()
    }

    /// Reads a CSV with header `x0,...,xd,y`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ncol = headers.len();
        if ncol < 1 || headers.get(ncol - 1) != Some("y") {
            return Err(HssError::invalid("csv header must end with column `y`"));
        }
        for (j, h) in headers.iter().take(ncol - 1).enumerate() {
            if h != format!("x{j}") {
                return Err(HssError::invalid(format!("unexpected csv column `{h}`, expected `x{j}`")));
            }
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| HssError::invalid(format!("bad number `{s}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let (x, y) = vals.split_at(ncol - 1);
            points.push(LabeledPoint::new(x.to_vec(), y[0]));
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for p in &self.points {
            let row: Vec<String> = p.x.iter().chain(std::iter::once(&p.y)).map(|v| v.to_string()).collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl<'de> Deserialize<'de> for LabeledSample {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            points: Vec<LabeledPoint>,
        }
        let raw = Raw::deserialize(d)?;
        LabeledSample::new(raw.points).map_err(serde::de::Error::custom)
    }
}

/// `S_{T,σ}`: position `i` holds `T_i` where `σ_i = -1`, else `S_i`.
pub fn swap_sample(s: &LabeledSample, t: &LabeledSample, sigma: &SignVector) -> Result<LabeledSample> {
    let m = s.len();
    if t.len() != m {
        return Err(HssError::Dimension { what: "swap partner length", expected: m, got: t.len() });
    }
    if sigma.len() != m {
        return Err(HssError::Dimension { what: "sign vector length", expected: m, got: sigma.len() });
    }
    if sigma.values().iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(HssError::invalid("swap requires Rademacher signs in {+1,-1}"));
    }
    let pts = sigma
        .values()
        .iter()
        .zip(s.iter().zip(t.iter()))
        .map(|(&v, (a, b))| if v < 0.0 { b.clone() } else { a.clone() })
        .collect();
    Ok(LabeledSample { points: pts })
}

/// Swap driven by a bit mask: bit `i` set means position `i` comes from `T`.
/// Bit `i` of the multi-word `mask` selects `t_i` over `s_i`.
pub(crate) fn swap_by_mask(s: &LabeledSample, t: &LabeledSample, mask: &[u64]) -> LabeledSample {
    let pts = s
        .iter()
        .zip(t.iter())
        .enumerate()
        .map(|(i, (a, b))| if mask[i / 64] >> (i % 64) & 1 == 1 { b.clone() } else { a.clone() })
        .collect();
    LabeledSample { points: pts }
}

/// `S^{z↔z'}` with `z` the point at `index`.
pub fn replace_point(s: &LabeledSample, index: usize, z: LabeledPoint) -> Result<LabeledSample> {
    if index >= s.len() {
        return Err(HssError::IndexOutOfRange { index, len: s.len() });
    }
    if z.dim() != s.dim() {
        return Err(HssError::Dimension { what: "replacement point dimension", expected: s.dim(), got: z.dim() });
    }
    let mut pts = s.points.clone();
    pts[index] = z;
    Ok(LabeledSample { points: pts })
}

/// Finite-support data distribution, so true risks are exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    support: Vec<LabeledPoint>,
    probs: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub x: Vec<f64>,
    pub y: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub atoms: Vec<Atom>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<LabeledPoint>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(HssError::Dimension { what: "probability vector", expected: support.len(), got: probs.len() });
        }
        // validates shape and finiteness
        LabeledSample::new(support.clone())?;
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(HssError::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(HssError::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { support, probs, cumulative })
    }

    pub fn uniform(support: Vec<LabeledPoint>) -> Result<Self> {
        let n = support.len();
        if n == 0 {
            return Err(HssError::invalid("empty support"));
        }
        // Build probabilities so they sum to exactly 1 in floating point.
        let mut probs = vec![1.0 / n as f64; n];
        let rest: f64 = probs[..n - 1].iter().sum();
        probs[n - 1] = 1.0 - rest;
        Self::new(support, probs)
    }

    /// Uniform over the points of a sample (duplicates keep their multiplicity).
    pub fn empirical(sample: &LabeledSample) -> Result<Self> {
        Self::uniform(sample.points().to_vec())
    }

    pub fn point_mass(z: LabeledPoint) -> Self {
        Self::new(vec![z], vec![1.0]).expect("single atom is a valid distribution")
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        let support = spec.atoms.iter().map(|a| LabeledPoint::new(a.x.clone(), a.y)).collect();
        let probs = spec.atoms.iter().map(|a| a.p).collect();
        Self::new(support, probs)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(s)?)
    }

    pub fn to_spec(&self) -> DistributionSpec {
        DistributionSpec {
            atoms: self
                .support
                .iter()
                .zip(&self.probs)
                .map(|(z, &p)| Atom { x: z.x.clone(), y: z.y, p })
                .collect(),
        }
    }

    pub fn support(&self) -> &[LabeledPoint] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.support[0].dim()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // zero-probability atoms at the end are never selected
        idx.min(self.support.len() - 1)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledPoint {
        self.support[self.sample_index(rng)].clone()
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<LabeledSample> {
        if m == 0 {
            return Err(HssError::invalid("sample size must be at least 1"));
        }
        Ok(LabeledSample { points: (0..m).map(|_| self.sample_point(rng)).collect() })
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DistributionSpec::deserialize(d)?;
        DiscreteDistribution::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

/// `m` i.i.d. draws from `dist`, reproducible under `rng`.
pub fn draw_sample(dist: &DiscreteDistribution, m: usize, rng: &SeededRng) -> Result<LabeledSample> {
    dist.sample(m, &mut rng.generator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::SignVector;

    fn pt(v: f64) -> LabeledPoint {
        LabeledPoint::new(vec![v], v)
    }

    fn sample(vals: &[f64]) -> LabeledSample {
        LabeledSample::new(vals.iter().map(|&v| pt(v)).collect()).unwrap()
    }

    #[test]
    fn swap_examples() {
        let s = sample(&[1.0, 2.0, 3.0]);
        let t = sample(&[4.0, 5.0, 6.0]);
        let out = swap_sample(&s, &t, &SignVector::rademacher(vec![1.0, -1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(out, sample(&[1.0, 5.0, 3.0]));
        let out = swap_sample(&s, &t, &SignVector::rademacher(vec![1.0; 3]).unwrap()).unwrap();
        assert_eq!(out, s);
        let out = swap_sample(&s, &t, &SignVector::rademacher(vec![-1.0; 3]).unwrap()).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn swap_length_mismatch() {
        let s = sample(&[1.0, 2.0, 3.0]);
        let t = sample(&[4.0, 5.0]);
        let sig = SignVector::rademacher(vec![1.0; 3]).unwrap();
        assert!(matches!(swap_sample(&s, &t, &sig), Err(HssError::Dimension { .. })));
        let sig = SignVector::rademacher(vec![1.0; 2]).unwrap();
        assert!(matches!(swap_sample(&s, &s, &sig), Err(HssError::Dimension { .. })));
    }

    #[test]
    fn swap_by_mask_matches_signs() {
        let s = sample(&[1.0, 2.0, 3.0]);
        let t = sample(&[4.0, 5.0, 6.0]);
        let sig = SignVector::rademacher(vec![-1.0, 1.0, -1.0]).unwrap();
        assert_eq!(swap_by_mask(&s, &t, &[0b101]), swap_sample(&s, &t, &sig).unwrap());
    }

    #[test]
    fn replace_examples() {
        let s = sample(&[1.0, 2.0]);
        assert_eq!(replace_point(&s, 1, pt(3.0)).unwrap(), sample(&[1.0, 3.0]));
        assert_eq!(replace_point(&s, 0, pt(1.0)).unwrap(), s);
        assert!(matches!(replace_point(&s, 2, pt(3.0)), Err(HssError::IndexOutOfRange { index: 2, len: 2 })));
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(LabeledSample::new(vec![]).is_err());
        let mixed = vec![LabeledPoint::new(vec![1.0], 0.0), LabeledPoint::new(vec![1.0, 2.0], 0.0)];
        assert!(matches!(LabeledSample::new(mixed), Err(HssError::Dimension { .. })));
        assert!(LabeledSample::new(vec![LabeledPoint::new(vec![f64::NAN], 0.0)]).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::new(vec![pt(0.0), pt(1.0)], vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![pt(0.0), pt(1.0)], vec![-0.5, 1.5]).is_err());
        assert!(DiscreteDistribution::new(vec![pt(0.0)], vec![0.5, 0.5]).is_err());
        let d = DiscreteDistribution::uniform((0..7).map(|i| pt(i as f64)).collect()).unwrap();
        assert_eq!(d.probs().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn draw_single_atom() {
        let d = DiscreteDistribution::point_mass(pt(2.5));
        let s = draw_sample(&d, 5, &SeededRng::new(1)).unwrap();
        assert!(s.iter().all(|z| *z == pt(2.5)));
        assert!(draw_sample(&d, 0, &SeededRng::new(1)).is_err());
    }

    #[test]
    fn draw_is_deterministic() {
        let d = DiscreteDistribution::uniform((0..5).map(|i| pt(i as f64)).collect()).unwrap();
        let a = draw_sample(&d, 50, &SeededRng::new(11)).unwrap();
        let b = draw_sample(&d, 50, &SeededRng::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn draw_frequency_two_atoms() {
        let d = DiscreteDistribution::uniform(vec![pt(0.0), pt(1.0)]).unwrap();
        let m = 10_000;
        let s = draw_sample(&d, m, &SeededRng::new(3)).unwrap();
        let freq = s.iter().filter(|z| z.y == 1.0).count() as f64 / m as f64;
        assert!((freq - 0.5).abs() <= 4.0 * (0.25f64 / m as f64).sqrt(), "freq {freq}");
    }

    #[test]
    fn zero_probability_atoms_never_drawn() {
        let d = DiscreteDistribution::new(vec![pt(0.0), pt(1.0), pt(2.0)], vec![0.0, 1.0, 0.0]).unwrap();
        let s = draw_sample(&d, 200, &SeededRng::new(5)).unwrap();
        assert!(s.iter().all(|z| z.y == 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let s = LabeledSample::new(vec![
            LabeledPoint::new(vec![0.5, -1.0], 1.0),
            LabeledPoint::new(vec![0.25, 2.0], 0.0),
        ])
        .unwrap();
        let mut buf = Vec::new();
        s.to_csv_writer(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x0,x1,y\n"));
        assert_eq!(LabeledSample::from_csv_reader(buf.as_slice()).unwrap(), s);
        assert!(LabeledSample::from_csv_reader("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn distribution_json() {
        let d = DiscreteDistribution::from_json_str(
            r#"{"atoms":[{"x":[0.0],"y":0.0,"p":0.25},{"x":[1.0],"y":1.0,"p":0.75}]}"#,
        )
        .unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        assert!(DiscreteDistribution::from_json_str(r#"{"atoms":[{"x":[0.0],"y":0.0,"p":1.0,"q":1}]}"#).is_err());
    }
}
