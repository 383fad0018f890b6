//! Multi-class scoring hypotheses `h(x, y)` and the predictors they induce.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::rng;

/// Index of the largest score, ties going to the smallest label.
pub fn argmax(scores: &[f64]) -> Label {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Label::from_index(best)
}

/// `ρ(y) = s_y − max_{y′≠y} s_{y′}`.
pub fn margin_of(scores: &[f64], y: Label) -> f64 {
    let yi = y.index();
    let rival = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != yi)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    scores[yi] - rival
}

/// A real-valued score over `X × [K]`.
pub trait Scorer {
    fn label_count(&self) -> usize;

    /// `(h(x, 1), …, h(x, K))`.
    fn scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn score(&self, x: &[f64], y: Label) -> Result<f64> {
        y.check(self.label_count())?;
        Ok(self.scores(x)?[y.index()])
    }

    /// `argmax_y h(x, y)` with the smallest label winning ties.
    fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(argmax(&self.scores(x)?))
    }

    fn margin(&self, x: &[f64], y: Label) -> Result<f64> {
        if self.label_count() < 2 {
            return Err(Error::SingleClass);
        }
        y.check(self.label_count())?;
        Ok(margin_of(&self.scores(x)?, y))
    }

    /// `min_{y′} (h(x, y) − h(x, y′) + θ·1[y′ = y])`.
    fn margin_theta(&self, x: &[f64], y: Label, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(Error::NonpositiveTheta(theta));
        }
        y.check(self.label_count())?;
        let s = self.scores(x)?;
        let own = s[y.index()];
        Ok(s.iter()
            .enumerate()
            .map(|(j, &other)| own - other + if j == y.index() { theta } else { 0.0 })
            .fold(f64::INFINITY, f64::min))
    }
}

impl<T: Scorer + ?Sized> Scorer for &T {
    fn label_count(&self) -> usize {
        (**self).label_count()
    }
    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).scores(x)
    }
}

/// Anything that maps an input to a label.
pub trait Predictor {
    fn classes(&self) -> usize;
    fn classify(&self, x: &[f64]) -> Result<Label>;
}

impl<S: Scorer> Predictor for S {
    fn classes(&self) -> usize {
        Scorer::label_count(self)
    }
    fn classify(&self, x: &[f64]) -> Result<Label> {
        self.predict(x)
    }
}

/// Explicit feature map `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    Identity,
    /// `φ(x) = A·x` with a stored `D × d` matrix.
    RandomFeatures {
        matrix: Vec<Vec<f64>>,
    },
}

impl FeatureMap {
    /// Draws a `features × input_dim` Gaussian projection scaled by `1/√features`.
    pub fn random_features(input_dim: usize, features: usize, seed: u64) -> Self {
        let mut rng = rng::rng(seed);
        let scale = 1.0 / (features as f64).sqrt();
        let matrix = (0..features)
            .map(|_| {
                (0..input_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        FeatureMap::RandomFeatures { matrix }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Identity => input_dim,
            FeatureMap::RandomFeatures { matrix } => matrix.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity => x.to_vec(),
            FeatureMap::RandomFeatures { matrix } => matrix.iter().map(|row| dot(row, x)).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidP(p))
    }
}

/// `(Σ_j ‖v_j‖_2^p)^{1/p}` over row blocks; `p = ∞` gives the largest block norm.
pub fn group_norm(blocks: &[Vec<f64>], p: f64) -> f64 {
    let norms = blocks.iter().map(|b| l2(b));
    if p.is_infinite() {
        norms.fold(0.0, f64::max)
    } else {
        norms.map(|n| n.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `h(x, y) = ⟨w_y, φ(x)⟩` with stacked weights `w = (w_1, …, w_K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringHypothesis {
    #[serde(rename = "K")]
    label_count: usize,
    #[serde(rename = "d")]
    input_dim: usize,
    p: f64,
    feature_map: FeatureMap,
    weights: Vec<Vec<f64>>,
}

impl ScoringHypothesis {
    pub fn new(
        input_dim: usize,
        weights: Vec<Vec<f64>>,
        feature_map: FeatureMap,
        p: f64,
    ) -> Result<Self> {
        check_p(p)?;
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one label is required".into(),
            ));
        }
        if let FeatureMap::RandomFeatures { matrix } = &feature_map {
            if let Some(row) = matrix.iter().find(|r| r.len() != input_dim) {
                return Err(Error::LengthMismatch {
                    expected: input_dim,
                    got: row.len(),
                });
            }
        }
        let feature_dim = feature_map.output_dim(input_dim);
        if let Some(w) = weights.iter().find(|w| w.len() != feature_dim) {
            return Err(Error::LengthMismatch {
                expected: feature_dim,
                got: w.len(),
            });
        }
        Ok(Self {
            label_count: weights.len(),
            input_dim,
            p,
            feature_map,
            weights,
        })
    }

    pub fn identity(weights: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        let d = weights.first().map_or(0, Vec::len);
        Self::new(d, weights, FeatureMap::Identity, p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text).map_err(Error::from_json)?;
        if raw.label_count != raw.weights.len() {
            return Err(Error::Schema(format!(
                "K = {} but {} weight vectors given",
                raw.label_count,
                raw.weights.len()
            )));
        }
        Self::new(raw.input_dim, raw.weights, raw.feature_map, raw.p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hypotheses always serialize")
    }

    /// Draws a hypothesis inside the unit `ℓ_{2,p}` ball (identity features).
    pub fn sample_unit_ball(
        input_dim: usize,
        label_count: usize,
        p: f64,
        seed: u64,
    ) -> Result<Self> {
        check_p(p)?;
        if input_dim == 0 || label_count == 0 {
            return Err(Error::InvalidArgument("d and K must be positive".into()));
        }
        let mut rng = rng::rng(seed);
        Ok(Self::sample_with(
            &mut rng,
            input_dim,
            label_count,
            p,
            FeatureMap::Identity,
        ))
    }

    pub(crate) fn sample_with(
        rng: &mut rng::Rng,
        input_dim: usize,
        label_count: usize,
        p: f64,
        feature_map: FeatureMap,
    ) -> Self {
        let feature_dim = feature_map.output_dim(input_dim);
        let mut weights: Vec<Vec<f64>> = (0..label_count)
            .map(|_| {
                (0..feature_dim)
                    .map(|_| StandardNormal.sample(&mut *rng))
                    .collect()
            })
            .collect();
        let norm = group_norm(&weights, p);
        let radius: f64 = rng
            .random::<f64>()
            .powf(1.0 / (label_count * feature_dim) as f64);
        let scale = if norm > 0.0 { radius / norm } else { 0.0 };
        for w in &mut weights {
            for v in w.iter_mut() {
                *v *= scale;
            }
        }
        // guard against rounding pushing the norm a hair above the radius
        let after = group_norm(&weights, p);
        if after > 1.0 {
            for w in &mut weights {
                for v in w.iter_mut() {
                    *v /= after;
                }
            }
        }
        Self {
            label_count,
            input_dim,
            p,
            feature_map,
            weights,
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                needed: self.input_dim.saturating_sub(1),
                got: x.len(),
            });
        }
        Ok(self.feature_map.apply(x))
    }

    pub fn norm_2p(&self) -> f64 {
        group_norm(&self.weights, self.p)
    }

    pub fn in_unit_ball(&self) -> bool {
        self.norm_2p() <= 1.0
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.weights {
            for v in w.iter_mut() {
                *v *= alpha;
            }
        }
        out
    }
}

impl Scorer for ScoringHypothesis {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = self.features(x)?;
        Ok(self.weights.iter().map(|w| dot(w, &phi)).collect())
    }
}

/// Scores tabulated over a finite input domain.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedHypothesis {
    label_count: usize,
    domain: Vec<Vec<f64>>,
    table: Vec<Vec<f64>>,
}

impl TabulatedHypothesis {
    pub fn new(domain: Vec<Vec<f64>>, table: Vec<Vec<f64>>) -> Result<Self> {
        if domain.len() != table.len() {
            return Err(Error::LengthMismatch {
                expected: domain.len(),
                got: table.len(),
            });
        }
        let label_count = table.first().map_or(0, Vec::len);
        if label_count == 0 {
            return Err(Error::InvalidArgument("empty score table".into()));
        }
        if let Some(row) = table.iter().find(|r| r.len() != label_count) {
            return Err(Error::LengthMismatch {
                expected: label_count,
                got: row.len(),
            });
        }
        Ok(Self {
            label_count,
            domain,
            table,
        })
    }

    /// One-hot scores for a label-valued predictor.
    pub fn from_predictions(
        label_count: usize,
        domain: Vec<Vec<f64>>,
        predictions: &[Label],
    ) -> Result<Self> {
        let table = predictions
            .iter()
            .map(|y| {
                y.check(label_count)?;
                let mut row = vec![0.0; label_count];
                row[y.index()] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, table)
    }

    pub fn domain(&self) -> &[Vec<f64>] {
        &self.domain
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

impl Scorer for TabulatedHypothesis {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain
            .iter()
            .position(|d| d.as_slice() == x)
            .map(|i| self.table[i].clone())
            .ok_or(Error::UnknownInput)
    }
}

/// A non-empty finite collection of hypotheses sharing `K`.
#[derive(Clone, Debug)]
pub struct FiniteHypothesisClass<H> {
    members: Vec<H>,
}

impl<H: Scorer> FiniteHypothesisClass<H> {
    pub fn new(members: Vec<H>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("hypothesis class is empty".into()))?;
        let k = first.label_count();
        if members.iter().any(|h| h.label_count() != k) {
            return Err(Error::InvalidArgument("members disagree on K".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[H] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label_count(&self) -> usize {
        self.members[0].label_count()
    }
}
