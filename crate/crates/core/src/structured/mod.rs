//! Factor-graph structured prediction over label sequences `y ∈ Y_1 × … × Y_l`.
//!
//! Scores decompose as `h(x, y) = Σ_f h_f(x, y_f)`. Chain-shaped graphs
//! (factors over `{k}` and `{k, k+1}`) are reduced to [`ChainPotentials`] and
//! decoded exactly by dynamic programming; anything else falls back to
//! enumeration under a size cap.

mod augment;
mod decode;
mod masked;

use serde::{Deserialize, Serialize};

use crate::complexity::{FactorTerm, FactoredLinearBall};
use crate::error::{Error, Result};
use crate::hypotheses::{dot, l2};
use crate::label::Label;
use crate::rng::Rng;

pub use augment::loss_augmented_max;
pub use decode::{
    brute_force_decode, constrained_viterbi, decode_potentials, enumerate_sequences,
    find_feasible_sequence, output_space_size, viterbi, BRUTE_FORCE_CAP,
};
pub use masked::{mask_structured, structured_mask_constant, MaskedSequenceScorer};

/// Anything that scores whole label sequences.
pub trait SequenceScorer {
    /// Per-position alphabet sizes for an input and sequence length.
    fn alphabet(&self, x: &[f64], length: usize) -> Result<Vec<usize>>;

    fn score_sequence(&self, x: &[f64], y: &[Label]) -> Result<f64>;

    /// `max_{y′≠y} [L_H(y′, y) − (h(x, y) − h(x, y′))/ρ]` with the normalised
    /// Hamming loss `L_H`, when the scorer supports an exact decomposition.
    /// The inner `None` means `Y = {y}`.
    fn hamming_augmented_max(
        &self,
        _x: &[f64],
        _y: &[Label],
        _rho: f64,
    ) -> Option<Result<Option<f64>>> {
        None
    }
}

impl<T: SequenceScorer + ?Sized> SequenceScorer for &T {
    fn alphabet(&self, x: &[f64], length: usize) -> Result<Vec<usize>> {
        (**self).alphabet(x, length)
    }
    fn score_sequence(&self, x: &[f64], y: &[Label]) -> Result<f64> {
        (**self).score_sequence(x, y)
    }
    fn hamming_augmented_max(
        &self,
        x: &[f64],
        y: &[Label],
        rho: f64,
    ) -> Option<Result<Option<f64>>> {
        (**self).hamming_augmented_max(x, y, rho)
    }
}

/// Scorers whose graph for `x` is a chain.
pub trait ChainScorer: SequenceScorer {
    fn chain_potentials(&self, x: &[f64]) -> Result<ChainPotentials>;
}

/// Unary and adjacent-pair score tables of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPotentials {
    /// `unary[k][a]`, label index `a` at position `k` (0-based).
    pub unary: Vec<Vec<f64>>,
    /// `pairwise[k][a][b]` for positions `k` and `k + 1`.
    pub pairwise: Vec<Vec<Vec<f64>>>,
}

impl ChainPotentials {
    pub fn new(unary: Vec<Vec<f64>>, pairwise: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if unary.is_empty() {
            return Err(Error::InvalidArgument(
                "a chain needs at least one position".into(),
            ));
        }
        if unary.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument(
                "alphabet sizes must be positive".into(),
            ));
        }
        if pairwise.len() + 1 != unary.len() {
            return Err(Error::LengthMismatch {
                expected: unary.len() - 1,
                got: pairwise.len(),
            });
        }
        for (k, table) in pairwise.iter().enumerate() {
            let (rows, cols) = (unary[k].len(), unary[k + 1].len());
            if table.len() != rows || table.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidArgument(format!(
                    "pairwise table {k} is not {rows}×{cols}"
                )));
            }
        }
        Ok(Self { unary, pairwise })
    }

    pub fn length(&self) -> usize {
        self.unary.len()
    }

    pub fn alphabet(&self) -> Vec<usize> {
        self.unary.iter().map(Vec::len).collect()
    }

    fn check(&self, y: &[Label]) -> Result<()> {
        if y.len() != self.length() {
            return Err(Error::LengthMismatch {
                expected: self.length(),
                got: y.len(),
            });
        }
        for (label, row) in y.iter().zip(&self.unary) {
            label.check(row.len())?;
        }
        Ok(())
    }

    /// Sum of the unary and pairwise terms, accumulated left to right.
    pub fn score(&self, y: &[Label]) -> Result<f64> {
        self.check(y)?;
        let mut total = self.unary[0][y[0].index()];
        for k in 1..y.len() {
            total += self.pairwise[k - 1][y[k - 1].index()][y[k].index()];
            total += self.unary[k][y[k].index()];
        }
        Ok(total)
    }

    pub fn negated(&self) -> Self {
        Self {
            unary: self
                .unary
                .iter()
                .map(|r| r.iter().map(|v| -v).collect())
                .collect(),
            pairwise: self
                .pairwise
                .iter()
                .map(|t| t.iter().map(|r| r.iter().map(|v| -v).collect()).collect())
                .collect(),
        }
    }
}

/// The graph `G = (V, F, E)` of one example: variables `0..l` and factor scopes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorGraph {
    pub alphabet: Vec<usize>,
    pub scopes: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new(alphabet: Vec<usize>, scopes: Vec<Vec<usize>>) -> Result<Self> {
        if alphabet.is_empty() || alphabet.contains(&0) {
            return Err(Error::InvalidArgument(
                "alphabet sizes must be positive".into(),
            ));
        }
        for (f, scope) in scopes.iter().enumerate() {
            if scope.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "factor {f} has no neighbours"
                )));
            }
            if let Some(&v) = scope.iter().find(|&&v| v >= alphabet.len()) {
                return Err(Error::InvalidArgument(format!(
                    "factor {f} touches missing variable {v}"
                )));
            }
            let mut sorted = scope.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != scope.len() {
                return Err(Error::InvalidArgument(format!(
                    "factor {f} repeats a variable"
                )));
            }
        }
        Ok(Self { alphabet, scopes })
    }

    /// Emissions over `{k}` and transitions over `{k, k+1}`.
    pub fn chain(alphabet: Vec<usize>) -> Result<Self> {
        let l = alphabet.len();
        let mut scopes: Vec<Vec<usize>> = (0..l).map(|k| vec![k]).collect();
        scopes.extend((0..l.saturating_sub(1)).map(|k| vec![k, k + 1]));
        Self::new(alphabet, scopes)
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    pub fn is_chain(&self) -> bool {
        self.scopes.iter().all(|s| match s.as_slice() {
            [_] => true,
            [a, b] => *b == *a + 1,
            _ => false,
        })
    }
}

/// Where a factor reads its feature vector `φ_f(x)` from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// The constant `(1)`: a tabulated factor.
    Bias,
    Whole,
    Slice {
        start: usize,
        len: usize,
    },
}

impl FeatureSource {
    pub fn extract(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            FeatureSource::Bias => Ok(vec![1.0]),
            FeatureSource::Whole => Ok(x.to_vec()),
            FeatureSource::Slice { start, len } => x
                .get(start..start + len)
                .map(<[f64]>::to_vec)
                .ok_or(Error::DimensionMismatch {
                    needed: start + len - 1,
                    got: x.len(),
                }),
        }
    }
}

/// `h_f(x, y_f) = ⟨w_{f, y_f}, φ_f(x)⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub features: FeatureSource,
    /// One weight vector per local assignment, row-major over the scope
    /// (first variable slowest).
    pub weights: Vec<Vec<f64>>,
}

/// A fixed-length model `h(x, y) = Σ_f h_f(x, y_f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorGraphModel {
    alphabet: Vec<usize>,
    factors: Vec<Factor>,
}

impl FactorGraphModel {
    pub fn new(alphabet: Vec<usize>, factors: Vec<Factor>) -> Result<Self> {
        FactorGraph::new(
            alphabet.clone(),
            factors.iter().map(|f| f.scope.clone()).collect(),
        )?;
        for (i, f) in factors.iter().enumerate() {
            let rows: usize = f.scope.iter().map(|&v| alphabet[v]).product();
            if f.weights.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "factor {i} needs {rows} weight vectors, got {}",
                    f.weights.len()
                )));
            }
            if let Some(w) = f.weights.iter().find(|w| w.len() != f.weights[0].len()) {
                return Err(Error::LengthMismatch {
                    expected: f.weights[0].len(),
                    got: w.len(),
                });
            }
        }
        Ok(Self { alphabet, factors })
    }

    /// Chain of tabulated factors: `emission[k][a]` and a transition table shared by all adjacent pairs.
    pub fn chain_tables(emission: Vec<Vec<f64>>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let alphabet: Vec<usize> = emission.iter().map(Vec::len).collect();
        let mut factors: Vec<Factor> = emission
            .into_iter()
            .enumerate()
            .map(|(k, row)| Factor {
                scope: vec![k],
                features: FeatureSource::Bias,
                weights: row.into_iter().map(|v| vec![v]).collect(),
            })
            .collect();
        for k in 0..alphabet.len().saturating_sub(1) {
            let mut weights = Vec::new();
            for a in 0..alphabet[k] {
                for b in 0..alphabet[k + 1] {
                    let v = transition
                        .get(a)
                        .and_then(|r| r.get(b))
                        .copied()
                        .ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "transition table lacks entry ({}, {})",
                                a + 1,
                                b + 1
                            ))
                        })?;
                    weights.push(vec![v]);
                }
            }
            factors.push(Factor {
                scope: vec![k, k + 1],
                features: FeatureSource::Bias,
                weights,
            });
        }
        Self::new(alphabet, factors)
    }

    pub fn graph(&self) -> FactorGraph {
        FactorGraph {
            alphabet: self.alphabet.clone(),
            scopes: self.factors.iter().map(|f| f.scope.clone()).collect(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn length(&self) -> usize {
        self.alphabet.len()
    }

    fn local_index(&self, scope: &[usize], y: &[Label]) -> usize {
        scope
            .iter()
            .fold(0, |acc, &v| acc * self.alphabet[v] + y[v].index())
    }

    fn check(&self, y: &[Label]) -> Result<()> {
        if y.len() != self.alphabet.len() {
            return Err(Error::LengthMismatch {
                expected: self.alphabet.len(),
                got: y.len(),
            });
        }
        for (label, &size) in y.iter().zip(&self.alphabet) {
            label.check(size)?;
        }
        Ok(())
    }

    /// The individual terms `h_f(x, y_f)` in factor order.
    pub fn factor_scores(&self, x: &[f64], y: &[Label]) -> Result<Vec<f64>> {
        self.check(y)?;
        self.factors
            .iter()
            .map(|f| {
                let phi = f.features.extract(x)?;
                let w = &f.weights[self.local_index(&f.scope, y)];
                if w.len() != phi.len() {
                    return Err(Error::LengthMismatch {
                        expected: w.len(),
                        got: phi.len(),
                    });
                }
                Ok(dot(w, &phi))
            })
            .collect()
    }
}

/// `h(x, y) = Σ_f h_f(x, y_f)`.
pub fn score_decomposed<S: SequenceScorer + ?Sized>(
    model: &S,
    x: &[f64],
    y: &[Label],
) -> Result<f64> {
    model.score_sequence(x, y)
}

impl SequenceScorer for FactorGraphModel {
    fn alphabet(&self, _x: &[f64], length: usize) -> Result<Vec<usize>> {
        if length != self.alphabet.len() {
            return Err(Error::LengthMismatch {
                expected: self.alphabet.len(),
                got: length,
            });
        }
        Ok(self.alphabet.clone())
    }

    fn score_sequence(&self, x: &[f64], y: &[Label]) -> Result<f64> {
        Ok(self.factor_scores(x, y)?.into_iter().sum())
    }

    fn hamming_augmented_max(
        &self,
        x: &[f64],
        y: &[Label],
        rho: f64,
    ) -> Option<Result<Option<f64>>> {
        if !self.graph().is_chain() {
            return None;
        }
        Some(
            self.chain_potentials(x)
                .and_then(|p| augment::hamming_additive_dp(&p, y, rho)),
        )
    }
}

impl ChainScorer for FactorGraphModel {
    fn chain_potentials(&self, x: &[f64]) -> Result<ChainPotentials> {
        if !self.graph().is_chain() {
            return Err(Error::NotAChain);
        }
        let l = self.alphabet.len();
        let mut unary: Vec<Vec<f64>> = self.alphabet.iter().map(|&n| vec![0.0; n]).collect();
        let mut pairwise: Vec<Vec<Vec<f64>>> = (0..l - 1)
            .map(|k| vec![vec![0.0; self.alphabet[k + 1]]; self.alphabet[k]])
            .collect();
        for f in &self.factors {
            let phi = f.features.extract(x)?;
            for (row, w) in f.weights.iter().enumerate() {
                if w.len() != phi.len() {
                    return Err(Error::LengthMismatch {
                        expected: w.len(),
                        got: phi.len(),
                    });
                }
                let v = dot(w, &phi);
                match *f.scope.as_slice() {
                    [k] => unary[k][row] += v,
                    [k, _] => {
                        let cols = self.alphabet[k + 1];
                        pairwise[k][row / cols][row % cols] += v;
                    }
                    _ => unreachable!("checked chain shape"),
                }
            }
        }
        ChainPotentials::new(unary, pairwise)
    }
}

/// A linear chain of any length over a shared label set `[K]`.
///
/// The input is the concatenation of `l` position vectors of width `dim`.
/// Position `k` contributes `⟨E_{y_k}, x_k⟩` and each adjacent pair `T[y_k][y_{k+1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearChain {
    pub labels: usize,
    pub dim: usize,
    pub emission: Vec<Vec<f64>>,
    pub transition: Vec<Vec<f64>>,
}

impl LinearChain {
    pub fn new(
        labels: usize,
        dim: usize,
        emission: Vec<Vec<f64>>,
        transition: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let chain = Self {
            labels,
            dim,
            emission,
            transition,
        };
        chain.validate()?;
        Ok(chain)
    }

    fn validate(&self) -> Result<()> {
        if self.labels == 0 || self.dim == 0 {
            return Err(Error::Schema("labels and dim must be positive".into()));
        }
        if self.emission.len() != self.labels || self.emission.iter().any(|r| r.len() != self.dim) {
            return Err(Error::Schema(format!(
                "emission must be {}×{}",
                self.labels, self.dim
            )));
        }
        if self.transition.len() != self.labels
            || self.transition.iter().any(|r| r.len() != self.labels)
        {
            return Err(Error::Schema(format!(
                "transition must be {0}×{0}",
                self.labels
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let chain: Self = serde_json::from_str(text).map_err(Error::from_json)?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain models always serialize")
    }

    /// Emission and transition blocks each drawn uniformly from the unit Frobenius ball.
    pub fn sample_unit_blocks(labels: usize, dim: usize, rng: &mut Rng) -> Self {
        let emission = sample_block(rng, labels, dim);
        let transition = sample_block(rng, labels, labels);
        Self {
            labels,
            dim,
            emission,
            transition,
        }
    }

    pub fn block_norms(&self) -> (f64, f64) {
        (l2(&self.emission.concat()), l2(&self.transition.concat()))
    }

    pub fn length_of(&self, x: &[f64]) -> Result<usize> {
        if x.is_empty() || !x.len().is_multiple_of(self.dim) {
            return Err(Error::InvalidArgument(format!(
                "input length {} is not a positive multiple of {}",
                x.len(),
                self.dim
            )));
        }
        Ok(x.len() / self.dim)
    }

    /// The same model unrolled as an explicit factor graph for a given length.
    pub fn to_factor_graph(&self, length: usize) -> Result<FactorGraphModel> {
        let mut factors: Vec<Factor> = (0..length)
            .map(|k| Factor {
                scope: vec![k],
                features: FeatureSource::Slice {
                    start: k * self.dim,
                    len: self.dim,
                },
                weights: self.emission.clone(),
            })
            .collect();
        for k in 0..length.saturating_sub(1) {
            factors.push(Factor {
                scope: vec![k, k + 1],
                features: FeatureSource::Bias,
                weights: self
                    .transition
                    .concat()
                    .into_iter()
                    .map(|v| vec![v])
                    .collect(),
            });
        }
        FactorGraphModel::new(vec![self.labels; length], factors)
    }

    /// The factored linear class this model belongs to, instantiated on `inputs`:
    /// block 0 holds emissions (`K` rows of width `dim`), block 1 the `K²` scalar transitions.
    pub fn factored_class(
        labels: usize,
        dim: usize,
        inputs: &[Vec<f64>],
    ) -> Result<FactoredLinearBall> {
        let probe = Self::new(
            labels,
            dim,
            vec![vec![0.0; dim]; labels],
            vec![vec![0.0; labels]; labels],
        )?;
        let mut examples = Vec::with_capacity(inputs.len());
        for x in inputs {
            let l = probe.length_of(x)?;
            let mut factors = Vec::with_capacity(2 * l - 1);
            for k in 0..l {
                let slice = &x[k * dim..(k + 1) * dim];
                factors.push(
                    (0..labels)
                        .map(|a| FactorTerm {
                            block: 0,
                            row: a,
                            features: slice.to_vec(),
                        })
                        .collect(),
                );
            }
            for _ in 1..l {
                factors.push(
                    (0..labels * labels)
                        .map(|ab| FactorTerm {
                            block: 1,
                            row: ab,
                            features: vec![1.0],
                        })
                        .collect(),
                );
            }
            examples.push(factors);
        }
        FactoredLinearBall::new(vec![(labels, dim), (labels * labels, 1)], examples)
    }
}

fn sample_block(rng: &mut Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};
    let mut block: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| StandardNormal.sample(&mut *rng))
                .collect()
        })
        .collect();
    let norm = l2(&block.concat());
    let radius = rng.random::<f64>().powf(1.0 / (rows * cols) as f64);
    let scale = if norm > 0.0 { radius / norm } else { 0.0 };
    for v in block.iter_mut().flatten() {
        *v *= scale;
    }
    let after = l2(&block.concat());
    if after > 1.0 {
        for v in block.iter_mut().flatten() {
            *v /= after;
        }
    }
    block
}

impl SequenceScorer for LinearChain {
    fn alphabet(&self, x: &[f64], length: usize) -> Result<Vec<usize>> {
        let l = self.length_of(x)?;
        if l != length {
            return Err(Error::LengthMismatch {
                expected: l,
                got: length,
            });
        }
        Ok(vec![self.labels; l])
    }

    fn score_sequence(&self, x: &[f64], y: &[Label]) -> Result<f64> {
        self.chain_potentials(x)?.score(y)
    }

    fn hamming_augmented_max(
        &self,
        x: &[f64],
        y: &[Label],
        rho: f64,
    ) -> Option<Result<Option<f64>>> {
        Some(
            self.chain_potentials(x)
                .and_then(|p| augment::hamming_additive_dp(&p, y, rho)),
        )
    }
}

impl ChainScorer for LinearChain {
    fn chain_potentials(&self, x: &[f64]) -> Result<ChainPotentials> {
        let l = self.length_of(x)?;
        let unary = (0..l)
            .map(|k| {
                self.emission
                    .iter()
                    .map(|w| dot(w, &x[k * self.dim..(k + 1) * self.dim]))
                    .collect()
            })
            .collect();
        let pairwise = vec![self.transition.clone(); l - 1];
        ChainPotentials::new(unary, pairwise)
    }
}
