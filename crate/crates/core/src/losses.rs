//! Loss functions, empirical risks over samples, and exact risks over finite
//! distributions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::hypotheses::{margin_of, Predictor, Scorer};
use crate::label::Label;
use crate::rng::Rng;
use crate::structured::{enumerate_sequences, output_space_size, SequenceScorer};
use crate::verifier::VerifiedHypothesis;

/// Largest output space the surrogate losses enumerate before switching to
/// dynamic programming.
pub const DEFAULT_ENUMERATION_CAP: u128 = 4096;

pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.05;

/// Training data `S = (z_1, …, z_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<Y> {
    examples: Vec<(Vec<f64>, Y)>,
}

impl<Y> Sample<Y> {
    pub fn new(examples: Vec<(Vec<f64>, Y)>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument(
                "a sample needs at least one example".into(),
            ));
        }
        Ok(Self { examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[(Vec<f64>, Y)] {
        &self.examples
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &Y)> {
        self.examples.iter().map(|(x, y)| (x.as_slice(), y))
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.examples.iter().map(|(x, _)| x.clone()).collect()
    }
}

/// A distribution with finite support over `(x, y)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution<Y> {
    support: Vec<(Vec<f64>, Y, f64)>,
}

impl<Y: Clone> FiniteDistribution<Y> {
    pub fn new(support: Vec<(Vec<f64>, Y, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some((_, _, p)) = support.iter().find(|(_, _, p)| !(*p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "negative probability {p}"
            )));
        }
        let total: f64 = support.iter().map(|(_, _, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { support })
    }

    /// Normalises non-negative weights into a distribution.
    pub fn from_weights(support: Vec<(Vec<f64>, Y, f64)>) -> Result<Self> {
        let total: f64 = support.iter().map(|(_, _, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must have positive mass".into(),
            ));
        }
        Self::new(
            support
                .into_iter()
                .map(|(x, y, w)| (x, y, w / total))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(Vec<f64>, Y, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distinct inputs in order of first appearance.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for (x, _, _) in &self.support {
            if !out.contains(x) {
                out.push(x.clone());
            }
        }
        out
    }

    /// `m` i.i.d. support indices.
    pub fn sample_indices(&self, m: usize, rng: &mut Rng) -> Vec<usize> {
        let dist = WeightedIndex::new(self.support.iter().map(|(_, _, p)| *p))
            .expect("validated probabilities");
        (0..m).map(|_| dist.sample(rng)).collect()
    }

    pub fn sample(&self, m: usize, rng: &mut Rng) -> Result<Sample<Y>> {
        let idx = self.sample_indices(m, rng);
        Sample::new(
            idx.into_iter()
                .map(|i| (self.support[i].0.clone(), self.support[i].1.clone()))
                .collect(),
        )
    }

    /// `E_D[f(x, y)]`.
    pub fn expect<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64], &Y) -> Result<f64>,
    {
        let mut total = 0.0;
        for (x, y, p) in &self.support {
            total += p * f(x, y)?;
        }
        Ok(total)
    }
}

pub fn zero_one_loss<P: Predictor + ?Sized>(h: &P, x: &[f64], y: Label) -> Result<f64> {
    Ok(if h.classify(x)? == y { 0.0 } else { 1.0 })
}

/// `1[ρ_h(x, y) ≤ 0]`; a zero margin counts as an error.
pub fn margin_zero_one_loss<H: Scorer + ?Sized>(h: &H, x: &[f64], y: Label) -> Result<f64> {
    Ok(if h.margin(x, y)? <= 0.0 { 1.0 } else { 0.0 })
}

pub fn empirical_zero_one<P: Predictor + ?Sized>(h: &P, sample: &Sample<Label>) -> Result<f64> {
    let mut errors = 0.0;
    for (x, &y) in sample.iter() {
        errors += zero_one_loss(h, x, y)?;
    }
    Ok(errors / sample.len() as f64)
}

/// `Φ_ρ(t) = min(1, max(0, 1 − t/ρ))`.
pub fn phi_rho(t: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::NonpositiveRho(rho));
    }
    Ok((1.0 - t / rho).clamp(0.0, 1.0))
}

/// `L_{S,ρ}(h) = (1/m) Σ Φ_ρ(ρ_h(x_i, y_i))`.
pub fn empirical_margin_loss<H: Scorer + ?Sized>(
    h: &H,
    sample: &Sample<Label>,
    rho: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in sample.iter() {
        total += phi_rho(h.margin(x, y)?, rho)?;
    }
    Ok(total / sample.len() as f64)
}

/// An empirical loss of a verified hypothesis split over `S_1` (`c(x_i, y_i) = 1`)
/// and `S_0` (`c(x_i, y_i) = 0`), with the queries the evaluation spent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitLoss {
    pub loss: f64,
    /// Loss mass contributed by `S_1`, already divided by `m`.
    pub s1_loss: f64,
    pub s0: usize,
    pub s1: usize,
    pub queries: u64,
}

impl SplitLoss {
    /// `K |S_1| + |S_0|`.
    pub fn query_budget(&self, label_count: usize) -> u64 {
        (label_count * self.s1 + self.s0) as u64
    }
}

/// `L_S(h_c) = (1/m) Σ_{S_1} 1[h_c(x_i) ≠ y_i] + |S_0|/m`.
pub fn empirical_zero_one_with_split<H: Scorer>(
    vh: &VerifiedHypothesis<H>,
    sample: &Sample<Label>,
) -> Result<SplitLoss> {
    let (mut s0, mut s1, mut s1_errors, mut total, mut queries) = (0usize, 0usize, 0.0, 0.0, 0u64);
    for (x, &y) in sample.iter() {
        let mut oracle = vh.oracle(x);
        if !oracle.ask(y)? {
            s0 += 1;
            total += 1.0;
        } else {
            s1 += 1;
            if vh.resolve(x, &mut oracle)? != y {
                s1_errors += 1.0;
                total += 1.0;
            }
        }
        queries += oracle.queries;
    }
    vh.record_learning(queries);
    let m = sample.len() as f64;
    // accumulated in sample order so the result is bit-identical to the direct sum
    Ok(SplitLoss {
        loss: total / m,
        s1_loss: s1_errors / m,
        s0,
        s1,
        queries,
    })
}

/// `L_{S,ρ}(h_c)` for the score-masked hypothesis. Examples in `S_0` have a
/// strictly negative masked margin and contribute `Φ_ρ = 1` after one query.
pub fn empirical_margin_loss_with_split<H: Scorer>(
    vh: &VerifiedHypothesis<H>,
    sample: &Sample<Label>,
    rho: f64,
) -> Result<SplitLoss> {
    phi_rho(0.0, rho)?;
    let k = vh.label_count();
    let m_const = vh.mask_constant();
    let (mut s0, mut s1, mut s1_total, mut total, mut queries) = (0usize, 0usize, 0.0, 0.0, 0u64);
    for (x, &y) in sample.iter() {
        let mut oracle = vh.oracle(x);
        if !oracle.ask(y)? {
            s0 += 1;
            total += 1.0;
        } else {
            s1 += 1;
            let mut scores = vh.base().scores(x)?;
            for (i, s) in scores.iter_mut().enumerate() {
                if s.abs() >= m_const {
                    return Err(Error::MaskConstantViolated {
                        score: *s,
                        mask: m_const,
                    });
                }
                if !oracle.ask(Label::from_index(i))? {
                    *s = -m_const;
                }
            }
            if k < 2 {
                return Err(Error::SingleClass);
            }
            let term = phi_rho(margin_of(&scores, y), rho)?;
            s1_total += term;
            total += term;
        }
        queries += oracle.queries;
    }
    vh.record_learning(queries);
    let m = sample.len() as f64;
    Ok(SplitLoss {
        loss: total / m,
        s1_loss: s1_total / m,
        s0,
        s1,
        queries,
    })
}

/// `L_D(h) = Σ p_i 1[h(x_i) ≠ y_i]`.
pub fn exact_risk<P: Predictor + ?Sized>(h: &P, dist: &FiniteDistribution<Label>) -> Result<f64> {
    dist.expect(|x, &y| zero_one_loss(h, x, y))
}

/// A bounded definite loss between label sequences.
pub trait SequenceLoss {
    fn loss(&self, y: &[Label], y_prime: &[Label]) -> Result<f64>;

    /// `B = max_{y, y′} L(y, y′)` over sequences with the given alphabet sizes.
    fn max_loss(&self, alphabet: &[usize]) -> f64;

    /// Whether the loss is the normalised Hamming loss (enables dynamic programming).
    fn is_hamming(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Hamming;

/// `(1/l) Σ_k 1[y_k ≠ y′_k]`.
pub fn hamming_loss(y: &[Label], y_prime: &[Label]) -> Result<f64> {
    if y.len() != y_prime.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: y_prime.len(),
        });
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let diff = y.iter().zip(y_prime).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / y.len() as f64)
}

impl SequenceLoss for Hamming {
    fn loss(&self, y: &[Label], y_prime: &[Label]) -> Result<f64> {
        hamming_loss(y, y_prime)
    }

    fn max_loss(&self, alphabet: &[usize]) -> f64 {
        if alphabet.is_empty() {
            return 0.0;
        }
        alphabet.iter().filter(|&&n| n >= 2).count() as f64 / alphabet.len() as f64
    }

    fn is_hamming(&self) -> bool {
        true
    }
}

/// `Φ*(t) = min(B, max(0, t))`.
pub fn phi_star(t: f64, bound: f64) -> f64 {
    t.max(0.0).min(bound)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surrogate {
    Additive,
    Multiplicative,
}

fn surrogate_inner(mode: Surrogate, task_loss: f64, score_gap: f64, rho: f64) -> f64 {
    match mode {
        Surrogate::Additive => task_loss - score_gap / rho,
        Surrogate::Multiplicative => task_loss * (1.0 - score_gap / rho),
    }
}

/// `max_{y′≠y} [inner(y′)]` by enumeration; `None` if `Y = {y}`.
pub fn surrogate_max_brute_force<S, L>(
    h: &S,
    loss: &L,
    x: &[f64],
    y: &[Label],
    rho: f64,
    mode: Surrogate,
    cap: u128,
) -> Result<Option<f64>>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    let alphabet = h.alphabet(x, y.len())?;
    let own = h.score_sequence(x, y)?;
    let mut best: Option<f64> = None;
    for candidate in enumerate_sequences(&alphabet, cap)? {
        if candidate.as_slice() == y {
            continue;
        }
        let gap = own - h.score_sequence(x, &candidate)?;
        let value = surrogate_inner(mode, loss.loss(&candidate, y)?, gap, rho);
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    Ok(best)
}

/// One example's surrogate term `Φ*(max_{y′≠y} …)`.
pub fn surrogate_term<S, L>(
    h: &S,
    loss: &L,
    x: &[f64],
    y: &[Label],
    rho: f64,
    mode: Surrogate,
    cap: u128,
) -> Result<f64>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    phi_rho(0.0, rho)?;
    let alphabet = h.alphabet(x, y.len())?;
    let bound = loss.max_loss(&alphabet);
    let size = output_space_size(&alphabet);
    let inner = if size <= cap {
        surrogate_max_brute_force(h, loss, x, y, rho, mode, cap)?
    } else if mode == Surrogate::Additive && loss.is_hamming() {
        match h.hamming_augmented_max(x, y, rho) {
            Some(v) => v?,
            None => return Err(Error::TooLarge { size, cap }),
        }
    } else {
        return Err(Error::TooLarge { size, cap });
    };
    Ok(inner.map_or(0.0, |t| phi_star(t, bound)))
}

fn surrogate_loss<S, L>(
    h: &S,
    sample: &Sample<Vec<Label>>,
    rho: f64,
    loss: &L,
    mode: Surrogate,
    cap: u128,
) -> Result<f64>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    let mut total = 0.0;
    for (x, y) in sample.iter() {
        total += surrogate_term(h, loss, x, y, rho, mode, cap)?;
    }
    Ok(total / sample.len() as f64)
}

/// `L^add_{S,ρ}(h) = (1/m) Σ Φ*(max_{y′≠y_i} L(y′, y_i) − (h(x_i, y_i) − h(x_i, y′))/ρ)`.
pub fn additive_surrogate_loss<S, L>(
    h: &S,
    sample: &Sample<Vec<Label>>,
    rho: f64,
    loss: &L,
) -> Result<f64>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    surrogate_loss(
        h,
        sample,
        rho,
        loss,
        Surrogate::Additive,
        DEFAULT_ENUMERATION_CAP,
    )
}

/// `L^mult_{S,ρ}(h) = (1/m) Σ Φ*(max_{y′≠y_i} L(y′, y_i)(1 − (h(x_i, y_i) − h(x_i, y′))/ρ))`.
pub fn multiplicative_surrogate_loss<S, L>(
    h: &S,
    sample: &Sample<Vec<Label>>,
    rho: f64,
    loss: &L,
) -> Result<f64>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    surrogate_loss(
        h,
        sample,
        rho,
        loss,
        Surrogate::Multiplicative,
        DEFAULT_ENUMERATION_CAP,
    )
}

pub fn surrogate_loss_with_cap<S, L>(
    h: &S,
    sample: &Sample<Vec<Label>>,
    rho: f64,
    loss: &L,
    mode: Surrogate,
    cap: u128,
) -> Result<f64>
where
    S: SequenceScorer + ?Sized,
    L: SequenceLoss + ?Sized,
{
    surrogate_loss(h, sample, rho, loss, mode, cap)
}
