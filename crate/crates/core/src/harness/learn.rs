//! Simple learners: exact ERM over finite classes and seeded random search over unit balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::{FeatureMap, Scorer, ScoringHypothesis};
use crate::label::Label;
use crate::losses::{
    empirical_margin_loss, empirical_margin_loss_with_split, empirical_zero_one,
    empirical_zero_one_with_split, Sample,
};
use crate::requirements::Requirement;
use crate::rng::rng;
use crate::verifier::{Strategy, VerifiedHypothesis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    ZeroOne,
    Margin(f64),
}

/// The chosen member and what choosing it cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErmOutcome {
    pub index: usize,
    pub loss: f64,
    /// Empirical loss of every candidate, in order.
    pub losses: Vec<f64>,
    /// Requirement queries over all evaluations (zero without a requirement).
    pub queries: u64,
    /// `Σ (K |S_1| + |S_0|)` over the same evaluations.
    pub query_budget: u64,
}

/// Empirical loss of `h` or, with a requirement, of its verified form.
pub fn evaluate_loss<H: Scorer + Clone>(
    h: &H,
    sample: &Sample<Label>,
    loss: LossSpec,
    with_cv: Option<&Requirement>,
) -> Result<(f64, u64, u64)> {
    match with_cv {
        None => {
            let value = match loss {
                LossSpec::ZeroOne => empirical_zero_one(h, sample)?,
                LossSpec::Margin(rho) => empirical_margin_loss(h, sample, rho)?,
            };
            Ok((value, 0, 0))
        }
        Some(req) => {
            let vh = VerifiedHypothesis::wrap(
                h.clone(),
                req.clone(),
                Strategy::ConstrainedArgmax,
                &sample.inputs(),
            )?;
            let split = match loss {
                LossSpec::ZeroOne => empirical_zero_one_with_split(&vh, sample)?,
                LossSpec::Margin(rho) => empirical_margin_loss_with_split(&vh, sample, rho)?,
            };
            Ok((
                split.loss,
                split.queries,
                split.query_budget(h.label_count()),
            ))
        }
    }
}

/// Exact ERM by enumeration; ties go to the first minimiser.
pub fn learn_erm_finite<H: Scorer + Clone>(
    members: &[H],
    sample: &Sample<Label>,
    loss: LossSpec,
    with_cv: Option<&Requirement>,
) -> Result<ErmOutcome> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("empty hypothesis class".into()));
    }
    let mut losses = Vec::with_capacity(members.len());
    let (mut queries, mut budget) = (0, 0);
    for h in members {
        let (value, q, b) = evaluate_loss(h, sample, loss, with_cv)?;
        losses.push(value);
        queries += q;
        budget += b;
    }
    let index = first_min(&losses);
    Ok(ErmOutcome {
        index,
        loss: losses[index],
        losses,
        queries,
        query_budget: budget,
    })
}

pub(crate) fn first_min(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// ERM over `candidates` seeded draws from the unit `ℓ_{2,p}` ball of linear scorers.
pub fn learn_erm_linear(
    sample: &Sample<Label>,
    label_count: usize,
    p: f64,
    candidates: usize,
    seed: u64,
    loss: LossSpec,
    with_cv: Option<&Requirement>,
) -> Result<(ScoringHypothesis, ErmOutcome)> {
    let dim = sample.examples().first().map_or(0, |(x, _)| x.len());
    let mut generator = rng(seed);
    let pool: Vec<ScoringHypothesis> = (0..candidates)
        .map(|_| {
            ScoringHypothesis::sample_with(
                &mut generator,
                dim,
                label_count,
                p,
                FeatureMap::Identity,
            )
        })
        .collect();
    let outcome = learn_erm_finite(&pool, sample, loss, with_cv)?;
    Ok((pool[outcome.index].clone(), outcome))
}
