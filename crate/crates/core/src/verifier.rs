//! The concurrent verifier: wraps a base hypothesis so that every emitted
//! label satisfies a requirement, either by replacing a rejected prediction
//! with a fallback label or by masking forbidden scores with `−M`.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::{argmax, Predictor, Scorer};
use crate::label::Label;
use crate::requirements::{FeasibilityReport, Requirement};

/// How a rejected prediction is replaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Smallest feasible label.
    MinIndexFeasible,
    /// Highest-scoring feasible label.
    ConstrainedArgmax,
}

/// Memoised access to `c(x, ·)` for a single input; each fresh lookup is one query.
pub(crate) struct QueryOracle<'a> {
    requirement: &'a Requirement,
    x: &'a [f64],
    known: Vec<Option<bool>>,
    pub(crate) queries: u64,
}

impl<'a> QueryOracle<'a> {
    pub(crate) fn new(requirement: &'a Requirement, x: &'a [f64], labels: usize) -> Self {
        Self {
            requirement,
            x,
            known: vec![None; labels],
            queries: 0,
        }
    }

    pub(crate) fn ask(&mut self, y: Label) -> Result<bool> {
        if let Some(v) = self.known[y.index()] {
            return Ok(v);
        }
        let v = self.requirement.evaluate(self.x, y)?;
        self.queries += 1;
        self.known[y.index()] = Some(v);
        Ok(v)
    }
}

#[derive(Debug, Default)]
struct QueryCounters {
    inference: AtomicU64,
    inference_calls: AtomicU64,
    max_per_inference: AtomicU64,
    learning: AtomicU64,
    learning_evaluations: AtomicU64,
}

/// Cumulative requirement-query counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryReport {
    pub total: u64,
    pub inference: u64,
    pub inference_calls: u64,
    pub max_per_inference: u64,
    pub learning: u64,
    pub learning_evaluations: u64,
}

/// A base hypothesis `h` paired with a requirement `c`, realising `h_c`.
#[derive(Debug)]
pub struct VerifiedHypothesis<H> {
    base: H,
    requirement: Requirement,
    strategy: Strategy,
    mask_constant: f64,
    probes: Vec<Vec<f64>>,
    counters: QueryCounters,
}

impl<H: Scorer> VerifiedHypothesis<H> {
    /// Validates feasibility on `probes` and fixes `M = max |h(x, y)| + 1` over them.
    pub fn wrap(
        base: H,
        requirement: Requirement,
        strategy: Strategy,
        probes: &[Vec<f64>],
    ) -> Result<Self> {
        if requirement.label_count() != base.label_count() {
            return Err(Error::InvalidArgument(format!(
                "requirement has {} labels, hypothesis {}",
                requirement.label_count(),
                base.label_count()
            )));
        }
        requirement.require_feasible(probes)?;
        let mut max_abs: f64 = 0.0;
        for x in probes {
            for s in base.scores(x)? {
                max_abs = max_abs.max(s.abs());
            }
        }
        Ok(Self {
            base,
            requirement,
            strategy,
            mask_constant: max_abs + 1.0,
            probes: probes.to_vec(),
            counters: QueryCounters::default(),
        })
    }

    pub fn base(&self) -> &H {
        &self.base
    }

    pub fn requirement(&self) -> &Requirement {
        &self.requirement
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn mask_constant(&self) -> f64 {
        self.mask_constant
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn label_count(&self) -> usize {
        self.base.label_count()
    }

    /// Score-masked view of the same hypothesis.
    pub fn masked(&self) -> MaskedHypothesis<&H> {
        mask_scores(&self.base, &self.requirement, self.mask_constant)
    }

    pub(crate) fn resolve(&self, x: &[f64], oracle: &mut QueryOracle<'_>) -> Result<Label> {
        let scores = self.base.scores(x)?;
        let predicted = argmax(&scores);
        if oracle.ask(predicted)? {
            return Ok(predicted);
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        if self.strategy == Strategy::ConstrainedArgmax {
            // stable: equal scores keep increasing label order
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        }
        for i in order {
            let y = Label::from_index(i);
            if y != predicted && oracle.ask(y)? {
                return Ok(y);
            }
        }
        Err(Error::InfeasibleInput(FeasibilityReport {
            checked: 1,
            infeasible: vec![0],
        }))
    }

    pub(crate) fn oracle<'a>(&'a self, x: &'a [f64]) -> QueryOracle<'a> {
        QueryOracle::new(&self.requirement, x, self.label_count())
    }

    /// `h_c(x)` and the number of requirement queries it took.
    pub fn infer(&self, x: &[f64]) -> Result<(Label, u64)> {
        let mut oracle = self.oracle(x);
        let label = self.resolve(x, &mut oracle)?;
        let q = oracle.queries;
        self.counters.inference.fetch_add(q, Ordering::Relaxed);
        self.counters
            .inference_calls
            .fetch_add(1, Ordering::Relaxed);
        self.counters
            .max_per_inference
            .fetch_max(q, Ordering::Relaxed);
        Ok((label, q))
    }

    pub(crate) fn record_learning(&self, queries: u64) {
        self.counters.learning.fetch_add(queries, Ordering::Relaxed);
        self.counters
            .learning_evaluations
            .fetch_add(1, Ordering::Relaxed);
    }

    pub fn query_report(&self) -> QueryReport {
        let c = &self.counters;
        let inference = c.inference.load(Ordering::Relaxed);
        let learning = c.learning.load(Ordering::Relaxed);
        QueryReport {
            total: inference + learning,
            inference,
            inference_calls: c.inference_calls.load(Ordering::Relaxed),
            max_per_inference: c.max_per_inference.load(Ordering::Relaxed),
            learning,
            learning_evaluations: c.learning_evaluations.load(Ordering::Relaxed),
        }
    }
}

impl<H: Scorer> Predictor for VerifiedHypothesis<H> {
    fn classes(&self) -> usize {
        self.label_count()
    }

    fn classify(&self, x: &[f64]) -> Result<Label> {
        self.infer(x).map(|(y, _)| y)
    }
}

/// `h_c(x, y) = h(x, y)` where `c(x, y) = 1`, else `−M`.
#[derive(Clone, Debug)]
pub struct MaskedHypothesis<H> {
    base: H,
    requirement: Requirement,
    mask_constant: f64,
}

pub fn mask_scores<H: Scorer>(
    base: H,
    requirement: &Requirement,
    mask_constant: f64,
) -> MaskedHypothesis<H> {
    MaskedHypothesis {
        base,
        requirement: requirement.clone(),
        mask_constant,
    }
}

impl<H: Scorer> MaskedHypothesis<H> {
    pub fn mask_constant(&self) -> f64 {
        self.mask_constant
    }

    pub fn base(&self) -> &H {
        &self.base
    }
}

impl<H: Scorer> Scorer for MaskedHypothesis<H> {
    fn label_count(&self) -> usize {
        self.base.label_count()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scores = self.base.scores(x)?;
        for (i, s) in scores.iter_mut().enumerate() {
            if s.abs() >= self.mask_constant {
                return Err(Error::MaskConstantViolated {
                    score: *s,
                    mask: self.mask_constant,
                });
            }
            if !self.requirement.evaluate(x, Label::from_index(i))? {
                *s = -self.mask_constant;
            }
        }
        Ok(scores)
    }
}
