//! Inference-time verification: the sandwich bound and the two-point counterexample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hypotheses::{Scorer, TabulatedHypothesis};
use crate::losses::{empirical_zero_one, exact_risk};
use crate::requirements::Requirement;
use crate::rng::{derive_seed, rng_for};
use crate::verifier::{Strategy, VerifiedHypothesis};

use super::config::ExperimentConfig;
use super::generators::{
    finite_grid, gen_counterexample, gen_realizable, random_point_requirement,
};
use super::learn::{learn_erm_finite, LossSpec};

/// Members of the finite hypothesis grid per instance.
pub const GRID_SIZE: usize = 16;
/// Probability that a grid member's label at a point is resampled.
pub const GRID_FLIP: f64 = 0.3;
const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub instance: usize,
    pub strategy: Strategy,
    /// `c ≡ 1` for this instance.
    pub trivial: bool,
    /// `c(x, f(x)) = 1` on the whole support.
    pub consistent: bool,
    /// `L_D(f_c)`, the discrepancy between the distribution and the requirement.
    pub risk_f_c: f64,
    /// `L_D(ĥ_c)`.
    pub risk_h_c: f64,
    /// `ε̂ = L_D(ĥ)`.
    pub risk_h: f64,
    /// `L_S(ĥ_c)`.
    pub empirical_risk_h_c: f64,
    pub max_queries_per_inference: u64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub instances: usize,
    pub violations: usize,
    pub budget_violations: usize,
    pub holds: bool,
    pub records: Vec<SandwichRecord>,
}

fn fully_consistent(
    req: &Requirement,
    truth: &TabulatedHypothesis,
    domain: &[Vec<f64>],
) -> Result<bool> {
    for x in domain {
        if !req.evaluate(x, truth.predict(x)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sandwich_instance(
    cfg: &ExperimentConfig,
    i: usize,
    given: Option<&Requirement>,
) -> Result<SandwichRecord> {
    let seed = derive_seed(cfg.seed, i as u64);
    let inst = gen_realizable(seed, cfg.support, cfg.label_count, 0.0)?;
    let mut rng = rng_for(seed, 1);
    let trivial = given.is_none() && i % 10 == 9;
    let req = match given {
        Some(r) => r.clone(),
        None if trivial => Requirement::always(cfg.label_count),
        None => random_point_requirement(&mut rng, &inst.domain, cfg.label_count)?,
    };
    let (members, _) = finite_grid(
        &mut rng,
        &inst.domain,
        &inst.truth_labels,
        cfg.label_count,
        GRID_SIZE,
        GRID_FLIP,
    )?;
    let sample = inst.dist.sample(cfg.m, &mut rng)?;
    let erm = learn_erm_finite(&members, &sample, LossSpec::ZeroOne, None)?;
    let strategy = if i.is_multiple_of(2) {
        Strategy::MinIndexFeasible
    } else {
        Strategy::ConstrainedArgmax
    };
    let h_hat = &members[erm.index];
    let h_c = VerifiedHypothesis::wrap(h_hat.clone(), req.clone(), strategy, &inst.domain)?;
    let f_c = VerifiedHypothesis::wrap(inst.truth.clone(), req.clone(), strategy, &inst.domain)?;
    let risk_h = exact_risk(h_hat, &inst.dist)?;
    let risk_f_c = exact_risk(&f_c, &inst.dist)?;
    let risk_h_c = exact_risk(&h_c, &inst.dist)?;
    let empirical_risk_h_c = empirical_zero_one(&h_c, &sample)?;
    let max_queries = h_c
        .query_report()
        .max_per_inference
        .max(f_c.query_report().max_per_inference);
    Ok(SandwichRecord {
        instance: i,
        strategy,
        trivial,
        consistent: fully_consistent(&req, &inst.truth, &inst.domain)?,
        risk_f_c,
        risk_h_c,
        risk_h,
        empirical_risk_h_c,
        max_queries_per_inference: max_queries,
        lower_holds: risk_f_c <= risk_h_c + TOLERANCE,
        upper_holds: risk_h_c <= risk_f_c + risk_h + TOLERANCE,
    })
}

/// `L_D(f_c) ≤ L_D(ĥ_c) ≤ L_D(f_c) + L_D(ĥ)` on `cfg.draws` seeded realizable instances,
/// with `ĥ` the empirical-risk minimiser over a finite grid containing `f`.
pub fn run_itv_experiment(cfg: &ExperimentConfig) -> Result<SandwichReport> {
    cfg.validate()?;
    let given = cfg.load_requirement()?;
    let records: Vec<SandwichRecord> = (0..cfg.draws)
        .into_par_iter()
        .map(|i| sandwich_instance(cfg, i, given.as_ref()))
        .collect::<Result<_>>()?;
    let violations = records
        .iter()
        .filter(|r| !(r.lower_holds && r.upper_holds))
        .count();
    let budget_violations = records
        .iter()
        .filter(|r| r.max_queries_per_inference > cfg.label_count as u64)
        .count();
    Ok(SandwichReport {
        instances: records.len(),
        violations,
        budget_violations,
        holds: violations == 0 && budget_violations == 0,
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub risk_h0: f64,
    pub risk_h1: f64,
    pub risk_h0_c: f64,
    pub risk_h1_c: f64,
    /// Member returned by the learn-then-verify algorithm (an exact-risk minimiser of `H`).
    pub itv_pick: usize,
    /// `L_D(ĥ_c) − min_{h_c} L_D(h_c)`.
    pub itv_gap: f64,
    /// Member returned by ERM over `H_c`.
    pub ltv_pick: usize,
    pub ltv_gap: f64,
    /// ERM over `H_c` on a sample of size `m` agrees with the exact-risk choice.
    pub ltv_sample_pick: usize,
    pub ltv_sample_queries: u64,
    pub ltv_sample_budget: u64,
    /// `c(x, f(x)) = 1` on both points.
    pub consistent: bool,
    pub holds: bool,
}

pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<CounterexampleReport> {
    cfg.validate()?;
    let inst = gen_counterexample();
    let members = [inst.h0.clone(), inst.h1.clone()];
    let risks = [
        exact_risk(&inst.h0, &inst.dist)?,
        exact_risk(&inst.h1, &inst.dist)?,
    ];
    let verified = members
        .iter()
        .map(|h| {
            VerifiedHypothesis::wrap(
                h.clone(),
                inst.requirement.clone(),
                Strategy::ConstrainedArgmax,
                &inst.domain,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let risks_c = [
        exact_risk(&verified[0], &inst.dist)?,
        exact_risk(&verified[1], &inst.dist)?,
    ];
    // both members tie on L_D, so returning h1 is a valid (near-)ERM choice
    let itv_pick = if risks[1] <= risks[0] { 1 } else { 0 };
    let best_c = risks_c[0].min(risks_c[1]);
    let ltv_pick = if risks_c[0] <= risks_c[1] { 0 } else { 1 };
    let sample = inst.dist.sample(cfg.m, &mut rng_for(cfg.seed, 0))?;
    let sampled = learn_erm_finite(
        &members,
        &sample,
        LossSpec::ZeroOne,
        Some(&inst.requirement),
    )?;
    let consistent = fully_consistent(&inst.requirement, &inst.truth, &inst.domain)?;
    let itv_gap = risks_c[itv_pick] - best_c;
    let ltv_gap = risks_c[ltv_pick] - best_c;
    Ok(CounterexampleReport {
        risk_h0: risks[0],
        risk_h1: risks[1],
        risk_h0_c: risks_c[0],
        risk_h1_c: risks_c[1],
        itv_pick,
        itv_gap,
        ltv_pick,
        ltv_gap,
        ltv_sample_pick: sampled.index,
        ltv_sample_queries: sampled.queries,
        ltv_sample_budget: sampled.query_budget,
        consistent,
        holds: itv_gap == 0.5
            && ltv_gap == 0.0
            && consistent
            && sampled.index == ltv_pick
            && sampled.queries <= sampled.query_budget,
    })
}
