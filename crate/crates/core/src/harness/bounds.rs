//! Empirical checks of the uniform generalization bounds for verified hypotheses.
//!
//! Every candidate's exact risk is computed once on the finite distribution.
//! Each draw then samples `S`, evaluates every candidate's empirical surrogate
//! loss, and tests the candidate maximising `LHS − RHS`: if the bound holds for
//! that one, it holds uniformly over the pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{monte_carlo, rademacher_signs, ComplexityEstimate, SupremumOracle};
use crate::error::Result;
use crate::hypotheses::{l2, margin_of, FeatureMap, Scorer, ScoringHypothesis};
use crate::losses::{
    hamming_loss, phi_rho, surrogate_term, FiniteDistribution, Hamming, SequenceLoss, Surrogate,
};
use crate::rng::{derive_seed, rng_for};
use crate::structured::{brute_force_decode, mask_structured, LinearChain, BRUTE_FORCE_CAP};
use crate::verifier::mask_scores;

use super::config::ExperimentConfig;
use super::generators::{gen_multiclass, gen_structured};
use super::learn::first_min;

/// One sample draw of a bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub draw_id: usize,
    pub m: usize,
    pub rho: f64,
    pub delta: f64,
    /// Exact risk of the adversarial candidate.
    pub lhs: f64,
    /// Its empirical surrogate loss on this draw.
    pub empirical_loss: f64,
    pub complexity_mean: f64,
    pub complexity_stderr: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Index of the candidate maximising `LHS − RHS`.
    pub candidate: usize,
    /// The empirical-risk minimiser on this draw.
    pub erm_candidate: usize,
    pub erm_lhs: f64,
    pub erm_rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub surrogate: String,
    pub candidates: usize,
    pub draws: usize,
    pub delta: f64,
    pub complexity: ComplexityEstimate,
    /// Coefficient times the complexity estimate.
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub violations: usize,
    pub violation_fraction: f64,
    pub threshold: f64,
    pub holds: bool,
    pub records: Vec<BoundRecord>,
}

/// Exact risks and per-support-entry surrogate values of the candidate pool.
struct CandidateTable {
    risks: Vec<f64>,
    surrogate: Vec<Vec<f64>>,
}

struct BoundTerms {
    surrogate: &'static str,
    complexity: ComplexityEstimate,
    coefficient: f64,
    confidence: f64,
}

fn confidence(scale: f64, delta: f64, m: usize) -> f64 {
    scale * ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

fn run_draws<Y: Clone + Sync>(
    cfg: &ExperimentConfig,
    dist: &FiniteDistribution<Y>,
    table: &CandidateTable,
    terms: BoundTerms,
) -> BoundReport {
    let draw_seed = derive_seed(cfg.seed, 3);
    let slack = terms.coefficient * terms.complexity.mean + terms.confidence;
    let records: Vec<BoundRecord> = (0..cfg.draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_for(draw_seed, j as u64);
            let mut counts = vec![0usize; dist.len()];
            for i in dist.sample_indices(cfg.m, &mut rng) {
                counts[i] += 1;
            }
            let empirical: Vec<f64> = table
                .surrogate
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&counts)
                        .map(|(v, &n)| v * n as f64)
                        .sum::<f64>()
                        / cfg.m as f64
                })
                .collect();
            let gap: Vec<f64> = table
                .risks
                .iter()
                .zip(&empirical)
                .map(|(r, e)| r - (e + slack))
                .collect();
            let worst = first_min(&gap.iter().map(|g| -g).collect::<Vec<_>>());
            let erm = first_min(&empirical);
            BoundRecord {
                draw_id: j,
                m: cfg.m,
                rho: cfg.rho,
                delta: cfg.delta,
                lhs: table.risks[worst],
                empirical_loss: empirical[worst],
                complexity_mean: terms.complexity.mean,
                complexity_stderr: terms.complexity.std_error,
                rhs: empirical[worst] + slack,
                holds: table.risks[worst] <= empirical[worst] + slack,
                candidate: worst,
                erm_candidate: erm,
                erm_lhs: table.risks[erm],
                erm_rhs: empirical[erm] + slack,
            }
        })
        .collect();
    let violations = records.iter().filter(|r| !r.holds).count();
    let violation_fraction = violations as f64 / cfg.draws as f64;
    let threshold = cfg.violation_threshold();
    BoundReport {
        surrogate: terms.surrogate.to_string(),
        candidates: table.risks.len(),
        draws: cfg.draws,
        delta: cfg.delta,
        complexity_term: terms.coefficient * terms.complexity.mean,
        complexity: terms.complexity,
        confidence_term: terms.confidence,
        violations,
        violation_fraction,
        threshold,
        holds: violation_fraction <= threshold,
        records,
    }
}

/// `L_D(h_c) ≤ L_{S,ρ}(h_c) + (4K/ρ) R_m(Π_1(H)) + √(log(1/δ)/2m)` over unit-ball linear scorers.
pub fn run_bound_check_multiclass(cfg: &ExperimentConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let requirement = cfg.load_requirement()?;
    let inst = gen_multiclass(
        &mut rng_for(cfg.seed, 0),
        cfg.support,
        cfg.label_count,
        cfg.d,
        cfg.p,
        requirement,
    )?;
    let mut pool_rng = rng_for(cfg.seed, 1);
    let mut pool = vec![inst.teacher.clone()];
    pool.extend((0..cfg.candidates).map(|_| {
        ScoringHypothesis::sample_with(
            &mut pool_rng,
            cfg.d,
            cfg.label_count,
            cfg.p,
            FeatureMap::Identity,
        )
    }));
    // each block norm is at most the group norm, so |h(x, y)| ≤ ‖x‖ on the unit ball
    let mask = inst.inputs.iter().map(|x| l2(x)).fold(0.0, f64::max) + 1.0;
    let rows: Vec<(f64, Vec<f64>)> = pool
        .par_iter()
        .map(|h| {
            let masked = mask_scores(h, &inst.requirement, mask);
            let (mut risk, mut phi) = (0.0, Vec::with_capacity(inst.dist.len()));
            for (x, y, prob) in inst.dist.support() {
                let margin = margin_of(&masked.scores(x)?, *y);
                if margin <= 0.0 {
                    risk += prob;
                }
                phi.push(phi_rho(margin, cfg.rho)?);
            }
            Ok((risk, phi))
        })
        .collect::<Result<_>>()?;
    let (risks, surrogate) = rows.into_iter().unzip();
    let dist = &inst.dist;
    let complexity = monte_carlo(
        "rademacher_projection",
        cfg.trials,
        derive_seed(cfg.seed, 2),
        |rng| {
            let features = dist
                .sample_indices(cfg.m, rng)
                .into_iter()
                .map(|i| dist.support()[i].0.clone())
                .collect();
            let sigma = rademacher_signs(rng, cfg.m);
            Ok(SupremumOracle::Projection { features }.sup(&sigma)? / cfg.m as f64)
        },
    )?;
    let terms = BoundTerms {
        surrogate: "margin",
        complexity,
        coefficient: 4.0 * cfg.label_count as f64 / cfg.rho,
        confidence: confidence(1.0, cfg.delta, cfg.m),
    };
    Ok(run_draws(
        cfg,
        &inst.dist,
        &CandidateTable { risks, surrogate },
        terms,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredBoundReport {
    pub additive: BoundReport,
    pub multiplicative: BoundReport,
    /// `B`, the largest Hamming loss on the output space.
    pub loss_bound: f64,
    pub holds: bool,
}

fn unit_blocks(mut chain: LinearChain) -> LinearChain {
    let (e, t) = chain.block_norms();
    for v in chain.emission.iter_mut().flatten() {
        *v /= e.max(f64::MIN_POSITIVE);
    }
    for v in chain.transition.iter_mut().flatten() {
        *v /= t.max(f64::MIN_POSITIVE);
    }
    chain
}

/// The additive and multiplicative factor-graph bounds over unit-block linear chains.
pub fn run_bound_check_structured(cfg: &ExperimentConfig) -> Result<StructuredBoundReport> {
    cfg.validate()?;
    let requirement = cfg.load_requirement()?;
    let inst = gen_structured(
        &mut rng_for(cfg.seed, 0),
        cfg.support,
        cfg.label_count,
        cfg.d,
        cfg.l,
        requirement,
    )?;
    let mut pool_rng = rng_for(cfg.seed, 1);
    let mut pool = vec![unit_blocks(inst.teacher.clone())];
    pool.extend(
        (0..cfg.candidates)
            .map(|_| LinearChain::sample_unit_blocks(cfg.label_count, cfg.d, &mut pool_rng)),
    );
    // |h(x, y)| ≤ Σ_k ‖x_k‖ + (l − 1) when both blocks lie in the unit ball
    let mask = inst
        .inputs
        .iter()
        .map(|x| x.chunks(cfg.d).map(l2).sum::<f64>() + (cfg.l - 1) as f64)
        .fold(0.0, f64::max)
        + 1.0;
    let loss_bound = Hamming.max_loss(&vec![cfg.label_count; cfg.l]);
    type Row = (f64, Vec<f64>, Vec<f64>);
    let rows: Vec<Row> = pool
        .par_iter()
        .map(|h| {
            let masked = mask_structured(h, &inst.requirement, mask);
            let (mut risk, mut add, mut mult) = (0.0, Vec::new(), Vec::new());
            for (x, y, prob) in inst.dist.support() {
                let predicted = brute_force_decode(&masked, x, y.len(), None, BRUTE_FORCE_CAP)?;
                risk += prob * hamming_loss(&predicted, y)?;
                add.push(surrogate_term(
                    &masked,
                    &Hamming,
                    x,
                    y,
                    cfg.rho,
                    Surrogate::Additive,
                    BRUTE_FORCE_CAP,
                )?);
                mult.push(surrogate_term(
                    &masked,
                    &Hamming,
                    x,
                    y,
                    cfg.rho,
                    Surrogate::Multiplicative,
                    BRUTE_FORCE_CAP,
                )?);
            }
            Ok((risk, add, mult))
        })
        .collect::<Result<_>>()?;
    let risks: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (add, mult): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().map(|r| (r.1, r.2)).unzip();
    let dist = &inst.dist;
    let complexity = monte_carlo(
        "factor_graph_rademacher",
        cfg.trials,
        derive_seed(cfg.seed, 2),
        |rng| {
            let inputs: Vec<Vec<f64>> = dist
                .sample_indices(cfg.m, rng)
                .into_iter()
                .map(|i| dist.support()[i].0.clone())
                .collect();
            let class = LinearChain::factored_class(cfg.label_count, cfg.d, &inputs)?;
            let sigma = rademacher_signs(rng, class.terms());
            Ok(class.sup(&sigma)? / cfg.m as f64)
        },
    )?;
    let root2 = std::f64::consts::SQRT_2;
    let conf = confidence(loss_bound, cfg.delta, cfg.m);
    let additive = run_draws(
        cfg,
        dist,
        &CandidateTable {
            risks: risks.clone(),
            surrogate: add,
        },
        BoundTerms {
            surrogate: "additive",
            complexity: complexity.clone(),
            coefficient: 4.0 * root2 / cfg.rho,
            confidence: conf,
        },
    );
    let multiplicative = run_draws(
        cfg,
        dist,
        &CandidateTable {
            risks,
            surrogate: mult,
        },
        BoundTerms {
            surrogate: "multiplicative",
            complexity,
            coefficient: 4.0 * root2 * loss_bound / cfg.rho,
            confidence: conf,
        },
    );
    let holds = additive.holds && multiplicative.holds;
    Ok(StructuredBoundReport {
        additive,
        multiplicative,
        loss_bound,
        holds,
    })
}
