//! Seeded synthetic instances.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hypotheses::{FeatureMap, Scorer, ScoringHypothesis, TabulatedHypothesis};
use crate::label::Label;
use crate::losses::FiniteDistribution;
use crate::requirements::{AtomicPredicate, Comparator, LabelSpace, Requirement, Rule};
use crate::rng::Rng;
use crate::structured::{viterbi, LinearChain};

/// Label noise mass used by the bound-check generators.
pub const LABEL_NOISE: f64 = 0.1;

/// A finite realizable problem: inputs `x_j = (j)` with deterministic labels `f(x_j)`.
#[derive(Clone, Debug)]
pub struct RealizableInstance {
    pub dist: FiniteDistribution<Label>,
    pub truth: TabulatedHypothesis,
    pub domain: Vec<Vec<f64>>,
    pub truth_labels: Vec<Label>,
}

/// `noise` moves that fraction of each input's mass onto the other labels.
pub fn gen_realizable(
    seed: u64,
    support: usize,
    label_count: usize,
    noise: f64,
) -> Result<RealizableInstance> {
    if support == 0 || label_count == 0 {
        return Err(Error::InvalidArgument(
            "support and K must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!(
            "noise must lie in [0, 1], got {noise}"
        )));
    }
    let mut rng = crate::rng::rng(seed);
    let domain: Vec<Vec<f64>> = (0..support).map(|j| vec![j as f64]).collect();
    let weights: Vec<f64> = (0..support)
        .map(|_| rng.random_range(0.05..1.0f64).powi(2))
        .collect();
    let truth_labels: Vec<Label> = (0..support)
        .map(|_| Label(rng.random_range(1..=label_count)))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut entries = Vec::new();
    for ((x, &w), &y) in domain.iter().zip(&weights).zip(&truth_labels) {
        let p = w / total;
        if noise > 0.0 && label_count > 1 {
            entries.push((x.clone(), y, p * (1.0 - noise)));
            for other in Label::all(label_count).filter(|&o| o != y) {
                entries.push((x.clone(), other, p * noise / (label_count - 1) as f64));
            }
        } else {
            entries.push((x.clone(), y, p));
        }
    }
    let dist = FiniteDistribution::from_weights(entries)?;
    let truth = TabulatedHypothesis::from_predictions(label_count, domain.clone(), &truth_labels)?;
    Ok(RealizableInstance {
        dist,
        truth,
        domain,
        truth_labels,
    })
}

fn random_subset(rng: &mut Rng, label_count: usize, size: usize) -> Vec<Label> {
    let mut picked: Vec<Label> = sample_indices(rng, label_count, size)
        .into_iter()
        .map(Label::from_index)
        .collect();
    picked.sort();
    picked
}

/// Per-input rules `x_0 == j ⇒ forbid/allow_only` that always leave a label feasible.
pub fn random_point_requirement(
    rng: &mut Rng,
    domain: &[Vec<f64>],
    label_count: usize,
) -> Result<Requirement> {
    let mut rules = Vec::new();
    if label_count >= 2 {
        for x in domain {
            if !rng.random_bool(0.5) {
                continue;
            }
            let cond = vec![AtomicPredicate::new(0, Comparator::Eq, x[0])];
            let rule = if rng.random_bool(0.5) {
                let size = rng.random_range(1..label_count);
                Rule::when(cond).forbid(random_subset(rng, label_count, size))
            } else {
                let size = rng.random_range(1..=label_count);
                Rule::when(cond).allow_only(random_subset(rng, label_count, size))
            };
            rules.push(rule);
        }
    }
    Requirement::flat(label_count, rules)
}

/// `size` tabulated predictors: the truth at a random slot, the rest with labels
/// resampled independently with probability `flip`.
pub fn finite_grid(
    rng: &mut Rng,
    domain: &[Vec<f64>],
    truth: &[Label],
    label_count: usize,
    size: usize,
    flip: f64,
) -> Result<(Vec<TabulatedHypothesis>, usize)> {
    let slot = rng.random_range(0..size);
    let mut members = Vec::with_capacity(size);
    for i in 0..size {
        let predictions: Vec<Label> = if i == slot {
            truth.to_vec()
        } else {
            truth
                .iter()
                .map(|&y| {
                    if rng.random_bool(flip) {
                        Label(rng.random_range(1..=label_count))
                    } else {
                        y
                    }
                })
                .collect()
        };
        members.push(TabulatedHypothesis::from_predictions(
            label_count,
            domain.to_vec(),
            &predictions,
        )?);
    }
    Ok((members, slot))
}

/// The two-point instance on which learning-then-verifying is not agnostic-PAC.
#[derive(Clone, Debug)]
pub struct CounterexampleInstance {
    pub dist: FiniteDistribution<Label>,
    pub h0: TabulatedHypothesis,
    pub h1: TabulatedHypothesis,
    pub truth: TabulatedHypothesis,
    pub requirement: Requirement,
    pub domain: Vec<Vec<f64>>,
}

pub fn gen_counterexample() -> CounterexampleInstance {
    let domain = vec![vec![0.0], vec![1.0]];
    let dist = FiniteDistribution::new(vec![
        (domain[0].clone(), Label(1), 0.5),
        (domain[1].clone(), Label(1), 0.5),
    ])
    .expect("uniform over two points");
    let table = |a: usize, b: usize| {
        TabulatedHypothesis::from_predictions(2, domain.clone(), &[Label(a), Label(b)])
            .expect("valid labels")
    };
    let requirement = Requirement::flat(
        2,
        vec![Rule::when(vec![AtomicPredicate::new(0, Comparator::Eq, 0.0)]).forbid([Label(2)])],
    )
    .expect("valid rule");
    CounterexampleInstance {
        dist,
        h0: table(2, 1),
        h1: table(1, 2),
        truth: table(1, 1),
        requirement,
        domain,
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_vector(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect::<Vec<f64>>()
}

/// Drops trailing rules until every input admits an output.
fn make_feasible(
    mut rules: Vec<Rule>,
    build: impl Fn(Vec<Rule>) -> Result<Requirement>,
    check: impl Fn(&Requirement) -> Result<bool>,
) -> Result<Requirement> {
    loop {
        let req = build(rules.clone())?;
        if check(&req)? {
            return Ok(req);
        }
        rules.pop();
    }
}

/// A linear multi-class problem with label noise and a threshold requirement.
#[derive(Clone, Debug)]
pub struct MulticlassInstance {
    pub dist: FiniteDistribution<Label>,
    /// Distinct inputs; every support entry's `x` is one of these.
    pub inputs: Vec<Vec<f64>>,
    pub teacher: ScoringHypothesis,
    pub requirement: Requirement,
}

pub fn gen_multiclass(
    rng: &mut Rng,
    support: usize,
    label_count: usize,
    dim: usize,
    p: f64,
    requirement: Option<Requirement>,
) -> Result<MulticlassInstance> {
    let scale = 1.0 / (dim as f64).sqrt();
    let inputs: Vec<Vec<f64>> = (0..support)
        .map(|_| gaussian_vector(rng, dim, scale))
        .collect();
    let teacher = ScoringHypothesis::sample_with(rng, dim, label_count, p, FeatureMap::Identity);
    let mut entries = Vec::new();
    for x in &inputs {
        let w = rng.random_range(0.2..1.0);
        let y = teacher.predict(x)?;
        if label_count > 1 {
            entries.push((x.clone(), y, w * (1.0 - LABEL_NOISE)));
            for other in Label::all(label_count).filter(|&o| o != y) {
                entries.push((x.clone(), other, w * LABEL_NOISE / (label_count - 1) as f64));
            }
        } else {
            entries.push((x.clone(), y, w));
        }
    }
    let dist = FiniteDistribution::from_weights(entries)?;
    let requirement = match requirement {
        Some(req) => {
            if req.label_count() != label_count {
                return Err(Error::InvalidArgument(format!(
                    "rule file has K = {}, config K = {label_count}",
                    req.label_count()
                )));
            }
            req.require_feasible(&inputs)?;
            req
        }
        None => {
            let rules: Vec<Rule> = (0..3)
                .map(|_| {
                    let op = if rng.random_bool(0.5) {
                        Comparator::Gt
                    } else {
                        Comparator::Lt
                    };
                    let t: f64 = 0.3 * scale * normal(rng);
                    let cond = vec![AtomicPredicate::new(rng.random_range(0..dim), op, t)];
                    Rule::when(cond).forbid([Label(rng.random_range(1..=label_count))])
                })
                .collect();
            make_feasible(
                rules,
                |r| Requirement::flat(label_count, r),
                |req| Ok(req.check_feasibility(&inputs)?.is_feasible()),
            )?
        }
    };
    Ok(MulticlassInstance {
        dist,
        inputs,
        teacher,
        requirement,
    })
}

/// A chain-labelling problem over `[K]^l` with noise on single positions.
#[derive(Clone, Debug)]
pub struct StructuredInstance {
    pub dist: FiniteDistribution<Vec<Label>>,
    pub inputs: Vec<Vec<f64>>,
    pub teacher: LinearChain,
    pub requirement: Requirement,
}

pub fn gen_structured(
    rng: &mut Rng,
    support: usize,
    label_count: usize,
    dim: usize,
    length: usize,
    requirement: Option<Requirement>,
) -> Result<StructuredInstance> {
    let scale = 1.0 / (dim as f64).sqrt();
    let inputs: Vec<Vec<f64>> = (0..support)
        .map(|_| gaussian_vector(rng, dim * length, scale))
        .collect();
    let mut teacher = LinearChain::sample_unit_blocks(label_count, dim, rng);
    for v in teacher
        .emission
        .iter_mut()
        .flatten()
        .chain(teacher.transition.iter_mut().flatten())
    {
        *v *= 3.0;
    }
    let mut entries = Vec::new();
    for x in &inputs {
        let w = rng.random_range(0.2..1.0);
        let y = viterbi(&teacher, x)?;
        if label_count > 1 {
            entries.push((x.clone(), y.clone(), w * (1.0 - LABEL_NOISE)));
            let k = rng.random_range(0..length);
            let mut noisy = y;
            let shift = rng.random_range(1..label_count);
            noisy[k] = Label::from_index((noisy[k].index() + shift) % label_count);
            entries.push((x.clone(), noisy, w * LABEL_NOISE));
        } else {
            entries.push((x.clone(), y, w));
        }
    }
    let dist = FiniteDistribution::from_weights(entries)?;
    let with_len: Vec<(Vec<f64>, usize)> = inputs.iter().map(|x| (x.clone(), length)).collect();
    let requirement = match requirement {
        Some(req) => {
            if req.label_count() != label_count {
                return Err(Error::InvalidArgument(format!(
                    "rule file has K = {}, config K = {label_count}",
                    req.label_count()
                )));
            }
            let report = req.check_feasibility_structured(&with_len)?;
            if !report.is_feasible() {
                return Err(Error::InfeasibleInput(report));
            }
            req
        }
        None => {
            let t0: f64 = 0.3 * scale * normal(rng);
            let t1: f64 = 0.3 * scale * normal(rng);
            let label = |rng: &mut Rng| Label(rng.random_range(1..=label_count));
            let rules = vec![
                Rule::when(vec![AtomicPredicate::new(0, Comparator::Gt, t0)])
                    .must_include([label(rng)]),
                Rule::always().forbid_pairs([(label(rng), label(rng))]),
                Rule::when(vec![AtomicPredicate::new(1, Comparator::Lt, t1)])
                    .allow_only([label(rng)])
                    .at_positions([rng.random_range(1..=length)]),
            ];
            make_feasible(
                rules,
                |r| Requirement::structured(LabelSpace::Uniform(label_count), r),
                |req| Ok(req.check_feasibility_structured(&with_len)?.is_feasible()),
            )?
        }
    };
    Ok(StructuredInstance {
        dist,
        inputs,
        teacher,
        requirement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{empirical_zero_one, exact_risk};

    #[test]
    fn realizable_truth_has_zero_risk() {
        for seed in 0..20 {
            let inst = gen_realizable(seed, 8, 3, 0.0).unwrap();
            assert_eq!(exact_risk(&inst.truth, &inst.dist).unwrap(), 0.0);
            let total: f64 = inst.dist.support().iter().map(|e| e.2).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let inst = gen_realizable(1, 8, 3, 0.0).unwrap();
        let sample = inst.dist.sample(10_000, &mut crate::rng::rng(2)).unwrap();
        assert_eq!(empirical_zero_one(&inst.truth, &sample).unwrap(), 0.0);
    }

    #[test]
    fn point_requirements_stay_feasible() {
        let mut rng = crate::rng::rng(4);
        let inst = gen_realizable(4, 12, 4, 0.0).unwrap();
        for _ in 0..50 {
            let req = random_point_requirement(&mut rng, &inst.domain, 4).unwrap();
            assert!(req.check_feasibility(&inst.domain).unwrap().is_feasible());
        }
    }

    #[test]
    fn counterexample_rule_table() {
        let inst = gen_counterexample();
        for x in &inst.domain {
            assert!(inst
                .requirement
                .evaluate(x, inst.truth.predict(x).unwrap())
                .unwrap());
        }
        assert!(!inst.requirement.evaluate(&[0.0], Label(2)).unwrap());
        assert!(inst.requirement.evaluate(&[1.0], Label(2)).unwrap());
        assert_eq!(exact_risk(&inst.h0, &inst.dist).unwrap(), 0.5);
        assert_eq!(exact_risk(&inst.h1, &inst.dist).unwrap(), 0.5);
    }

    #[test]
    fn bound_instances_are_feasible() {
        let mut rng = crate::rng::rng(8);
        let mc = gen_multiclass(&mut rng, 32, 3, 5, 2.0, None).unwrap();
        assert!(mc
            .requirement
            .check_feasibility(&mc.inputs)
            .unwrap()
            .is_feasible());
        let st = gen_structured(&mut rng, 16, 2, 3, 3, None).unwrap();
        let with_len: Vec<_> = st.inputs.iter().map(|x| (x.clone(), 3)).collect();
        assert!(st
            .requirement
            .check_feasibility_structured(&with_len)
            .unwrap()
            .is_feasible());
    }
}
