//! Random instance builders shared by the integration suites.
#![allow(dead_code)]

use cvkit::label::Label;
use cvkit::requirements::{AtomicPredicate, Comparator, LabelSpace, Requirement, Rule};
use cvkit::rng::Rng;
use cvkit::structured::FactorGraphModel;
use rand::seq::index::sample;
use rand::Rng as _;

pub fn uniform_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn label_subset(rng: &mut Rng, k: usize, size: usize) -> Vec<Label> {
    sample(rng, k, size)
        .into_iter()
        .map(Label::from_index)
        .collect()
}

/// A chain with independent per-position unary tables and one shared transition table.
pub fn chain_model(rng: &mut Rng, l: usize, k: usize) -> FactorGraphModel {
    let emission = (0..l).map(|_| uniform_vec(rng, k, 1.0)).collect();
    let transition = (0..k).map(|_| uniform_vec(rng, k, 1.0)).collect();
    FactorGraphModel::chain_tables(emission, transition).expect("valid tables")
}

fn condition(rng: &mut Rng, dim: usize) -> Vec<AtomicPredicate> {
    if rng.random_bool(0.3) {
        return Vec::new();
    }
    let op = if rng.random_bool(0.5) {
        Comparator::Gt
    } else {
        Comparator::Le
    };
    vec![AtomicPredicate::new(
        rng.random_range(0..dim),
        op,
        rng.random_range(-0.5..0.5),
    )]
}

/// Up to three flat rules over `x ∈ [-1, 1]^dim`; may be infeasible at some inputs.
pub fn flat_requirement(rng: &mut Rng, k: usize, dim: usize) -> Requirement {
    let rules = (0..rng.random_range(0..=3))
        .map(|_| {
            let rule = Rule::when(condition(rng, dim));
            if rng.random_bool(0.5) {
                let size = rng.random_range(1..=k);
                rule.forbid(label_subset(rng, k, size))
            } else {
                let size = rng.random_range(1..=k);
                rule.allow_only(label_subset(rng, k, size))
            }
        })
        .collect();
    Requirement::flat(k, rules).expect("valid rules")
}

/// Structured rules mixing position-scoped effects, pair bans and `must_include` sets of up to four labels.
pub fn structured_requirement(rng: &mut Rng, l: usize, k: usize, dim: usize) -> Requirement {
    let mut rules = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let mut rule = Rule::when(condition(rng, dim));
        match rng.random_range(0..4) {
            0 => {
                let size = rng.random_range(1..=k.min(4));
                rule = rule.must_include(label_subset(rng, k, size));
            }
            1 => {
                let pairs = (0..rng.random_range(1..=3))
                    .map(|_| {
                        (
                            Label(rng.random_range(1..=k)),
                            Label(rng.random_range(1..=k)),
                        )
                    })
                    .collect::<Vec<_>>();
                rule = rule.forbid_pairs(pairs);
            }
            2 => {
                let size = rng.random_range(1..=k);
                rule = rule
                    .allow_only(label_subset(rng, k, size))
                    .at_positions([rng.random_range(1..=l)]);
            }
            _ => {
                let size = rng.random_range(1..k.max(2));
                rule = rule
                    .forbid(label_subset(rng, k, size.min(k)))
                    .at_positions([rng.random_range(1..=l)]);
            }
        }
        rules.push(rule);
    }
    Requirement::structured(LabelSpace::Uniform(k), rules).expect("valid rules")
}
