//! Property tests for the invariants of requirements, verification, losses, decoding and complexity.

mod common;

use cvkit::complexity::{
    check_masked_leq_exact, empirical_local_rademacher, sup_linear_ball, SecondMoment,
    SupremumOracle,
};
use cvkit::harness::ExperimentConfig;
use cvkit::label::Label;
use cvkit::losses::{
    phi_rho, surrogate_max_brute_force, surrogate_term, FiniteDistribution, Hamming, Surrogate,
};
use cvkit::rng::rng;
use cvkit::structured::{
    brute_force_decode, constrained_viterbi, loss_augmented_max, viterbi, LinearChain,
    BRUTE_FORCE_CAP,
};
use cvkit::{
    parse_rules, Scorer, ScoringHypothesis, Strategy, TabulatedHypothesis, VerifiedHypothesis,
};
use proptest::prelude::*;
use rand::Rng as _;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluate_agrees_with_feasible_set(seed in any::<u64>(), k in 1usize..6, d in 1usize..4) {
        let mut r = rng(seed);
        let req = common::flat_requirement(&mut r, k, d);
        let x = common::uniform_vec(&mut r, d, 1.0);
        let feasible = req.feasible_labels(&x).unwrap();
        for y in Label::all(k) {
            prop_assert_eq!(req.evaluate(&x, y).unwrap(), feasible.contains(&y));
        }
    }

    #[test]
    fn rule_files_round_trip(seed in any::<u64>(), k in 2usize..5, l in 1usize..4) {
        let mut r = rng(seed);
        let flat = common::flat_requirement(&mut r, k, 2);
        let structured = common::structured_requirement(&mut r, l, k, 2);
        prop_assert_eq!(&parse_rules(&flat.to_json()).unwrap(), &flat);
        prop_assert_eq!(&parse_rules(&structured.to_json()).unwrap(), &structured);
    }

    #[test]
    fn verified_outputs_are_feasible_within_budget(seed in any::<u64>(), k in 2usize..6, d in 1usize..4) {
        let mut r = rng(seed);
        let h = ScoringHypothesis::sample_unit_ball(d, k, 2.0, seed).unwrap();
        let req = common::flat_requirement(&mut r, k, d);
        let x = common::uniform_vec(&mut r, d, 1.0);
        let feasible = req.feasible_labels(&x).unwrap();
        prop_assume!(!feasible.is_empty());
        for strategy in [Strategy::MinIndexFeasible, Strategy::ConstrainedArgmax] {
            let vh = VerifiedHypothesis::wrap(h.clone(), req.clone(), strategy, std::slice::from_ref(&x)).unwrap();
            let (y, q) = vh.infer(&x).unwrap();
            prop_assert!(feasible.contains(&y));
            prop_assert!(q as usize <= k);
            let base = h.predict(&x).unwrap();
            if feasible.contains(&base) {
                prop_assert_eq!(y, base);
                prop_assert_eq!(q, 1);
            } else if strategy == Strategy::MinIndexFeasible {
                prop_assert_eq!(y, feasible[0]);
            }
            for z in Label::all(k) {
                if !feasible.contains(&z) {
                    prop_assert!(vh.masked().margin(&x, z).unwrap() < 0.0);
                }
            }
        }
    }

    #[test]
    fn phi_rho_is_bounded_monotone_and_lipschitz(a in -10.0f64..10.0, b in -10.0f64..10.0, rho in 0.01f64..10.0) {
        let (pa, pb) = (phi_rho(a, rho).unwrap(), phi_rho(b, rho).unwrap());
        prop_assert!((0.0..=1.0).contains(&pa));
        if a <= b {
            prop_assert!(pa >= pb);
        }
        prop_assert!((pa - pb).abs() <= (a - b).abs() / rho + 1e-12);
    }

    #[test]
    fn no_unit_ball_point_beats_the_supremum(seed in any::<u64>(), k in 1usize..4, d in 1usize..4, m in 1usize..6, pi in 0usize..3) {
        let p = [1.0, 1.5, 2.0][pi];
        let mut r = rng(seed);
        let features: Vec<Vec<f64>> = (0..m).map(|_| common::uniform_vec(&mut r, d, 1.0)).collect();
        let coeff: Vec<Vec<f64>> = (0..m).map(|_| common::uniform_vec(&mut r, k, 1.0)).collect();
        let sup = sup_linear_ball(&coeff, &features, p).unwrap();
        for t in 0..20u64 {
            let h = ScoringHypothesis::sample_unit_ball(d, k, p, seed ^ t).unwrap();
            let value: f64 = features
                .iter()
                .zip(&coeff)
                .map(|(x, c)| h.scores(x).unwrap().iter().zip(c).map(|(s, w)| s * w).sum::<f64>())
                .sum();
            prop_assert!(value <= sup + 1e-9);
        }
    }

    #[test]
    fn masking_never_raises_exact_rademacher(seed in any::<u64>(), k in 2usize..4, m in 1usize..9) {
        let mut r = rng(seed);
        let d = 2;
        let members: Vec<ScoringHypothesis> =
            (0..5).map(|i| ScoringHypothesis::sample_unit_ball(d, k, 2.0, seed.wrapping_add(i)).unwrap()).collect();
        let sample: Vec<(Vec<f64>, Label)> =
            (0..m).map(|_| (common::uniform_vec(&mut r, d, 1.0), Label(r.random_range(1..=k)))).collect();
        let req = common::flat_requirement(&mut r, k, d);
        let base = SupremumOracle::finite_from_scorers(&members, &sample).unwrap();
        let masked = SupremumOracle::finite_masked(&members, &sample, &req, 3.0).unwrap();
        prop_assert!(check_masked_leq_exact(&base, &masked).unwrap().holds);
    }

    #[test]
    fn grid_local_estimate_stays_below_exact(seed in any::<u64>(), r in 0.0f64..2.0) {
        let mut g = rng(seed);
        let values: Vec<Vec<f64>> = (0..4).map(|_| common::uniform_vec(&mut g, 6, 1.0)).collect();
        let est = empirical_local_rademacher(&values, r, 5, SecondMoment::Empirical, 50, seed).unwrap();
        prop_assert!(est.grid.mean <= est.exact.mean + 1e-12);
    }

    #[test]
    fn decoders_match_enumeration(seed in any::<u64>(), l in 1usize..5, k in 1usize..4) {
        let mut r = rng(seed);
        let model = common::chain_model(&mut r, l, k);
        let x = common::uniform_vec(&mut r, 2, 1.0);
        prop_assert_eq!(viterbi(&model, &x).unwrap(), brute_force_decode(&model, &x, l, None, BRUTE_FORCE_CAP).unwrap());
        let req = common::structured_requirement(&mut r, l, k.max(2), 2);
        if k >= 2 {
            match (constrained_viterbi(&model, &x, &req), brute_force_decode(&model, &x, l, Some(&req), BRUTE_FORCE_CAP)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(cvkit::Error::Infeasible), Err(cvkit::Error::Infeasible)) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }

    #[test]
    fn hamming_dynamic_program_matches_enumeration(seed in any::<u64>(), l in 1usize..5, k in 1usize..4, rho in 0.1f64..3.0) {
        let mut r = rng(seed);
        let model = common::chain_model(&mut r, l, k);
        let y: Vec<Label> = (0..l).map(|_| Label(r.random_range(1..=k))).collect();
        let dp = loss_augmented_max(&model, &[], &y, rho, Surrogate::Additive, 0).unwrap();
        let brute = surrogate_max_brute_force(&model, &Hamming, &[], &y, rho, Surrogate::Additive, BRUTE_FORCE_CAP).unwrap();
        match (dp, brute) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn length_one_chain_reduces_to_multiclass_margin(seed in any::<u64>(), k in 2usize..5, d in 1usize..4, rho in 0.1f64..3.0) {
        let mut r = rng(seed);
        let chain = LinearChain::sample_unit_blocks(k, d, &mut r);
        let flat = ScoringHypothesis::identity(chain.emission.clone(), 2.0).unwrap();
        let x = common::uniform_vec(&mut r, d, 1.0);
        let y = Label(r.random_range(1..=k));
        let structured = surrogate_term(&chain, &Hamming, &x, &[y], rho, Surrogate::Additive, BRUTE_FORCE_CAP).unwrap();
        let multiclass = phi_rho(flat.margin(&x, y).unwrap(), rho).unwrap();
        prop_assert!((structured - multiclass).abs() < 1e-12);
        prop_assert_eq!(viterbi(&chain, &x).unwrap(), vec![flat.predict(&x).unwrap()]);
    }

    #[test]
    fn normalised_weights_form_a_distribution(weights in proptest::collection::vec(0.001f64..10.0, 1..20)) {
        let support: Vec<(Vec<f64>, Label, f64)> =
            weights.iter().enumerate().map(|(i, &w)| (vec![i as f64], Label(1), w)).collect();
        let dist = FiniteDistribution::from_weights(support).unwrap();
        let total: f64 = dist.support().iter().map(|e| e.2).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let truth = TabulatedHypothesis::from_predictions(1, dist.inputs(), &vec![Label(1); weights.len()]).unwrap();
        prop_assert_eq!(cvkit::losses::exact_risk(&truth, &dist).unwrap(), 0.0);
    }

    #[test]
    fn configs_round_trip(seed in any::<u64>(), m in 1usize..1000, rho in 0.01f64..10.0, delta in 0.001f64..0.999) {
        let cfg = ExperimentConfig { seed, m, rho, delta, ..ExperimentConfig::default() };
        prop_assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
