//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cvkit::harness::inequalities::CheckKind;
use cvkit::harness::{
    emit_results, run_bound_check_multiclass, run_bound_check_structured,
    run_complexity_experiment, run_counterexample, run_experiment, run_itv_experiment,
    ExperimentConfig, EXPERIMENTS,
};
use cvkit::hypotheses::argmax;
use cvkit::label::Label;
use cvkit::losses::{
    empirical_margin_loss, empirical_margin_loss_with_split, empirical_zero_one,
    empirical_zero_one_with_split, hamming_loss, phi_rho, surrogate_term, Hamming, Sample,
    SequenceLoss, Surrogate,
};
use cvkit::requirements::Requirement;
use cvkit::rng::rng;
use cvkit::structured::{brute_force_decode, constrained_viterbi, viterbi, BRUTE_FORCE_CAP};
use cvkit::verifier::mask_scores;
use cvkit::{Scorer, ScoringHypothesis, Strategy, VerifiedHypothesis};
use rand::Rng as _;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("error: {e:?}")
}

fn sandwich() -> Outcome {
    let cfg = ExperimentConfig {
        draws: 100,
        ..ExperimentConfig::for_experiment("itv")
    };
    let report = run_itv_experiment(&cfg).map_err(err)?;
    let random = report.records.iter().filter(|r| !r.trivial).count();
    check(
        report.instances == 100 && report.violations == 0,
        format!(
            "{} instances ({random} with random requirements), {} violations",
            report.instances, report.violations
        ),
    )
}

fn counterexample() -> Outcome {
    let report =
        run_counterexample(&ExperimentConfig::for_experiment("counterexample")).map_err(err)?;
    check(
        report.itv_gap == 0.5 && report.ltv_gap == 0.0 && report.consistent,
        format!(
            "ITV gap {}, LTV gap {}, c consistent with f: {}",
            report.itv_gap, report.ltv_gap, report.consistent
        ),
    )
}

fn complexity_config() -> ExperimentConfig {
    ExperimentConfig {
        trials: 10_000,
        draws: 20,
        ..ExperimentConfig::for_experiment("complexity")
    }
}

fn rademacher_ordering(report: &cvkit::harness::ComplexityReport) -> Outcome {
    let paired: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.check == CheckKind::MaskedRademacher)
        .collect();
    let exact: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.check == CheckKind::MaskedRademacherExact)
        .collect();
    let worst = paired
        .iter()
        .map(|r| (r.lhs - r.rhs) / r.std_error.max(f64::MIN_POSITIVE))
        .fold(f64::MIN, f64::max);
    check(
        report.trials == 10_000 && paired.len() == 20 && exact.len() == 20 && paired.iter().chain(&exact).all(|r| r.holds),
        format!(
            "{} paired instances at {} draws (max (lhs-rhs)/se = {worst:.2}), {} exact enumerations",
            paired.len(),
            report.trials,
            exact.len()
        ),
    )
}

fn gaussian_comparison(report: &cvkit::harness::ComplexityReport) -> Outcome {
    let rows: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.check == CheckKind::GaussianComparison)
        .collect();
    let ks: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.label_count).collect();
    check(
        rows.len() == 10 && ks == [2, 3].into() && rows.iter().all(|r| r.holds),
        format!(
            "{} instances over K in {ks:?}, all within 3 combined standard errors: {}",
            rows.len(),
            rows.iter().all(|r| r.holds)
        ),
    )
}

fn multiclass_bound() -> Outcome {
    let cfg = ExperimentConfig::for_experiment("bound-multiclass");
    assert_eq!(
        (cfg.m, cfg.label_count, cfg.d, cfg.rho, cfg.delta, cfg.draws),
        (200, 3, 5, 1.0, 0.05, 200)
    );
    let report = run_bound_check_multiclass(&cfg).map_err(err)?;
    check(
        report.violation_fraction <= 0.05 + 3.0 * (0.05f64 * 0.95 / 200.0).sqrt(),
        format!(
            "violation fraction {} over {} draws, threshold {:.4}, {} candidates",
            report.violation_fraction, report.draws, report.threshold, report.candidates
        ),
    )
}

fn structured_bound() -> Outcome {
    let cfg = ExperimentConfig::for_experiment("bound-structured");
    assert_eq!((cfg.l, cfg.label_count, cfg.m, cfg.draws), (3, 2, 200, 200));
    let report = run_bound_check_structured(&cfg).map_err(err)?;
    let limit = cfg.delta + 3.0 * (cfg.delta * (1.0 - cfg.delta) / cfg.draws as f64).sqrt();
    check(
        report.additive.violation_fraction <= limit
            && report.multiplicative.violation_fraction <= limit,
        format!(
            "additive {} and multiplicative {} violation fractions, threshold {limit:.4}",
            report.additive.violation_fraction, report.multiplicative.violation_fraction
        ),
    )
}

fn decoders() -> Outcome {
    let mut rng = rng(7001);
    let mut disagreements = 0;
    let mut infeasible = 0;
    let mut with_must = 0;
    for _ in 0..500 {
        let l = rng.random_range(1..=5);
        let k = rng.random_range(1..=4);
        let model = common::chain_model(&mut rng, l, k);
        let x = common::uniform_vec(&mut rng, 2, 1.0);
        let fast = viterbi(&model, &x).map_err(err)?;
        if fast != brute_force_decode(&model, &x, l, None, BRUTE_FORCE_CAP).map_err(err)? {
            disagreements += 1;
        }
    }
    for _ in 0..500 {
        let l = rng.random_range(1..=5);
        let k = rng.random_range(2..=5);
        let model = common::chain_model(&mut rng, l, k);
        let x = common::uniform_vec(&mut rng, 2, 1.0);
        let req = common::structured_requirement(&mut rng, l, k, 2);
        if !req
            .active_constraints(&x, l)
            .map_err(err)?
            .required
            .is_empty()
        {
            with_must += 1;
        }
        match (
            constrained_viterbi(&model, &x, &req),
            brute_force_decode(&model, &x, l, Some(&req), BRUTE_FORCE_CAP),
        ) {
            (Ok(a), Ok(b)) if a == b => {}
            (Err(cvkit::Error::Infeasible), Err(cvkit::Error::Infeasible)) => infeasible += 1,
            _ => disagreements += 1,
        }
    }
    check(
        disagreements == 0,
        format!("1000 instances, {disagreements} disagreements ({with_must} with must-include, {infeasible} infeasible on both sides)"),
    )
}

/// A random `(h, c, x)` with `c` feasible at `x`.
fn random_triple(rng: &mut cvkit::rng::Rng) -> (ScoringHypothesis, Requirement, Vec<f64>) {
    let k = rng.random_range(2..=5);
    let d = rng.random_range(1..=4);
    let h = ScoringHypothesis::sample_unit_ball(
        d,
        k,
        [1.0, 1.5, 2.0][rng.random_range(0..3)],
        rng.random(),
    )
    .unwrap();
    loop {
        let x = common::uniform_vec(rng, d, 1.0);
        let req = common::flat_requirement(rng, k, d);
        if !req.feasible_labels(&x).unwrap().is_empty() {
            return (h, req, x);
        }
    }
}

fn masked_semantics() -> Outcome {
    let mut rng = rng(7002);
    let mut failures = Vec::new();
    let mut forbidden_checked = 0;
    for t in 0..200 {
        let (h, req, x) = random_triple(&mut rng);
        let vh = VerifiedHypothesis::wrap(
            h.clone(),
            req.clone(),
            Strategy::ConstrainedArgmax,
            std::slice::from_ref(&x),
        )
        .map_err(err)?;
        let masked = vh.masked();
        for y in Label::all(h.label_count()) {
            if !req.evaluate(&x, y).map_err(err)? {
                forbidden_checked += 1;
                if masked.margin(&x, y).map_err(err)? >= 0.0 {
                    failures.push(format!(
                        "instance {t}: non-negative masked margin at forbidden {y:?}"
                    ));
                }
            }
        }
        let (label, _) = vh.infer(&x).map_err(err)?;
        if label != argmax(&masked.scores(&x).map_err(err)?) {
            failures.push(format!("instance {t}: infer differs from masked argmax"));
        }
        let open = mask_scores(
            &h,
            &Requirement::always(h.label_count()),
            vh.mask_constant(),
        );
        let trivial = VerifiedHypothesis::wrap(
            h.clone(),
            Requirement::always(h.label_count()),
            Strategy::ConstrainedArgmax,
            std::slice::from_ref(&x),
        )
        .map_err(err)?;
        if open.scores(&x).map_err(err)? != h.scores(&x).map_err(err)?
            || trivial.infer(&x).map_err(err)?.0 != h.predict(&x).map_err(err)?
        {
            failures.push(format!("instance {t}: c = 1 is not the identity"));
        }
    }
    check(
        failures.is_empty(),
        format!("200 instances, {forbidden_checked} forbidden pairs, failures: {failures:?}"),
    )
}

fn query_budgets() -> Outcome {
    let mut rng = rng(7003);
    let mut worst_infer = 0.0f64;
    let mut worst_learning = 0.0f64;
    for _ in 0..200 {
        let (h, req, x0) = random_triple(&mut rng);
        let k = h.label_count();
        let mut examples = vec![(x0.clone(), Label(1))];
        while examples.len() < 30 {
            let x = common::uniform_vec(&mut rng, x0.len(), 1.0);
            if !req.feasible_labels(&x).unwrap().is_empty() {
                examples.push((x, Label(rng.random_range(1..=k))));
            }
        }
        let sample = Sample::new(examples).unwrap();
        for strategy in [Strategy::MinIndexFeasible, Strategy::ConstrainedArgmax] {
            let vh = VerifiedHypothesis::wrap(h.clone(), req.clone(), strategy, &sample.inputs())
                .map_err(err)?;
            for (x, _) in sample.iter() {
                let (_, q) = vh.infer(x).map_err(err)?;
                worst_infer = worst_infer.max(q as f64 / k as f64);
            }
            let zero_one = empirical_zero_one_with_split(&vh, &sample).map_err(err)?;
            let margin = empirical_margin_loss_with_split(&vh, &sample, 1.0).map_err(err)?;
            for split in [zero_one, margin] {
                worst_learning =
                    worst_learning.max(split.queries as f64 / split.query_budget(k) as f64);
            }
            let report = vh.query_report();
            if report.max_per_inference > k as u64
                || report.learning > zero_one.query_budget(k) + margin.query_budget(k)
            {
                return Err(format!("counter report over budget: {report:?}"));
            }
        }
    }
    check(
        worst_infer <= 1.0 && worst_learning <= 1.0,
        format!("max inference queries / K = {worst_infer:.3}, max learning queries / (K|S_1| + |S_0|) = {worst_learning:.3}"),
    )
}

fn loss_identities() -> Outcome {
    let mut rng = rng(7004);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (h, req, x0) = random_triple(&mut rng);
        let k = h.label_count();
        let mut examples = vec![(x0.clone(), Label(1))];
        while examples.len() < 25 {
            let x = common::uniform_vec(&mut rng, x0.len(), 1.0);
            if !req.feasible_labels(&x).unwrap().is_empty() {
                examples.push((x, Label(rng.random_range(1..=k))));
            }
        }
        let sample = Sample::new(examples).unwrap();
        let vh = VerifiedHypothesis::wrap(h, req, Strategy::ConstrainedArgmax, &sample.inputs())
            .map_err(err)?;
        let split = empirical_zero_one_with_split(&vh, &sample).map_err(err)?;
        let margin = empirical_margin_loss_with_split(&vh, &sample, 0.7).map_err(err)?;
        if split.loss != empirical_zero_one(&vh, &sample).map_err(err)?
            || margin.loss != empirical_margin_loss(&vh.masked(), &sample, 0.7).map_err(err)?
        {
            mismatches += 1;
        }
    }
    let mut lipschitz_worst = 0.0f64;
    for _ in 0..10_000 {
        let rho = rng.random_range(0.05..5.0);
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let diff = (phi_rho(a, rho).unwrap() - phi_rho(b, rho).unwrap()).abs();
        if a != b {
            lipschitz_worst = lipschitz_worst.max(diff * rho / (a - b).abs());
        }
    }
    let mut dominance_failures = 0;
    for _ in 0..300 {
        let l = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let model = common::chain_model(&mut rng, l, k);
        let y: Vec<Label> = (0..l).map(|_| Label(rng.random_range(1..=k))).collect();
        let rho = rng.random_range(0.1..3.0);
        let predicted = brute_force_decode(&model, &[], l, None, BRUTE_FORCE_CAP).map_err(err)?;
        let task = hamming_loss(&predicted, &y).map_err(err)?;
        let bound = Hamming.max_loss(&vec![k; l]);
        for mode in [Surrogate::Additive, Surrogate::Multiplicative] {
            let term = surrogate_term(&model, &Hamming, &[], &y, rho, mode, BRUTE_FORCE_CAP)
                .map_err(err)?;
            if !(task <= term + 1e-12 && term <= bound) {
                dominance_failures += 1;
            }
        }
    }
    check(
        mismatches == 0 && lipschitz_worst <= 1.0 + 1e-9 && dominance_failures == 0,
        format!(
            "{mismatches} split mismatches in 100 samples, max rho*|dPhi|/|dt| = {lipschitz_worst:.6} over 1e4 pairs, {dominance_failures} dominance failures in 600 checks"
        ),
    )
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for name in EXPERIMENTS {
        let cfg = ExperimentConfig::for_experiment(name);
        let dirs = [
            tempfile::tempdir().map_err(err)?,
            tempfile::tempdir().map_err(err)?,
        ];
        for dir in &dirs {
            let outcome = run_experiment(&cfg).map_err(err)?;
            emit_results(&outcome, &cfg, dir.path()).map_err(err)?;
        }
        for file in [
            "results.csv",
            "results_mult.csv",
            "results.json",
            "config.json",
            "manifest.json",
        ] {
            let a = std::fs::read(dirs[0].path().join(file));
            let b = std::fs::read(dirs[1].path().join(file));
            match (a, b) {
                (Ok(a), Ok(b)) if a == b => {}
                (Err(_), Err(_)) if file == "results_mult.csv" => {}
                _ => differing.push(format!("{name}/{file}")),
            }
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{} experiments rerun, differing files: {differing:?}",
            EXPERIMENTS.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let complexity = run_complexity_experiment(&complexity_config());
    let from_complexity = |f: fn(&cvkit::harness::ComplexityReport) -> Outcome| -> Outcome {
        match &complexity {
            Ok(r) => f(r),
            Err(e) => Err(err(e)),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("sandwich bound", sandwich()),
        ("counterexample", counterexample()),
        (
            "rademacher ordering under masking",
            from_complexity(rademacher_ordering),
        ),
        ("gaussian comparison", from_complexity(gaussian_comparison)),
        ("multiclass generalization bound", multiclass_bound()),
        ("structured generalization bounds", structured_bound()),
        ("decoder exactness", decoders()),
        ("masked-score semantics", masked_semantics()),
        ("query budgets", query_budgets()),
        ("loss identities", loss_identities()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
