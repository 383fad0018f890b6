//! Monte Carlo complexity estimators over exact supremum oracles, and paired
//! checks of the inequalities relating masked and unmasked classes.
//!
//! Normalisations follow each definition: the Rademacher estimate has no
//! `1/m` factor, while the Gaussian and factor-graph estimates divide by `m`.

mod oracle;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::Scorer;
use crate::label::Label;
use crate::requirements::Requirement;
use crate::rng::{derive_seed, rng_for, Rng};

pub use oracle::{
    dual_exponent, sup_linear_ball, FactorTerm, FactoredLinearBall, LinearBallTerms, SupremumOracle,
};

pub const DEFAULT_TRIALS: usize = 2000;

/// Largest sample size for which all `2^m` sign vectors are enumerated.
pub const MAX_EXACT_SIGNS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub kind: String,
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ComplexityEstimate {
    fn from_values(kind: &str, values: &[f64], seed: u64) -> Self {
        let (mean, std_error) = mean_and_std_error(values);
        Self {
            kind: kind.to_string(),
            mean,
            std_error,
            trials: values.len(),
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimates always serialize")
    }
}

/// Sample mean and `stdev / √n` (zero for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn rademacher_signs(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

pub(crate) fn gaussian_draws(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Evaluates `f` on independent per-trial generators, returned in trial order.
fn per_trial<T, F>(trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Rng) -> Result<T> + Sync,
{
    check_trials(trials)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| f(&mut rng_for(seed, t)))
        .collect()
}

/// Mean and standard error of `f` over independent seeded trials, for
/// expectations that also average over a freshly drawn sample.
pub fn monte_carlo<F>(kind: &str, trials: usize, seed: u64, f: F) -> Result<ComplexityEstimate>
where
    F: Fn(&mut Rng) -> Result<f64> + Sync,
{
    let values = per_trial(trials, seed, f)?;
    Ok(ComplexityEstimate::from_values(kind, &values, seed))
}

/// `R_S(G) = E_σ[sup_g Σ_i σ_i g(z_i)]`.
pub fn empirical_rademacher(
    oracle: &SupremumOracle,
    trials: usize,
    seed: u64,
) -> Result<ComplexityEstimate> {
    let n = oracle.len();
    let values = per_trial(trials, seed, |rng| oracle.sup(&rademacher_signs(rng, n)))?;
    Ok(ComplexityEstimate::from_values("rademacher", &values, seed))
}

fn gaussian_with_normalizer(
    oracle: &SupremumOracle,
    m: usize,
    trials: usize,
    seed: u64,
    kind: &str,
) -> Result<ComplexityEstimate> {
    let n = oracle.len();
    let values = per_trial(trials, seed, |rng| {
        Ok(oracle.sup(&gaussian_draws(rng, n))? / m as f64)
    })?;
    Ok(ComplexityEstimate::from_values(kind, &values, seed))
}

/// `G_S(G) = (1/m) E_g[sup_g Σ_i g_i g(z_i)]`.
pub fn empirical_gaussian(
    oracle: &SupremumOracle,
    trials: usize,
    seed: u64,
) -> Result<ComplexityEstimate> {
    gaussian_with_normalizer(oracle, oracle.len(), trials, seed, "gaussian")
}

/// Which second moment bounds the local class.
#[derive(Clone, Copy, Debug)]
pub enum SecondMoment<'a> {
    /// `(1/m) Σ_i g(z_i)²` over the sample.
    Empirical,
    /// `E_D[g²]` per member, computed on a finite distribution.
    Exact(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRademacherEstimate {
    /// Using the largest feasible scale of each member.
    pub exact: ComplexityEstimate,
    /// Restricting scales to a uniform grid on `[0, 1]`; never above `exact`.
    pub grid: ComplexityEstimate,
}

/// `R_S({a·g : a ∈ [0, 1], g ∈ G, E[(a g)²] ≤ r})` for a finite class given as value rows.
pub fn empirical_local_rademacher(
    values: &[Vec<f64>],
    r: f64,
    grid_size: usize,
    moments: SecondMoment<'_>,
    trials: usize,
    seed: u64,
) -> Result<LocalRademacherEstimate> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be non-negative, got {r}"
        )));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument(
            "the scale grid needs at least two points".into(),
        ));
    }
    let class = SupremumOracle::finite(values.to_vec())?;
    let m = class.len();
    let second: Vec<f64> = match moments {
        SecondMoment::Empirical => values
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>() / m as f64)
            .collect(),
        SecondMoment::Exact(given) => {
            if given.len() != values.len() {
                return Err(Error::LengthMismatch {
                    expected: values.len(),
                    got: given.len(),
                });
            }
            given.to_vec()
        }
    };
    let a_max: Vec<f64> = second
        .iter()
        .map(|&q| {
            if q == 0.0 {
                1.0
            } else {
                (r / q).sqrt().min(1.0)
            }
        })
        .collect();
    let steps = grid_size - 1;
    let grid_max: Vec<f64> = second
        .iter()
        .map(|&q| {
            (0..=steps)
                .rev()
                .map(|j| j as f64 / steps as f64)
                .find(|a| a * a * q <= r)
                .unwrap_or(0.0)
        })
        .collect();
    let pairs = per_trial(trials, seed, |rng| {
        let sigma = rademacher_signs(rng, m);
        let (mut exact, mut grid) = (0.0f64, 0.0f64);
        for (g, (&a, &b)) in values.iter().zip(a_max.iter().zip(&grid_max)) {
            let s: f64 = g.iter().zip(&sigma).map(|(v, c)| v * c).sum();
            exact = exact.max(a * s.max(0.0));
            grid = grid.max(b * s.max(0.0));
        }
        Ok((exact, grid))
    })?;
    let tag = match moments {
        SecondMoment::Empirical => "local_rademacher_empirical",
        SecondMoment::Exact(_) => "local_rademacher_exact_d",
    };
    let exact: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let grid: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(LocalRademacherEstimate {
        exact: ComplexityEstimate::from_values(tag, &exact, seed),
        grid: ComplexityEstimate::from_values(&format!("{tag}_grid"), &grid, seed),
    })
}

/// `R^G_S(H) = (1/m) E_ε[sup_h Σ_i Σ_{f∈F_i} Σ_{y∈Y_f} √|F_i| ε_{i,f,y} h_f(x_i, y)]`.
pub fn factor_graph_rademacher(
    class: &FactoredLinearBall,
    trials: usize,
    seed: u64,
) -> Result<ComplexityEstimate> {
    let n = class.terms();
    let m = class.examples() as f64;
    let values = per_trial(trials, seed, |rng| {
        Ok(class.sup(&rademacher_signs(rng, n))? / m)
    })?;
    Ok(ComplexityEstimate::from_values(
        "factor_graph_rademacher",
        &values,
        seed,
    ))
}

/// Outcome of a Monte Carlo comparison `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub rhs_std_error: f64,
    /// Mean of `lhs − rhs`.
    pub difference: f64,
    /// Standard error of the difference: paired, or combined for independent draws.
    pub difference_std_error: f64,
    pub trials: usize,
    pub seed: u64,
    /// `difference ≤ 3 · difference_std_error`.
    pub holds: bool,
}

/// `R_S(H_c) ≤ R_S(H)` with the same sign vectors on both sides.
pub fn check_masked_leq(
    base: &SupremumOracle,
    masked: &SupremumOracle,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if base.len() != masked.len() {
        return Err(Error::LengthMismatch {
            expected: base.len(),
            got: masked.len(),
        });
    }
    let n = base.len();
    let pairs = per_trial(trials, seed, |rng| {
        let sigma = rademacher_signs(rng, n);
        Ok((masked.sup(&sigma)?, base.sup(&sigma)?))
    })?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (l, lse) = mean_and_std_error(&lhs);
    let (r, rse) = mean_and_std_error(&rhs);
    let (d, dse) = mean_and_std_error(&diff);
    Ok(InequalityReport {
        lhs: l,
        lhs_std_error: lse,
        rhs: r,
        rhs_std_error: rse,
        difference: d,
        difference_std_error: dse,
        trials,
        seed,
        holds: d <= 3.0 * dse,
    })
}

/// `E_σ[sup_g Σ σ_i g(z_i)]` averaged over all `2^m` sign vectors.
pub fn exact_rademacher(oracle: &SupremumOracle) -> Result<f64> {
    let m = oracle.len();
    if m > MAX_EXACT_SIGNS {
        return Err(Error::TooLarge {
            size: 1u128 << m,
            cap: 1u128 << MAX_EXACT_SIGNS,
        });
    }
    let total: f64 = (0u64..1 << m)
        .into_par_iter()
        .map(|bits| {
            let sigma: Vec<f64> = (0..m)
                .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            oracle.sup(&sigma)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / (1u64 << m) as f64)
}

/// Exact comparison of two Rademacher complexities by full sign enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_masked_leq_exact(
    base: &SupremumOracle,
    masked: &SupremumOracle,
) -> Result<ExactComparison> {
    let lhs = exact_rademacher(masked)?;
    let rhs = exact_rademacher(base)?;
    Ok(ExactComparison {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * rhs.abs().max(1.0),
    })
}

/// The two sides of the Gaussian comparison for a finite class of scorers:
/// `{x ↦ max_j h_cj(x)}` on `m` coordinates and `{(i, j) ↦ h_j(x_i)}` on `mK` coordinates
/// (coordinate `j·m + i`, 0-based).
pub fn gaussian_comparison_oracles<H: Scorer>(
    members: &[H],
    inputs: &[Vec<f64>],
    req: &Requirement,
    mask_constant: f64,
) -> Result<(SupremumOracle, SupremumOracle)> {
    let m = inputs.len();
    let mut lhs = Vec::with_capacity(members.len());
    let mut rhs = Vec::with_capacity(members.len());
    for h in members {
        let k = h.label_count();
        let mut max_row = Vec::with_capacity(m);
        let mut full = vec![0.0; m * k];
        for (i, x) in inputs.iter().enumerate() {
            let scores = h.scores(x)?;
            let mut best = f64::NEG_INFINITY;
            for (j, &s) in scores.iter().enumerate() {
                if s.abs() >= mask_constant {
                    return Err(Error::MaskConstantViolated {
                        score: s,
                        mask: mask_constant,
                    });
                }
                let masked = if req.evaluate(x, Label::from_index(j))? {
                    s
                } else {
                    -mask_constant
                };
                best = best.max(masked);
                full[j * m + i] = s;
            }
            max_row.push(best);
        }
        lhs.push(max_row);
        rhs.push(full);
    }
    Ok((SupremumOracle::finite(lhs)?, SupremumOracle::finite(rhs)?))
}

/// `G_S({max_j h_cj}) ≤ (1/m) E_g[sup_h Σ_{i,j} g_{(j−1)m+i} h_j(x_i)]`, each side with its own draws.
pub fn check_gaussian_comparison(
    lhs_class: &SupremumOracle,
    rhs_class: &SupremumOracle,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    let m = lhs_class.len();
    if m == 0 || !rhs_class.len().is_multiple_of(m) {
        return Err(Error::LengthMismatch {
            expected: m,
            got: rhs_class.len(),
        });
    }
    let lhs = gaussian_with_normalizer(lhs_class, m, trials, derive_seed(seed, 0), "gaussian")?;
    let rhs = gaussian_with_normalizer(rhs_class, m, trials, derive_seed(seed, 1), "gaussian")?;
    let combined = (lhs.std_error.powi(2) + rhs.std_error.powi(2)).sqrt();
    let difference = lhs.mean - rhs.mean;
    Ok(InequalityReport {
        lhs: lhs.mean,
        lhs_std_error: lhs.std_error,
        rhs: rhs.mean,
        rhs_std_error: rhs.std_error,
        difference,
        difference_std_error: combined,
        trials,
        seed,
        holds: difference <= 3.0 * combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int_class() -> SupremumOracle {
        SupremumOracle::finite(vec![vec![1.0, -2.0, 0.5], vec![-1.0, 2.0, -0.5]]).unwrap()
    }

    #[test]
    fn singleton_estimates_to_zero() {
        let single = SupremumOracle::finite(vec![vec![0.4, -1.2, 2.0, 0.1]]).unwrap();
        let r = empirical_rademacher(&single, 4000, 1).unwrap();
        assert!(r.mean.abs() <= 3.0 * r.std_error, "{r:?}");
        let g = empirical_gaussian(&single, 4000, 1).unwrap();
        assert!(g.mean.abs() <= 3.0 * g.std_error, "{g:?}");
    }

    #[test]
    fn symmetric_pair_is_absolute_value() {
        let class = int_class();
        for bits in 0..8u32 {
            let sigma: Vec<f64> = (0..3)
                .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let direct: f64 = [1.0, -2.0, 0.5]
                .iter()
                .zip(&sigma)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs();
            assert_eq!(class.sup(&sigma).unwrap(), direct);
        }
        let est = empirical_rademacher(&class, 5000, 3).unwrap();
        let exact = exact_rademacher(&class).unwrap();
        assert!((est.mean - exact).abs() <= 4.0 * est.std_error);
    }

    #[test]
    fn one_point_ball_is_one() {
        let ball = SupremumOracle::LinearBall(
            LinearBallTerms::new(vec![vec![1.0]], vec![Label(1)], 1, 2.0).unwrap(),
        );
        let r = empirical_rademacher(&ball, 100, 0).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn gaussian_scales_linearly() {
        let class = int_class();
        let base = empirical_gaussian(&class, 500, 9).unwrap();
        let scaled = empirical_gaussian(&class.scaled(2.5).unwrap(), 500, 9).unwrap();
        assert!((scaled.mean - 2.5 * base.mean).abs() < 1e-12);
    }

    #[test]
    fn rademacher_below_scaled_gaussian() {
        let class = SupremumOracle::finite(vec![
            vec![1.0, 0.0, -1.0, 0.5],
            vec![0.0, 1.0, 1.0, -0.5],
            vec![-1.0, -1.0, 0.0, 0.0],
        ])
        .unwrap();
        let r = exact_rademacher(&class).unwrap();
        let g = empirical_gaussian(&class, 20_000, 4).unwrap();
        // G_S carries 1/m; rescale to the unnormalised convention
        let m = 4.0;
        let bound = (std::f64::consts::PI / 2.0).sqrt() * g.mean * m;
        assert!(r <= bound + 3.0 * (std::f64::consts::PI / 2.0).sqrt() * g.std_error * m);
    }

    #[test]
    fn deterministic_across_runs() {
        let class = int_class();
        let a = empirical_rademacher(&class, 333, 42).unwrap();
        let b = empirical_rademacher(&class, 333, 42).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let json: ComplexityEstimate = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json, a);
    }

    #[test]
    fn local_rademacher_limits() {
        let values = vec![vec![1.0, -0.5, 2.0], vec![0.3, 0.3, -1.0]];
        let zero =
            empirical_local_rademacher(&values, 0.0, 11, SecondMoment::Empirical, 500, 1).unwrap();
        assert_eq!(zero.exact.mean, 0.0);
        let big = empirical_local_rademacher(&values, 100.0, 11, SecondMoment::Empirical, 500, 1)
            .unwrap();
        // constraint inactive: sup over a ∈ [0, 1] of a·s is max(0, s)
        let mut scaled = values.clone();
        scaled.push(vec![0.0; 3]);
        let plain = empirical_rademacher(&SupremumOracle::finite(scaled).unwrap(), 500, 1).unwrap();
        assert!((big.exact.mean - plain.mean).abs() < 1e-12);
        assert!(big.grid.mean <= big.exact.mean + 1e-12);
        let mut last = 0.0;
        for r in [0.0, 0.05, 0.1, 0.5, 1.0, 2.0] {
            let est = empirical_local_rademacher(&values, r, 21, SecondMoment::Empirical, 300, 2)
                .unwrap();
            assert!(est.exact.mean >= last - 1e-12);
            assert!(est.grid.mean <= est.exact.mean + 1e-12);
            last = est.exact.mean;
        }
        let exact_d =
            empirical_local_rademacher(&values, 0.5, 5, SecondMoment::Exact(&[1.0, 0.2]), 10, 0)
                .unwrap();
        assert_eq!(exact_d.exact.kind, "local_rademacher_exact_d");
    }

    #[test]
    fn factor_graph_closed_forms() {
        let unit = FactorTerm {
            block: 0,
            row: 0,
            features: vec![1.0],
        };
        let zero = FactorTerm {
            block: 0,
            row: 0,
            features: vec![0.0],
        };
        let one = FactoredLinearBall::new(vec![(1, 1)], vec![vec![vec![unit.clone()]]]).unwrap();
        let est = factor_graph_rademacher(&one, 50, 0).unwrap();
        assert_eq!(est.mean, 1.0);
        let doubled =
            FactoredLinearBall::new(vec![(1, 1)], vec![vec![vec![unit], vec![zero.clone()]]])
                .unwrap();
        let est = factor_graph_rademacher(&doubled, 50, 0).unwrap();
        assert!((est.mean - 2f64.sqrt()).abs() < 1e-12);
        let nothing = FactoredLinearBall::new(vec![(1, 1)], vec![vec![vec![zero]]]).unwrap();
        assert_eq!(factor_graph_rademacher(&nothing, 50, 0).unwrap().mean, 0.0);
    }

    #[test]
    fn trivial_mask_gives_zero_difference() {
        let base = LinearBallTerms::new(
            vec![vec![1.0, 0.2], vec![-0.3, 0.8], vec![0.5, 0.5]],
            vec![Label(1), Label(2), Label(1)],
            2,
            1.5,
        )
        .unwrap();
        let masked = SupremumOracle::MaskedLinearBall {
            base: base.clone(),
            allowed: vec![true; 3],
            mask_constant: 2.0,
        };
        let report = check_masked_leq(&SupremumOracle::LinearBall(base), &masked, 200, 5).unwrap();
        assert_eq!(report.difference, 0.0);
        assert!(report.holds);
    }

    #[test]
    fn gaussian_comparison_single_label() {
        use crate::hypotheses::TabulatedHypothesis;
        let inputs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let members: Vec<TabulatedHypothesis> = (0..3)
            .map(|j| {
                TabulatedHypothesis::new(
                    inputs.clone(),
                    (0..3).map(|i| vec![(i + j) as f64 * 0.1 - 0.2]).collect(),
                )
                .unwrap()
            })
            .collect();
        let (lhs, rhs) =
            gaussian_comparison_oracles(&members, &inputs, &Requirement::always(1), 10.0).unwrap();
        assert_eq!(lhs, rhs);
        let report = check_gaussian_comparison(&lhs, &rhs, 2000, 8).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn gaussian_comparison_holds_with_and_without_restrictions() {
        use crate::hypotheses::ScoringHypothesis;
        use crate::requirements::{AtomicPredicate, Comparator, Rule};
        let inputs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 3.0 - 1.0, 0.5]).collect();
        let members: Vec<ScoringHypothesis> = (0..8)
            .map(|s| ScoringHypothesis::sample_unit_ball(2, 2, 2.0, s).unwrap())
            .collect();
        let restrictive = Requirement::flat(
            2,
            vec![Rule::when(vec![AtomicPredicate::new(0, Comparator::Gt, 0.0)]).forbid([Label(2)])],
        )
        .unwrap();
        for req in [Requirement::always(2), restrictive] {
            let (lhs, rhs) = gaussian_comparison_oracles(&members, &inputs, &req, 3.0).unwrap();
            assert!(
                check_gaussian_comparison(&lhs, &rhs, 4000, 3)
                    .unwrap()
                    .holds
            );
        }
    }
}
