use crate::error::{Error, Result};
use crate::label::Label;
use crate::losses::{surrogate_max_brute_force, Hamming, Surrogate};

use super::{output_space_size, ChainPotentials, SequenceScorer};

/// Exact `max_{y′≠y} [L_H(y′, y) − (h(x, y) − h(x, y′))/ρ]` on a chain.
///
/// Forward pass over `(label, differs-so-far)` states; the Hamming term
/// splits into `1[y′_k ≠ y_k]/l` per position.
pub(crate) fn hamming_additive_dp(
    p: &ChainPotentials,
    y: &[Label],
    rho: f64,
) -> Result<Option<f64>> {
    if !(rho > 0.0) {
        return Err(Error::NonpositiveRho(rho));
    }
    let own = p.score(y)?;
    let alphabet = p.alphabet();
    if output_space_size(&alphabet) <= 1 {
        return Ok(None);
    }
    let l = alphabet.len() as f64;
    let local = |k: usize, a: usize| -> (f64, usize) {
        let differs = usize::from(a != y[k].index());
        (p.unary[k][a] / rho + differs as f64 / l, differs)
    };
    let mut f = vec![[f64::NEG_INFINITY; 2]; alphabet[0]];
    for (a, slot) in f.iter_mut().enumerate() {
        let (v, d) = local(0, a);
        slot[d] = v;
    }
    for k in 1..alphabet.len() {
        let mut g = vec![[f64::NEG_INFINITY; 2]; alphabet[k]];
        for (b, slot) in g.iter_mut().enumerate() {
            let (v, db) = local(k, b);
            for (a, prev) in f.iter().enumerate() {
                let edge = p.pairwise[k - 1][a][b] / rho;
                for d in 0..2 {
                    if prev[d] > f64::NEG_INFINITY {
                        let cand = prev[d] + edge + v;
                        let nd = d | db;
                        slot[nd] = slot[nd].max(cand);
                    }
                }
            }
        }
        f = g;
    }
    let best = f.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max);
    Ok((best > f64::NEG_INFINITY).then(|| best - own / rho))
}

/// The loss-augmented inner maximum of either surrogate under the Hamming loss.
///
/// The additive form uses the model's decomposition when available;
/// the multiplicative form is enumerated, subject to `cap`.
pub fn loss_augmented_max<S: SequenceScorer + ?Sized>(
    model: &S,
    x: &[f64],
    y: &[Label],
    rho: f64,
    mode: Surrogate,
    cap: u128,
) -> Result<Option<f64>> {
    if mode == Surrogate::Additive {
        if let Some(v) = model.hamming_augmented_max(x, y, rho) {
            return v;
        }
    }
    if !(rho > 0.0) {
        return Err(Error::NonpositiveRho(rho));
    }
    surrogate_max_brute_force(model, &Hamming, x, y, rho, mode, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::labels;
    use crate::structured::{FactorGraphModel, BRUTE_FORCE_CAP};
    use rand::Rng as _;

    #[test]
    fn single_competitor_matches_hand_formula() {
        let model =
            FactorGraphModel::chain_tables(vec![vec![0.7, 0.2]], vec![vec![0.0; 2]; 2]).unwrap();
        let y = labels(&[1]);
        let expect = 1.0 - (0.7 - 0.2) / 0.5;
        for mode in [Surrogate::Additive, Surrogate::Multiplicative] {
            let got = loss_augmented_max(&model, &[], &y, 0.5, mode, BRUTE_FORCE_CAP)
                .unwrap()
                .unwrap();
            assert!((got - expect).abs() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn dp_matches_enumeration() {
        let mut rng = crate::rng::rng(99);
        for _ in 0..200 {
            let l = rng.random_range(1..=4);
            let k = rng.random_range(1..=3);
            let emission = (0..l)
                .map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let transition = (0..k)
                .map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let model = FactorGraphModel::chain_tables(emission, transition).unwrap();
            let y: Vec<Label> = (0..l).map(|_| Label(rng.random_range(1..=k))).collect();
            let rho = rng.random_range(0.1..3.0);
            let dp = model.hamming_augmented_max(&[], &y, rho).unwrap().unwrap();
            let brute = surrogate_max_brute_force(
                &model,
                &Hamming,
                &[],
                &y,
                rho,
                Surrogate::Additive,
                BRUTE_FORCE_CAP,
            )
            .unwrap();
            match (dp, brute) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
                (None, None) => assert_eq!(k, 1),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn large_margin_gives_nonpositive_max() {
        let model = FactorGraphModel::chain_tables(
            vec![vec![5.0, 0.0], vec![5.0, 0.0]],
            vec![vec![0.0; 2]; 2],
        )
        .unwrap();
        let v = loss_augmented_max(
            &model,
            &[],
            &labels(&[1, 1]),
            1.0,
            Surrogate::Additive,
            BRUTE_FORCE_CAP,
        )
        .unwrap()
        .unwrap();
        assert!(v <= 0.0);
    }

    #[test]
    fn multiplicative_beyond_cap_is_too_large() {
        let model =
            FactorGraphModel::chain_tables(vec![vec![0.0; 4]; 3], vec![vec![0.0; 4]; 4]).unwrap();
        let err = loss_augmented_max(
            &model,
            &[],
            &labels(&[1, 1, 1]),
            1.0,
            Surrogate::Multiplicative,
            10,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooLarge { size: 64, cap: 10 }));
        assert!(loss_augmented_max(
            &model,
            &[],
            &labels(&[1, 1, 1]),
            1.0,
            Surrogate::Additive,
            10
        )
        .is_ok());
    }
}
