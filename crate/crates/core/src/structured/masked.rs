use crate::error::{Error, Result};
use crate::label::Label;
use crate::requirements::Requirement;

use super::{decode_potentials, ChainScorer, SequenceScorer};

/// Full-sequence masking: `h_c(x, y) = h(x, y)` if `c(x, y) = 1`, else `−M`.
/// The result generally has no factored form, so only enumeration applies.
#[derive(Clone, Debug)]
pub struct MaskedSequenceScorer<S> {
    base: S,
    requirement: Requirement,
    mask_constant: f64,
}

pub fn mask_structured<S: SequenceScorer>(
    base: S,
    req: &Requirement,
    mask_constant: f64,
) -> MaskedSequenceScorer<S> {
    MaskedSequenceScorer {
        base,
        requirement: req.clone(),
        mask_constant,
    }
}

impl<S> MaskedSequenceScorer<S> {
    pub fn base(&self) -> &S {
        &self.base
    }

    pub fn requirement(&self) -> &Requirement {
        &self.requirement
    }

    pub fn mask_constant(&self) -> f64 {
        self.mask_constant
    }
}

impl<S: SequenceScorer> SequenceScorer for MaskedSequenceScorer<S> {
    fn alphabet(&self, x: &[f64], length: usize) -> Result<Vec<usize>> {
        self.base.alphabet(x, length)
    }

    fn score_sequence(&self, x: &[f64], y: &[Label]) -> Result<f64> {
        let s = self.base.score_sequence(x, y)?;
        if s.abs() >= self.mask_constant {
            return Err(Error::MaskConstantViolated {
                score: s,
                mask: self.mask_constant,
            });
        }
        if self.requirement.evaluate_structured(x, y)? {
            Ok(s)
        } else {
            Ok(-self.mask_constant)
        }
    }
}

/// `max_{x ∈ probes, y} |h(x, y)| + 1`, with both extremes found by decoding.
pub fn structured_mask_constant<M: ChainScorer + ?Sized>(
    model: &M,
    probes: &[Vec<f64>],
) -> Result<f64> {
    let mut max_abs: f64 = 0.0;
    for x in probes {
        let p = model.chain_potentials(x)?;
        let hi = p.score(&decode_potentials(&p, None)?)?;
        let lo = p.score(&decode_potentials(&p.negated(), None)?)?;
        max_abs = max_abs.max(hi.abs()).max(lo.abs());
    }
    Ok(max_abs + 1.0)
}
