use crate::error::{Error, Result};
use crate::hypotheses::{check_p, group_norm, l2, Scorer};
use crate::label::Label;
use crate::requirements::Requirement;

/// `sup_{‖w‖_{2,p} ≤ 1} Σ_{i,y} coeff[i][y] ⟨w_y, φ(x_i)⟩ = ‖(v_1, …, v_K)‖_{2,q}`
/// with `v_y = Σ_i coeff[i][y] φ(x_i)` and `1/p + 1/q = 1`.
pub fn sup_linear_ball(coeff: &[Vec<f64>], features: &[Vec<f64>], p: f64) -> Result<f64> {
    check_p(p)?;
    if coeff.len() != features.len() {
        return Err(Error::LengthMismatch {
            expected: features.len(),
            got: coeff.len(),
        });
    }
    let k = coeff.first().map_or(0, Vec::len);
    let dim = features.first().map_or(0, Vec::len);
    let mut v = vec![vec![0.0; dim]; k];
    for (row, phi) in coeff.iter().zip(features) {
        if row.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: row.len(),
            });
        }
        if phi.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: phi.len(),
            });
        }
        for (vy, &c) in v.iter_mut().zip(row) {
            if c != 0.0 {
                for (a, &f) in vy.iter_mut().zip(phi) {
                    *a += c * f;
                }
            }
        }
    }
    Ok(group_norm(&v, dual_exponent(p)))
}

pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// The loss-class view `z_i ↦ h(x_i, y_i)` of a unit `ℓ_{2,p}` ball of linear scorers on a fixed sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBallTerms {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub label_count: usize,
    pub p: f64,
}

impl LinearBallTerms {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<Label>,
        label_count: usize,
        p: f64,
    ) -> Result<Self> {
        check_p(p)?;
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        for y in &labels {
            y.check(label_count)?;
        }
        Ok(Self {
            features,
            labels,
            label_count,
            p,
        })
    }

    fn sup_over(&self, coeffs: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
        let dim = self.features.first().map_or(0, Vec::len);
        let mut v = vec![vec![0.0; dim]; self.label_count];
        for (i, (&c, phi)) in coeffs.iter().zip(&self.features).enumerate() {
            if keep(i) {
                for (a, &f) in v[self.labels[i].index()].iter_mut().zip(phi) {
                    *a += c * f;
                }
            }
        }
        group_norm(&v, dual_exponent(self.p))
    }
}

/// Exact maximiser of a linear functional `Σ_i c_i g(z_i)` over a function class.
#[derive(Clone, Debug, PartialEq)]
pub enum SupremumOracle {
    /// `{z ↦ h(x, y) : ‖w‖_{2,p} ≤ 1}`.
    LinearBall(LinearBallTerms),
    /// Explicit values `g(z_i)`, one row per member.
    FiniteClass { values: Vec<Vec<f64>> },
    /// `{z ↦ h_c(x, y)}`: terms with `c(x_i, y_i) = 0` are the constant `−M`.
    MaskedLinearBall {
        base: LinearBallTerms,
        allowed: Vec<bool>,
        mask_constant: f64,
    },
    /// `Π_1(H) = {x ↦ h(x, y) : y ∈ [K], h}` on the unit ball: every block can reach
    /// unit norm, so the supremum is `‖Σ_i c_i φ(x_i)‖_2` for any `p`.
    Projection { features: Vec<Vec<f64>> },
}

impl SupremumOracle {
    pub fn finite(values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("empty finite class".into()))?;
        if let Some(row) = values.iter().find(|r| r.len() != m) {
            return Err(Error::LengthMismatch {
                expected: m,
                got: row.len(),
            });
        }
        Ok(SupremumOracle::FiniteClass { values })
    }

    /// Finite class `{z ↦ h(x, y)}` for tabulated members on a labelled sample.
    pub fn finite_from_scorers<H: Scorer>(
        members: &[H],
        sample: &[(Vec<f64>, Label)],
    ) -> Result<Self> {
        let values = members
            .iter()
            .map(|h| {
                sample
                    .iter()
                    .map(|(x, y)| h.score(x, *y))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::finite(values)
    }

    /// Finite class `{z ↦ h_c(x, y)}` under masking with constant `M`.
    pub fn finite_masked<H: Scorer>(
        members: &[H],
        sample: &[(Vec<f64>, Label)],
        req: &Requirement,
        mask_constant: f64,
    ) -> Result<Self> {
        let allowed = sample
            .iter()
            .map(|(x, y)| req.evaluate(x, *y))
            .collect::<Result<Vec<_>>>()?;
        let values = members
            .iter()
            .map(|h| {
                sample
                    .iter()
                    .zip(&allowed)
                    .map(|((x, y), &ok)| {
                        let s = h.score(x, *y)?;
                        if s.abs() >= mask_constant {
                            return Err(Error::MaskConstantViolated {
                                score: s,
                                mask: mask_constant,
                            });
                        }
                        Ok(if ok { s } else { -mask_constant })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::finite(values)
    }

    pub fn masked_linear_ball(
        base: LinearBallTerms,
        inputs: &[Vec<f64>],
        req: &Requirement,
        mask_constant: f64,
    ) -> Result<Self> {
        if inputs.len() != base.labels.len() {
            return Err(Error::LengthMismatch {
                expected: base.labels.len(),
                got: inputs.len(),
            });
        }
        let allowed = inputs
            .iter()
            .zip(&base.labels)
            .map(|(x, y)| req.evaluate(x, *y))
            .collect::<Result<Vec<_>>>()?;
        Ok(SupremumOracle::MaskedLinearBall {
            base,
            allowed,
            mask_constant,
        })
    }

    /// Number of coefficients the oracle consumes.
    pub fn len(&self) -> usize {
        match self {
            SupremumOracle::LinearBall(t) | SupremumOracle::MaskedLinearBall { base: t, .. } => {
                t.labels.len()
            }
            SupremumOracle::FiniteClass { values } => values[0].len(),
            SupremumOracle::Projection { features } => features.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sup(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        Ok(match self {
            SupremumOracle::LinearBall(t) => t.sup_over(coeffs, |_| true),
            SupremumOracle::FiniteClass { values } => values
                .iter()
                .map(|g| g.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            SupremumOracle::MaskedLinearBall {
                base,
                allowed,
                mask_constant,
            } => {
                let constant: f64 = coeffs
                    .iter()
                    .zip(allowed)
                    .filter(|(_, &ok)| !ok)
                    .map(|(c, _)| -mask_constant * c)
                    .sum();
                constant + base.sup_over(coeffs, |i| allowed[i])
            }
            SupremumOracle::Projection { features } => {
                let dim = features.first().map_or(0, Vec::len);
                let mut v = vec![0.0; dim];
                for (&c, phi) in coeffs.iter().zip(features) {
                    for (a, &f) in v.iter_mut().zip(phi) {
                        *a += c * f;
                    }
                }
                l2(&v)
            }
        })
    }

    /// Same class with every member multiplied by `alpha ≥ 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        match self {
            SupremumOracle::FiniteClass { values } => Self::finite(
                values
                    .iter()
                    .map(|r| r.iter().map(|v| v * alpha).collect())
                    .collect(),
            ),
            SupremumOracle::LinearBall(t) => {
                let mut t = t.clone();
                for phi in &mut t.features {
                    for v in phi.iter_mut() {
                        *v *= alpha;
                    }
                }
                Ok(SupremumOracle::LinearBall(t))
            }
            _ => Err(Error::InvalidArgument(
                "scaling applies to linear balls and finite classes".into(),
            )),
        }
    }
}

/// One score term `h_f(x_i, y)` of a factored linear class: reads row `row` of block `block`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTerm {
    pub block: usize,
    pub row: usize,
    pub features: Vec<f64>,
}

/// A factored linear class whose weight blocks each lie in a unit Frobenius ball.
///
/// `examples[i][f]` lists the terms of factor `f ∈ F_i`, one per local assignment `y ∈ Y_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredLinearBall {
    block_shapes: Vec<(usize, usize)>,
    examples: Vec<Vec<Vec<FactorTerm>>>,
    terms: usize,
}

impl FactoredLinearBall {
    pub fn new(
        block_shapes: Vec<(usize, usize)>,
        examples: Vec<Vec<Vec<FactorTerm>>>,
    ) -> Result<Self> {
        let mut terms = 0;
        for term in examples.iter().flatten().flatten() {
            let &(rows, dim) = block_shapes
                .get(term.block)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown block {}", term.block)))?;
            if term.row >= rows {
                return Err(Error::InvalidArgument(format!(
                    "row {} outside block {}",
                    term.row, term.block
                )));
            }
            if term.features.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: term.features.len(),
                });
            }
            terms += 1;
        }
        if examples.is_empty() {
            return Err(Error::InvalidArgument(
                "factored class needs at least one example".into(),
            ));
        }
        Ok(Self {
            block_shapes,
            examples,
            terms,
        })
    }

    pub fn examples(&self) -> usize {
        self.examples.len()
    }

    /// Total number of sign variables `ε_{i,f,y}`.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `sup Σ_i Σ_f Σ_y √|F_i| ε_{i,f,y} h_f(x_i, y)`: the sum over blocks of the
    /// Frobenius norms of the aggregated coefficients.
    pub fn sup(&self, signs: &[f64]) -> Result<f64> {
        if signs.len() != self.terms {
            return Err(Error::LengthMismatch {
                expected: self.terms,
                got: signs.len(),
            });
        }
        let mut agg: Vec<Vec<Vec<f64>>> = self
            .block_shapes
            .iter()
            .map(|&(rows, dim)| vec![vec![0.0; dim]; rows])
            .collect();
        let mut next = signs.iter();
        for factors in &self.examples {
            let weight = (factors.len() as f64).sqrt();
            for term in factors.iter().flatten() {
                let e = next.next().expect("length checked") * weight;
                for (a, &f) in agg[term.block][term.row].iter_mut().zip(&term.features) {
                    *a += e * f;
                }
            }
        }
        Ok(agg.iter().map(|block| l2(&block.concat())).sum())
    }
}
