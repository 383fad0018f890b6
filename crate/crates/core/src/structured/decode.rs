use crate::error::{Error, Result};
use crate::label::Label;
use crate::requirements::{ActiveConstraints, Requirement};

use super::{ChainPotentials, ChainScorer, SequenceScorer};

/// Default limit on `Π |Y_k|` for enumeration.
pub const BRUTE_FORCE_CAP: u128 = 1_000_000;

/// `Π |Y_k|`, saturating.
pub fn output_space_size(alphabet: &[usize]) -> u128 {
    alphabet
        .iter()
        .fold(1u128, |acc, &n| acc.saturating_mul(n as u128))
}

/// All sequences over `alphabet` in lexicographic order (last position fastest).
pub fn enumerate_sequences(alphabet: &[usize], cap: u128) -> Result<Sequences> {
    let size = output_space_size(alphabet);
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let start = if alphabet.contains(&0) {
        None
    } else {
        Some(vec![0; alphabet.len()])
    };
    Ok(Sequences {
        alphabet: alphabet.to_vec(),
        next: start,
    })
}

pub struct Sequences {
    alphabet: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Sequences {
    type Item = Vec<Label>;

    fn next(&mut self) -> Option<Vec<Label>> {
        let current = self.next.take()?;
        let out = current.iter().map(|&i| Label::from_index(i)).collect();
        let mut succ = current;
        for k in (0..succ.len()).rev() {
            succ[k] += 1;
            if succ[k] < self.alphabet[k] {
                self.next = Some(succ);
                return Some(out);
            }
            succ[k] = 0;
        }
        Some(out)
    }
}

/// Exact (constrained) argmax over a chain; ties go to the lexicographically
/// smallest sequence.
///
/// With constraints, states are `(position, label, labels-of-must_include-seen)`
/// and blocked states carry `−∞`.
pub fn decode_potentials(
    p: &ChainPotentials,
    constraints: Option<&ActiveConstraints>,
) -> Result<Vec<Label>> {
    let alphabet = p.alphabet();
    let l = alphabet.len();
    if let Some(c) = constraints {
        if c.alphabet != alphabet {
            return Err(Error::InvalidArgument(format!(
                "requirement alphabet {:?} does not match model alphabet {:?}",
                c.alphabet, alphabet
            )));
        }
    }
    let required: &[Label] = constraints.map_or(&[], |c| c.required.as_slice());
    let masks = 1usize << required.len();
    let full = masks - 1;
    let width = alphabet.iter().copied().max().unwrap_or(0);
    let mut bit = vec![0usize; width];
    for (j, r) in required.iter().enumerate() {
        if r.index() < width {
            bit[r.index()] = 1 << j;
        }
    }
    let allowed = |k: usize, a: usize| constraints.is_none_or(|c| c.allowed[k][a]);
    let pair_ok = |a: usize, b: usize| constraints.is_none_or(|c| c.pair_allowed(a, b));

    // value[k][a * masks + s]: best score of positions k.. given y_k = a and prefix mask s
    let mut value: Vec<Vec<f64>> = alphabet
        .iter()
        .map(|&n| vec![f64::NEG_INFINITY; n * masks])
        .collect();
    for a in 0..alphabet[l - 1] {
        if !allowed(l - 1, a) {
            continue;
        }
        for s in 0..masks {
            if s | bit[a] == full {
                value[l - 1][a * masks + s] = p.unary[l - 1][a];
            }
        }
    }
    for k in (0..l - 1).rev() {
        let (head, tail) = value.split_at_mut(k + 1);
        let next = &tail[0];
        for a in 0..alphabet[k] {
            if !allowed(k, a) {
                continue;
            }
            for s in 0..masks {
                let s2 = s | bit[a];
                let mut best = f64::NEG_INFINITY;
                for b in 0..alphabet[k + 1] {
                    if pair_ok(a, b) {
                        best = best.max(p.pairwise[k][a][b] + next[b * masks + s2]);
                    }
                }
                if best > f64::NEG_INFINITY {
                    head[k][a * masks + s] = p.unary[k][a] + best;
                }
            }
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut first = None;
    for a in 0..alphabet[0] {
        let v = value[0][a * masks];
        if v > best {
            best = v;
            first = Some(a);
        }
    }
    let Some(mut a) = first else {
        return Err(Error::Infeasible);
    };
    let mut out = vec![Label::from_index(a)];
    let mut s = bit[a];
    for k in 1..l {
        let mut choice = None;
        let mut top = f64::NEG_INFINITY;
        for b in 0..alphabet[k] {
            if pair_ok(a, b) {
                let v = p.pairwise[k - 1][a][b] + value[k][b * masks + s];
                if v > top {
                    top = v;
                    choice = Some(b);
                }
            }
        }
        a = choice.ok_or(Error::Infeasible)?;
        s |= bit[a];
        out.push(Label::from_index(a));
    }
    Ok(out)
}

/// `argmax_y h(x, y)` by max-sum dynamic programming.
pub fn viterbi<M: ChainScorer + ?Sized>(model: &M, x: &[f64]) -> Result<Vec<Label>> {
    decode_potentials(&model.chain_potentials(x)?, None)
}

/// `argmax_{y : c(x, y) = 1} h(x, y)`; [`Error::Infeasible`] when nothing qualifies.
pub fn constrained_viterbi<M: ChainScorer + ?Sized>(
    model: &M,
    x: &[f64],
    req: &Requirement,
) -> Result<Vec<Label>> {
    let potentials = model.chain_potentials(x)?;
    let constraints = req.active_constraints(x, potentials.length())?;
    decode_potentials(&potentials, Some(&constraints))
}

/// Lexicographically smallest sequence meeting the constraints, if any.
pub fn find_feasible_sequence(constraints: &ActiveConstraints) -> Option<Vec<Label>> {
    if constraints.alphabet.is_empty() {
        return constraints.required.is_empty().then(Vec::new);
    }
    let zeros = ChainPotentials {
        unary: constraints.alphabet.iter().map(|&n| vec![0.0; n]).collect(),
        pairwise: constraints
            .alphabet
            .windows(2)
            .map(|w| vec![vec![0.0; w[1]]; w[0]])
            .collect(),
    };
    decode_potentials(&zeros, Some(constraints)).ok()
}

/// Exact (constrained) argmax by enumeration, with the same tie-break as the decoders.
pub fn brute_force_decode<S: SequenceScorer + ?Sized>(
    model: &S,
    x: &[f64],
    length: usize,
    req: Option<&Requirement>,
    cap: u128,
) -> Result<Vec<Label>> {
    let alphabet = model.alphabet(x, length)?;
    let mut best: Option<(f64, Vec<Label>)> = None;
    for y in enumerate_sequences(&alphabet, cap)? {
        if let Some(r) = req {
            if !r.evaluate_structured(x, &y)? {
                continue;
            }
        }
        let score = model.score_sequence(x, &y)?;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, y));
        }
    }
    best.map(|(_, y)| y).ok_or(Error::Infeasible)
}
