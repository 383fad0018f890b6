//! Requirement functions `c(x, y) -> {0, 1}` expressed as a small rule language.
//!
//! A rule carries a conjunctive condition over input features and one or more
//! effects on the output. All effects of all matching rules are intersected: a
//! label (or label sequence) is admissible iff no matching rule excludes it, so
//! rule order never changes the outcome.
//!
//! Flat requirements act on a single label in `1..=K`. Structured requirements
//! act on a label sequence and may additionally restrict the scoped positions,
//! forbid adjacent ordered pairs, and demand that certain labels appear.

mod parse;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use parse::parse_rules;

/// Most labels a single `must_include` set (or the union of active sets) may hold.
pub const MAX_REQUIRED_LABELS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "==" => Comparator::Eq,
            _ => return None,
        })
    }

    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

/// `x[feature] <op> threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicPredicate {
    pub feature: usize,
    pub op: Comparator,
    pub threshold: f64,
}

impl AtomicPredicate {
    pub fn new(feature: usize, op: Comparator, threshold: f64) -> Self {
        Self {
            feature,
            op,
            threshold,
        }
    }

    pub fn holds(&self, x: &[f64]) -> Result<bool> {
        let value = x.get(self.feature).ok_or(Error::DimensionMismatch {
            needed: self.feature,
            got: x.len(),
        })?;
        Ok(self.op.apply(*value, self.threshold))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LabelEffect {
    Forbid(BTreeSet<Label>),
    AllowOnly(BTreeSet<Label>),
}

impl LabelEffect {
    pub fn admits(&self, y: Label) -> bool {
        match self {
            LabelEffect::Forbid(set) => !set.contains(&y),
            LabelEffect::AllowOnly(set) => set.contains(&y),
        }
    }

    fn labels(&self) -> &BTreeSet<Label> {
        match self {
            LabelEffect::Forbid(s) | LabelEffect::AllowOnly(s) => s,
        }
    }
}

/// Positions (1-based) a rule's label effect applies to.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum PositionScope {
    #[default]
    All,
    Only(BTreeSet<usize>),
}

impl PositionScope {
    pub fn contains(&self, position: usize) -> bool {
        match self {
            PositionScope::All => true,
            PositionScope::Only(set) => set.contains(&position),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Rule {
    /// Conjunction; an empty condition always matches.
    pub condition: Vec<AtomicPredicate>,
    pub effect: Option<LabelEffect>,
    pub positions: PositionScope,
    /// Ordered pairs `(a, b)` that may not appear as `y_k = a, y_{k+1} = b`.
    pub forbid_pairs: Vec<(Label, Label)>,
    pub must_include: BTreeSet<Label>,
}

impl Rule {
    pub fn when(condition: Vec<AtomicPredicate>) -> Self {
        Rule {
            condition,
            ..Default::default()
        }
    }

    pub fn always() -> Self {
        Rule::default()
    }

    pub fn forbid(mut self, labels: impl IntoIterator<Item = Label>) -> Self {
        self.effect = Some(LabelEffect::Forbid(labels.into_iter().collect()));
        self
    }

    pub fn allow_only(mut self, labels: impl IntoIterator<Item = Label>) -> Self {
        self.effect = Some(LabelEffect::AllowOnly(labels.into_iter().collect()));
        self
    }

    pub fn at_positions(mut self, positions: impl IntoIterator<Item = usize>) -> Self {
        self.positions = PositionScope::Only(positions.into_iter().collect());
        self
    }

    pub fn forbid_pairs(mut self, pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        self.forbid_pairs.extend(pairs);
        self
    }

    pub fn must_include(mut self, labels: impl IntoIterator<Item = Label>) -> Self {
        self.must_include.extend(labels);
        self
    }

    pub fn matches(&self, x: &[f64]) -> Result<bool> {
        for pred in &self.condition {
            if !pred.holds(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn is_structural(&self) -> bool {
        self.positions != PositionScope::All
            || !self.forbid_pairs.is_empty()
            || !self.must_include.is_empty()
    }

    fn max_feature(&self) -> Option<usize> {
        self.condition.iter().map(|p| p.feature).max()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequirementKind {
    Flat,
    Structured,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpace {
    /// Every position draws from `1..=K`; sequence length is free.
    Uniform(usize),
    /// Fixed length with per-position alphabet sizes.
    PerPosition(Vec<usize>),
}

impl LabelSpace {
    pub fn alphabet(&self, length: usize) -> Result<Vec<usize>> {
        match self {
            LabelSpace::Uniform(k) => Ok(vec![*k; length]),
            LabelSpace::PerPosition(sizes) if sizes.len() == length => Ok(sizes.clone()),
            LabelSpace::PerPosition(sizes) => Err(Error::LengthMismatch {
                expected: sizes.len(),
                got: length,
            }),
        }
    }

    pub fn max_labels(&self) -> usize {
        match self {
            LabelSpace::Uniform(k) => *k,
            LabelSpace::PerPosition(sizes) => sizes.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn fixed_length(&self) -> Option<usize> {
        match self {
            LabelSpace::Uniform(_) => None,
            LabelSpace::PerPosition(sizes) => Some(sizes.len()),
        }
    }
}

/// A deterministic, stateless requirement function.
#[derive(Clone, Debug, PartialEq)]
pub struct Requirement {
    kind: RequirementKind,
    labels: LabelSpace,
    rules: Vec<Rule>,
    min_dim: usize,
}

/// Inputs (by position in the checked list) for which nothing is admissible.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checked: usize,
    pub infeasible: Vec<usize>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_empty()
    }
}

/// The constraints a structured requirement imposes on one input and length.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveConstraints {
    pub alphabet: Vec<usize>,
    /// `allowed[k][a]`: label index `a` may sit at position `k` (both 0-based).
    pub allowed: Vec<Vec<bool>>,
    /// `pair_forbidden[a][b]` over label indices, shared by every adjacent pair.
    pub pair_forbidden: Vec<Vec<bool>>,
    /// Labels that must appear at least once, deduplicated and sorted.
    pub required: Vec<Label>,
}

impl ActiveConstraints {
    pub fn admits(&self, y: &[Label]) -> bool {
        if y.len() != self.alphabet.len() {
            return false;
        }
        for (k, label) in y.iter().enumerate() {
            if !self.allowed[k][label.index()] {
                return false;
            }
        }
        for w in y.windows(2) {
            if self.pair_forbidden[w[0].index()][w[1].index()] {
                return false;
            }
        }
        self.required.iter().all(|r| y.contains(r))
    }

    pub fn pair_allowed(&self, a: usize, b: usize) -> bool {
        !self.pair_forbidden[a][b]
    }
}

impl Requirement {
    pub fn flat(label_count: usize, rules: Vec<Rule>) -> Result<Self> {
        Self::new(
            RequirementKind::Flat,
            LabelSpace::Uniform(label_count),
            rules,
        )
    }

    pub fn structured(labels: LabelSpace, rules: Vec<Rule>) -> Result<Self> {
        Self::new(RequirementKind::Structured, labels, rules)
    }

    /// The requirement `c ≡ 1`.
    pub fn always(label_count: usize) -> Self {
        Self::flat(label_count, Vec::new()).expect("empty rule set is valid")
    }

    pub fn new(kind: RequirementKind, labels: LabelSpace, rules: Vec<Rule>) -> Result<Self> {
        let max_labels = labels.max_labels();
        if max_labels == 0 {
            return Err(Error::Schema("label_count must be positive".into()));
        }
        if let LabelSpace::PerPosition(sizes) = &labels {
            if sizes.contains(&0) {
                return Err(Error::Schema("alphabet sizes must be positive".into()));
            }
        }
        for (i, rule) in rules.iter().enumerate() {
            if kind == RequirementKind::Flat {
                if rule.is_structural() {
                    return Err(Error::Schema(format!(
                        "rule {i}: positions, forbid_pairs and must_include need kind \"structured\""
                    )));
                }
                if rule.effect.is_none() {
                    return Err(Error::Schema(format!(
                        "rule {i}: flat rules need \"forbid\" or \"allow_only\""
                    )));
                }
            }
            let mut mentioned: Vec<Label> = rule.must_include.iter().copied().collect();
            if let Some(effect) = &rule.effect {
                mentioned.extend(effect.labels().iter().copied());
            }
            for &(a, b) in &rule.forbid_pairs {
                mentioned.push(a);
                mentioned.push(b);
            }
            for label in mentioned {
                label
                    .check(max_labels)
                    .map_err(|e| Error::Schema(format!("rule {i}: {e}")))?;
            }
            if rule.must_include.len() > MAX_REQUIRED_LABELS {
                return Err(Error::TooManyRequiredLabels(rule.must_include.len()));
            }
            if let PositionScope::Only(set) = &rule.positions {
                if set.contains(&0) {
                    return Err(Error::Schema(format!("rule {i}: positions are 1-based")));
                }
                if let Some(l) = labels.fixed_length() {
                    if let Some(&p) = set.iter().find(|&&p| p > l) {
                        return Err(Error::Schema(format!(
                            "rule {i}: position {p} exceeds sequence length {l}"
                        )));
                    }
                }
            }
        }
        let min_dim = rules
            .iter()
            .filter_map(Rule::max_feature)
            .max()
            .map_or(0, |f| f + 1);
        Ok(Self {
            kind,
            labels,
            rules,
            min_dim,
        })
    }

    pub fn kind(&self) -> RequirementKind {
        self.kind
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    /// Number of labels `K` (the largest alphabet for structured requirements).
    pub fn label_count(&self) -> usize {
        self.labels.max_labels()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_trivial(&self) -> bool {
        self.rules.is_empty()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() < self.min_dim {
            return Err(Error::DimensionMismatch {
                needed: self.min_dim - 1,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn active_rules<'a>(&'a self, x: &[f64]) -> Result<Vec<&'a Rule>> {
        self.check_dim(x)?;
        let mut out = Vec::new();
        for rule in &self.rules {
            if rule.matches(x)? {
                out.push(rule);
            }
        }
        Ok(out)
    }

    /// `c(x, y)` for a single label. On a structured requirement this is the
    /// evaluation of the length-1 sequence `(y)`.
    pub fn evaluate(&self, x: &[f64], y: Label) -> Result<bool> {
        if self.kind == RequirementKind::Structured {
            return self.evaluate_structured(x, &[y]);
        }
        y.check(self.label_count())?;
        for rule in self.active_rules(x)? {
            if let Some(effect) = &rule.effect {
                if !effect.admits(y) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// `{ y : c(x, y) = 1 }`, in increasing label order.
    pub fn feasible_labels(&self, x: &[f64]) -> Result<Vec<Label>> {
        let active = self.active_rules(x)?;
        let out = Label::all(self.label_count())
            .filter(|&y| {
                active
                    .iter()
                    .all(|r| r.effect.as_ref().is_none_or(|e| e.admits(y)))
            })
            .collect();
        Ok(out)
    }

    pub fn active_constraints(&self, x: &[f64], length: usize) -> Result<ActiveConstraints> {
        let alphabet = self.labels.alphabet(length)?;
        let max_labels = self.label_count();
        let mut allowed: Vec<Vec<bool>> = alphabet
            .iter()
            .map(|&n| (0..max_labels).map(|a| a < n).collect())
            .collect();
        let mut pair_forbidden = vec![vec![false; max_labels]; max_labels];
        let mut required = BTreeSet::new();
        for rule in self.active_rules(x)? {
            if let Some(effect) = &rule.effect {
                for (k, row) in allowed.iter_mut().enumerate() {
                    if rule.positions.contains(k + 1) {
                        for (a, slot) in row.iter_mut().enumerate() {
                            *slot &= effect.admits(Label::from_index(a));
                        }
                    }
                }
            }
            for &(a, b) in &rule.forbid_pairs {
                pair_forbidden[a.index()][b.index()] = true;
            }
            required.extend(rule.must_include.iter().copied());
        }
        if required.len() > MAX_REQUIRED_LABELS {
            return Err(Error::TooManyRequiredLabels(required.len()));
        }
        Ok(ActiveConstraints {
            alphabet,
            allowed,
            pair_forbidden,
            required: required.into_iter().collect(),
        })
    }

    /// `c(x, y)` for a label sequence.
    pub fn evaluate_structured(&self, x: &[f64], y: &[Label]) -> Result<bool> {
        let alphabet = self.labels.alphabet(y.len())?;
        for (label, &size) in y.iter().zip(&alphabet) {
            label.check(size)?;
        }
        let active = self.active_rules(x)?;
        for rule in &active {
            if let Some(effect) = &rule.effect {
                for (k, &label) in y.iter().enumerate() {
                    if rule.positions.contains(k + 1) && !effect.admits(label) {
                        return Ok(false);
                    }
                }
            }
            for w in y.windows(2) {
                if rule.forbid_pairs.contains(&(w[0], w[1])) {
                    return Ok(false);
                }
            }
            if !rule.must_include.iter().all(|r| y.contains(r)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Flags every input with no admissible output. Structured requirements
    /// need a fixed length here; see [`Requirement::check_feasibility_structured`].
    pub fn check_feasibility(&self, inputs: &[Vec<f64>]) -> Result<FeasibilityReport> {
        match self.kind {
            RequirementKind::Flat => {
                let mut report = FeasibilityReport {
                    checked: inputs.len(),
                    infeasible: Vec::new(),
                };
                for (i, x) in inputs.iter().enumerate() {
                    if self.feasible_labels(x)?.is_empty() {
                        report.infeasible.push(i);
                    }
                }
                Ok(report)
            }
            RequirementKind::Structured => {
                let length = self.labels.fixed_length().ok_or_else(|| {
                    Error::InvalidArgument(
                        "structured requirement with a uniform alphabet needs explicit lengths"
                            .into(),
                    )
                })?;
                let with_len: Vec<(Vec<f64>, usize)> =
                    inputs.iter().map(|x| (x.clone(), length)).collect();
                self.check_feasibility_structured(&with_len)
            }
        }
    }

    pub fn check_feasibility_structured(
        &self,
        inputs: &[(Vec<f64>, usize)],
    ) -> Result<FeasibilityReport> {
        let mut report = FeasibilityReport {
            checked: inputs.len(),
            infeasible: Vec::new(),
        };
        for (i, (x, length)) in inputs.iter().enumerate() {
            let constraints = self.active_constraints(x, *length)?;
            if crate::structured::find_feasible_sequence(&constraints).is_none() {
                report.infeasible.push(i);
            }
        }
        Ok(report)
    }

    /// Fails with [`Error::InfeasibleInput`] unless every input has an admissible label.
    pub fn require_feasible(&self, inputs: &[Vec<f64>]) -> Result<()> {
        let report = self.check_feasibility(inputs)?;
        if report.is_feasible() {
            Ok(())
        } else {
            Err(Error::InfeasibleInput(report))
        }
    }

    pub fn to_json(&self) -> String {
        parse::to_json(self)
    }
}
