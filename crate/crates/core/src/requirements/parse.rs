//! JSON rule files.
//!
//! ```json
//! { "kind": "flat", "label_count": 3,
//!   "rules": [ { "if": [ {"feature": 0, "op": ">", "value": 0.0} ], "forbid": [1] } ] }
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    AtomicPredicate, Comparator, LabelEffect, LabelSpace, PositionScope, Requirement,
    RequirementKind, Rule,
};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    kind: RequirementKind,
    label_count: LabelSpace,
    #[serde(default)]
    rules: Vec<RawRule>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    #[serde(rename = "if", default, skip_serializing_if = "Vec::is_empty")]
    condition: Vec<RawPredicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forbid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allow_only: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forbid_pairs: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    must_include: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredicate {
    feature: i64,
    op: String,
    value: f64,
}

fn label_set(values: &[usize]) -> BTreeSet<Label> {
    values.iter().copied().map(Label).collect()
}

fn convert_rule(index: usize, raw: RawRule) -> Result<Rule> {
    let mut condition = Vec::with_capacity(raw.condition.len());
    for (j, p) in raw.condition.into_iter().enumerate() {
        if p.feature < 0 {
            return Err(Error::Schema(format!(
                "rules[{index}].if[{j}]: negative feature index {}",
                p.feature
            )));
        }
        let op = Comparator::from_symbol(&p.op).ok_or_else(|| {
            Error::Schema(format!(
                "rules[{index}].if[{j}]: unknown comparator {:?}",
                p.op
            ))
        })?;
        condition.push(AtomicPredicate::new(p.feature as usize, op, p.value));
    }
    let effect = match (raw.forbid, raw.allow_only) {
        (Some(_), Some(_)) => {
            return Err(Error::Schema(format!(
                "rules[{index}]: \"forbid\" and \"allow_only\" are mutually exclusive"
            )))
        }
        (Some(f), None) => Some(LabelEffect::Forbid(label_set(&f))),
        (None, Some(a)) => Some(LabelEffect::AllowOnly(label_set(&a))),
        (None, None) => None,
    };
    let positions = match raw.positions {
        Some(p) => PositionScope::Only(p.into_iter().collect()),
        None => PositionScope::All,
    };
    Ok(Rule {
        condition,
        effect,
        positions,
        forbid_pairs: raw
            .forbid_pairs
            .into_iter()
            .map(|[a, b]| (Label(a), Label(b)))
            .collect(),
        must_include: label_set(&raw.must_include),
    })
}

/// Parses a JSON rule file into a validated [`Requirement`].
pub fn parse_rules(text: &str) -> Result<Requirement> {
    let file: RuleFile = serde_json::from_str(text).map_err(Error::from_json)?;
    let rules = file
        .rules
        .into_iter()
        .enumerate()
        .map(|(i, r)| convert_rule(i, r))
        .collect::<Result<Vec<_>>>()?;
    Requirement::new(file.kind, file.label_count, rules)
}

fn raw_labels(set: &BTreeSet<Label>) -> Vec<usize> {
    set.iter().map(|l| l.0).collect()
}

pub(super) fn to_json(req: &Requirement) -> String {
    let rules = req
        .rules
        .iter()
        .map(|r| {
            let mut raw = RawRule {
                condition: r
                    .condition
                    .iter()
                    .map(|p| RawPredicate {
                        feature: p.feature as i64,
                        op: p.op.symbol().to_string(),
                        value: p.threshold,
                    })
                    .collect(),
                forbid_pairs: r.forbid_pairs.iter().map(|(a, b)| [a.0, b.0]).collect(),
                must_include: raw_labels(&r.must_include),
                ..Default::default()
            };
            match &r.effect {
                Some(LabelEffect::Forbid(s)) => raw.forbid = Some(raw_labels(s)),
                Some(LabelEffect::AllowOnly(s)) => raw.allow_only = Some(raw_labels(s)),
                None => {}
            }
            if let PositionScope::Only(p) = &r.positions {
                raw.positions = Some(p.iter().copied().collect());
            }
            raw
        })
        .collect();
    let file = RuleFile {
        kind: req.kind,
        label_count: req.labels.clone(),
        rules,
    };
    serde_json::to_string_pretty(&file).expect("rule files always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let req = parse_rules(r#"{"kind": "flat", "label_count": 3, "rules": []}"#).unwrap();
        assert!(req.is_trivial());
        assert_eq!(req.label_count(), 3);
    }

    #[test]
    fn forbid_rule_matches_hand_semantics_on_grid() {
        let req = parse_rules(
            r#"{"kind":"flat","label_count":3,
                "rules":[{"if":[{"feature":0,"op":">","value":0.0},
                                {"feature":1,"op":"<=","value":1.5}],
                          "forbid":[1,3]}]}"#,
        )
        .unwrap();
        for i in -4..=4 {
            for j in -4..=4 {
                let x = [i as f64 * 0.5, j as f64 * 0.5];
                let matched = x[0] > 0.0 && x[1] <= 1.5;
                for y in 1..=3 {
                    let expected = !(matched && (y == 1 || y == 3));
                    assert_eq!(
                        req.evaluate(&x, Label(y)).unwrap(),
                        expected,
                        "x={x:?} y={y}"
                    );
                }
            }
        }
    }

    #[test]
    fn unknown_comparator_is_schema_error() {
        let err = parse_rules(
            r#"{"kind":"flat","label_count":2,
                "rules":[{"if":[{"feature":0,"op":"!=","value":0}],"forbid":[1]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn negative_feature_is_schema_error() {
        let err = parse_rules(
            r#"{"kind":"flat","label_count":2,
                "rules":[{"if":[{"feature":-1,"op":"<","value":0}],"forbid":[1]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_rules("{\"kind\": \"flat\",\n \"label_count\": }").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn both_effects_rejected() {
        let err = parse_rules(
            r#"{"kind":"flat","label_count":2,"rules":[{"forbid":[1],"allow_only":[2]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn oversized_must_include_rejected() {
        let labels: Vec<String> = (1..=17).map(|i| i.to_string()).collect();
        let text = format!(
            r#"{{"kind":"structured","label_count":20,"rules":[{{"must_include":[{}]}}]}}"#,
            labels.join(",")
        );
        assert!(matches!(
            parse_rules(&text),
            Err(Error::TooManyRequiredLabels(17))
        ));
    }

    #[test]
    fn structured_document_with_per_position_alphabet() {
        let req = parse_rules(
            r#"{"kind":"structured","label_count":[2,3,2],
                "rules":[{"positions":[1],"allow_only":[1]},
                         {"forbid_pairs":[[1,3]]},
                         {"if":[{"feature":0,"op":"==","value":1}],"must_include":[2]}]}"#,
        )
        .unwrap();
        assert_eq!(req.labels(), &LabelSpace::PerPosition(vec![2, 3, 2]));
        let again = parse_rules(&req.to_json()).unwrap();
        assert_eq!(again, req);
    }
}
