use std::collections::BTreeSet;

use super::{is_valid_scenario_id, Cardinality, CodedEntry, ParameterId, ScenarioSheet, Schema, Selection};
use crate::ontology::Ontology;
use crate::report::{Finding, ValidationReport};

/// Checks a sheet against the schema and the ontology vocabulary.
///
/// Vocabulary and structure problems are errors; a blank narrative and a
/// starred row without any key-concept flag are warnings. Never fails:
/// malformed input only produces findings. Findings come out in parameter
/// order, so permuting selection lists does not change the report.
pub fn validate_sheet(sheet: &ScenarioSheet, schema: &Schema, o: &Ontology) -> ValidationReport {
    let mut report = ValidationReport::new();

    if !is_valid_scenario_id(&sheet.scenario_id) {
        report.error(
            None,
            "invalid-scenario-id",
            format!(
                "scenario id `{}` must match [A-Za-z0-9][A-Za-z0-9_-]*",
                sheet.scenario_id
            ),
        );
    }
    if sheet.narrative.trim().is_empty() {
        report.warning(None, "empty-narrative", "narrative is empty");
    }

    for parameter in ParameterId::ALL {
        let name = parameter.as_str();
        let list = sheet.selections(parameter);
        let Some(attr) = schema.get(parameter) else {
            report.error(Some(name), "no-schema", "schema has no entry for this parameter");
            continue;
        };
        if list.is_empty() {
            report.error(Some(name), "missing-parameter", "no value selected");
            continue;
        }
        if attr.cardinality == Cardinality::Single && list.len() > 1 {
            report.error(
                Some(name),
                "cardinality",
                format!("single-valued parameter has {} selections", list.len()),
            );
        }

        let mut seen = BTreeSet::new();
        for selection in list {
            if !seen.insert(selection.value_key()) {
                report.error(
                    Some(name),
                    "duplicate-selection",
                    format!("`{}` is selected more than once", selection.value_key()),
                );
            }
            match selection {
                Selection::Value(v) => {
                    match o.instance(&v.instance) {
                        None => report.error(
                            Some(name),
                            "unknown-value",
                            format!("`{}` is not an ontology instance", v.instance),
                        ),
                        Some(inst) => {
                            let inside = o
                                .is_subconcept(inst.concept.as_str(), attr.concept.as_str())
                                .unwrap_or(false);
                            if !inside {
                                report.error(
                                    Some(name),
                                    "out-of-vocabulary",
                                    format!(
                                        "`{}` is not an instance of `{}`",
                                        v.instance, attr.concept
                                    ),
                                );
                            }
                        }
                    }
                    if v.numeric_qualifier.is_some() && !attr.allows_numeric {
                        report.error(
                            Some(name),
                            "numeric-not-allowed",
                            format!("`{}` carries a count but this parameter takes none", v.instance),
                        );
                    }
                }
                Selection::Coded(c) => {
                    if !attr.allows_coded_entry {
                        report.error(
                            Some(name),
                            "coded-not-allowed",
                            format!("coded entry `{}` is not allowed here", c.code),
                        );
                    } else if !CodedEntry::is_valid_code(&c.code) {
                        report.error(
                            Some(name),
                            "invalid-code",
                            format!("`{}` is not a code of the form [A-Z]{{2}}[0-9]+", c.code),
                        );
                    }
                    if c.description.trim().is_empty() {
                        report.error(
                            Some(name),
                            "empty-description",
                            format!("coded entry `{}` has no description", c.code),
                        );
                    }
                }
            }
        }

        if attr.starred && !list.iter().any(Selection::is_key_concept) {
            report.warning(Some(name), "no-key-concept", "no selection is flagged as a key concept");
        }
    }

    report.findings.sort_by(|a, b| finding_order(a).cmp(&finding_order(b)));
    report
}

fn finding_order(f: &Finding) -> (usize, &Finding) {
    let rank = match f.subject.as_deref().and_then(|s| s.parse::<ParameterId>().ok()) {
        Some(p) => p.index() + 1,
        None => 0,
    };
    (rank, f)
}
