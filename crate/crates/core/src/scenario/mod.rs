//! Static description of an accident scenario: the eight-parameter
//! attribute/value sheet and its schema over the ontology vocabulary.

mod diff;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{ConceptId, Instance, Ontology};

pub use diff::{diff_sheets, ParameterDiff, SheetDiff};
pub use validate::validate_sheet;

/// The eight sheet parameters, in fact-sheet row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterId {
    GeographicalPrinciple,
    Risks,
    RiskLinkedFunctions,
    GeographicalAreas,
    Actors,
    IncidentalFunctions,
    SummarizedFailures,
    InterimSolutions,
}

impl ParameterId {
    pub const ALL: [ParameterId; 8] = [
        ParameterId::GeographicalPrinciple,
        ParameterId::Risks,
        ParameterId::RiskLinkedFunctions,
        ParameterId::GeographicalAreas,
        ParameterId::Actors,
        ParameterId::IncidentalFunctions,
        ParameterId::SummarizedFailures,
        ParameterId::InterimSolutions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParameterId::GeographicalPrinciple => "geographical-principle",
            ParameterId::Risks => "risks",
            ParameterId::RiskLinkedFunctions => "risk-linked-functions",
            ParameterId::GeographicalAreas => "geographical-areas",
            ParameterId::Actors => "actors",
            ParameterId::IncidentalFunctions => "incidental-functions",
            ParameterId::SummarizedFailures => "summarized-failures",
            ParameterId::InterimSolutions => "interim-solutions",
        }
    }

    /// Position in the fact-sheet (0-based).
    pub fn index(self) -> usize {
        self as usize
    }

    /// Ontology concept whose instances are the legal values.
    pub fn anchor(self) -> &'static str {
        match self {
            ParameterId::GeographicalPrinciple => "geographical-principle",
            ParameterId::Risks => "risk",
            ParameterId::RiskLinkedFunctions => "risk-linked-function",
            ParameterId::GeographicalAreas => "geographical-area",
            ParameterId::Actors => "actor",
            ParameterId::IncidentalFunctions => "incidental-function",
            ParameterId::SummarizedFailures => "summarized-failure",
            ParameterId::InterimSolutions => "interim-solution",
        }
    }
}

impl fmt::Display for ParameterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown parameter `{0}`")]
pub struct UnknownParameter(pub String);

impl FromStr for ParameterId {
    type Err = UnknownParameter;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParameterId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownParameter(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cardinality {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub parameter: ParameterId,
    pub concept: ConceptId,
    pub cardinality: Cardinality,
    pub allows_numeric: bool,
    pub allows_coded_entry: bool,
    /// The fact sheet marks key concepts on this row; a sheet that flags none
    /// of its selections here gets a warning.
    pub starred: bool,
}

/// The eight attribute schemas bound to one ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeSchema>,
}

impl Schema {
    pub fn get(&self, parameter: ParameterId) -> Option<&AttributeSchema> {
        self.attributes.iter().find(|a| a.parameter == parameter)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSelection {
    pub instance: String,
    #[serde(default)]
    pub key_concept: bool,
    #[serde(default)]
    pub numeric_qualifier: Option<u32>,
}

/// Open-ended failure or solution code such as `OO26`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedEntry {
    pub code: String,
    pub description: String,
    #[serde(default)]
    pub key_concept: bool,
}

impl CodedEntry {
    /// `[A-Z]{2}[0-9]+`
    pub fn is_valid_code(code: &str) -> bool {
        let b = code.as_bytes();
        b.len() >= 3
            && b[..2].iter().all(u8::is_ascii_uppercase)
            && b[2..].iter().all(u8::is_ascii_digit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Selection {
    Value(ValueSelection),
    Coded(CodedEntry),
}

impl Selection {
    pub fn value(instance: impl Into<String>) -> Self {
        Selection::Value(ValueSelection {
            instance: instance.into(),
            key_concept: false,
            numeric_qualifier: None,
        })
    }

    pub fn coded(code: impl Into<String>, description: impl Into<String>) -> Self {
        Selection::Coded(CodedEntry {
            code: code.into(),
            description: description.into(),
            key_concept: false,
        })
    }

    pub fn key(mut self) -> Self {
        match &mut self {
            Selection::Value(v) => v.key_concept = true,
            Selection::Coded(c) => c.key_concept = true,
        }
        self
    }

    pub fn with_count(mut self, n: u32) -> Self {
        if let Selection::Value(v) = &mut self {
            v.numeric_qualifier = Some(n);
        }
        self
    }

    /// Instance id or code; unique within one parameter of a valid sheet.
    pub fn value_key(&self) -> &str {
        match self {
            Selection::Value(v) => &v.instance,
            Selection::Coded(c) => &c.code,
        }
    }

    pub fn is_key_concept(&self) -> bool {
        match self {
            Selection::Value(v) => v.key_concept,
            Selection::Coded(c) => c.key_concept,
        }
    }

    pub fn numeric_qualifier(&self) -> Option<u32> {
        match self {
            Selection::Value(v) => v.numeric_qualifier,
            Selection::Coded(_) => None,
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Value(v) => {
                f.write_str(&v.instance)?;
                if let Some(n) = v.numeric_qualifier {
                    write!(f, "={n}")?;
                }
            }
            Selection::Coded(c) => write!(f, "{} ({})", c.code, c.description)?,
        }
        if self.is_key_concept() {
            f.write_str(" *")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSheet {
    pub scenario_id: String,
    pub title: String,
    #[serde(default)]
    pub narrative: String,
    #[serde(default)]
    pub transport_system: String,
    #[serde(default)]
    pub selections: BTreeMap<ParameterId, Vec<Selection>>,
}

impl ScenarioSheet {
    pub fn new(scenario_id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn select(&mut self, parameter: ParameterId, selection: Selection) -> &mut Self {
        self.selections.entry(parameter).or_default().push(selection);
        self
    }

    pub fn selections(&self, parameter: ParameterId) -> &[Selection] {
        self.selections.get(&parameter).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn selection_count(&self) -> usize {
        self.selections.values().map(Vec::len).sum()
    }

    /// Copy with every selection list sorted by value key and empty lists
    /// dropped; two sheets are selection-equal iff their normal forms agree.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.selections.retain(|_, v| !v.is_empty());
        for list in out.selections.values_mut() {
            list.sort_by(|a, b| a.value_key().cmp(b.value_key()));
        }
        out
    }

    /// Number of trains from the `number-of-trains` actor selection.
    pub fn train_count(&self) -> Option<u32> {
        self.selections(ParameterId::Actors)
            .iter()
            .find(|s| s.value_key() == NUMBER_OF_TRAINS)
            .and_then(Selection::numeric_qualifier)
    }
}

/// Actor instance whose numeric qualifier is the train count.
pub const NUMBER_OF_TRAINS: &str = "number-of-trains";

pub fn is_valid_scenario_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("ontology lacks anchor concepts: {}", .0.join(", "))]
    MissingAnchors(Vec<String>),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// Binds each parameter to its anchor concept. Only the geographical
/// principle is single-valued.
pub fn default_schema(o: &Ontology) -> Result<Schema, ScenarioError> {
    let missing: Vec<String> = ParameterId::ALL
        .iter()
        .map(|p| p.anchor())
        .filter(|a| !o.contains_concept(a))
        .map(str::to_owned)
        .collect();
    if !missing.is_empty() {
        return Err(ScenarioError::MissingAnchors(missing));
    }
    let attributes = ParameterId::ALL
        .into_iter()
        .map(|p| AttributeSchema {
            parameter: p,
            concept: ConceptId::new(p.anchor()).expect("anchor ids are valid"),
            cardinality: if p == ParameterId::GeographicalPrinciple {
                Cardinality::Single
            } else {
                Cardinality::Multiple
            },
            allows_numeric: p == ParameterId::Actors,
            allows_coded_entry: matches!(
                p,
                ParameterId::SummarizedFailures | ParameterId::InterimSolutions
            ),
            starred: p.index() < 6,
        })
        .collect();
    Ok(Schema { attributes })
}

/// Selections flagged as key concepts, in parameter order.
pub fn key_concepts(sheet: &ScenarioSheet) -> Vec<(ParameterId, &Selection)> {
    sheet
        .selections
        .iter()
        .flat_map(|(p, list)| list.iter().filter(|s| s.is_key_concept()).map(move |s| (*p, s)))
        .collect()
}

/// Ontology instances for coded entries the ontology does not know yet,
/// attached to their parameter's anchor concept.
pub fn unregistered_codes(sheet: &ScenarioSheet, schema: &Schema, o: &Ontology) -> Vec<Instance> {
    let mut out: Vec<Instance> = Vec::new();
    for (p, list) in &sheet.selections {
        let Some(attr) = schema.get(*p) else { continue };
        for s in list {
            let Selection::Coded(c) = s else { continue };
            if !CodedEntry::is_valid_code(&c.code)
                || o.instance(&c.code).is_some()
                || out.iter().any(|i| i.id == c.code)
            {
                continue;
            }
            let mut inst = Instance::new(c.code.clone(), c.description.clone(), attr.concept.clone());
            inst.note = Some(format!("registered from scenario {}", sheet.scenario_id));
            out.push(inst);
        }
    }
    out
}
