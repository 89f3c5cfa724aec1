//! One archived accident scenario: sheet, optional net, sequencing tables
//! and bookkeeping metadata, with its XML codec.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use roxmltree::Node;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::Ontology;
use crate::petri::{
    validate_net, Aspect, CriticalPredicate, Marking, PetriNet, SequenceRow, SequencingTable,
};
use crate::report::ValidationReport;
use crate::scenario::{
    default_schema, validate_sheet, CodedEntry, ParameterId, ScenarioSheet, Selection, ValueSelection,
};
use crate::xml::{self, bool_attr, check_attrs, child_elements, error_at, required_attr, text_of, FormatError, XmlWriter};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    #[default]
    Draft,
    Validated,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Draft => "draft",
            Status::Validated => "validated",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "draft" => Ok(Status::Draft),
            "validated" => Ok(Status::Validated),
            other => Err(format!("unknown status `{other}` (expected draft or validated)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default)]
    pub author: String,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
    #[serde(default)]
    pub status: Status,
    #[serde(default)]
    pub ontology_version: String,
}

impl Meta {
    pub fn now() -> Self {
        let t = now();
        Self {
            author: String::new(),
            created: t,
            modified: t,
            status: Status::Draft,
            ontology_version: String::new(),
        }
    }
}

/// Current time at whole-second precision, as stored.
pub fn now() -> DateTime<Utc> {
    Utc::now().with_nanosecond(0).expect("zero nanoseconds is valid")
}

/// The dynamic part of a document: a net, where it starts, and optionally
/// what counts as critical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetModel {
    pub net: PetriNet,
    pub initial: Marking,
    #[serde(default)]
    pub predicate: Option<CriticalPredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub sheet: ScenarioSheet,
    #[serde(default)]
    pub net: Option<NetModel>,
    #[serde(default)]
    pub tables: Vec<SequencingTable>,
    pub meta: Meta,
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed scenario document: {0}")]
    Format(#[from] FormatError),
    #[error("scenario document violates invariants: {}", .0.join("; "))]
    Invariant(Vec<String>),
}

impl ScenarioDocument {
    pub fn new(sheet: ScenarioSheet) -> Self {
        Self {
            sheet,
            net: None,
            tables: Vec::new(),
            meta: Meta::now(),
        }
    }

    pub fn id(&self) -> &str {
        &self.sheet.scenario_id
    }

    pub fn has_critical_table(&self) -> bool {
        self.tables.iter().any(|t| t.critical)
    }

    /// Sheet findings plus net findings (subjects prefixed `net:`).
    pub fn validate(&self, o: &Ontology) -> ValidationReport {
        let mut report = match default_schema(o) {
            Ok(schema) => validate_sheet(&self.sheet, &schema, o),
            Err(e) => {
                let mut r = ValidationReport::new();
                r.error(None, "no-schema", e.to_string());
                r
            }
        };
        if let Some(model) = &self.net {
            let mut net_report = validate_net(&model.net);
            if let Err(e) = model.initial.check(&model.net) {
                net_report.error(None, "initial-marking", e.to_string());
            }
            if let Some(p) = &model.predicate {
                if let Err(e) = p.check(&model.net) {
                    net_report.error(None, "predicate", e.to_string());
                }
            }
            for f in &mut net_report.findings {
                f.subject = Some(match f.subject.take() {
                    Some(s) => format!("net:{s}"),
                    None => "net".into(),
                });
            }
            report.extend(net_report);
        }
        report
    }

    /// Type invariants: every table replays against the stored net, and a
    /// validated document has an error-free sheet and net.
    pub fn invariant_violations(&self, o: &Ontology) -> Vec<String> {
        let mut out = Vec::new();
        for (i, t) in self.tables.iter().enumerate() {
            match &self.net {
                None => out.push(format!("table {} exists but the document has no net", i + 1)),
                Some(m) => {
                    if let Err(e) = t.replay(&m.net) {
                        out.push(format!("table {} does not replay: {e}", i + 1));
                    }
                }
            }
        }
        if self.meta.status == Status::Validated {
            let report = self.validate(o);
            for f in report.errors() {
                out.push(format!("validated document has error: {f}"));
            }
        }
        out
    }

    pub fn to_xml(&self) -> String {
        write_document(self)
    }

    /// Parses a document. Only syntax and per-value checks happen here;
    /// ontology-dependent invariants are checked by the archive.
    pub fn from_xml(text: &str) -> Result<Self, DocumentError> {
        read_document(text)
    }
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn write_tokens(w: &mut XmlWriter, m: &Marking) {
    for (p, n) in m.iter() {
        w.empty("tokens", &[("place", p), ("count", &n.to_string())]);
    }
}

fn write_document(doc: &ScenarioDocument) -> String {
    let mut w = XmlWriter::new();
    w.open("scenario", &[("id", doc.id())]);

    w.open("sheet", &[]);
    w.text("title", &[], &doc.sheet.title);
    w.text("transport-system", &[], &doc.sheet.transport_system);
    w.text("narrative", &[], &doc.sheet.narrative);
    for (p, list) in &doc.sheet.selections {
        if list.is_empty() {
            w.empty("parameter", &[("id", p.as_str())]);
            continue;
        }
        w.open("parameter", &[("id", p.as_str())]);
        for s in list {
            match s {
                Selection::Value(v) => {
                    let count = v.numeric_qualifier.map(|n| n.to_string());
                    let mut attrs = vec![("instance", v.instance.as_str())];
                    if v.key_concept {
                        attrs.push(("key", "true"));
                    }
                    if let Some(c) = &count {
                        attrs.push(("count", c));
                    }
                    w.empty("value", &attrs);
                }
                Selection::Coded(c) => {
                    let mut attrs = vec![("code", c.code.as_str())];
                    if c.key_concept {
                        attrs.push(("key", "true"));
                    }
                    w.text("coded", &attrs, &c.description);
                }
            }
        }
        w.close("parameter");
    }
    w.close("sheet");

    if let Some(model) = &doc.net {
        w.open("net", &[]);
        for p in &model.net.places {
            w.empty("place", &[("id", &p.id), ("label", &p.label), ("aspect", p.aspect.as_str())]);
        }
        for t in &model.net.transitions {
            let attrs = [("id", t.id.as_str()), ("label", &t.label), ("aspect", t.aspect.as_str())];
            if t.guard_note.is_empty() {
                w.empty("transition", &attrs);
            } else {
                w.open("transition", &attrs);
                w.text("guard", &[], &t.guard_note);
                w.close("transition");
            }
        }
        for a in &model.net.arcs {
            w.empty(
                "arc",
                &[("source", &a.source), ("target", &a.target), ("weight", &a.weight.to_string())],
            );
        }
        if model.initial.is_empty() {
            w.empty("initial-marking", &[]);
        } else {
            w.open("initial-marking", &[]);
            write_tokens(&mut w, &model.initial);
            w.close("initial-marking");
        }
        if let Some(p) = &model.predicate {
            w.text("critical-predicate", &[], &p.to_string());
        }
        w.close("net");
    }

    if !doc.tables.is_empty() {
        w.open("tables", &[]);
        for t in &doc.tables {
            let pred = t.predicate.to_string();
            w.open("table", &[("critical", if t.critical { "true" } else { "false" }), ("predicate", &pred)]);
            if t.initial.is_empty() {
                w.empty("initial", &[]);
            } else {
                w.open("initial", &[]);
                write_tokens(&mut w, &t.initial);
                w.close("initial");
            }
            for r in &t.rows {
                let attrs = [("transition", r.transition.as_str()), ("label", &r.situation_label)];
                if r.marking.is_empty() {
                    w.empty("row", &attrs);
                } else {
                    w.open("row", &attrs);
                    write_tokens(&mut w, &r.marking);
                    w.close("row");
                }
            }
            w.close("table");
        }
        w.close("tables");
    }

    w.open("meta", &[]);
    w.text("author", &[], &doc.meta.author);
    w.text("created", &[], &ts(&doc.meta.created));
    w.text("modified", &[], &ts(&doc.meta.modified));
    w.text("status", &[], doc.meta.status.as_str());
    w.text("ontology-version", &[], &doc.meta.ontology_version);
    w.close("meta");

    w.close("scenario");
    w.finish()
}

/// Problems found while reading that are about values, not syntax.
struct Reader {
    violations: Vec<String>,
}

fn expect_name(node: Node<'_, '_>, name: &str) -> Result<(), FormatError> {
    if node.tag_name().name() == name {
        Ok(())
    } else {
        Err(error_at(
            node,
            format!("expected <{name}>, found <{}>", node.tag_name().name()),
        ))
    }
}

fn parse_attr<T: FromStr>(node: Node<'_, '_>, name: &str) -> Result<T, FormatError>
where
    T::Err: fmt::Display,
{
    let raw = required_attr(node, name)?;
    raw.parse()
        .map_err(|e| error_at(node, format!("bad `{name}` value `{raw}`: {e}")))
}

impl Reader {
    fn tokens(&mut self, parent: Node<'_, '_>) -> Result<Marking, FormatError> {
        let mut m = Marking::new();
        for t in child_elements(parent)? {
            expect_name(t, "tokens")?;
            check_attrs(t, &["place", "count"])?;
            let place = required_attr(t, "place")?;
            let count: i64 = parse_attr(t, "count")?;
            if m.get(place) != 0 {
                return Err(error_at(t, format!("place `{place}` listed twice")));
            }
            match u32::try_from(count) {
                Ok(n) => m.set(place, n),
                Err(_) => self
                    .violations
                    .push(format!("place `{place}` has invalid token count {count}")),
            }
        }
        Ok(m)
    }

    fn sheet(&mut self, node: Node<'_, '_>, id: &str) -> Result<ScenarioSheet, FormatError> {
        check_attrs(node, &[])?;
        let mut sheet = ScenarioSheet::new(id, "");
        let children = child_elements(node)?;
        let mut it = children.into_iter().peekable();
        for (name, slot) in [
            ("title", &mut sheet.title),
            ("transport-system", &mut sheet.transport_system),
            ("narrative", &mut sheet.narrative),
        ] {
            let n = it
                .next()
                .ok_or_else(|| error_at(node, format!("<sheet> is missing <{name}>")))?;
            expect_name(n, name)?;
            check_attrs(n, &[])?;
            *slot = text_of(n)?;
        }
        let mut selections: BTreeMap<ParameterId, Vec<Selection>> = BTreeMap::new();
        for p in it {
            expect_name(p, "parameter")?;
            check_attrs(p, &["id"])?;
            let pid: ParameterId = parse_attr(p, "id")?;
            if selections.contains_key(&pid) {
                return Err(error_at(p, format!("parameter `{pid}` listed twice")));
            }
            let mut list = Vec::new();
            for s in child_elements(p)? {
                match s.tag_name().name() {
                    "value" => {
                        check_attrs(s, &["instance", "key", "count"])?;
                        let numeric_qualifier = match s.attribute("count") {
                            None => None,
                            Some(_) => {
                                let n: i64 = parse_attr(s, "count")?;
                                match u32::try_from(n) {
                                    Ok(n) => Some(n),
                                    Err(_) => {
                                        self.violations.push(format!("negative count {n} under {pid}"));
                                        None
                                    }
                                }
                            }
                        };
                        list.push(Selection::Value(ValueSelection {
                            instance: required_attr(s, "instance")?.to_owned(),
                            key_concept: bool_attr(s, "key")?,
                            numeric_qualifier,
                        }));
                    }
                    "coded" => {
                        check_attrs(s, &["code", "key"])?;
                        list.push(Selection::Coded(CodedEntry {
                            code: required_attr(s, "code")?.to_owned(),
                            description: text_of(s)?,
                            key_concept: bool_attr(s, "key")?,
                        }));
                    }
                    other => return Err(error_at(s, format!("unexpected <{other}> in <parameter>"))),
                }
            }
            selections.insert(pid, list);
        }
        sheet.selections = selections;
        Ok(sheet)
    }

    fn net(&mut self, node: Node<'_, '_>) -> Result<NetModel, FormatError> {
        check_attrs(node, &[])?;
        let mut net = PetriNet::new();
        let mut initial = None;
        let mut predicate = None;
        for n in child_elements(node)? {
            match n.tag_name().name() {
                "place" => {
                    check_attrs(n, &["id", "label", "aspect"])?;
                    let aspect: Aspect = parse_attr(n, "aspect")?;
                    net.place(required_attr(n, "id")?, n.attribute("label").unwrap_or(""), aspect);
                }
                "transition" => {
                    check_attrs(n, &["id", "label", "aspect"])?;
                    let aspect: Aspect = parse_attr(n, "aspect")?;
                    net.transition(required_attr(n, "id")?, n.attribute("label").unwrap_or(""), aspect);
                    for g in child_elements(n)? {
                        expect_name(g, "guard")?;
                        check_attrs(g, &[])?;
                        net.transitions.last_mut().unwrap().guard_note = text_of(g)?;
                    }
                }
                "arc" => {
                    check_attrs(n, &["source", "target", "weight"])?;
                    let weight: i64 = parse_attr(n, "weight")?;
                    let weight = u32::try_from(weight).unwrap_or_else(|_| {
                        self.violations.push(format!("arc weight {weight} is negative"));
                        0
                    });
                    net.arc(required_attr(n, "source")?, required_attr(n, "target")?, weight);
                }
                "initial-marking" => {
                    check_attrs(n, &[])?;
                    if initial.is_some() {
                        return Err(error_at(n, "second <initial-marking>"));
                    }
                    initial = Some(self.tokens(n)?);
                }
                "critical-predicate" => {
                    check_attrs(n, &[])?;
                    let text = text_of(n)?;
                    let p = text
                        .parse::<CriticalPredicate>()
                        .map_err(|e| error_at(n, format!("bad critical predicate: {e}")))?;
                    predicate = Some(p);
                }
                other => return Err(error_at(n, format!("unexpected <{other}> in <net>"))),
            }
        }
        Ok(NetModel {
            net,
            initial: initial.unwrap_or_default(),
            predicate,
        })
    }

    fn tables(&mut self, node: Node<'_, '_>) -> Result<Vec<SequencingTable>, FormatError> {
        check_attrs(node, &[])?;
        let mut out = Vec::new();
        for t in child_elements(node)? {
            expect_name(t, "table")?;
            check_attrs(t, &["critical", "predicate"])?;
            let predicate: CriticalPredicate = parse_attr(t, "predicate")?;
            let critical = bool_attr(t, "critical")?;
            let mut children = child_elements(t)?.into_iter();
            let init = children
                .next()
                .ok_or_else(|| error_at(t, "<table> is missing <initial>"))?;
            expect_name(init, "initial")?;
            check_attrs(init, &[])?;
            let initial = self.tokens(init)?;
            let mut rows = Vec::new();
            for r in children {
                expect_name(r, "row")?;
                check_attrs(r, &["transition", "label"])?;
                rows.push(SequenceRow {
                    transition: required_attr(r, "transition")?.to_owned(),
                    situation_label: r.attribute("label").unwrap_or("").to_owned(),
                    marking: self.tokens(r)?,
                });
            }
            out.push(SequencingTable {
                initial,
                rows,
                critical,
                predicate,
            });
        }
        Ok(out)
    }

    fn meta(&mut self, node: Node<'_, '_>) -> Result<Meta, FormatError> {
        check_attrs(node, &[])?;
        let mut fields: BTreeMap<&str, (Node<'_, '_>, String)> = BTreeMap::new();
        for n in child_elements(node)? {
            let name = n.tag_name().name();
            if !["author", "created", "modified", "status", "ontology-version"].contains(&name) {
                return Err(error_at(n, format!("unexpected <{name}> in <meta>")));
            }
            check_attrs(n, &[])?;
            if fields.insert(name, (n, text_of(n)?)).is_some() {
                return Err(error_at(n, format!("<{name}> given twice")));
            }
        }
        let time = |name: &str| -> Result<DateTime<Utc>, FormatError> {
            let (n, text) = fields
                .get(name)
                .ok_or_else(|| error_at(node, format!("<meta> is missing <{name}>")))?;
            DateTime::parse_from_rfc3339(text.trim())
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| error_at(*n, format!("bad timestamp `{text}`: {e}")))
        };
        let status = match fields.get("status") {
            None => Status::Draft,
            Some((n, text)) => text.trim().parse().map_err(|e: String| error_at(*n, e))?,
        };
        Ok(Meta {
            author: fields.get("author").map(|f| f.1.clone()).unwrap_or_default(),
            created: time("created")?,
            modified: time("modified")?,
            status,
            ontology_version: fields
                .get("ontology-version")
                .map(|f| f.1.clone())
                .unwrap_or_default(),
        })
    }
}

fn read_document(text: &str) -> Result<ScenarioDocument, DocumentError> {
    let parsed = xml::parse(text)?;
    let root = parsed.root_element();
    expect_name(root, "scenario")?;
    check_attrs(root, &["id"])?;
    let id = required_attr(root, "id")?;
    let mut r = Reader { violations: Vec::new() };
    let mut sheet = None;
    let mut net = None;
    let mut tables = Vec::new();
    let mut meta = None;
    // Sections must appear in canonical order; net and tables are optional.
    let mut last = 0;
    for n in child_elements(root)? {
        let rank = match n.tag_name().name() {
            "sheet" => 1,
            "net" => 2,
            "tables" => 3,
            "meta" => 4,
            other => return Err(error_at(n, format!("unexpected <{other}> in <scenario>")).into()),
        };
        if rank <= last {
            return Err(error_at(n, format!("<{}> out of order or repeated", n.tag_name().name())).into());
        }
        last = rank;
        match rank {
            1 => sheet = Some(r.sheet(n, id)?),
            2 => net = Some(r.net(n)?),
            3 => tables = r.tables(n)?,
            _ => meta = Some(r.meta(n)?),
        }
    }
    let sheet = sheet.ok_or_else(|| error_at(root, "<scenario> is missing <sheet>"))?;
    let meta = meta.ok_or_else(|| error_at(root, "<scenario> is missing <meta>"))?;
    if !r.violations.is_empty() {
        return Err(DocumentError::Invariant(r.violations));
    }
    Ok(ScenarioDocument {
        sheet,
        net,
        tables,
        meta,
    })
}
