//! XML serialization of ontologies.
//!
//! ```xml
//! <ontology version="1.0">
//!   <concept id="risk" label="Risk" layer="domain">
//!     <parent ref="feared-event"/>
//!     <alt-label>Risques</alt-label>
//!     <definition>...</definition>
//!   </concept>
//!   <instance id="collision" label="Collision" concept="collision-risk">
//!     <alt-label>...</alt-label>
//!     <note>...</note>
//!   </instance>
//! </ontology>
//! ```
//!
//! `concept` also accepts `root="true"`; `instance` accepts `uncertain="true"`.

use std::io::Read;

use roxmltree::Node;

use super::{Concept, ConceptId, Instance, Layer, Ontology, OntologyError};
use crate::xml::{self, error_at, FormatError, XmlWriter};

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Downgrade unknown elements and attributes from errors to warnings.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedOntology {
    pub ontology: Ontology,
    /// Lenient-mode skips plus lints such as root-marked domain concepts.
    pub warnings: Vec<String>,
}

pub fn load_ontology(mut source: impl Read, options: LoadOptions) -> Result<LoadedOntology, OntologyError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_ontology(&text, options)
}

pub fn parse_ontology(text: &str, options: LoadOptions) -> Result<LoadedOntology, OntologyError> {
    let doc = xml::parse(text)?;
    let mut reader = Reader {
        lenient: options.lenient,
        warnings: Vec::new(),
    };
    let root = doc.root_element();
    if root.tag_name().name() != "ontology" {
        return Err(error_at(root, format!("expected <ontology>, found <{}>", root.tag_name().name())).into());
    }
    reader.attrs(root, &["version"])?;
    let version = xml::required_attr(root, "version")?.to_owned();

    let mut concepts = Vec::new();
    let mut instances = Vec::new();
    for child in xml::child_elements(root)? {
        match child.tag_name().name() {
            "concept" => concepts.push(reader.concept(child)?),
            "instance" => instances.push(reader.instance(child)?),
            other => reader.unknown(child, other)?,
        }
    }
    let ontology = Ontology::build(version, concepts, instances)?;
    let mut warnings = reader.warnings;
    warnings.extend(ontology.lints());
    Ok(LoadedOntology { ontology, warnings })
}

struct Reader {
    lenient: bool,
    warnings: Vec<String>,
}

impl Reader {
    fn unknown(&mut self, node: Node<'_, '_>, name: &str) -> Result<(), FormatError> {
        let err = error_at(node, format!("unknown element <{name}>"));
        if self.lenient {
            self.warnings.push(err.to_string());
            Ok(())
        } else {
            Err(err)
        }
    }

    fn attrs(&mut self, node: Node<'_, '_>, allowed: &[&str]) -> Result<(), FormatError> {
        match xml::check_attrs(node, allowed) {
            Err(e) if self.lenient => {
                self.warnings.push(e.to_string());
                Ok(())
            }
            other => other,
        }
    }

    fn concept(&mut self, node: Node<'_, '_>) -> Result<Concept, FormatError> {
        self.attrs(node, &["id", "label", "layer", "root"])?;
        let id = ConceptId::raw(xml::required_attr(node, "id")?);
        let label = xml::required_attr(node, "label")?.to_owned();
        let layer: Layer = xml::required_attr(node, "layer")?
            .parse()
            .map_err(|e: String| error_at(node, e))?;
        let mut concept = Concept::new(id, label, layer);
        concept.root = xml::bool_attr(node, "root")?;
        for child in xml::child_elements(node)? {
            match child.tag_name().name() {
                "parent" => {
                    self.attrs(child, &["ref"])?;
                    concept.parents.push(ConceptId::raw(xml::required_attr(child, "ref")?));
                }
                "alt-label" => concept.alt_labels.push(xml::text_of(child)?),
                "definition" => concept.definition = xml::text_of(child)?,
                other => self.unknown(child, other)?,
            }
        }
        Ok(concept)
    }

    fn instance(&mut self, node: Node<'_, '_>) -> Result<Instance, FormatError> {
        self.attrs(node, &["id", "label", "concept", "uncertain"])?;
        let mut instance = Instance::new(
            xml::required_attr(node, "id")?,
            xml::required_attr(node, "label")?,
            ConceptId::raw(xml::required_attr(node, "concept")?),
        );
        instance.uncertain = xml::bool_attr(node, "uncertain")?;
        for child in xml::child_elements(node)? {
            match child.tag_name().name() {
                "alt-label" => instance.alt_labels.push(xml::text_of(child)?),
                "note" => instance.note = Some(xml::text_of(child)?),
                other => self.unknown(child, other)?,
            }
        }
        Ok(instance)
    }
}

/// Canonical form: concepts then instances, each sorted by id.
pub(super) fn write_ontology(o: &Ontology) -> String {
    let mut w = XmlWriter::new();
    w.open("ontology", &[("version", o.version())]);
    for c in o.concepts() {
        let mut attrs = vec![("id", c.id.as_str()), ("label", c.label.as_str()), ("layer", c.layer.as_str())];
        if c.root {
            attrs.push(("root", "true"));
        }
        if c.parents.is_empty() && c.alt_labels.is_empty() && c.definition.is_empty() {
            w.empty("concept", &attrs);
            continue;
        }
        w.open("concept", &attrs);
        for p in &c.parents {
            w.empty("parent", &[("ref", p.as_str())]);
        }
        for a in &c.alt_labels {
            w.text("alt-label", &[], a);
        }
        if !c.definition.is_empty() {
            w.text("definition", &[], &c.definition);
        }
        w.close("concept");
    }
    for i in o.instances() {
        let mut attrs = vec![("id", i.id.as_str()), ("label", i.label.as_str()), ("concept", i.concept.as_str())];
        if i.uncertain {
            attrs.push(("uncertain", "true"));
        }
        if i.alt_labels.is_empty() && i.note.is_none() {
            w.empty("instance", &attrs);
            continue;
        }
        w.open("instance", &attrs);
        for a in &i.alt_labels {
            w.text("alt-label", &[], a);
        }
        if let Some(note) = &i.note {
            w.text("note", &[], note);
        }
        w.close("instance");
    }
    w.close("ontology");
    w.finish()
}
