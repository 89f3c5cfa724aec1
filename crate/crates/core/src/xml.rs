//! Small helpers shared by the XML dialects (ontology, scenario documents).
//!
//! Reading goes through `roxmltree`; writing is a plain indenting emitter so
//! the output layout is fully under our control and byte-stable.

use std::fmt;

use roxmltree::{Document, Node};

/// Malformed or structurally invalid XML input, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for FormatError {}

pub(crate) fn parse(text: &str) -> Result<Document<'_>, FormatError> {
    Document::parse(text).map_err(|e| {
        let pos = e.pos();
        FormatError {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })
}

pub(crate) fn error_at(node: Node<'_, '_>, message: impl Into<String>) -> FormatError {
    let pos = node.document().text_pos_at(node.range().start);
    FormatError {
        line: pos.row,
        column: pos.col,
        message: message.into(),
    }
}

/// Child elements, rejecting stray non-whitespace text.
pub(crate) fn child_elements<'a, 'input>(
    node: Node<'a, 'input>,
) -> Result<Vec<Node<'a, 'input>>, FormatError> {
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_element() {
            out.push(child);
        } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
            return Err(error_at(
                child,
                format!("unexpected text inside <{}>", node.tag_name().name()),
            ));
        }
    }
    Ok(out)
}

pub(crate) fn required_attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, FormatError> {
    node.attribute(name).ok_or_else(|| {
        error_at(
            node,
            format!("<{}> is missing attribute `{name}`", node.tag_name().name()),
        )
    })
}

/// Rejects attributes outside `allowed`.
pub(crate) fn check_attrs(node: Node<'_, '_>, allowed: &[&str]) -> Result<(), FormatError> {
    for attr in node.attributes() {
        if !allowed.contains(&attr.name()) {
            return Err(error_at(
                node,
                format!(
                    "unknown attribute `{}` on <{}>",
                    attr.name(),
                    node.tag_name().name()
                ),
            ));
        }
    }
    Ok(())
}

pub(crate) fn bool_attr(node: Node<'_, '_>, name: &str) -> Result<bool, FormatError> {
    match node.attribute(name) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(other) => Err(error_at(
            node,
            format!("attribute `{name}` must be `true` or `false`, got `{other}`"),
        )),
    }
}

/// Concatenated text content of a leaf element; nested elements are an error.
pub(crate) fn text_of(node: Node<'_, '_>) -> Result<String, FormatError> {
    let mut out = String::new();
    for child in node.children() {
        if child.is_element() {
            return Err(error_at(
                child,
                format!("<{}> must contain only text", node.tag_name().name()),
            ));
        }
        if let Some(t) = child.text() {
            out.push_str(t);
        }
    }
    Ok(out)
}

fn escape_into(out: &mut String, s: &str, attribute: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

pub(crate) struct XmlWriter {
    buf: String,
    depth: usize,
}

impl XmlWriter {
    pub(crate) fn new() -> Self {
        Self {
            buf: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
            depth: 0,
        }
    }

    fn start_tag(&mut self, name: &str, attrs: &[(&str, &str)]) {
        for _ in 0..self.depth {
            self.buf.push_str("  ");
        }
        self.buf.push('<');
        self.buf.push_str(name);
        for (k, v) in attrs {
            self.buf.push(' ');
            self.buf.push_str(k);
            self.buf.push_str("=\"");
            escape_into(&mut self.buf, v, true);
            self.buf.push('"');
        }
    }

    pub(crate) fn open(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start_tag(name, attrs);
        self.buf.push_str(">\n");
        self.depth += 1;
    }

    pub(crate) fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.buf.push_str("  ");
        }
        self.buf.push_str("</");
        self.buf.push_str(name);
        self.buf.push_str(">\n");
    }

    pub(crate) fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start_tag(name, attrs);
        self.buf.push_str("/>\n");
    }

    pub(crate) fn text(&mut self, name: &str, attrs: &[(&str, &str)], text: &str) {
        self.start_tag(name, attrs);
        self.buf.push('>');
        escape_into(&mut self.buf, text, false);
        self.buf.push_str("</");
        self.buf.push_str(name);
        self.buf.push_str(">\n");
    }

    pub(crate) fn finish(self) -> String {
        debug_assert_eq!(self.depth, 0);
        self.buf
    }
}
