//! Line-oriented net export for desk debugging, and DOT export of
//! reachability graphs.
//!
//! ```text
//! # comment
//! place seg1 external "Segment 1"
//! trans a-advance external "Train A advances" "optional guard note"
//! arc seg1 a-advance 1
//! mark seg1 1
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{Aspect, Marking, PetriNet, ReachabilityGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct NetTextError {
    pub line: usize,
    pub message: String,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn to_net_text(net: &PetriNet, initial: &Marking) -> String {
    let mut out = String::new();
    for p in &net.places {
        let _ = writeln!(out, "place {} {} {}", p.id, p.aspect, quote(&p.label));
    }
    for t in &net.transitions {
        let _ = write!(out, "trans {} {} {}", t.id, t.aspect, quote(&t.label));
        if !t.guard_note.is_empty() {
            let _ = write!(out, " {}", quote(&t.guard_note));
        }
        out.push('\n');
    }
    for a in &net.arcs {
        let _ = writeln!(out, "arc {} {} {}", a.source, a.target, a.weight);
    }
    for (p, n) in initial.iter() {
        let _ = writeln!(out, "mark {p} {n}");
    }
    out
}

fn split_fields(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut field = String::new();
        if c == '"' {
            chars.next();
            loop {
                match chars.next() {
                    None => return Err("unterminated quoted field".into()),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => field.push('\n'),
                        Some(e @ ('"' | '\\')) => field.push(e),
                        other => return Err(format!("bad escape `\\{}`", other.unwrap_or(' '))),
                    },
                    Some(c) => field.push(c),
                }
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                field.push(c);
                chars.next();
            }
        }
        fields.push(field);
    }
    Ok(fields)
}

/// Parses the line format back into a net and its initial marking. Only
/// syntax is checked here; run `validate_net` for structure.
pub fn parse_net_text(text: &str) -> Result<(PetriNet, Marking), NetTextError> {
    let mut net = PetriNet::new();
    let mut marking = Marking::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| NetTextError { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = split_fields(trimmed).map_err(err)?;
        let aspect = |s: &str| s.parse::<Aspect>().map_err(err);
        let number = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| err(format!("`{s}` is not a non-negative integer")))
        };
        match (f[0].as_str(), f.len()) {
            ("place", 4) => {
                net.place(&f[1], &f[3], aspect(&f[2])?);
            }
            ("trans", 4 | 5) => {
                net.transition(&f[1], &f[3], aspect(&f[2])?);
                if let Some(note) = f.get(4) {
                    net.transitions.last_mut().unwrap().guard_note = note.clone();
                }
            }
            ("arc", 4) => {
                net.arc(&f[1], &f[2], number(&f[3])?);
            }
            ("mark", 3) => {
                if marking.get(&f[1]) != 0 {
                    return Err(err(format!("place `{}` is marked twice", f[1])));
                }
                marking.set(f[1].clone(), number(&f[2])?);
            }
            (kind @ ("place" | "trans" | "arc" | "mark"), n) => {
                return Err(err(format!("`{kind}` record has {} fields", n - 1)))
            }
            (other, _) => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    Ok((net, marking))
}

/// DOT digraph of a reachability graph; node labels list the marking.
pub fn to_dot(graph: &ReachabilityGraph) -> String {
    let mut out = String::from("digraph reachability {\n  node [shape=box];\n");
    for (i, m) in graph.markings.iter().enumerate() {
        let label = m.to_string().replace('"', "\\\"");
        let _ = writeln!(out, "  m{i} [label=\"m{i}: {label}\"];");
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  m{} -> m{} [label=\"{}\"];",
            e.from,
            e.to,
            e.transition.replace('"', "\\\"")
        );
    }
    out.push_str("}\n");
    out
}
