//! Recursive-descent parser for the query grammar:
//!
//! ```text
//! query := expr?
//! expr  := or
//! or    := and ("or" and)*
//! and   := not ("and" not)*
//! not   := "not" not | atom | "(" expr ")"
//! atom  := param ("has" | "isa") string
//!        | "actors.trains" cmp int
//!        | "has" "critical"
//!        | "status" "is" ident
//!        | "system" "is" string
//! ```

use std::str::FromStr;

use super::{Atom, CmpOp, Expr, Query, QueryError};
use crate::scenario::ParameterId;
use crate::store::Status;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(u32),
    Cmp(CmpOp),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Int(n) => format!("integer {n}"),
            Tok::Cmp(c) => format!("`{}`", c.as_str()),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, expected: &[&str], found: String) -> QueryError {
    QueryError::Syntax {
        line,
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l0, column: c0 });
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
        } else if c == '(' || c == ')' {
            push(&mut out, if c == '(' { Tok::LParen } else { Tok::RParen });
            bump(&mut i, &mut line, &mut col);
        } else if c == '"' {
            bump(&mut i, &mut line, &mut col);
            let mut s = String::new();
            loop {
                let Some(&c) = chars.get(i) else {
                    return Err(syntax(l0, c0, &["closing `\"`"], "end of input".into()));
                };
                bump(&mut i, &mut line, &mut col);
                match c {
                    '"' => break,
                    '\\' => {
                        let Some(&e) = chars.get(i) else {
                            return Err(syntax(line, col, &["escape character"], "end of input".into()));
                        };
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            '"' | '\\' => e,
                            other => {
                                return Err(syntax(line, col, &["`\"`", "`\\`", "`n`", "`t`"], format!("`{other}`")))
                            }
                        });
                        bump(&mut i, &mut line, &mut col);
                    }
                    c => s.push(c),
                }
            }
            push(&mut out, Tok::Str(s));
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            let n = s
                .parse::<u32>()
                .map_err(|_| syntax(l0, c0, &["integer up to 4294967295"], s.clone()))?;
            push(&mut out, Tok::Int(n));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '-' | '.'))
            {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            push(&mut out, Tok::Ident(s));
        } else if matches!(c, '=' | '!' | '<' | '>') {
            let next = chars.get(i + 1).copied();
            let (op, width) = match (c, next) {
                ('!', Some('=')) => (CmpOp::Ne, 2),
                ('<', Some('=')) => (CmpOp::Le, 2),
                ('>', Some('=')) => (CmpOp::Ge, 2),
                ('=', _) => (CmpOp::Eq, 1),
                ('<', _) => (CmpOp::Lt, 1),
                ('>', _) => (CmpOp::Gt, 1),
                _ => return Err(syntax(l0, c0, &["comparator"], "`!`".into())),
            };
            for _ in 0..width {
                bump(&mut i, &mut line, &mut col);
            }
            push(&mut out, Tok::Cmp(op));
        } else {
            return Err(syntax(l0, c0, &["query token"], format!("`{c}`")));
        }
    }
    out.push(Spanned { tok: Tok::End, line, column: col });
    Ok(out)
}

const ATOM_START: &[&str] = &["`(`", "`not`", "`has`", "`status`", "`system`", "`actors.trains`", "parameter"];
const KEYWORDS: &[&str] = &["and", "or", "not", "has", "isa", "is", "critical", "status", "system"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn fail(&self, expected: &[&str]) -> QueryError {
        let t = self.peek();
        syntax(t.line, t.column, expected, t.tok.describe())
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.at_keyword(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.fail(&[&format!("`{kw}`")]))
        }
    }

    fn string(&mut self) -> Result<String, QueryError> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.fail(&["string"])),
        }
    }

    fn or(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.and()?;
        while self.at_keyword("or") {
            self.next();
            left = Expr::or(left, self.and()?);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.not()?;
        while self.at_keyword("and") {
            self.next();
            left = Expr::and(left, self.not()?);
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<Expr, QueryError> {
        if self.at_keyword("not") {
            self.next();
            return Ok(Expr::not(self.not()?));
        }
        if self.peek().tok == Tok::LParen {
            self.next();
            let e = self.or()?;
            if self.peek().tok != Tok::RParen {
                return Err(self.fail(&["`and`", "`or`", "`)`"]));
            }
            self.next();
            return Ok(e);
        }
        self.atom().map(Expr::Atom)
    }

    fn atom(&mut self) -> Result<Atom, QueryError> {
        let start = self.peek().clone();
        let Tok::Ident(word) = &start.tok else {
            return Err(self.fail(ATOM_START));
        };
        match word.as_str() {
            "has" => {
                self.next();
                self.keyword("critical")?;
                Ok(Atom::HasCritical)
            }
            "status" => {
                self.next();
                self.keyword("is")?;
                let status = match &self.peek().tok {
                    Tok::Ident(s) => Status::from_str(s).ok(),
                    _ => None,
                };
                let status = status.ok_or_else(|| self.fail(&["`draft`", "`validated`"]))?;
                self.next();
                Ok(Atom::StatusIs { status })
            }
            "system" => {
                self.next();
                self.keyword("is")?;
                Ok(Atom::SystemIs { system: self.string()? })
            }
            "actors.trains" => {
                self.next();
                let Tok::Cmp(cmp) = self.peek().tok else {
                    return Err(self.fail(&["comparator"]));
                };
                self.next();
                let Tok::Int(value) = self.peek().tok else {
                    return Err(self.fail(&["integer"]));
                };
                self.next();
                Ok(Atom::Trains { cmp, value })
            }
            w if KEYWORDS.contains(&w) => Err(self.fail(ATOM_START)),
            w => {
                let parameter = ParameterId::from_str(w).map_err(|_| QueryError::UnknownParameter {
                    name: w.to_owned(),
                    line: start.line,
                    column: start.column,
                })?;
                self.next();
                let isa = if self.at_keyword("isa") {
                    true
                } else if self.at_keyword("has") {
                    false
                } else {
                    return Err(self.fail(&["`has`", "`isa`"]));
                };
                self.next();
                let term = self.string()?;
                Ok(if isa {
                    Atom::Isa { parameter, term }
                } else {
                    Atom::Has { parameter, term }
                })
            }
        }
    }
}

/// Parses query text. Blank text is the match-all query.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    if p.peek().tok == Tok::End {
        return Ok(Query::all());
    }
    let expr = p.or()?;
    if p.peek().tok != Tok::End {
        return Err(p.fail(&["`and`", "`or`", "end of input"]));
    }
    Ok(Query { expr: Some(expr) })
}

impl FromStr for Query {
    type Err = QueryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}
