//! Critical-situation predicates over markings.
//!
//! Text form: `seg2 >= 2 or (door-open = 1 and not train-stopped >= 1)`.
//! `and` binds tighter than `or`; `not` applies to the next operand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Marking, PetriError, PetriNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Ge,
    Le,
    Eq,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
        }
    }

    fn holds(self, lhs: u32, rhs: u32) -> bool {
        match self {
            Comparator::Ge => lhs >= rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CriticalPredicate {
    Atom {
        place: String,
        cmp: Comparator,
        value: u32,
    },
    And(Vec<CriticalPredicate>),
    Or(Vec<CriticalPredicate>),
    Not(Box<CriticalPredicate>),
}

impl CriticalPredicate {
    pub fn atom(place: &str, cmp: Comparator, value: u32) -> Self {
        CriticalPredicate::Atom {
            place: place.to_owned(),
            cmp,
            value,
        }
    }

    pub fn holds(&self, m: &Marking) -> bool {
        match self {
            CriticalPredicate::Atom { place, cmp, value } => cmp.holds(m.get(place), *value),
            CriticalPredicate::And(parts) => parts.iter().all(|p| p.holds(m)),
            CriticalPredicate::Or(parts) => parts.iter().any(|p| p.holds(m)),
            CriticalPredicate::Not(inner) => !inner.holds(m),
        }
    }

    pub fn places(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_places(&mut out);
        out
    }

    fn collect_places<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CriticalPredicate::Atom { place, .. } => out.push(place),
            CriticalPredicate::And(parts) | CriticalPredicate::Or(parts) => {
                parts.iter().for_each(|p| p.collect_places(out))
            }
            CriticalPredicate::Not(inner) => inner.collect_places(out),
        }
    }

    /// Every referenced place must exist in `net`.
    pub fn check(&self, net: &PetriNet) -> Result<(), PetriError> {
        match self.places().into_iter().find(|p| !net.has_place(p)) {
            Some(p) => Err(PetriError::UnknownPlace(p.to_owned())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for CriticalPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(p: &CriticalPredicate, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match p {
                CriticalPredicate::And(_) | CriticalPredicate::Or(_) => write!(f, "({p})"),
                _ => write!(f, "{p}"),
            }
        }
        match self {
            CriticalPredicate::Atom { place, cmp, value } => {
                write!(f, "{place} {} {value}", cmp.as_str())
            }
            CriticalPredicate::And(parts) | CriticalPredicate::Or(parts) => {
                let sep = if matches!(self, CriticalPredicate::And(_)) { " and " } else { " or " };
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    operand(p, f)?;
                }
                Ok(())
            }
            CriticalPredicate::Not(inner) => {
                f.write_str("not ")?;
                operand(inner, f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicate syntax error at column {column}: {message}")]
pub struct PredicateParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u32),
    Cmp(Comparator),
    LParen,
    RParen,
    And,
    Or,
    Not,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, PredicateParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |i: usize, message: String| PredicateParseError { column: i + 1, message };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '≥' => {
                i += 1;
                Tok::Cmp(Comparator::Ge)
            }
            '≤' => {
                i += 1;
                Tok::Cmp(Comparator::Le)
            }
            '>' | '<' => {
                if chars.get(i + 1) != Some(&'=') {
                    return Err(err(i, format!("expected `{c}=`")));
                }
                i += 2;
                Tok::Cmp(if c == '>' { Comparator::Ge } else { Comparator::Le })
            }
            '=' => {
                i += if chars.get(i + 1) == Some(&'=') { 2 } else { 1 };
                Tok::Cmp(Comparator::Eq)
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                Tok::Int(s.parse().map_err(|_| err(start, format!("integer `{s}` is out of range")))?)
            }
            c if c.is_alphanumeric() || c == '_' => {
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '-' | '.'))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                match s.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(s),
                }
            }
            other => return Err(err(i, format!("unexpected character `{other}`"))),
        };
        out.push((start + 1, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|(c, _)| *c).unwrap_or(self.end)
    }

    fn fail<T>(&self, expected: &str) -> Result<T, PredicateParseError> {
        let found = match self.peek() {
            None => "end of input".to_owned(),
            Some(t) => format!("{t:?}"),
        };
        Err(PredicateParseError {
            column: self.column(),
            message: format!("expected {expected}, found {found}"),
        })
    }

    fn or(&mut self) -> Result<CriticalPredicate, PredicateParseError> {
        let mut parts = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { CriticalPredicate::Or(parts) })
    }

    fn and(&mut self) -> Result<CriticalPredicate, PredicateParseError> {
        let mut parts = vec![self.not()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            parts.push(self.not()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { CriticalPredicate::And(parts) })
    }

    fn not(&mut self) -> Result<CriticalPredicate, PredicateParseError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(CriticalPredicate::Not(Box::new(self.not()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.fail("`)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Ident(_)) => self.atom(),
            _ => self.fail("place id, `not` or `(`"),
        }
    }

    fn atom(&mut self) -> Result<CriticalPredicate, PredicateParseError> {
        let Some(Tok::Ident(place)) = self.peek().cloned() else {
            return self.fail("place id");
        };
        self.pos += 1;
        let Some(Tok::Cmp(cmp)) = self.peek().cloned() else {
            return self.fail("comparator (>=, <=, =)");
        };
        self.pos += 1;
        let Some(Tok::Int(value)) = self.peek().cloned() else {
            return self.fail("non-negative integer");
        };
        self.pos += 1;
        Ok(CriticalPredicate::Atom { place, cmp, value })
    }
}

impl FromStr for CriticalPredicate {
    type Err = PredicateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            toks: tokenize(s)?,
            pos: 0,
            end: s.chars().count() + 1,
        };
        let pred = p.or()?;
        if p.pos != p.toks.len() {
            return p.fail("`and`, `or` or end of input");
        }
        Ok(pred)
    }
}

impl Serialize for CriticalPredicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CriticalPredicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_precedence() {
        let p: CriticalPredicate = "a >= 1 or b = 0 and not c <= 2".parse().unwrap();
        assert_eq!(
            p,
            CriticalPredicate::Or(vec![
                CriticalPredicate::atom("a", Comparator::Ge, 1),
                CriticalPredicate::And(vec![
                    CriticalPredicate::atom("b", Comparator::Eq, 0),
                    CriticalPredicate::Not(Box::new(CriticalPredicate::atom("c", Comparator::Le, 2))),
                ]),
            ])
        );
    }

    #[test]
    fn unicode_comparators_and_hyphenated_places() {
        let p: CriticalPredicate = "train-a-seg1 ≥ 1 and x ≤ 3".parse().unwrap();
        assert_eq!(p.to_string(), "train-a-seg1 >= 1 and x <= 3");
    }

    #[test]
    fn evaluation() {
        let p: CriticalPredicate = "seg2 >= 2".parse().unwrap();
        assert!(!p.holds(&Marking::new().with("seg2", 1)));
        assert!(p.holds(&Marking::new().with("seg2", 2)));
        let q: CriticalPredicate = "not (p = 0)".parse().unwrap();
        assert!(q.holds(&Marking::new().with("p", 1)));
        assert!(!q.holds(&Marking::new()));
    }

    #[test]
    fn errors_point_at_column() {
        let e = "seg2 >=".parse::<CriticalPredicate>().unwrap_err();
        assert_eq!(e.column, 8);
        let e = "seg2 > 1".parse::<CriticalPredicate>().unwrap_err();
        assert_eq!(e.column, 6);
        assert!("(a >= 1".parse::<CriticalPredicate>().is_err());
        assert!("a >= 1 b".parse::<CriticalPredicate>().is_err());
        assert!("".parse::<CriticalPredicate>().is_err());
    }

    fn arb_pred() -> impl Strategy<Value = CriticalPredicate> {
        let place = "[a-z][a-z0-9-]{0,5}"
            .prop_filter("keyword", |s| !["and", "or", "not"].contains(&s.as_str()));
        let atom = (place, 0u32..5, 0..3usize).prop_map(|(place, value, c)| {
            let cmp = [Comparator::Ge, Comparator::Le, Comparator::Eq][c];
            CriticalPredicate::Atom { place, cmp, value }
        });
        atom.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(CriticalPredicate::And),
                prop::collection::vec(inner.clone(), 2..4).prop_map(CriticalPredicate::Or),
                inner.prop_map(|p| CriticalPredicate::Not(Box::new(p))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(p in arb_pred()) {
            let text = p.to_string();
            prop_assert_eq!(text.parse::<CriticalPredicate>().unwrap(), p);
        }
    }
}
