use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scenario::ParameterId;
use crate::store::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn test(self, lhs: u32, rhs: u32) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "atom", rename_all = "kebab-case")]
pub enum Atom {
    /// Literal membership: some selection under `parameter` is `term` (by id,
    /// code, label or alternative label).
    Has { parameter: ParameterId, term: String },
    /// Subsumption: some selection under `parameter` is an instance of the
    /// concept named `term` or of a descendant.
    Isa { parameter: ParameterId, term: String },
    /// Compares the `number-of-trains` actor qualifier; false when absent.
    Trains { cmp: CmpOp, value: u32 },
    HasCritical,
    StatusIs { status: Status },
    /// Transport system, compared ignoring case.
    SystemIs { system: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Atom(Atom),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Atom(a) => out.push(a),
                Expr::Not(x) => stack.push(x),
                Expr::And(a, b) | Expr::Or(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }
}

/// A parsed query; no expression means "every document".
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub expr: Option<Expr>,
}

impl Query {
    pub fn all() -> Self {
        Self { expr: None }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        self.expr.as_ref().map(Expr::atoms).unwrap_or_default()
    }
}

pub(crate) fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Has { parameter, term } => {
                write!(f, "{parameter} has ")?;
                write_string(f, term)
            }
            Atom::Isa { parameter, term } => {
                write!(f, "{parameter} isa ")?;
                write_string(f, term)
            }
            Atom::Trains { cmp, value } => write!(f, "actors.trains {} {value}", cmp.as_str()),
            Atom::HasCritical => f.write_str("has critical"),
            Atom::StatusIs { status } => write!(f, "status is {status}"),
            Atom::SystemIs { system } => {
                f.write_str("system is ")?;
                write_string(f, system)
            }
        }
    }
}

/// Binary children are always parenthesized, so printing then parsing
/// gives back the same tree.
fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::And(..) | Expr::Or(..) => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Not(x) => {
                f.write_str("not ")?;
                write_operand(f, x)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                write_operand(f, a)?;
                f.write_str(if matches!(self, Expr::And(..)) { " and " } else { " or " })?;
                write_operand(f, b)
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            Some(e) => write!(f, "{e}"),
            None => Ok(()),
        }
    }
}
