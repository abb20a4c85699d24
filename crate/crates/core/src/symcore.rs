//! Path conditions over symbolic unit state.
//!
//! A [`Clause`] compares two [`SymExpr`]s built from field symbols: scalar
//! fields, array cells at concrete indices, and array lengths. Clauses are
//! kept in a canonical form whose textual serialization doubles as the
//! identity used for hashing, deduplication and fingerprinting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::parse_support::{lex_clause_text, Cursor, Tok};
use crate::ir::{ArithOp, CmpOp, UnitDef};

pub use crate::ir::CmpOp as ClauseOp;

const LENGTH_SUFFIX: &str = "length";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymExpr {
    Const(i64),
    Field(String),
    Cell(String, i64),
    Len(String),
    Bin(ArithOp, Box<SymExpr>, Box<SymExpr>),
}

impl SymExpr {
    /// Builds a binary node, folding when both operands are constants.
    pub fn bin(op: ArithOp, lhs: SymExpr, rhs: SymExpr) -> SymExpr {
        match (&lhs, &rhs) {
            (SymExpr::Const(l), SymExpr::Const(r)) => SymExpr::Const(op.apply(*l, *r)),
            _ => SymExpr::Bin(op, Box::new(lhs), Box::new(rhs)),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, SymExpr::Const(_))
    }

    fn symbols(&self, out: &mut Vec<Symbol>) {
        match self {
            SymExpr::Const(_) => {}
            SymExpr::Field(n) => out.push(Symbol::Field(n.clone())),
            SymExpr::Cell(n, i) => out.push(Symbol::Cell(n.clone(), *i)),
            SymExpr::Len(n) => out.push(Symbol::Len(n.clone())),
            SymExpr::Bin(_, l, r) => {
                l.symbols(out);
                r.symbols(out);
            }
        }
    }

    pub fn eval(&self, state: &ConcreteFieldState) -> Result<i64, EvalError> {
        Ok(match self {
            SymExpr::Const(v) => *v,
            SymExpr::Field(n) => *state
                .scalars
                .get(n)
                .ok_or_else(|| EvalError::UnknownSymbol(n.clone()))?,
            SymExpr::Cell(n, i) => state
                .arrays
                .get(n)
                .and_then(|a| usize::try_from(*i).ok().and_then(|i| a.get(i)))
                .copied()
                .ok_or_else(|| EvalError::UnknownSymbol(format!("{n}[{i}]")))?,
            SymExpr::Len(n) => state
                .arrays
                .get(n)
                .map(|a| a.len() as i64)
                .ok_or_else(|| EvalError::UnknownSymbol(format!("{n}.{LENGTH_SUFFIX}")))?,
            SymExpr::Bin(op, l, r) => op.apply(l.eval(state)?, r.eval(state)?),
        })
    }

    fn write(&self, f: &mut impl Write, min_prec: u8, abstracted: bool) -> fmt::Result {
        match self {
            SymExpr::Const(_) if abstracted => f.write_char('.'),
            SymExpr::Const(v) => write!(f, "{v}"),
            SymExpr::Field(n) => f.write_str(n),
            SymExpr::Cell(n, _) if abstracted => write!(f, "{n}[.]"),
            SymExpr::Cell(n, i) => write!(f, "{n}[{i}]"),
            SymExpr::Len(n) => write!(f, "{n}.{LENGTH_SUFFIX}"),
            SymExpr::Bin(op, l, r) => {
                let prec = op.precedence();
                if prec < min_prec {
                    f.write_char('(')?;
                }
                l.write(f, prec, abstracted)?;
                write!(f, " {} ", op.symbol())?;
                r.write(f, prec + 1, abstracted)?;
                if prec < min_prec {
                    f.write_char(')')?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0, false)
    }
}

/// A single symbol a clause can mention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Field(String),
    Cell(String, i64),
    Len(String),
}

impl Symbol {
    pub fn name(&self) -> String {
        match self {
            Symbol::Field(n) => n.clone(),
            Symbol::Cell(n, i) => format!("{n}[{i}]"),
            Symbol::Len(n) => format!("{n}.{LENGTH_SUFFIX}"),
        }
    }

    /// Arrays own their cells and length; a qualified scalar `O.x` belongs
    /// to `O`; a bare scalar has no owning object.
    pub fn object(&self) -> Option<String> {
        match self {
            Symbol::Cell(n, _) | Symbol::Len(n) => Some(n.clone()),
            Symbol::Field(n) => n.rsplit_once('.').map(|(owner, _)| owner.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    op: CmpOp,
    lhs: SymExpr,
    rhs: SymExpr,
}

impl Clause {
    /// Builds a clause in canonical form: a constant-only side goes right.
    pub fn new(op: CmpOp, lhs: SymExpr, rhs: SymExpr) -> Clause {
        if lhs.is_const() && !rhs.is_const() {
            Clause {
                op: op.mirrored(),
                lhs: rhs,
                rhs: lhs,
            }
        } else {
            Clause { op, lhs, rhs }
        }
    }

    pub fn op(&self) -> CmpOp {
        self.op
    }

    pub fn lhs(&self) -> &SymExpr {
        &self.lhs
    }

    pub fn rhs(&self) -> &SymExpr {
        &self.rhs
    }

    /// Complementary comparison over the same operands.
    pub fn negate(&self) -> Clause {
        Clause {
            op: self.op.negated(),
            lhs: self.lhs.clone(),
            rhs: self.rhs.clone(),
        }
    }

    pub fn abstract_of(&self) -> AbstractClause {
        let mut s = String::new();
        self.lhs.write(&mut s, 0, true).expect("string write");
        write!(s, " {} ", self.op).expect("string write");
        self.rhs.write(&mut s, 0, true).expect("string write");
        AbstractClause(s)
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut v = Vec::new();
        self.lhs.symbols(&mut v);
        self.rhs.symbols(&mut v);
        v.into_iter().collect()
    }

    pub fn vars_of(&self) -> BTreeSet<String> {
        self.symbols().iter().map(Symbol::name).collect()
    }

    pub fn objects_of(&self) -> BTreeSet<String> {
        self.symbols().iter().filter_map(Symbol::object).collect()
    }

    pub fn holds(&self, state: &ConcreteFieldState) -> Result<bool, EvalError> {
        Ok(self.op.holds(self.lhs.eval(state)?, self.rhs.eval(state)?))
    }

    /// Distance from satisfaction under `state`; zero iff the clause holds.
    pub fn branch_distance(&self, state: &ConcreteFieldState) -> Result<u128, EvalError> {
        Ok(branch_distance(
            self.op,
            self.lhs.eval(state)?,
            self.rhs.eval(state)?,
        ))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

/// Korel-style distance; strict comparisons add one so a boundary miss
/// still has distance 1.
pub fn branch_distance(op: CmpOp, lhs: i64, rhs: i64) -> u128 {
    let (l, r) = (lhs as i128, rhs as i128);
    let d = match op {
        CmpOp::Lt => l - r + 1,
        CmpOp::Le => l - r,
        CmpOp::Gt => r - l + 1,
        CmpOp::Ge => r - l,
        CmpOp::Eq => (l - r).abs(),
        CmpOp::Ne => i128::from(l == r),
    };
    d.max(0) as u128
}

/// Serialization of a clause with every literal and concrete index replaced by `.`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractClause(pub String);

impl AbstractClause {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AbstractClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Field values after the constructor ran.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteFieldState {
    pub scalars: BTreeMap<String, i64>,
    pub arrays: BTreeMap<String, Vec<i64>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// An ordered conjunction of clauses. Alternatives synthesized from an
/// executed path carry a suffix: the negated clause, always last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathCondition {
    clauses: Vec<Clause>,
    suffix: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub satisfied_prefix: usize,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub clause: Clause,
    pub distance: u128,
}

impl Evaluation {
    pub fn fully_satisfied(&self) -> bool {
        self.first_violation.is_none()
    }
}

impl PathCondition {
    /// A path condition as observed along an executed path (no suffix).
    pub fn observed(clauses: Vec<Clause>) -> PathCondition {
        PathCondition {
            clauses,
            suffix: None,
        }
    }

    /// A path condition whose last clause is the distinguished suffix.
    ///
    /// Panics on an empty clause list.
    pub fn with_suffix(clauses: Vec<Clause>) -> PathCondition {
        assert!(!clauses.is_empty(), "a path condition with a suffix needs clauses");
        let suffix = Some(clauses.len() - 1);
        PathCondition { clauses, suffix }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn suffix_index(&self) -> Option<usize> {
        self.suffix
    }

    pub fn suffix(&self) -> Option<&Clause> {
        self.suffix.map(|i| &self.clauses[i])
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// For each clause `i`: the first `i` clauses followed by the negation of
    /// clause `i`. Clauses after `i` are dropped.
    pub fn synthesize_alternatives(&self) -> Vec<PathCondition> {
        (0..self.clauses.len())
            .map(|i| {
                let mut clauses = self.clauses[..i].to_vec();
                clauses.push(self.clauses[i].negate());
                PathCondition::with_suffix(clauses)
            })
            .collect()
    }

    pub fn evaluate(&self, state: &ConcreteFieldState) -> Result<Evaluation, EvalError> {
        for (i, clause) in self.clauses.iter().enumerate() {
            let distance = clause.branch_distance(state)?;
            if distance > 0 {
                return Ok(Evaluation {
                    satisfied_prefix: i,
                    first_violation: Some(Violation {
                        clause: clause.clone(),
                        distance,
                    }),
                });
            }
        }
        Ok(Evaluation {
            satisfied_prefix: self.clauses.len(),
            first_violation: None,
        })
    }

    /// Canonical key: clauses joined by ` && `, the suffix marked with `@`.
    pub fn dedup_key(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                out.push_str(" && ");
            }
            if self.suffix == Some(i) {
                out.push('@');
            }
            write!(out, "{c}").expect("string write");
        }
        out
    }

    /// Parses `clause (&& clause)*`; `∧` is accepted for `&&` and a leading
    /// `@` marks the suffix clause, which must be last.
    pub fn parse(text: &str) -> Result<PathCondition, ClauseParseError> {
        let normalized = text.replace('∧', "&&");
        let toks = lex_clause_text(&normalized).map_err(|e| ClauseParseError(e.to_string()))?;
        let mut cur = Cursor::new(toks);
        let mut clauses = Vec::new();
        let mut suffix = None;
        loop {
            if cur.eat_punct("@") {
                suffix = Some(clauses.len());
            }
            clauses.push(parse_clause(&mut cur)?);
            if !cur.eat_punct("&&") {
                break;
            }
        }
        if !cur.at_eof() {
            return Err(ClauseParseError(format!(
                "unexpected {} after clause",
                crate::ir::parse_support::describe(cur.peek())
            )));
        }
        match suffix {
            Some(i) if i + 1 != clauses.len() => {
                Err(ClauseParseError("the suffix marker must be on the last clause".into()))
            }
            _ => Ok(PathCondition { clauses, suffix }),
        }
    }

    /// Rewrites symbol names to the unit's declared field names. An exact
    /// match wins; otherwise a unique case-insensitive match is accepted, so
    /// `A[0]` refers to field `a`.
    pub fn resolve_against(&self, unit: &UnitDef) -> Result<PathCondition, ClauseParseError> {
        let resolve = |name: &str| -> Result<String, ClauseParseError> {
            if unit.field(name).is_some() {
                return Ok(name.to_string());
            }
            let matches: Vec<_> = unit
                .fields
                .iter()
                .filter(|f| f.name.eq_ignore_ascii_case(name))
                .collect();
            match matches.as_slice() {
                [one] => Ok(one.name.clone()),
                _ => Err(ClauseParseError(format!("unknown field `{name}`"))),
            }
        };
        fn map(e: &SymExpr, r: &dyn Fn(&str) -> Result<String, ClauseParseError>) -> Result<SymExpr, ClauseParseError> {
            Ok(match e {
                SymExpr::Const(v) => SymExpr::Const(*v),
                SymExpr::Field(n) => SymExpr::Field(r(n)?),
                SymExpr::Cell(n, i) => SymExpr::Cell(r(n)?, *i),
                SymExpr::Len(n) => SymExpr::Len(r(n)?),
                SymExpr::Bin(op, a, b) => SymExpr::bin(*op, map(a, r)?, map(b, r)?),
            })
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Ok(Clause::new(c.op, map(&c.lhs, &resolve)?, map(&c.rhs, &resolve)?)))
            .collect::<Result<Vec<_>, ClauseParseError>>()?;
        Ok(PathCondition {
            clauses,
            suffix: self.suffix,
        })
    }
}

impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dedup_key())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed path condition: {0}")]
pub struct ClauseParseError(pub String);

pub fn parse_clause_text(text: &str) -> Result<Clause, ClauseParseError> {
    let pc = PathCondition::parse(text)?;
    match pc.clauses.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(ClauseParseError("expected exactly one clause".into())),
    }
}

fn parse_clause(cur: &mut Cursor) -> Result<Clause, ClauseParseError> {
    let lhs = sym_expr(cur)?;
    let op = match cur.peek() {
        Tok::Punct(p) => CmpOp::from_symbol(p),
        _ => None,
    }
    .ok_or_else(|| {
        ClauseParseError(format!(
            "expected comparison operator, found {}",
            crate::ir::parse_support::describe(cur.peek())
        ))
    })?;
    cur.bump();
    let rhs = sym_expr(cur)?;
    Ok(Clause::new(op, lhs, rhs))
}

fn sym_expr(cur: &mut Cursor) -> Result<SymExpr, ClauseParseError> {
    let mut lhs = sym_term(cur)?;
    loop {
        let op = if cur.eat_punct("+") {
            ArithOp::Add
        } else if cur.eat_punct("-") {
            ArithOp::Sub
        } else {
            return Ok(lhs);
        };
        lhs = SymExpr::Bin(op, Box::new(lhs), Box::new(sym_term(cur)?));
    }
}

fn sym_term(cur: &mut Cursor) -> Result<SymExpr, ClauseParseError> {
    let mut lhs = sym_primary(cur)?;
    while cur.eat_punct("*") {
        lhs = SymExpr::Bin(ArithOp::Mul, Box::new(lhs), Box::new(sym_primary(cur)?));
    }
    Ok(lhs)
}

fn int_literal(cur: &mut Cursor) -> Result<i64, ClauseParseError> {
    let negative = cur.eat_punct("-");
    match *cur.peek() {
        Tok::Int(v) => {
            cur.bump();
            let value = if negative {
                crate::ir::parse_support::negative_literal(v)
            } else {
                i64::try_from(v).ok()
            };
            value.ok_or_else(|| ClauseParseError("integer literal out of range".into()))
        }
        ref other => Err(ClauseParseError(format!(
            "expected integer, found {}",
            crate::ir::parse_support::describe(other)
        ))),
    }
}

fn sym_primary(cur: &mut Cursor) -> Result<SymExpr, ClauseParseError> {
    match cur.peek().clone() {
        Tok::Int(_) => Ok(SymExpr::Const(int_literal(cur)?)),
        Tok::Punct("-") => {
            if matches!(cur.peek_at(1), Tok::Int(_)) {
                Ok(SymExpr::Const(int_literal(cur)?))
            } else {
                cur.bump();
                let inner = sym_primary(cur)?;
                Ok(SymExpr::Bin(ArithOp::Sub, Box::new(SymExpr::Const(0)), Box::new(inner)))
            }
        }
        Tok::Punct("(") => {
            cur.bump();
            let e = sym_expr(cur)?;
            if !cur.eat_punct(")") {
                return Err(ClauseParseError("expected `)`".into()));
            }
            Ok(e)
        }
        Tok::Ident(first) => {
            cur.bump();
            let mut name = first;
            while cur.is_punct(".") {
                match cur.peek_at(1).clone() {
                    Tok::Ident(part) => {
                        cur.bump();
                        cur.bump();
                        let last = !cur.is_punct(".") && !cur.is_punct("[");
                        if part == LENGTH_SUFFIX && last {
                            return Ok(SymExpr::Len(name));
                        }
                        name = format!("{name}.{part}");
                    }
                    _ => return Err(ClauseParseError("expected name after `.`".into())),
                }
            }
            if cur.eat_punct("[") {
                let idx = int_literal(cur)?;
                if !cur.eat_punct("]") {
                    return Err(ClauseParseError("expected `]`".into()));
                }
                return Ok(SymExpr::Cell(name, idx));
            }
            Ok(SymExpr::Field(name))
        }
        other => Err(ClauseParseError(format!(
            "expected operand, found {}",
            crate::ir::parse_support::describe(&other)
        ))),
    }
}
