//! The toy imperative language units under test are written in.
//!
//! A unit is a class-like bundle: constructor parameters, a set of fields,
//! a constructor body that fills the fields from the parameters, and one
//! target method that reads only fields and its own locals.

mod parse;
mod print;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_unit, ParseError};

/// Lexer and token cursor shared with the clause-text parser.
pub(crate) mod parse_support {
    pub(crate) use super::parse::{describe, lex as lex_clause_text, negative_literal, Cursor, Tok};
}
pub use validate::{validate, Violation, ViolationKind};

/// Preorder number of a branching statement (`if`, `while`, `assert`),
/// used for coverage bookkeeping.
pub type BranchId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitDef {
    pub name: String,
    pub params: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub ctor_body: Vec<Stmt>,
    pub method_body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Int,
    IntArray,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        target: LValue,
        value: Expr,
    },
    ArrayInit {
        field: String,
        elems: Vec<Expr>,
    },
    If {
        id: BranchId,
        cond: Cond,
        then_block: Vec<Stmt>,
        else_block: Vec<Stmt>,
    },
    While {
        id: BranchId,
        cond: Cond,
        body: Vec<Stmt>,
    },
    Assert {
        id: BranchId,
        cond: Cond,
    },
    Throw,
    Return(ReturnValue),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String),
    Cell(String, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReturnValue {
    Expr(Expr),
    Null,
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Var(String),
    FieldRead(String),
    ArrayRead(String, Box<Expr>),
    ArrayLen(String),
    Bin(ArithOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Cmp(CmpOp, Expr, Expr),
    BoolVar(String),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn apply(self, lhs: i64, rhs: i64) -> i64 {
        match self {
            ArithOp::Add => lhs.wrapping_add(rhs),
            ArithOp::Sub => lhs.wrapping_sub(rhs),
            ArithOp::Mul => lhs.wrapping_mul(rhs),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }

    /// Binding strength; `*` binds tighter than `+` and `-`.
    pub fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
        CmpOp::Eq,
        CmpOp::Ne,
    ];

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }

    /// The complement: `holds(negated)` is `!holds(self)` on any operands.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    /// The operator to use when the operands are swapped.
    pub fn mirrored(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.symbol() == s)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl UnitDef {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }

    /// Integer literals appearing anywhere in the unit, deduplicated and sorted.
    pub fn literals(&self) -> Vec<i64> {
        let mut out = Vec::new();
        for stmt in self.ctor_body.iter().chain(&self.method_body) {
            stmt.visit_exprs(&mut |e| {
                if let Expr::Const(v) = e {
                    out.push(*v);
                }
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every branch id of the target method, in preorder.
    pub fn method_branches(&self) -> Vec<BranchId> {
        let mut ids = Vec::new();
        for stmt in &self.method_body {
            stmt.collect_branch_ids(&mut ids);
        }
        ids
    }

    /// Renumbers every branching statement in preorder, ctor first.
    pub fn renumber_branches(&mut self) {
        let mut next = 0;
        for stmt in self.ctor_body.iter_mut().chain(self.method_body.iter_mut()) {
            stmt.renumber(&mut next);
        }
    }
}

impl Stmt {
    fn renumber(&mut self, next: &mut BranchId) {
        match self {
            Stmt::If {
                id,
                then_block,
                else_block,
                ..
            } => {
                *id = *next;
                *next += 1;
                for s in then_block.iter_mut().chain(else_block.iter_mut()) {
                    s.renumber(next);
                }
            }
            Stmt::While { id, body, .. } => {
                *id = *next;
                *next += 1;
                for s in body {
                    s.renumber(next);
                }
            }
            Stmt::Assert { id, .. } => {
                *id = *next;
                *next += 1;
            }
            _ => {}
        }
    }

    fn collect_branch_ids(&self, out: &mut Vec<BranchId>) {
        match self {
            Stmt::If {
                id,
                then_block,
                else_block,
                ..
            } => {
                out.push(*id);
                for s in then_block.iter().chain(else_block) {
                    s.collect_branch_ids(out);
                }
            }
            Stmt::While { id, body, .. } => {
                out.push(*id);
                for s in body {
                    s.collect_branch_ids(out);
                }
            }
            Stmt::Assert { id, .. } => out.push(*id),
            _ => {}
        }
    }

    fn visit_exprs(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Stmt::Assign { target, value } => {
                if let LValue::Cell(_, idx) = target {
                    idx.visit(f);
                }
                value.visit(f);
            }
            Stmt::ArrayInit { elems, .. } => elems.iter().for_each(|e| e.visit(f)),
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                cond.visit_exprs(f);
                for s in then_block.iter().chain(else_block) {
                    s.visit_exprs(f);
                }
            }
            Stmt::While { cond, body, .. } => {
                cond.visit_exprs(f);
                for s in body {
                    s.visit_exprs(f);
                }
            }
            Stmt::Assert { cond, .. } => cond.visit_exprs(f),
            Stmt::Return(ReturnValue::Expr(e)) => e.visit(f),
            Stmt::Return(_) | Stmt::Throw => {}
        }
    }
}

impl Expr {
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::ArrayRead(_, idx) => idx.visit(f),
            Expr::Bin(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Expr::Neg(e) => e.visit(f),
            Expr::Const(_) | Expr::Var(_) | Expr::FieldRead(_) | Expr::ArrayLen(_) => {}
        }
    }
}

impl Cond {
    pub fn visit_exprs(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Cond::Cmp(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Cond::BoolVar(_) => {}
            Cond::Not(c) => c.visit_exprs(f),
        }
    }
}
