use std::collections::BTreeSet;
use std::fmt;

use super::{Cond, Expr, FieldKind, LValue, ReturnValue, Stmt, UnitDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateName,
    Undeclared,
    ParamInMethod,
    LoopNeverModified,
    KindMismatch,
    ReturnInCtor,
    LocalShadowsParam,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub ident: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.ident {
            Some(id) => write!(f, "{}: `{id}`", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Ctor,
    Method,
}

/// Returns every invariant violation of `unit`; empty when valid.
pub fn validate(unit: &UnitDef) -> Vec<Violation> {
    let mut v = Checker {
        unit,
        out: Vec::new(),
        locals: BTreeSet::new(),
        phase: Phase::Ctor,
    };
    v.names();
    for (phase, body) in [(Phase::Ctor, &unit.ctor_body), (Phase::Method, &unit.method_body)] {
        v.phase = phase;
        v.locals = assigned_locals(unit, body);
        if phase == Phase::Method {
            for local in v.locals.clone() {
                if unit.is_param(&local) {
                    v.push(ViolationKind::LocalShadowsParam, Some(&local), "method local reuses a parameter name");
                }
            }
        }
        for stmt in body {
            v.stmt(stmt);
        }
    }
    v.out
}

fn assigned_locals(unit: &UnitDef, body: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn walk(unit: &UnitDef, body: &[Stmt], out: &mut BTreeSet<String>) {
        for stmt in body {
            match stmt {
                Stmt::Assign {
                    target: LValue::Var(name),
                    ..
                } if unit.field(name).is_none() => {
                    out.insert(name.clone());
                }
                Stmt::If {
                    then_block,
                    else_block,
                    ..
                } => {
                    walk(unit, then_block, out);
                    walk(unit, else_block, out);
                }
                Stmt::While { body, .. } => walk(unit, body, out),
                _ => {}
            }
        }
    }
    walk(unit, body, &mut out);
    out
}

struct Checker<'a> {
    unit: &'a UnitDef,
    out: Vec<Violation>,
    locals: BTreeSet<String>,
    phase: Phase,
}

impl Checker<'_> {
    fn push(&mut self, kind: ViolationKind, ident: Option<&str>, message: &str) {
        let v = Violation {
            kind,
            ident: ident.map(str::to_string),
            message: message.to_string(),
        };
        if !self.out.contains(&v) {
            self.out.push(v);
        }
    }

    fn names(&mut self) {
        let mut seen = BTreeSet::new();
        let names = self
            .unit
            .params
            .iter()
            .chain(self.unit.fields.iter().map(|f| &f.name));
        for name in names {
            if !seen.insert(name.as_str()) {
                self.push(ViolationKind::DuplicateName, Some(name), "name declared twice");
            }
        }
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Assign { target, value } => {
                match target {
                    LValue::Var(name) => {
                        if self.field_kind(name) == Some(FieldKind::IntArray) {
                            self.push(ViolationKind::KindMismatch, Some(name), "array field assigned a scalar");
                        }
                    }
                    LValue::Cell(name, idx) => {
                        self.array_field(name);
                        self.expr(idx);
                    }
                }
                self.expr(value);
            }
            Stmt::ArrayInit { field, elems } => {
                if self.field_kind(field) != Some(FieldKind::IntArray) {
                    self.push(ViolationKind::KindMismatch, Some(field), "array literal assigned to a non-array field");
                }
                elems.iter().for_each(|e| self.expr(e));
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                self.cond(cond);
                then_block.iter().chain(else_block).for_each(|s| self.stmt(s));
            }
            Stmt::While { cond, body, .. } => {
                self.cond(cond);
                body.iter().for_each(|s| self.stmt(s));
                let read = cond_names(cond);
                let mut written = BTreeSet::new();
                body.iter().for_each(|s| written_names(s, &mut written));
                if read.is_disjoint(&written) {
                    self.push(ViolationKind::LoopNeverModified, None, "loop variable never modified");
                }
            }
            Stmt::Assert { cond, .. } => self.cond(cond),
            Stmt::Throw => {}
            Stmt::Return(value) => {
                if self.phase == Phase::Ctor {
                    self.push(ViolationKind::ReturnInCtor, None, "return not allowed in constructor");
                }
                if let ReturnValue::Expr(e) = value {
                    self.expr(e);
                }
            }
        }
    }

    fn cond(&mut self, c: &Cond) {
        match c {
            Cond::Cmp(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            Cond::BoolVar(name) => self.scalar(name),
            Cond::Not(inner) => self.cond(inner),
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Const(_) => {}
            Expr::Var(name) | Expr::FieldRead(name) => self.scalar(name),
            Expr::ArrayRead(name, idx) => {
                self.array_field(name);
                self.expr(idx);
            }
            Expr::ArrayLen(name) => self.array_field(name),
            Expr::Bin(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            Expr::Neg(inner) => self.expr(inner),
        }
    }

    fn field_kind(&self, name: &str) -> Option<FieldKind> {
        self.unit.field(name).map(|f| f.kind)
    }

    fn scalar(&mut self, name: &str) {
        match self.field_kind(name) {
            Some(FieldKind::Int) => {}
            Some(FieldKind::IntArray) => {
                self.push(ViolationKind::KindMismatch, Some(name), "array field used as a scalar")
            }
            None if self.locals.contains(name) => {}
            None if self.unit.is_param(name) => {
                if self.phase == Phase::Method {
                    self.push(ViolationKind::ParamInMethod, Some(name), "params not visible in method");
                }
            }
            None => self.push(ViolationKind::Undeclared, Some(name), "undeclared identifier"),
        }
    }

    fn array_field(&mut self, name: &str) {
        match self.field_kind(name) {
            Some(FieldKind::IntArray) => {}
            Some(FieldKind::Int) => {
                self.push(ViolationKind::KindMismatch, Some(name), "scalar field used as an array")
            }
            None => self.push(ViolationKind::Undeclared, Some(name), "undeclared array field"),
        }
    }
}

fn cond_names(c: &Cond) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match c {
        Cond::BoolVar(name) => {
            out.insert(name.clone());
        }
        Cond::Not(inner) => out = cond_names(inner),
        Cond::Cmp(..) => c.visit_exprs(&mut |e| match e {
            Expr::Var(n) | Expr::FieldRead(n) | Expr::ArrayRead(n, _) | Expr::ArrayLen(n) => {
                out.insert(n.clone());
            }
            _ => {}
        }),
    }
    out
}

fn written_names(stmt: &Stmt, out: &mut BTreeSet<String>) {
    match stmt {
        Stmt::Assign { target, .. } => {
            let (LValue::Var(n) | LValue::Cell(n, _)) = target;
            out.insert(n.clone());
        }
        Stmt::ArrayInit { field, .. } => {
            out.insert(field.clone());
        }
        Stmt::If {
            then_block,
            else_block,
            ..
        } => then_block
            .iter()
            .chain(else_block)
            .for_each(|s| written_names(s, out)),
        Stmt::While { body, .. } => body.iter().for_each(|s| written_names(s, out)),
        _ => {}
    }
}
