use std::fmt::{self, Write};

use super::{Cond, Expr, FieldKind, LValue, ReturnValue, Stmt, UnitDef};

impl fmt::Display for UnitDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|p| format!("{p}: int")).collect();
        writeln!(f, "unit {}({}) {{", self.name, params.join(", "))?;
        if !self.fields.is_empty() {
            write!(f, "  fields {{")?;
            for field in &self.fields {
                let kind = match field.kind {
                    FieldKind::Int => "int",
                    FieldKind::IntArray => "int[]",
                };
                write!(f, " {}: {};", field.name, kind)?;
            }
            writeln!(f, " }}")?;
        }
        write!(f, "  ctor ")?;
        write_block(f, &self.ctor_body, 1)?;
        write!(f, "\n  method ")?;
        write_block(f, &self.method_body, 1)?;
        writeln!(f, "\n}}")
    }
}

fn write_block(f: &mut impl Write, block: &[Stmt], depth: usize) -> fmt::Result {
    if block.is_empty() {
        return f.write_str("{}");
    }
    f.write_str("{\n")?;
    for stmt in block {
        write_stmt(f, stmt, depth + 1)?;
    }
    write!(f, "{}}}", "  ".repeat(depth))
}

fn write_stmt(f: &mut impl Write, stmt: &Stmt, depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    match stmt {
        Stmt::Assign { target, value } => match target {
            LValue::Var(name) => writeln!(f, "{pad}{name} = {value};"),
            LValue::Cell(name, idx) => writeln!(f, "{pad}{name}[{idx}] = {value};"),
        },
        Stmt::ArrayInit { field, elems } => {
            let elems: Vec<String> = elems.iter().map(|e| e.to_string()).collect();
            writeln!(f, "{pad}{field} = [{}];", elems.join(", "))
        }
        Stmt::If {
            cond,
            then_block,
            else_block,
            ..
        } => {
            write!(f, "{pad}if ({cond}) ")?;
            write_block(f, then_block, depth)?;
            if !else_block.is_empty() {
                f.write_str(" else ")?;
                write_block(f, else_block, depth)?;
            }
            f.write_char('\n')
        }
        Stmt::While { cond, body, .. } => {
            write!(f, "{pad}while ({cond}) ")?;
            write_block(f, body, depth)?;
            f.write_char('\n')
        }
        Stmt::Assert { cond, .. } => writeln!(f, "{pad}assert ({cond});"),
        Stmt::Throw => writeln!(f, "{pad}throw;"),
        Stmt::Return(ReturnValue::Null) => writeln!(f, "{pad}return null;"),
        Stmt::Return(ReturnValue::Str(s)) => writeln!(f, "{pad}return \"{s}\";"),
        Stmt::Return(ReturnValue::Expr(e)) => writeln!(f, "{pad}return {e};"),
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Cmp(op, l, r) => write!(f, "{l} {op} {r}"),
            Cond::BoolVar(name) => f.write_str(name),
            Cond::Not(c) => write!(f, "!({c})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

// `min_prec` is the binding strength the context demands; anything weaker
// gets parenthesised.
fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    match e {
        Expr::Const(v) => write!(f, "{v}"),
        Expr::Var(name) | Expr::FieldRead(name) => f.write_str(name),
        Expr::ArrayRead(name, idx) => write!(f, "{name}[{idx}]"),
        Expr::ArrayLen(name) => write!(f, "len({name})"),
        Expr::Neg(inner) => write!(f, "-({inner})"),
        Expr::Bin(op, l, r) => {
            let prec = op.precedence();
            if prec < min_prec {
                f.write_char('(')?;
            }
            write_expr(f, l, prec)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, r, prec + 1)?;
            if prec < min_prec {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}
