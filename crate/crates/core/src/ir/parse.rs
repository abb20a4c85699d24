use thiserror::Error;

use super::{
    validate, ArithOp, CmpOp, Cond, Expr, FieldDecl, FieldKind, LValue, ReturnValue, Stmt,
    UnitDef, Violation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("semantic error: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest first so `<=` wins over `<`.
const PUNCTS: [&str; 23] = [
    "<=", ">=", "==", "!=", "&&", "(", ")", "{", "}", "[", "]", ";", ",", ":", "=", "+", "-",
    "*", "<", ">", "!", ".", "@",
];

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - begin;
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - begin;
            let text: String = chars[begin..i].iter().collect();
            let value = text
                .parse::<u64>()
                .map_err(|_| err(start_line, start_col, format!("integer literal `{text}` out of range")))?;
            out.push(Token {
                tok: Tok::Int(value),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c == '"' {
            let begin = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(start_line, start_col, "unterminated string literal".into()));
            }
            let s: String = chars[begin..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push(Token {
                tok: Tok::Str(s),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token {
                    tok: Tok::Punct(p),
                    line: start_line,
                    col: start_col,
                });
            }
            None => return Err(err(start_line, start_col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    pub(crate) fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", describe(self.peek()))))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }
}

pub(crate) fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

const KEYWORDS: [&str; 15] = [
    "unit", "fields", "ctor", "method", "int", "if", "else", "while", "assert", "throw",
    "return", "null", "len", "true", "false",
];

/// Parses and validates one unit from its textual form.
pub fn parse_unit(source: &str) -> Result<UnitDef, ParseError> {
    let mut p = UnitParser {
        cur: Cursor::new(lex(source)?),
        fields: Vec::new(),
    };
    let unit = p.unit()?;
    let violations = validate(&unit);
    if violations.is_empty() {
        Ok(unit)
    } else {
        Err(ParseError::Semantic(violations))
    }
}

#[cfg(test)]
/// Parses without running validation; used by the validator's own tests.
pub(crate) fn parse_unit_unchecked(source: &str) -> Result<UnitDef, ParseError> {
    let mut p = UnitParser {
        cur: Cursor::new(lex(source)?),
        fields: Vec::new(),
    };
    p.unit()
}

struct UnitParser {
    cur: Cursor,
    fields: Vec<FieldDecl>,
}

impl UnitParser {
    fn unit(&mut self) -> Result<UnitDef, ParseError> {
        self.cur.expect_keyword("unit")?;
        let name = self.cur.expect_ident()?;
        self.cur.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.cur.is_punct(")") {
            loop {
                params.push(self.cur.expect_ident()?);
                self.cur.expect_punct(":")?;
                self.cur.expect_keyword("int")?;
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.cur.expect_punct(")")?;
        self.cur.expect_punct("{")?;
        if self.cur.is_keyword("fields") {
            self.cur.bump();
            self.cur.expect_punct("{")?;
            while !self.cur.is_punct("}") {
                let fname = self.cur.expect_ident()?;
                self.cur.expect_punct(":")?;
                self.cur.expect_keyword("int")?;
                let kind = if self.cur.eat_punct("[") {
                    self.cur.expect_punct("]")?;
                    FieldKind::IntArray
                } else {
                    FieldKind::Int
                };
                self.cur.expect_punct(";")?;
                self.fields.push(FieldDecl { name: fname, kind });
            }
            self.cur.expect_punct("}")?;
        }
        self.cur.expect_keyword("ctor")?;
        let ctor_body = self.block()?;
        self.cur.expect_keyword("method")?;
        let method_body = self.block()?;
        self.cur.expect_punct("}")?;
        if !self.cur.at_eof() {
            return Err(self.cur.error(format!(
                "unexpected {} after unit",
                describe(self.cur.peek())
            )));
        }
        let mut unit = UnitDef {
            name,
            params,
            fields: std::mem::take(&mut self.fields),
            ctor_body,
            method_body,
        };
        unit.renumber_branches();
        Ok(unit)
    }

    fn is_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.cur.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.cur.is_punct("}") {
            if self.cur.at_eof() {
                return Err(self.cur.error("unterminated block"));
            }
            out.push(self.stmt()?);
        }
        self.cur.expect_punct("}")?;
        Ok(out)
    }

    /// `;` terminates simple statements; it may be omitted before `}`.
    fn end_simple(&mut self) -> Result<(), ParseError> {
        if self.cur.eat_punct(";") || self.cur.is_punct("}") {
            Ok(())
        } else {
            Err(self.cur.error(format!(
                "expected `;`, found {}",
                describe(self.cur.peek())
            )))
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.cur.is_keyword("if") {
            return self.if_stmt();
        }
        if self.cur.is_keyword("while") {
            self.cur.bump();
            let cond = self.paren_cond()?;
            let body = self.block()?;
            return Ok(Stmt::While { id: 0, cond, body });
        }
        if self.cur.is_keyword("assert") {
            self.cur.bump();
            let cond = self.paren_cond()?;
            self.end_simple()?;
            return Ok(Stmt::Assert { id: 0, cond });
        }
        if self.cur.is_keyword("throw") {
            self.cur.bump();
            self.end_simple()?;
            return Ok(Stmt::Throw);
        }
        if self.cur.is_keyword("return") {
            self.cur.bump();
            let value = match self.cur.peek().clone() {
                Tok::Ident(s) if s == "null" => {
                    self.cur.bump();
                    ReturnValue::Null
                }
                Tok::Str(s) => {
                    self.cur.bump();
                    ReturnValue::Str(s)
                }
                _ => ReturnValue::Expr(self.expr()?),
            };
            self.end_simple()?;
            return Ok(Stmt::Return(value));
        }
        let name = self.cur.expect_ident()?;
        let target = if self.cur.eat_punct("[") {
            let idx = self.expr()?;
            self.cur.expect_punct("]")?;
            LValue::Cell(name, idx)
        } else {
            LValue::Var(name)
        };
        self.cur.expect_punct("=")?;
        let stmt = match target {
            LValue::Var(name) if self.cur.is_punct("[") => {
                self.cur.bump();
                let mut elems = Vec::new();
                if !self.cur.is_punct("]") {
                    loop {
                        elems.push(self.expr()?);
                        if !self.cur.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.cur.expect_punct("]")?;
                Stmt::ArrayInit { field: name, elems }
            }
            target => Stmt::Assign {
                target,
                value: self.expr()?,
            },
        };
        self.end_simple()?;
        Ok(stmt)
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.cur.expect_keyword("if")?;
        let cond = self.paren_cond()?;
        let then_block = self.block()?;
        let else_block = if self.cur.is_keyword("else") {
            self.cur.bump();
            if self.cur.is_keyword("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If {
            id: 0,
            cond,
            then_block,
            else_block,
        })
    }

    fn paren_cond(&mut self) -> Result<Cond, ParseError> {
        self.cur.expect_punct("(")?;
        let c = self.cond()?;
        self.cur.expect_punct(")")?;
        Ok(c)
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        if self.cur.eat_punct("!") {
            return Ok(Cond::Not(Box::new(self.cond()?)));
        }
        if self.cur.is_keyword("true") || self.cur.is_keyword("false") {
            let truth = self.cur.is_keyword("true");
            self.cur.bump();
            let op = if truth { CmpOp::Eq } else { CmpOp::Ne };
            return Ok(Cond::Cmp(op, Expr::Const(1), Expr::Const(1)));
        }
        // `( cond )` versus `( expr ) ...`: a condition is always closed by
        // `)`, so a parenthesised condition must be followed by another `)`.
        if self.cur.is_punct("(") {
            let save = self.cur.pos;
            self.cur.bump();
            if let Ok(inner) = self.cond() {
                if self.cur.eat_punct(")") && self.cur.is_punct(")") {
                    return Ok(inner);
                }
            }
            self.cur.pos = save;
        }
        let lhs = self.expr()?;
        if let Some(op) = self.cmp_op() {
            let rhs = self.expr()?;
            return Ok(Cond::Cmp(op, lhs, rhs));
        }
        match lhs {
            Expr::Var(name) | Expr::FieldRead(name) => Ok(Cond::BoolVar(name)),
            _ => Err(self.cur.error("expected comparison operator")),
        }
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.cur.peek() {
            Tok::Punct(p) => CmpOp::from_symbol(p)?,
            _ => return None,
        };
        self.cur.bump();
        Some(op)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.cur.eat_punct("+") {
                ArithOp::Add
            } else if self.cur.eat_punct("-") {
                ArithOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.cur.eat_punct("*") {
            let rhs = self.unary()?;
            lhs = Expr::Bin(ArithOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.cur.eat_punct("-") {
            // A minus directly on a literal is part of the literal.
            if let Tok::Int(v) = *self.cur.peek() {
                self.cur.bump();
                return negative_literal(v)
                    .map(Expr::Const)
                    .ok_or_else(|| self.cur.error("integer literal out of range"));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                i64::try_from(v)
                    .map(Expr::Const)
                    .map_err(|_| self.cur.error("integer literal out of range"))
            }
            Tok::Punct("(") => {
                self.cur.bump();
                let e = self.expr()?;
                self.cur.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "len" => {
                self.cur.bump();
                self.cur.expect_punct("(")?;
                let name = self.cur.expect_ident()?;
                self.cur.expect_punct(")")?;
                Ok(Expr::ArrayLen(name))
            }
            Tok::Ident(_) => {
                let name = self.cur.expect_ident()?;
                if self.cur.eat_punct("[") {
                    let idx = self.expr()?;
                    self.cur.expect_punct("]")?;
                    Ok(Expr::ArrayRead(name, Box::new(idx)))
                } else if self.is_field(&name) {
                    Ok(Expr::FieldRead(name))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(self.cur.error(format!("expected expression, found {}", describe(&other)))),
        }
    }
}

pub(crate) fn negative_literal(magnitude: u64) -> Option<i64> {
    if magnitude == i64::MIN.unsigned_abs() {
        Some(i64::MIN)
    } else {
        i64::try_from(magnitude).ok().map(|v| -v)
    }
}
