//! Concrete execution of a unit with symbolic shadowing of the target method.
//!
//! The constructor runs purely concretely. Once it completes, every field
//! value is paired with its symbol and the method runs with both: the
//! concrete value decides control flow, the symbolic value records which
//! clause the taken direction implies.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::ir::{ArithOp, BranchId, CmpOp, Cond, Expr, FieldKind, LValue, ReturnValue, Stmt, UnitDef};
use crate::symcore::{Clause, ConcreteFieldState, PathCondition, SymExpr};

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Seed,
    GeneratedFor(PathCondition),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub args: Vec<i64>,
    pub provenance: Provenance,
}

impl TestCase {
    pub fn seed(args: Vec<i64>) -> TestCase {
        TestCase {
            args,
            provenance: Provenance::Seed,
        }
    }
}

/// What the method produced when it returned normally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnToken {
    Int(i64),
    Null,
    Str(String),
    /// Fell off the end of the method body.
    Void,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Returned(ReturnToken),
    AssertionViolated,
    Threw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOutcome {
    pub kind: OutcomeKind,
    pub observed_pc: PathCondition,
    pub steps: u64,
    /// Branch directions taken in the method: `(branch id, direction)`.
    pub coverage: BTreeSet<(BranchId, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CtorOutcome {
    Built(ConcreteFieldState),
    Threw,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("step limit of {0} exceeded")]
    Divergence(u64),
    #[error("expected {expected} constructor arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Result of running constructor and method under one shared step budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetedRun {
    pub state: Option<ConcreteFieldState>,
    pub outcome: Option<ExecutionOutcome>,
    pub ctor_steps: u64,
}

pub fn execute_constructor(unit: &UnitDef, test: &TestCase) -> Result<CtorOutcome, ExecError> {
    run_ctor(unit, &test.args, DEFAULT_STEP_LIMIT).map(|(o, _)| o)
}

pub fn execute_method_concolic(
    unit: &UnitDef,
    state: &ConcreteFieldState,
) -> Result<ExecutionOutcome, ExecError> {
    run_method(unit, state, DEFAULT_STEP_LIMIT)
}

pub fn step_budgeted_run(
    unit: &UnitDef,
    test: &TestCase,
    step_limit: u64,
) -> Result<BudgetedRun, ExecError> {
    let (ctor, ctor_steps) = run_ctor(unit, &test.args, step_limit)?;
    match ctor {
        CtorOutcome::Threw => Ok(BudgetedRun {
            state: None,
            outcome: None,
            ctor_steps,
        }),
        CtorOutcome::Built(state) => {
            let outcome = run_method(unit, &state, step_limit - ctor_steps)
                .map_err(|_| ExecError::Divergence(step_limit))?;
            Ok(BudgetedRun {
                state: Some(state),
                outcome: Some(outcome),
                ctor_steps,
            })
        }
    }
}

/// Runs only the constructor, returning the outcome and the steps it took.
pub fn run_ctor(unit: &UnitDef, args: &[i64], step_limit: u64) -> Result<(CtorOutcome, u64), ExecError> {
    if args.len() != unit.params.len() {
        return Err(ExecError::Arity {
            expected: unit.params.len(),
            got: args.len(),
        });
    }
    let mut m = Machine::new(step_limit, false);
    for f in &unit.fields {
        match f.kind {
            FieldKind::Int => {
                m.scalars.insert(f.name.clone(), Val::conc(0));
            }
            FieldKind::IntArray => {
                m.arrays.insert(f.name.clone(), ArrayVal::concrete(Vec::new()));
            }
        }
    }
    for (p, v) in unit.params.iter().zip(args) {
        m.locals.insert(p.clone(), Val::conc(*v));
    }
    let result = m.block(&unit.ctor_body);
    let steps = m.steps;
    match result {
        Ok(_) => Ok((CtorOutcome::Built(m.into_state()), steps)),
        Err(Stop::Threw) | Err(Stop::AssertFailed) => Ok((CtorOutcome::Threw, steps)),
        Err(Stop::Diverged) => Err(ExecError::Divergence(step_limit)),
    }
}

fn run_method(
    unit: &UnitDef,
    state: &ConcreteFieldState,
    step_limit: u64,
) -> Result<ExecutionOutcome, ExecError> {
    let mut m = Machine::new(step_limit, true);
    for (name, v) in &state.scalars {
        m.scalars.insert(
            name.clone(),
            Val {
                conc: *v,
                sym: Some(SymExpr::Field(name.clone())),
            },
        );
    }
    for (name, cells) in &state.arrays {
        m.arrays.insert(name.clone(), ArrayVal::symbolic(name, cells));
    }
    let kind = match m.block(&unit.method_body) {
        Ok(Flow::Return(token)) => OutcomeKind::Returned(token),
        Ok(Flow::Normal) => OutcomeKind::Returned(ReturnToken::Void),
        Err(Stop::AssertFailed) => OutcomeKind::AssertionViolated,
        Err(Stop::Threw) => OutcomeKind::Threw,
        Err(Stop::Diverged) => return Err(ExecError::Divergence(step_limit)),
    };
    Ok(ExecutionOutcome {
        kind,
        observed_pc: PathCondition::observed(m.clauses),
        steps: m.steps,
        coverage: m.coverage,
    })
}

#[derive(Debug, Clone)]
struct Val {
    conc: i64,
    sym: Option<SymExpr>,
}

impl Val {
    fn conc(v: i64) -> Val {
        Val { conc: v, sym: None }
    }

    fn sym_or_const(&self) -> SymExpr {
        self.sym.clone().unwrap_or(SymExpr::Const(self.conc))
    }
}

#[derive(Debug, Clone)]
struct ArrayVal {
    cells: Vec<Val>,
    len_sym: Option<SymExpr>,
}

impl ArrayVal {
    fn concrete(values: Vec<i64>) -> ArrayVal {
        ArrayVal {
            cells: values.into_iter().map(Val::conc).collect(),
            len_sym: None,
        }
    }

    fn symbolic(name: &str, values: &[i64]) -> ArrayVal {
        ArrayVal {
            cells: values
                .iter()
                .enumerate()
                .map(|(i, v)| Val {
                    conc: *v,
                    sym: Some(SymExpr::Cell(name.to_string(), i as i64)),
                })
                .collect(),
            len_sym: Some(SymExpr::Len(name.to_string())),
        }
    }
}

enum Flow {
    Normal,
    Return(ReturnToken),
}

enum Stop {
    Threw,
    AssertFailed,
    Diverged,
}

struct Machine {
    scalars: BTreeMap<String, Val>,
    arrays: BTreeMap<String, ArrayVal>,
    locals: BTreeMap<String, Val>,
    clauses: Vec<Clause>,
    coverage: BTreeSet<(BranchId, bool)>,
    steps: u64,
    limit: u64,
    tracing: bool,
}

impl Machine {
    fn new(limit: u64, tracing: bool) -> Machine {
        Machine {
            scalars: BTreeMap::new(),
            arrays: BTreeMap::new(),
            locals: BTreeMap::new(),
            clauses: Vec::new(),
            coverage: BTreeSet::new(),
            steps: 0,
            limit,
            tracing,
        }
    }

    fn into_state(self) -> ConcreteFieldState {
        ConcreteFieldState {
            scalars: self.scalars.into_iter().map(|(k, v)| (k, v.conc)).collect(),
            arrays: self
                .arrays
                .into_iter()
                .map(|(k, a)| (k, a.cells.into_iter().map(|v| v.conc).collect()))
                .collect(),
        }
    }

    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(Stop::Diverged)
        } else {
            Ok(())
        }
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Flow, Stop> {
        for stmt in body {
            if let Flow::Return(t) = self.stmt(stmt)? {
                return Ok(Flow::Return(t));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, Stop> {
        self.tick()?;
        match stmt {
            Stmt::Assign { target, value } => {
                let v = self.expr(value)?;
                match target {
                    LValue::Var(name) => match self.scalars.get_mut(name) {
                        Some(slot) => *slot = v,
                        None => {
                            self.locals.insert(name.clone(), v);
                        }
                    },
                    LValue::Cell(name, idx) => {
                        let i = self.expr(idx)?.conc;
                        let cell = self
                            .arrays
                            .get_mut(name)
                            .and_then(|a| usize::try_from(i).ok().and_then(|i| a.cells.get_mut(i)))
                            .ok_or(Stop::Threw)?;
                        *cell = v;
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::ArrayInit { field, elems } => {
                let cells = elems.iter().map(|e| self.expr(e)).collect::<Result<Vec<_>, _>>()?;
                self.arrays.insert(
                    field.clone(),
                    ArrayVal {
                        cells,
                        len_sym: None,
                    },
                );
                Ok(Flow::Normal)
            }
            Stmt::If {
                id,
                cond,
                then_block,
                else_block,
            } => {
                if self.branch(*id, cond)? {
                    self.block(then_block)
                } else {
                    self.block(else_block)
                }
            }
            Stmt::While { id, cond, body } => {
                while self.branch(*id, cond)? {
                    if let Flow::Return(t) = self.block(body)? {
                        return Ok(Flow::Return(t));
                    }
                    self.tick()?;
                }
                Ok(Flow::Normal)
            }
            Stmt::Assert { id, cond } => {
                if self.branch(*id, cond)? {
                    Ok(Flow::Normal)
                } else {
                    Err(Stop::AssertFailed)
                }
            }
            Stmt::Throw => Err(Stop::Threw),
            Stmt::Return(value) => Ok(Flow::Return(match value {
                ReturnValue::Null => ReturnToken::Null,
                ReturnValue::Str(s) => ReturnToken::Str(s.clone()),
                ReturnValue::Expr(e) => ReturnToken::Int(self.expr(e)?.conc),
            })),
        }
    }

    /// Evaluates a branch condition, recording coverage and, when the
    /// condition mentions a field symbol, the clause for the taken direction.
    fn branch(&mut self, id: BranchId, cond: &Cond) -> Result<bool, Stop> {
        let (taken, shape) = self.cond(cond)?;
        if self.tracing {
            self.coverage.insert((id, taken));
            if let Some((op, l, r)) = shape {
                let op = if taken { op } else { op.negated() };
                self.clauses.push(Clause::new(op, l, r));
            }
        }
        Ok(taken)
    }

    /// Returns the concrete truth value and, when symbolic, the comparison
    /// that is equivalent to the condition being true.
    fn cond(&mut self, cond: &Cond) -> Result<(bool, Option<(CmpOp, SymExpr, SymExpr)>), Stop> {
        match cond {
            Cond::Cmp(op, l, r) => {
                let l = self.expr(l)?;
                let r = self.expr(r)?;
                let holds = op.holds(l.conc, r.conc);
                let shape = if l.sym.is_some() || r.sym.is_some() {
                    Some((*op, l.sym_or_const(), r.sym_or_const()))
                } else {
                    None
                };
                Ok((holds, shape))
            }
            Cond::BoolVar(name) => {
                let v = self.read_scalar(name);
                let shape = v.sym.as_ref().map(|s| (CmpOp::Ne, s.clone(), SymExpr::Const(0)));
                Ok((v.conc != 0, shape))
            }
            Cond::Not(inner) => {
                let (holds, shape) = self.cond(inner)?;
                Ok((!holds, shape.map(|(op, l, r)| (op.negated(), l, r))))
            }
        }
    }

    fn read_scalar(&self, name: &str) -> Val {
        self.scalars
            .get(name)
            .or_else(|| self.locals.get(name))
            .cloned()
            // Validation rules out unknown names; an unassigned local reads as 0.
            .unwrap_or(Val::conc(0))
    }

    fn expr(&mut self, e: &Expr) -> Result<Val, Stop> {
        Ok(match e {
            Expr::Const(v) => Val::conc(*v),
            Expr::Var(name) | Expr::FieldRead(name) => self.read_scalar(name),
            Expr::ArrayRead(name, idx) => {
                let i = self.expr(idx)?.conc;
                self.arrays
                    .get(name)
                    .and_then(|a| usize::try_from(i).ok().and_then(|i| a.cells.get(i)))
                    .cloned()
                    .ok_or(Stop::Threw)?
            }
            Expr::ArrayLen(name) => match self.arrays.get(name) {
                Some(a) => Val {
                    conc: a.cells.len() as i64,
                    sym: a.len_sym.clone(),
                },
                None => Val::conc(0),
            },
            Expr::Bin(op, l, r) => {
                let l = self.expr(l)?;
                let r = self.expr(r)?;
                combine(*op, l, r)
            }
            Expr::Neg(inner) => {
                let v = self.expr(inner)?;
                combine(ArithOp::Sub, Val::conc(0), v)
            }
        })
    }
}

fn combine(op: ArithOp, l: Val, r: Val) -> Val {
    let conc = op.apply(l.conc, r.conc);
    let sym = if l.sym.is_some() || r.sym.is_some() {
        Some(SymExpr::bin(op, l.sym_or_const(), r.sym_or_const()))
    } else {
        None
    };
    Val { conc, sym }
}
