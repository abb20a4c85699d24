//! Bundled benchmark units and their golden traces.
//!
//! A golden file sits beside its unit and records, for one seed test, the
//! outcome, the observed path condition and every synthesized alternative:
//!
//! ```text
//! unit sample_class.tu
//! args 0 0 0
//! outcome returned null
//! observed
//!   a.length > 0
//! alternative
//!   a.length <= 0
//! ```

use std::fmt::{self, Write};

use thiserror::Error;

use crate::concolic::{step_budgeted_run, OutcomeKind, ReturnToken, TestCase, DEFAULT_STEP_LIMIT};
use crate::ir::{parse_unit, UnitDef};

/// A unit shipped with the library: file name and source text.
#[derive(Debug, Clone, Copy)]
pub struct CorpusUnit {
    pub file: &'static str,
    pub source: &'static str,
}

impl CorpusUnit {
    pub fn parse(&self) -> UnitDef {
        parse_unit(self.source).unwrap_or_else(|e| panic!("bundled unit {} is invalid: {e}", self.file))
    }
}

pub const UNITS: [CorpusUnit; 4] = [
    CorpusUnit {
        file: "sample_class.tu",
        source: include_str!("../../../corpus/sample_class.tu"),
    },
    CorpusUnit {
        file: "straight_line.tu",
        source: include_str!("../../../corpus/straight_line.tu"),
    },
    CorpusUnit {
        file: "single_loop.tu",
        source: include_str!("../../../corpus/single_loop.tu"),
    },
    CorpusUnit {
        file: "nested_guard.tu",
        source: include_str!("../../../corpus/nested_guard.tu"),
    },
];

/// Golden files: name and text.
pub const GOLDENS: [(&str, &str); 4] = [
    ("sample_class.zeros.golden", include_str!("../../../corpus/sample_class.zeros.golden")),
    ("sample_class.a0_123.golden", include_str!("../../../corpus/sample_class.a0_123.golden")),
    ("straight_line.zeros.golden", include_str!("../../../corpus/straight_line.zeros.golden")),
    ("single_loop.yes.golden", include_str!("../../../corpus/single_loop.yes.golden")),
];

pub fn unit(file: &str) -> Option<CorpusUnit> {
    UNITS.iter().copied().find(|u| u.file == file)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenCase {
    pub unit_file: String,
    pub args: Vec<i64>,
    pub outcome: String,
    pub observed: Vec<String>,
    pub alternatives: Vec<Vec<String>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GoldenError {
    #[error("golden line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("{0}")]
    Execution(String),
    #[error("mismatch in {section}: expected `{expected}`, got `{actual}`")]
    Diff {
        section: String,
        expected: String,
        actual: String,
    },
}

impl GoldenCase {
    pub fn parse(text: &str) -> Result<GoldenCase, GoldenError> {
        let mut case = GoldenCase {
            unit_file: String::new(),
            args: Vec::new(),
            outcome: String::new(),
            observed: Vec::new(),
            alternatives: Vec::new(),
        };
        let mut in_observed = false;
        for (n, raw) in text.lines().enumerate() {
            let bad = |msg: &str| GoldenError::Malformed {
                line: n + 1,
                msg: msg.to_string(),
            };
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            if let Some(clause) = raw.strip_prefix("  ") {
                let clause = clause.trim().to_string();
                match case.alternatives.last_mut() {
                    Some(alt) if !in_observed => alt.push(clause),
                    _ if in_observed => case.observed.push(clause),
                    _ => return Err(bad("clause outside a section")),
                }
                continue;
            }
            let (key, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            match key {
                "unit" => case.unit_file = rest.trim().to_string(),
                "args" => {
                    case.args = rest
                        .split_whitespace()
                        .map(|a| a.parse().map_err(|_| bad("bad argument")))
                        .collect::<Result<_, _>>()?
                }
                "outcome" => case.outcome = rest.trim().to_string(),
                "observed" => in_observed = true,
                "alternative" => {
                    in_observed = false;
                    case.alternatives.push(Vec::new());
                }
                _ => return Err(bad("unknown key")),
            }
        }
        Ok(case)
    }

    /// Runs the seed test and records what happened.
    pub fn regenerate(unit_file: &str, args: Vec<i64>) -> Result<GoldenCase, GoldenError> {
        let u = unit(unit_file)
            .ok_or_else(|| GoldenError::UnknownUnit(unit_file.to_string()))?
            .parse();
        let run = step_budgeted_run(&u, &TestCase::seed(args.clone()), DEFAULT_STEP_LIMIT)
            .map_err(|e| GoldenError::Execution(e.to_string()))?;
        let mut case = GoldenCase {
            unit_file: unit_file.to_string(),
            args,
            outcome: "ctor threw".into(),
            observed: Vec::new(),
            alternatives: Vec::new(),
        };
        if let Some(out) = run.outcome {
            case.outcome = outcome_text(&out.kind);
            case.observed = out.observed_pc.clauses().iter().map(|c| c.to_string()).collect();
            case.alternatives = out
                .observed_pc
                .synthesize_alternatives()
                .iter()
                .map(|a| a.clauses().iter().map(|c| c.to_string()).collect())
                .collect();
        }
        Ok(case)
    }
}

pub fn outcome_text(kind: &OutcomeKind) -> String {
    match kind {
        OutcomeKind::Returned(ReturnToken::Int(v)) => format!("returned {v}"),
        OutcomeKind::Returned(ReturnToken::Null) => "returned null".into(),
        OutcomeKind::Returned(ReturnToken::Str(s)) => format!("returned \"{s}\""),
        OutcomeKind::Returned(ReturnToken::Void) => "returned".into(),
        OutcomeKind::AssertionViolated => "assertion violated".into(),
        OutcomeKind::Threw => "threw".into(),
    }
}

impl fmt::Display for GoldenCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "unit {}", self.unit_file)?;
        let mut args = String::new();
        for a in &self.args {
            write!(args, " {a}")?;
        }
        writeln!(f, "args{args}")?;
        writeln!(f, "outcome {}", self.outcome)?;
        writeln!(f, "observed")?;
        for c in &self.observed {
            writeln!(f, "  {c}")?;
        }
        for alt in &self.alternatives {
            writeln!(f, "alternative")?;
            for c in alt {
                writeln!(f, "  {c}")?;
            }
        }
        Ok(())
    }
}

/// Re-executes the case and compares clause by clause, reporting the first
/// mismatch.
pub fn verify_golden(case: &GoldenCase) -> Result<(), GoldenError> {
    let actual = GoldenCase::regenerate(&case.unit_file, case.args.clone())?;
    let diff = |section: String, e: Option<&String>, a: Option<&String>| GoldenError::Diff {
        section,
        expected: e.cloned().unwrap_or_else(|| "<nothing>".into()),
        actual: a.cloned().unwrap_or_else(|| "<nothing>".into()),
    };
    if case.outcome != actual.outcome {
        return Err(diff("outcome".into(), Some(&case.outcome), Some(&actual.outcome)));
    }
    let first_mismatch = |section: String, e: &[String], a: &[String]| {
        (0..e.len().max(a.len()))
            .find(|&i| e.get(i) != a.get(i))
            .map(|i| diff(format!("{section}, clause {}", i + 1), e.get(i), a.get(i)))
    };
    if let Some(d) = first_mismatch("observed".into(), &case.observed, &actual.observed) {
        return Err(d);
    }
    let empty = Vec::new();
    for i in 0..case.alternatives.len().max(actual.alternatives.len()) {
        let e = case.alternatives.get(i).unwrap_or(&empty);
        let a = actual.alternatives.get(i).unwrap_or(&empty);
        if let Some(d) = first_mismatch(format!("alternative {}", i + 1), e, a) {
            return Err(d);
        }
    }
    Ok(())
}
