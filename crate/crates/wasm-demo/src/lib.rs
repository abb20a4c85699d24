//! Browser bindings: compare two path conditions by fingerprint, trace a
//! unit on concrete arguments, and race the two selection modes on a
//! simulated clock.

use std::time::Duration;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pathsel_core::concolic::{step_budgeted_run, TestCase, DEFAULT_STEP_LIMIT};
use pathsel_core::corpus::{self, outcome_text};
use pathsel_core::engine::{self, Clock, EngineConfig, Mode};
use pathsel_core::fingerprint::{fingerprint_of, jaccard, HashFamily};
use pathsel_core::ir::parse_unit;
use pathsel_core::slicer::slice;
use pathsel_core::symcore::PathCondition;

#[derive(Serialize)]
pub struct Similarity {
    pub jaccard: f64,
    pub exact: String,
    pub left_bits: u32,
    pub right_bits: u32,
    pub left_dump: String,
    pub right_dump: String,
}

pub fn similarity_of(left: &str, right: &str) -> Result<Similarity, String> {
    let family = HashFamily::default();
    let fp = |text: &str| {
        PathCondition::parse(text)
            .map(|pc| fingerprint_of(&pc, &family))
            .map_err(|e| e.to_string())
    };
    let (l, r) = (fp(left)?, fp(right)?);
    let j = jaccard(&l, &r);
    Ok(Similarity {
        jaccard: j.to_f64(),
        exact: j.to_string(),
        left_bits: l.count_ones(),
        right_bits: r.count_ones(),
        left_dump: l.debug_dump(),
        right_dump: r.debug_dump(),
    })
}

#[derive(Serialize)]
pub struct Trace {
    pub outcome: String,
    pub observed: Vec<String>,
    /// Each alternative with its slice.
    pub alternatives: Vec<(String, String)>,
}

pub fn trace_of(source: &str, args: &str) -> Result<Trace, String> {
    let unit = parse_unit(source).map_err(|e| e.to_string())?;
    let args = args
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|a| !a.is_empty())
        .map(|a| a.parse::<i64>().map_err(|_| format!("not an integer: {a}")))
        .collect::<Result<Vec<_>, _>>()?;
    let run = step_budgeted_run(&unit, &TestCase::seed(args), DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
    let Some(out) = run.outcome else {
        return Ok(Trace {
            outcome: "ctor threw".into(),
            observed: Vec::new(),
            alternatives: Vec::new(),
        });
    };
    Ok(Trace {
        outcome: outcome_text(&out.kind),
        observed: out.observed_pc.clauses().iter().map(|c| c.to_string()).collect(),
        alternatives: out
            .observed_pc
            .synthesize_alternatives()
            .iter()
            .map(|a| (a.dedup_key(), slice(a).dedup_key()))
            .collect(),
    })
}

#[derive(Serialize)]
pub struct Race {
    pub knn: [u64; 2],
    pub fifo: [u64; 2],
    pub knn_picks: Vec<(String, String)>,
}

/// Both modes with one worker on a simulated clock of 2000 evaluations per
/// second. Counts are `[feasible, infeasible]`.
pub fn race_of(source: &str, seed: u64, budget_s: u32) -> Result<Race, String> {
    let unit = parse_unit(source).map_err(|e| e.to_string())?;
    let config = |mode| EngineConfig {
        mode,
        master_seed: seed,
        workers: 1,
        time_budget: Duration::from_secs(budget_s.max(1).into()),
        clock: Clock::Virtual { evals_per_sec: 2000 },
        ..EngineConfig::default()
    };
    let knn = engine::run(&unit, &config(Mode::Knn));
    let fifo = engine::run(&unit, &config(Mode::Fifo));
    let mut picked: Vec<_> = knn.pcs.iter().filter(|p| p.picked_at.is_some()).collect();
    picked.sort_by(|a, b| a.picked_at.partial_cmp(&b.picked_at).unwrap());
    Ok(Race {
        knn: [knn.counters.feasible_analyzed, knn.counters.infeasible_analyzed],
        fifo: [fifo.counters.feasible_analyzed, fifo.counters.infeasible_analyzed],
        knn_picks: picked
            .iter()
            .map(|p| (format!("{:?}", p.outcome).to_lowercase(), p.sliced_key.clone()))
            .collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("serializable")).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn similarity(left: &str, right: &str) -> Result<String, JsError> {
    to_js(similarity_of(left, right))
}

#[wasm_bindgen]
pub fn trace(source: &str, args: &str) -> Result<String, JsError> {
    to_js(trace_of(source, args))
}

#[wasm_bindgen]
pub fn race(source: &str, seed: u32, budget_s: u32) -> Result<String, JsError> {
    to_js(race_of(source, seed.into(), budget_s))
}

#[wasm_bindgen]
pub fn bundled_unit(file: &str) -> Option<String> {
    corpus::unit(file).map(|u| u.source.to_string())
}
