//! The test generation loop: execute tests, turn their paths into
//! alternative path conditions, choose one, search for inputs reaching it,
//! and feed the verdict back into the classifier.
//!
//! One coordinator owns the pending pool, the training set and the report.
//! Searches run on workers. With [`Clock::Wall`] the workers are threads and
//! budgets are real time. With [`Clock::Virtual`] searches run inline and
//! time is counted in fitness evaluations, which makes whole runs
//! reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write;
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::concolic::{step_budgeted_run, ExecError, TestCase};
use crate::corpus::outcome_text;
use crate::fingerprint::{fingerprint_of, HashFamily, DEFAULT_HASH_SEED};
use crate::generator::{solve_seeded, SearchBudget, SearchConfig, SolveOutcome, SolveReport};
use crate::ir::{BranchId, UnitDef};
use crate::learner::{classify, Classification, TrainingSet, DEFAULT_K, DEFAULT_RECACHE_THRESHOLD};
use crate::selector::{Bucket, BucketProbs, BucketSet, PendingEntry};
use crate::slicer::slice;
use crate::symcore::PathCondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Knn,
    Fifo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Knn => "knn",
            Mode::Fifo => "fifo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    Wall,
    /// Each fitness evaluation costs `1 / evals_per_sec` seconds.
    Virtual { evals_per_sec: u64 },
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineConfig {
    pub mode: Mode,
    #[serde(serialize_with = "secs")]
    pub time_budget: Duration,
    pub workers: usize,
    #[serde(serialize_with = "secs")]
    pub pc_budget: Duration,
    pub recache_threshold: usize,
    pub master_seed: u64,
    pub step_limit: u64,
    pub bucket_probs: BucketProbs,
    /// Bootstrap tests: all zeros plus `seed_tests - 1` random vectors.
    pub seed_tests: usize,
    pub k: usize,
    pub hash_seed: (u64, u64),
    pub clock: Clock,
    /// Search parameters; the budget is replaced by `pc_budget`.
    pub search: SearchConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Knn,
            time_budget: Duration::from_secs(180),
            workers: 2,
            pc_budget: Duration::from_secs(20),
            recache_threshold: DEFAULT_RECACHE_THRESHOLD,
            master_seed: 0,
            step_limit: crate::concolic::DEFAULT_STEP_LIMIT,
            bucket_probs: BucketProbs::default(),
            seed_tests: 3,
            k: DEFAULT_K,
            hash_seed: DEFAULT_HASH_SEED,
            clock: Clock::Wall,
            search: SearchConfig::default(),
        }
    }
}

impl EngineConfig {
    /// Budgets of the original 30 minute study.
    pub fn paper_scale() -> EngineConfig {
        EngineConfig {
            time_budget: Duration::from_secs(30 * 60),
            workers: 5,
            pc_budget: Duration::from_secs(180),
            ..EngineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.time_budget.is_zero() || self.pc_budget.is_zero() {
            return Err("budgets must be positive".into());
        }
        if self.workers == 0 {
            return Err("at least one worker is needed".into());
        }
        if self.k == 0 || self.seed_tests == 0 || self.recache_threshold == 0 || self.step_limit == 0 {
            return Err("k, seed tests, recache threshold and step limit must be positive".into());
        }
        if let Clock::Virtual { evals_per_sec: 0 } = self.clock {
            return Err("virtual clock rate must be positive".into());
        }
        BucketProbs::new(self.bucket_probs.0).map_err(|e| e.to_string())?;
        Ok(())
    }

    fn search_config(&self) -> SearchConfig {
        let budget = match self.clock {
            Clock::Wall => SearchBudget::Wall(self.pc_budget),
            Clock::Virtual { evals_per_sec } => {
                SearchBudget::Evaluations((self.pc_budget.as_secs_f64() * evals_per_sec as f64).ceil() as u64)
            }
        };
        SearchConfig {
            budget,
            step_limit: self.step_limit,
            ..self.search.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PcOutcome {
    Feasible,
    Infeasible,
    Pending,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcRecord {
    pub index: u64,
    pub key: String,
    pub sliced_key: String,
    pub source_test: usize,
    pub enqueued_at: f64,
    pub classification_at_enqueue: Option<Classification>,
    pub classification_at_pick: Option<Classification>,
    pub bucket_at_pick: Option<Bucket>,
    pub picked_at: Option<f64>,
    pub finished_at: Option<f64>,
    pub outcome: PcOutcome,
    pub evaluations: u64,
    pub test: Option<usize>,
}

impl PcRecord {
    pub fn seconds(&self) -> Option<f64> {
        Some(self.finished_at? - self.picked_at?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestRecord {
    pub index: usize,
    pub args: Vec<i64>,
    /// `None` for bootstrap tests, else the record the test was generated for.
    pub target: Option<u64>,
    pub outcome: String,
    pub observed_clauses: usize,
    pub new_alternatives: usize,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Executed { at: f64, test: usize },
    Picked { at: f64, pc: u64 },
    Solved { at: f64, pc: u64, test: usize },
    Exhausted { at: f64, pc: u64 },
    Recached { at: f64, training: usize, reclassified: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Picked path conditions for which inputs were found.
    pub feasible_analyzed: u64,
    /// Picked path conditions whose search ran out of budget.
    pub infeasible_analyzed: u64,
    pub tests_generated: u64,
    pub alternatives_synthesized: u64,
    pub duplicates_suppressed: u64,
    pub label1_from_solves: u64,
    pub label1_from_seeds: u64,
    pub label0_from_exhaustions: u64,
    /// Verdicts withheld because the same key already had the other label.
    pub label_conflicts_avoided: u64,
    pub recaches: u64,
    pub execution_errors: u64,
    pub soundness_violations: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub unit: String,
    pub config: EngineConfig,
    pub counters: Counters,
    pub coverage: Coverage,
    pub elapsed: f64,
    pub pcs: Vec<PcRecord>,
    pub tests: Vec<TestRecord>,
    pub timeline: Vec<Event>,
    /// Training examples in insertion order.
    pub training: Vec<TrainingRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingRecord {
    pub at: f64,
    pub key: String,
    pub label: u8,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per path condition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,key,mode,label,voting,outcome,seconds\n");
        for r in &self.pcs {
            let c = r.classification_at_pick.or(r.classification_at_enqueue);
            let outcome = match r.outcome {
                PcOutcome::Feasible => "feasible",
                PcOutcome::Infeasible => "infeasible",
                PcOutcome::Pending => "pending",
            };
            writeln!(
                out,
                "{},\"{}\",{},{},{},{},{}",
                r.index,
                r.key.replace('"', "\"\""),
                self.config.mode.name(),
                c.map_or(String::new(), |c| c.label.to_string()),
                c.map_or(String::new(), |c| c.voting.to_string()),
                outcome,
                r.seconds().map_or(String::new(), |s| format!("{s:.3}")),
            )
            .expect("string write");
        }
        out
    }
}

struct Job {
    id: u64,
    pc: PathCondition,
    seeds: Vec<Vec<i64>>,
}

struct Done {
    id: u64,
    report: SolveReport,
}

/// Where searches run and how time is read.
trait Executor {
    fn now(&self) -> f64;
    fn in_flight(&self) -> usize;
    fn submit(&mut self, job: Job);
    /// Blocks until some submitted search finishes.
    fn wait(&mut self) -> Done;
}

fn job_rng(master_seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id + 2);
    rng
}

fn run_job(unit: &UnitDef, search: &SearchConfig, master_seed: u64, job: Job) -> Done {
    let mut rng = job_rng(master_seed, job.id);
    Done {
        id: job.id,
        report: solve_seeded(unit, &job.pc, search, &mut rng, &job.seeds),
    }
}

struct VirtualExec<'a> {
    unit: &'a UnitDef,
    search: SearchConfig,
    master_seed: u64,
    evals_per_sec: u64,
    now_evals: u64,
    seq: u64,
    // (finish time in evaluations, submission order)
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    results: BTreeMap<u64, Done>,
}

impl Executor for VirtualExec<'_> {
    fn now(&self) -> f64 {
        self.now_evals as f64 / self.evals_per_sec as f64
    }

    fn in_flight(&self) -> usize {
        self.queue.len()
    }

    fn submit(&mut self, job: Job) {
        let done = run_job(self.unit, &self.search, self.master_seed, job);
        self.seq += 1;
        self.queue.push(Reverse((self.now_evals + done.report.evaluations, self.seq)));
        self.results.insert(self.seq, done);
    }

    fn wait(&mut self) -> Done {
        let Reverse((at, seq)) = self.queue.pop().expect("nothing in flight");
        self.now_evals = at;
        self.results.remove(&seq).expect("result for every submission")
    }
}

struct WallExec {
    started: Instant,
    jobs: mpsc::Sender<Job>,
    done: mpsc::Receiver<Done>,
    in_flight: usize,
}

impl Executor for WallExec {
    fn now(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn in_flight(&self) -> usize {
        self.in_flight
    }

    fn submit(&mut self, job: Job) {
        self.in_flight += 1;
        self.jobs.send(job).expect("workers alive");
    }

    fn wait(&mut self) -> Done {
        let d = self.done.recv().expect("workers alive");
        self.in_flight -= 1;
        d
    }
}

struct Coordinator<'a> {
    unit: &'a UnitDef,
    config: &'a EngineConfig,
    family: HashFamily,
    training: TrainingSet,
    pending: BucketSet,
    /// Picked entries awaiting a search result.
    active: BTreeMap<u64, PendingEntry>,
    seen: BTreeSet<String>,
    pick_rng: ChaCha8Rng,
    covered: BTreeSet<(BranchId, bool)>,
    counters: Counters,
    pcs: Vec<PcRecord>,
    tests: Vec<TestRecord>,
    timeline: Vec<Event>,
    labels: BTreeMap<String, u8>,
    training_log: Vec<TrainingRecord>,
}

impl<'a> Coordinator<'a> {
    fn new(unit: &'a UnitDef, config: &'a EngineConfig) -> Coordinator<'a> {
        let mut pick_rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        pick_rng.set_stream(0);
        Coordinator {
            unit,
            config,
            family: HashFamily::with_seed(config.hash_seed.0, config.hash_seed.1),
            training: TrainingSet::new(),
            pending: BucketSet::default(),
            active: BTreeMap::new(),
            seen: BTreeSet::new(),
            pick_rng,
            covered: BTreeSet::new(),
            counters: Counters::default(),
            pcs: Vec::new(),
            tests: Vec::new(),
            timeline: Vec::new(),
            labels: BTreeMap::new(),
            training_log: Vec::new(),
        }
    }

    fn seed_tests(&self) -> Vec<Vec<i64>> {
        let arity = self.unit.params.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.master_seed);
        rng.set_stream(1);
        let r = self.config.search.fresh_range;
        let mut seeds = vec![vec![0; arity]];
        for _ in 1..self.config.seed_tests {
            seeds.push((0..arity).map(|_| rng.gen_range(-r..=r)).collect());
        }
        seeds
    }

    /// Adds a training example unless the key already has a label. Returns
    /// whether the example was added.
    fn learn(&mut self, key: String, fp: crate::fingerprint::Fingerprint, label: u8, now: f64) -> bool {
        match self.labels.get(&key) {
            Some(&l) if l == label => return false,
            Some(_) => {
                self.counters.label_conflicts_avoided += 1;
                return false;
            }
            None => {}
        }
        self.labels.insert(key.clone(), label);
        self.training_log.push(TrainingRecord { at: now, key, label });
        self.training.add_example(fp, label);
        if self.training.needs_recache(self.config.recache_threshold) {
            self.recache(now);
        }
        true
    }

    fn recache(&mut self, now: f64) {
        let mut entries = self.pending.drain_all();
        for e in &mut entries {
            e.classification = Some(classify(&e.fp, &self.training, self.config.k));
        }
        let reclassified = entries.len();
        for e in entries {
            self.pending.insert(e);
        }
        self.training.mark_recached();
        self.counters.recaches += 1;
        self.timeline.push(Event::Recached {
            at: now,
            training: self.training.len(),
            reclassified,
        });
    }

    /// Executes a test, records it, learns from its path and enqueues novel
    /// alternatives. Returns the test index.
    fn execute(&mut self, test: &TestCase, target: Option<u64>, now: f64) -> usize {
        let index = self.tests.len();
        self.counters.tests_generated += 1;
        let mut record = TestRecord {
            index,
            args: test.args.clone(),
            target,
            outcome: String::new(),
            observed_clauses: 0,
            new_alternatives: 0,
            at: now,
        };
        let outcome = match step_budgeted_run(self.unit, test, self.config.step_limit) {
            Err(ExecError::Divergence(_)) => {
                self.counters.execution_errors += 1;
                record.outcome = "diverged".into();
                None
            }
            Err(e) => {
                self.counters.execution_errors += 1;
                record.outcome = e.to_string();
                None
            }
            Ok(run) => match run.outcome {
                None => {
                    record.outcome = "ctor threw".into();
                    None
                }
                Some(o) => {
                    record.outcome = outcome_text(&o.kind);
                    Some(o)
                }
            },
        };
        if let Some(o) = outcome {
            self.covered.extend(o.coverage.iter().copied());
            record.observed_clauses = o.observed_pc.len();
            // The new path must start with exactly the clauses it was generated for.
            if let Some(id) = target {
                let want = self.active[&id].pc.clauses();
                let got = o.observed_pc.clauses();
                if got.len() < want.len() || got[..want.len()] != *want {
                    self.counters.soundness_violations += 1;
                }
            }
            // Paths of bootstrap tests are evidence of feasibility. Generated
            // tests already contributed their sliced target.
            if target.is_none() && !o.observed_pc.is_empty() {
                let fp = fingerprint_of(&o.observed_pc, &self.family);
                if self.learn(o.observed_pc.dedup_key(), fp, 1, now) {
                    self.counters.label1_from_seeds += 1;
                }
            }
            for alt in o.observed_pc.synthesize_alternatives() {
                self.counters.alternatives_synthesized += 1;
                let key = alt.dedup_key();
                if !self.seen.insert(key.clone()) {
                    self.counters.duplicates_suppressed += 1;
                    continue;
                }
                record.new_alternatives += 1;
                self.enqueue(alt, key, index, now);
            }
        }
        self.timeline.push(Event::Executed { at: now, test: index });
        self.tests.push(record);
        index
    }

    fn enqueue(&mut self, pc: PathCondition, key: String, source_test: usize, now: f64) {
        let sliced = slice(&pc);
        let fp = fingerprint_of(&sliced, &self.family);
        let classification = classify(&fp, &self.training, self.config.k);
        let enqueue_no = self.pcs.len() as u64;
        self.pcs.push(PcRecord {
            index: enqueue_no,
            key,
            sliced_key: sliced.dedup_key(),
            source_test,
            enqueued_at: now,
            classification_at_enqueue: Some(classification),
            classification_at_pick: None,
            bucket_at_pick: None,
            picked_at: None,
            finished_at: None,
            outcome: PcOutcome::Pending,
            evaluations: 0,
            test: None,
        });
        self.pending.insert(PendingEntry {
            pc,
            sliced,
            fp,
            classification: Some(classification),
            enqueue_no,
        });
    }

    fn pick(&mut self) -> Option<(Bucket, PendingEntry)> {
        match self.config.mode {
            Mode::Knn => self.pending.pick(&self.config.bucket_probs, &mut self.pick_rng).ok(),
            Mode::Fifo => self.pending.pick_oldest().ok(),
        }
    }

    fn dispatch<E: Executor>(&mut self, exec: &mut E) -> bool {
        let Some((bucket, entry)) = self.pick() else {
            return false;
        };
        let now = exec.now();
        let id = entry.enqueue_no;
        let rec = &mut self.pcs[id as usize];
        rec.classification_at_pick = entry.classification;
        rec.bucket_at_pick = Some(bucket);
        rec.picked_at = Some(now);
        self.timeline.push(Event::Picked { at: now, pc: id });
        let parent = self.tests[rec.source_test].args.clone();
        exec.submit(Job {
            id,
            pc: entry.pc.clone(),
            seeds: vec![parent],
        });
        self.active.insert(id, entry);
        true
    }

    fn absorb(&mut self, done: Done, now: f64) {
        let id = done.id;
        self.counters.evaluations += done.report.evaluations;
        {
            let rec = &mut self.pcs[id as usize];
            rec.finished_at = Some(now);
            rec.evaluations = done.report.evaluations;
        }
        let (key, fp) = {
            let e = &self.active[&id];
            (e.sliced.dedup_key(), e.fp)
        };
        match done.report.outcome {
            SolveOutcome::Solved(test) => {
                self.counters.feasible_analyzed += 1;
                self.pcs[id as usize].outcome = PcOutcome::Feasible;
                if self.learn(key, fp, 1, now) {
                    self.counters.label1_from_solves += 1;
                }
                let t = self.execute(&test, Some(id), now);
                self.pcs[id as usize].test = Some(t);
                self.timeline.push(Event::Solved { at: now, pc: id, test: t });
            }
            SolveOutcome::Exhausted => {
                self.counters.infeasible_analyzed += 1;
                self.pcs[id as usize].outcome = PcOutcome::Infeasible;
                if self.learn(key, fp, 0, now) {
                    self.counters.label0_from_exhaustions += 1;
                }
                self.timeline.push(Event::Exhausted { at: now, pc: id });
            }
        }
        self.active.remove(&id);
    }

    fn drive<E: Executor>(&mut self, exec: &mut E) {
        for args in self.seed_tests() {
            self.execute(&TestCase::seed(args), None, exec.now());
        }
        let budget = self.config.time_budget.as_secs_f64();
        loop {
            while exec.in_flight() < self.config.workers && exec.now() < budget {
                if !self.dispatch(exec) {
                    break;
                }
            }
            if exec.in_flight() == 0 {
                break;
            }
            let done = exec.wait();
            self.absorb(done, exec.now());
        }
    }

    fn finish(self, elapsed: f64) -> RunReport {
        let total = 2 * self.unit.method_branches().len();
        let covered = self.covered.len();
        RunReport {
            unit: self.unit.name.clone(),
            config: EngineConfig {
                search: self.config.search_config(),
                ..self.config.clone()
            },
            counters: self.counters,
            coverage: Coverage {
                covered,
                total,
                ratio: if total == 0 { 1.0 } else { covered as f64 / total as f64 },
            },
            elapsed,
            pcs: self.pcs,
            tests: self.tests,
            timeline: self.timeline,
            training: self.training_log,
        }
    }
}

/// Runs the loop until the time budget expires or nothing is left to do.
///
/// Panics on an invalid configuration; see [`EngineConfig::validate`].
pub fn run(unit: &UnitDef, config: &EngineConfig) -> RunReport {
    if let Err(e) = config.validate() {
        panic!("invalid engine configuration: {e}");
    }
    let mut coord = Coordinator::new(unit, config);
    let search = config.search_config();
    match config.clock {
        Clock::Virtual { evals_per_sec } => {
            let mut exec = VirtualExec {
                unit,
                search,
                master_seed: config.master_seed,
                evals_per_sec,
                now_evals: 0,
                seq: 0,
                queue: BinaryHeap::new(),
                results: BTreeMap::new(),
            };
            coord.drive(&mut exec);
            let elapsed = exec.now();
            coord.finish(elapsed)
        }
        Clock::Wall => {
            let (job_tx, job_rx) = mpsc::channel::<Job>();
            let (done_tx, done_rx) = mpsc::channel::<Done>();
            let job_rx = Arc::new(Mutex::new(job_rx));
            std::thread::scope(|s| {
                for _ in 0..config.workers {
                    let job_rx = Arc::clone(&job_rx);
                    let done_tx = done_tx.clone();
                    let search = &search;
                    s.spawn(move || loop {
                        let job = match job_rx.lock().expect("job queue").recv() {
                            Ok(j) => j,
                            Err(_) => return,
                        };
                        if done_tx.send(run_job(unit, search, config.master_seed, job)).is_err() {
                            return;
                        }
                    });
                }
                let mut exec = WallExec {
                    started: Instant::now(),
                    jobs: job_tx,
                    done: done_rx,
                    in_flight: 0,
                };
                coord.drive(&mut exec);
                let elapsed = exec.now();
                drop(exec);
                coord.finish(elapsed)
            })
        }
    }
}
