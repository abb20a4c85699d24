//! Genetic search for constructor arguments whose field state satisfies a
//! target path condition.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use crate::concolic::{run_ctor, CtorOutcome, Provenance, TestCase, DEFAULT_STEP_LIMIT};
use crate::ir::UnitDef;
use crate::symcore::PathCondition;

/// How long one search may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchBudget {
    Wall(Duration),
    Evaluations(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub population: usize,
    pub tournament: usize,
    /// Per-gene probability of taking the second parent's value.
    pub crossover_prob: f64,
    /// Mean magnitude of a mutation step.
    pub mutation_mean: f64,
    /// Chance that a mutated gene is resampled instead of nudged.
    pub fresh_prob: f64,
    /// Fresh values are drawn uniformly from `[-fresh_range, fresh_range]`,
    /// or from the unit's literals.
    pub fresh_range: i64,
    pub literal_prob: f64,
    pub stagnation_restart: u32,
    pub budget: SearchBudget,
    pub step_limit: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 50,
            tournament: 4,
            crossover_prob: 0.5,
            mutation_mean: 16.0,
            fresh_prob: 0.1,
            fresh_range: 1 << 16,
            literal_prob: 0.2,
            stagnation_restart: 50,
            budget: SearchBudget::Wall(Duration::from_secs(20)),
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

/// Fitness as the exact value `prefix + 1 / (distance + 1)`, where a fully
/// satisfied path condition has distance 0. Invalid candidates (constructor
/// threw or diverged) rank below everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Score {
    pub valid: bool,
    pub prefix: u64,
    pub distance: u128,
}

impl Score {
    pub const INVALID: Score = Score {
        valid: false,
        prefix: 0,
        distance: 0,
    };

    pub fn to_f64(self) -> f64 {
        if self.valid {
            self.prefix as f64 + 1.0 / (self.distance as f64 + 1.0)
        } else {
            0.0
        }
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.valid
            .cmp(&other.valid)
            .then(self.prefix.cmp(&other.prefix))
            .then(other.distance.cmp(&self.distance))
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FitnessReport {
    pub score: Score,
    pub satisfied_prefix: usize,
    pub solved: bool,
    pub ctor_threw: bool,
}

pub fn fitness(unit: &UnitDef, pc: &PathCondition, args: &[i64]) -> FitnessReport {
    fitness_with_limit(unit, pc, args, DEFAULT_STEP_LIMIT)
}

pub fn fitness_with_limit(unit: &UnitDef, pc: &PathCondition, args: &[i64], step_limit: u64) -> FitnessReport {
    let invalid = |threw| FitnessReport {
        score: Score::INVALID,
        satisfied_prefix: 0,
        solved: false,
        ctor_threw: threw,
    };
    let state = match run_ctor(unit, args, step_limit) {
        Ok((CtorOutcome::Built(s), _)) => s,
        Ok((CtorOutcome::Threw, _)) => return invalid(true),
        Err(_) => return invalid(false),
    };
    match pc.evaluate(&state) {
        Ok(ev) => {
            let distance = ev.first_violation.as_ref().map_or(0, |v| v.distance);
            FitnessReport {
                score: Score {
                    valid: true,
                    prefix: ev.satisfied_prefix as u64,
                    distance,
                },
                satisfied_prefix: ev.satisfied_prefix,
                solved: ev.first_violation.is_none(),
                ctor_threw: false,
            }
        }
        // A symbol the state lacks (an index past the array end) cannot be
        // satisfied by this candidate.
        Err(_) => invalid(false),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Solved(TestCase),
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub evaluations: u64,
    pub generations: u64,
    pub restarts: u32,
    pub best: Score,
}

/// Searches from the all-zeros vector plus random vectors.
pub fn solve<R: Rng + ?Sized>(unit: &UnitDef, pc: &PathCondition, config: &SearchConfig, rng: &mut R) -> SolveReport {
    solve_seeded(unit, pc, config, rng, &[])
}

/// Like [`solve`], with extra starting vectors (for instance the arguments of
/// the test whose path the target was derived from).
pub fn solve_seeded<R: Rng + ?Sized>(
    unit: &UnitDef,
    pc: &PathCondition,
    config: &SearchConfig,
    rng: &mut R,
    seeds: &[Vec<i64>],
) -> SolveReport {
    assert!(config.population >= 2, "population must be at least 2");
    let mut search = Search {
        unit,
        pc,
        config,
        arity: unit.params.len(),
        literals: literal_pool(unit),
        evaluations: 0,
        started: match config.budget {
            SearchBudget::Wall(_) => Some(Instant::now()),
            SearchBudget::Evaluations(_) => None,
        },
    };
    search.run(rng, seeds)
}

fn literal_pool(unit: &UnitDef) -> Vec<i64> {
    let mut pool: Vec<i64> = unit
        .literals()
        .into_iter()
        .flat_map(|v| [v.wrapping_sub(1), v, v.wrapping_add(1)])
        .collect();
    pool.push(0);
    pool.sort_unstable();
    pool.dedup();
    pool
}

struct Search<'a> {
    unit: &'a UnitDef,
    pc: &'a PathCondition,
    config: &'a SearchConfig,
    arity: usize,
    literals: Vec<i64>,
    evaluations: u64,
    // Only read for wall budgets, so evaluation budgets work without a clock.
    started: Option<Instant>,
}

struct Member {
    args: Vec<i64>,
    score: Score,
}

enum Step {
    Solved(Vec<i64>),
    OutOfBudget,
}

impl Search<'_> {
    fn budget_left(&self) -> bool {
        match self.config.budget {
            SearchBudget::Evaluations(n) => self.evaluations < n,
            SearchBudget::Wall(d) => self.started.is_some_and(|t| t.elapsed() < d),
        }
    }

    fn evaluate(&mut self, args: Vec<i64>) -> Result<Member, Step> {
        if !self.budget_left() {
            return Err(Step::OutOfBudget);
        }
        self.evaluations += 1;
        let r = fitness_with_limit(self.unit, self.pc, &args, self.config.step_limit);
        if r.solved {
            Err(Step::Solved(args))
        } else {
            Ok(Member { args, score: r.score })
        }
    }

    fn fresh_value<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if rng.gen_bool(self.config.literal_prob) {
            self.literals[rng.gen_range(0..self.literals.len())]
        } else {
            let r = self.config.fresh_range;
            rng.gen_range(-r..=r)
        }
    }

    fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        (0..self.arity).map(|_| self.fresh_value(rng)).collect()
    }

    /// Geometric step with the configured mean, at least 1.
    fn step_size<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let p = 1.0 / self.config.mutation_mean.max(1.0);
        if p >= 1.0 {
            return 1;
        }
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        ((u.ln() / (1.0 - p).ln()).floor() as i64).saturating_add(1)
    }

    fn mutate<R: Rng + ?Sized>(&self, args: &mut [i64], rng: &mut R) {
        let p = 1.0 / self.arity as f64;
        for i in 0..args.len() {
            if !rng.gen_bool(p) {
                continue;
            }
            if rng.gen_bool(self.config.fresh_prob) {
                args[i] = self.fresh_value(rng);
            } else {
                let delta = self.step_size(rng);
                args[i] = if rng.gen_bool(0.5) {
                    args[i].wrapping_add(delta)
                } else {
                    args[i].wrapping_sub(delta)
                };
            }
        }
    }

    fn tournament<'m, R: Rng + ?Sized>(&self, pop: &'m [Member], rng: &mut R) -> &'m Member {
        let mut best = &pop[rng.gen_range(0..pop.len())];
        for _ in 1..self.config.tournament.max(1) {
            let c = &pop[rng.gen_range(0..pop.len())];
            if c.score > best.score {
                best = c;
            }
        }
        best
    }

    fn initial<R: Rng + ?Sized>(&mut self, rng: &mut R, seeds: &[Vec<i64>], keep: Option<Member>) -> Result<Vec<Member>, Step> {
        let mut pop = Vec::with_capacity(self.config.population);
        if let Some(m) = keep {
            pop.push(m);
        }
        let arity = self.arity;
        for s in seeds.iter().filter(|s| s.len() == arity) {
            if pop.len() < self.config.population {
                pop.push(self.evaluate(s.clone())?);
            }
        }
        while pop.len() < self.config.population {
            let v = self.random_vector(rng);
            pop.push(self.evaluate(v)?);
        }
        Ok(pop)
    }

    fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, seeds: &[Vec<i64>]) -> SolveReport {
        let mut seeds = seeds.to_vec();
        seeds.insert(0, vec![0; self.arity]);
        let mut generations = 0;
        let mut restarts = 0;
        let mut best = Score::INVALID;
        let step = (|| -> Step {
            let mut pop = match self.initial(rng, &seeds, None) {
                Ok(p) => p,
                Err(s) => return s,
            };
            let mut stagnant = 0;
            loop {
                let elite_at = (0..pop.len()).max_by_key(|&i| (pop[i].score, std::cmp::Reverse(i))).unwrap();
                if pop[elite_at].score > best {
                    best = pop[elite_at].score;
                    stagnant = 0;
                } else {
                    stagnant += 1;
                }
                if stagnant >= self.config.stagnation_restart {
                    restarts += 1;
                    stagnant = 0;
                    let elite = pop.swap_remove(elite_at);
                    pop = match self.initial(rng, &[], Some(elite)) {
                        Ok(p) => p,
                        Err(s) => return s,
                    };
                    continue;
                }
                generations += 1;
                let mut next = Vec::with_capacity(pop.len());
                next.push(Member {
                    args: pop[elite_at].args.clone(),
                    score: pop[elite_at].score,
                });
                while next.len() < self.config.population {
                    let a = self.tournament(&pop, rng);
                    let b = self.tournament(&pop, rng);
                    let mut child: Vec<i64> = a
                        .args
                        .iter()
                        .zip(&b.args)
                        .map(|(x, y)| if rng.gen_bool(self.config.crossover_prob) { *y } else { *x })
                        .collect();
                    self.mutate(&mut child, rng);
                    match self.evaluate(child) {
                        Ok(m) => next.push(m),
                        Err(s) => return s,
                    }
                }
                pop = next;
            }
        })();
        let outcome = match step {
            Step::Solved(args) => {
                best = Score {
                    valid: true,
                    prefix: self.pc.len() as u64,
                    distance: 0,
                };
                SolveOutcome::Solved(TestCase {
                    args,
                    provenance: Provenance::GeneratedFor(self.pc.clone()),
                })
            }
            Step::OutOfBudget => SolveOutcome::Exhausted,
        };
        SolveReport {
            outcome,
            evaluations: self.evaluations,
            generations,
            restarts,
            best,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ir::parse_unit;

    fn sample() -> UnitDef {
        parse_unit(include_str!("../../../corpus/sample_class.tu")).unwrap()
    }

    fn pc(unit: &UnitDef, text: &str) -> PathCondition {
        PathCondition::parse(text).unwrap().resolve_against(unit).unwrap()
    }

    fn args(a0: i64, b0: i64) -> Vec<i64> {
        let mut v = vec![0; 15];
        v[0] = a0;
        v[5] = b0;
        v
    }

    #[test]
    fn fitness_examples() {
        let u = sample();
        let p = pc(&u, "A[0] > 0");
        let r = fitness(&u, &p, &args(123, 0));
        assert!(r.solved);
        assert_eq!(r.score.to_f64(), 2.0);
        let r = fitness(&u, &p, &args(0, 0));
        assert!(!r.solved);
        assert_eq!(r.score.to_f64(), 0.5);
        let r = fitness(&u, &p, &args(5, -1));
        assert!(r.ctor_threw);
        assert_eq!(r.score.to_f64(), 0.0);
    }

    #[test]
    fn longer_prefix_scores_higher() {
        let u = sample();
        let p = pc(&u, "A[0] > 0 && A[1] > 1000");
        let one = fitness(&u, &p, &args(1, 0)).score;
        let none_close = fitness(&u, &p, &args(0, 0)).score;
        let mut far = vec![0; 15];
        far[0] = i64::MIN;
        let none_far = fitness(&u, &p, &far).score;
        assert!(one > none_close && none_close > none_far && none_far > Score::INVALID);
    }

    fn budget(evals: u64) -> SearchConfig {
        SearchConfig {
            budget: SearchBudget::Evaluations(evals),
            ..SearchConfig::default()
        }
    }

    #[test]
    fn easy_pc_is_solved_and_sound() {
        let u = sample();
        let p = pc(&u, "A.length > 0 && A[0] > 0");
        let r = solve(&u, &p, &budget(20_000), &mut ChaCha8Rng::seed_from_u64(1));
        let SolveOutcome::Solved(t) = r.outcome else { panic!("exhausted") };
        assert!(t.args[0] > 0);
        assert_eq!(t.provenance, Provenance::GeneratedFor(p.clone()));
        assert!(fitness(&u, &p, &t.args).solved);
    }

    #[test]
    fn zeros_satisfy_non_positive_immediately() {
        let u = sample();
        let r = solve(&u, &pc(&u, "A[0] <= 0"), &budget(1), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r.outcome, SolveOutcome::Solved(_)));
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn impossible_length_is_exhausted_within_budget() {
        let u = sample();
        let r = solve(&u, &pc(&u, "A.length <= 1"), &budget(3_000), &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(r.outcome, SolveOutcome::Exhausted);
        assert_eq!(r.evaluations, 3_000);
        assert!(r.restarts >= 1);
    }

    #[test]
    fn wall_budget_is_respected() {
        let u = sample();
        let cfg = SearchConfig {
            budget: SearchBudget::Wall(Duration::from_millis(200)),
            ..SearchConfig::default()
        };
        let t0 = Instant::now();
        let r = solve(&u, &pc(&u, "A.length <= 1"), &cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(r.outcome, SolveOutcome::Exhausted);
        assert!(t0.elapsed() < Duration::from_millis(400));
    }

    #[test]
    fn same_seed_same_search() {
        let u = sample();
        let p = pc(&u, "A[0] > 0 && A[1] > 1000 && A[2] > 2000");
        let a = solve(&u, &p, &budget(50_000), &mut ChaCha8Rng::seed_from_u64(9));
        let b = solve(&u, &p, &budget(50_000), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
