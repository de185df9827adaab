//! NSGA-II search over input vectors, maximizing detection accuracy and
//! statement coverage.
//!
//! Randomness comes from ChaCha8 streams keyed by (seed, generation, slot),
//! and fitness evaluation is pure, so results do not depend on how many
//! threads evaluate a generation.

mod constraints;
pub mod nsga;

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use constraints::{ConstraintSet, Enforced, FunctionalDependency, Predicate, PredicateKind};
pub use nsga::{
    crossover, crowding_distance, environmental_selection, fast_nondominated_sort, mutate,
    rank_and_crowd, select_parents, tournament, Bounds, Fitness,
};

use crate::corpus::VulnLabel;
use crate::dataflow::SpecialValues;
use crate::detectors::{Finding, StaticFindings};
use crate::executor::{CoverageCounters, ExecProgram, ExecTrace, Limits};
use crate::metrics::MatchPolicy;

/// Share of the initial population built from special values.
pub const SEEDED_FRACTION: f64 = 0.25;
/// Attempts per individual before initialization gives up.
pub const INIT_ATTEMPTS_PER_INDIVIDUAL: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub pop_size: usize,
    pub max_iters: usize,
    pub select_k: usize,
    pub pc: f64,
    pub pm: f64,
    pub seed: u64,
    /// Generations without a change in the best objectives before stopping;
    /// 0 disables early stopping.
    pub stagnation_window: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pop_size: 50,
            max_iters: 200,
            select_k: 20,
            pc: 0.6,
            pm: 0.75,
            seed: 0,
            stagnation_window: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("no individual satisfies the constraints after {attempts} attempts ({reason})")]
    InfeasibleConstraints { attempts: usize, reason: String },
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.pop_size == 0 {
            return Err(SearchError::Config(
                "population size must be positive".into(),
            ));
        }
        if self.select_k == 0 || self.select_k > self.pop_size {
            return Err(SearchError::Config(format!(
                "mating pool size {} must be in 1..={}",
                self.select_k, self.pop_size
            )));
        }
        for (name, p) in [("crossover", self.pc), ("mutation", self.pm)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SearchError::Config(format!(
                    "{name} rate {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn rng_for(seed: u64, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << 32) | slot);
    rng
}

/// Stream slot used for parent selection within a generation.
const SELECTION_SLOT: u64 = u32::MAX as u64;
/// Stream slot used for the stratified seeded block of generation 0.
const SEEDING_SLOT: u64 = u32::MAX as u64 - 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Individual {
    #[serde(with = "crate::serde_big::vec")]
    pub genes: Vec<BigInt>,
    pub fitness: Fitness,
    pub rank: usize,
    #[serde(serialize_with = "serialize_crowding")]
    pub crowding: f64,
}

fn serialize_crowding<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Everything needed to score one gene vector.
pub struct Evaluator {
    pub program: Arc<ExecProgram>,
    pub statics: Arc<StaticFindings>,
    pub labels: Vec<VulnLabel>,
    pub policy: MatchPolicy,
    pub limits: Limits,
}

/// One scored execution.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fitness: Fitness,
    pub trace: ExecTrace,
    pub counters: CoverageCounters,
}

impl Evaluator {
    /// Accuracy of `findings` against this contract's labels: each label
    /// scores the best matching finding's score. Without labels, 1 when
    /// nothing is reported, reduced by the reported score mass otherwise.
    pub fn accuracy(&self, findings: &[Finding]) -> f64 {
        if self.labels.is_empty() {
            if findings.is_empty() {
                return 1.0;
            }
            let mass: f64 = findings.iter().map(|f| f.score).sum();
            let statements = self.program.census().total().max(1) as f64;
            return 1.0 - (mass / statements).min(1.0);
        }
        let matched: f64 = self
            .labels
            .iter()
            .map(|l| {
                findings
                    .iter()
                    .filter(|f| self.policy.matches(f, l))
                    .map(|f| f.score)
                    .fold(0.0, f64::max)
            })
            .sum();
        matched / self.labels.len() as f64
    }

    pub fn evaluate(&self, genes: &[BigInt]) -> Evaluation {
        let exec = self.program.execute(genes, &self.limits);
        let findings = self.statics.findings([&exec.trace]);
        let coverage = exec.coverage(&self.program);
        Evaluation {
            fitness: Fitness::new(self.accuracy(&findings), coverage),
            trace: exec.trace,
            counters: exec.counters,
        }
    }
}

/// Gene vector drawn from the special values of every slot.
fn seeded_genes(specials: &SpecialValues, rng: &mut ChaCha8Rng) -> Vec<BigInt> {
    specials
        .per_slot
        .iter()
        .map(|s| {
            s.0.choose(rng)
                .cloned()
                .expect("special sets are non-empty")
        })
        .collect()
}

/// First-attempt genes of the `count` seeded individuals. Each slot's column
/// cycles through shuffled copies of its special values, so every special
/// value appears once `count` reaches the size of its set.
fn stratified_seeds(specials: &SpecialValues, count: usize, seed: u64) -> Vec<Vec<BigInt>> {
    let mut rng = rng_for(seed, 0, SEEDING_SLOT);
    let columns: Vec<Vec<BigInt>> = specials
        .per_slot
        .iter()
        .map(|s| {
            let mut col = Vec::with_capacity(count);
            while col.len() < count {
                let mut round = s.0.clone();
                round.shuffle(&mut rng);
                col.extend(round);
            }
            col.truncate(count);
            col
        })
        .collect();
    (0..count)
        .map(|i| columns.iter().map(|c| c[i].clone()).collect())
        .collect()
}

fn random_genes(bounds: &[Bounds], rng: &mut ChaCha8Rng) -> Vec<BigInt> {
    bounds.iter().map(|b| nsga::random_gene(b, rng)).collect()
}

/// `cfg.pop_size` valid gene vectors; the first quarter seeded from special
/// values. A seeded individual rejected by the constraints retries with
/// independently drawn special values.
pub fn init_population(
    cs: &ConstraintSet,
    specials: &SpecialValues,
    cfg: &SearchConfig,
) -> Result<Vec<Vec<BigInt>>, SearchError> {
    let n = cfg.pop_size;
    let seeded = ((n as f64) * SEEDED_FRACTION).ceil() as usize;
    let budget = n * INIT_ATTEMPTS_PER_INDIVIDUAL;
    let mut attempts = 0;
    let mut out = Vec::with_capacity(n);
    let mut first = stratified_seeds(specials, seeded, cfg.seed).into_iter();
    for idx in 0..n {
        let mut rng = rng_for(cfg.seed, 0, idx as u64);
        let mut stratified = first.next();
        loop {
            if attempts >= budget {
                let reason = cs
                    .predicates
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(SearchError::InfeasibleConstraints { attempts, reason });
            }
            attempts += 1;
            let genes = match stratified.take() {
                Some(g) => g,
                None if idx < seeded => seeded_genes(specials, &mut rng),
                None => random_genes(&cs.bounds, &mut rng),
            };
            if let Enforced::Repaired(g) = cs.enforce(genes) {
                out.push(g);
                break;
            }
        }
    }
    Ok(out)
}

/// Best and mean objective values of one generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GenerationStats {
    pub best_accuracy: f64,
    pub best_coverage: f64,
    pub mean_accuracy: f64,
    pub mean_coverage: f64,
}

impl GenerationStats {
    fn of(fit: &[Fitness]) -> GenerationStats {
        let n = fit.len().max(1) as f64;
        GenerationStats {
            best_accuracy: fit.iter().map(|f| f.accuracy).fold(0.0, f64::max),
            best_coverage: fit.iter().map(|f| f.coverage).fold(0.0, f64::max),
            mean_accuracy: fit.iter().map(|f| f.accuracy).sum::<f64>() / n,
            mean_coverage: fit.iter().map(|f| f.coverage).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Final population, sorted by (rank, index).
    pub population: Vec<Individual>,
    /// One entry per evaluated generation, generation 0 first.
    pub history: Vec<GenerationStats>,
    pub generations: usize,
    pub stopped_early: bool,
    pub evaluations: usize,
    /// Traces that first witnessed each candidate, in discovery order.
    pub witness_traces: Vec<ExecTrace>,
    /// Counters summed over every execution.
    pub union_counters: CoverageCounters,
}

impl SearchResult {
    pub fn pareto_front(&self) -> Vec<&Individual> {
        self.population.iter().filter(|i| i.rank == 1).collect()
    }

    pub fn initial(&self) -> GenerationStats {
        self.history[0]
    }

    pub fn last(&self) -> GenerationStats {
        *self
            .history
            .last()
            .expect("generation 0 is always recorded")
    }
}

struct Tracker<'a> {
    statics: &'a StaticFindings,
    pending: BTreeSet<usize>,
    traces: Vec<ExecTrace>,
    counters: CoverageCounters,
    evaluations: usize,
}

impl Tracker<'_> {
    fn absorb(&mut self, evals: Vec<Evaluation>) -> Vec<Fitness> {
        let mut fit = Vec::with_capacity(evals.len());
        for e in evals {
            self.evaluations += 1;
            self.counters.merge(&e.counters);
            let hit: Vec<usize> = self
                .pending
                .iter()
                .copied()
                .filter(|&c| self.statics.candidates[c].witness.find(&e.trace).is_some())
                .collect();
            if !hit.is_empty() {
                for c in hit {
                    self.pending.remove(&c);
                }
                self.traces.push(e.trace);
            }
            fit.push(e.fitness);
        }
        fit
    }
}

fn evaluate_all(ev: &Evaluator, pop: &[Vec<BigInt>]) -> Vec<Evaluation> {
    pop.par_iter().map(|g| ev.evaluate(g)).collect()
}

/// Offspring of one generation: K tournament winners recombined pairwise
/// until `n` valid children exist.
fn offspring(
    pop: &[Vec<BigInt>],
    fit: &[Fitness],
    cs: &ConstraintSet,
    cfg: &SearchConfig,
    generation: u64,
) -> Vec<Vec<BigInt>> {
    let (rank, crowd) = rank_and_crowd(fit);
    let mut sel_rng = rng_for(cfg.seed, generation, SELECTION_SLOT);
    let pool = select_parents(cfg.select_k, &rank, &crowd, &mut sel_rng);
    let mut children = Vec::with_capacity(cfg.pop_size);
    let mut pair = 0u64;
    let limit = cfg.pop_size * INIT_ATTEMPTS_PER_INDIVIDUAL;
    while children.len() < cfg.pop_size && (pair as usize) < limit {
        let mut rng = rng_for(cfg.seed, generation, pair);
        let a = &pop[pool[(2 * pair as usize) % pool.len()]];
        let b = &pop[pool[(2 * pair as usize + 1) % pool.len()]];
        pair += 1;
        let (mut c1, mut c2) = crossover(a, b, cfg.pc, &mut rng);
        mutate(&mut c1, &cs.bounds, cfg.pm, &mut rng);
        mutate(&mut c2, &cs.bounds, cfg.pm, &mut rng);
        for c in [c1, c2] {
            if children.len() < cfg.pop_size {
                if let Enforced::Repaired(g) = cs.enforce(c) {
                    children.push(g);
                }
            }
        }
    }
    // Parents always satisfy the constraints, so a shortfall (every child
    // rejected) is filled with copies of the pool.
    let mut k = 0;
    while children.len() < cfg.pop_size {
        children.push(pop[pool[k % pool.len()]].clone());
        k += 1;
    }
    children
}

/// Runs the search to completion.
pub fn run(
    ev: &Evaluator,
    cs: &ConstraintSet,
    specials: &SpecialValues,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let mut tracker = Tracker {
        statics: &ev.statics,
        pending: (0..ev.statics.candidates.len()).collect(),
        traces: Vec::new(),
        counters: CoverageCounters::new(&ev.program.functions),
        evaluations: 0,
    };
    let mut pop = init_population(cs, specials, cfg)?;
    let mut fit = tracker.absorb(evaluate_all(ev, &pop));
    let mut history = vec![GenerationStats::of(&fit)];
    let mut stagnant = 0;
    let mut stopped_early = false;
    let mut generation = 0;
    while generation < cfg.max_iters {
        generation += 1;
        let children = offspring(&pop, &fit, cs, cfg, generation as u64);
        let child_fit = tracker.absorb(evaluate_all(ev, &children));
        let mut all_pop = std::mem::take(&mut pop);
        all_pop.extend(children);
        let mut all_fit = std::mem::take(&mut fit);
        all_fit.extend(child_fit);
        let keep = environmental_selection(&all_fit, cfg.pop_size);
        pop = keep
            .iter()
            .map(|&i| std::mem::take(&mut all_pop[i]))
            .collect();
        fit = keep.iter().map(|&i| all_fit[i]).collect();

        let stats = GenerationStats::of(&fit);
        let prev = history.last().expect("non-empty");
        let same =
            stats.best_accuracy == prev.best_accuracy && stats.best_coverage == prev.best_coverage;
        history.push(stats);
        stagnant = if same { stagnant + 1 } else { 0 };
        if cfg.stagnation_window > 0 && stagnant >= cfg.stagnation_window {
            stopped_early = true;
            break;
        }
    }
    let (rank, crowd) = rank_and_crowd(&fit);
    let mut population: Vec<Individual> = pop
        .into_iter()
        .enumerate()
        .map(|(i, genes)| Individual {
            genes,
            fitness: fit[i],
            rank: rank[i],
            crowding: crowd[i],
        })
        .collect();
    population.sort_by_key(|i| i.rank);
    Ok(SearchResult {
        population,
        history,
        generations: generation,
        stopped_early,
        evaluations: tracker.evaluations,
        witness_traces: tracker.traces,
        union_counters: tracker.counters,
    })
}

#[cfg(test)]
mod tests;
