//! Genetic training of [`Model`]s: fitness scoring, roulette selection,
//! crossover, mutation and elitism over flat parameter vectors.
//!
//! Randomness for population slot `s` of generation `g` comes from its own
//! stream keyed by `(seed, g, s)`, so a run replays identically for any
//! evaluation worker count.

mod fitness;
mod operators;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuro_models::Model;
use crate::rng::{stream, Domain};

pub use fitness::{accuracy_fitness, distance_fitness, fitness, Evaluator, FitnessKind, TrainingPair};
pub use operators::{apply_elitism, crossover, mutate, proportional_select, CrossoverKind};

/// Redraws of the second parent before a member may pair with itself.
pub const MAX_PARENT_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneticConfig {
    /// Probability that each parameter of a child is mutated.
    pub mutation_rate: f64,
    /// Largest relative change of a mutated parameter.
    pub mutation_size: f64,
    pub generation_size: usize,
    /// Fraction of the population copied unchanged into the next generation.
    pub elitism: f64,
    /// Mutation size used to scatter the initial population around the template.
    pub offset_size: f64,
    pub crossover_kind: CrossoverKind,
    pub fitness_kind: FitnessKind,
    pub seed: u64,
}

impl GeneticConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("mutation_rate", self.mutation_rate)?;
        unit("elitism", self.elitism)?;
        if self.generation_size < 2 {
            return Err(Error::invalid(format!("generation_size must be at least 2, got {}", self.generation_size)));
        }
        for (name, v) in [("mutation_size", self.mutation_size), ("offset_size", self.offset_size)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub model: Model,
    /// Cached score; `None` until evaluated.
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Member>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Scores every unscored member.
    pub fn score(&mut self, data: &[TrainingPair], kind: FitnessKind, evaluator: &Evaluator) -> Result<Vec<f64>> {
        let pending: Vec<usize> = (0..self.members.len()).filter(|&i| self.members[i].fitness.is_none()).collect();
        let models: Vec<&Model> = pending.iter().map(|&i| &self.members[i].model).collect();
        let scores = evaluator.evaluate(&models, data, kind)?;
        for (i, s) in pending.into_iter().zip(scores) {
            self.members[i].fitness = Some(s);
        }
        Ok(self.members.iter().map(|m| m.fitness.expect("scored")).collect())
    }
}

/// `generation_size` copies of `template`, each mutated at rate 1 with size `offset_size`.
pub fn init_population(template: &Model, config: &GeneticConfig) -> Result<Population> {
    config.validate()?;
    let members = (0..config.generation_size)
        .map(|slot| {
            let mut rng = stream(config.seed, Domain::PopulationInit, slot as u64, 0);
            Member { model: template.mutate(1.0, config.offset_size, &mut rng), fitness: None }
        })
        .collect();
    Ok(Population { members, generation: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub avg_fitness: f64,
    pub best_fitness: f64,
}

pub struct GenerationOutcome {
    pub next: Population,
    pub stats: GenerationStats,
    /// Best member of the generation that was just scored.
    pub best: Member,
}

/// Scores `population`, keeps its elites and breeds the rest of the next generation.
pub fn run_generation(
    mut population: Population,
    data: &[TrainingPair],
    config: &GeneticConfig,
    evaluator: &Evaluator,
) -> Result<GenerationOutcome> {
    let size = config.generation_size;
    if population.len() != size {
        return Err(Error::invalid(format!("population has {} members, expected {size}", population.len())));
    }
    let scores = population.score(data, config.fitness_kind, evaluator)?;
    let avg_fitness = scores.iter().sum::<f64>() / size as f64;
    let best_index = apply_elitism(&scores, 1.0)[0];
    let stats = GenerationStats { generation: population.generation, avg_fitness, best_fitness: scores[best_index] };
    let best = population.members[best_index].clone();

    let elites = apply_elitism(&scores, config.elitism);
    let mut members: Vec<Member> = elites.iter().map(|&i| population.members[i].clone()).collect();
    for slot in members.len()..size {
        let mut rng = stream(config.seed, Domain::Generation, population.generation as u64, slot as u64);
        let first = proportional_select(&scores, &mut rng)?;
        let mut second = proportional_select(&scores, &mut rng)?;
        for _ in 0..MAX_PARENT_REDRAWS {
            if second != first {
                break;
            }
            second = proportional_select(&scores, &mut rng)?;
        }
        let parent_a = population.members[first].model.get_params();
        let parent_b = population.members[second].model.get_params();
        let child = if parent_a.len() >= 2 {
            crossover(&parent_a, &parent_b, config.crossover_kind, &mut rng)?
        } else {
            parent_a
        };
        let child = mutate(&child, config.mutation_rate, config.mutation_size, &mut rng);
        members.push(Member { model: population.members[first].model.with_params(&child)?, fitness: None });
    }

    Ok(GenerationOutcome {
        next: Population { members, generation: population.generation + 1 },
        stats,
        best,
    })
}

/// Per-generation average and best fitness.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitnessTrace {
    pub rows: Vec<GenerationStats>,
}

impl FitnessTrace {
    /// `generation,avg_fitness,best_fitness`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["generation", "avg_fitness", "best_fitness"])?;
        for r in &self.rows {
            writer.write_record([r.generation.to_string(), r.avg_fitness.to_string(), r.best_fitness.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<fitness csv>", e))?;
        Ok(())
    }
}

/// A complete genetic run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: GeneticConfig,
    pub template: Model,
    pub generations: usize,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub trace: FitnessTrace,
    /// Wall time of each generation in seconds.
    pub generation_times: Vec<f64>,
    pub best_model: Model,
    pub best_fitness: f64,
}

impl SimulationResult {
    pub fn mean_generation_time(&self) -> f64 {
        if self.generation_times.is_empty() {
            0.0
        } else {
            self.generation_times.iter().sum::<f64>() / self.generation_times.len() as f64
        }
    }

    /// `generation,elapsed_s`
    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["generation", "elapsed_s"])?;
        for (g, t) in self.generation_times.iter().enumerate() {
            writer.write_record([g.to_string(), t.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<timing csv>", e))?;
        Ok(())
    }
}

/// Runs `generations` generations and returns the best model ever scored.
pub fn run_simulation(sim: &Simulation, data: &[TrainingPair]) -> Result<SimulationResult> {
    let evaluator = Evaluator::new(sim.workers)?;
    let mut population = init_population(&sim.template, &sim.config)?;
    let mut trace = FitnessTrace::default();
    let mut generation_times = Vec::with_capacity(sim.generations);
    let mut best: Option<Member> = None;
    let mut keep_best = |candidate: Member| {
        if best.as_ref().is_none_or(|b| candidate.fitness > b.fitness) {
            best = Some(candidate);
        }
    };

    for _ in 0..sim.generations {
        let start = Instant::now();
        let outcome = run_generation(population, data, &sim.config, &evaluator)?;
        generation_times.push(start.elapsed().as_secs_f64());
        trace.rows.push(outcome.stats);
        keep_best(outcome.best);
        population = outcome.next;
    }

    // the last bred generation is scored too, so G = 0 reports the initial population
    let scores = population.score(data, sim.config.fitness_kind, &evaluator)?;
    let top = apply_elitism(&scores, 1.0)[0];
    keep_best(population.members[top].clone());

    let best = best.expect("population is never empty");
    Ok(SimulationResult {
        trace,
        generation_times,
        best_fitness: best.fitness.expect("scored"),
        best_model: best.model,
    })
}
