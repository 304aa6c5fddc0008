use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::genome::{Genome, GenomeSpace};
use super::operators::{crossover, mutate, tournament_select};
use crate::error::{config, state};
use crate::metrics::MetricsReport;
use crate::objectives::LossReport;
use crate::rng::{self, tags, ChaCha8Rng};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: u32,
    pub tournament_k: usize,
    pub sigma: f64,
    /// Per-generation multiplicative decay of `sigma`; `None` keeps it constant.
    pub sigma_decay: Option<f64>,
    pub arch_mutation_prob: f64,
    pub elitism_count: usize,
    pub inner_epochs: u32,
    /// Generations without a best-fitness gain of at least `1e-6` before
    /// stopping early; `0` disables early stopping.
    pub convergence_patience: u32,
    pub master_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 8,
            generations: 10,
            tournament_k: 3,
            sigma: 0.02,
            sigma_decay: None,
            arch_mutation_prob: 0.1,
            elitism_count: 1,
            inner_epochs: 3,
            convergence_patience: 0,
            master_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(config("population_size must be at least 2"));
        }
        if self.generations < 1 {
            return Err(config("generations must be at least 1"));
        }
        if self.tournament_k < 1 || self.tournament_k > self.population_size {
            return Err(config("tournament_k must lie in [1, population_size]"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(config("sigma must be positive"));
        }
        if let Some(d) = self.sigma_decay {
            if !(d.is_finite() && d > 0.0 && d <= 1.0) {
                return Err(config("sigma_decay must lie in (0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.arch_mutation_prob) {
            return Err(config("arch_mutation_prob must lie in [0, 1]"));
        }
        if self.elitism_count >= self.population_size {
            return Err(config("elitism_count must be smaller than population_size"));
        }
        Ok(())
    }

    pub fn sigma_at(&self, generation: u32) -> f64 {
        match self.sigma_decay {
            Some(d) => self.sigma * crate::math::powi(d, generation as i32),
            None => self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
    pub eval_metrics: Option<MetricsReport>,
    /// Validation loss breakdown from the latest evaluation, if the fitness
    /// function produced one.
    pub report: Option<LossReport>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Self { genome, fitness: None, eval_metrics: None, report: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: u32,
}

impl Population {
    /// Index of the fittest member, ties to the lower index.
    pub fn best_index(&self) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, m) in self.members.iter().enumerate() {
            let f = m.fitness.ok_or_else(|| state(format!("member {i} has not been evaluated")))?;
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((i, f));
            }
        }
        best.map(|(i, _)| i).ok_or_else(|| state("empty population"))
    }

    /// Member indices ordered by descending fitness, ties by index.
    fn ranking(&self) -> Result<Vec<usize>> {
        let mut fit = Vec::with_capacity(self.members.len());
        for (i, m) in self.members.iter().enumerate() {
            fit.push(m.fitness.ok_or_else(|| state(format!("member {i} has not been evaluated")))?);
        }
        let mut order: Vec<usize> = (0..fit.len()).collect();
        order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
        Ok(order)
    }

    fn stats(&self) -> Result<GenerationStats> {
        let best = self.best_index()?;
        let finite: Vec<f64> = self.members.iter().filter_map(|m| m.fitness).filter(|f| f.is_finite()).collect();
        let mean = if finite.is_empty() { f64::NEG_INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
        Ok(GenerationStats {
            generation: self.generation,
            best_fitness: self.members[best].fitness.unwrap_or(f64::NEG_INFINITY),
            mean_fitness: mean,
            best_arch: self.members[best].genome.arch.summary(),
            best_report: self.members[best].report.clone(),
        })
    }
}

/// One row of the evolution history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_fitness: f64,
    /// Mean over members with finite fitness.
    pub mean_fitness: f64,
    pub best_arch: String,
    pub best_report: Option<LossReport>,
}

/// Coordinates of one fitness evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalContext {
    pub generation: u32,
    pub member: u32,
    /// Seed of this evaluation's private RNG stream.
    pub seed: u64,
}

impl EvalContext {
    pub fn rng(&self) -> ChaCha8Rng {
        rng::stream(self.seed, &[])
    }
}

/// Result of one fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub report: Option<LossReport>,
}

impl From<f64> for Evaluation {
    fn from(fitness: f64) -> Self {
        Self { fitness, report: None }
    }
}

/// Fitness function. Implementations may update the genome in place
/// (Lamarckian inheritance of trained weights). Non-finite fitness values are
/// replaced by `-inf`.
pub trait FitnessFn: Sync {
    fn evaluate(&self, genome: &mut Genome, ctx: &EvalContext) -> Evaluation;
}

impl<F> FitnessFn for F
where
    F: Fn(&mut Genome, &EvalContext) -> f64 + Sync,
{
    fn evaluate(&self, genome: &mut Genome, ctx: &EvalContext) -> Evaluation {
        self(genome, ctx).into()
    }
}

/// Strategy for running independent evaluations. Results must come back in
/// input order.
pub trait Parallelism: Sync {
    fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Parallelism for Sequential {
    fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOutcome {
    pub best: Individual,
    /// One entry per executed generation, generation 0 included.
    pub history: Vec<GenerationStats>,
    pub population: Population,
    /// Number of crossover and mutation applications.
    pub operator_calls: u64,
}

/// Generational evolution driver.
pub struct Evolution<'a, F, P> {
    cfg: &'a EvolutionConfig,
    space: &'a GenomeSpace,
    fitness: &'a F,
    par: &'a P,
}

impl<'a, F: FitnessFn, P: Parallelism> Evolution<'a, F, P> {
    pub fn new(cfg: &'a EvolutionConfig, space: &'a GenomeSpace, fitness: &'a F, par: &'a P) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, space, fitness, par })
    }

    fn evaluate(&self, genomes: Vec<(u32, Genome)>, generation: u32) -> Vec<Individual> {
        let master = self.cfg.master_seed;
        self.par.map(genomes, |(member, mut genome)| {
            let ctx = EvalContext {
                generation,
                member,
                seed: rng::derive_seed(master, &[tags::EVALUATION, generation as u64, member as u64]),
            };
            let eval = self.fitness.evaluate(&mut genome, &ctx);
            let fitness = if eval.fitness.is_nan() || eval.fitness == f64::INFINITY { f64::NEG_INFINITY } else { eval.fitness };
            Individual { genome, fitness: Some(fitness), eval_metrics: None, report: eval.report }
        })
    }

    /// Generation 0: the mid-range default genome followed by random ones.
    pub fn initial_population(&self) -> Population {
        let master = self.cfg.master_seed;
        let genomes = (0..self.cfg.population_size)
            .map(|i| {
                let mut r = rng::stream(master, &[tags::INIT, i as u64]);
                let g = if i == 0 { self.space.default_genome(&mut r) } else { self.space.random_genome(&mut r) };
                (i as u32, g)
            })
            .collect();
        Population { members: self.evaluate(genomes, 0), generation: 0 }
    }

    /// Elites carried over, the rest bred by tournament, crossover and
    /// mutation on `rng`, then evaluated. Returns the operator count used.
    pub fn evolve_generation(&self, pop: &Population, rng: &mut ChaCha8Rng) -> Result<(Population, u64)> {
        let order = pop.ranking()?;
        let next_gen = pop.generation + 1;
        let sigma = self.cfg.sigma_at(next_gen);
        let elites: Vec<Individual> = order[..self.cfg.elitism_count].iter().map(|&i| pop.members[i].clone()).collect();
        let mut children = Vec::with_capacity(self.cfg.population_size - elites.len());
        let mut ops = 0;
        for slot in elites.len()..self.cfg.population_size {
            let a = tournament_select(pop, self.cfg.tournament_k, rng)?;
            let b = tournament_select(pop, self.cfg.tournament_k, rng)?;
            let child = crossover(self.space, &pop.members[a].genome, &pop.members[b].genome, rng);
            let mut child = mutate(self.space, &child, sigma, self.cfg.arch_mutation_prob, rng);
            child.birth_gen = next_gen;
            ops += 2;
            children.push((slot as u32, child));
        }
        let mut members = elites;
        members.extend(self.evaluate(children, next_gen));
        Ok((Population { members, generation: next_gen }, ops))
    }

    pub fn run(&self) -> Result<EvolutionOutcome> {
        let mut coordinator = rng::stream(self.cfg.master_seed, &[tags::COORDINATOR]);
        let mut pop = self.initial_population();
        let mut history = alloc::vec![pop.stats()?];
        let mut operator_calls = 0;
        let mut stalled = 0;
        for _ in 0..self.cfg.generations {
            let (next, ops) = self.evolve_generation(&pop, &mut coordinator)?;
            operator_calls += ops;
            pop = next;
            let stats = pop.stats()?;
            let prev = history.last().map_or(f64::NEG_INFINITY, |h| h.best_fitness);
            let gained = stats.best_fitness - prev;
            history.push(stats);
            if self.cfg.convergence_patience > 0 {
                stalled = if gained >= 1e-6 { 0 } else { stalled + 1 };
                if stalled >= self.cfg.convergence_patience {
                    break;
                }
            }
        }
        let best = pop.members[pop.best_index()?].clone();
        Ok(EvolutionOutcome { best, history, population: pop, operator_calls })
    }
}
