//! Evolutionary outer loop over architectures and weights.
//!
//! An individual is a [`Genome`]: integer architecture genes drawn from a
//! [`SearchSpace`] plus a flat weight vector whose layout those genes imply.
//! Offspring are produced by blend crossover (`α w_i + (1 - α) w_j` on
//! compatible blocks) followed by Gaussian weight noise and occasional gene
//! resampling. Parents are chosen by tournament selection; the best
//! `elitism_count` members survive unchanged. Fitness is higher-is-better.

mod engine;
mod genome;
mod operators;

pub use engine::{
    EvalContext, Evaluation, Evolution, EvolutionConfig, EvolutionOutcome, FitnessFn, GenerationStats, Individual,
    Parallelism, Population, Sequential,
};
pub use genome::{ArchGenes, GeneKind, GeneRange, Genome, GenomeSpace, ModelTemplate, SearchSpace, MAX_LEVELS, NUM_TOWERS};
pub use operators::{crossover, crossover_with_alpha, mutate, perturb_weights, tournament_select};
