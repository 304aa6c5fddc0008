use hierfuse_core::evolution::*;
use hierfuse_core::nn::ParamVector;
use hierfuse_core::rng;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_space() -> GenomeSpace {
    let search = SearchSpace {
        expert_hidden: GeneRange::new(2, 4),
        expert_out: GeneRange::new(2, 3),
        levels: GeneRange::new(1, 2),
        fusion_width: GeneRange::new(2, 3),
        tower_hidden: GeneRange::new(2, 3),
    };
    GenomeSpace::new(search, ModelTemplate::new(2, 2, 2)).unwrap()
}

/// Every gene pinned, so the sphere benchmark searches weights only.
fn fixed_space() -> GenomeSpace {
    let one = |v| GeneRange::new(v, v);
    let search = SearchSpace {
        expert_hidden: one(3),
        expert_out: one(2),
        levels: one(1),
        fusion_width: one(2),
        tower_hidden: one(2),
    };
    GenomeSpace::new(search, ModelTemplate::new(2, 2, 2)).unwrap()
}

fn with_values(g: &Genome, f: impl Fn(usize) -> f64) -> Genome {
    let mut out = g.clone();
    out.weights.values_mut().iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    out
}

fn evaluated(fitness: &[f64]) -> Population {
    let space = small_space();
    let members = fitness
        .iter()
        .map(|&f| Individual { fitness: Some(f), ..Individual::new(space.zero_genome()) })
        .collect();
    Population { members, generation: 0 }
}

#[test]
fn blend_is_exact_for_same_architecture_parents() {
    let space = small_space();
    let base = space.zero_genome();
    let a = with_values(&base, |i| (i as f64 * 0.37).sin());
    let b = with_values(&base, |i| (i as f64 * 0.11).cos() * 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for alpha in [0.0, 0.25, 0.5, 1.0] {
        let child = crossover_with_alpha(&space, &a, &b, alpha, &mut rng);
        assert_eq!(child.arch, a.arch);
        for ((c, x), y) in child.weights.values().iter().zip(a.weights.values()).zip(b.weights.values()) {
            let expected = alpha * x + (1.0 - alpha) * y;
            assert!((c - expected).abs() <= 1e-15 * (1.0 + expected.abs()), "alpha {alpha}");
        }
    }
}

#[test]
fn alpha_one_reproduces_first_parent() {
    let space = small_space();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = space.random_genome(&mut rng);
    let b = space.random_genome(&mut rng);
    let child = crossover_with_alpha(&space, &a, &b, 1.0, &mut rng);
    assert_eq!(child.arch, a.arch);
    assert_eq!(child.weights, a.weights);
}

#[test]
fn midpoint_blend_example() {
    let space = small_space();
    let base = space.zero_genome();
    let a = with_values(&base, |i| if i % 2 == 0 { 1.0 } else { 2.0 });
    let b = with_values(&base, |i| if i % 2 == 0 { 3.0 } else { 4.0 });
    let child = crossover_with_alpha(&space, &a, &b, 0.5, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(&child.weights.values()[..2], &[2.0, 3.0]);
}

#[test]
fn identical_parents_give_identical_child() {
    let space = small_space();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = space.random_genome(&mut rng);
    for _ in 0..10 {
        let child = crossover(&space, &a, &a, &mut rng);
        assert_eq!(child.arch, a.arch);
        assert_eq!(child.weights, a.weights);
    }
}

#[test]
fn zero_mutation_is_identity() {
    let space = small_space();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = space.random_genome(&mut rng);
    assert_eq!(mutate(&space, &a, 0.0, 0.0, &mut rng), a);
}

#[test]
fn perturbation_moments_match_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sigma = 0.02;
    let n = 100_000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let mut w = [0.0];
        perturb_weights(&mut w, sigma, &mut rng);
        sum += w[0];
        sq += w[0] * w[0];
    }
    let mean = sum / n as f64;
    let std = (sq / n as f64 - mean * mean).sqrt();
    assert!(mean.abs() <= 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    assert!((std - sigma).abs() <= 0.02 * sigma, "std {std}");
}

#[test]
fn full_gene_resampling_stays_in_bounds() {
    let space = small_space();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut g = space.default_genome(&mut rng);
    for _ in 0..50 {
        g = mutate(&space, &g, 0.01, 1.0, &mut rng);
        space.check_genome(&g).unwrap();
    }
}

#[test]
fn full_tournament_returns_argmax() {
    let pop = evaluated(&[0.1, 0.9, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        assert_eq!(tournament_select(&pop, 3, &mut rng).unwrap(), 1);
    }
}

#[test]
fn tournament_ties_go_to_lower_index() {
    let pop = evaluated(&[0.5, 0.9, 0.9, 0.1]);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    assert_eq!(tournament_select(&pop, 4, &mut rng).unwrap(), 1);
}

#[test]
fn unit_tournament_is_uniform() {
    let n = 8;
    let pop = evaluated(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 10_000;
    let mut counts = vec![0usize; n];
    for _ in 0..trials {
        counts[tournament_select(&pop, 1, &mut rng).unwrap()] += 1;
    }
    let expected = trials as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // upper 1% point of chi-square with 7 degrees of freedom
    assert!(chi2 < 18.475, "chi2 {chi2}");
}

#[test]
fn unevaluated_member_is_a_state_error() {
    let mut pop = evaluated(&[0.1, 0.2]);
    pop.members[1].fitness = None;
    let r = tournament_select(&pop, 2, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(matches!(r, Err(hierfuse_core::Error::State(_))));
}

#[test]
fn config_guards() {
    let ok = EvolutionConfig::default();
    ok.validate().unwrap();
    for bad in [
        EvolutionConfig { population_size: 1, ..ok.clone() },
        EvolutionConfig { elitism_count: 8, ..ok.clone() },
        EvolutionConfig { tournament_k: 9, ..ok.clone() },
        EvolutionConfig { tournament_k: 0, ..ok.clone() },
        EvolutionConfig { sigma: 0.0, ..ok.clone() },
        EvolutionConfig { generations: 0, ..ok.clone() },
        EvolutionConfig { arch_mutation_prob: 1.5, ..ok.clone() },
    ] {
        assert!(bad.validate().is_err());
    }
}

fn sphere(g: &mut Genome, _: &EvalContext) -> f64 {
    -g.weights.squared_norm()
}

fn sphere_config(seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        population_size: 16,
        generations: 20,
        sigma: 0.1,
        elitism_count: 1,
        arch_mutation_prob: 0.0,
        master_seed: seed,
        ..Default::default()
    }
}

/// Evaluates in reverse order to mimic a different schedule.
struct Reversed;

impl Parallelism for Reversed {
    fn map<T: Send, U: Send, F: Fn(T) -> U + Sync + Send>(&self, items: Vec<T>, f: F) -> Vec<U> {
        let mut out: Vec<U> = items.into_iter().rev().map(f).collect();
        out.reverse();
        out
    }
}

#[test]
fn sphere_benchmark_improves_and_is_monotone() {
    let space = fixed_space();
    let cfg = sphere_config(42);
    let out = Evolution::new(&cfg, &space, &sphere, &Sequential).unwrap().run().unwrap();
    assert_eq!(out.history.len(), 21);
    let first = out.history[0].best_fitness;
    let last = out.history[20].best_fitness;
    assert!(last >= 0.5 * first, "gen0 {first}, gen20 {last}");
    for w in out.history.windows(2) {
        assert!(w[1].best_fitness >= w[0].best_fitness);
    }
}

#[test]
fn trace_is_schedule_independent() {
    let space = small_space();
    let cfg = sphere_config(5);
    let a = Evolution::new(&cfg, &space, &sphere, &Sequential).unwrap().run().unwrap();
    let b = Evolution::new(&cfg, &space, &sphere, &Reversed).unwrap().run().unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_generation_and_history_bookkeeping() {
    let space = small_space();
    let cfg = EvolutionConfig { generations: 1, population_size: 4, ..sphere_config(1) };
    let out = Evolution::new(&cfg, &space, &sphere, &Sequential).unwrap().run().unwrap();
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.population.generation, 1);
    assert_eq!(out.population.members.len(), 4);
    assert_eq!(out.operator_calls, 2 * 3);
}

#[test]
fn patience_stops_on_a_flat_landscape() {
    let space = small_space();
    let flat = |_: &mut Genome, _: &EvalContext| 1.0;
    let cfg = EvolutionConfig { convergence_patience: 2, ..sphere_config(1) };
    let out = Evolution::new(&cfg, &space, &flat, &Sequential).unwrap().run().unwrap();
    assert_eq!(out.history.len(), 3);
}

#[test]
fn non_finite_fitness_becomes_negative_infinity() {
    let space = small_space();
    let nan = |g: &mut Genome, _: &EvalContext| if g.birth_gen == 0 { f64::NAN } else { 0.0 };
    let cfg = EvolutionConfig { generations: 1, population_size: 3, ..sphere_config(1) };
    let out = Evolution::new(&cfg, &space, &nan, &Sequential).unwrap().run().unwrap();
    assert_eq!(out.history[0].best_fitness, f64::NEG_INFINITY);
    assert_eq!(out.history[0].mean_fitness, f64::NEG_INFINITY);
}

#[test]
fn member_zero_is_the_mid_range_default() {
    let space = small_space();
    let cfg = sphere_config(3);
    let evo = Evolution::new(&cfg, &space, &sphere, &Sequential).unwrap();
    let pop = evo.initial_population();
    assert_eq!(pop.members[0].genome.arch, ArchGenes::midpoint(&space.search));
    let expected = space.default_genome(&mut rng::stream(3, &[rng::tags::INIT, 0]));
    assert_eq!(pop.members[0].genome, expected);
}

#[test]
fn relayout_keeps_matching_blocks() {
    let space = small_space();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = space.random_genome(&mut rng);
    let mut arch = g.arch;
    arch.tower_hidden[0] = if arch.tower_hidden[0] == 2 { 3 } else { 2 };
    let w: ParamVector = space.relayout(&g.weights, &arch, &mut rng);
    let kept = w.block("expert.text.0.w").unwrap();
    let old = g.weights.block("expert.text.0.w").unwrap();
    assert_eq!(w.block_values(kept), g.weights.block_values(old));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operators_preserve_genome_validity(seed in any::<u64>(), p in 0.0f64..1.0, sigma in 0.0f64..0.5) {
        let space = small_space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = space.random_genome(&mut rng);
        let b = space.random_genome(&mut rng);
        let c = crossover(&space, &a, &b, &mut rng);
        prop_assert!(space.check_genome(&c).is_ok());
        let m = mutate(&space, &c, sigma, p, &mut rng);
        prop_assert!(space.check_genome(&m).is_ok());
    }

    #[test]
    fn gene_accessors_round_trip(i in 0usize..ArchGenes::COUNT, v in 1u32..100) {
        let mut g = ArchGenes::midpoint(&SearchSpace::default());
        g.set_gene(i, v);
        prop_assert_eq!(g.gene(i), v);
    }
}
