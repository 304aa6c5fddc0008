use alloc::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::engine::Population;
use super::genome::{ArchGenes, Genome, GenomeSpace};
use crate::error::state;
use crate::nn::{ParamBlock, ParamVector};
use crate::{Error, Result};

/// Blend crossover with `α ~ U[0, 1]`.
pub fn crossover<R: Rng + ?Sized>(space: &GenomeSpace, p_i: &Genome, p_j: &Genome, rng: &mut R) -> Genome {
    let alpha: f64 = rng.random();
    crossover_with_alpha(space, p_i, p_j, alpha, rng)
}

/// Crossover with a fixed mixing weight.
///
/// Each gene comes from `p_i` with probability `alpha`. Weight blocks present
/// with the offspring's shape in both parents are blended
/// `alpha * w_i + (1 - alpha) * w_j`; a block matching only one parent is
/// copied from it; anything else is freshly initialized.
pub fn crossover_with_alpha<R: Rng + ?Sized>(
    space: &GenomeSpace,
    p_i: &Genome,
    p_j: &Genome,
    alpha: f64,
    rng: &mut R,
) -> Genome {
    let mut arch = p_i.arch;
    for g in 0..ArchGenes::COUNT {
        let u: f64 = rng.random();
        arch.set_gene(g, if u < alpha { p_i.arch.gene(g) } else { p_j.arch.gene(g) });
    }

    let idx_i = block_index(&p_i.weights);
    let idx_j = block_index(&p_j.weights);
    let mut weights = ParamVector::zeros(space.layout_for(&arch));
    let layout = weights.layout().to_vec();
    for block in &layout {
        let bi = idx_i.get(block.name.as_str()).filter(|b| b.same_shape(block));
        let bj = idx_j.get(block.name.as_str()).filter(|b| b.same_shape(block));
        let dst = &mut weights.values_mut()[block.range()];
        match (bi, bj) {
            (Some(bi), Some(bj)) => {
                let wi = p_i.weights.block_values(bi);
                let wj = p_j.weights.block_values(bj);
                for ((d, &a), &b) in dst.iter_mut().zip(wi).zip(wj) {
                    *d = if a == b { a } else { alpha * a + (1.0 - alpha) * b };
                }
            }
            (Some(bi), None) => dst.copy_from_slice(p_i.weights.block_values(bi)),
            (None, Some(bj)) => dst.copy_from_slice(p_j.weights.block_values(bj)),
            (None, None) => GenomeSpace::init_block(block, dst, rng),
        }
    }
    Genome { arch, weights, birth_gen: p_i.birth_gen.max(p_j.birth_gen), trained_epochs: p_i.trained_epochs.max(p_j.trained_epochs) }
}

fn block_index(p: &ParamVector) -> BTreeMap<&str, &ParamBlock> {
    p.layout().iter().map(|b| (b.name.as_str(), b)).collect()
}

/// Gaussian mutation: genes resampled with probability `arch_prob`, then
/// i.i.d. `N(0, sigma)` noise on every weight.
pub fn mutate<R: Rng + ?Sized>(space: &GenomeSpace, p: &Genome, sigma: f64, arch_prob: f64, rng: &mut R) -> Genome {
    let mut arch = p.arch;
    if arch_prob > 0.0 {
        for g in 0..ArchGenes::COUNT {
            if rng.random::<f64>() < arch_prob {
                arch.set_gene(g, space.search.range(ArchGenes::kind(g)).sample(rng));
            }
        }
    }
    let mut weights = if space.layout_for(&arch) == p.weights.layout() {
        p.weights.clone()
    } else {
        space.relayout(&p.weights, &arch, rng)
    };
    if sigma > 0.0 {
        perturb_weights(weights.values_mut(), sigma, rng);
    }
    Genome { arch, weights, birth_gen: p.birth_gen, trained_epochs: p.trained_epochs }
}

/// Adds `N(0, sigma)` noise to every value in place.
pub fn perturb_weights<R: Rng + ?Sized>(values: &mut [f64], sigma: f64, rng: &mut R) {
    for v in values {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// Samples `k` distinct members uniformly and returns the index of the
/// fittest, ties going to the lower index.
pub fn tournament_select<R: Rng + ?Sized>(pop: &Population, k: usize, rng: &mut R) -> Result<usize> {
    let n = pop.members.len();
    if k == 0 || k > n {
        return Err(Error::Config(alloc::format!("tournament size {k} outside [1, {n}]")));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in index::sample(rng, n, k) {
        let f = pop.members[i]
            .fitness
            .ok_or_else(|| state(alloc::format!("member {i} has not been evaluated")))?;
        best = match best {
            Some((bi, bf)) if bf > f || (bf == f && bi < i) => Some((bi, bf)),
            _ => Some((i, f)),
        };
    }
    Ok(best.map(|(i, _)| i).unwrap_or(0))
}
