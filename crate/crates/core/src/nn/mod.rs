//! Dense-network primitives: layers, MLPs with a gradient tape, flat
//! parameter vectors and the Adam optimizer.
//!
//! All arithmetic is `f64`. Weights are stored row-major with shape
//! `(out_dim, in_dim)`; the flat parameter order of a layer is its weight
//! matrix followed by its bias.

mod activation;
mod adam;
mod layer;
mod mlp;
mod params;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::DenseLayer;
pub use mlp::{GradTape, Mlp};
pub use params::{BlockKind, ParamBlock, ParamVector};
pub(crate) use layer::xavier_fill;

/// Layout of a sequence of MLPs given `(prefix, in_dim, widths)` for each.
pub(crate) fn params_layout_for<'a, I>(modules: I) -> alloc::vec::Vec<ParamBlock>
where
    I: IntoIterator<Item = (&'a str, usize, &'a [usize])>,
{
    let mut entries = alloc::vec::Vec::new();
    for (prefix, in_dim, widths) in modules {
        entries.extend(mlp::layer_blocks(prefix, mlp::chain_dims(in_dim, widths)));
    }
    params::build_layout(entries)
}
