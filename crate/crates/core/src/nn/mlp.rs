use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::build_layout;
use super::{Activation, BlockKind, DenseLayer, ParamBlock, ParamVector};
use crate::error::{config, shape, state};
use crate::{Error, Result};

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Activations cached by a forward pass, consumed by [`Mlp::backward`].
///
/// `values[0]` is the input, `values[i + 1]` the output of layer `i`.
#[derive(Debug, Clone, Default)]
pub struct GradTape {
    values: Vec<Vec<f64>>,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }

    /// Output of the last recorded layer.
    pub fn output(&self) -> Option<&[f64]> {
        self.values.last().map(Vec::as_slice)
    }
}

impl Mlp {
    /// Validates that dimensions chain and that softmax only closes the net.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(config("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(shape(format!(
                    "layer out_dim {} does not feed next in_dim {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let last = layers.len() - 1;
        if layers[..last].iter().any(|l| l.activation() == Activation::Softmax) {
            return Err(config("softmax is only allowed on the final layer"));
        }
        Ok(Self { layers })
    }

    /// Zero-initialized net `in_dim -> widths[0] -> ... -> widths[last]`.
    pub fn zeros(in_dim: usize, widths: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        Self::build(in_dim, widths, hidden, output, DenseLayer::zeros)
    }

    /// Glorot-uniform net with the same shape rules as [`Mlp::zeros`].
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(in_dim, widths, hidden, output, |i, o, a| DenseLayer::xavier(i, o, a, rng))
    }

    fn build(
        in_dim: usize,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        mut make: impl FnMut(usize, usize, Activation) -> Result<DenseLayer>,
    ) -> Result<Self> {
        if widths.is_empty() {
            return Err(config("an MLP needs at least one layer width"));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = in_dim;
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() { output } else { hidden };
            layers.push(make(fan_in, w, act)?);
            fan_in = w;
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Runs the net. With a tape, every layer's input and output is cached.
    pub fn forward(&self, input: &[f64], tape: Option<&mut GradTape>) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::InputShape { expected: self.in_dim(), got: input.len() });
        }
        match tape {
            Some(tape) => {
                tape.clear();
                tape.values.push(input.to_vec());
                for layer in &self.layers {
                    let next = layer.forward(tape.values.last().expect("tape holds the input"));
                    tape.values.push(next);
                }
                Ok(tape.values.last().cloned().unwrap_or_default())
            }
            None => {
                let mut x = self.layers[0].forward(input);
                for layer in &self.layers[1..] {
                    x = layer.forward(&x);
                }
                Ok(x)
            }
        }
    }

    /// Reverse pass: returns `dL/dparams` (in [`Mlp::layout`] order) and `dL/dinput`.
    pub fn backward(&self, tape: &GradTape, output_grad: &[f64]) -> Result<(ParamVector, Vec<f64>)> {
        let mut grads = ParamVector::zeros(self.layout(""));
        let dx = self.backward_into(tape, output_grad, grads.values_mut())?;
        Ok((grads, dx))
    }

    /// Like [`Mlp::backward`] but accumulates into a caller-owned slice of
    /// length [`Mlp::param_count`].
    pub fn backward_into(&self, tape: &GradTape, output_grad: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if tape.values.len() != self.layers.len() + 1 {
            return Err(state("backward called without a matching forward tape"));
        }
        if output_grad.len() != self.out_dim() {
            return Err(Error::InputShape { expected: self.out_dim(), got: output_grad.len() });
        }
        if grads.len() != self.param_count() {
            return Err(shape("gradient buffer length differs from parameter count"));
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        let mut dy = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let slot = &mut grads[offsets[i]..offsets[i] + layer.param_count()];
            dy = layer.backward(&tape.values[i], &tape.values[i + 1], &dy, slot);
        }
        Ok(dy)
    }

    /// Block layout with names `"{prefix}{layer}.w"` / `"{prefix}{layer}.b"`.
    pub fn layout(&self, prefix: &str) -> Vec<ParamBlock> {
        build_layout(layer_blocks(prefix, self.layers.iter().map(|l| (l.in_dim(), l.out_dim()))))
    }

    /// Copies weights into `out` (length [`Mlp::param_count`]).
    pub fn write_params(&self, out: &mut [f64]) {
        let mut at = 0;
        for layer in &self.layers {
            for src in [layer.weights(), layer.bias()] {
                out[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
    }

    /// Loads weights from `src` (length [`Mlp::param_count`]).
    pub fn read_params(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                src.len()
            )));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let n = layer.weights().len();
            layer.weights_mut().copy_from_slice(&src[at..at + n]);
            at += n;
            let n = layer.bias().len();
            layer.bias_mut().copy_from_slice(&src[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn flatten(&self) -> ParamVector {
        let mut pv = ParamVector::zeros(self.layout(""));
        self.write_params(pv.values_mut());
        pv
    }

    /// Inverse of [`Mlp::flatten`]; the layout must match this architecture.
    pub fn unflatten(&mut self, params: &ParamVector) -> Result<()> {
        if params.layout() != self.layout("").as_slice() {
            return Err(shape("parameter layout does not match network architecture"));
        }
        self.read_params(params.values())
    }
}

/// `(name, kind, rows, cols)` entries for a stack of `(in, out)` layers.
pub(crate) fn layer_blocks<I>(prefix: &str, dims: I) -> Vec<(String, BlockKind, usize, usize)>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let mut out = Vec::new();
    for (i, (fan_in, fan_out)) in dims.into_iter().enumerate() {
        out.push((format!("{prefix}{i}.w"), BlockKind::Weight, fan_out, fan_in));
        out.push((format!("{prefix}{i}.b"), BlockKind::Bias, fan_out, 1));
    }
    out
}

/// Dimension chain `(in, out)` for `in_dim -> widths...`.
pub(crate) fn chain_dims(in_dim: usize, widths: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(widths.len());
    let mut fan_in = in_dim;
    for &w in widths {
        dims.push((fan_in, w));
        fan_in = w;
    }
    dims
}
