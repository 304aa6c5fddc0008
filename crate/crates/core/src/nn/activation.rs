use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
    /// Only valid as the activation of a network's final layer.
    Softmax,
}

impl Activation {
    /// Applies the activation in place to pre-activations `z`.
    pub(crate) fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Tanh => z.iter_mut().for_each(|v| *v = math::tanh(*v)),
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Identity => {}
            Activation::Softmax => {
                let p = math::softmax_scaled(z, 1.0);
                z.copy_from_slice(&p);
            }
        }
    }

    /// Maps `dL/dy` to `dL/dz` given the cached outputs `y`.
    pub(crate) fn backprop(self, y: &[f64], dy: &[f64], dz: &mut [f64]) {
        match self {
            Activation::Tanh => {
                for ((d, &g), &o) in dz.iter_mut().zip(dy).zip(y) {
                    *d = g * (1.0 - o * o);
                }
            }
            Activation::Relu => {
                for ((d, &g), &o) in dz.iter_mut().zip(dy).zip(y) {
                    *d = if o > 0.0 { g } else { 0.0 };
                }
            }
            Activation::Identity => dz.copy_from_slice(dy),
            Activation::Softmax => {
                let inner = math::dot(y, dy);
                for ((d, &g), &o) in dz.iter_mut().zip(dy).zip(y) {
                    *d = o * (g - inner);
                }
            }
        }
    }
}
