//! Central finite-difference checks of [`batch_objective`] gradients.
//!
//! The shared-probe targets are frozen at the unperturbed parameters so the
//! numeric derivative sees the same stop-gradient as the analytic one.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::MultimodalSample;
use crate::model::{HaenModel, Stream};
use crate::objectives::LossConfig;
use crate::training::{batch_objective, Teacher};
use crate::{math, Result};

/// Agreement of analytic and numeric gradients on one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖g_a - g_n‖ / max(‖g_a‖, ‖g_n‖)`, or 0 when both are below `floor`.
    pub rel_error: f64,
    pub max_abs_error: f64,
}

/// Compares the analytic gradient of the batch objective against central
/// differences with step `h`, block by block.
pub fn check_gradients(
    model: &HaenModel,
    batch: &[&MultimodalSample],
    cfg: &LossConfig,
    h: f64,
    floor: f64,
) -> Result<Vec<GroupCheck>> {
    let teacher = batch
        .iter()
        .map(|s| Ok(model.forward_full(&s.inputs, cfg.kl_temperature)?.dists.streams[Stream::Shared.index()].clone()))
        .collect::<Result<Vec<_>>>()?;
    let frozen = Teacher::Frozen(&teacher);
    let mut analytic = vec![0.0; model.param_count()];
    batch_objective(model, batch, cfg, frozen, Some(&mut analytic))?;

    let base = model.params();
    let mut probe = model.clone();
    let mut values = base.values().to_vec();
    let mut numeric = vec![0.0; values.len()];
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + h;
        probe.load_flat(&values)?;
        let up = batch_objective(&probe, batch, cfg, frozen, None)?.total;
        values[i] = orig - h;
        probe.load_flat(&values)?;
        let down = batch_objective(&probe, batch, cfg, frozen, None)?.total;
        values[i] = orig;
        numeric[i] = (up - down) / (2.0 * h);
    }

    let norm = |v: &[f64]| math::sqrt(v.iter().map(|x| x * x).sum());
    Ok(base
        .layout()
        .iter()
        .map(|b| {
            let a = &analytic[b.range()];
            let n = &numeric[b.range()];
            let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
            let (na, nn) = (norm(a), norm(n));
            let scale = na.max(nn);
            GroupCheck {
                name: b.name.clone(),
                analytic_norm: na,
                numeric_norm: nn,
                rel_error: if scale < floor { 0.0 } else { norm(&diff) / scale },
                max_abs_error: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
            }
        })
        .collect())
}
