//! The hierarchical expert network.
//!
//! Three modality experts (text, audio, visual) and one shared expert over
//! the concatenated inputs produce the level-0 streams. Each fusion level
//! then updates every stream from the previous level:
//!
//! - modality stream `m`: `h_m(i) = g_m(i)([h_m(i-1); h_s(i-1)])`
//! - shared stream: `h_s(i) = g_s(i)([h_s(i-1); h_t(i-1); h_a(i-1); h_v(i-1)])`
//!
//! The final streams are concatenated, scaled per task by a softmax attention
//! weight computed from the final shared stream, and fed to one tower per
//! task. Separate linear probes map each final stream to a distribution over
//! the transfer task's classes for the KL transfer terms.

mod backward;
mod config;
mod network;

pub use backward::{OutputGrads, Trace};
pub use config::{FusionKind, HaenConfig, ModuleSpec};
pub use network::{ForwardOutput, HaenModel, LevelState, TaskDistributions, TaskOutput};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// The four representation streams. Indexing follows declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Text,
    Audio,
    Visual,
    Shared,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Text, Stream::Audio, Stream::Visual, Stream::Shared];
    pub const MODALITIES: [Stream; 3] = [Stream::Text, Stream::Audio, Stream::Visual];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Text => "text",
            Stream::Audio => "audio",
            Stream::Visual => "visual",
            Stream::Shared => "shared",
        }
    }
}

/// One utterance's pre-extracted feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityInputs {
    pub text: Vec<f64>,
    pub audio: Vec<f64>,
    pub visual: Vec<f64>,
}

impl ModalityInputs {
    pub fn new(text: Vec<f64>, audio: Vec<f64>, visual: Vec<f64>) -> Self {
        Self { text, audio, visual }
    }

    /// Features of a modality stream; the shared stream has no raw features.
    pub fn modality(&self, stream: Stream) -> Option<&[f64]> {
        match stream {
            Stream::Text => Some(&self.text),
            Stream::Audio => Some(&self.audio),
            Stream::Visual => Some(&self.visual),
            Stream::Shared => None,
        }
    }

    /// `[text; audio; visual]`, the shared expert's input.
    pub fn concat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.text.len() + self.audio.len() + self.visual.len());
        out.extend_from_slice(&self.text);
        out.extend_from_slice(&self.audio);
        out.extend_from_slice(&self.visual);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.text.iter().chain(&self.audio).chain(&self.visual).all(|v| v.is_finite())
    }
}
