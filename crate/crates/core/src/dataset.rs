//! Samples, label bundles, the synthetic latent-factor generator and seeded
//! train/validation/test splitting.
//!
//! The generator draws a latent `z ~ N(0, I_4)` per sample. Sentiment is
//! `3 tanh(u·z)`; each modality observes `A_m z + b_m + noise` where `A_m`
//! zeroes out one latent coordinate (a different one per modality), so every
//! modality carries partial, overlapping information. Emotion is the index of
//! the closest of six fixed prototype directions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::config;
use crate::model::ModalityInputs;
use crate::objectives::{LabelField, Target};
use crate::{math, rng, Error, Result};

pub const LATENT_DIM: usize = 4;
pub const NUM_EMOTIONS: usize = 6;

/// Ground truth of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelBundle {
    pub sentiment: f64,
    pub class7: u8,
    pub class2: u8,
    pub emotion: u8,
}

impl LabelBundle {
    /// Derives the 7-class and binary labels from a sentiment score.
    pub fn from_sentiment(sentiment: f64, emotion: u8) -> Self {
        let class7 = (math::round(sentiment.clamp(-3.0, 3.0)) + 3.0) as u8;
        let class2 = u8::from(sentiment >= 0.0);
        Self { sentiment, class7, class2, emotion }
    }

    /// True when the derived fields agree with `sentiment`.
    pub fn is_consistent(&self) -> bool {
        let expected = Self::from_sentiment(self.sentiment, self.emotion);
        self.sentiment.is_finite()
            && (-3.0..=3.0).contains(&self.sentiment)
            && expected == *self
            && (self.emotion as usize) < NUM_EMOTIONS
    }

    pub fn target(&self, field: LabelField) -> Target {
        match field {
            LabelField::Sentiment => Target::Value(self.sentiment),
            LabelField::Class7 => Target::Class(self.class7 as usize),
            LabelField::Class2 => Target::Class(self.class2 as usize),
            LabelField::Emotion => Target::Class(self.emotion as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSample {
    pub id: String,
    pub inputs: ModalityInputs,
    pub labels: LabelBundle,
}

/// Parameters of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n: usize,
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub noise_level: f64,
    /// Train / validation / test fractions.
    pub ratios: [f64; 3],
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self { n: 2000, d_t: 16, d_a: 16, d_v: 16, noise_level: 0.3, ratios: [0.7, 0.15, 0.15] }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 30 {
            return Err(config("generator needs n >= 30"));
        }
        if self.d_t < 2 || self.d_a < 2 || self.d_v < 2 {
            return Err(config("generator dimensions must be >= 2"));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(config("noise_level must be finite and >= 0"));
        }
        check_ratios(&self.ratios)
    }
}

/// Provenance of a dataset, stored in every JSONL header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub spec: Option<GeneratorRecord>,
}

impl DatasetHeader {
    /// Checks a sample's shape, finiteness and label consistency.
    pub fn check_sample(&self, s: &MultimodalSample) -> Result<()> {
        let dims = [
            ("text", self.d_t, s.inputs.text.len()),
            ("audio", self.d_a, s.inputs.audio.len()),
            ("visual", self.d_v, s.inputs.visual.len()),
        ];
        for (name, expected, got) in dims {
            if expected != got {
                return Err(Error::Shape(format!("sample {}: {name} has {got} features, header says {expected}", s.id)));
            }
        }
        if !s.inputs.is_finite() {
            return Err(Error::Value(format!("sample {}: non-finite feature", s.id)));
        }
        if !s.labels.is_consistent() {
            return Err(Error::Value(format!("sample {}: inconsistent label bundle", s.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub header: DatasetHeader,
    pub train: Vec<MultimodalSample>,
    pub val: Vec<MultimodalSample>,
    pub test: Vec<MultimodalSample>,
}

impl DatasetSplit {
    /// Checks every sample against the header, id disjointness and a non-empty validation split.
    pub fn validate(&self) -> Result<()> {
        if self.val.is_empty() {
            return Err(config("validation split is empty"));
        }
        let mut ids: Vec<&str> = Vec::new();
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            self.header.check_sample(s)?;
            ids.push(&s.id);
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(config("sample ids must be unique across splits"));
        }
        Ok(())
    }
}

fn check_ratios(r: &[f64; 3]) -> Result<()> {
    if r.iter().any(|&x| x.is_nan() || x <= 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(config("split ratios must be positive and sum to 1"));
    }
    Ok(())
}

fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Seed-fixed structure of the generator.
struct LatentModel {
    direction: Vec<f64>,
    mixing: [Vec<f64>; 3],
    offsets: [Vec<f64>; 3],
    prototypes: Vec<Vec<f64>>,
}

impl LatentModel {
    fn draw<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Self {
        let mut direction = normal_vec(rng, LATENT_DIM);
        let norm = math::sqrt(direction.iter().map(|v| v * v).sum());
        direction.iter_mut().for_each(|v| *v /= norm);
        let dims = [spec.d_t, spec.d_a, spec.d_v];
        let scale = 1.0 / math::sqrt((LATENT_DIM - 1) as f64);
        let mixing = [0, 1, 2].map(|m| {
            let mut a = normal_vec(rng, dims[m] * LATENT_DIM);
            for row in a.chunks_exact_mut(LATENT_DIM) {
                row.iter_mut().for_each(|v| *v *= scale);
                // modality m is blind to latent coordinate m
                row[m] = 0.0;
            }
            a
        });
        let offsets = [0, 1, 2].map(|m| normal_vec(rng, dims[m]).into_iter().map(|v| 0.5 * v).collect());
        let prototypes = (0..NUM_EMOTIONS).map(|_| normal_vec(rng, LATENT_DIM)).collect();
        Self { direction, mixing, offsets, prototypes }
    }

    fn sample<R: Rng + ?Sized>(&self, id: String, noise: f64, rng: &mut R) -> MultimodalSample {
        let z = normal_vec(rng, LATENT_DIM);
        let sentiment = 3.0 * math::tanh(math::dot(&self.direction, &z));
        let emotion = self
            .prototypes
            .iter()
            .enumerate()
            .map(|(k, c)| (k, math::dot(c, &z)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0 as u8;
        let mut feats: [Vec<f64>; 3] = Default::default();
        for ((f, mixing), offsets) in feats.iter_mut().zip(&self.mixing).zip(&self.offsets) {
            *f = mixing
                .chunks_exact(LATENT_DIM)
                .zip(offsets)
                .map(|(row, b)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    math::dot(row, &z) + b + noise * eps
                })
                .collect();
        }
        let [text, audio, visual] = feats;
        MultimodalSample {
            id,
            inputs: ModalityInputs { text, audio, visual },
            labels: LabelBundle::from_sentiment(sentiment, emotion),
        }
    }
}

/// Draws `spec.n` samples and splits them by `spec.ratios`.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut structure_rng = rng::stream(seed, &[rng::tags::DATA, 0]);
    let latent = LatentModel::draw(spec, &mut structure_rng);
    let mut sample_rng = rng::stream(seed, &[rng::tags::DATA, 1]);
    let samples: Vec<MultimodalSample> = (0..spec.n)
        .map(|i| latent.sample(format!("s{i:06}"), spec.noise_level, &mut sample_rng))
        .collect();
    let header = DatasetHeader {
        d_t: spec.d_t,
        d_a: spec.d_a,
        d_v: spec.d_v,
        spec: Some(GeneratorRecord { spec: spec.clone(), seed }),
    };
    split_dataset(samples, header, spec.ratios, seed)
}

/// Seeded shuffle followed by a contiguous train/val/test partition.
pub fn split_dataset(
    mut samples: Vec<MultimodalSample>,
    header: DatasetHeader,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    check_ratios(&ratios)?;
    let n = samples.len();
    let n_train = math::round(n as f64 * ratios[0]) as usize;
    let n_val = math::round(n as f64 * ratios[1]) as usize;
    if n_train + n_val > n || n_val == 0 {
        return Err(config(format!("cannot split {n} samples by {ratios:?} with a non-empty validation split")));
    }
    let mut shuffle_rng = rng::stream(seed, &[rng::tags::DATA, 2]);
    samples.shuffle(&mut shuffle_rng);
    let test = samples.split_off(n_train + n_val);
    let val = samples.split_off(n_train);
    Ok(DatasetSplit { header, train: samples, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_bundle_derivation() {
        let l = LabelBundle::from_sentiment(2.7, 0);
        assert_eq!((l.class7, l.class2), (6, 1));
        let l = LabelBundle::from_sentiment(0.0, 0);
        assert_eq!((l.class7, l.class2), (3, 1));
        let l = LabelBundle::from_sentiment(-0.4, 0);
        assert_eq!((l.class7, l.class2), (3, 0));
        let l = LabelBundle::from_sentiment(-2.5, 0);
        assert_eq!(l.class7, 0);
    }

    #[test]
    fn split_sizes_follow_ratios() {
        let spec = GeneratorSpec { n: 100, ..GeneratorSpec::default() };
        let split = generate_synthetic(&spec, 1).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (70, 15, 15));
        split.validate().unwrap();
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        for spec in [
            GeneratorSpec { n: 10, ..GeneratorSpec::default() },
            GeneratorSpec { d_a: 1, ..GeneratorSpec::default() },
            GeneratorSpec { noise_level: -0.1, ..GeneratorSpec::default() },
            GeneratorSpec { ratios: [0.5, 0.5, 0.5], ..GeneratorSpec::default() },
            GeneratorSpec { ratios: [1.0, 0.0, 0.0], ..GeneratorSpec::default() },
        ] {
            assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Config(_))), "{spec:?}");
        }
    }

    #[test]
    fn modality_is_blind_to_its_latent_coordinate() {
        let spec = GeneratorSpec { n: 40, d_t: 3, d_a: 3, d_v: 3, ..GeneratorSpec::default() };
        let mut r = rng::stream(9, &[0]);
        let lm = LatentModel::draw(&spec, &mut r);
        for m in 0..3 {
            assert!(lm.mixing[m].chunks_exact(LATENT_DIM).all(|row| row[m] == 0.0));
        }
    }
}
