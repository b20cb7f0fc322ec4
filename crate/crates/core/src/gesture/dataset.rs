use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{DYNAMIC_MIN_FRAMES, DYNAMIC_WINDOW};
use super::{GestureClass, GestureError, HandKeypoints, HandSynth};
use crate::seed::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// One labelled recording. On disk the split is optional and defaults to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureSample {
    pub label: GestureClass,
    pub frames: Vec<HandKeypoints>,
    #[serde(default)]
    pub split: Split,
}

impl GestureSample {
    pub fn new(
        label: GestureClass,
        frames: Vec<HandKeypoints>,
        split: Split,
    ) -> Result<Self, GestureError> {
        let s = Self {
            label,
            frames,
            split,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), GestureError> {
        if self.label == GestureClass::Unknown {
            return Err(GestureError::UnknownClass);
        }
        let min = if self.label.is_dynamic() {
            DYNAMIC_MIN_FRAMES
        } else {
            1
        };
        if self.frames.len() < min {
            return Err(GestureError::InvalidHand(format!(
                "{} sample needs at least {min} frames, got {}",
                self.label,
                self.frames.len()
            )));
        }
        Ok(())
    }
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: Vec<GestureClass>,
    pub per_class: usize,
    pub noise_sigma: f64,
    /// Fraction of each class held out as the test split.
    pub test_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn static_classes(per_class: usize, seed: u64) -> Self {
        Self {
            classes: GestureClass::STATIC.to_vec(),
            per_class,
            noise_sigma: 0.003,
            test_fraction: 0.2,
            seed,
        }
    }

    pub fn dynamic_classes(per_class: usize, seed: u64) -> Self {
        Self {
            classes: GestureClass::DYNAMIC.to_vec(),
            ..Self::static_classes(per_class, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GestureDataset {
    pub samples: Vec<GestureSample>,
    /// Seed of the generator, when synthesized.
    pub seed: Option<u64>,
}

impl GestureDataset {
    pub fn new(samples: Vec<GestureSample>) -> Result<Self, GestureError> {
        for s in &samples {
            s.validate()?;
        }
        Ok(Self {
            samples,
            seed: None,
        })
    }

    /// Static classes get one frame, dynamic classes a full window. The last
    /// `test_fraction` of each class is tagged as test.
    pub fn synthesize(spec: &SynthSpec) -> Result<Self, GestureError> {
        let n_test = (spec.per_class as f64 * spec.test_fraction).round() as usize;
        let jobs: Vec<(GestureClass, usize)> = spec
            .classes
            .iter()
            .flat_map(|&c| (0..spec.per_class).map(move |i| (c, i)))
            .collect();
        let samples = jobs
            .par_iter()
            .map(|&(class, i)| {
                let frames = if class.is_dynamic() {
                    DYNAMIC_WINDOW
                } else {
                    1
                };
                let seed = sample_seed(spec.seed, class, i);
                let hand = HandSynth::new(class)
                    .noise(spec.noise_sigma)
                    .frames(frames)
                    .seed(seed)
                    .generate()?;
                let split = if i >= spec.per_class - n_test {
                    Split::Test
                } else {
                    Split::Train
                };
                GestureSample::new(class, hand, split)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            samples,
            seed: Some(spec.seed),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train(&self) -> impl Iterator<Item = &GestureSample> {
        self.samples.iter().filter(|s| s.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &GestureSample> {
        self.samples.iter().filter(|s| s.split == Split::Test)
    }

    /// Keeps the samples whose label satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(GestureClass) -> bool) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .filter(|s| keep(s.label))
                .cloned()
                .collect(),
            seed: self.seed,
        }
    }

    pub fn read_jsonl(reader: impl Read) -> Result<Self, GestureError> {
        let mut samples = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: GestureSample =
                serde_json::from_str(&line).map_err(|source| GestureError::Parse {
                    line: i + 1,
                    source,
                })?;
            sample.validate()?;
            samples.push(sample);
        }
        Ok(Self {
            samples,
            seed: None,
        })
    }

    pub fn write_jsonl(&self, writer: impl Write) -> Result<(), GestureError> {
        let mut w = BufWriter::new(writer);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GestureError> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), GestureError> {
        self.write_jsonl(std::fs::File::create(path)?)
    }
}

/// Independent, order-free per-sample seed.
fn sample_seed(seed: u64, class: GestureClass, i: usize) -> u64 {
    splitmix64(seed ^ ((class as u64) << 40) ^ (i as u64))
}
