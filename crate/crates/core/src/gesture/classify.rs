use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    extract_features, GestureClass, GestureError, GestureObservation, HandKeypoints, MlpModel,
    RecurrentModel,
};
use crate::geometry::CameraIntrinsics;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Frames fed to the dynamic classifier (the most recent ones).
pub const DYNAMIC_WINDOW: usize = 16;
/// Shorter sequences are classified from their last frame only.
pub const DYNAMIC_MIN_FRAMES: usize = 8;

/// The trained classifier pair plus the camera their features assume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureModels {
    pub camera: CameraIntrinsics,
    pub static_model: MlpModel,
    pub dynamic_model: RecurrentModel,
}

impl GestureModels {
    pub fn load(path: &Path) -> Result<Self, GestureError> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?)
    }

    pub fn save(&self, path: &Path) -> Result<(), GestureError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }
}

fn top(probs: &[f64], classes: &[GestureClass]) -> (GestureClass, f64) {
    probs.iter().zip(classes).fold(
        (GestureClass::Unknown, f64::NEG_INFINITY),
        |best, (&p, &c)| if p > best.1 { (c, p) } else { best },
    )
}

/// Classifies a hand sequence. Fails only on an empty sequence; a low-confidence
/// or malformed-model outcome is reported as `Unknown`.
pub fn classify(
    models: &GestureModels,
    frames: &[HandKeypoints],
    threshold: f64,
) -> Result<GestureObservation, GestureError> {
    let last = frames.last().ok_or(GestureError::EmptySequence)?;
    let cam = &models.camera;
    let mut best = match models.static_model.forward(&extract_features(last, cam)) {
        Ok(p) => top(&p, &GestureClass::STATIC),
        Err(_) => (GestureClass::Unknown, 0.0),
    };
    if frames.len() >= DYNAMIC_MIN_FRAMES {
        let window = &frames[frames.len().saturating_sub(DYNAMIC_WINDOW)..];
        let feats: Vec<_> = window.iter().map(|f| extract_features(f, cam)).collect();
        let views: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        if let Ok(p) = models.dynamic_model.forward(&views) {
            let dynamic = top(&p, &GestureClass::DYNAMIC);
            if dynamic.1 > best.1 {
                best = dynamic;
            }
        }
    }
    let (class, confidence) = if best.1.is_finite() && best.1 >= threshold {
        best
    } else {
        (GestureClass::Unknown, best.1.max(0.0))
    };
    let gesture_time = frames[(frames.len() - 1) / 2].timestamp;
    GestureObservation::new(
        class,
        if confidence.is_finite() {
            confidence
        } else {
            0.0
        },
        frames.to_vec(),
        gesture_time,
    )
}

/// Argmax class of each model on its own, without the threshold or the
/// static/dynamic arbitration.
pub fn predict_static(
    models: &GestureModels,
    frame: &HandKeypoints,
) -> Result<GestureClass, GestureError> {
    let p = models
        .static_model
        .forward(&extract_features(frame, &models.camera))?;
    Ok(top(&p, &GestureClass::STATIC).0)
}

pub fn predict_dynamic(
    models: &GestureModels,
    frames: &[HandKeypoints],
) -> Result<GestureClass, GestureError> {
    let window = &frames[frames.len().saturating_sub(DYNAMIC_WINDOW)..];
    let feats: Vec<_> = window
        .iter()
        .map(|f| extract_features(f, &models.camera))
        .collect();
    let views: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
    let p = models.dynamic_model.forward(&views)?;
    Ok(top(&p, &GestureClass::DYNAMIC).0)
}

/// Held-out accuracy of the matching classifier, per class kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Scores static samples with the static model and dynamic samples with the
/// dynamic one, over the test split (or every sample if there is none).
pub fn evaluate_models(
    models: &GestureModels,
    data: &super::GestureDataset,
) -> Result<(Accuracy, Accuracy), GestureError> {
    let test: Vec<_> = data.test().collect();
    let samples: Vec<_> = if test.is_empty() {
        data.samples.iter().collect()
    } else {
        test
    };
    let (mut st, mut dy) = (
        Accuracy {
            correct: 0,
            total: 0,
        },
        Accuracy {
            correct: 0,
            total: 0,
        },
    );
    for s in samples {
        let (acc, pred) = if s.label.is_static() {
            (
                &mut st,
                predict_static(models, s.frames.last().ok_or(GestureError::EmptySequence)?)?,
            )
        } else {
            (&mut dy, predict_dynamic(models, &s.frames)?)
        };
        acc.total += 1;
        acc.correct += usize::from(pred == s.label);
    }
    Ok((st, dy))
}
