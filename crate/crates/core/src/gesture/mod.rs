//! Hand keypoints, synthetic gesture data, features and the static/dynamic
//! gesture classifiers.

mod classify;
mod dataset;
mod features;
mod grad;
mod hand;
mod lstm;
mod mlp;
mod synth;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify, evaluate_models, predict_dynamic, predict_static, Accuracy, GestureModels,
    DEFAULT_THRESHOLD, DYNAMIC_MIN_FRAMES, DYNAMIC_WINDOW,
};
pub use dataset::{GestureDataset, GestureSample, Split, SynthSpec};
pub use features::{extract_features, FeatureVector, FEATURE_LEN};
pub use grad::{gradient_check, Differentiable};
pub use hand::*;
pub use lstm::{rnn_forward, rnn_train, RecurrentModel};
pub use mlp::{mlp_forward, mlp_train, MlpModel};
pub use synth::{synth_gesture, HandSynth};
pub use train::{TrainConfig, TrainReport};

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum GestureError {
    #[error("shape mismatch: expected {expected} inputs, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{0} is not a {1} gesture class")]
    WrongClassKind(GestureClass, &'static str),
    #[error("cannot synthesize the unknown class")]
    UnknownClass,
    #[error("invalid hand record: {0}")]
    InvalidHand(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dataset line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Recognized gesture classes. Unknown is a classifier outcome, never a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureClass {
    Pointing,
    OpenPalmUp,
    OpenPalmOut,
    Fist,
    ThumbsUp,
    ThumbsDown,
    Ok,
    Pinch,
    Beckoning,
    CirclingHorizontal,
    CirclingVertical,
    Hammering,
    PickUpMotion,
    ReleaseMotion,
    Twisting,
    Unknown,
}

impl GestureClass {
    /// Output order of the static classifier.
    pub const STATIC: [GestureClass; 8] = [
        GestureClass::Pointing,
        GestureClass::OpenPalmUp,
        GestureClass::OpenPalmOut,
        GestureClass::Fist,
        GestureClass::ThumbsUp,
        GestureClass::ThumbsDown,
        GestureClass::Ok,
        GestureClass::Pinch,
    ];

    /// Output order of the dynamic classifier.
    pub const DYNAMIC: [GestureClass; 7] = [
        GestureClass::Beckoning,
        GestureClass::CirclingHorizontal,
        GestureClass::CirclingVertical,
        GestureClass::Hammering,
        GestureClass::PickUpMotion,
        GestureClass::ReleaseMotion,
        GestureClass::Twisting,
    ];

    pub fn is_static(self) -> bool {
        Self::STATIC.contains(&self)
    }

    pub fn is_dynamic(self) -> bool {
        Self::DYNAMIC.contains(&self)
    }

    /// Human-readable label, as written into the gesture comment line.
    pub fn label(self) -> &'static str {
        match self {
            GestureClass::Pointing => "pointing",
            GestureClass::OpenPalmUp => "open palm up",
            GestureClass::OpenPalmOut => "open palm out",
            GestureClass::Fist => "fist",
            GestureClass::ThumbsUp => "thumbs up",
            GestureClass::ThumbsDown => "thumbs down",
            GestureClass::Ok => "ok",
            GestureClass::Pinch => "pinch",
            GestureClass::Beckoning => "beckoning",
            GestureClass::CirclingHorizontal => "circling horizontally",
            GestureClass::CirclingVertical => "circling vertically",
            GestureClass::Hammering => "hammering",
            GestureClass::PickUpMotion => "pick up",
            GestureClass::ReleaseMotion => "release",
            GestureClass::Twisting => "twisting",
            GestureClass::Unknown => "unknown",
        }
    }

    /// Textual hand-shape/motion description (mid fidelity).
    pub fn description(self) -> &'static str {
        match self {
            GestureClass::Pointing => "index finger extends out while others curl inward",
            GestureClass::OpenPalmUp => "an open palm faces upward",
            GestureClass::OpenPalmOut => "an open palm faces outward",
            GestureClass::Fist => "a closed palm",
            GestureClass::ThumbsUp => "thumb extends out and points upward while other fingers curl inward",
            GestureClass::ThumbsDown => "thumb extends out and points down while other fingers curl inward",
            GestureClass::Ok => "thumb and index finger form a circle while others extend out",
            GestureClass::Pinch => "thumb and index finger touch each other while others curl inward",
            GestureClass::Beckoning => "an open palm faces inward and the fingers curl in and out repeatedly",
            GestureClass::CirclingHorizontal => {
                "index finger extends out while others curl inward, and the whole hand moves in a horizontal circle"
            }
            GestureClass::CirclingVertical => {
                "index finger extends out while others curl inward, and the whole hand moves in a vertical circle"
            }
            GestureClass::Hammering => "a closed palm, and the whole hand moves up and down",
            GestureClass::PickUpMotion => "an open palm first faces upward, and then all fingers curl inward",
            GestureClass::ReleaseMotion => "a closed palm first faces downward, and then all fingers extend out",
            GestureClass::Twisting => "thumb and index finger extend out while others curl inward, and the whole hand rotates",
            GestureClass::Unknown => "no recognizable hand shape",
        }
    }

    pub fn all_known() -> impl Iterator<Item = GestureClass> {
        Self::STATIC.into_iter().chain(Self::DYNAMIC)
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GestureClass {
    type Err = String;

    /// Accepts the snake_case name or the human-readable label.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        GestureClass::all_known()
            .chain([GestureClass::Unknown])
            .find(|c| {
                let snake = serde_json::to_value(c)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned));
                snake.as_deref() == Some(norm.as_str()) || c.label().replace(' ', "_") == norm
            })
            .ok_or_else(|| format!("unknown gesture class '{s}'"))
    }
}

/// A classified gesture with the frames it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureObservation {
    pub class: GestureClass,
    pub confidence: f64,
    pub frames: Vec<HandKeypoints>,
    pub gesture_time: f64,
}

impl GestureObservation {
    pub fn new(
        class: GestureClass,
        confidence: f64,
        frames: Vec<HandKeypoints>,
        gesture_time: f64,
    ) -> Result<Self, GestureError> {
        let (Some(first), Some(last)) = (frames.first(), frames.last()) else {
            return Err(GestureError::EmptySequence);
        };
        if !(first.timestamp..=last.timestamp).contains(&gesture_time) {
            return Err(GestureError::InvalidHand(format!(
                "gesture time {gesture_time} outside [{}, {}]",
                first.timestamp, last.timestamp
            )));
        }
        Ok(Self {
            class,
            confidence: confidence.clamp(0.0, 1.0),
            frames,
            gesture_time,
        })
    }

    /// The frame nearest to `gesture_time`.
    pub fn key_frame(&self) -> &HandKeypoints {
        self.frames
            .iter()
            .min_by(|a, b| {
                (a.timestamp - self.gesture_time)
                    .abs()
                    .total_cmp(&(b.timestamp - self.gesture_time).abs())
            })
            .expect("observation frames are non-empty")
    }
}

/// How a gesture is presented to the planner: label (low fidelity), text
/// description (mid) or raw keypoints (high).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum GestureRepresentation {
    Label(String),
    Description(String),
    Numeric(GestureObservation),
}

impl GestureRepresentation {
    pub fn label(class: GestureClass) -> Self {
        GestureRepresentation::Label(class.label().to_owned())
    }

    pub fn description(class: GestureClass) -> Self {
        GestureRepresentation::Description(class.description().to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_class_is_static_xor_dynamic_except_unknown() {
        for c in GestureClass::all_known() {
            assert!(c.is_static() ^ c.is_dynamic(), "{c:?}");
        }
        assert!(!GestureClass::Unknown.is_static() && !GestureClass::Unknown.is_dynamic());
    }

    #[test]
    fn class_parses_from_snake_case_and_label() {
        assert_eq!(
            "thumbs_up".parse::<GestureClass>().unwrap(),
            GestureClass::ThumbsUp
        );
        assert_eq!(
            "thumbs up".parse::<GestureClass>().unwrap(),
            GestureClass::ThumbsUp
        );
        assert_eq!(
            "Pointing".parse::<GestureClass>().unwrap(),
            GestureClass::Pointing
        );
        assert_eq!(
            "circling horizontally".parse::<GestureClass>().unwrap(),
            GestureClass::CirclingHorizontal
        );
        assert!("waving".parse::<GestureClass>().is_err());
    }

    #[test]
    fn observation_time_must_lie_within_frames() {
        let f = |t| {
            HandKeypoints::collapsed(crate::geometry::Point3::new(0.0, 0.0, 1.0), 1.0)
                .with_timestamp(t)
        };
        assert!(
            GestureObservation::new(GestureClass::Fist, 0.9, vec![f(0.0), f(1.0)], 0.5).is_ok()
        );
        assert!(
            GestureObservation::new(GestureClass::Fist, 0.9, vec![f(0.0), f(1.0)], 1.5).is_err()
        );
        assert!(matches!(
            GestureObservation::new(GestureClass::Fist, 0.9, vec![], 0.0),
            Err(GestureError::EmptySequence)
        ));
    }
}
