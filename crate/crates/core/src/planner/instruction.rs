use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::gesture::GestureRepresentation;

/// Slack allowed between the gesture and the spoken words.
pub const GESTURE_SPEECH_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstruction")]
pub struct Instruction {
    pub speech_text: String,
    #[serde(default)]
    pub word_timings: Vec<WordTiming>,
    #[serde(default)]
    pub gesture: Option<GestureRepresentation>,
    #[serde(default)]
    pub gesture_time: Option<f64>,
}

#[derive(Deserialize)]
struct RawInstruction {
    speech_text: String,
    #[serde(default)]
    word_timings: Vec<WordTiming>,
    #[serde(default)]
    gesture: Option<GestureRepresentation>,
    #[serde(default)]
    gesture_time: Option<f64>,
}

impl TryFrom<RawInstruction> for Instruction {
    type Error = PlannerError;

    fn try_from(r: RawInstruction) -> Result<Self, PlannerError> {
        Instruction::new(r.speech_text, r.word_timings, r.gesture, r.gesture_time)
    }
}

impl Instruction {
    pub fn new(
        speech_text: impl Into<String>,
        word_timings: Vec<WordTiming>,
        gesture: Option<GestureRepresentation>,
        gesture_time: Option<f64>,
    ) -> Result<Self, PlannerError> {
        let bad = |m: String| Err(PlannerError::InvalidInstruction(m));
        for w in &word_timings {
            if !(w.start.is_finite() && w.end.is_finite() && w.start <= w.end) {
                return bad(format!(
                    "word '{}' has an invalid span [{}, {}]",
                    w.word, w.start, w.end
                ));
            }
        }
        if word_timings.windows(2).any(|p| p[1].start < p[0].start) {
            return bad("word timings are not ordered".into());
        }
        if let (Some(t), Some(first), Some(last)) =
            (gesture_time, word_timings.first(), word_timings.last())
        {
            if t < first.start - GESTURE_SPEECH_SLACK || t > last.end + GESTURE_SPEECH_SLACK {
                return bad(format!("gesture time {t} is outside the utterance span"));
            }
        }
        Ok(Self {
            speech_text: speech_text.into(),
            word_timings,
            gesture,
            gesture_time,
        })
    }

    /// Speech with no timings or gesture.
    pub fn speech(text: impl Into<String>) -> Self {
        Self {
            speech_text: text.into(),
            word_timings: Vec::new(),
            gesture: None,
            gesture_time: None,
        }
    }

    pub fn with_gesture(mut self, g: GestureRepresentation) -> Self {
        self.gesture = Some(g);
        self
    }

    /// Evenly spaced word timings starting at `t0`, `dt` seconds per word.
    pub fn timed(text: &str, t0: f64, dt: f64) -> Vec<WordTiming> {
        text.split_whitespace()
            .enumerate()
            .map(|(i, w)| WordTiming {
                word: w.to_owned(),
                start: t0 + i as f64 * dt,
                end: t0 + (i + 1) as f64 * dt,
            })
            .collect()
    }
}

/// The two comment lines describing instruction `index` (no trailing newline).
pub fn textualize_instruction(i: &Instruction, index: usize) -> String {
    let speech = i.speech_text.trim();
    let speech = if speech.is_empty() {
        "(no speech)"
    } else {
        speech
    };
    let gesture = match &i.gesture {
        None => "none detected".to_owned(),
        Some(GestureRepresentation::Label(l)) => l.clone(),
        Some(GestureRepresentation::Description(d)) => d.clone(),
        Some(GestureRepresentation::Numeric(obs)) => {
            let frame = obs.key_frame();
            let mut s = format!("hand keypoints at t={:.3}s:", frame.timestamp);
            for p in &frame.world {
                let _ = write!(s, " [{:.3}, {:.3}, {:.3}]", p.x, p.y, p.z);
            }
            s
        }
    };
    format!("# Instruction {index}: {speech}\n# Gesture: {gesture}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{synth_gesture, GestureClass, GestureObservation};

    #[test]
    fn label_line() {
        let i = Instruction::speech("give me that tool")
            .with_gesture(GestureRepresentation::label(GestureClass::Pointing));
        assert_eq!(
            textualize_instruction(&i, 0),
            "# Instruction 0: give me that tool\n# Gesture: pointing"
        );
    }

    #[test]
    fn missing_gesture_line() {
        assert_eq!(
            textualize_instruction(&Instruction::speech("stop"), 3),
            "# Instruction 3: stop\n# Gesture: none detected"
        );
    }

    #[test]
    fn description_is_verbatim() {
        let i = Instruction::speech("pick up the water jug")
            .with_gesture(GestureRepresentation::description(GestureClass::Pointing));
        assert_eq!(
            textualize_instruction(&i, 0).lines().nth(1).unwrap(),
            "# Gesture: index finger extends out while others curl inward"
        );
    }

    #[test]
    fn numeric_lists_the_key_frame() {
        let frames = synth_gesture(GestureClass::Fist, 0.0, 3, 1).unwrap();
        let obs =
            GestureObservation::new(GestureClass::Fist, 0.9, frames.clone(), frames[1].timestamp)
                .unwrap();
        let text = textualize_instruction(
            &Instruction::speech("x").with_gesture(GestureRepresentation::Numeric(obs)),
            0,
        );
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.matches('[').count(), 21);
        assert!(line.contains(&format!("t={:.3}s", frames[1].timestamp)));
    }

    #[test]
    fn timing_invariants() {
        let words = Instruction::timed("put it there", 1.0, 0.3);
        assert!(Instruction::new("put it there", words.clone(), None, Some(2.5)).is_ok());
        assert!(Instruction::new("put it there", words.clone(), None, Some(5.0)).is_err());
        let mut shuffled = words;
        shuffled.swap(0, 2);
        assert!(Instruction::new("put it there", shuffled, None, None).is_err());
        let json = r#"{"speech_text":"hi","word_timings":[{"word":"hi","start":1.0,"end":0.5}]}"#;
        assert!(serde_json::from_str::<Instruction>(json).is_err());
    }
}
