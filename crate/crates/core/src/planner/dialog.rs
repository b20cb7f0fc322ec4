use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;

/// Trials allowed per task before giving up.
pub const MAX_TRIALS: u32 = 3;

pub const APOLOGY: &str = "Sorry, I will not continue with that.";
pub const CHECK_QUESTION: &str = "Is this the right target?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum DialogState {
    Idle,
    Confirming {
        instruction: String,
    },
    Planning,
    /// `target` is None when the plan has nothing to point at.
    Indicating {
        target: Option<Point3>,
    },
    AwaitingYesNo,
    Executing,
    Done {
        success: bool,
    },
    Aborted {
        reason: String,
    },
    Errored {
        reason: String,
    },
}

impl DialogState {
    pub fn name(&self) -> &'static str {
        match self {
            DialogState::Idle => "Idle",
            DialogState::Confirming { .. } => "Confirming",
            DialogState::Planning => "Planning",
            DialogState::Indicating { .. } => "Indicating",
            DialogState::AwaitingYesNo => "AwaitingYesNo",
            DialogState::Executing => "Executing",
            DialogState::Done { .. } => "Done",
            DialogState::Aborted { .. } => "Aborted",
            DialogState::Errored { .. } => "Errored",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DialogEvent {
    Instruction { speech: String },
    Confirmed,
    Planned { target: Option<Point3> },
    PlanFailed { reason: String },
    Pointed,
    Answer { yes: bool },
    Finished { success: bool },
    ExecutionFailed { reason: String },
    Retry,
}

/// Outputs of a transition. Only `Execute` may change the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", content = "value", rename_all = "snake_case")]
pub enum Effect {
    Say(String),
    PointAt(Point3),
    Execute,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("illegal dialog transition: {event} in state {state}")]
pub struct IllegalTransition {
    pub state: &'static str,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    pub state: DialogState,
    /// 1-based trial number.
    pub trial: u32,
}

impl Default for Dialog {
    fn default() -> Self {
        Self {
            state: DialogState::Idle,
            trial: 1,
        }
    }
}

impl fmt::Display for Dialog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (trial {})", self.state.name(), self.trial)
    }
}

fn event_name(e: &DialogEvent) -> String {
    serde_json::to_value(e)
        .ok()
        .and_then(|v| v["event"].as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// One transition of the confirmation protocol.
pub fn dialog_step(
    d: &Dialog,
    event: DialogEvent,
) -> Result<(Dialog, Vec<Effect>), IllegalTransition> {
    use DialogEvent as E;
    use DialogState as S;
    let mut trial = d.trial;
    let (state, effects) = match (&d.state, event) {
        (S::Idle, E::Instruction { speech }) => (
            S::Confirming {
                instruction: speech.clone(),
            },
            vec![Effect::Say(speech)],
        ),
        (S::Confirming { .. }, E::Confirmed) => (S::Planning, vec![]),
        (S::Planning, E::Planned { target }) => (
            S::Indicating { target },
            target.map(Effect::PointAt).into_iter().collect(),
        ),
        (S::Planning, E::PlanFailed { reason }) => (
            S::Errored {
                reason: reason.clone(),
            },
            vec![Effect::Say(format!(
                "I could not make a plan: {reason}. Please try again."
            ))],
        ),
        (S::Indicating { .. }, E::Pointed) => {
            (S::AwaitingYesNo, vec![Effect::Say(CHECK_QUESTION.into())])
        }
        (S::AwaitingYesNo, E::Answer { yes: true }) => (S::Executing, vec![Effect::Execute]),
        (S::AwaitingYesNo, E::Answer { yes: false }) => (
            S::Aborted {
                reason: "target rejected by the user".into(),
            },
            vec![Effect::Say(APOLOGY.into())],
        ),
        (S::Executing, E::Finished { success }) => (S::Done { success }, vec![]),
        (S::Executing, E::ExecutionFailed { reason }) => (
            S::Errored {
                reason: reason.clone(),
            },
            vec![Effect::Say(format!("Something went wrong: {reason}."))],
        ),
        (S::Aborted { .. } | S::Errored { .. }, E::Retry) => {
            if trial >= MAX_TRIALS {
                (S::Done { success: false }, vec![])
            } else {
                trial += 1;
                (S::Idle, vec![])
            }
        }
        (state, event) => {
            return Err(IllegalTransition {
                state: state.name(),
                event: event_name(&event),
            })
        }
    };
    Ok((Dialog { state, trial }, effects))
}

impl Dialog {
    pub fn step(&mut self, event: DialogEvent) -> Result<Vec<Effect>, IllegalTransition> {
        let (next, effects) = dialog_step(self, event)?;
        *self = next;
        Ok(effects)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, DialogState::Done { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reach_question(d: &mut Dialog) {
        d.step(DialogEvent::Instruction {
            speech: "pick up the cup".into(),
        })
        .unwrap();
        d.step(DialogEvent::Confirmed).unwrap();
        d.step(DialogEvent::Planned {
            target: Some(Point3::new(0.0, 0.0, 1.0)),
        })
        .unwrap();
        d.step(DialogEvent::Pointed).unwrap();
    }

    #[test]
    fn confirming_repeats_the_speech() {
        let mut d = Dialog::default();
        let fx = d
            .step(DialogEvent::Instruction {
                speech: "give me that tool".into(),
            })
            .unwrap();
        assert_eq!(fx, [Effect::Say("give me that tool".into())]);
        assert_eq!(
            d.state,
            DialogState::Confirming {
                instruction: "give me that tool".into()
            }
        );
    }

    #[test]
    fn no_aborts_with_apology_and_no_execution() {
        let mut d = Dialog::default();
        reach_question(&mut d);
        let fx = d.step(DialogEvent::Answer { yes: false }).unwrap();
        assert_eq!(fx, [Effect::Say(APOLOGY.into())]);
        assert!(matches!(d.state, DialogState::Aborted { .. }));
    }

    #[test]
    fn third_abort_ends_in_failure() {
        let mut d = Dialog::default();
        for trial in 1..=3 {
            assert_eq!(d.trial, trial);
            reach_question(&mut d);
            d.step(DialogEvent::Answer { yes: false }).unwrap();
            d.step(DialogEvent::Retry).unwrap();
        }
        assert_eq!(d.state, DialogState::Done { success: false });
        assert_eq!(d.trial, 3);
    }

    #[test]
    fn illegal_transitions_are_errors() {
        let d = Dialog::default();
        let err = dialog_step(&d, DialogEvent::Answer { yes: true }).unwrap_err();
        assert_eq!(err.state, "Idle");
        assert_eq!(err.event, "answer");
        assert!(dialog_step(&d, DialogEvent::Retry).is_err());
    }

    fn any_event() -> impl Strategy<Value = DialogEvent> {
        prop_oneof![
            Just(DialogEvent::Instruction { speech: "x".into() }),
            Just(DialogEvent::Confirmed),
            Just(DialogEvent::Planned { target: None }),
            Just(DialogEvent::Planned {
                target: Some(Point3::new(0.1, 0.2, 0.3))
            }),
            Just(DialogEvent::PlanFailed { reason: "r".into() }),
            Just(DialogEvent::Pointed),
            any::<bool>().prop_map(|yes| DialogEvent::Answer { yes }),
            any::<bool>().prop_map(|success| DialogEvent::Finished { success }),
            Just(DialogEvent::ExecutionFailed { reason: "r".into() }),
            Just(DialogEvent::Retry),
        ]
    }

    proptest! {
        #[test]
        fn execute_only_on_entering_executing(events in proptest::collection::vec(any_event(), 0..60)) {
            let mut d = Dialog::default();
            for e in events {
                let before = d.clone();
                match d.step(e) {
                    Ok(fx) => {
                        let executes = fx.iter().filter(|f| **f == Effect::Execute).count();
                        prop_assert_eq!(executes, usize::from(d.state == DialogState::Executing));
                        prop_assert!(d.trial <= MAX_TRIALS && d.trial >= before.trial);
                        if d.trial > before.trial {
                            let was_failed = matches!(before.state, DialogState::Aborted { .. } | DialogState::Errored { .. });
                            prop_assert!(was_failed);
                        }
                    }
                    Err(_) => prop_assert_eq!(&d, &before),
                }
            }
        }
    }
}
