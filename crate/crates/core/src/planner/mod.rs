//! Speech and gesture to validated policy programs: textualize, prompt,
//! complete, parse, validate, and the confirmation dialog.

pub mod backend;
pub mod catalog;
pub mod dialog;
pub mod filter;
pub mod instruction;
pub mod program;
pub mod prompt;
pub mod rules;
pub mod validate;

use serde::{Deserialize, Serialize};

pub use backend::{
    backend_registry, BackendError, CompletionBackend, RecordingBackend, RemoteBackend,
    ReplayBackend, RuleBackend, BACKEND_URL_ENV,
};
pub use catalog::{FunctionRole, FunctionSig, PrimitiveCatalog, ValueKind};
pub use dialog::{
    dialog_step, Dialog, DialogEvent, DialogState, Effect, IllegalTransition, MAX_TRIALS,
};
pub use filter::CompletionFilter;
pub use instruction::{textualize_instruction, Instruction, WordTiming};
pub use program::{parse_policy, Call, Expr, ParseError, PolicyProgram, Statement};
pub use prompt::{assemble_prompt, CompletionRequest, Example, Prompt, PromptContext};
pub use rules::{rule_plan, rule_plan_text};
pub use validate::{call_sources, requires_gesture, validate_policy, ArgSource, Violation};

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("program rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("the plan needs a gesture but none was detected")]
    MissingGesture,
}

/// A program produced for one instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub instruction_lines: String,
    pub digest: String,
    pub text: String,
    pub program: PolicyProgram,
}

impl Plan {
    /// The turn as it appears in later prompts of the same session.
    pub fn as_example(&self) -> Example {
        Example {
            instruction: self.instruction_lines.clone(),
            program: self.text.clone(),
        }
    }
}

/// Textualize, prompt, complete, parse and validate one instruction.
/// `history` holds the earlier turns of the session; the instruction is
/// numbered after them.
pub fn plan_instruction(
    backend: &dyn CompletionBackend,
    context: &PromptContext,
    history: &[Example],
    instruction: &Instruction,
) -> Result<Plan, PlannerError> {
    let lines = textualize_instruction(instruction, history.len());
    let prompt = assemble_prompt(context, history, &lines);
    let text = backend.complete(&prompt)?;
    let program = parse_policy(&text)?;
    validate_policy(&program, &context.catalog).map_err(PlannerError::Invalid)?;
    if instruction.gesture.is_none() && requires_gesture(&program, &context.catalog) {
        return Err(PlannerError::MissingGesture);
    }
    Ok(Plan {
        instruction_lines: lines,
        digest: prompt.digest(),
        text,
        program,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{GestureClass, GestureRepresentation};

    #[test]
    fn rule_pipeline_end_to_end() {
        let i = Instruction::speech("give me that tool")
            .with_gesture(GestureRepresentation::label(GestureClass::Pointing));
        let plan = plan_instruction(&RuleBackend, &PromptContext::standard(), &[], &i).unwrap();
        assert_eq!(
            plan.instruction_lines,
            "# Instruction 0: give me that tool\n# Gesture: pointing"
        );
        assert_eq!(plan.program.calls()[0].name, "detect_referred_obj_pos");
    }

    #[test]
    fn history_numbers_the_next_instruction() {
        let c = PromptContext::standard();
        let first = Instruction::speech("pick up the water jug")
            .with_gesture(GestureRepresentation::label(GestureClass::Pointing));
        let p0 = plan_instruction(&RuleBackend, &c, &[], &first).unwrap();
        let second = Instruction::speech("hand it to me")
            .with_gesture(GestureRepresentation::label(GestureClass::OpenPalmUp));
        let p1 = plan_instruction(&RuleBackend, &c, &[p0.as_example()], &second).unwrap();
        assert!(p1.instruction_lines.starts_with("# Instruction 1: "));
    }

    #[test]
    fn perception_without_gesture_is_rejected() {
        struct Canned;
        impl CompletionBackend for Canned {
            fn name(&self) -> &str {
                "canned"
            }
            fn complete(&self, _: &Prompt) -> Result<String, BackendError> {
                Ok("p = detect_referred_location()\nplace_obj_at_pos(p)".into())
            }
        }
        let err = plan_instruction(
            &Canned,
            &PromptContext::standard(),
            &[],
            &Instruction::speech("put it there"),
        )
        .unwrap_err();
        assert!(matches!(err, PlannerError::MissingGesture));
    }
}
