use std::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::catalog::{FunctionRole, PrimitiveCatalog};

pub const DEFAULT_MAX_TOKENS: u32 = 256;

/// Body of a completion request; also the canonical form hashed for replay keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

impl CompletionRequest {
    /// Lowercase hex SHA-256 of the compact JSON body.
    pub fn digest(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&body))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub preamble: String,
    /// Exactly the textualized instruction.
    pub instruction_block: String,
    pub stop: Vec<String>,
    temperature: f64,
    pub max_tokens: u32,
}

impl Prompt {
    /// A prompt with the default stop sequence and limits.
    pub fn raw(preamble: String, instruction_block: String) -> Self {
        Self {
            preamble,
            instruction_block,
            stop: vec!["# Instruction".to_owned()],
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn text(&self) -> String {
        format!("{}\n{}\n", self.preamble, self.instruction_block)
    }

    pub fn request(&self) -> CompletionRequest {
        CompletionRequest {
            prompt: self.text(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            stop: self.stop.clone(),
        }
    }

    pub fn digest(&self) -> String {
        self.request().digest()
    }
}

/// A worked example: instruction lines and the program that answers them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub instruction: String,
    pub program: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub header: String,
    pub catalog: PrimitiveCatalog,
    pub examples: Vec<Example>,
}

const HEADER: &str = "\
# You control a robot arm at a table next to a person. Each instruction
# arrives as two comment lines: the words the person said and the hand
# gesture seen while they spoke. Answer with Python statements that call
# only the functions below, one statement per line. Use the perception
# functions to turn a gesture into positions. If the instruction needs a
# gesture but none was detected, or the request is unclear, call say()
# with a short explanation instead of moving.";

fn example(instruction: &str, program: &str) -> Example {
    Example {
        instruction: instruction.to_owned(),
        program: program.to_owned(),
    }
}

impl PromptContext {
    pub fn new(catalog: PrimitiveCatalog) -> Self {
        Self {
            header: HEADER.to_owned(),
            catalog,
            examples: vec![
                example(
                    "# Instruction 0: give me that tool\n# Gesture: pointing",
                    "tool_pos = detect_referred_obj_pos('tool')\npick_up_obj_at_pos(tool_pos)\nhand_pos = detect_hand_center_pos()\nmove_gripper_to_pos(hand_pos)\nopen_gripper()",
                ),
                example(
                    "# Instruction 0: open this drawer\n# Gesture: index finger extends out while others curl inward",
                    "drawer_pos = detect_referred_obj_pos('drawer')\nopen_drawer_at_pos(drawer_pos)",
                ),
                example(
                    "# Instruction 0: put it over there\n# Gesture: pointing",
                    "target_pos = detect_referred_location()\nplace_obj_at_pos(target_pos)",
                ),
                example("# Instruction 0: come over here\n# Gesture: fist", "target_pos = detect_hand_center_pos()\nmove_gripper_to_pos(target_pos)"),
                example(
                    "# Instruction 0: pick up that cup\n# Gesture: none detected",
                    "say('I did not see where you pointed. Please point at the cup again.')",
                ),
            ],
        }
    }

    /// The tabletop catalog and the shipped examples.
    pub fn standard() -> Self {
        Self::new(PrimitiveCatalog::standard())
    }

    fn render_preamble(&self, history: &[Example]) -> String {
        let mut s = String::new();
        s.push_str(&self.header);
        s.push_str("\n\n# Perception functions:\n");
        for role in [FunctionRole::Perception, FunctionRole::Action] {
            if role == FunctionRole::Action {
                s.push_str("\n# Action primitives:\n");
            }
            for f in self.catalog.iter().filter(|f| f.role == role) {
                let _ = writeln!(s, "#   {}  # {}", f.signature(), f.doc);
            }
        }
        s.push_str("\n# Examples:\n");
        for e in &self.examples {
            let _ = write!(s, "\n{}\n{}\n", e.instruction, e.program);
        }
        s.push_str("\n# Session:\n");
        for turn in history {
            let _ = write!(s, "\n{}\n{}\n", turn.instruction, turn.program.trim_end());
        }
        s
    }
}

/// Builds the prompt for `instruction_lines`; earlier turns of the same
/// session come from `history`.
pub fn assemble_prompt(
    context: &PromptContext,
    history: &[Example],
    instruction_lines: &str,
) -> Prompt {
    Prompt::raw(
        context.render_preamble(history),
        instruction_lines.to_owned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINES: &str = "# Instruction 0: give me that tool\n# Gesture: pointing";

    #[test]
    fn deterministic_digest() {
        let c = PromptContext::standard();
        let (a, b) = (
            assemble_prompt(&c, &[], LINES),
            assemble_prompt(&c, &[], LINES),
        );
        assert_eq!(a.text(), b.text());
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        assert_eq!(a.temperature(), 0.0);
        let other = assemble_prompt(
            &c,
            &[],
            "# Instruction 0: give me that cup\n# Gesture: pointing",
        );
        assert_ne!(a.digest(), other.digest());
    }

    #[test]
    fn lists_every_signature() {
        for catalog in [PrimitiveCatalog::standard(), PrimitiveCatalog::extended()] {
            let p = assemble_prompt(&PromptContext::new(catalog.clone()), &[], LINES);
            let text = p.text();
            assert_eq!(
                catalog
                    .iter()
                    .filter(|f| text.contains(&f.signature()))
                    .count(),
                catalog.len()
            );
        }
    }

    #[test]
    fn instruction_block_closes_the_prompt() {
        let p = assemble_prompt(&PromptContext::standard(), &[], LINES);
        assert!(p.text().ends_with(&format!("{LINES}\n")));
        assert_eq!(p.instruction_block, LINES);
    }

    #[test]
    fn history_changes_the_digest() {
        let c = PromptContext::standard();
        let h = [Example {
            instruction: LINES.into(),
            program: "open_gripper()".into(),
        }];
        let (a, b) = (
            assemble_prompt(&c, &[], LINES),
            assemble_prompt(&c, &h, LINES),
        );
        assert_ne!(a.digest(), b.digest());
        assert!(b.text().contains("open_gripper()\n\n# Instruction 0"));
    }

    #[test]
    fn digest_matches_an_independent_hash_of_the_wire_body() {
        let p = assemble_prompt(&PromptContext::standard(), &[], LINES);
        let body = format!(
            "{{\"prompt\":{},\"temperature\":0.0,\"max_tokens\":256,\"stop\":[\"# Instruction\"]}}",
            serde_json::to_string(&p.text()).unwrap()
        );
        assert_eq!(p.digest(), hex::encode(Sha256::digest(body.as_bytes())));
    }
}
