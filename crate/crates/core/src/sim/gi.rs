use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::Fidelity;
use super::SimError;
use crate::gesture::GestureRepresentation;
use crate::planner::{
    call_sources, plan_instruction, ArgSource, CompletionBackend, Instruction, PrimitiveCatalog,
    PromptContext,
};

pub const GI_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureType {
    Symbolic,
    Semaphoric,
    Iconic,
    Deictic,
}

impl GestureType {
    pub const ALL: [GestureType; 4] = [
        GestureType::Symbolic,
        GestureType::Semaphoric,
        GestureType::Iconic,
        GestureType::Deictic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GestureType::Symbolic => "symbolic",
            GestureType::Semaphoric => "semaphoric",
            GestureType::Iconic => "iconic",
            GestureType::Deictic => "deictic",
        }
    }
}

/// The canonical call a correct program must contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCall {
    pub primitive: String,
    /// Source of the first argument; `none` for zero-argument primitives.
    pub arg: ArgSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureInstructCase {
    pub id: String,
    pub gesture_type: GestureType,
    pub gesture_label: String,
    pub gesture_description: String,
    #[serde(default)]
    pub language_instruction: Option<String>,
    #[serde(default)]
    pub context: String,
    pub intent: String,
    pub expected: ExpectedCall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GiFile {
    format_version: u32,
    cases: Vec<GestureInstructCase>,
}

fn invalid(id: &str, m: &str) -> SimError {
    SimError::InvalidScenario(format!("case {id}: {m}"))
}

/// Schema checks beyond what deserialization enforces.
pub fn validate_cases(cases: &[GestureInstructCase]) -> Result<(), SimError> {
    let catalog = PrimitiveCatalog::extended();
    let mut ids = BTreeSet::new();
    for c in cases {
        if c.id.trim().is_empty() {
            return Err(invalid("?", "empty id"));
        }
        if !ids.insert(c.id.as_str()) {
            return Err(invalid(&c.id, "duplicate id"));
        }
        if c.gesture_label.trim().is_empty()
            || c.gesture_description.trim().is_empty()
            || c.intent.trim().is_empty()
        {
            return Err(invalid(
                &c.id,
                "label, description and intent must be non-empty",
            ));
        }
        let speech = c
            .language_instruction
            .as_deref()
            .map(str::trim)
            .filter(|s| !s.is_empty());
        match (c.gesture_type, speech) {
            (GestureType::Symbolic, Some(_)) => {
                return Err(invalid(
                    &c.id,
                    "symbolic cases take no language instruction",
                ))
            }
            (GestureType::Symbolic, None) => {}
            (_, None) => return Err(invalid(&c.id, "language instruction required")),
            _ => {}
        }
        let Some(sig) = catalog.get(&c.expected.primitive) else {
            return Err(invalid(
                &c.id,
                &format!("unknown primitive '{}'", c.expected.primitive),
            ));
        };
        if (sig.arity() == 0) != (c.expected.arg == ArgSource::None) {
            return Err(invalid(
                &c.id,
                "expected argument does not fit the primitive's arity",
            ));
        }
    }
    Ok(())
}

pub fn parse_gesture_instruct(text: &str) -> Result<Vec<GestureInstructCase>, SimError> {
    let f: GiFile = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    if f.format_version != GI_VERSION {
        return Err(SimError::InvalidScenario(format!(
            "unsupported format_version {}",
            f.format_version
        )));
    }
    validate_cases(&f.cases)?;
    Ok(f.cases)
}

pub fn load_gesture_instruct(path: &Path) -> Result<Vec<GestureInstructCase>, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    parse_gesture_instruct(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiOutcome {
    pub id: String,
    pub gesture_type: GestureType,
    pub fidelity: Fidelity,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiCell {
    pub gesture_type: GestureType,
    pub fidelity: Fidelity,
    pub correct: usize,
    pub total: usize,
}

impl GiCell {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiReport {
    pub backend: String,
    pub outcomes: Vec<GiOutcome>,
    pub table: Vec<GiCell>,
}

impl GiReport {
    pub fn cell(&self, t: GestureType, f: Fidelity) -> Option<&GiCell> {
        self.table
            .iter()
            .find(|c| c.gesture_type == t && c.fidelity == f)
    }

    pub fn overall(&self, f: Fidelity) -> (usize, usize) {
        self.table
            .iter()
            .filter(|c| c.fidelity == f)
            .fold((0, 0), |(a, b), c| (a + c.correct, b + c.total))
    }

    /// Success rate per gesture type, one column per gesture representation.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<12} {:>14} {:>14}\n", "type", "label", "description");
        let cell = |t, f| {
            self.cell(t, f).map_or("-".to_owned(), |c| {
                format!("{}/{} {:>5.1}%", c.correct, c.total, 100.0 * c.rate())
            })
        };
        for t in GestureType::ALL {
            let _ = writeln!(
                out,
                "{:<12} {:>14} {:>14}",
                t.name(),
                cell(t, Fidelity::Label),
                cell(t, Fidelity::Description)
            );
        }
        let all = |f| {
            let (c, n) = self.overall(f);
            format!(
                "{c}/{n} {:>5.1}%",
                if n == 0 {
                    0.0
                } else {
                    100.0 * c as f64 / n as f64
                }
            )
        };
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>14}",
            "overall",
            all(Fidelity::Label),
            all(Fidelity::Description)
        );
        out
    }
}

/// Whether the program calls the expected primitive with the expected
/// first-argument source. Alternative correct programs are not recognized.
pub fn scores(program: &crate::planner::PolicyProgram, expected: &ExpectedCall) -> bool {
    call_sources(program)
        .iter()
        .any(|(name, args)| *name == expected.primitive && args.first() == Some(&expected.arg))
}

fn evaluate(
    case: &GestureInstructCase,
    fidelity: Fidelity,
    backend: &dyn CompletionBackend,
    ctx: &PromptContext,
) -> GiOutcome {
    let gesture = match fidelity {
        Fidelity::Description => {
            GestureRepresentation::Description(case.gesture_description.clone())
        }
        _ => GestureRepresentation::Label(case.gesture_label.clone()),
    };
    let instruction = Instruction::speech(case.language_instruction.as_deref().unwrap_or(""))
        .with_gesture(gesture);
    let base = GiOutcome {
        id: case.id.clone(),
        gesture_type: case.gesture_type,
        fidelity,
        correct: false,
        program: None,
        error: None,
    };
    match plan_instruction(backend, ctx, &[], &instruction) {
        Ok(plan) => GiOutcome {
            correct: scores(&plan.program, &case.expected),
            program: Some(plan.text),
            ..base
        },
        Err(e) => GiOutcome {
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Plans every case from its label and from its description, each as the
/// first instruction of a fresh session over the extended catalog.
pub fn run_gesture_instruct(
    cases: &[GestureInstructCase],
    backend: &dyn CompletionBackend,
) -> GiReport {
    let ctx = PromptContext::new(PrimitiveCatalog::extended());
    let mut outcomes = Vec::new();
    for fidelity in [Fidelity::Label, Fidelity::Description] {
        outcomes.extend(cases.iter().map(|c| evaluate(c, fidelity, backend, &ctx)));
    }
    let mut table = Vec::new();
    for t in GestureType::ALL {
        for f in [Fidelity::Label, Fidelity::Description] {
            let mine: Vec<&GiOutcome> = outcomes
                .iter()
                .filter(|o| o.gesture_type == t && o.fidelity == f)
                .collect();
            if !mine.is_empty() {
                table.push(GiCell {
                    gesture_type: t,
                    fidelity: f,
                    correct: mine.iter().filter(|o| o.correct).count(),
                    total: mine.len(),
                });
            }
        }
    }
    GiReport {
        backend: backend.name().to_owned(),
        outcomes,
        table,
    }
}
