//! Kinematic tabletop world, the policy interpreter, scripted scenarios and
//! the evaluation harnesses built on them.

pub mod exec;
pub mod gi;
pub mod scenario;
pub mod sweep;
pub mod world;

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;

pub use exec::{execute, Execution, Perception, TraceStep, Value};
pub use gi::{
    load_gesture_instruct, run_gesture_instruct, ExpectedCall, GestureInstructCase, GestureType,
    GiReport,
};
pub use scenario::{
    load_dir, metrics_csv, run_batch, run_scenario, run_specs, Fidelity, GestureScript, Metrics,
    ScenarioEnv, ScenarioSpec, ScriptStep,
};
pub use sweep::{run_sweep, sweep_csv, SweepConfig, SweepRow};
pub use world::{check_goal, GoalSpec, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum SimError {
    #[error("nothing graspable within reach of {0:?}")]
    GraspFailure(Point3),
    #[error("no drawer at {0:?}")]
    NoDrawerAtPos(Point3),
    #[error("the gripper is not holding anything")]
    NothingHeld,
    #[error("the gripper is already holding an object")]
    GripperBusy,
    #[error("no such object '{0}'")]
    NoSuchObject(String),
    #[error("no hand is visible")]
    NoHand,
    #[error("perception failed: {0}")]
    Perception(String),
    #[error("{call}: bad argument {got}")]
    BadArgument { call: String, got: String },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("unbound name '{0}'")]
    UnboundName(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}
