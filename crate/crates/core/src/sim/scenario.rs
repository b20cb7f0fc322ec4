use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exec::{execute, Execution, Perception, TraceStep};
use super::world::{check_goal, GoalSpec, WorldState, GRASP_TOL};
use super::SimError;
use crate::geometry::Point3;
use crate::gesture::{
    classify, GestureClass, GestureModels, GestureObservation, GestureRepresentation,
    HandKeypoints, HandSynth, DEFAULT_THRESHOLD, DYNAMIC_WINDOW,
};
use crate::planner::{
    plan_instruction, CompletionBackend, Dialog, DialogEvent, DialogState, Effect, Example,
    Instruction, PrimitiveCatalog, PromptContext, MAX_TRIALS,
};
use crate::registry::Registry;
use crate::scene::{generate_scene, normalize, Ontology, OntologyFilter, Scene, SceneSpec};
use crate::seed::derive_seed;

pub const SCENARIO_VERSION: u32 = 1;
const DEFAULT_WRIST: Point3 = Point3 {
    x: 0.05,
    y: 0.0,
    z: 0.4,
};
const WORD_DT: f64 = 0.3;
const GESTURE_T0: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    #[default]
    Label,
    Description,
    Numeric,
}

/// How to synthesize the hand for one instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub class: GestureClass,
    /// Point to aim at; for pointing gestures only.
    #[serde(default)]
    pub target: Option<Point3>,
    /// Scene label to aim at, used when `target` is absent.
    #[serde(default)]
    pub target_label: Option<String>,
    #[serde(default)]
    pub wrist: Option<Point3>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Defaults to one frame for static classes and a full window for dynamic ones.
    #[serde(default)]
    pub frames: Option<usize>,
    #[serde(default)]
    pub fidelity: Fidelity,
}

fn default_tolerance() -> f64 {
    GRASP_TOL
}

/// Ground truth the auto-confirmer checks the indicated target against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub position: Option<Point3>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub speech: String,
    #[serde(default)]
    pub gesture: Option<GestureScript>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogChoice {
    #[default]
    Standard,
    Extended,
}

impl CatalogChoice {
    pub fn catalog(self) -> PrimitiveCatalog {
        match self {
            CatalogChoice::Standard => PrimitiveCatalog::standard(),
            CatalogChoice::Extended => PrimitiveCatalog::extended(),
        }
    }
}

fn default_backend() -> String {
    "rule".into()
}

fn default_trials() -> u32 {
    MAX_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub format_version: u32,
    pub id: String,
    pub scene: SceneSpec,
    /// Object (id or label) in the gripper at the start.
    #[serde(default)]
    pub holding: Option<String>,
    pub script: Vec<ScriptStep>,
    pub goal: GoalSpec,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub catalog: CatalogChoice,
    #[serde(default = "default_trials")]
    pub max_trials: u32,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(format!("{}: {m}", self.id)));
        if self.format_version != SCENARIO_VERSION {
            return bad(&format!(
                "unsupported format_version {}",
                self.format_version
            ));
        }
        if self.script.is_empty() {
            return bad("script is empty");
        }
        if !(1..=MAX_TRIALS).contains(&self.max_trials) {
            return bad(&format!("max_trials must be in 1..={MAX_TRIALS}"));
        }
        for s in &self.script {
            if let Some(g) = &s.gesture {
                if g.class == GestureClass::Unknown {
                    return bad("gesture class cannot be unknown");
                }
                if !(g.noise_sigma >= 0.0 && g.noise_sigma.is_finite()) {
                    return bad("noise_sigma must be a non-negative number");
                }
            }
            if let Some(e) = &s.expect {
                if !(e.tolerance > 0.0) {
                    return bad("expectation tolerance must be positive");
                }
            }
        }
        self.goal.validate()
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Everything a scenario run needs besides its spec.
#[derive(Clone)]
pub struct ScenarioEnv {
    pub backends: Registry<dyn CompletionBackend>,
    pub ontology: Ontology,
    /// Without models the scripted class is observed directly.
    pub models: Option<GestureModels>,
    pub threshold: f64,
}

impl ScenarioEnv {
    pub fn new(backends: Registry<dyn CompletionBackend>, ontology: Ontology) -> Self {
        Self {
            backends,
            ontology,
            models: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub instruction: String,
    pub observed_gesture: Option<GestureClass>,
    /// Dialog states in the order they were entered.
    pub dialog: Vec<String>,
    pub effects: Vec<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referent_correct: Option<bool>,
    pub execution: Vec<TraceStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: u32,
    pub steps: Vec<StepTrace>,
    pub planning_ok: bool,
    pub goal_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub id: String,
    /// Every expected referent was identified in some trial.
    pub planning_success: bool,
    /// The goal was reached in a trial whose planning was correct.
    pub execution_success: bool,
    pub trials_used: u32,
    pub trials: Vec<TrialTrace>,
}

pub const CSV_HEADER: &str = "id,planning_success,execution_success,trials_used";

impl Metrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            csv_field(&self.id),
            self.planning_success,
            self.execution_success,
            self.trials_used
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn metrics_csv(rows: &[Metrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&m.csv_row());
        out.push('\n');
    }
    out
}

struct Synth {
    frames: Vec<HandKeypoints>,
    observation: Option<GestureObservation>,
}

fn synth_step(
    g: &GestureScript,
    scene: &Scene,
    env: &ScenarioEnv,
    seed: u64,
) -> Result<Synth, SimError> {
    let n = g.frames.unwrap_or(if g.class.is_dynamic() {
        DYNAMIC_WINDOW
    } else {
        1
    });
    let mut synth = HandSynth::new(g.class)
        .noise(g.noise_sigma)
        .frames(n)
        .seed(seed)
        .wrist(g.wrist.unwrap_or(DEFAULT_WRIST))
        .start_time(GESTURE_T0);
    let target = match (&g.target, &g.target_label) {
        (Some(p), _) => Some(*p),
        (None, Some(label)) => Some(
            scene
                .find(label)
                .ok_or_else(|| SimError::InvalidScenario(format!("no object '{label}' to aim at")))?
                .position,
        ),
        (None, None) => None,
    };
    if let Some(t) = target {
        synth = synth.target(t);
    }
    if let Some(m) = &env.models {
        synth = synth.camera(m.camera);
    }
    let frames = synth
        .generate()
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let (class, confidence) = match &env.models {
        Some(m) => {
            let obs = classify(m, &frames, env.threshold)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
            (obs.class, obs.confidence)
        }
        None => (g.class, 1.0),
    };
    let observation = if class == GestureClass::Unknown {
        None
    } else {
        let t = frames[(frames.len() - 1) / 2].timestamp;
        Some(
            GestureObservation::new(class, confidence, frames.clone(), t)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?,
        )
    };
    Ok(Synth {
        frames,
        observation,
    })
}

fn representation(obs: &GestureObservation, fidelity: Fidelity) -> GestureRepresentation {
    match fidelity {
        Fidelity::Label => GestureRepresentation::label(obs.class),
        Fidelity::Description => GestureRepresentation::description(obs.class),
        Fidelity::Numeric => GestureRepresentation::Numeric(obs.clone()),
    }
}

fn matches_expectation(e: &Expectation, target: Option<Point3>, referent: Option<&str>) -> bool {
    let label_ok = e
        .label
        .as_ref()
        .is_none_or(|l| referent.is_some_and(|r| normalize(r) == normalize(l)));
    let pos_ok = e
        .position
        .is_none_or(|p| target.is_some_and(|t| t.distance(p) <= e.tolerance));
    label_ok && pos_ok && (e.label.is_some() || e.position.is_some() || target.is_some())
}

/// Feeds one event to the dialog and logs what happened.
fn drive(d: &mut Dialog, event: DialogEvent, log: &mut StepTrace) -> Result<(), SimError> {
    let fx = d
        .step(event)
        .map_err(|e| SimError::Protocol(e.to_string()))?;
    log.dialog.push(d.state.name().to_owned());
    log.effects.extend(fx);
    Ok(())
}

enum StepEnd {
    Done(Box<WorldState>),
    /// Planned and confirmed, but execution failed.
    ExecFailed,
    Failed,
}

struct Run<'a> {
    spec: &'a ScenarioSpec,
    env: &'a ScenarioEnv,
    scene: &'a Scene,
    backend: &'a dyn CompletionBackend,
    context: PromptContext,
    filter: OntologyFilter,
}

impl Run<'_> {
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        dialog: &mut Dialog,
        index: usize,
        trial: u32,
        world: &WorldState,
        history: &mut Vec<Example>,
        log: &mut StepTrace,
        last: bool,
        planning_ok: &mut bool,
    ) -> Result<StepEnd, SimError> {
        let step = &self.spec.script[index];
        let seed = derive_seed(self.spec.seed, &[u64::from(trial), index as u64]);
        let synth = match &step.gesture {
            Some(g) => Some((synth_step(g, self.scene, self.env, seed)?, g.fidelity)),
            None => None,
        };
        let observation = synth.as_ref().and_then(|(s, _)| s.observation.clone());
        log.observed_gesture = observation.as_ref().map(|o| o.class);
        let words = Instruction::timed(&step.speech, 0.0, WORD_DT);
        let instruction = Instruction::new(
            step.speech.clone(),
            words,
            observation
                .as_ref()
                .zip(synth.as_ref())
                .map(|(o, (_, f))| representation(o, *f)),
            observation.as_ref().map(|o| o.gesture_time),
        )
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;

        drive(
            dialog,
            DialogEvent::Instruction {
                speech: step.speech.clone(),
            },
            log,
        )?;
        drive(dialog, DialogEvent::Confirmed, log)?;

        let plan = match plan_instruction(self.backend, &self.context, history, &instruction) {
            Ok(p) => p,
            Err(e) => {
                *planning_ok = false;
                log.error = Some(e.to_string());
                drive(
                    dialog,
                    DialogEvent::PlanFailed {
                        reason: e.to_string(),
                    },
                    log,
                )?;
                return Ok(StepEnd::Failed);
            }
        };
        log.instruction = plan.instruction_lines.clone();
        log.digest = Some(plan.digest.clone());
        log.program = Some(plan.text.clone());

        let mut w = world.clone();
        w.human_hand = observation.as_ref().map(|o| o.key_frame().clone());
        let frames = synth
            .as_ref()
            .map(|(s, _)| s.frames.as_slice())
            .unwrap_or(&[]);
        let perception = Perception {
            scene: self.scene,
            filter: &self.filter,
            frames,
        };
        // Execution is deterministic: the run below is only committed once the
        // dialog reaches Executing.
        let run: Execution = execute(&plan.program, &w, &perception);
        if let Some(f @ (SimError::Perception(_) | SimError::NoHand)) = &run.failure {
            *planning_ok = false;
            log.error = Some(f.to_string());
            drive(
                dialog,
                DialogEvent::PlanFailed {
                    reason: f.to_string(),
                },
                log,
            )?;
            return Ok(StepEnd::Failed);
        }
        let (target, referent) = run
            .first_target()
            .map_or((None, None), |(p, r)| (Some(p), r));
        log.target = target;
        log.referent = referent.clone();
        let answer = match &step.expect {
            Some(e) => {
                let ok = matches_expectation(e, target, referent.as_deref());
                log.referent_correct = Some(ok);
                *planning_ok &= ok;
                ok
            }
            None => true,
        };
        drive(dialog, DialogEvent::Planned { target }, log)?;
        drive(dialog, DialogEvent::Pointed, log)?;
        drive(dialog, DialogEvent::Answer { yes: answer }, log)?;
        if !answer {
            return Ok(StepEnd::Failed);
        }
        log.execution = run.trace;
        if let Some(f) = run.failure {
            log.error = Some(f.to_string());
            drive(
                dialog,
                DialogEvent::ExecutionFailed {
                    reason: f.to_string(),
                },
                log,
            )?;
            return Ok(StepEnd::ExecFailed);
        }
        let success = !last || check_goal(&run.world, &self.spec.goal);
        drive(dialog, DialogEvent::Finished { success }, log)?;
        history.push(plan.as_example());
        Ok(StepEnd::Done(Box::new(run.world)))
    }
}

fn initial_world(spec: &ScenarioSpec, scene: &Scene) -> Result<WorldState, SimError> {
    let mut world = WorldState::from_scene(scene);
    if let Some(key) = &spec.holding {
        let id = world
            .lookup(key)
            .ok_or_else(|| {
                SimError::InvalidScenario(format!("cannot hold '{key}': no such object"))
            })?
            .to_owned();
        let p = world.objects[&id].position;
        world.move_gripper(p);
        world.hold(&id)?;
    }
    Ok(world)
}

/// Runs up to `max_trials` trials of the script, resetting the world each trial.
pub fn run_scenario(spec: &ScenarioSpec, env: &ScenarioEnv) -> Result<Metrics, SimError> {
    spec.validate()?;
    let scene =
        generate_scene(&spec.scene).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let backend = env
        .backends
        .get(&spec.backend)
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let start = initial_world(spec, &scene)?;
    let run = Run {
        spec,
        env,
        scene: &scene,
        backend: backend.as_ref(),
        context: PromptContext::new(spec.catalog.catalog()),
        filter: OntologyFilter {
            ontology: env.ontology.clone(),
        },
    };

    let mut trials = Vec::new();
    let mut trial = 1;
    loop {
        let mut world = start.clone();
        let mut history = Vec::new();
        let mut steps = Vec::new();
        let mut planning_ok = true;
        let mut completed = true;
        let mut planned = 0;
        let mut dialog = Dialog {
            state: DialogState::Idle,
            trial,
        };
        for index in 0..spec.script.len() {
            dialog = Dialog {
                state: DialogState::Idle,
                trial,
            };
            let mut log = StepTrace {
                instruction: String::new(),
                observed_gesture: None,
                dialog: vec![dialog.state.name().to_owned()],
                effects: Vec::new(),
                digest: None,
                program: None,
                target: None,
                referent: None,
                referent_correct: None,
                execution: Vec::new(),
                error: None,
            };
            let last = index + 1 == spec.script.len();
            let end = run.step(
                &mut dialog,
                index,
                trial,
                &world,
                &mut history,
                &mut log,
                last,
                &mut planning_ok,
            )?;
            steps.push(log);
            match end {
                StepEnd::Done(next) => {
                    planned += 1;
                    world = *next;
                }
                StepEnd::ExecFailed => {
                    planned += 1;
                    completed = false;
                    break;
                }
                StepEnd::Failed => {
                    completed = false;
                    break;
                }
            }
        }
        let goal_reached = completed && check_goal(&world, &spec.goal);
        // Steps after a failure were never planned, so they cannot count.
        let planning_ok = planning_ok && planned == spec.script.len();
        trials.push(TrialTrace {
            trial,
            steps,
            planning_ok,
            goal_reached,
        });
        let finished = goal_reached && planning_ok;
        if finished || trial >= spec.max_trials {
            break;
        }
        // Failed steps leave the dialog Aborted or Errored; a completed trial
        // that missed the goal starts over at the next trial number.
        if matches!(
            dialog.state,
            DialogState::Aborted { .. } | DialogState::Errored { .. }
        ) {
            dialog
                .step(DialogEvent::Retry)
                .map_err(|e| SimError::Protocol(e.to_string()))?;
            if dialog.is_terminal() {
                break;
            }
            trial = dialog.trial;
        } else {
            trial += 1;
        }
    }
    let planning_success = trials.iter().any(|t| t.planning_ok);
    let execution_success = trials.iter().any(|t| t.planning_ok && t.goal_reached);
    Ok(Metrics {
        id: spec.id.clone(),
        planning_success,
        execution_success,
        trials_used: trials.len() as u32,
        trials,
    })
}

/// Scenario files (`*.json`) in `dir`, sorted by file name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs scenarios in parallel; results keep input order.
pub fn run_specs(specs: &[ScenarioSpec], env: &ScenarioEnv) -> Result<Vec<Metrics>, SimError> {
    specs.par_iter().map(|s| run_scenario(s, env)).collect()
}

pub fn load_dir(dir: &Path) -> Result<Vec<ScenarioSpec>, SimError> {
    scenario_files(dir)?
        .iter()
        .map(|p| ScenarioSpec::load(p))
        .collect()
}

/// Runs every scenario in `dir`; results keep file-name order.
pub fn run_batch(dir: &Path, env: &ScenarioEnv) -> Result<Vec<Metrics>, SimError> {
    run_specs(&load_dir(dir)?, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::backend_registry;
    use crate::scene::{drawer_label, SceneKind};

    fn env() -> ScenarioEnv {
        ScenarioEnv::new(backend_registry(None, None).unwrap(), Ontology::builtin())
    }

    fn drawer_spec(sigma: f64) -> ScenarioSpec {
        ScenarioSpec {
            format_version: 1,
            id: "open-drawer".into(),
            scene: SceneSpec::drawer_grid(8, 8, 0.1, Point3::new(-0.35, -0.35, 1.5)),
            holding: None,
            script: vec![ScriptStep {
                speech: "open that drawer".into(),
                gesture: Some(GestureScript {
                    class: GestureClass::Pointing,
                    target: None,
                    target_label: Some(drawer_label(3, 5)),
                    wrist: None,
                    noise_sigma: sigma,
                    frames: None,
                    fidelity: Fidelity::Label,
                }),
                expect: Some(Expectation {
                    label: Some(drawer_label(3, 5)),
                    position: None,
                    tolerance: GRASP_TOL,
                }),
            }],
            goal: GoalSpec::DrawerOpen {
                drawer: drawer_label(3, 5),
            },
            backend: "rule".into(),
            catalog: CatalogChoice::Standard,
            max_trials: 3,
            seed: 11,
        }
    }

    #[test]
    fn zero_noise_drawer_succeeds_first_trial() {
        let m = run_scenario(&drawer_spec(0.0), &env()).unwrap();
        assert!(m.planning_success && m.execution_success, "{m:#?}");
        assert_eq!(m.trials_used, 1);
        let dialog = &m.trials[0].steps[0].dialog;
        assert_eq!(
            dialog,
            &[
                "Idle",
                "Confirming",
                "Planning",
                "Indicating",
                "AwaitingYesNo",
                "Executing",
                "Done"
            ]
        );
    }

    #[test]
    fn same_spec_same_metrics() {
        let (a, b) = (
            run_scenario(&drawer_spec(0.004), &env()).unwrap(),
            run_scenario(&drawer_spec(0.004), &env()).unwrap(),
        );
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn unparseable_transcripts_fail_every_trial() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = drawer_spec(0.0);
        spec.backend = "replay".into();
        // the store answers every prompt of this scenario with broken code
        let e = ScenarioEnv::new(
            backend_registry(Some(dir.path()), None).unwrap(),
            Ontology::builtin(),
        );
        let ctx = PromptContext::standard();
        let lines = "# Instruction 0: open that drawer\n# Gesture: pointing";
        let digest = crate::planner::assemble_prompt(&ctx, &[], lines).digest();
        crate::planner::ReplayBackend::store(dir.path(), &digest, "open_drawer_at_pos(").unwrap();
        let m = run_scenario(&spec, &e).unwrap();
        assert!(!m.planning_success && !m.execution_success);
        assert_eq!(m.trials_used, 3);
        assert!(m
            .trials
            .iter()
            .all(|t| t.steps[0].dialog.last().map(String::as_str) == Some("Errored")));
    }

    #[test]
    fn wrong_referent_is_rejected_and_never_executed() {
        let mut spec = drawer_spec(0.0);
        spec.script[0].expect = Some(Expectation {
            label: Some(drawer_label(0, 0)),
            position: None,
            tolerance: GRASP_TOL,
        });
        let m = run_scenario(&spec, &env()).unwrap();
        assert!(!m.planning_success && !m.execution_success);
        for t in &m.trials {
            let s = &t.steps[0];
            assert_eq!(s.dialog.last().map(String::as_str), Some("Aborted"));
            assert!(s.execution.is_empty());
            assert!(!s.effects.contains(&Effect::Execute));
        }
    }

    #[test]
    fn nothing_mutates_before_executing() {
        let m = run_scenario(&drawer_spec(0.002), &env()).unwrap();
        for s in m.trials.iter().flat_map(|t| &t.steps) {
            if s.execution.iter().any(|x| x.mutated) {
                assert!(s.dialog.iter().any(|d| d == "Executing"));
            }
        }
    }

    #[test]
    fn csv_rows() {
        let m = run_scenario(&drawer_spec(0.0), &env()).unwrap();
        assert_eq!(
            metrics_csv(&[m]),
            format!("{CSV_HEADER}\nopen-drawer,true,true,1\n")
        );
    }

    #[test]
    fn validation() {
        let mut s = drawer_spec(0.0);
        s.script.clear();
        assert!(s.validate().is_err());
        let mut s = drawer_spec(0.0);
        s.max_trials = 4;
        assert!(s.validate().is_err());
        assert!(matches!(
            drawer_spec(0.0).scene.kind,
            SceneKind::DrawerGrid { .. }
        ));
    }
}
