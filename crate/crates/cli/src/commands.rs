use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use deixis_core::geometry::{CameraIntrinsics, Point3};
use deixis_core::gesture::{
    evaluate_models, mlp_train, rnn_train, GestureClass, GestureDataset, GestureModels,
    GestureRepresentation, HandKeypoints, HandSynth, SynthSpec, TrainConfig, DEFAULT_THRESHOLD,
    DYNAMIC_WINDOW,
};
use deixis_core::planner::{
    plan_instruction, CompletionBackend, Instruction, PrimitiveCatalog, PromptContext,
    RecordingBackend, RemoteBackend,
};
use deixis_core::referent::{resolve_direction, resolve_location, resolve_object};
use deixis_core::scene::{generate_scene, load_scene, OntologyFilter, SceneSpec};
use deixis_core::sim::gi::load_gesture_instruct;
use deixis_core::sim::{
    execute, load_dir, metrics_csv, run_gesture_instruct, run_scenario, run_specs, run_sweep,
    sweep_csv, Perception, ScenarioEnv, ScenarioSpec, SweepConfig, WorldState,
};

use crate::config::Config;
use crate::*;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::resolve(&cli.global)?;
    match cli.command {
        Command::Scene(SceneCmd::Gen(a)) => scene_gen(&cfg, a),
        Command::Scene(SceneCmd::Show { file }) => scene_show(&cfg, &file),
        Command::Gesture(GestureCmd::Synth(a)) => gesture_synth(&cfg, a),
        Command::Gesture(GestureCmd::Train(a)) => gesture_train(&cfg, a),
        Command::Gesture(GestureCmd::Eval(a)) => gesture_eval(&cfg, a),
        Command::Resolve(a) => resolve(&cfg, a),
        Command::Plan(a) => plan(&cfg, a),
        Command::Run(a) => run_one(&cfg, a),
        Command::Batch(a) => batch(&cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::GiEval(a) => gi_eval(&cfg, a),
        Command::Record(a) => record(&cfg, a),
        Command::Serve(a) => serve::serve(&cfg, a),
    }
}

/// Writes the report to `--out` or stdout.
fn emit(cfg: &Config, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(CliError::domain)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

pub fn parse_point(flag: &str, s: &str) -> Result<Point3, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad_point(flag, s))?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Point3::new(x, y, z)),
        _ => Err(bad_point(flag, s)),
    }
}

fn bad_point(flag: &str, s: &str) -> CliError {
    CliError::Usage(format!("{flag}: expected x,y,z, got '{s}'"))
}

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: not a number list: '{s}'")))
        })
        .collect()
}

fn parse_class(s: &str) -> Result<GestureClass, CliError> {
    s.parse::<GestureClass>()
        .map_err(|e| CliError::Usage(format!("--class: {e}")))
}

/// A hand file holds one frame or an array of frames.
pub fn hand_frames(value: serde_json::Value) -> Result<Vec<HandKeypoints>, String> {
    let frames: Vec<HandKeypoints> = if value.is_array() {
        serde_json::from_value(value).map_err(|e| e.to_string())?
    } else {
        vec![serde_json::from_value(value).map_err(|e| e.to_string())?]
    };
    if frames.is_empty() {
        return Err("hand file has no frames".into());
    }
    Ok(frames)
}

fn load_hand(path: &Path) -> Result<Vec<HandKeypoints>, CliError> {
    let value: serde_json::Value = serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    hand_frames(value).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn fmt_point(p: Point3) -> String {
    format!("({:.4}, {:.4}, {:.4})", p.x, p.y, p.z)
}

fn scene_gen(cfg: &Config, a: SceneGenArgs) -> Result<(), CliError> {
    let mut spec: SceneSpec = match (&a.spec, &a.drawers) {
        (Some(p), _) => serde_json::from_str(&read(p)?)
            .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?,
        (None, Some(grid)) => {
            let (r, c) = grid
                .split_once(['x', 'X'])
                .and_then(|(r, c)| {
                    Some((
                        r.trim().parse::<usize>().ok()?,
                        c.trim().parse::<usize>().ok()?,
                    ))
                })
                .ok_or_else(|| {
                    CliError::Usage(format!("--drawers: expected ROWSxCOLS, got '{grid}'"))
                })?;
            SceneSpec::drawer_grid(r, c, a.spacing, parse_point("--origin", &a.origin)?)
        }
        (None, None) => {
            return Err(CliError::Usage(
                "scene gen needs --spec or --drawers".into(),
            ))
        }
    };
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    let scene = generate_scene(&spec).map_err(CliError::domain)?;
    emit(cfg, &(scene.to_json() + "\n"))
}

fn scene_show(cfg: &Config, file: &Path) -> Result<(), CliError> {
    let scene =
        load_scene(file).map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
    let mut out = format!(
        "frame: {}\nobjects: {}\ncloud points: {}\n",
        scene.frame_tag,
        scene.objects.len(),
        scene.cloud.len()
    );
    for o in &scene.objects {
        let _ = writeln!(out, "  {} {}", o.label, fmt_point(o.position));
    }
    emit(cfg, &out)
}

fn gesture_synth(cfg: &Config, a: SynthArgs) -> Result<(), CliError> {
    if let Some(kind) = a.dataset {
        let mut spec = match kind {
            DatasetKind::Static => SynthSpec::static_classes(a.per_class, cfg.seed()),
            DatasetKind::Dynamic => SynthSpec::dynamic_classes(a.per_class, cfg.seed()),
        };
        spec.noise_sigma = cfg.noise();
        let data = GestureDataset::synthesize(&spec).map_err(CliError::domain)?;
        let mut buf = Vec::new();
        data.write_jsonl(&mut buf).map_err(CliError::domain)?;
        return emit(cfg, &String::from_utf8(buf).expect("json is utf-8"));
    }
    let class = parse_class(a.class.as_deref().unwrap_or_default())?;
    let frames = a.frames.unwrap_or(if class.is_dynamic() {
        DYNAMIC_WINDOW
    } else {
        1
    });
    let mut synth = HandSynth::new(class)
        .noise(cfg.noise())
        .frames(frames)
        .seed(cfg.seed());
    if let Some(t) = &a.target {
        synth = synth.target(parse_point("--target", t)?);
    }
    if let Some(w) = &a.wrist {
        synth = synth.wrist(parse_point("--wrist", w)?);
    }
    let hand = synth.generate().map_err(CliError::domain)?;
    emit(
        cfg,
        &(serde_json::to_string(&hand).map_err(CliError::domain)? + "\n"),
    )
}

fn dataset_or_synth(path: Option<&Path>, spec: SynthSpec) -> Result<GestureDataset, CliError> {
    match path {
        Some(p) => {
            GestureDataset::load(p).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))
        }
        None => GestureDataset::synthesize(&spec).map_err(CliError::domain),
    }
}

fn gesture_train(cfg: &Config, a: TrainArgs) -> Result<(), CliError> {
    let Some(out) = &cfg.out else {
        return Err(CliError::Usage(
            "gesture train needs --out for the model file".into(),
        ));
    };
    let mut hyper = TrainConfig {
        seed: cfg.seed(),
        ..TrainConfig::default()
    };
    hyper.epochs = a.epochs.unwrap_or(hyper.epochs);
    hyper.lr = a.lr.unwrap_or(hyper.lr);
    let noisy = |mut s: SynthSpec| {
        s.noise_sigma = cfg.noise();
        s
    };
    let st = dataset_or_synth(
        a.static_data.as_deref(),
        noisy(SynthSpec::static_classes(a.per_class, cfg.seed())),
    )?
    .filter(GestureClass::is_static);
    let dy = dataset_or_synth(
        a.dynamic_data.as_deref(),
        noisy(SynthSpec::dynamic_classes(a.per_class, cfg.seed())),
    )?
    .filter(GestureClass::is_dynamic);
    let cam = CameraIntrinsics::default();
    let (s_rep, d_rep) = std::thread::scope(|s| {
        let d = s.spawn(|| rnn_train(&dy, &hyper, &cam));
        let m = mlp_train(&st, &hyper, &cam);
        (m, d.join().expect("training thread panicked"))
    });
    let (s_rep, d_rep) = (
        s_rep.map_err(CliError::domain)?,
        d_rep.map_err(CliError::domain)?,
    );
    let models = GestureModels {
        camera: cam,
        static_model: s_rep.model,
        dynamic_model: d_rep.model,
    };
    models
        .save(out)
        .map_err(|e| CliError::Domain(format!("{}: {e}", out.display())))?;
    let (s_acc, _) = evaluate_models(&models, &st).map_err(CliError::domain)?;
    let (_, d_acc) = evaluate_models(&models, &dy).map_err(CliError::domain)?;
    let curve = |c: &[f64]| format!("{:.4} -> {:.4}", c[0], c[c.len() - 1]);
    eprintln!(
        "static loss {}, held-out accuracy {}/{}",
        curve(&s_rep.loss_curve),
        s_acc.correct,
        s_acc.total
    );
    eprintln!(
        "dynamic loss {}, held-out accuracy {}/{}",
        curve(&d_rep.loss_curve),
        d_acc.correct,
        d_acc.total
    );
    Ok(())
}

fn gesture_eval(cfg: &Config, a: EvalArgs) -> Result<(), CliError> {
    let models = cfg
        .gesture_models()?
        .ok_or_else(|| CliError::Usage("gesture eval needs --models".into()))?;
    let data = GestureDataset::load(&a.data)
        .map_err(|e| CliError::Domain(format!("{}: {e}", a.data.display())))?;
    let (s, d) = evaluate_models(&models, &data).map_err(CliError::domain)?;
    emit(
        cfg,
        &format!(
            "static: {}/{} {:.4}\ndynamic: {}/{} {:.4}\n",
            s.correct,
            s.total,
            s.rate(),
            d.correct,
            d.total,
            d.rate()
        ),
    )
}

fn resolve(cfg: &Config, a: ResolveArgs) -> Result<(), CliError> {
    let scene = load_scene(&a.scene)
        .map_err(|e| CliError::Domain(format!("{}: {e}", a.scene.display())))?;
    let frames = load_hand(&a.hand)?;
    let hand = frames.last().expect("non-empty");
    let line = match a.mode {
        ResolveMode::Object => {
            let target = a
                .target
                .as_deref()
                .ok_or_else(|| CliError::Usage("--target is required in object mode".into()))?;
            let o =
                resolve_object(&scene, hand, target, &cfg.ontology()?).map_err(CliError::domain)?;
            format!("{} {}", o.label, fmt_point(o.position))
        }
        ResolveMode::Location => format!(
            "location {}",
            fmt_point(resolve_location(&scene, hand).map_err(CliError::domain)?)
        ),
        ResolveMode::Direction => format!(
            "direction {}",
            fmt_point(resolve_direction(hand).map_err(CliError::domain)?)
        ),
    };
    emit(cfg, &(line + "\n"))
}

fn gesture_repr(label: Option<&str>, description: Option<&str>) -> Option<GestureRepresentation> {
    match (description, label) {
        (Some(d), _) => Some(GestureRepresentation::Description(d.to_owned())),
        (None, Some(l)) => Some(match l.parse::<GestureClass>() {
            Ok(c) => GestureRepresentation::label(c),
            Err(_) => GestureRepresentation::Label(l.to_owned()),
        }),
        (None, None) => None,
    }
}

fn plan_with(
    backend: &dyn CompletionBackend,
    extended: bool,
    instruction: &Instruction,
) -> Result<deixis_core::planner::Plan, CliError> {
    let ctx = PromptContext::new(if extended {
        PrimitiveCatalog::extended()
    } else {
        PrimitiveCatalog::standard()
    });
    plan_instruction(backend, &ctx, &[], instruction).map_err(CliError::domain)
}

fn plan(cfg: &Config, a: PlanArgs) -> Result<(), CliError> {
    let mut instruction = Instruction::speech(a.speech.clone());
    instruction.gesture = gesture_repr(a.gesture.as_deref(), a.gesture_description.as_deref());
    let plan = plan_with(cfg.backend()?.as_ref(), a.extended, &instruction)?;
    let mut out = plan.text.trim_end().to_owned() + "\n";
    if a.validate_only {
        let _ = writeln!(out, "# valid: {} call(s)", plan.program.calls().len());
        return emit(cfg, &out);
    }
    if let (Some(scene_path), Some(hand_path)) = (&a.scene, &a.hand) {
        let scene = load_scene(scene_path)
            .map_err(|e| CliError::Domain(format!("{}: {e}", scene_path.display())))?;
        let frames = load_hand(hand_path)?;
        let mut world = WorldState::from_scene(&scene);
        world.human_hand = frames.last().cloned();
        let filter = OntologyFilter {
            ontology: cfg.ontology()?,
        };
        let run = execute(
            &plan.program,
            &world,
            &Perception {
                scene: &scene,
                filter: &filter,
                frames: &frames,
            },
        );
        for step in &run.trace {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string(step).map_err(CliError::domain)?
            );
        }
        if let Some(f) = run.failure {
            emit(cfg, &out)?;
            return Err(CliError::Domain(format!("execution failed: {f}")));
        }
    }
    emit(cfg, &out)
}

fn scenario_env(
    cfg: &Config,
    registry: deixis_core::registry::Registry<dyn CompletionBackend>,
) -> Result<ScenarioEnv, CliError> {
    Ok(ScenarioEnv {
        backends: registry,
        ontology: cfg.ontology()?,
        models: cfg.gesture_models()?,
        threshold: DEFAULT_THRESHOLD,
    })
}

/// Flags win over the values stored in scenario files.
fn apply_overrides(cfg: &Config, spec: &mut ScenarioSpec) {
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    if let Some(b) = &cfg.backend {
        spec.backend = b.clone();
    }
}

fn load_spec(cfg: &Config, path: &Path) -> Result<ScenarioSpec, CliError> {
    let mut spec = ScenarioSpec::load(path).map_err(CliError::domain)?;
    apply_overrides(cfg, &mut spec);
    Ok(spec)
}

fn run_one(cfg: &Config, a: RunArgs) -> Result<(), CliError> {
    let spec = load_spec(cfg, &a.scenario)?;
    let metrics =
        run_scenario(&spec, &scenario_env(cfg, cfg.registry()?)?).map_err(CliError::domain)?;
    emit(
        cfg,
        &(serde_json::to_string_pretty(&metrics).map_err(CliError::domain)? + "\n"),
    )
}

fn batch(cfg: &Config, a: BatchArgs) -> Result<(), CliError> {
    let mut specs = load_dir(&a.dir).map_err(CliError::domain)?;
    specs.iter_mut().for_each(|s| apply_overrides(cfg, s));
    let rows = run_specs(&specs, &scenario_env(cfg, cfg.registry()?)?).map_err(CliError::domain)?;
    emit(cfg, &metrics_csv(&rows))
}

fn sweep(cfg: &Config, a: SweepArgs) -> Result<(), CliError> {
    let config = SweepConfig {
        spacings: parse_list("--spacings", &a.spacings)?,
        distances: parse_list("--distances", &a.distances)?,
        sigma: cfg.noise(),
        trials: a.trials,
        seed: cfg.seed(),
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    emit(
        cfg,
        &sweep_csv(&run_sweep(&config).map_err(CliError::domain)?),
    )
}

fn gi_eval(cfg: &Config, a: GiEvalArgs) -> Result<(), CliError> {
    let cases = load_gesture_instruct(&a.cases).map_err(CliError::domain)?;
    let report = run_gesture_instruct(&cases, cfg.backend()?.as_ref());
    if let Some(p) = &a.details {
        let json = serde_json::to_string_pretty(&report).map_err(CliError::domain)?;
        std::fs::write(p, json + "\n")
            .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?;
    }
    emit(
        cfg,
        &format!("backend: {}\n{}", report.backend, report.render_table()),
    )
}

fn record(cfg: &Config, a: RecordArgs) -> Result<(), CliError> {
    let dir = cfg
        .transcripts
        .clone()
        .ok_or_else(|| CliError::Usage("record needs --transcripts".into()))?;
    let remote = RemoteBackend::from_env().map_err(CliError::domain)?;
    let recorder: Arc<dyn CompletionBackend> =
        Arc::new(RecordingBackend::new(Arc::new(remote), &dir));
    match (&a.scenario, &a.speech) {
        (Some(path), _) => {
            let mut spec = load_spec(cfg, path)?;
            spec.backend = "record".into();
            let mut registry = cfg.registry()?;
            registry.register("record", recorder);
            let metrics =
                run_scenario(&spec, &scenario_env(cfg, registry)?).map_err(CliError::domain)?;
            emit(
                cfg,
                &(serde_json::to_string_pretty(&metrics).map_err(CliError::domain)? + "\n"),
            )
        }
        (None, Some(speech)) => {
            let mut instruction = Instruction::speech(speech.clone());
            instruction.gesture = gesture_repr(a.gesture.as_deref(), None);
            let plan = plan_with(recorder.as_ref(), false, &instruction)?;
            emit(
                cfg,
                &format!("{}\n# recorded {}\n", plan.text.trim_end(), plan.digest),
            )
        }
        (None, None) => Err(CliError::Usage(
            "record needs --scenario or --speech".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse_strictly() {
        assert_eq!(
            parse_point("--target", "0.1, -2,3").unwrap(),
            Point3::new(0.1, -2.0, 3.0)
        );
        assert!(matches!(
            parse_point("--target", "1,2"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_point("--target", "1,2,nan"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn known_labels_become_canonical() {
        assert_eq!(
            gesture_repr(Some("thumbs_up"), None),
            Some(GestureRepresentation::Label("thumbs up".into()))
        );
        assert_eq!(
            gesture_repr(Some("waving"), None),
            Some(GestureRepresentation::Label("waving".into()))
        );
    }
}
