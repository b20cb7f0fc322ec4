use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::world::{WorldState, DIRECTION_STEP, GRASP_TOL, TRASH_POS};
use super::SimError;
use crate::geometry::Point3;
use crate::gesture::{HandKeypoints, INDEX_TIP, THUMB_TIP};
use crate::planner::{Call, Expr, PolicyProgram, Statement};
use crate::referent::{resolve_direction, resolve_location, resolve_object_with};
use crate::scene::{normalize, ObjectEntry, Scene, SemanticFilter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Value {
    Position(Point3),
    Direction(Point3),
    Scalar(f64),
    Text(String),
    Trajectory(Vec<Point3>),
    None,
}

impl Value {
    fn position(&self) -> Option<Point3> {
        match self {
            Value::Position(p) => Some(*p),
            _ => None,
        }
    }
}

/// What perception sees: the static cloud, a semantic filter and the
/// frames of the current gesture. The pointing hand is `world.human_hand`.
pub struct Perception<'a> {
    pub scene: &'a Scene,
    pub filter: &'a dyn SemanticFilter,
    pub frames: &'a [HandKeypoints],
}

impl Perception<'_> {
    /// The scene as it is now: free objects and drawers at their current
    /// positions, plus the static cloud.
    fn snapshot(&self, world: &WorldState) -> Scene {
        let mut objects: Vec<ObjectEntry> = world
            .drawers
            .iter()
            .map(|(id, d)| ObjectEntry::new(id.clone(), d.position))
            .collect();
        objects.extend(
            world
                .objects
                .values()
                .filter(|o| !o.held)
                .map(|o| ObjectEntry::new(o.label.clone(), o.position)),
        );
        let mut cloud = self.scene.cloud.clone();
        cloud.extend(objects.iter().map(|o| o.position));
        Scene {
            objects,
            cloud,
            camera: self.scene.camera,
            frame_tag: self.scene.frame_tag.clone(),
        }
    }

    fn hand<'w>(&self, world: &'w WorldState) -> Result<&'w HandKeypoints, SimError> {
        world.human_hand.as_ref().ok_or(SimError::NoHand)
    }
}

/// One executed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub statement: usize,
    pub call: String,
    pub args: Vec<Value>,
    pub result: Value,
    /// Label of the object a referring call resolved to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub gripper: Point3,
    pub holding: Option<String>,
    /// Whether the call changed the world.
    pub mutated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub trace: Vec<TraceStep>,
    pub world: WorldState,
    /// The failure that stopped execution, if any. The world is as it was
    /// before the failing call.
    pub failure: Option<SimError>,
}

impl Execution {
    /// First position produced by a perception call, and its object label.
    pub fn first_target(&self) -> Option<(Point3, Option<String>)> {
        self.trace
            .iter()
            .filter(|s| s.call.starts_with("detect_") && s.error.is_none())
            .find_map(|s| s.result.position().map(|p| (p, s.referent.clone())))
    }
}

struct Interp<'a> {
    env: BTreeMap<String, Value>,
    world: WorldState,
    perception: &'a Perception<'a>,
    trace: Vec<TraceStep>,
    statement: usize,
}

impl Interp<'_> {
    fn eval(&mut self, e: &Expr) -> Result<Value, SimError> {
        match e {
            Expr::Str { value } => Ok(Value::Text(value.clone())),
            Expr::Number { value } => Ok(Value::Scalar(*value)),
            Expr::Ident { name } => self
                .env
                .get(name)
                .cloned()
                .ok_or_else(|| SimError::UnboundName(name.clone())),
            Expr::Call(c) => self.call(c),
        }
    }

    fn call(&mut self, c: &Call) -> Result<Value, SimError> {
        let args = c
            .args
            .iter()
            .map(|a| self.eval(a))
            .collect::<Result<Vec<_>, _>>()?;
        let before = self.world.clone();
        let mut referent = None;
        let outcome = self.dispatch(&c.name, &args, &mut referent);
        let (result, error) = match &outcome {
            Ok(v) => (v.clone(), None),
            Err(e) => {
                self.world = before.clone();
                (Value::None, Some(e.to_string()))
            }
        };
        self.trace.push(TraceStep {
            statement: self.statement,
            call: c.name.clone(),
            args,
            result,
            referent,
            error,
            gripper: self.world.gripper.position,
            holding: self.world.gripper.holding.clone(),
            mutated: self.world != before,
        });
        outcome
    }

    fn dispatch(
        &mut self,
        name: &str,
        args: &[Value],
        referent: &mut Option<String>,
    ) -> Result<Value, SimError> {
        let w = &mut self.world;
        let p = self.perception;
        let pos = |i: usize| match args.get(i) {
            Some(Value::Position(p)) => Ok(*p),
            other => Err(SimError::BadArgument {
                call: name.to_owned(),
                got: format!("{other:?}"),
            }),
        };
        let dir = |i: usize| match args.get(i) {
            Some(Value::Direction(d)) => Ok(*d),
            other => Err(SimError::BadArgument {
                call: name.to_owned(),
                got: format!("{other:?}"),
            }),
        };
        let scalar = |i: usize| match args.get(i) {
            Some(Value::Scalar(s)) => Ok(*s),
            other => Err(SimError::BadArgument {
                call: name.to_owned(),
                got: format!("{other:?}"),
            }),
        };
        let text = |i: usize| match args.get(i) {
            Some(Value::Text(s)) => Ok(s.clone()),
            other => Err(SimError::BadArgument {
                call: name.to_owned(),
                got: format!("{other:?}"),
            }),
        };
        match name {
            "detect_referred_obj_pos" => {
                let target = text(0)?;
                let hand = p.hand(w)?;
                let o = resolve_object_with(&p.snapshot(w), hand, &target, p.filter)
                    .map_err(|e| SimError::Perception(e.to_string()))?;
                *referent = Some(o.label.clone());
                Ok(Value::Position(o.position))
            }
            "detect_referred_location" => {
                let loc = resolve_location(&p.snapshot(w), p.hand(w)?)
                    .map_err(|e| SimError::Perception(e.to_string()))?;
                Ok(Value::Position(loc))
            }
            "detect_referred_direction" => Ok(Value::Direction(
                resolve_direction(p.hand(w)?).map_err(|e| SimError::Perception(e.to_string()))?,
            )),
            "detect_hand_center_pos" => {
                w.hand_center().map(Value::Position).ok_or(SimError::NoHand)
            }
            "detect_hand_trajectory" => {
                if p.frames.is_empty() {
                    return Err(SimError::NoHand);
                }
                Ok(Value::Trajectory(
                    p.frames.iter().map(|f| f.world[INDEX_TIP]).collect(),
                ))
            }
            "detect_finger_gap" => {
                let h = p.hand(w)?;
                Ok(Value::Scalar(
                    h.world[THUMB_TIP].distance(h.world[INDEX_TIP]),
                ))
            }
            "move_gripper_to_pos" => {
                w.move_gripper(pos(0)?);
                Ok(Value::None)
            }
            "move_gripper_in_dir" => {
                let d = dir(0)?;
                w.move_gripper(w.gripper.position + d * DIRECTION_STEP);
                Ok(Value::None)
            }
            "open_gripper" => {
                w.release();
                Ok(Value::None)
            }
            "close_gripper" => {
                if w.gripper.holding.is_none() {
                    match w.object_near(w.gripper.position, GRASP_TOL) {
                        Some(id) => w.hold(&id)?,
                        None => w.gripper.open = false,
                    }
                }
                Ok(Value::None)
            }
            "pick_up_obj_at_pos" => {
                let at = pos(0)?;
                let id = w
                    .object_near(at, GRASP_TOL)
                    .ok_or(SimError::GraspFailure(at))?;
                let obj = w.objects[&id].position;
                w.move_gripper(obj);
                w.hold(&id)?;
                Ok(Value::None)
            }
            "place_obj_at_pos" => {
                let at = pos(0)?;
                if w.gripper.holding.is_none() {
                    return Err(SimError::NothingHeld);
                }
                w.move_gripper(at);
                w.release();
                Ok(Value::None)
            }
            "open_drawer_at_pos" => {
                let at = pos(0)?;
                let id = w
                    .drawer_near(at, GRASP_TOL)
                    .ok_or(SimError::NoDrawerAtPos(at))?;
                let d = w.drawers.get_mut(&id).expect("id from drawer_near");
                d.open = true;
                let handle = d.position;
                w.move_gripper(handle);
                Ok(Value::None)
            }
            "throw_away_obj_at_pos" => {
                let at = pos(0)?;
                let id = w
                    .object_near(at, GRASP_TOL)
                    .ok_or(SimError::GraspFailure(at))?;
                let obj = w.objects[&id].position;
                w.move_gripper(obj);
                w.hold(&id)?;
                w.move_gripper(TRASH_POS);
                w.release();
                Ok(Value::None)
            }
            "hand_over_obj" => {
                let want = normalize(&text(0)?);
                let id = w
                    .objects
                    .iter()
                    .find(|(_, o)| !o.held && normalize(&o.label) == want)
                    .map(|(id, _)| id.clone())
                    .ok_or_else(|| SimError::NoSuchObject(want.clone()))?;
                let center = w.hand_center().ok_or(SimError::NoHand)?;
                let obj = w.objects[&id].position;
                w.move_gripper(obj);
                w.hold(&id)?;
                w.move_gripper(center);
                w.release();
                Ok(Value::None)
            }
            "move_towards_person" => {
                let center = w.hand_center().ok_or(SimError::NoHand)?;
                w.move_gripper(center);
                Ok(Value::None)
            }
            "lift_gripper" => {
                let h = scalar(0)?;
                // camera y points down
                w.move_gripper(w.gripper.position - Point3::new(0.0, h, 0.0));
                Ok(Value::None)
            }
            "push_in_dir" => {
                let d = dir(0)?;
                let step = d * DIRECTION_STEP;
                if let Some(id) = w.object_near(w.gripper.position, GRASP_TOL) {
                    let o = w.objects.get_mut(&id).expect("id from object_near");
                    o.position = o.position + step;
                }
                w.move_gripper(w.gripper.position + step);
                Ok(Value::None)
            }
            "pour_to_height" => {
                scalar(0)?;
                Ok(Value::None)
            }
            "draw_trajectory" => match args.first() {
                Some(Value::Trajectory(_)) => Ok(Value::None),
                other => Err(SimError::BadArgument {
                    call: name.to_owned(),
                    got: format!("{other:?}"),
                }),
            },
            "say" => {
                text(0)?;
                Ok(Value::None)
            }
            "stop_motion" | "turn_around" | "twist_gripper" | "squeeze_gripper"
            | "repeat_last_task" | "open_door" => Ok(Value::None),
            other => Err(SimError::UnknownFunction(other.to_owned())),
        }
    }
}

/// Runs `p` statement by statement on a copy of `world`. Callers validate
/// `p` first, so unknown names and arity errors cannot occur.
pub fn execute(p: &PolicyProgram, world: &WorldState, perception: &Perception<'_>) -> Execution {
    let mut it = Interp {
        env: BTreeMap::new(),
        world: world.clone(),
        perception,
        trace: Vec::new(),
        statement: 0,
    };
    let mut failure = None;
    for (i, s) in p.statements.iter().enumerate() {
        it.statement = i + 1;
        let r = match s {
            Statement::Comment { .. } => Ok(()),
            Statement::Expr { call } => it.call(call).map(drop),
            Statement::Assign { name, value } => it.eval(value).map(|v| {
                it.env.insert(name.clone(), v);
            }),
        };
        if let Err(e) = r {
            debug_assert!(
                !matches!(e, SimError::UnknownFunction(_) | SimError::UnboundName(_)),
                "validated program hit {e}"
            );
            failure = Some(e);
            break;
        }
    }
    Execution {
        trace: it.trace,
        world: it.world,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{GestureClass, HandSynth};
    use crate::planner::{parse_policy, validate_policy, PrimitiveCatalog};
    use crate::scene::{drawer_label, generate_scene, Ontology, OntologyFilter, SceneSpec};
    use crate::sim::world::{check_goal, GoalSpec};
    use proptest::prelude::*;

    fn jug_scene() -> Scene {
        let objects = vec![
            ObjectEntry::new("water jug", Point3::new(0.1, 0.2, 0.9)),
            ObjectEntry::new("cup", Point3::new(-0.2, 0.2, 0.9)),
        ];
        generate_scene(&SceneSpec::tool_bench(objects)).unwrap()
    }

    fn filter() -> OntologyFilter {
        OntologyFilter {
            ontology: Ontology::from_categories([
                ("tool", vec!["hammer", "screwdriver"]),
                ("drawer", vec!["drawer_*"]),
            ]),
        }
    }

    fn pointing_at(target: Point3) -> HandKeypoints {
        HandSynth::new(GestureClass::Pointing)
            .wrist(Point3::new(0.0, 0.0, 0.35))
            .target(target)
            .generate()
            .unwrap()
            .remove(0)
    }

    fn palm_up() -> HandKeypoints {
        HandSynth::new(GestureClass::OpenPalmUp)
            .wrist(Point3::new(0.1, -0.05, 0.45))
            .seed(3)
            .generate()
            .unwrap()
            .remove(0)
    }

    const LISTING: &str = "# Instruction 0: pick up the water jug
# Gesture: index finger extends out while others curl inward
water_jug_pos = detect_referred_obj_pos('water jug')
pick_up_obj_at_pos(water_jug_pos)

# Instruction 1: hand it to me
# Gesture: an open palm faces upward
target_pos = detect_hand_center_pos()
move_gripper_to_pos(target_pos)
open_gripper()";

    #[test]
    fn water_jug_listing_hands_over_the_jug() {
        let scene = jug_scene();
        let f = filter();
        let perception = Perception {
            scene: &scene,
            filter: &f,
            frames: &[],
        };
        let mut world = WorldState::from_scene(&scene);
        let program = parse_policy(LISTING).unwrap();
        validate_policy(&program, &PrimitiveCatalog::standard()).unwrap();
        let (first, second) = program.statements.split_at(5);
        world.human_hand = Some(pointing_at(Point3::new(0.1, 0.2, 0.9)));
        let run = execute(
            &PolicyProgram {
                statements: first.to_vec(),
            },
            &world,
            &perception,
        );
        assert!(run.failure.is_none(), "{:?}", run.failure);
        assert_eq!(run.world.gripper.holding.as_deref(), Some("water jug"));
        let mut world = run.world;
        world.human_hand = Some(palm_up());
        let run = execute(
            &PolicyProgram {
                statements: second.to_vec(),
            },
            &world,
            &perception,
        );
        assert!(run.failure.is_none());
        let center = run.world.hand_center().unwrap();
        assert_eq!(run.world.objects["water jug"].position, center);
        assert!(check_goal(
            &run.world,
            &GoalSpec::ObjectAtHand {
                object: "water jug".into()
            }
        ));
    }

    #[test]
    fn grasp_failure_leaves_the_world_unchanged() {
        let scene = jug_scene();
        let f = filter();
        let perception = Perception {
            scene: &scene,
            filter: &f,
            frames: &[],
        };
        let world = WorldState::from_scene(&scene);
        let program = parse_policy("p = detect_hand_center_pos()\npick_up_obj_at_pos(p)").unwrap();
        let mut w = world.clone();
        w.human_hand = Some(palm_up());
        let run = execute(&program, &w, &perception);
        assert!(matches!(run.failure, Some(SimError::GraspFailure(_))));
        assert_eq!(run.world, w);
        assert_eq!(run.world.objects.len(), 2);
    }

    #[test]
    fn opens_exactly_the_addressed_drawer() {
        let scene = generate_scene(&SceneSpec::drawer_grid(
            8,
            8,
            0.1,
            Point3::new(-0.35, -0.35, 1.5),
        ))
        .unwrap();
        let f = filter();
        let perception = Perception {
            scene: &scene,
            filter: &f,
            frames: &[],
        };
        let world = WorldState::from_scene(&scene);
        let center = world.drawers[&drawer_label(3, 5)].position;
        let program =
            parse_policy("p = detect_referred_obj_pos('drawer')\nopen_drawer_at_pos(p)").unwrap();
        let mut w = world.clone();
        w.human_hand = Some(pointing_at(center));
        let run = execute(&program, &w, &perception);
        assert!(run.failure.is_none(), "{:?}", run.failure);
        let open: Vec<&String> = run
            .world
            .drawers
            .iter()
            .filter(|(_, d)| d.open)
            .map(|(id, _)| id)
            .collect();
        assert_eq!(open, [&drawer_label(3, 5)]);
        assert_eq!(run.first_target(), Some((center, Some(drawer_label(3, 5)))));
    }

    #[test]
    fn place_is_exact() {
        let scene = jug_scene();
        let f = filter();
        let perception = Perception {
            scene: &scene,
            filter: &f,
            frames: &[],
        };
        let mut w = WorldState::from_scene(&scene);
        let spot = Point3::new(-0.1, 0.2, 1.0);
        w.human_hand = Some(pointing_at(spot));
        w.move_gripper(w.objects["cup"].position);
        w.hold("cup").unwrap();
        let run = execute(
            &parse_policy("t = detect_referred_location()\nplace_obj_at_pos(t)").unwrap(),
            &w,
            &perception,
        );
        assert!(run.failure.is_none());
        let target = run.first_target().unwrap().0;
        assert!(check_goal(
            &run.world,
            &GoalSpec::ObjectAt {
                object: "cup".into(),
                position: target,
                tolerance: 0.001
            }
        ));
    }

    fn statement() -> impl Strategy<Value = &'static str> {
        prop_oneof![
            Just("p = detect_referred_obj_pos('cup')"),
            Just("p = detect_referred_location()"),
            Just("p = detect_hand_center_pos()"),
            Just("d = detect_referred_direction()"),
            Just("move_gripper_to_pos(p)"),
            Just("move_gripper_in_dir(d)"),
            Just("pick_up_obj_at_pos(p)"),
            Just("place_obj_at_pos(p)"),
            Just("open_gripper()"),
            Just("close_gripper()"),
            Just("say('ok')"),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// Validated programs never reach an unknown name; objects are
        /// conserved and holding stays exclusive at every step.
        #[test]
        fn validated_programs_respect_world_invariants(lines in proptest::collection::vec(statement(), 1..12), tx in -0.2f64..0.2) {
            let text = ["p = detect_hand_center_pos()", "d = detect_referred_direction()"]
                .iter().copied().chain(lines).collect::<Vec<_>>().join("\n");
            let program = parse_policy(&text).unwrap();
            prop_assume!(validate_policy(&program, &PrimitiveCatalog::standard()).is_ok());
            let scene = jug_scene();
            let f = filter();
            let perception = Perception { scene: &scene, filter: &f, frames: &[] };
            let mut w = WorldState::from_scene(&scene);
            w.human_hand = Some(pointing_at(Point3::new(tx, 0.2, 0.9)));
            let run = execute(&program, &w, &perception);
            prop_assert!(!matches!(run.failure, Some(SimError::UnknownFunction(_)) | Some(SimError::UnboundName(_))));
            prop_assert_eq!(run.world.objects.len(), w.objects.len());
            run.world.check_invariants().map_err(TestCaseError::fail)?;
        }
    }
}
