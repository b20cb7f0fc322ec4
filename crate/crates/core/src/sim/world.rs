use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::Point3;
use crate::gesture::HandKeypoints;
use crate::referent::hand_center;
use crate::scene::Scene;

/// Grasp and drawer match radius, meters.
pub const GRASP_TOL: f64 = 0.02;
/// Placement exactness, meters.
pub const PLACE_TOL: f64 = 0.001;
/// Handover success radius around the palm center, meters.
pub const HANDOVER_TOL: f64 = 0.05;
/// Step length of a relative gripper move, meters.
pub const DIRECTION_STEP: f64 = 0.05;

pub const GRIPPER_HOME: Point3 = Point3 {
    x: 0.0,
    y: -0.3,
    z: 0.3,
};
/// Where thrown-away objects end up.
pub const TRASH_POS: Point3 = Point3 {
    x: 0.6,
    y: 0.2,
    z: 0.6,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub label: String,
    pub position: Point3,
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drawer {
    pub position: Point3,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub position: Point3,
    pub open: bool,
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, SimObject>,
    pub drawers: BTreeMap<String, Drawer>,
    pub gripper: Gripper,
    pub human_hand: Option<HandKeypoints>,
}

impl WorldState {
    /// Scene labels starting with "drawer" become drawers; the rest become
    /// objects. Repeated labels get "#k" suffixed ids.
    pub fn from_scene(scene: &Scene) -> Self {
        let mut objects = BTreeMap::new();
        let mut drawers = BTreeMap::new();
        for o in &scene.objects {
            if o.label.starts_with("drawer") {
                drawers.insert(
                    unique_id(&drawers, &o.label),
                    Drawer {
                        position: o.position,
                        open: false,
                    },
                );
            } else {
                let id = unique_id(&objects, &o.label);
                objects.insert(
                    id,
                    SimObject {
                        label: o.label.clone(),
                        position: o.position,
                        held: false,
                    },
                );
            }
        }
        Self {
            objects,
            drawers,
            gripper: Gripper {
                position: GRIPPER_HOME,
                open: true,
                holding: None,
            },
            human_hand: None,
        }
    }

    /// Puts object `id` in the closed gripper.
    pub fn hold(&mut self, id: &str) -> Result<(), SimError> {
        if self.gripper.holding.is_some() {
            return Err(SimError::GripperBusy);
        }
        let obj = self
            .objects
            .get_mut(id)
            .ok_or_else(|| SimError::NoSuchObject(id.to_owned()))?;
        obj.held = true;
        obj.position = self.gripper.position;
        self.gripper.open = false;
        self.gripper.holding = Some(id.to_owned());
        Ok(())
    }

    pub fn move_gripper(&mut self, p: Point3) {
        self.gripper.position = p;
        if let Some(id) = &self.gripper.holding {
            if let Some(o) = self.objects.get_mut(id) {
                o.position = p;
            }
        }
    }

    /// Opens the gripper, leaving any held object at the gripper position.
    pub fn release(&mut self) {
        self.gripper.open = true;
        if let Some(id) = self.gripper.holding.take() {
            if let Some(o) = self.objects.get_mut(&id) {
                o.held = false;
                o.position = self.gripper.position;
            }
        }
    }

    /// Nearest free object within `tol` of `p`; ties go to the smaller id.
    pub fn object_near(&self, p: Point3, tol: f64) -> Option<String> {
        nearest(
            self.objects
                .iter()
                .filter(|(_, o)| !o.held)
                .map(|(id, o)| (id, o.position)),
            p,
            tol,
        )
    }

    pub fn drawer_near(&self, p: Point3, tol: f64) -> Option<String> {
        nearest(self.drawers.iter().map(|(id, d)| (id, d.position)), p, tol)
    }

    /// Object id by id or label.
    pub fn lookup(&self, key: &str) -> Option<&str> {
        if let Some((id, _)) = self.objects.get_key_value(key) {
            return Some(id);
        }
        self.objects
            .iter()
            .find(|(_, o)| o.label == key)
            .map(|(id, _)| id.as_str())
    }

    pub fn hand_center(&self) -> Option<Point3> {
        self.human_hand.as_ref().map(hand_center)
    }

    /// Holding exclusivity and held-object tracking.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<&String> = self
            .objects
            .iter()
            .filter(|(_, o)| o.held)
            .map(|(id, _)| id)
            .collect();
        match (&self.gripper.holding, held.as_slice()) {
            (None, []) => Ok(()),
            (Some(h), [only]) if h == *only => {
                let o = &self.objects[h];
                if o.position == self.gripper.position {
                    Ok(())
                } else {
                    Err(format!("held object {h} is not at the gripper"))
                }
            }
            (h, held) => Err(format!("gripper holds {h:?} but held objects are {held:?}")),
        }
    }
}

fn unique_id<V>(map: &BTreeMap<String, V>, label: &str) -> String {
    if !map.contains_key(label) {
        return label.to_owned();
    }
    (2..)
        .map(|k| format!("{label}#{k}"))
        .find(|id| !map.contains_key(id))
        .expect("unbounded")
}

fn nearest<'a>(
    items: impl Iterator<Item = (&'a String, Point3)>,
    p: Point3,
    tol: f64,
) -> Option<String> {
    items
        .map(|(id, q)| (q.distance(p), id))
        .filter(|(d, _)| *d <= tol)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalSpec {
    /// The object (id or label) rests free within reach of the palm center.
    ObjectAtHand {
        object: String,
    },
    DrawerOpen {
        drawer: String,
    },
    ObjectAt {
        object: String,
        position: Point3,
        tolerance: f64,
    },
    GripperNear {
        position: Point3,
        tolerance: f64,
    },
}

impl GoalSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            GoalSpec::ObjectAt { tolerance, .. } | GoalSpec::GripperNear { tolerance, .. }
                if !(*tolerance > 0.0) =>
            {
                Err(SimError::InvalidScenario(format!(
                    "goal tolerance must be positive, got {tolerance}"
                )))
            }
            _ => Ok(()),
        }
    }
}

pub fn check_goal(world: &WorldState, goal: &GoalSpec) -> bool {
    match goal {
        GoalSpec::ObjectAtHand { object } => {
            let (Some(id), Some(center)) = (world.lookup(object), world.hand_center()) else {
                return false;
            };
            let o = &world.objects[id];
            !o.held && o.position.distance(center) <= HANDOVER_TOL
        }
        GoalSpec::DrawerOpen { drawer } => world.drawers.get(drawer).is_some_and(|d| d.open),
        GoalSpec::ObjectAt {
            object,
            position,
            tolerance,
        } => world.lookup(object).is_some_and(|id| {
            !world.objects[id].held && world.objects[id].position.distance(*position) <= *tolerance
        }),
        GoalSpec::GripperNear {
            position,
            tolerance,
        } => world.gripper.position.distance(*position) <= *tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::scene::{generate_scene, ObjectEntry, SceneSpec};

    fn world() -> WorldState {
        let scene = Scene::with_surface(
            vec![
                ObjectEntry::new("cup", Point3::new(0.0, 0.1, 0.8)),
                ObjectEntry::new("cup", Point3::new(0.2, 0.1, 0.8)),
            ],
            vec![],
            CameraIntrinsics::default(),
        )
        .unwrap();
        WorldState::from_scene(&scene)
    }

    #[test]
    fn repeated_labels_get_distinct_ids() {
        let w = world();
        assert_eq!(w.objects.keys().collect::<Vec<_>>(), ["cup", "cup#2"]);
        assert_eq!(w.lookup("cup"), Some("cup"));
    }

    #[test]
    fn drawers_are_split_out() {
        let w = WorldState::from_scene(
            &generate_scene(&SceneSpec::drawer_grid(
                2,
                2,
                0.1,
                Point3::new(0.0, 0.0, 1.0),
            ))
            .unwrap(),
        );
        assert_eq!(w.drawers.len(), 4);
        assert!(w.objects.is_empty());
        assert!(!check_goal(
            &w,
            &GoalSpec::DrawerOpen {
                drawer: "drawer_1_1".into()
            }
        ));
    }

    #[test]
    fn held_object_follows_the_gripper() {
        let mut w = world();
        w.move_gripper(Point3::new(0.2, 0.1, 0.8));
        w.hold("cup#2").unwrap();
        w.move_gripper(Point3::new(0.0, -0.2, 0.5));
        w.check_invariants().unwrap();
        assert_eq!(w.objects["cup#2"].position, Point3::new(0.0, -0.2, 0.5));
        assert!(matches!(w.hold("cup"), Err(SimError::GripperBusy)));
        w.release();
        w.check_invariants().unwrap();
        assert!(check_goal(
            &w,
            &GoalSpec::ObjectAt {
                object: "cup#2".into(),
                position: Point3::new(0.0, -0.2, 0.5),
                tolerance: PLACE_TOL
            }
        ));
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert!(GoalSpec::GripperNear {
            position: Point3::ORIGIN,
            tolerance: 0.0
        }
        .validate()
        .is_err());
    }
}
