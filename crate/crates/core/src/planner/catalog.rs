use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Value kinds flowing between calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Position,
    Direction,
    Scalar,
    Text,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionRole {
    Perception,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSig {
    pub name: String,
    pub role: FunctionRole,
    pub params: Vec<(String, ValueKind)>,
    pub returns: Option<ValueKind>,
    /// Needs a detected gesture to produce a value.
    pub needs_gesture: bool,
    pub doc: String,
}

impl FunctionSig {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Python-style signature line used in prompts.
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(n, k)| format!("{n}: {}", kind_name(*k)))
            .collect();
        let ret = self.returns.map(kind_name).unwrap_or("None");
        format!("{}({}) -> {}", self.name, params.join(", "), ret)
    }
}

fn kind_name(k: ValueKind) -> &'static str {
    match k {
        ValueKind::Position => "position",
        ValueKind::Direction => "direction",
        ValueKind::Scalar => "float",
        ValueKind::Text => "str",
        ValueKind::Trajectory => "trajectory",
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrimitiveCatalog {
    functions: BTreeMap<String, FunctionSig>,
}

struct Def(
    &'static str,
    FunctionRole,
    &'static [(&'static str, ValueKind)],
    Option<ValueKind>,
    bool,
    &'static str,
);

use FunctionRole::{Action, Perception};
use ValueKind::{Direction, Position, Scalar, Text, Trajectory};

const PERCEPTION: &[Def] = &[
    Def(
        "detect_referred_obj_pos",
        Perception,
        &[("obj_name", Text)],
        Some(Position),
        true,
        "center of the named object the user points at",
    ),
    Def(
        "detect_referred_location",
        Perception,
        &[],
        Some(Position),
        true,
        "point in the scene the user points at",
    ),
    Def(
        "detect_referred_direction",
        Perception,
        &[],
        Some(Direction),
        true,
        "unit direction the user points in",
    ),
    Def(
        "detect_hand_center_pos",
        Perception,
        &[],
        Some(Position),
        true,
        "center of the user's palm",
    ),
];

const ACTIONS: &[Def] = &[
    Def(
        "move_gripper_to_pos",
        Action,
        &[("pos", Position)],
        None,
        false,
        "move the open or closed gripper to a position",
    ),
    Def(
        "move_gripper_in_dir",
        Action,
        &[("direction", Direction)],
        None,
        false,
        "move the gripper a small fixed step along a direction",
    ),
    Def(
        "open_gripper",
        Action,
        &[],
        None,
        false,
        "open the gripper, releasing anything held",
    ),
    Def(
        "close_gripper",
        Action,
        &[],
        None,
        false,
        "close the gripper",
    ),
    Def(
        "pick_up_obj_at_pos",
        Action,
        &[("pos", Position)],
        None,
        false,
        "grasp and lift the object at a position",
    ),
    Def(
        "place_obj_at_pos",
        Action,
        &[("pos", Position)],
        None,
        false,
        "put the held object down at a position",
    ),
    Def(
        "open_drawer_at_pos",
        Action,
        &[("pos", Position)],
        None,
        false,
        "open the drawer whose handle is at a position",
    ),
    Def(
        "say",
        Action,
        &[("text", Text)],
        None,
        false,
        "speak to the user",
    ),
];

/// Extra skills exercised by the gesture-instruction fixtures.
const EXTENDED: &[Def] = &[
    Def(
        "detect_hand_trajectory",
        Perception,
        &[],
        Some(Trajectory),
        true,
        "path traced by the user's hand",
    ),
    Def(
        "detect_finger_gap",
        Perception,
        &[],
        Some(Scalar),
        true,
        "distance between the user's thumb and index tips",
    ),
    Def(
        "draw_trajectory",
        Action,
        &[("path", Trajectory)],
        None,
        false,
        "draw a path with the held pen",
    ),
    Def(
        "throw_away_obj_at_pos",
        Action,
        &[("pos", Position)],
        None,
        false,
        "pick the object at a position and drop it in the trash",
    ),
    Def(
        "hand_over_obj",
        Action,
        &[("obj_name", Text)],
        None,
        false,
        "fetch the named object and give it to the user",
    ),
    Def("stop_motion", Action, &[], None, false, "halt all motion"),
    Def(
        "move_towards_person",
        Action,
        &[],
        None,
        false,
        "approach the user",
    ),
    Def(
        "turn_around",
        Action,
        &[],
        None,
        false,
        "rotate the robot base half a turn",
    ),
    Def(
        "pour_to_height",
        Action,
        &[("height", Scalar)],
        None,
        false,
        "pour until the liquid reaches a height in meters",
    ),
    Def(
        "twist_gripper",
        Action,
        &[],
        None,
        false,
        "rotate the wrist to twist a cap",
    ),
    Def(
        "push_in_dir",
        Action,
        &[("direction", Direction)],
        None,
        false,
        "push the object under the gripper",
    ),
    Def(
        "lift_gripper",
        Action,
        &[("height", Scalar)],
        None,
        false,
        "raise the gripper by a height in meters",
    ),
    Def(
        "squeeze_gripper",
        Action,
        &[],
        None,
        false,
        "squeeze the held object",
    ),
    Def(
        "repeat_last_task",
        Action,
        &[],
        None,
        false,
        "run the previous task again",
    ),
    Def(
        "open_door",
        Action,
        &[],
        None,
        false,
        "open the nearby door",
    ),
];

impl PrimitiveCatalog {
    fn from_defs<'a>(defs: impl IntoIterator<Item = &'a Def>) -> Self {
        let functions = defs
            .into_iter()
            .map(|Def(name, role, params, returns, needs_gesture, doc)| {
                let sig = FunctionSig {
                    name: (*name).to_owned(),
                    role: *role,
                    params: params.iter().map(|(n, k)| ((*n).to_owned(), *k)).collect(),
                    returns: *returns,
                    needs_gesture: *needs_gesture,
                    doc: (*doc).to_owned(),
                };
                (sig.name.clone(), sig)
            })
            .collect();
        Self { functions }
    }

    /// Perception functions plus the tabletop action primitives.
    pub fn standard() -> Self {
        Self::from_defs(PERCEPTION.iter().chain(ACTIONS))
    }

    /// The standard catalog plus the skills used by the gesture-instruction cases.
    pub fn extended() -> Self {
        Self::from_defs(PERCEPTION.iter().chain(ACTIONS).chain(EXTENDED))
    }

    pub fn get(&self, name: &str) -> Option<&FunctionSig> {
        self.functions.get(name)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Perception functions first, each group by name.
    pub fn iter(&self) -> impl Iterator<Item = &FunctionSig> {
        let p = self.functions.values().filter(|f| f.role == Perception);
        p.chain(self.functions.values().filter(|f| f.role == Action))
    }

    pub fn insert(&mut self, sig: FunctionSig) -> Option<FunctionSig> {
        self.functions.insert(sig.name.clone(), sig)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_catalog_contents() {
        let c = PrimitiveCatalog::standard();
        assert_eq!(c.len(), 12);
        assert_eq!(c.get("open_drawer_at_pos").unwrap().arity(), 1);
        assert_eq!(
            c.get("detect_hand_center_pos").unwrap().returns,
            Some(Position)
        );
        assert!(c.get("draw_trajectory").is_none());
        assert_eq!(c.iter().take(4).filter(|f| f.role == Perception).count(), 4);
    }

    #[test]
    fn extended_is_a_superset() {
        let (s, e) = (PrimitiveCatalog::standard(), PrimitiveCatalog::extended());
        assert!(s.iter().all(|f| e.get(&f.name) == Some(f)));
        assert_eq!(e.len(), s.len() + EXTENDED.len());
    }

    #[test]
    fn signature_rendering() {
        let c = PrimitiveCatalog::standard();
        assert_eq!(
            c.get("detect_referred_obj_pos").unwrap().signature(),
            "detect_referred_obj_pos(obj_name: str) -> position"
        );
        assert_eq!(
            c.get("open_gripper").unwrap().signature(),
            "open_gripper() -> None"
        );
    }
}
