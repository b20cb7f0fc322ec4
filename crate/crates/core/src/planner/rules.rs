use super::instruction::{textualize_instruction, Instruction};

/// Hand cue recovered from the gesture comment line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cue {
    Point,
    PalmUp,
    Fist,
    Touch,
    ThumbsUp,
    ThumbsDown,
    Ok,
    Stop,
    Beckon,
    PickUp,
    Release,
    CircleHorizontal,
    Missing,
    Other,
}

/// Maps a label or a description to a cue. Order matters: motion and
/// compound descriptions are tested before the shapes they contain.
pub fn gesture_cue(text: &str) -> Cue {
    let t = text.trim().to_ascii_lowercase();
    let has = |s: &str| t.contains(s);
    if t.is_empty() || t == "none detected" || t == "unknown" {
        Cue::Missing
    } else if has("thumbs up") || has("points upward") {
        Cue::ThumbsUp
    } else if has("thumbs down") || has("points down") {
        Cue::ThumbsDown
    } else if t == "ok"
        || has("form a circle while others extend")
        || has("forms a circle while others extend")
    {
        Cue::Ok
    } else if has("beckon") || has("faces inward") {
        Cue::Beckon
    } else if has("horizontal circle")
        || has("circular motion horizontally")
        || has("circling horizontally")
    {
        Cue::CircleHorizontal
    } else if has("touching an object") || has("on an object") {
        Cue::Touch
    } else if t == "pick up" || has("faces upward, and then all fingers curl") {
        Cue::PickUp
    } else if t == "release" || has("faces downward, and then all fingers extend") {
        Cue::Release
    } else if t == "stop" || t == "open palm out" || t == "an open palm faces outward" {
        Cue::Stop
    } else if t == "handover" || t == "open palm up" || t == "an open palm faces upward" {
        Cue::PalmUp
    } else if t == "fist" || t == "a closed palm" {
        Cue::Fist
    } else if has("point") || has("index finger extends out") || t == "drawing" {
        Cue::Point
    } else {
        Cue::Other
    }
}

const DETERMINERS: &[&str] = &["the", "that", "this", "these", "those", "a", "an", "my"];
const STOP_WORDS: &[&str] = &[
    "to", "for", "me", "over", "here", "there", "please", "it", "up", "on", "in", "into", "from",
    "and", "this", "that", "with",
];

fn words(speech: &str) -> Vec<String> {
    speech
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

/// Noun phrase after the first determiner, cut at the first stop word.
/// Falls back to "object" when nothing is named.
pub fn object_noun(speech: &str) -> String {
    let w = words(speech);
    let start = w
        .iter()
        .position(|x| DETERMINERS.contains(&x.as_str()))
        .map(|i| i + 1);
    let noun: Vec<&str> = match start {
        Some(s) => w[s..]
            .iter()
            .map(String::as_str)
            .take_while(|x| !STOP_WORDS.contains(x))
            .collect(),
        None => Vec::new(),
    };
    if noun.is_empty() {
        "object".to_owned()
    } else {
        noun.join(" ")
    }
}

fn var_for(noun: &str) -> String {
    let v: String = noun
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{v}_pos")
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn object_then(noun: &str, action: &str) -> Vec<String> {
    let v = var_for(noun);
    vec![
        format!("{v} = detect_referred_obj_pos({})", quote(noun)),
        format!("{action}({v})"),
    ]
}

const NOT_UNDERSTOOD: &str = "say('I did not understand')";
const NO_GESTURE: &str = "say('I did not see a gesture. Please show me again.')";

/// Deterministic planner over speech keywords and the gesture cue.
pub fn rule_plan_text(speech: &str, gesture_line: &str) -> String {
    let w = words(speech);
    let any = |ks: &[&str]| w.iter().any(|x| ks.contains(&x.as_str()));
    let cue = gesture_cue(gesture_line);
    let deictic_words = any(&["this", "that", "here", "there", "these", "those", "way"]);
    let hand_target = || {
        vec![
            "target_pos = detect_hand_center_pos()".to_owned(),
            "move_gripper_to_pos(target_pos)".to_owned(),
        ]
    };

    let lines: Vec<String> = match cue {
        Cue::Point if any(&["throw"]) => object_then(&object_noun(speech), "throw_away_obj_at_pos"),
        Cue::Point if any(&["draw"]) => vec![
            "path = detect_hand_trajectory()".into(),
            "draw_trajectory(path)".into(),
        ],
        Cue::Point if any(&["open"]) && any(&["drawer"]) => {
            object_then("drawer", "open_drawer_at_pos")
        }
        Cue::Point if any(&["give", "hand", "fetch", "bring"]) => {
            let mut l = object_then(&object_noun(speech), "pick_up_obj_at_pos");
            l.extend([
                "hand_pos = detect_hand_center_pos()".to_owned(),
                "move_gripper_to_pos(hand_pos)".into(),
                "open_gripper()".into(),
            ]);
            l
        }
        Cue::Point if any(&["pick", "grab", "grasp", "take"]) => {
            object_then(&object_noun(speech), "pick_up_obj_at_pos")
        }
        Cue::Point if any(&["put", "place", "drop"]) => {
            vec![
                "target_pos = detect_referred_location()".into(),
                "place_obj_at_pos(target_pos)".into(),
            ]
        }
        Cue::Point if any(&["move", "go"]) && any(&["way", "direction"]) => {
            vec![
                "direction = detect_referred_direction()".into(),
                "move_gripper_in_dir(direction)".into(),
            ]
        }
        Cue::Point if any(&["move", "go", "come"]) => {
            vec![
                "target_pos = detect_referred_location()".into(),
                "move_gripper_to_pos(target_pos)".into(),
            ]
        }
        Cue::PalmUp if any(&["here", "hand", "give", "me"]) => {
            let mut l = hand_target();
            l.push("open_gripper()".into());
            l
        }
        Cue::Fist if any(&["here", "come", "over"]) => hand_target(),
        Cue::Touch if any(&["pick", "grab", "grasp", "take"]) => {
            vec![
                "target_pos = detect_hand_center_pos()".into(),
                "pick_up_obj_at_pos(target_pos)".into(),
            ]
        }
        Cue::ThumbsUp | Cue::Ok if w.is_empty() || any(&["yes", "ok", "good"]) => {
            vec!["close_gripper()".into()]
        }
        Cue::ThumbsDown => vec!["say('What should I change?')".into()],
        Cue::Stop if w.is_empty() || any(&["stop", "wait"]) => vec!["stop_motion()".into()],
        Cue::Beckon if w.is_empty() || any(&["come", "here"]) => {
            vec!["move_towards_person()".into()]
        }
        Cue::PickUp if w.is_empty() || any(&["grasp", "grab", "pick", "take"]) => {
            vec!["close_gripper()".into()]
        }
        Cue::Release if w.is_empty() || any(&["drop", "release", "let"]) => {
            vec!["open_gripper()".into()]
        }
        Cue::CircleHorizontal if any(&["turn", "around"]) || w.is_empty() => {
            vec!["turn_around()".into()]
        }
        Cue::Missing if deictic_words => vec![NO_GESTURE.into()],
        _ => vec![NOT_UNDERSTOOD.into()],
    };
    lines.join("\n")
}

/// Plans from an instruction with the same table the rule backend uses.
pub fn rule_plan(i: &Instruction) -> String {
    let block = textualize_instruction(i, 0);
    let (speech, gesture) = split_block(&block).expect("textualized block has both lines");
    rule_plan_text(&speech, &gesture)
}

/// Speech and gesture text from a two-line instruction block.
pub fn split_block(block: &str) -> Option<(String, String)> {
    let mut speech = None;
    let mut gesture = None;
    for line in block.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# Instruction ") {
            let text = rest.split_once(':').map(|(_, t)| t.trim()).unwrap_or("");
            speech = Some(if text == "(no speech)" {
                String::new()
            } else {
                text.to_owned()
            });
        } else if let Some(rest) = line.strip_prefix("# Gesture:") {
            gesture = Some(rest.trim().to_owned());
        }
    }
    Some((speech?, gesture?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{GestureClass, GestureRepresentation};
    use crate::planner::catalog::PrimitiveCatalog;
    use crate::planner::program::parse_policy;
    use crate::planner::validate::validate_policy;

    fn calls(text: &str) -> Vec<String> {
        parse_policy(text)
            .unwrap()
            .calls()
            .iter()
            .map(|c| c.name.clone())
            .collect()
    }

    #[test]
    fn figure_one_plan() {
        let i = Instruction::speech("give me that tool")
            .with_gesture(GestureRepresentation::label(GestureClass::Pointing));
        let text = rule_plan(&i);
        assert_eq!(
            calls(&text),
            [
                "detect_referred_obj_pos",
                "pick_up_obj_at_pos",
                "detect_hand_center_pos",
                "move_gripper_to_pos",
                "open_gripper"
            ]
        );
        assert!(text.starts_with("tool_pos = detect_referred_obj_pos('tool')"));
        validate_policy(&parse_policy(&text).unwrap(), &PrimitiveCatalog::standard()).unwrap();
    }

    #[test]
    fn handover_with_open_palm() {
        for g in [
            GestureRepresentation::label(GestureClass::OpenPalmUp),
            GestureRepresentation::description(GestureClass::OpenPalmUp),
        ] {
            let text = rule_plan(&Instruction::speech("hand it to me").with_gesture(g));
            assert_eq!(
                calls(&text),
                [
                    "detect_hand_center_pos",
                    "move_gripper_to_pos",
                    "open_gripper"
                ]
            );
        }
    }

    #[test]
    fn gibberish_says_it_did_not_understand() {
        let text = rule_plan(
            &Instruction::speech("blorp fizzle wug")
                .with_gesture(GestureRepresentation::label(GestureClass::Pointing)),
        );
        assert_eq!(text, NOT_UNDERSTOOD);
        assert_eq!(calls(&text), ["say"]);
    }

    #[test]
    fn water_jug_listing() {
        let i = Instruction::speech("pick up the water jug")
            .with_gesture(GestureRepresentation::description(GestureClass::Pointing));
        assert_eq!(rule_plan(&i), "water_jug_pos = detect_referred_obj_pos('water jug')\npick_up_obj_at_pos(water_jug_pos)");
    }

    #[test]
    fn drawer_and_missing_gesture() {
        let i = Instruction::speech("open that drawer for me")
            .with_gesture(GestureRepresentation::label(GestureClass::Pointing));
        assert_eq!(
            calls(&rule_plan(&i)),
            ["detect_referred_obj_pos", "open_drawer_at_pos"]
        );
        assert_eq!(
            rule_plan(&Instruction::speech("open that drawer")),
            NO_GESTURE
        );
    }

    #[test]
    fn nouns() {
        assert_eq!(object_noun("give me that tool"), "tool");
        assert_eq!(
            object_noun("throw all the trash into the trash can"),
            "trash"
        );
        assert_eq!(object_noun("throw away this, this, and this"), "object");
        assert_eq!(object_noun("pick up this water jug"), "water jug");
    }

    #[test]
    fn cues_from_labels_and_descriptions() {
        for c in GestureClass::all_known() {
            let (l, d) = (gesture_cue(c.label()), gesture_cue(c.description()));
            match c {
                GestureClass::Pointing => assert_eq!((l, d), (Cue::Point, Cue::Point)),
                GestureClass::OpenPalmUp => assert_eq!((l, d), (Cue::PalmUp, Cue::PalmUp)),
                GestureClass::Fist => assert_eq!((l, d), (Cue::Fist, Cue::Fist)),
                GestureClass::PickUpMotion => assert_eq!((l, d), (Cue::PickUp, Cue::PickUp)),
                GestureClass::CirclingHorizontal => {
                    assert_eq!((l, d), (Cue::CircleHorizontal, Cue::CircleHorizontal))
                }
                _ => {}
            }
        }
        assert_eq!(gesture_cue("none detected"), Cue::Missing);
    }
}
