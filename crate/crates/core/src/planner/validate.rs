use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::catalog::{PrimitiveCatalog, ValueKind};
use super::program::{Call, Expr, PolicyProgram, Statement};

/// Problems that make a program unsafe to run. `statement` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownFunction {
        statement: usize,
        name: String,
    },
    ArityViolation {
        statement: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    UseBeforeBind {
        statement: usize,
        name: String,
    },
    VoidAssignment {
        statement: usize,
        name: String,
    },
    KindMismatch {
        statement: usize,
        name: String,
        arg: usize,
        expected: ValueKind,
        got: ValueKind,
    },
    ReservedName {
        statement: usize,
        name: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UnknownFunction { statement, name } => {
                write!(f, "statement {statement}: unknown function {name}")
            }
            Violation::ArityViolation {
                statement,
                name,
                expected,
                got,
            } => {
                write!(
                    f,
                    "statement {statement}: {name} takes {expected} argument(s), got {got}"
                )
            }
            Violation::UseBeforeBind { statement, name } => {
                write!(f, "statement {statement}: {name} used before assignment")
            }
            Violation::VoidAssignment { statement, name } => {
                write!(f, "statement {statement}: {name} returns no value")
            }
            Violation::KindMismatch {
                statement,
                name,
                arg,
                expected,
                got,
            } => {
                write!(f, "statement {statement}: argument {arg} of {name} must be {expected:?}, got {got:?}")
            }
            Violation::ReservedName { statement, name } => write!(
                f,
                "statement {statement}: cannot assign to function name {name}"
            ),
        }
    }
}

/// Where an argument value came from, traced through assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgSource {
    ObjectPosition,
    Location,
    Direction,
    HandPosition,
    Trajectory,
    Text,
    Scalar,
    /// The call takes no arguments.
    None,
    Other,
}

impl ArgSource {
    fn of_perception(name: &str) -> ArgSource {
        match name {
            "detect_referred_obj_pos" => ArgSource::ObjectPosition,
            "detect_referred_location" => ArgSource::Location,
            "detect_referred_direction" => ArgSource::Direction,
            "detect_hand_center_pos" => ArgSource::HandPosition,
            "detect_hand_trajectory" => ArgSource::Trajectory,
            "detect_finger_gap" => ArgSource::Scalar,
            _ => ArgSource::Other,
        }
    }
}

struct Checker<'a> {
    catalog: &'a PrimitiveCatalog,
    kinds: BTreeMap<String, ValueKind>,
    out: Vec<Violation>,
    statement: usize,
}

impl Checker<'_> {
    /// Kind of `e`, or None when unknown (already reported).
    fn expr(&mut self, e: &Expr) -> Option<ValueKind> {
        match e {
            Expr::Str { .. } => Some(ValueKind::Text),
            Expr::Number { .. } => Some(ValueKind::Scalar),
            Expr::Ident { name } => {
                let k = self.kinds.get(name).copied();
                if k.is_none() {
                    self.out.push(Violation::UseBeforeBind {
                        statement: self.statement,
                        name: name.clone(),
                    });
                }
                k
            }
            Expr::Call(c) => self.call(c),
        }
    }

    fn call(&mut self, c: &Call) -> Option<ValueKind> {
        let arg_kinds: Vec<Option<ValueKind>> = c.args.iter().map(|a| self.expr(a)).collect();
        let Some(sig) = self.catalog.get(&c.name) else {
            self.out.push(Violation::UnknownFunction {
                statement: self.statement,
                name: c.name.clone(),
            });
            return None;
        };
        if sig.arity() != c.args.len() {
            self.out.push(Violation::ArityViolation {
                statement: self.statement,
                name: c.name.clone(),
                expected: sig.arity(),
                got: c.args.len(),
            });
        } else {
            for (i, (got, (_, expected))) in arg_kinds.iter().zip(&sig.params).enumerate() {
                if let Some(got) = got {
                    if got != expected {
                        self.out.push(Violation::KindMismatch {
                            statement: self.statement,
                            name: c.name.clone(),
                            arg: i + 1,
                            expected: *expected,
                            got: *got,
                        });
                    }
                }
            }
        }
        sig.returns
    }
}

/// Checks names, arities, argument kinds and binding order against `catalog`.
pub fn validate_policy(
    p: &PolicyProgram,
    catalog: &PrimitiveCatalog,
) -> Result<(), Vec<Violation>> {
    let mut ck = Checker {
        catalog,
        kinds: BTreeMap::new(),
        out: Vec::new(),
        statement: 0,
    };
    for (i, s) in p.statements.iter().enumerate() {
        ck.statement = i + 1;
        match s {
            Statement::Comment { .. } => {}
            Statement::Expr { call } => {
                ck.call(call);
            }
            Statement::Assign { name, value } => {
                if catalog.get(name).is_some() {
                    ck.out.push(Violation::ReservedName {
                        statement: i + 1,
                        name: name.clone(),
                    });
                }
                let is_call = matches!(value, Expr::Call(_));
                let before = ck.out.len();
                match ck.expr(value) {
                    Some(k) => {
                        ck.kinds.insert(name.clone(), k);
                    }
                    None if is_call && ck.out.len() == before => {
                        let callee = match value {
                            Expr::Call(c) => c.name.clone(),
                            _ => unreachable!(),
                        };
                        ck.out.push(Violation::VoidAssignment {
                            statement: i + 1,
                            name: callee,
                        });
                    }
                    None => {}
                }
            }
        }
    }
    if ck.out.is_empty() {
        Ok(())
    } else {
        Err(ck.out)
    }
}

/// Each top-level or nested call with the traced source of every argument.
pub fn call_sources(p: &PolicyProgram) -> Vec<(String, Vec<ArgSource>)> {
    let mut env: BTreeMap<String, ArgSource> = BTreeMap::new();
    let mut out = Vec::new();

    fn source(
        e: &Expr,
        env: &BTreeMap<String, ArgSource>,
        out: &mut Vec<(String, Vec<ArgSource>)>,
    ) -> ArgSource {
        match e {
            Expr::Str { .. } => ArgSource::Text,
            Expr::Number { .. } => ArgSource::Scalar,
            Expr::Ident { name } => env.get(name).copied().unwrap_or(ArgSource::Other),
            Expr::Call(c) => {
                record(c, env, out);
                ArgSource::of_perception(&c.name)
            }
        }
    }
    fn record(
        c: &Call,
        env: &BTreeMap<String, ArgSource>,
        out: &mut Vec<(String, Vec<ArgSource>)>,
    ) {
        let args: Vec<ArgSource> = c.args.iter().map(|a| source(a, env, out)).collect();
        out.push((
            c.name.clone(),
            if args.is_empty() {
                vec![ArgSource::None]
            } else {
                args
            },
        ));
    }

    for s in &p.statements {
        match s {
            Statement::Comment { .. } => {}
            Statement::Expr { call } => record(call, &env, &mut out),
            Statement::Assign { name, value } => {
                let src = source(value, &env, &mut out);
                env.insert(name.clone(), src);
            }
        }
    }
    out
}

/// Whether running `p` requires a detected gesture.
pub fn requires_gesture(p: &PolicyProgram, catalog: &PrimitiveCatalog) -> bool {
    p.calls()
        .iter()
        .any(|c| catalog.get(&c.name).is_some_and(|s| s.needs_gesture))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::program::parse_policy;

    fn check(src: &str) -> Result<(), Vec<Violation>> {
        validate_policy(&parse_policy(src).unwrap(), &PrimitiveCatalog::standard())
    }

    #[test]
    fn extra_positional_argument_is_an_arity_violation() {
        let src = "drawer_pos = detect_referred_obj_pos('drawer')\nrow_pos = detect_referred_location()\nopen_drawer_at_pos(drawer_pos, row_pos)";
        assert_eq!(
            check(src).unwrap_err(),
            vec![Violation::ArityViolation {
                statement: 3,
                name: "open_drawer_at_pos".into(),
                expected: 1,
                got: 2
            }]
        );
    }

    #[test]
    fn unbound_identifier() {
        assert_eq!(
            check("move_gripper_to_pos(target_pos)").unwrap_err(),
            vec![Violation::UseBeforeBind {
                statement: 1,
                name: "target_pos".into()
            }]
        );
    }

    #[test]
    fn unknown_function_and_void_assignment() {
        let errs = check("x = open_gripper()\nfly()").unwrap_err();
        assert_eq!(
            errs,
            vec![
                Violation::VoidAssignment {
                    statement: 1,
                    name: "open_gripper".into()
                },
                Violation::UnknownFunction {
                    statement: 2,
                    name: "fly".into()
                }
            ]
        );
    }

    #[test]
    fn kinds_are_checked() {
        let errs =
            check("d = detect_referred_direction()\npick_up_obj_at_pos(d)\nsay(3)").unwrap_err();
        assert!(matches!(
            errs[0],
            Violation::KindMismatch {
                statement: 2,
                arg: 1,
                expected: ValueKind::Position,
                got: ValueKind::Direction,
                ..
            }
        ));
        assert!(matches!(
            errs[1],
            Violation::KindMismatch {
                statement: 3,
                expected: ValueKind::Text,
                got: ValueKind::Scalar,
                ..
            }
        ));
    }

    #[test]
    fn function_names_are_reserved() {
        assert!(matches!(
            check("say = 'hi'").unwrap_err()[0],
            Violation::ReservedName { .. }
        ));
    }

    #[test]
    fn sources_trace_through_assignments() {
        let p = parse_policy("p = detect_referred_obj_pos('cup')\nq = p\npick_up_obj_at_pos(q)\nopen_gripper()\nsay('done')").unwrap();
        let s = call_sources(&p);
        assert_eq!(
            s[0],
            ("detect_referred_obj_pos".into(), vec![ArgSource::Text])
        );
        assert_eq!(
            s[1],
            ("pick_up_obj_at_pos".into(), vec![ArgSource::ObjectPosition])
        );
        assert_eq!(s[2], ("open_gripper".into(), vec![ArgSource::None]));
        assert_eq!(s[3], ("say".into(), vec![ArgSource::Text]));
        assert!(requires_gesture(&p, &PrimitiveCatalog::standard()));
        assert!(!requires_gesture(
            &parse_policy("open_gripper()").unwrap(),
            &PrimitiveCatalog::standard()
        ));
    }
}
