//! The policy language: one statement per line, assignments, calls and
//! comments over string/number literals and identifiers.

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Str { value: String },
    Number { value: f64 },
    Ident { name: String },
    Call(Call),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    /// Text after the `#`, verbatim.
    Comment {
        text: String,
    },
    Assign {
        name: String,
        value: Expr,
    },
    Expr {
        call: Call,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyProgram {
    pub statements: Vec<Statement>,
}

impl PolicyProgram {
    /// Every call in statement order, nested calls before their caller.
    pub fn calls(&self) -> Vec<&Call> {
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Call>) {
            if let Expr::Call(c) = e {
                visit(c, out);
            }
        }
        fn visit<'a>(c: &'a Call, out: &mut Vec<&'a Call>) {
            for a in &c.args {
                walk(a, out);
            }
            out.push(c);
        }
        let mut out = Vec::new();
        for s in &self.statements {
            match s {
                Statement::Assign { value, .. } => walk(value, &mut out),
                Statement::Expr { call } => visit(call, &mut out),
                Statement::Comment { .. } => {}
            }
        }
        out
    }
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
            src,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        if !self
            .peek()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        {
            return None;
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    self.pos = open;
                    return self.err("unterminated string literal");
                }
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    let esc = match self.peek() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some(c @ ('\\' | '\'' | '"')) => c,
                        _ => return self.err("unknown escape sequence"),
                    };
                    out.push(esc);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.pos += 1;
        }
        let digits = |c: &mut Self| {
            let s = c.pos;
            while c.peek().is_some_and(|d| d.is_ascii_digit()) {
                c.pos += 1;
            }
            c.pos > s
        };
        let mut any = digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return self.err("expected a number");
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('-' | '+')) {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = mark;
                return self.err("malformed exponent");
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.err("number out of range")
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(q @ ('\'' | '"')) => Ok(Expr::Str {
                value: self.string(q)?,
            }),
            Some(c) if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') => Ok(Expr::Number {
                value: self.number()?,
            }),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let name = self.ident().expect("identifier start checked");
                if self.eat('(') {
                    Ok(Expr::Call(self.call_rest(name)?))
                } else {
                    Ok(Expr::Ident { name })
                }
            }
            Some(_) => self.err("expected an expression"),
            None => self.err("unexpected end of line, expected an expression"),
        }
    }

    /// Arguments after an already consumed `(`.
    fn call_rest(&mut self, name: String) -> Result<Call, ParseError> {
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(Call { name, args });
        }
        loop {
            args.push(self.expr()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return Ok(Call { name, args });
            }
            self.skip_ws();
            return if self.peek().is_none() {
                self.err("unclosed '(' at end of line")
            } else {
                self.err("expected ',' or ')'")
            };
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Ok(()),
            Some(_) => self.err(format!(
                "unexpected trailing input '{}'",
                self.src.chars().skip(self.pos).collect::<String>()
            )),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let Some(name) = self.ident() else {
            return self.err("expected an assignment or a call");
        };
        if self.eat('=') {
            let value = self.expr()?;
            self.end()?;
            return Ok(Statement::Assign { name, value });
        }
        if self.eat('(') {
            let call = self.call_rest(name)?;
            self.end()?;
            return Ok(Statement::Expr { call });
        }
        self.err("expected '=' or '('")
    }
}

/// Parses a program; blank lines are skipped and `#` starts a full-line comment.
pub fn parse_policy(text: &str) -> Result<PolicyProgram, ParseError> {
    let mut statements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            statements.push(Statement::Comment {
                text: rest.trim_end().to_owned(),
            });
            continue;
        }
        statements.push(Cursor::new(raw, i + 1).statement()?);
    }
    Ok(PolicyProgram { statements })
}

fn write_str_lit(out: &mut impl Write, s: &str) -> fmt::Result {
    out.write_char('\'')?;
    for c in s.chars() {
        match c {
            '\'' => out.write_str("\\'")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            '\t' => out.write_str("\\t")?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('\'')
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Str { value } => write_str_lit(f, value),
            Expr::Number { value } => write!(f, "{value:?}"),
            Expr::Ident { name } => f.write_str(name),
            Expr::Call(c) => c.fmt(f),
        }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            a.fmt(f)?;
        }
        f.write_char(')')
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Comment { text } => write!(f, "#{text}"),
            Statement::Assign { name, value } => write!(f, "{name} = {value}"),
            Statement::Expr { call } => call.fmt(f),
        }
    }
}

/// Canonical layout: one statement per line, and a blank line before every
/// instruction header comment except the first statement.
impl fmt::Display for PolicyProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.statements.iter().enumerate() {
            if i > 0
                && matches!(s, Statement::Comment { text } if text.trim_start().starts_with("Instruction"))
            {
                f.write_char('\n')?;
            }
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn call(name: &str, args: Vec<Expr>) -> Call {
        Call {
            name: name.into(),
            args,
        }
    }

    #[test]
    fn assignment_from_perception_call() {
        let p = parse_policy("water_jug_pos = detect_referred_obj_pos('water jug')").unwrap();
        assert_eq!(
            p.statements,
            vec![Statement::Assign {
                name: "water_jug_pos".into(),
                value: Expr::Call(call(
                    "detect_referred_obj_pos",
                    vec![Expr::Str {
                        value: "water jug".into()
                    }]
                )),
            }]
        );
    }

    #[test]
    fn bare_call_statement() {
        let p = parse_policy("open_gripper()").unwrap();
        assert_eq!(
            p.statements,
            vec![Statement::Expr {
                call: call("open_gripper", vec![])
            }]
        );
    }

    #[test]
    fn dangling_paren_is_located() {
        let e = parse_policy("x = 1\npick_up(").unwrap_err();
        assert_eq!((e.line, e.column), (2, 9));
        assert!(e.message.contains("end of line"), "{e}");
    }

    #[test]
    fn whitespace_inside_a_line_is_insignificant() {
        let a = parse_policy("x=f( 'a' ,  2.5 ,g())").unwrap();
        let b = parse_policy("x = f('a', 2.5, g())").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_carry_positions() {
        for (src, col) in [
            ("x = ", 5),
            ("x = 'abc", 5),
            ("f(1 2)", 5),
            ("f() g()", 5),
            ("1 = x", 1),
            ("x == 1", 4),
        ] {
            let e = parse_policy(src).unwrap_err();
            assert_eq!(e.column, col, "{src}: {e}");
        }
    }

    #[test]
    fn escapes_and_numbers() {
        let p = parse_policy(r#"say("it's \"ok\"", -1.5e-3, .5)"#).unwrap();
        let Statement::Expr { call } = &p.statements[0] else {
            panic!()
        };
        assert_eq!(
            call.args[0],
            Expr::Str {
                value: "it's \"ok\"".into()
            }
        );
        assert_eq!(call.args[1], Expr::Number { value: -1.5e-3 });
        assert_eq!(call.args[2], Expr::Number { value: 0.5 });
        assert_eq!(parse_policy(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn calls_lists_nested_first() {
        let p = parse_policy("a = f(g(1), h())\nk(a)").unwrap();
        let names: Vec<_> = p.calls().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["g", "h", "f", "k"]);
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,8}"
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            "[ -~]{0,12}".prop_map(|value| Expr::Str { value }),
            (-1e6..1e6f64).prop_map(|value| Expr::Number { value }),
            ident().prop_map(|name| Expr::Ident { name }),
        ];
        leaf.prop_recursive(3, 12, 3, |inner| {
            (ident(), prop::collection::vec(inner, 0..3))
                .prop_map(|(name, args)| Expr::Call(Call { name, args }))
        })
    }

    fn statement() -> impl Strategy<Value = Statement> {
        prop_oneof![
            "[ -~]{0,20}".prop_map(|text| Statement::Comment {
                text: text.trim_end().to_owned()
            }),
            (ident(), expr()).prop_map(|(name, value)| Statement::Assign { name, value }),
            (ident(), prop::collection::vec(expr(), 0..3)).prop_map(|(name, args)| {
                Statement::Expr {
                    call: Call { name, args },
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(stmts in prop::collection::vec(statement(), 0..8)) {
            let p = PolicyProgram { statements: stmts };
            let printed = p.to_string();
            let back = parse_policy(&printed).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.to_string(), printed);
        }
    }
}
