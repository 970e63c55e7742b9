//! Textual policy language.
//!
//! A policy file declares its channels, clocks and locations, followed by
//! transitions whose guards are conjunctions of comparisons. See `docs/dsl.md`
//! for the grammar.

pub mod ast;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::{CmpOp, Comparison, GuardExpr, LocationAst, PolicyAst, Rational, Term, TransitionAst};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslErrorKind {
    #[error("lexical error: {0}")]
    Lex(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undeclared identifier `{0}`")]
    UndeclaredIdentifier(String),
    #[error("`{0}` is declared more than once")]
    DuplicateDeclaration(String),
    #[error("more than one initial location")]
    MultipleInitialLocations,
    #[error("no initial location")]
    NoInitialLocation,
    #[error("no accepting location")]
    NoAcceptingLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct DslError {
    pub kind: DslErrorKind,
    pub pos: Pos,
}

impl DslError {
    pub fn new(kind: DslErrorKind, pos: Pos) -> Self {
        DslError { kind, pos }
    }
}

/// Parses and validates a policy.
pub fn parse_policy(source: &str) -> Result<PolicyAst, DslError> {
    parser::parse(source)
}

/// Like [`parse_policy`] but accepts raw bytes, reporting invalid UTF-8 as a
/// lexical error at the offending position.
pub fn parse_policy_bytes(source: &[u8]) -> Result<PolicyAst, DslError> {
    match std::str::from_utf8(source) {
        Ok(text) => parse_policy(text),
        Err(e) => {
            let valid = std::str::from_utf8(&source[..e.valid_up_to()]).unwrap_or_default();
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(DslError::new(DslErrorKind::Lex("invalid UTF-8".into()), Pos { line, column }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NORMAL: &str = "
policy normal {
  inputs { R: array, v: scalar }
  outputs { d: scalar, a: scalar }
  clocks { x }
  locations { l_drive: initial accepting, l_warn }
  transition l_drive -> l_drive when min_front(R) > 1.2
  transition l_drive -> l_warn when min_front(R) <= 1.2 reset { x }
  transition l_warn -> l_warn when min_front(R) <= 1.2 reset { x }
  transition l_warn -> l_warn when min_front(R) > 1.2 and x < 6
  transition l_warn -> l_drive when min_front(R) > 1.2 and x >= 6
}
";

    #[test]
    fn parses_hysteresis_policy() {
        let ast = parse_policy(NORMAL).unwrap();
        assert_eq!(ast.locations.len(), 2);
        assert_eq!(ast.clocks, vec!["x"]);
        assert_eq!(ast.transitions.len(), 5);
        assert!(ast.locations[0].initial && ast.locations[0].accepting);
        assert_eq!(ast.transitions[1].resets, vec!["x"]);
        let g = &ast.transitions[4].guard;
        assert_eq!(g.atoms().len(), 2);
        assert_eq!(g.to_string(), "min_front(R) > 1.2 and x >= 6");
    }

    #[test]
    fn minimal_policy() {
        let ast = parse_policy("policy p { locations { l: initial accepting } transition l -> l }").unwrap();
        assert_eq!(ast.locations.len(), 1);
        assert_eq!(ast.transitions.len(), 1);
        assert_eq!(ast.transitions[0].guard, GuardExpr::always());
    }

    #[test]
    fn undeclared_clock_is_reported_with_position() {
        let src = "policy p {\n  clocks { x }\n  locations { l: initial accepting }\n  transition l -> l when y < 3\n}";
        let err = parse_policy(src).unwrap_err();
        assert_eq!(err.kind, DslErrorKind::UndeclaredIdentifier("y".into()));
        assert_eq!(err.pos, Pos { line: 4, column: 26 });

        let src = "policy p { clocks { x } locations { l: initial accepting } transition l -> l reset { y } }";
        assert_eq!(parse_policy(src).unwrap_err().kind, DslErrorKind::UndeclaredIdentifier("y".into()));
    }

    #[test]
    fn location_validation() {
        let two = "policy p { locations { a: initial accepting, b: initial } }";
        assert_eq!(parse_policy(two).unwrap_err().kind, DslErrorKind::MultipleInitialLocations);
        let none = "policy p { locations { a: accepting } }";
        assert_eq!(parse_policy(none).unwrap_err().kind, DslErrorKind::NoInitialLocation);
        let rejecting = "policy p { locations { a: initial } }";
        assert_eq!(parse_policy(rejecting).unwrap_err().kind, DslErrorKind::NoAcceptingLocation);
        let dup = "policy p { inputs { a: scalar } clocks { a } locations { l: initial accepting } }";
        assert_eq!(parse_policy(dup).unwrap_err().kind, DslErrorKind::DuplicateDeclaration("a".into()));
        let bad_edge = "policy p { locations { l: initial accepting } transition l -> m }";
        assert_eq!(parse_policy(bad_edge).unwrap_err().kind, DslErrorKind::UndeclaredIdentifier("m".into()));
    }

    #[test]
    fn syntax_errors() {
        for src in [
            "",
            "policy",
            "policy p {",
            "policy p { locations { l: initial accepting } transition l -> l when } ",
            "policy p { locations { l: initial accepting } transition l -> l when x } ",
            "policy p { inputs { a: float } }",
            "policy p { locations { l: initial accepting } } extra",
            "policy when { }",
        ] {
            let err = parse_policy(src).unwrap_err();
            assert!(matches!(err.kind, DslErrorKind::Syntax(_)), "{src:?}: {err}");
        }
    }

    #[test]
    fn unicode_operators_and_negation() {
        let src = "policy p {
  inputs { R: array, v: scalar }
  outputs { a: scalar }
  locations { l: initial accepting }
  transition l → l when a ≤ -kin(min_front(R), v) ∧ v ≥ -0.5
}";
        let ast = parse_policy(src).unwrap();
        let atoms = ast.transitions[0].guard.atoms();
        assert_eq!(atoms[0].to_string(), "a <= -kin(min_front(R), v)");
        assert_eq!(atoms[1].rhs, Term::Const(Rational::new(-1, 2)));
    }

    #[test]
    fn invalid_utf8() {
        let err = parse_policy_bytes(b"policy p {\n \xff }").unwrap_err();
        assert!(matches!(err.kind, DslErrorKind::Lex(_)));
        assert_eq!(err.pos, Pos { line: 2, column: 2 });
    }

    #[test]
    fn display_round_trips() {
        let ast = parse_policy(NORMAL).unwrap();
        assert_eq!(parse_policy(&ast.to_string()).unwrap(), ast);
    }
}
