use super::{DslError, DslErrorKind, Pos};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Arrow,
    Minus,
    And,
    Cmp(super::ast::CmpOp),
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Minus => "`-`".into(),
            Tok::And => "`and`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, DslError> {
    use super::ast::CmpOp;

    let mut out = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let simple = |tok| Token { tok, pos };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            c if c.is_whitespace() => {
                bump!();
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let tok = if ident == "and" { Tok::And } else { Tok::Ident(ident) };
                out.push(simple(tok));
            }
            c if c.is_ascii_digit() => {
                let mut num = String::new();
                let mut seen_dot = false;
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        num.push(c);
                        bump!();
                    } else if c == '.' && !seen_dot {
                        seen_dot = true;
                        num.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                if num.ends_with('.') {
                    return Err(DslError::new(DslErrorKind::Lex(format!("malformed number `{num}`")), pos));
                }
                out.push(simple(Tok::Number(num)));
            }
            _ => {
                bump!();
                let next = chars.peek().copied();
                let (tok, eat_next) = match (c, next) {
                    ('{', _) => (Tok::LBrace, false),
                    ('}', _) => (Tok::RBrace, false),
                    ('(', _) => (Tok::LParen, false),
                    (')', _) => (Tok::RParen, false),
                    (',', _) => (Tok::Comma, false),
                    (':', _) => (Tok::Colon, false),
                    (';', _) => (Tok::Semi, false),
                    ('-', Some('>')) => (Tok::Arrow, true),
                    ('-', _) => (Tok::Minus, false),
                    ('→', _) => (Tok::Arrow, false),
                    ('∧', _) => (Tok::And, false),
                    ('&', Some('&')) => (Tok::And, true),
                    ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), true),
                    ('<', _) => (Tok::Cmp(CmpOp::Lt), false),
                    ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), true),
                    ('>', _) => (Tok::Cmp(CmpOp::Gt), false),
                    ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), true),
                    ('=', _) => (Tok::Cmp(CmpOp::Eq), false),
                    ('!', Some('=')) => (Tok::Cmp(CmpOp::Ne), true),
                    ('≤', _) => (Tok::Cmp(CmpOp::Le), false),
                    ('≥', _) => (Tok::Cmp(CmpOp::Ge), false),
                    ('≠', _) => (Tok::Cmp(CmpOp::Ne), false),
                    _ => {
                        return Err(DslError::new(DslErrorKind::Lex(format!("unexpected character {c:?}")), pos));
                    }
                };
                if eat_next {
                    bump!();
                }
                out.push(simple(tok));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::CmpOp;

    #[test]
    fn positions_and_operators() {
        let toks = tokenize("a <= 1.2 # note\n  x≥6 && b").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Cmp(CmpOp::Le),
                Tok::Number("1.2".into()),
                Tok::Ident("x".into()),
                Tok::Cmp(CmpOp::Ge),
                Tok::Number("6".into()),
                Tok::And,
                Tok::Ident("b".into()),
            ]
        );
        assert_eq!(toks[3].pos, Pos { line: 2, column: 3 });
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("a @ b").unwrap_err();
        assert!(matches!(err.kind, DslErrorKind::Lex(_)));
        assert_eq!(err.pos, Pos { line: 1, column: 3 });
        assert!(tokenize("1.").is_err());
    }
}
