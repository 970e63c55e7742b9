use std::collections::{HashMap, HashSet};

use super::ast::{CmpOp, Comparison, GuardExpr, LocationAst, PolicyAst, Rational, Term, TransitionAst};
use super::lexer::{tokenize, Tok, Token};
use super::{DslError, DslErrorKind, Pos};
use crate::trace::{ChannelDecl, ChannelKind};

const KEYWORDS: &[&str] = &[
    "policy", "inputs", "outputs", "clocks", "locations", "transition", "when", "reset", "true", "scalar", "array",
    "initial", "accepting", "and",
];

/// Term before identifier resolution.
#[derive(Debug)]
enum RawTerm {
    Const(Rational),
    Ident(String, Pos),
    Call(String, Vec<RawTerm>),
    Neg(Box<RawTerm>),
}

#[derive(Debug)]
enum RawGuard {
    Conj(Vec<RawGuard>),
    Cmp(RawTerm, CmpOp, RawTerm),
}

#[derive(Debug)]
struct RawTransition {
    from: (String, Pos),
    to: (String, Pos),
    guard: RawGuard,
    resets: Vec<(String, Pos)>,
}

#[derive(Default)]
struct RawPolicy {
    name: String,
    name_pos: Pos,
    inputs: Vec<(ChannelDecl, Pos)>,
    outputs: Vec<(ChannelDecl, Pos)>,
    clocks: Vec<(String, Pos)>,
    locations: Vec<(LocationAst, Pos)>,
    transitions: Vec<RawTransition>,
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    eof: Pos,
}

pub(crate) fn parse(source: &str) -> Result<PolicyAst, DslError> {
    let tokens = tokenize(source)?;
    let eof = eof_pos(source);
    let mut parser = Parser { tokens, at: 0, eof };
    let raw = parser.policy()?;
    resolve(raw)
}

fn eof_pos(source: &str) -> Pos {
    let line = source.matches('\n').count() + 1;
    let column = source.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Pos { line, column }
}

fn syntax(msg: impl Into<String>, pos: Pos) -> DslError {
    DslError::new(DslErrorKind::Syntax(msg.into()), pos)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map_or(self.eof, |t| t.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        match self.tokens.get(self.at) {
            Some(t) => syntax(format!("expected {wanted}, found {}", t.tok.describe()), t.pos),
            None => syntax(format!("expected {wanted}, found end of input"), self.eof),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Pos, DslError> {
        if self.peek() == Some(&tok) {
            Ok(self.next().map(|t| t.pos).unwrap_or(self.eof))
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, DslError> {
        if self.is_keyword(kw) {
            Ok(self.next().map(|t| t.pos).unwrap_or(self.eof))
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A user identifier (not a reserved word).
    fn name(&mut self, what: &str) -> Result<(String, Pos), DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.next().expect("peeked");
                match t.tok {
                    Tok::Ident(s) => Ok((s, t.pos)),
                    _ => unreachable!(),
                }
            }
            Some(Tok::Ident(s)) => Err(syntax(format!("`{s}` is a reserved word and cannot name {what}"), self.pos())),
            _ => Err(self.unexpected(what)),
        }
    }

    fn skip_separator(&mut self) {
        if matches!(self.peek(), Some(Tok::Comma | Tok::Semi)) {
            self.at += 1;
        }
    }

    fn policy(&mut self) -> Result<RawPolicy, DslError> {
        self.keyword("policy")?;
        let (name, name_pos) = self.name("a policy")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut raw = RawPolicy { name, name_pos, ..Default::default() };
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.at += 1;
                    break;
                }
                Some(Tok::Semi) => self.at += 1,
                Some(Tok::Ident(s)) => match s.as_str() {
                    "inputs" => {
                        self.at += 1;
                        let decls = self.channel_block()?;
                        raw.inputs.extend(decls);
                    }
                    "outputs" => {
                        self.at += 1;
                        let decls = self.channel_block()?;
                        raw.outputs.extend(decls);
                    }
                    "clocks" => {
                        self.at += 1;
                        let names = self.name_block("a clock")?;
                        raw.clocks.extend(names);
                    }
                    "locations" => {
                        self.at += 1;
                        let locs = self.location_block()?;
                        raw.locations.extend(locs);
                    }
                    "transition" => {
                        self.at += 1;
                        let t = self.transition()?;
                        raw.transitions.push(t);
                    }
                    _ => return Err(self.unexpected("a section (`inputs`, `outputs`, `clocks`, `locations`, `transition`) or `}`")),
                },
                _ => return Err(self.unexpected("a section or `}`")),
            }
        }
        if self.at < self.tokens.len() {
            return Err(self.unexpected("end of input"));
        }
        Ok(raw)
    }

    fn channel_block(&mut self) -> Result<Vec<(ChannelDecl, Pos)>, DslError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            let (name, pos) = self.name("a channel")?;
            self.expect(Tok::Colon, "`:`")?;
            let kind = if self.is_keyword("scalar") {
                ChannelKind::Scalar
            } else if self.is_keyword("array") {
                ChannelKind::Array
            } else {
                return Err(self.unexpected("`scalar` or `array`"));
            };
            self.at += 1;
            out.push((ChannelDecl { name, kind }, pos));
            self.skip_separator();
        }
        self.at += 1;
        Ok(out)
    }

    fn name_block(&mut self, what: &str) -> Result<Vec<(String, Pos)>, DslError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            out.push(self.name(what)?);
            self.skip_separator();
        }
        self.at += 1;
        Ok(out)
    }

    fn location_block(&mut self) -> Result<Vec<(LocationAst, Pos)>, DslError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            let (name, pos) = self.name("a location")?;
            let mut loc = LocationAst { name, accepting: false, initial: false };
            if self.peek() == Some(&Tok::Colon) {
                self.at += 1;
                let mut any = false;
                loop {
                    if self.is_keyword("initial") {
                        loc.initial = true;
                    } else if self.is_keyword("accepting") {
                        loc.accepting = true;
                    } else {
                        break;
                    }
                    any = true;
                    self.at += 1;
                }
                if !any {
                    return Err(self.unexpected("`initial` or `accepting`"));
                }
            }
            out.push((loc, pos));
            self.skip_separator();
        }
        self.at += 1;
        Ok(out)
    }

    fn transition(&mut self) -> Result<RawTransition, DslError> {
        let from = self.name("a location")?;
        self.expect(Tok::Arrow, "`->`")?;
        let to = self.name("a location")?;
        let guard = if self.is_keyword("when") {
            self.at += 1;
            self.guard()?
        } else {
            RawGuard::Conj(Vec::new())
        };
        let resets = if self.is_keyword("reset") {
            self.at += 1;
            self.name_block("a clock")?
        } else {
            Vec::new()
        };
        if self.peek() == Some(&Tok::Semi) {
            self.at += 1;
        }
        Ok(RawTransition { from, to, guard, resets })
    }

    fn guard(&mut self) -> Result<RawGuard, DslError> {
        let first = self.guard_primary()?;
        if self.peek() != Some(&Tok::And) {
            return Ok(first);
        }
        let mut children = vec![first];
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            children.push(self.guard_primary()?);
        }
        Ok(RawGuard::Conj(children))
    }

    fn guard_primary(&mut self) -> Result<RawGuard, DslError> {
        if self.is_keyword("true") {
            self.at += 1;
            return Ok(RawGuard::Conj(Vec::new()));
        }
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let inner = self.guard()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        let lhs = self.term()?;
        let op = match self.peek() {
            Some(Tok::Cmp(op)) => *op,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.at += 1;
        let rhs = self.term()?;
        Ok(RawGuard::Cmp(lhs, op, rhs))
    }

    fn term(&mut self) -> Result<RawTerm, DslError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.at += 1;
                if let Some(Tok::Number(_)) = self.peek() {
                    let RawTerm::Const(r) = self.term()? else { unreachable!() };
                    Ok(RawTerm::Const(-r))
                } else {
                    Ok(RawTerm::Neg(Box::new(self.term()?)))
                }
            }
            Some(Tok::Number(text)) => {
                let text = text.clone();
                let pos = self.pos();
                self.at += 1;
                Ok(RawTerm::Const(parse_decimal(&text, pos)?))
            }
            Some(Tok::Ident(_)) => {
                let (name, pos) = self.name("a channel, clock or function")?;
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(RawTerm::Ident(name, pos));
                }
                self.at += 1;
                let mut args = Vec::new();
                if self.peek() != Some(&Tok::RParen) {
                    loop {
                        args.push(self.term()?);
                        if self.peek() == Some(&Tok::Comma) {
                            self.at += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`)` or `,`")?;
                Ok(RawTerm::Call(name, args))
            }
            _ => Err(self.unexpected("a term")),
        }
    }
}

fn parse_decimal(text: &str, pos: Pos) -> Result<Rational, DslError> {
    let too_long = || DslError::new(DslErrorKind::Lex(format!("numeric literal `{text}` out of range")), pos);
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int}{frac}");
    let numer: i64 = digits.parse().map_err(|_| too_long())?;
    let denom = 10i64.checked_pow(frac.len() as u32).ok_or_else(too_long)?;
    Ok(Rational::new(numer, denom))
}

struct Scope {
    channels: HashMap<String, bool>,
    clocks: HashSet<String>,
    locations: HashSet<String>,
}

fn undeclared(name: &str, pos: Pos) -> DslError {
    DslError::new(DslErrorKind::UndeclaredIdentifier(name.to_string()), pos)
}

fn resolve(raw: RawPolicy) -> Result<PolicyAst, DslError> {
    let mut seen: HashSet<&str> = HashSet::new();
    let declared = raw
        .inputs
        .iter()
        .map(|(c, p)| (c.name.as_str(), *p))
        .chain(raw.outputs.iter().map(|(c, p)| (c.name.as_str(), *p)))
        .chain(raw.clocks.iter().map(|(c, p)| (c.as_str(), *p)));
    for (name, pos) in declared {
        if !seen.insert(name) {
            return Err(DslError::new(DslErrorKind::DuplicateDeclaration(name.to_string()), pos));
        }
    }
    let mut loc_names = HashSet::new();
    for (loc, pos) in &raw.locations {
        if !loc_names.insert(loc.name.clone()) {
            return Err(DslError::new(DslErrorKind::DuplicateDeclaration(loc.name.clone()), *pos));
        }
    }

    let mut initial = raw.locations.iter().filter(|(l, _)| l.initial);
    if initial.next().is_none() {
        return Err(DslError::new(DslErrorKind::NoInitialLocation, raw.name_pos));
    }
    if let Some((_, pos)) = initial.next() {
        return Err(DslError::new(DslErrorKind::MultipleInitialLocations, *pos));
    }
    if !raw.locations.iter().any(|(l, _)| l.accepting) {
        return Err(DslError::new(DslErrorKind::NoAcceptingLocation, raw.name_pos));
    }

    let scope = Scope {
        channels: raw
            .inputs
            .iter()
            .map(|(c, _)| (c.name.clone(), false))
            .chain(raw.outputs.iter().map(|(c, _)| (c.name.clone(), true)))
            .collect(),
        clocks: raw.clocks.iter().map(|(c, _)| c.clone()).collect(),
        locations: loc_names,
    };

    let mut transitions = Vec::with_capacity(raw.transitions.len());
    for t in raw.transitions {
        for (loc, pos) in [&t.from, &t.to] {
            if !scope.locations.contains(loc) {
                return Err(undeclared(loc, *pos));
            }
        }
        let mut resets: Vec<String> = Vec::new();
        for (clock, pos) in t.resets {
            if !scope.clocks.contains(&clock) {
                return Err(undeclared(&clock, pos));
            }
            if !resets.contains(&clock) {
                resets.push(clock);
            }
        }
        transitions.push(TransitionAst { from: t.from.0, to: t.to.0, guard: resolve_guard(t.guard, &scope)?, resets });
    }

    Ok(PolicyAst {
        name: raw.name,
        inputs: raw.inputs.into_iter().map(|(c, _)| c).collect(),
        outputs: raw.outputs.into_iter().map(|(c, _)| c).collect(),
        clocks: raw.clocks.into_iter().map(|(c, _)| c).collect(),
        locations: raw.locations.into_iter().map(|(l, _)| l).collect(),
        transitions,
    })
}

fn resolve_guard(g: RawGuard, scope: &Scope) -> Result<GuardExpr, DslError> {
    Ok(match g {
        RawGuard::Conj(children) => {
            GuardExpr::Conjunction(children.into_iter().map(|c| resolve_guard(c, scope)).collect::<Result<_, _>>()?)
        }
        RawGuard::Cmp(lhs, op, rhs) => {
            GuardExpr::Comparison(Comparison { lhs: resolve_term(lhs, scope)?, op, rhs: resolve_term(rhs, scope)? })
        }
    })
}

fn resolve_term(t: RawTerm, scope: &Scope) -> Result<Term, DslError> {
    Ok(match t {
        RawTerm::Const(r) => Term::Const(r),
        RawTerm::Ident(name, pos) => {
            if scope.clocks.contains(&name) {
                Term::ClockRef(name)
            } else if scope.channels.contains_key(&name) {
                Term::ChannelRef(name)
            } else {
                return Err(undeclared(&name, pos));
            }
        }
        RawTerm::Call(name, args) => {
            Term::FnCall { name, args: args.into_iter().map(|a| resolve_term(a, scope)).collect::<Result<_, _>>()? }
        }
        RawTerm::Neg(inner) => Term::Neg(Box::new(resolve_term(*inner, scope)?)),
    })
}
