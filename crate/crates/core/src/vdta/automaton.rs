use std::collections::HashMap;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use super::expr::{Atom, BuiltinRegistry, Env, EvalError, Expr};
use crate::dsl::ast::{rational_to_f64, Comparison, PolicyAst, Term};
use crate::dsl::CmpOp;
use crate::trace::{IoEvent, Signature, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElaborateError {
    #[error("transition {transition}: clock atom `{atom}` must have a single clock alone on its left side")]
    ClockAtomMalformed { transition: usize, atom: String },
    #[error("transition {transition}: unknown builtin `{name}`")]
    UnknownBuiltin { transition: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("location `{location}`: transitions {first} and {second} are both enabled")]
    NonDeterministic { location: String, first: usize, second: usize },
    #[error("location `{location}`: no transition is enabled")]
    Incomplete { location: String },
    #[error("cannot step on a ⊥ output")]
    BottomOutput,
    #[error("guard evaluation failed on transition {transition}: {source}")]
    Eval { transition: usize, source: EvalError },
}

/// Clock values, one per declared clock.
pub type Clocks = SmallVec<[u64; 2]>;

/// Runtime state `(l, χ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VdtaState {
    pub location: usize,
    pub clocks: Clocks,
}

#[derive(Debug, Clone)]
pub struct Location {
    pub name: String,
    pub accepting: bool,
}

/// `x ♯ e` where `e` mentions no clock.
#[derive(Debug, Clone)]
pub struct ClockAtom {
    pub clock: usize,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl ClockAtom {
    pub fn holds(&self, env: &Env<'_>) -> Result<bool, EvalError> {
        Ok(self.op.holds(env.clocks[self.clock] as f64, self.rhs.eval_scalar(env)?))
    }

    pub fn mentions_output(&self) -> bool {
        self.rhs.mentions_output()
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub guard_input: Vec<Atom>,
    pub guard_output: Vec<Atom>,
    pub guard_clock: Vec<ClockAtom>,
    pub resets: SmallVec<[usize; 2]>,
    /// Source text of the guard, for diagnostics.
    pub label: String,
}

impl Transition {
    /// Evaluates G^I, then G^X, then G^O, stopping at the first false atom.
    pub fn enabled(&self, env: &Env<'_>) -> Result<bool, EvalError> {
        for a in &self.guard_input {
            if !a.holds(env)? {
                return Ok(false);
            }
        }
        for a in &self.guard_clock {
            if !a.holds(env)? {
                return Ok(false);
            }
        }
        for a in &self.guard_output {
            if !a.holds(env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub(crate) fn apply_resets(&self, clocks: &mut [u64]) {
        for &r in &self.resets {
            clocks[r] = 0;
        }
    }
}

/// An elaborated automaton `(L, l0, F, X, I, O, Δ)`. Immutable once built.
#[derive(Debug, Clone)]
pub struct Vdta {
    pub name: String,
    pub signature: Signature,
    pub clocks: Vec<String>,
    pub locations: Vec<Location>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
    /// Transition indices leaving each location, in declaration order.
    pub outgoing: Vec<Vec<usize>>,
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepped {
    pub state: VdtaState,
    pub accepting: bool,
    pub transition: usize,
}

pub(crate) fn incremented(clocks: &[u64]) -> Clocks {
    clocks.iter().map(|c| c.saturating_add(1)).collect()
}

impl Vdta {
    pub fn initial_state(&self) -> VdtaState {
        VdtaState { location: self.initial, clocks: SmallVec::from_elem(0, self.clocks.len()) }
    }

    pub fn is_accepting(&self, location: usize) -> bool {
        self.locations[location].accepting
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn clock_index(&self, name: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c == name)
    }

    /// One step of the timed semantics: clocks advance, the unique enabled
    /// transition is taken and its resets applied.
    pub fn step(&self, state: &VdtaState, event: &IoEvent) -> Result<Stepped, StepError> {
        let output = event.output.as_ref().ok_or(StepError::BottomOutput)?;
        self.step_with(state, &event.input, output)
    }

    /// [`Vdta::step`] on borrowed input and output valuations.
    pub fn step_with(&self, state: &VdtaState, input: &Valuation, output: &Valuation) -> Result<Stepped, StepError> {
        let mut clocks = incremented(&state.clocks);
        let env = Env { input, output: Some(output), clocks: &clocks };
        let mut chosen: Option<usize> = None;
        for &t in &self.outgoing[state.location] {
            let enabled =
                self.transitions[t].enabled(&env).map_err(|source| StepError::Eval { transition: t, source })?;
            if enabled {
                if let Some(first) = chosen {
                    return Err(StepError::NonDeterministic {
                        location: self.locations[state.location].name.clone(),
                        first,
                        second: t,
                    });
                }
                chosen = Some(t);
            }
        }
        let t = chosen.ok_or_else(|| StepError::Incomplete { location: self.locations[state.location].name.clone() })?;
        let tr = &self.transitions[t];
        tr.apply_resets(&mut clocks);
        Ok(Stepped { state: VdtaState { location: tr.to, clocks }, accepting: self.is_accepting(tr.to), transition: t })
    }

    /// The implicit self-loop on a suspended tick: the state is frozen.
    pub fn step_suspended(&self, state: &VdtaState) -> VdtaState {
        state.clone()
    }

    /// Replays an event sequence from the initial state, returning the
    /// final state and whether it is accepting. The empty word is accepted
    /// iff the initial location is.
    pub fn run(&self, events: &[IoEvent]) -> Result<(VdtaState, bool), StepError> {
        let mut state = self.initial_state();
        let mut accepting = self.is_accepting(state.location);
        for e in events {
            let s = self.step(&state, e)?;
            state = s.state;
            accepting = s.accepting;
        }
        Ok((state, accepting))
    }
}

struct Resolver<'a> {
    inputs: HashMap<&'a str, usize>,
    outputs: HashMap<&'a str, usize>,
    clocks: HashMap<&'a str, usize>,
    builtins: &'a BuiltinRegistry,
    transition: usize,
}

impl Resolver<'_> {
    fn term(&self, t: &Term) -> Result<Expr, ElaborateError> {
        Ok(match t {
            Term::Const(r) => Expr::Const(rational_to_f64(r)),
            Term::ChannelRef(n) => match self.inputs.get(n.as_str()) {
                Some(&i) => Expr::Input(i),
                None => Expr::Output(self.outputs[n.as_str()]),
            },
            Term::ClockRef(n) => Expr::Clock(self.clocks[n.as_str()]),
            Term::FnCall { name, args } => {
                let f = self
                    .builtins
                    .get(name)
                    .ok_or_else(|| ElaborateError::UnknownBuiltin { transition: self.transition, name: name.clone() })?;
                Expr::Call(Arc::clone(f), args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?)
            }
            Term::Neg(inner) => Expr::Neg(Box::new(self.term(inner)?)),
        })
    }
}

fn mentions_clock(t: &Term) -> bool {
    let mut found = false;
    t.visit(&mut |t| found |= matches!(t, Term::ClockRef(_)));
    found
}

/// Which part of a guard a comparison belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomClass {
    Input,
    Output,
    Clock,
}

/// Classifies an atom: any clock makes it a clock atom, otherwise any output
/// channel makes it an output atom.
pub fn classify(c: &Comparison, outputs: &[&str]) -> AtomClass {
    if mentions_clock(&c.lhs) || mentions_clock(&c.rhs) {
        return AtomClass::Clock;
    }
    let mut out = false;
    let mut check = |t: &Term| out |= matches!(t, Term::ChannelRef(n) if outputs.contains(&n.as_str()));
    c.lhs.visit(&mut check);
    c.rhs.visit(&mut check);
    if out {
        AtomClass::Output
    } else {
        AtomClass::Input
    }
}

fn index(names: Vec<&str>) -> HashMap<&str, usize> {
    names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
}

/// Builds the automaton from a validated AST, numbering locations, clocks
/// and channels in declaration order.
pub fn elaborate(ast: &PolicyAst, builtins: &BuiltinRegistry) -> Result<Vdta, ElaborateError> {
    let loc_index = index(ast.locations.iter().map(|l| l.name.as_str()).collect());
    let output_names: Vec<&str> = ast.outputs.iter().map(|c| c.name.as_str()).collect();
    let mut resolver = Resolver {
        inputs: index(ast.inputs.iter().map(|c| c.name.as_str()).collect()),
        outputs: index(output_names.clone()),
        clocks: index(ast.clocks.iter().map(String::as_str).collect()),
        builtins,
        transition: 0,
    };

    let mut transitions = Vec::with_capacity(ast.transitions.len());
    let mut outgoing = vec![Vec::new(); ast.locations.len()];
    for (ti, t) in ast.transitions.iter().enumerate() {
        resolver.transition = ti;
        let mut tr = Transition {
            from: loc_index[t.from.as_str()],
            to: loc_index[t.to.as_str()],
            guard_input: Vec::new(),
            guard_output: Vec::new(),
            guard_clock: Vec::new(),
            resets: t.resets.iter().map(|r| resolver.clocks[r.as_str()]).collect(),
            label: t.guard.to_string(),
        };
        for c in t.guard.atoms() {
            match classify(c, &output_names) {
                AtomClass::Clock => {
                    let clock = match &c.lhs {
                        Term::ClockRef(n) if !mentions_clock(&c.rhs) => resolver.clocks[n.as_str()],
                        _ => {
                            return Err(ElaborateError::ClockAtomMalformed { transition: ti, atom: c.to_string() });
                        }
                    };
                    tr.guard_clock.push(ClockAtom { clock, op: c.op, rhs: resolver.term(&c.rhs)? });
                }
                class => {
                    let atom = Atom { lhs: resolver.term(&c.lhs)?, op: c.op, rhs: resolver.term(&c.rhs)? };
                    if class == AtomClass::Output {
                        tr.guard_output.push(atom);
                    } else {
                        tr.guard_input.push(atom);
                    }
                }
            }
        }
        outgoing[tr.from].push(ti);
        transitions.push(tr);
    }

    Ok(Vdta {
        name: ast.name.clone(),
        signature: Signature { inputs: ast.inputs.clone(), outputs: ast.outputs.clone() },
        clocks: ast.clocks.clone(),
        locations: ast.locations.iter().map(|l| Location { name: l.name.clone(), accepting: l.accepting }).collect(),
        initial: ast.locations.iter().position(|l| l.initial).expect("validated AST has an initial location"),
        transitions,
        outgoing,
    })
}
