//! Input projection, state-set tracking and trap detection.

use std::collections::VecDeque;

use smallvec::{smallvec, SmallVec};

use super::automaton::{incremented, ClockAtom, Transition, Vdta, VdtaState};
use super::expr::{Atom, Env, EvalError};
use crate::trace::Valuation;

/// A transition of the input automaton: output atoms and output-dependent
/// clock atoms removed.
#[derive(Debug, Clone)]
pub struct InputTransition {
    pub from: usize,
    pub to: usize,
    pub guard_input: Vec<Atom>,
    pub guard_clock: Vec<ClockAtom>,
    pub resets: SmallVec<[usize; 2]>,
}

impl InputTransition {
    fn enabled(&self, env: &Env<'_>) -> Result<bool, EvalError> {
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
        Ok(true)
    }
}

/// Same locations and transition indices as the source automaton; may be
/// non-deterministic.
#[derive(Debug, Clone)]
pub struct InputVdta {
    pub accepting: Vec<bool>,
    pub initial: usize,
    pub clock_count: usize,
    pub transitions: Vec<InputTransition>,
    pub outgoing: Vec<Vec<usize>>,
}

pub fn project_input(vdta: &Vdta) -> InputVdta {
    let project = |t: &Transition| InputTransition {
        from: t.from,
        to: t.to,
        guard_input: t.guard_input.clone(),
        guard_clock: t.guard_clock.iter().filter(|a| !a.mentions_output()).cloned().collect(),
        resets: t.resets.clone(),
    };
    InputVdta {
        accepting: vdta.locations.iter().map(|l| l.accepting).collect(),
        initial: vdta.initial,
        clock_count: vdta.clocks.len(),
        transitions: vdta.transitions.iter().map(project).collect(),
        outgoing: vdta.outgoing.clone(),
    }
}

/// Set of possible states of an input automaton. Kept free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet(SmallVec<[VdtaState; 1]>);

impl StateSet {
    pub fn singleton(state: VdtaState) -> Self {
        StateSet(smallvec![state])
    }

    pub fn empty() -> Self {
        StateSet(SmallVec::new())
    }

    pub fn insert(&mut self, state: VdtaState) {
        if !self.0.contains(&state) {
            self.0.push(state);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VdtaState> {
        self.0.iter()
    }

    pub fn contains(&self, state: &VdtaState) -> bool {
        self.0.contains(state)
    }
}

impl FromIterator<VdtaState> for StateSet {
    fn from_iter<T: IntoIterator<Item = VdtaState>>(iter: T) -> Self {
        let mut set = StateSet::empty();
        iter.into_iter().for_each(|s| set.insert(s));
        set
    }
}

impl InputVdta {
    /// Calls `visit` with every successor of every member under every
    /// enabled projected transition until it returns `true`. Returns whether
    /// the visit stopped early.
    fn for_each_successor(
        &self,
        states: &StateSet,
        input: &Valuation,
        mut visit: impl FnMut(VdtaState) -> bool,
    ) -> Result<bool, EvalError> {
        for s in states.iter() {
            let clocks = incremented(&s.clocks);
            let env = Env { input, output: None, clocks: &clocks };
            for &t in &self.outgoing[s.location] {
                let tr = &self.transitions[t];
                if tr.enabled(&env)? {
                    let mut next = clocks.clone();
                    for &r in &tr.resets {
                        next[r] = 0;
                    }
                    if visit(VdtaState { location: tr.to, clocks: next }) {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    /// All successors of `states` on `input`; empty when nothing is enabled.
    pub fn step_input(&self, states: &StateSet, input: &Valuation) -> Result<StateSet, EvalError> {
        let mut out = StateSet::empty();
        self.for_each_successor(states, input, |s| {
            out.insert(s);
            false
        })?;
        Ok(out)
    }

    /// Whether some successor of `states` on `input` lies outside `traps`.
    pub fn can_avoid_trap(&self, states: &StateSet, input: &Valuation, traps: &TrapSet) -> Result<bool, EvalError> {
        self.for_each_successor(states, input, |s| !traps.contains(s.location))
    }
}

/// Free-function form of [`InputVdta::step_input`].
pub fn step_input(ivdta: &InputVdta, states: &StateSet, input: &Valuation) -> Result<StateSet, EvalError> {
    ivdta.step_input(states, input)
}

/// Free-function form of [`InputVdta::can_avoid_trap`].
pub fn can_avoid_trap(ivdta: &InputVdta, states: &StateSet, input: &Valuation, traps: &TrapSet) -> Result<bool, EvalError> {
    ivdta.can_avoid_trap(states, input, traps)
}

/// Locations from which no accepting location is reachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrapSet {
    mask: Vec<bool>,
}

impl TrapSet {
    pub fn contains(&self, location: usize) -> bool {
        self.mask.get(location).copied().unwrap_or(false)
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&t| t)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &t)| t).map(|(i, _)| i)
    }
}

/// Backward reachability from the accepting set over the transition graph,
/// ignoring guards.
pub fn trap_locations(vdta: &Vdta) -> TrapSet {
    let n = vdta.locations.len();
    let mut predecessors = vec![Vec::new(); n];
    for t in &vdta.transitions {
        predecessors[t.to].push(t.from);
    }
    let mut live = vec![false; n];
    let mut queue = VecDeque::new();
    for (i, l) in vdta.locations.iter().enumerate() {
        if l.accepting {
            live[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(l) = queue.pop_front() {
        for &p in &predecessors[l] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    TrapSet { mask: live.into_iter().map(|l| !l).collect() }
}
