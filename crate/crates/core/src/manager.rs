//! The runtime interchange manager.
//!
//! Each tick runs in two phases around the controller bank:
//!
//! 1. [`RiManager::begin_tick`] takes the input and decides, per policy,
//!    whether the policy can still avoid its trap locations. Groups whose
//!    policy cannot are suspended for the tick.
//! 2. [`RiManager::end_tick`] takes the group outputs, checks each against a
//!    lookahead step of its policy, releases one accepted output and commits
//!    the policy updates. Suspended policies keep their state unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{IoEvent, Signature, Trace, Valuation, ValuationError, Value};
use crate::vdta::{EvalError, Policy, StateSet, StepError, Stepped, VdtaState};

/// How one output is picked when several groups are valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Keep the previously selected group while it stays valid, otherwise
    /// take the lowest valid index.
    #[default]
    PreferLast,
    LowestIndex,
    /// Uniform choice from a seeded generator.
    SeededRandom(u64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManagerError {
    #[error("a manager needs at least one policy")]
    NoPolicies,
    #[error("policy `{policy}` declares different input/output channels than `{first}`")]
    SignatureMismatch { first: String, policy: String },
    #[error("fallback group {0} is out of range")]
    FallbackOutOfRange(usize),
    #[error("invalid input: {0}")]
    InvalidInput(ValuationError),
    #[error("group {group}: invalid output: {source}")]
    InvalidOutput { group: usize, source: ValuationError },
    #[error("{0}")]
    OutOfOrder(&'static str),
    #[error("expected outputs for {expected} groups, got {got}")]
    OutputCount { expected: usize, got: usize },
    #[error("group {group} produced an output while suspended")]
    MaskViolation { group: usize },
    #[error("tick {tick}: no group produced an output its policy accepts")]
    PolicyDeadlock { tick: u64 },
    #[error("policy `{policy}`: {source}")]
    Step { policy: String, source: StepError },
    #[error("policy `{policy}`: {source}")]
    Eval { policy: String, source: EvalError },
}

/// Everything decided during one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub tick: u64,
    pub event: IoEvent,
    pub selected: usize,
    pub mask: Vec<bool>,
    pub b_prime: Vec<bool>,
    pub group_outputs: Vec<Option<Valuation>>,
    /// The released output came from the configured fallback group because
    /// no group was valid.
    pub fallback_used: bool,
}

#[derive(Debug, Clone)]
struct Slot {
    policy: Policy,
    state: VdtaState,
    states: StateSet,
}

#[derive(Debug, Clone)]
struct Pending {
    input: Valuation,
    mask: Vec<bool>,
}

/// Anything that runs the controller groups for one tick. Suspended groups
/// must answer `None`.
pub trait GroupBank {
    fn execute(&mut self, input: &Valuation, mask: &[bool]) -> Vec<Option<Valuation>>;
}

impl<F: FnMut(&Valuation, &[bool]) -> Vec<Option<Valuation>>> GroupBank for F {
    fn execute(&mut self, input: &Valuation, mask: &[bool]) -> Vec<Option<Valuation>> {
        self(input, mask)
    }
}

#[derive(Debug, Clone)]
pub struct RiManager {
    signature: Signature,
    slots: Vec<Slot>,
    selection: SelectionPolicy,
    rng: ChaCha8Rng,
    fallback: Option<usize>,
    last_selected: Option<usize>,
    released: Trace,
    tick: u64,
    pending: Option<Pending>,
    array_lengths: Vec<Option<usize>>,
}

/// Error from [`run_word`] with the failing tick.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("tick {tick}: {source}")]
pub struct RunError {
    pub tick: usize,
    pub source: ManagerError,
}

impl RiManager {
    pub fn new(policies: Vec<Policy>, selection: SelectionPolicy) -> Result<Self, ManagerError> {
        let first = policies.first().ok_or(ManagerError::NoPolicies)?;
        let signature = first.vdta.signature.clone();
        for p in &policies[1..] {
            if p.vdta.signature != signature {
                return Err(ManagerError::SignatureMismatch { first: first.name().into(), policy: p.name().into() });
            }
        }
        let slots = policies
            .into_iter()
            .map(|policy| {
                let state = policy.vdta.initial_state();
                Slot { states: StateSet::singleton(state.clone()), state, policy }
            })
            .collect();
        let seed = match selection {
            SelectionPolicy::SeededRandom(s) => s,
            _ => 0,
        };
        Ok(RiManager {
            array_lengths: vec![None; signature.inputs.len()],
            signature,
            slots,
            selection,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fallback: None,
            last_selected: None,
            released: Trace::new(),
            tick: 0,
            pending: None,
        })
    }

    /// Designates a group whose output is released when no group is valid.
    /// Off by default; a deadlock is then an error.
    pub fn with_fallback(mut self, group: Option<usize>) -> Result<Self, ManagerError> {
        if let Some(g) = group {
            if g >= self.slots.len() {
                return Err(ManagerError::FallbackOutOfRange(g));
            }
        }
        self.fallback = group;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn policy(&self, i: usize) -> &Policy {
        &self.slots[i].policy
    }

    pub fn state(&self, i: usize) -> &VdtaState {
        &self.slots[i].state
    }

    pub fn state_set(&self, i: usize) -> &StateSet {
        &self.slots[i].states
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn released(&self) -> &Trace {
        &self.released
    }

    pub fn last_selected(&self) -> Option<usize> {
        self.last_selected
    }

    pub fn selection(&self) -> SelectionPolicy {
        self.selection
    }

    fn check_input(&mut self, input: &Valuation) -> Result<(), ManagerError> {
        input.validate(&self.signature.inputs).map_err(ManagerError::InvalidInput)?;
        for (i, v) in input.values().iter().enumerate() {
            if let Value::Array(a) = v {
                match self.array_lengths[i] {
                    Some(expected) if expected != a.len() => {
                        return Err(ManagerError::InvalidInput(ValuationError::ArrayLength {
                            channel: self.signature.inputs[i].name.clone(),
                            expected,
                            got: a.len(),
                        }));
                    }
                    _ => self.array_lengths[i] = Some(a.len()),
                }
            }
        }
        Ok(())
    }

    /// Input phase: computes the suspension mask for `input`.
    pub fn begin_tick(&mut self, input: Valuation) -> Result<Vec<bool>, ManagerError> {
        if self.pending.is_some() {
            return Err(ManagerError::OutOfOrder("begin_tick called twice without end_tick"));
        }
        self.check_input(&input)?;
        let mut mask = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let p = &slot.policy;
            let b = p
                .input
                .can_avoid_trap(&slot.states, &input, &p.traps)
                .map_err(|source| ManagerError::Eval { policy: p.name().into(), source })?;
            mask.push(b);
        }
        self.pending = Some(Pending { input, mask: mask.clone() });
        Ok(mask)
    }

    /// The mask computed by the pending `begin_tick`, if any.
    pub fn pending_mask(&self) -> Option<&[bool]> {
        self.pending.as_ref().map(|p| p.mask.as_slice())
    }

    pub fn pending_input(&self) -> Option<&Valuation> {
        self.pending.as_ref().map(|p| &p.input)
    }

    fn select(&mut self, valid: &[bool]) -> Option<usize> {
        let lowest = valid.iter().position(|&b| b);
        match self.selection {
            SelectionPolicy::LowestIndex => lowest,
            SelectionPolicy::PreferLast => match self.last_selected {
                Some(last) if valid[last] => Some(last),
                _ => lowest,
            },
            SelectionPolicy::SeededRandom(_) => {
                let count = valid.iter().filter(|&&b| b).count();
                if count == 0 {
                    return None;
                }
                let k = self.rng.gen_range(0..count);
                valid.iter().enumerate().filter(|(_, &b)| b).nth(k).map(|(i, _)| i)
            }
        }
    }

    /// Output phase: validates the group outputs, releases one and commits
    /// the policy updates. On error nothing is committed and the tick stays
    /// open.
    pub fn end_tick(&mut self, outputs: Vec<Option<Valuation>>) -> Result<TickOutcome, ManagerError> {
        let pending = self.pending.as_ref().ok_or(ManagerError::OutOfOrder("end_tick called without begin_tick"))?;
        if outputs.len() != self.slots.len() {
            return Err(ManagerError::OutputCount { expected: self.slots.len(), got: outputs.len() });
        }
        let mut lookahead: Vec<Option<Stepped>> = Vec::with_capacity(self.slots.len());
        let mut b_prime = Vec::with_capacity(self.slots.len());
        for (i, (slot, y)) in self.slots.iter().zip(&outputs).enumerate() {
            let Some(y) = y else {
                lookahead.push(None);
                b_prime.push(false);
                continue;
            };
            if !pending.mask[i] {
                return Err(ManagerError::MaskViolation { group: i });
            }
            y.validate(&self.signature.outputs).map_err(|source| ManagerError::InvalidOutput { group: i, source })?;
            let s = slot
                .policy
                .vdta
                .step_with(&slot.state, &pending.input, y)
                .map_err(|source| ManagerError::Step { policy: slot.policy.name().into(), source })?;
            b_prime.push(s.accepting);
            lookahead.push(Some(s));
        }

        let (selected, fallback_used) = match self.select(&b_prime) {
            Some(s) => (s, false),
            None => match self.fallback {
                Some(g) if outputs[g].is_some() => (g, true),
                _ => return Err(ManagerError::PolicyDeadlock { tick: self.tick }),
            },
        };

        let Pending { input, mask } = self.pending.take().expect("checked above");
        for (slot, step) in self.slots.iter_mut().zip(lookahead) {
            if let Some(s) = step {
                slot.states = StateSet::singleton(s.state.clone());
                slot.state = s.state;
            }
        }
        let event = IoEvent { input, output: outputs[selected].clone() };
        self.released.push(event.clone());
        let tick = self.tick;
        self.tick += 1;
        self.last_selected = Some(selected);
        Ok(TickOutcome { tick, event, selected, mask, b_prime, group_outputs: outputs, fallback_used })
    }

    /// Runs one full tick against a bank.
    pub fn step(&mut self, input: Valuation, bank: &mut impl GroupBank) -> Result<TickOutcome, ManagerError> {
        let mask = self.begin_tick(input)?;
        let input = &self.pending.as_ref().expect("begin_tick succeeded").input;
        let outputs = bank.execute(input, &mask);
        self.end_tick(outputs)
    }
}

/// Folds the manager over an input word, returning the released trace.
pub fn run_word(
    mgr: &mut RiManager,
    inputs: impl IntoIterator<Item = Valuation>,
    bank: &mut impl GroupBank,
) -> Result<Trace, RunError> {
    let mut out = Trace::new();
    for (tick, input) in inputs.into_iter().enumerate() {
        let outcome = mgr.step(input, bank).map_err(|source| RunError { tick, source })?;
        out.push(outcome.event);
    }
    Ok(out)
}
