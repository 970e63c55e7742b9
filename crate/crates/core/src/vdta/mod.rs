//! Valued discrete timed automata: elaboration, stepping, input projection
//! and trap analysis.

mod automaton;
pub mod dot;
pub mod expr;
mod input;
pub mod lint;

use std::sync::Arc;

use thiserror::Error;

pub use automaton::{
    classify, elaborate, AtomClass, ClockAtom, Clocks, ElaborateError, Location, StepError, Stepped, Transition, Vdta,
    VdtaState,
};
pub use expr::{BuiltinRegistry, EvalError};
pub use input::{can_avoid_trap, project_input, step_input, trap_locations, InputTransition, InputVdta, StateSet, TrapSet};

use crate::dsl::{self, DslError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Elaborate(#[from] ElaborateError),
}

/// An elaborated policy together with its input projection and trap set.
/// Cloning shares the immutable parts.
#[derive(Debug, Clone)]
pub struct Policy {
    pub vdta: Arc<Vdta>,
    pub input: Arc<InputVdta>,
    pub traps: Arc<TrapSet>,
}

impl Policy {
    pub fn new(vdta: Vdta) -> Self {
        let input = project_input(&vdta);
        let traps = trap_locations(&vdta);
        Policy { vdta: Arc::new(vdta), input: Arc::new(input), traps: Arc::new(traps) }
    }

    pub fn from_source(source: &str, builtins: &BuiltinRegistry) -> Result<Self, PolicyError> {
        let ast = dsl::parse_policy(source)?;
        Ok(Policy::new(elaborate(&ast, builtins)?))
    }

    pub fn name(&self) -> &str {
        &self.vdta.name
    }
}
