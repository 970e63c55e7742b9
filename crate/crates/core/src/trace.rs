//! Channel valuations, input/output events and append-only traces.
//!
//! A [`Valuation`] assigns one [`Value`] to every channel of a declaration
//! list, in declaration order. An [`IoEvent`] pairs an input valuation with
//! either a complete output valuation or the `⊥` sentinel (`None`), which
//! marks the output of a suspended controller group.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Scalar,
    Array,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Scalar => f.write_str("scalar"),
            ChannelKind::Array => f.write_str("array"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelDecl {
    pub name: String,
    pub kind: ChannelKind,
}

impl ChannelDecl {
    pub fn scalar(name: impl Into<String>) -> Self {
        ChannelDecl { name: name.into(), kind: ChannelKind::Scalar }
    }

    pub fn array(name: impl Into<String>) -> Self {
        ChannelDecl { name: name.into(), kind: ChannelKind::Array }
    }
}

/// Input and output channel declarations shared by a policy set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub inputs: Vec<ChannelDecl>,
    pub outputs: Vec<ChannelDecl>,
}

impl Signature {
    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|c| c.name == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Array(Arc<[f64]>),
}

impl Value {
    pub fn kind(&self) -> ChannelKind {
        match self {
            Value::Scalar(_) => ChannelKind::Scalar,
            Value::Array(_) => ChannelKind::Array,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            Value::Array(_) => None,
        }
    }

    pub fn as_array(&self) -> Option<&[f64]> {
        match self {
            Value::Array(v) => Some(v),
            Value::Scalar(_) => None,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Scalar(v) => v.is_finite(),
            Value::Array(vs) => vs.iter().all(|v| v.is_finite()),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Scalar(v)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Array(v.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValuationError {
    #[error("expected {expected} channels, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("channel `{channel}` expects a {expected} value")]
    Kind { channel: String, expected: ChannelKind },
    #[error("channel `{channel}` carries a non-finite value")]
    NonFinite { channel: String },
    #[error("array channel `{channel}` changed length from {expected} to {got}")]
    ArrayLength { channel: String, expected: usize, got: usize },
}

/// A complete assignment of values to a channel list, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation(Vec<Value>);

impl Valuation {
    pub fn new(values: Vec<Value>) -> Self {
        Valuation(values)
    }

    pub fn scalars(values: &[f64]) -> Self {
        Valuation(values.iter().map(|&v| Value::Scalar(v)).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.0.get(index)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that every declared channel is covered with a finite value of
    /// the declared kind.
    pub fn validate(&self, decls: &[ChannelDecl]) -> Result<(), ValuationError> {
        if self.0.len() != decls.len() {
            return Err(ValuationError::Arity { expected: decls.len(), got: self.0.len() });
        }
        for (value, decl) in self.0.iter().zip(decls) {
            if value.kind() != decl.kind {
                return Err(ValuationError::Kind { channel: decl.name.clone(), expected: decl.kind });
            }
            if !value.is_finite() {
                return Err(ValuationError::NonFinite { channel: decl.name.clone() });
            }
        }
        Ok(())
    }
}

impl From<Vec<Value>> for Valuation {
    fn from(v: Vec<Value>) -> Self {
        Valuation(v)
    }
}

/// One tick of a run: the observed input and the output, `None` being `⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct IoEvent {
    pub input: Valuation,
    pub output: Option<Valuation>,
}

impl IoEvent {
    pub fn new(input: Valuation, output: Valuation) -> Self {
        IoEvent { input, output: Some(output) }
    }

    pub fn bottom(input: Valuation) -> Self {
        IoEvent { input, output: None }
    }

    pub fn is_bottom(&self) -> bool {
        self.output.is_none()
    }
}

/// Append-only word of [`IoEvent`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    events: Vec<IoEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, event: IoEvent) {
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[IoEvent] {
        &self.events
    }

    pub fn get(&self, index: usize) -> Option<&IoEvent> {
        self.events.get(index)
    }

    pub fn last(&self) -> Option<&IoEvent> {
        self.events.last()
    }

    /// `self ≼ other`.
    pub fn is_prefix_of(&self, other: &Trace) -> bool {
        self.events.len() <= other.events.len() && self.events[..] == other.events[..self.events.len()]
    }

    /// Projection onto inputs.
    pub fn inputs(&self) -> impl Iterator<Item = &Valuation> {
        self.events.iter().map(|e| &e.input)
    }

    /// Projection onto outputs.
    pub fn outputs(&self) -> impl Iterator<Item = Option<&Valuation>> {
        self.events.iter().map(|e| e.output.as_ref())
    }

    /// Zips an input word and an output word of equal length.
    pub fn zip(inputs: Vec<Valuation>, outputs: Vec<Option<Valuation>>) -> Option<Trace> {
        if inputs.len() != outputs.len() {
            return None;
        }
        let events = inputs.into_iter().zip(outputs).map(|(input, output)| IoEvent { input, output }).collect();
        Some(Trace { events })
    }
}

impl FromIterator<IoEvent> for Trace {
    fn from_iter<T: IntoIterator<Item = IoEvent>>(iter: T) -> Self {
        Trace { events: iter.into_iter().collect() }
    }
}
