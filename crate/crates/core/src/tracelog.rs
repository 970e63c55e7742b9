//! JSON-lines tick log.
//!
//! One object per line:
//!
//! ```text
//! {"tick":0,"car":0,"input":[[5.0,4.2,...],0.0],"mask":[true,false,true],
//!  "group_outputs":[[0.0,2.0],null,[0.0,0.0]],"b_prime":[true,false,false],
//!  "selected":0,"released":[0.0,2.0]}
//! ```
//!
//! Valuations are arrays in channel declaration order; array channels are
//! nested arrays. `null` stands for ⊥.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manager::TickOutcome;
use crate::trace::{IoEvent, Trace, Valuation, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonValue {
    Scalar(f64),
    Array(Vec<f64>),
}

pub type JsonValuation = Vec<JsonValue>;

pub fn to_json(v: &Valuation) -> JsonValuation {
    v.values()
        .iter()
        .map(|v| match v {
            Value::Scalar(s) => JsonValue::Scalar(*s),
            Value::Array(a) => JsonValue::Array(a.to_vec()),
        })
        .collect()
}

pub fn from_json(v: &JsonValuation) -> Valuation {
    Valuation::new(
        v.iter()
            .map(|v| match v {
                JsonValue::Scalar(s) => Value::Scalar(*s),
                JsonValue::Array(a) => Value::Array(a.clone().into()),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub car: Option<usize>,
    pub input: JsonValuation,
    pub mask: Vec<bool>,
    pub group_outputs: Vec<Option<JsonValuation>>,
    pub b_prime: Vec<bool>,
    pub selected: usize,
    pub released: Option<JsonValuation>,
}

impl TickRecord {
    pub fn from_outcome(outcome: &TickOutcome, car: Option<usize>) -> Self {
        TickRecord {
            tick: outcome.tick,
            car,
            input: to_json(&outcome.event.input),
            mask: outcome.mask.clone(),
            group_outputs: outcome.group_outputs.iter().map(|y| y.as_ref().map(to_json)).collect(),
            b_prime: outcome.b_prime.clone(),
            selected: outcome.selected,
            released: outcome.event.output.as_ref().map(to_json),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceLogError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("car {car:?}: record for tick {got} follows tick {previous}")]
    Order { car: Option<usize>, previous: u64, got: u64 },
    #[error("car {car:?}: {got} group outputs where earlier records had {expected}")]
    GroupCount { car: Option<usize>, expected: usize, got: usize },
}

pub fn write_records<'a>(mut w: impl Write, records: impl IntoIterator<Item = &'a TickRecord>) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(r: impl BufRead) -> Result<Vec<TickRecord>, TraceLogError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| TraceLogError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

/// A released trace and per-group histories rebuilt from one run's records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTraces {
    pub car: Option<usize>,
    pub released: Trace,
    pub histories: Vec<Trace>,
}

/// Splits records by car (records without a car form one run) and rebuilds
/// the traces in tick order.
pub fn traces_by_car(records: &[TickRecord]) -> Result<Vec<RunTraces>, TraceLogError> {
    let mut runs: Vec<(RunTraces, u64)> = Vec::new();
    for r in records {
        let idx = match runs.iter().position(|(run, _)| run.car == r.car) {
            Some(i) => i,
            None => {
                let histories = vec![Trace::new(); r.group_outputs.len()];
                runs.push((RunTraces { car: r.car, released: Trace::new(), histories }, 0));
                runs.len() - 1
            }
        };
        let (run, last) = &mut runs[idx];
        if !run.released.is_empty() && r.tick <= *last {
            return Err(TraceLogError::Order { car: r.car, previous: *last, got: r.tick });
        }
        if r.group_outputs.len() != run.histories.len() {
            return Err(TraceLogError::GroupCount {
                car: r.car,
                expected: run.histories.len(),
                got: r.group_outputs.len(),
            });
        }
        *last = r.tick;
        let input = from_json(&r.input);
        run.released.push(IoEvent { input: input.clone(), output: r.released.as_ref().map(from_json) });
        for (h, y) in run.histories.iter_mut().zip(&r.group_outputs) {
            h.push(IoEvent { input: input.clone(), output: y.as_ref().map(from_json) });
        }
    }
    Ok(runs.into_iter().map(|(r, _)| r).collect())
}
