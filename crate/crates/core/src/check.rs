//! Offline audit of a released trace against the policies and the per-group
//! output histories recorded during the run.

use std::fmt;

use serde::Serialize;

use crate::trace::{IoEvent, Trace, Valuation};
use crate::vdta::{Policy, StepError, VdtaState};

/// Outcome of one constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    /// First tick at which the constraint failed.
    pub first_violation: Option<usize>,
    pub detail: Option<String>,
}

impl Verdict {
    fn ok() -> Self {
        Verdict { pass: true, first_violation: None, detail: None }
    }

    fn fail(&mut self, tick: usize, detail: impl FnOnce() -> String) {
        if self.pass {
            self.pass = false;
            self.first_violation = Some(tick);
            self.detail = Some(detail());
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.pass, self.first_violation, &self.detail) {
            (true, _, _) => f.write_str("pass"),
            (false, Some(t), Some(d)) => write!(f, "FAIL at tick {t}: {d}"),
            (false, Some(t), None) => write!(f, "FAIL at tick {t}"),
            (false, None, _) => f.write_str("FAIL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceReport {
    /// Released outputs are never ⊥, and each is accepted by some policy
    /// after that group's own history.
    pub snd: Verdict,
    /// Weaker reading: each released event is accepted by some policy after
    /// some witness history with the same inputs (the recorded group
    /// histories and the released trace itself are tried).
    pub snd_witness: Verdict,
    /// Every released event answers the input of its own tick.
    pub mono: Verdict,
    /// One released event per input.
    pub inst: Verdict,
    /// Each released output equals the output of a group whose own history
    /// extended by it is accepted.
    pub ca: Verdict,
}

impl TraceReport {
    pub fn all_pass(&self) -> bool {
        self.snd.pass && self.snd_witness.pass && self.mono.pass && self.inst.pass && self.ca.pass
    }
}

impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Snd:         {}", self.snd)?;
        writeln!(f, "Snd-witness: {}", self.snd_witness)?;
        writeln!(f, "Mono:        {}", self.mono)?;
        writeln!(f, "Inst:        {}", self.inst)?;
        write!(f, "Ca:          {}", self.ca)
    }
}

/// A policy replayed along one history. Suspended ticks (⊥) leave the state
/// alone. A step error retires the replay.
#[derive(Debug, Clone)]
struct Replay<'a> {
    policy: &'a Policy,
    state: Option<VdtaState>,
}

impl<'a> Replay<'a> {
    fn new(policy: &'a Policy) -> Self {
        Replay { policy, state: Some(policy.vdta.initial_state()) }
    }

    fn accepts(&self, input: &Valuation, output: &Valuation) -> Result<bool, StepError> {
        match &self.state {
            Some(s) => Ok(self.policy.vdta.step_with(s, input, output)?.accepting),
            None => Ok(false),
        }
    }

    fn advance(&mut self, event: &IoEvent) {
        if let (Some(s), Some(y)) = (&self.state, &event.output) {
            self.state = self.policy.vdta.step_with(s, &event.input, y).ok().map(|s| s.state);
        }
    }
}

/// Checks a released trace. `histories[i]` is group `i`'s input/output word
/// with ⊥ on the ticks it was suspended; `policies[i]` governs it.
pub fn check_trace(policies: &[Policy], released: &Trace, histories: &[Trace]) -> TraceReport {
    let mut report = TraceReport {
        snd: Verdict::ok(),
        snd_witness: Verdict::ok(),
        mono: Verdict::ok(),
        inst: Verdict::ok(),
        ca: Verdict::ok(),
    };
    let input_len = histories.first().map_or(released.len(), Trace::len);
    if let Some((i, h)) = histories.iter().enumerate().find(|(_, h)| h.len() != input_len) {
        report.inst.fail(h.len().min(input_len), || format!("history of group {i} has {} events, expected {input_len}", h.len()));
    }
    if released.len() != input_len {
        report.inst.fail(released.len().min(input_len), || {
            format!("{} released events for {input_len} inputs", released.len())
        });
    }
    if policies.len() != histories.len() {
        let msg = format!("{} policies but {} histories", policies.len(), histories.len());
        report.ca.fail(0, || msg.clone());
        report.snd.fail(0, || msg.clone());
        report.snd_witness.fail(0, || msg);
        return report;
    }

    let mut own: Vec<Replay> = policies.iter().map(Replay::new).collect();
    let mut witnesses: Vec<Vec<Replay>> = policies.iter().map(|p| vec![Replay::new(p); histories.len() + 1]).collect();

    for (t, event) in released.events().iter().enumerate() {
        let group_events: Vec<Option<&IoEvent>> = histories.iter().map(|h| h.get(t)).collect();
        if let Some(g) = group_events.iter().position(|e| e.is_some_and(|e| e.input != event.input)) {
            report.mono.fail(t, || format!("released input differs from the input seen by group {g}"));
        }

        match &event.output {
            None => {
                report.snd.fail(t, || "released output is ⊥".into());
                report.snd_witness.fail(t, || "released output is ⊥".into());
                report.ca.fail(t, || "released output is ⊥".into());
            }
            Some(y) => {
                let mut errors = Vec::new();
                let mut accepted = |r: &Replay| match r.accepts(&event.input, y) {
                    Ok(a) => a,
                    Err(e) => {
                        errors.push(e.to_string());
                        false
                    }
                };
                if !own.iter().any(&mut accepted) {
                    report.snd.fail(t, || "no policy accepts the released event after its group's history".into());
                }
                if !witnesses.iter().flatten().any(&mut accepted) {
                    report.snd_witness.fail(t, || "no policy accepts the released event after any witness".into());
                }
                let ca = own.iter().zip(&group_events).any(|(r, e)| {
                    e.and_then(|e| e.output.as_ref()).is_some_and(|yi| yi == y) && accepted(r)
                });
                if !ca {
                    report.ca.fail(t, || {
                        let mut msg = "released output is not an accepted group output".to_string();
                        if !errors.is_empty() {
                            msg.push_str(&format!(" ({})", errors.join("; ")));
                        }
                        msg
                    });
                }
            }
        }

        for (r, e) in own.iter_mut().zip(&group_events) {
            if let Some(e) = e {
                r.advance(e);
            }
        }
        for per_policy in witnesses.iter_mut() {
            let (from_groups, from_released) = per_policy.split_at_mut(histories.len());
            for (r, e) in from_groups.iter_mut().zip(&group_events) {
                if let Some(e) = e {
                    r.advance(e);
                }
            }
            from_released[0].advance(event);
        }
    }
    report
}

/// Checks that successive snapshots of a released trace extend each other.
pub fn check_prefix_chain(snapshots: &[Trace]) -> Verdict {
    let mut v = Verdict::ok();
    for (t, pair) in snapshots.windows(2).enumerate() {
        if !pair[0].is_prefix_of(&pair[1]) {
            v.fail(t + 1, || "snapshot does not extend its predecessor".into());
        }
    }
    v
}
