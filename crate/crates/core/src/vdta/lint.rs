//! Best-effort static check for overlapping outgoing guards.
//!
//! Each comparison is read as a constraint `lhs - rhs ∈ I` on a key built from
//! the printed terms (or as `lhs ∈ I` when the right side is a constant).
//! Two guards from the same location are reported when every key they share
//! has intersecting intervals, since both may then be enabled at once.
//! Atoms using `!=` are ignored.

use std::collections::HashMap;
use std::fmt;

use crate::dsl::ast::{rational_to_f64, PolicyAst, Term};
use crate::dsl::CmpOp;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound {
    value: f64,
    closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: Bound,
    hi: Bound,
}

impl Interval {
    const ALL: Interval =
        Interval { lo: Bound { value: f64::NEG_INFINITY, closed: false }, hi: Bound { value: f64::INFINITY, closed: false } };

    fn from_op(op: CmpOp, c: f64) -> Option<Interval> {
        let at = |closed| Bound { value: c, closed };
        Some(match op {
            CmpOp::Lt => Interval { hi: at(false), ..Self::ALL },
            CmpOp::Le => Interval { hi: at(true), ..Self::ALL },
            CmpOp::Gt => Interval { lo: at(false), ..Self::ALL },
            CmpOp::Ge => Interval { lo: at(true), ..Self::ALL },
            CmpOp::Eq => Interval { lo: at(true), hi: at(true) },
            CmpOp::Ne => return None,
        })
    }

    fn intersect(self, other: Interval) -> Interval {
        let lo = if self.lo.value > other.lo.value
            || (self.lo.value == other.lo.value && !self.lo.closed)
        {
            self.lo
        } else {
            other.lo
        };
        let hi = if self.hi.value < other.hi.value
            || (self.hi.value == other.hi.value && !self.hi.closed)
        {
            self.hi
        } else {
            other.hi
        };
        Interval { lo, hi }
    }

    fn is_empty(self) -> bool {
        self.lo.value > self.hi.value || (self.lo.value == self.hi.value && !(self.lo.closed && self.hi.closed))
    }
}

/// Two transitions from one location whose guards may both hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapWarning {
    pub location: String,
    pub first: usize,
    pub second: usize,
}

impl fmt::Display for OverlapWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "location `{}`: guards of transitions {} and {} may overlap", self.location, self.first, self.second)
    }
}

fn constraints(guard: &crate::dsl::GuardExpr) -> HashMap<String, Interval> {
    let mut out: HashMap<String, Interval> = HashMap::new();
    for c in guard.atoms() {
        let (key, value) = match &c.rhs {
            Term::Const(r) => (c.lhs.to_string(), rational_to_f64(r)),
            rhs => (format!("{} - ({})", c.lhs, rhs), 0.0),
        };
        if let Some(iv) = Interval::from_op(c.op, value) {
            let slot = out.entry(key).or_insert(Interval::ALL);
            *slot = slot.intersect(iv);
        }
    }
    out
}

pub fn lint_overlaps(ast: &PolicyAst) -> Vec<OverlapWarning> {
    let cs: Vec<_> = ast.transitions.iter().map(|t| constraints(&t.guard)).collect();
    let mut warnings = Vec::new();
    for (i, a) in ast.transitions.iter().enumerate() {
        for (j, b) in ast.transitions.iter().enumerate().skip(i + 1) {
            if a.from != b.from {
                continue;
            }
            let disjoint = cs[i]
                .iter()
                .any(|(key, ia)| cs[j].get(key).is_some_and(|ib| ia.intersect(*ib).is_empty()))
                || cs[i].values().chain(cs[j].values()).any(|iv| iv.is_empty());
            if !disjoint {
                warnings.push(OverlapWarning { location: a.from.clone(), first: i, second: j });
            }
        }
    }
    warnings
}
