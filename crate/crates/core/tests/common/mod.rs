#![allow(dead_code)]

use proptest::prelude::*;

use ri_switch::vdta::{BuiltinRegistry, Policy};

/// Thresholds on `u`, `x` and `y`, then (target, reset) per cell.
pub type Edges = (u8, u8, u8, [(usize, bool); 4]);

/// A small deterministic and complete automaton over `u` (input) and `y`
/// (output) with one clock. Every location partitions `(u, x, y)` space
/// into four cells by one threshold each on `u`, `x` and `y` (the `y`
/// split refines the `u < cu` half).
#[derive(Debug, Clone)]
pub struct Small {
    pub accepting: Vec<bool>,
    pub edges: Vec<Edges>,
}

impl Small {
    pub fn source(&self) -> String {
        let mut s = String::from("policy small {\n  inputs { u: scalar }\n  outputs { y: scalar }\n  clocks { x }\n  locations {\n");
        for (i, acc) in self.accepting.iter().enumerate() {
            let attrs = match (i == 0, *acc) {
                (true, true) => ": initial accepting",
                (true, false) => ": initial",
                (false, true) => ": accepting",
                (false, false) => "",
            };
            s += &format!("    l{i}{attrs},\n");
        }
        s += "  }\n";
        for (i, (cu, cx, cy, t)) in self.edges.iter().enumerate() {
            let guards = [
                format!("u < {cu} and y < {cy}"),
                format!("u < {cu} and y >= {cy}"),
                format!("u >= {cu} and x < {cx}"),
                format!("u >= {cu} and x >= {cx}"),
            ];
            for (g, (to, reset)) in guards.iter().zip(t) {
                let r = if *reset { " reset { x }" } else { "" };
                s += &format!("  transition l{i} -> l{to} when {g}{r}\n");
            }
        }
        s + "}\n"
    }

    /// Reference step: clocks advance, the guard sees the advanced value,
    /// then resets apply.
    pub fn step(&self, (loc, x): (usize, u64), u: u64, y: u64) -> ((usize, u64), bool) {
        let (cu, cx, cy, t) = self.edges[loc];
        let x1 = x + 1;
        let cell = if u < cu as u64 {
            if y < cy as u64 {
                0
            } else {
                1
            }
        } else if x1 < cx as u64 {
            2
        } else {
            3
        };
        let (to, reset) = t[cell];
        ((to, if reset { 0 } else { x1 }), self.accepting[to])
    }
}

pub fn small_automaton() -> impl Strategy<Value = Small> {
    (1usize..=4).prop_flat_map(|n| {
        let edge = (0u8..=4, 0u8..=8, 0u8..=3, proptest::array::uniform4((0..n, any::<bool>())));
        (
            proptest::collection::vec(any::<bool>(), n).prop_map(|mut a| {
                if !a.iter().any(|&b| b) {
                    a[0] = true;
                }
                a
            }),
            proptest::collection::vec(edge, n),
        )
            .prop_map(|(accepting, edges)| Small { accepting, edges })
    })
}

impl Small {
    pub fn policy(&self) -> Policy {
        Policy::from_source(&self.source(), &BuiltinRegistry::default()).unwrap()
    }
}
