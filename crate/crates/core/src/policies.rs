//! The three shipped driving policies.

use crate::vdta::{BuiltinRegistry, Policy, PolicyError};

pub const NORMAL: &str = include_str!("../policies/normal.vdta");
pub const STOPPING: &str = include_str!("../policies/stopping.vdta");
pub const CAUTIOUS: &str = include_str!("../policies/cautious.vdta");

/// Group order used throughout: normal, cautious, stopping.
pub const GROUP_ORDER: [&str; 3] = ["normal", "cautious", "stopping"];

pub const NORMAL_GROUP: usize = 0;
pub const CAUTIOUS_GROUP: usize = 1;
pub const STOPPING_GROUP: usize = 2;

/// Elaborates the shipped policies in group order.
pub fn shipped(builtins: &BuiltinRegistry) -> Result<Vec<Policy>, PolicyError> {
    [NORMAL, CAUTIOUS, STOPPING].iter().map(|src| Policy::from_source(src, builtins)).collect()
}
