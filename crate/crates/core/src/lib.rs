//! Runtime interchange of black-box controllers governed by timed policies.

pub mod check;
pub mod controllers;
pub mod dsl;
pub mod experiments;
pub mod manager;
pub mod measures;
pub mod policies;
pub mod sim;
pub mod trace;
pub mod tracelog;
pub mod vdta;
