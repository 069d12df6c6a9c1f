//! Command-line front end for the CAA authentication simulator.

pub mod args;
pub mod commands;
pub mod figures;
pub mod report;
