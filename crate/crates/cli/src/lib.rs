//! Text file formats and command implementations for the `ceq` binary.

pub mod commands;
pub mod format;
