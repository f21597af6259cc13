//! Independent cross-checks for the core numerics.
//!
//! Everything here deliberately avoids the implementation paths it
//! verifies: distillation is re-derived from a 16x16 density-matrix
//! circuit, transition dynamics from a literal transcription of the
//! transition tables, and gradients from finite differences and an
//! exactly enumerable toy MDP. The `oracle-check` CLI subcommand runs the
//! same checks the test suite uses.

pub mod checks;
pub mod closed_form;
pub mod density;
pub mod fd;
pub mod tables;
pub mod toy;

pub use checks::{run_all_checks, CheckReport};
