//! Problem documents, command dispatch and report/CSV output for `dilind`.

pub mod csv;
pub mod document;
pub mod run;

pub use document::{emit_problem, parse_problem, parse_problem_with_seed, Command, ProblemDocument};
pub use run::{run_command, CommandError, ReportDocument, RunOutput};
