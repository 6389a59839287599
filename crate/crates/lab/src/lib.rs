//! Experiment driver for recycling Krylov solves in bilevel learning:
//! inpainting problems, recorded Hessian sequences, replays under every
//! recycling strategy, similarity reports, sweeps and CSV output.

pub mod error;
pub mod image;
pub mod output;
pub mod problem;
pub mod record;
pub mod references;
pub mod replay;
pub mod similarity;
pub mod sweep;

pub use error::{LabError, Result};
pub use problem::{make_inpainting, RunConfig, StopChoice};
pub use record::{record_sequence, SequenceRecord, SystemRecord};
pub use references::{compute_references, REFERENCE_TOL};
pub use replay::{replay, ReplayConfig, ReplayReport, ReplayRow};
