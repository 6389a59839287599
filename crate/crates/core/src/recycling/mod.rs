//! Recycle-space construction.
//!
//! A candidate basis `W = [V^(i-1) U^(i-1)]` is built from the previous solve,
//! vectors are extracted from it (Ritz, harmonic Ritz or Ritz generalized
//! singular vectors), and the result is normalized so that `C = H U` has
//! orthonormal columns.

mod basis;
mod gsvd;
mod select;
mod space;
mod strategy;

pub use basis::{build_candidate_basis, CandidateBasis};
pub use gsvd::{gsvd_pair, GsvdFactors};
pub use select::{harmonic_ritz_select, rgen_select, ritz_select, select_indices, Selection};
pub use space::{next_recycle, prepare_recycle, PreviousSolve, RecycleInputs, RecycleSpace};
pub use strategy::{Placement, Side, SizeSel, StrategyDescriptor, VecType};

/// Non-fatal adjustments made while building a recycle space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warning {
    /// Fewer candidate vectors than requested; `s` was reduced.
    SizeClamped { requested: usize, available: usize },
    /// Near-null directions of the harmonic Ritz pencil were removed.
    PencilDirectionsDropped(usize),
    /// Columns of `H U~` were numerically dependent and dropped.
    ColumnsDropped(usize),
}

/// Relative tolerance used when dropping dependent columns.
pub const RANK_TOL: f64 = 1e-10;
