//! Framed slotted schemes (CRDSA, IRSA, CSA): frame realizations and the iterative
//! SIC peeling decoder.

mod codebook;
mod degree;
mod frame;
mod sic;

pub use codebook::{recoverable, Code, Codebook, BUILTIN_CODEBOOKS};
pub use degree::DegreeDistribution;
pub use frame::{place_replicas, FrameRealization, Positions, UserRecord};
pub use sic::{realize_frame, run_sic, simulate_frames, tally_cardinalities, Counters, SicOutcome};
