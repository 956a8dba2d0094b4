//! MAX-q-CUT: instances and exact optimum, the vector relaxation and its
//! low-rank solver, partition rounding, the `α_q` constant, and the
//! reduction from unique label cover.

pub mod alpha;
pub mod instance;
pub mod io;
pub mod rounding;
pub mod sdp;
pub mod ulc;

pub use alpha::{alpha_q, AlphaOptions, AlphaResult};
pub use instance::{brute_force_opt, Edge, MaxQCutInstance};
pub use rounding::{approx_ratio_harness, round, HarnessEntry, HarnessReport, RoundingResult};
pub use sdp::{sdp_solve, SdpOptions, SdpSolution};
pub use ulc::{influence_decode, long_code_value, ulc_reduce, Reduction, ReductionMeta, UlcEdge, UlcInstance};
