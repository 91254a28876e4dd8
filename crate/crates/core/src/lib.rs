//! Meeting, coalescence and synchronization times of random walks on random
//! deterministic finite automata.
//!
//! The crate has three layers:
//! - exact numerics: the single-walk kernel, its product and auxiliary
//!   chains, stationary laws, mixing profiles and hitting times;
//! - the first-visit-time quantities (`R`, `Z`, quasi-stationary pair) that
//!   predict the geometric meeting rate;
//! - seeded Monte Carlo samplers and the statistics used to compare them
//!   against the limit laws.

pub mod aux;
pub mod chain;
pub mod dfa;
pub mod error;
pub mod fvtl;
pub mod logbase;
pub mod mc;
pub mod operator;
pub mod seed;
pub mod stats;

pub use aux::{build_aux_chain, AuxChain, AuxState, EventReport};
pub use chain::{walk_matrix, ChainSpec, CsrMatrix, StationaryMethod};
pub use dfa::{generate_dfa, Dfa, Word};
pub use error::{Error, Result};
pub use fvtl::FvtlReport;
pub use logbase::LogBase;
pub use mc::{Mode, RunManifest, TrialRecord};
pub use operator::TransitionOperator;
pub use stats::{EmpiricalDist, FitReport};
