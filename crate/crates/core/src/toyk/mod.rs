//! Exact bounded-resource Kolmogorov complexity on a tiny machine.
//!
//! True K is not computable. Here `K` means: the shortest program of at most
//! `max_len` bits that halts within `steps` instructions with the target as
//! output. Programs are enumerated shortest first, then lexicographically,
//! so every reported witness is canonical.

mod audit;
pub mod machine;
mod search;

use thiserror::Error;

pub use audit::{theorem_audit, TheoremAudit, WorstTriple, C_TRI, MAX_AUDIT_LEN};
pub use machine::{Bits, MicroMachine, Op, Outcome, BITS_PER_SYMBOL, C_COPY, C_LIT, MACHINE_VERSION};
pub use search::{
    id_distance, id_prime_distance, k_bounded, k_cond_bounded, Budget, ConditionalTable, KResult,
    MAX_PROGRAM_BITS,
};

#[derive(Debug, Error)]
pub enum ToykError {
    #[error("program length budget {max_len} exceeds the enumeration guard of {guard} bits")]
    BudgetTooLarge { max_len: usize, guard: usize },
    #[error("step budget must be at least 1")]
    ZeroSteps,
    #[error("{0} is unknown within the budget")]
    Unknown(String),
    #[error("theorem audit supports strings up to length {max}, got {n}")]
    AuditTooLarge { n: usize, max: usize },
}
