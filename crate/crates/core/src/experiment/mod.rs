//! Scripted measurement protocols, agent-certainty inference under
//! pre-measurement and decoherent semantics, and the built-in four-agent
//! protocol.

mod audit;
mod certainty;
mod compare;
pub mod fr;
mod protocol;

pub use audit::{consistency_audit, AuditReport, Statement, StatementResult};
pub use certainty::{
    certainty, certainty_with, BranchEvidence, CertaintyKind, CertaintyVerdict, ModelEvidence, Proposition,
    Quantifier, Semantics,
};
pub use compare::{decoherence_compare, DecoherenceComparison, ModelReduction};
pub use protocol::{joint_outcome, Action, Protocol, Stage, Step, Transcript};
