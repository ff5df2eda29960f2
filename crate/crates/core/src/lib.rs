//! Quorum-governed containment sandbox.
//!
//! A desk-scale, fully deterministic model of a permissioned ledger and the
//! control mechanisms that hang off it — identity certificates, anchored
//! ethics, morality-gated behavior trees, component configuration items,
//! smart contracts, licenses, metered tokens, ostracism petitions, and
//! generation vaults — plus an agent-based scenario engine that replays
//! misuse pathways against configurable mechanism subsets and measures
//! whether they stay contained.

pub mod behavior;
pub mod components;
pub mod contracts;
pub mod event;
pub mod hash;
pub mod identity;
pub mod ledger;
pub mod morality;
pub mod probability;
pub mod rng;

pub use hash::{sha256, Digest};
pub use ledger::{
    AuditFilter, Block, ChainDump, ConsensusConfig, IntegrityReport, Ledger, LedgerError,
    Transaction, TxKind, Vote,
};
