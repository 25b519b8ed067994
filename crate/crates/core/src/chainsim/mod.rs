//! Block-level simulation of a double-spending attack.
//!
//! Blocks are hash-linked with SHA-256 over a canonical big-endian
//! serialization; signatures are capability stubs (a package verifies iff
//! it was tagged with the wallet's key). Proof-of-work is not simulated:
//! which side mines the next block is a Bernoulli draw with the attacker's
//! hash rate, using the same draw as [`crate::montecarlo`], so a race and a
//! walk fed the same stream follow the same trajectory.

mod block;
mod race;
mod view;

pub use block::{
    merkle_root, Block, DataPackage, Digest, KeyRegistry, MinerKind, Provenance, WalletKey,
    WalletSet, GENESIS_PARENT,
};
pub use race::{
    build_authentic, launch_dsa, race_estimate, race_records, run_race_trial, step_race,
    BranchRace, Forgery, RaceRecord, RaceSetup, RaceStatus, RaceSummary,
};
pub use view::{
    resolve_longest, validate_block, validate_chain, ChainView, ValidationReport, Violation,
};
