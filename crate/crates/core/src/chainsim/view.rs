use std::collections::HashMap;
use std::fmt;

use super::block::{Block, Digest, KeyRegistry, GENESIS_PARENT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Stored {
    block: Block,
    /// Insertion order, used for first-seen tie-breaks.
    seq: usize,
}

/// Append-only block store with its branch heads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainView {
    blocks: HashMap<Digest, Stored>,
    order: Vec<Digest>,
    tips: Vec<Digest>,
}

impl ChainView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `block` under its recorded digest. The parent must already be
    /// present, or be the genesis digest. Semantic checks are left to
    /// [`validate_chain`].
    pub fn insert(&mut self, block: Block) -> Result<Digest> {
        let parent = block.parent_digest;
        if parent != GENESIS_PARENT && !self.blocks.contains_key(&parent) {
            return Err(Error::UnknownParent { index: block.index });
        }
        let digest = block.digest;
        if self.blocks.contains_key(&digest) {
            return Ok(digest);
        }
        self.tips.retain(|t| *t != parent);
        self.tips.push(digest);
        self.blocks.insert(
            digest,
            Stored {
                block,
                seq: self.order.len(),
            },
        );
        self.order.push(digest);
        Ok(digest)
    }

    pub fn get(&self, digest: &Digest) -> Option<&Block> {
        self.blocks.get(digest).map(|s| &s.block)
    }

    /// Mutable access to a stored block. The store is not re-keyed, so
    /// edits show up as digest mismatches during validation.
    pub fn get_mut(&mut self, digest: &Digest) -> Option<&mut Block> {
        self.blocks.get_mut(digest).map(|s| &mut s.block)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Blocks in insertion order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.order.iter().map(|d| &self.blocks[d].block)
    }

    pub fn digests(&self) -> &[Digest] {
        &self.order
    }

    pub fn tips(&self) -> &[Digest] {
        &self.tips
    }

    /// Head of the longest branch; equal lengths go to the head inserted
    /// first.
    pub fn resolve_longest(&self) -> Option<Digest> {
        self.tips
            .iter()
            .map(|d| &self.blocks[d])
            .max_by(|a, b| a.block.index.cmp(&b.block.index).then(b.seq.cmp(&a.seq)))
            .map(|s| s.block.digest)
    }

    /// The branch ending at `head`, from block 1 upward.
    pub fn branch(&self, head: &Digest) -> Vec<&Block> {
        let mut out = Vec::new();
        let mut cursor = self.get(head);
        while let Some(b) = cursor {
            out.push(b);
            cursor = self.get(&b.parent_digest);
        }
        out.reverse();
        out
    }

    /// Block at `index` on the branch ending at `head`.
    pub fn ancestor_at(&self, head: &Digest, index: u64) -> Option<&Block> {
        let mut cursor = self.get(head);
        while let Some(b) = cursor {
            if b.index == index {
                return Some(b);
            }
            if b.index < index {
                return None;
            }
            cursor = self.get(&b.parent_digest);
        }
        None
    }
}

/// Head of the longest branch in `view`.
pub fn resolve_longest(view: &ChainView) -> Option<Digest> {
    view.resolve_longest()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DigestMismatch {
        index: u64,
    },
    MissingParent {
        index: u64,
    },
    IndexGap {
        index: u64,
        parent_index: u64,
    },
    GenesisIndex {
        index: u64,
    },
    StaleTimeIndex {
        index: u64,
        wallet_id: u64,
        time_index: u64,
    },
    BadSignature {
        index: u64,
        wallet_id: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DigestMismatch { index } => {
                write!(f, "block {index}: digest does not match contents")
            }
            Violation::MissingParent { index } => write!(f, "block {index}: parent not found"),
            Violation::IndexGap {
                index,
                parent_index,
            } => write!(
                f,
                "block {index}: index is not one greater than parent index {parent_index}"
            ),
            Violation::GenesisIndex { index } => {
                write!(f, "block {index}: genesis parent on a block other than 1")
            }
            Violation::StaleTimeIndex {
                index,
                wallet_id,
                time_index,
            } => write!(
                f,
                "block {index}: wallet {wallet_id} package carries time index {time_index}"
            ),
            Violation::BadSignature { index, wallet_id } => {
                write!(
                    f,
                    "block {index}: wallet {wallet_id} signature does not verify"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub blocks_checked: usize,
    pub first_violation: Option<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks one block against its parent (`None` for block 1).
pub fn validate_block(
    block: &Block,
    parent: Option<&Block>,
    registry: &KeyRegistry,
) -> Result<(), Violation> {
    let index = block.index;
    if block.compute_digest() != block.digest {
        return Err(Violation::DigestMismatch { index });
    }
    match parent {
        None if block.parent_digest != GENESIS_PARENT => {
            return Err(Violation::MissingParent { index });
        }
        None if index != 1 => return Err(Violation::GenesisIndex { index }),
        Some(p) if p.index + 1 != index => {
            return Err(Violation::IndexGap {
                index,
                parent_index: p.index,
            });
        }
        _ => {}
    }
    for pkg in &block.payload {
        if pkg.time_index != index {
            return Err(Violation::StaleTimeIndex {
                index,
                wallet_id: pkg.wallet_id,
                time_index: pkg.time_index,
            });
        }
        if !registry.verify(pkg) {
            return Err(Violation::BadSignature {
                index,
                wallet_id: pkg.wallet_id,
            });
        }
    }
    Ok(())
}

/// Validates every stored block in insertion order and stops at the first
/// violation.
pub fn validate_chain(view: &ChainView, registry: &KeyRegistry) -> ValidationReport {
    let mut checked = 0;
    for block in view.blocks() {
        checked += 1;
        let parent = if block.parent_digest == GENESIS_PARENT {
            None
        } else {
            match view.get(&block.parent_digest) {
                Some(p) => Some(p),
                None => {
                    return ValidationReport {
                        blocks_checked: checked,
                        first_violation: Some(Violation::MissingParent { index: block.index }),
                    }
                }
            }
        };
        if let Err(v) = validate_block(block, parent, registry) {
            return ValidationReport {
                blocks_checked: checked,
                first_violation: Some(v),
            };
        }
    }
    ValidationReport {
        blocks_checked: checked,
        first_violation: None,
    }
}
