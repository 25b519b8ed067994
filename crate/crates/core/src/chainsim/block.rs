use std::collections::HashMap;

use serde::Serialize;
use sha2::{Digest as _, Sha256};

/// SHA-256 output.
pub type Digest = [u8; 32];

/// Parent digest recorded in block 1.
pub const GENESIS_PARENT: Digest = [0; 32];

fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Provenance {
    Authentic,
    Counterfeit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MinerKind {
    Honest,
    Malicious,
}

/// A wallet's signing capability. Holding one is what lets a party produce
/// a package the [`KeyRegistry`] accepts for that wallet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalletKey {
    wallet_id: u64,
    secret: Digest,
}

impl WalletKey {
    pub fn wallet_id(&self) -> u64 {
        self.wallet_id
    }

    pub fn sign(&self, time_index: u64, data: Vec<u8>) -> DataPackage {
        let mut pkg = DataPackage {
            wallet_id: self.wallet_id,
            time_index,
            data,
            signature_tag: [0; 32],
        };
        pkg.signature_tag = signature_tag(&self.secret, &pkg.message_bytes());
        pkg
    }
}

fn signature_tag(secret: &Digest, message: &[u8]) -> Digest {
    sha256(&[b"sig", secret, message])
}

/// Data `D_{j,t}` from wallet `j` at time `t`, with its signature stub.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataPackage {
    pub wallet_id: u64,
    pub time_index: u64,
    pub data: Vec<u8>,
    pub signature_tag: Digest,
}

impl DataPackage {
    /// A package whose tag was made without the wallet's key.
    pub fn unsigned(wallet_id: u64, time_index: u64, data: Vec<u8>) -> Self {
        let mut pkg = Self {
            wallet_id,
            time_index,
            data,
            signature_tag: [0; 32],
        };
        pkg.signature_tag = sha256(&[b"forged", &pkg.message_bytes()]);
        pkg
    }

    /// `wallet_id (u64 BE) | time_index (u64 BE) | len (u32 BE) | data`
    pub fn message_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len());
        out.extend_from_slice(&self.wallet_id.to_be_bytes());
        out.extend_from_slice(&self.time_index.to_be_bytes());
        out.extend_from_slice(&(self.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    /// Message bytes followed by the 32-byte signature tag.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = self.message_bytes();
        out.extend_from_slice(&self.signature_tag);
        out
    }

    fn leaf_digest(&self) -> Digest {
        sha256(&[&[0x00], &self.canonical_bytes()])
    }
}

/// Merkle root over package leaves, duplicating the last node of odd
/// levels. An empty payload has the all-zero root.
pub fn merkle_root(payload: &[DataPackage]) -> Digest {
    if payload.is_empty() {
        return [0; 32];
    }
    let mut level: Vec<Digest> = payload.iter().map(DataPackage::leaf_digest).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                sha256(&[&[0x01], &pair[0], right])
            })
            .collect();
    }
    level[0]
}

/// Verifies signature stubs. Stands in for the public-key directory every
/// node holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyRegistry {
    secrets: HashMap<u64, Digest>,
}

impl KeyRegistry {
    pub fn verify(&self, pkg: &DataPackage) -> bool {
        self.secrets
            .get(&pkg.wallet_id)
            .is_some_and(|s| signature_tag(s, &pkg.message_bytes()) == pkg.signature_tag)
    }
}

/// The wallets feeding the chain, with their keys and deterministic data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalletSet {
    seed: u64,
    keys: Vec<WalletKey>,
    registry: KeyRegistry,
}

impl WalletSet {
    pub fn new(count: usize, seed: u64) -> Self {
        let keys: Vec<WalletKey> = (0..count as u64)
            .map(|id| WalletKey {
                wallet_id: id,
                secret: sha256(&[b"key", &seed.to_be_bytes(), &id.to_be_bytes()]),
            })
            .collect();
        let registry = KeyRegistry {
            secrets: keys.iter().map(|k| (k.wallet_id, k.secret)).collect(),
        };
        Self {
            seed,
            keys,
            registry,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.registry
    }

    pub fn key(&self, wallet_id: u64) -> Option<&WalletKey> {
        self.keys.get(wallet_id as usize)
    }

    pub fn data(&self, wallet_id: u64, time_index: u64) -> Vec<u8> {
        sha256(&[
            b"data",
            &self.seed.to_be_bytes(),
            &wallet_id.to_be_bytes(),
            &time_index.to_be_bytes(),
        ])[..16]
            .to_vec()
    }

    /// Every wallet's signed package for time `time_index`.
    pub fn packages(&self, time_index: u64) -> Vec<DataPackage> {
        self.keys
            .iter()
            .map(|k| k.sign(time_index, self.data(k.wallet_id, time_index)))
            .collect()
    }
}

/// A mined block. The digest commits to the index, the parent digest and
/// the Merkle root of the payload; provenance and miner are simulation
/// annotations outside the digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub index: u64,
    pub parent_digest: Digest,
    pub merkle_root: Digest,
    pub payload: Vec<DataPackage>,
    pub provenance: Provenance,
    pub miner: MinerKind,
    pub digest: Digest,
}

impl Block {
    pub fn seal(
        index: u64,
        parent_digest: Digest,
        payload: Vec<DataPackage>,
        provenance: Provenance,
        miner: MinerKind,
    ) -> Self {
        let merkle_root = merkle_root(&payload);
        let mut block = Self {
            index,
            parent_digest,
            merkle_root,
            payload,
            provenance,
            miner,
            digest: [0; 32],
        };
        block.digest = block.compute_digest();
        block
    }

    /// `index (u64 BE) | parent_digest | merkle_root(payload)`, hashed with
    /// SHA-256. The root is recomputed from the payload, not read from the
    /// stored field.
    pub fn compute_digest(&self) -> Digest {
        let root = merkle_root(&self.payload);
        sha256(&[&self.index.to_be_bytes(), &self.parent_digest, &root])
    }
}
