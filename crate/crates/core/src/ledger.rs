//! Hash-chained, quorum-sealed, append-only ledger.
//!
//! A fixed validator set advances the chain by voting on candidate blocks
//! (permissioned proof-of-authority). Blocks seal on demand, not on a clock.
//! Every other module anchors its state-changing events here, so replaying
//! the audit trail reconstructs module state and any single-bit tampering
//! with a sealed block is detectable.
//!
//! Canonical binary encoding (all integers big-endian):
//!
//! ```text
//! chain := block-count:u32 || block*
//! block := height:u64 || prev_hash:32 || tx-count:u32 || tx* || vote-count:u32 || vote* || block_hash:32
//! tx    := id:u64 || author-len:u32 || author || kind:u8 || payload-len:u32 || payload || digest:32
//! vote  := validator-len:u32 || validator || signature:32
//! ```
//!
//! `block_hash` is SHA-256 over the block bytes up to (not including) the
//! hash field itself; the candidate digest validators sign covers the bytes
//! up to (not including) the vote list.

use crate::hash::{keyed_signature, sha256, Digest};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Transaction kinds. The `u8` encoding is part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxKind {
    IdentityIssue,
    EthicsAnchor,
    License,
    TokenSpend,
    PetitionSign,
    UnlockVote,
    ComponentEvent,
    Shutdown,
    Generic,
}

impl TxKind {
    pub const ALL: [TxKind; 9] = [
        TxKind::IdentityIssue,
        TxKind::EthicsAnchor,
        TxKind::License,
        TxKind::TokenSpend,
        TxKind::PetitionSign,
        TxKind::UnlockVote,
        TxKind::ComponentEvent,
        TxKind::Shutdown,
        TxKind::Generic,
    ];

    pub fn code(self) -> u8 {
        match self {
            TxKind::IdentityIssue => 0,
            TxKind::EthicsAnchor => 1,
            TxKind::License => 2,
            TxKind::TokenSpend => 3,
            TxKind::PetitionSign => 4,
            TxKind::UnlockVote => 5,
            TxKind::ComponentEvent => 6,
            TxKind::Shutdown => 7,
            TxKind::Generic => 8,
        }
    }

    pub fn from_code(code: u8) -> Option<TxKind> {
        TxKind::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TxKind::IdentityIssue => "identity-issue",
            TxKind::EthicsAnchor => "ethics-anchor",
            TxKind::License => "license",
            TxKind::TokenSpend => "token-spend",
            TxKind::PetitionSign => "petition-sign",
            TxKind::UnlockVote => "unlock-vote",
            TxKind::ComponentEvent => "component-event",
            TxKind::Shutdown => "shutdown",
            TxKind::Generic => "generic",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    /// Chain-unique sequence number, assigned by the ledger at append time.
    pub id: u64,
    pub author: String,
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub payload_digest: Digest,
}

impl Transaction {
    /// Build a transaction with a correct payload digest. The id is a
    /// placeholder until `append_transaction` assigns the real one.
    pub fn new(author: impl Into<String>, kind: TxKind, payload: Vec<u8>) -> Transaction {
        let payload_digest = sha256(&payload);
        Transaction {
            id: 0,
            author: author.into(),
            kind,
            payload,
            payload_digest,
        }
    }

    pub fn encode(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&self.id.to_be_bytes());
        buf.extend_from_slice(&(self.author.len() as u32).to_be_bytes());
        buf.extend_from_slice(self.author.as_bytes());
        buf.push(self.kind.code());
        buf.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        buf.extend_from_slice(&self.payload);
        buf.extend_from_slice(self.payload_digest.as_bytes());
    }
}

/// A validator's vote on a candidate block digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub validator: String,
    pub signature: Digest,
}

impl Vote {
    pub fn encode(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&(self.validator.len() as u32).to_be_bytes());
        buf.extend_from_slice(self.validator.as_bytes());
        buf.extend_from_slice(self.signature.as_bytes());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub tx_list: Vec<Transaction>,
    /// Deduplicated, sorted by validator id; order is part of the hash.
    pub votes: Vec<Vote>,
    pub block_hash: Digest,
}

impl Block {
    /// Bytes covered by the candidate digest that validators sign.
    fn unsigned_bytes(height: u64, prev_hash: &Digest, txs: &[Transaction]) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&height.to_be_bytes());
        buf.extend_from_slice(prev_hash.as_bytes());
        buf.extend_from_slice(&(txs.len() as u32).to_be_bytes());
        for tx in txs {
            tx.encode(&mut buf);
        }
        buf
    }

    pub fn candidate_digest(height: u64, prev_hash: &Digest, txs: &[Transaction]) -> Digest {
        sha256(&Block::unsigned_bytes(height, prev_hash, txs))
    }

    /// Recompute this block's hash from its contents.
    pub fn compute_hash(&self) -> Digest {
        let mut buf = Block::unsigned_bytes(self.height, &self.prev_hash, &self.tx_list);
        buf.extend_from_slice(&(self.votes.len() as u32).to_be_bytes());
        for v in &self.votes {
            v.encode(&mut buf);
        }
        sha256(&buf)
    }

    /// Full canonical encoding, hash field included.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Block::unsigned_bytes(self.height, &self.prev_hash, &self.tx_list);
        buf.extend_from_slice(&(self.votes.len() as u32).to_be_bytes());
        for v in &self.votes {
            v.encode(&mut buf);
        }
        buf.extend_from_slice(self.block_hash.as_bytes());
        buf
    }
}

/// Validator count and the rational quorum threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    n: usize,
    threshold_num: u64,
    threshold_den: u64,
}

impl ConsensusConfig {
    /// `threshold = num/den` must lie in (0, 1].
    pub fn new(n: usize, threshold_num: u64, threshold_den: u64) -> Result<ConsensusConfig, LedgerError> {
        if n == 0 || threshold_den == 0 || threshold_num == 0 || threshold_num > threshold_den {
            return Err(LedgerError::InvalidConfig);
        }
        Ok(ConsensusConfig {
            n,
            threshold_num,
            threshold_den,
        })
    }

    pub fn two_thirds(n: usize) -> ConsensusConfig {
        ConsensusConfig::new(n, 2, 3).expect("2/3 threshold")
    }

    pub fn unanimous(n: usize) -> ConsensusConfig {
        ConsensusConfig::new(n, 1, 1).expect("unanimous threshold")
    }

    pub fn validator_count(&self) -> usize {
        self.n
    }

    pub fn threshold(&self) -> (u64, u64) {
        (self.threshold_num, self.threshold_den)
    }

    /// Quorum k = ceiling(threshold * n); 1 <= k <= n.
    pub fn quorum(&self) -> usize {
        let num = self.threshold_num as u128 * self.n as u128;
        let den = self.threshold_den as u128;
        num.div_ceil(den) as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("invalid consensus config")]
    InvalidConfig,
    #[error("unknown author `{0}`")]
    UnknownAuthor(String),
    #[error("payload digest mismatch for tx by `{0}`")]
    DigestMismatch(String),
    #[error("pending pool is empty")]
    EmptyPool,
    #[error("below quorum: {have} of {need} distinct valid votes")]
    BelowQuorum { have: usize, need: usize },
    #[error("chain corrupt at height {0}")]
    CorruptChain(u64),
    #[error("unknown validator `{0}`")]
    UnknownValidator(String),
}

/// Integrity verdict; corruption is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrityReport {
    Valid,
    /// Lowest corrupted height.
    CorruptAt(u64),
}

impl IntegrityReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, IntegrityReport::Valid)
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrityReport::Valid => f.write_str("valid"),
            IntegrityReport::CorruptAt(h) => write!(f, "corrupt-at-{h}"),
        }
    }
}

/// Audit-trail filter; all present fields must match.
#[derive(Debug, Clone, Default)]
pub struct AuditFilter {
    pub author: Option<String>,
    pub kind: Option<TxKind>,
    /// Matches component-event transactions whose payload carries this id
    /// as its 16-byte prefix.
    pub component: Option<[u8; 16]>,
}

impl AuditFilter {
    pub fn by_kind(kind: TxKind) -> AuditFilter {
        AuditFilter {
            kind: Some(kind),
            ..AuditFilter::default()
        }
    }

    pub fn by_author(author: impl Into<String>) -> AuditFilter {
        AuditFilter {
            author: Some(author.into()),
            ..AuditFilter::default()
        }
    }

    pub fn by_component(id: [u8; 16]) -> AuditFilter {
        AuditFilter {
            component: Some(id),
            ..AuditFilter::default()
        }
    }

    fn matches(&self, tx: &Transaction) -> bool {
        if let Some(a) = &self.author {
            if tx.author != *a {
                return false;
            }
        }
        if let Some(k) = self.kind {
            if tx.kind != k {
                return false;
            }
        }
        if let Some(id) = &self.component {
            if tx.kind != TxKind::ComponentEvent || tx.payload.len() < 16 || &tx.payload[..16] != id
            {
                return false;
            }
        }
        true
    }
}

/// Single-writer chain state: sealed blocks, the pending pool, and the
/// registered validator and identity sets.
#[derive(Debug, Clone)]
pub struct Ledger {
    config: ConsensusConfig,
    validator_secrets: BTreeMap<String, Digest>,
    blocks: Vec<Block>,
    pending: Vec<Transaction>,
    known_authors: BTreeSet<String>,
    next_tx_id: u64,
}

impl Ledger {
    /// Create a chain with the given validator set. The genesis block is
    /// sealed immediately with every validator's vote. Validator secrets
    /// are derived from `seed`, so a run is reproducible end to end.
    pub fn new(validator_ids: &[&str], config: ConsensusConfig, seed: u64) -> Result<Ledger, LedgerError> {
        if validator_ids.len() != config.validator_count() {
            return Err(LedgerError::InvalidConfig);
        }
        let mut validator_secrets = BTreeMap::new();
        let mut known_authors = BTreeSet::new();
        for id in validator_ids {
            let secret = sha256(format!("validator-secret:{seed}:{id}").as_bytes());
            if validator_secrets.insert((*id).to_string(), secret).is_some() {
                return Err(LedgerError::InvalidConfig);
            }
            known_authors.insert((*id).to_string());
        }
        let mut ledger = Ledger {
            config,
            validator_secrets,
            blocks: Vec::new(),
            pending: Vec::new(),
            known_authors,
            next_tx_id: 1,
        };
        // Genesis: height 0, all-zero prev hash, no transactions, sealed by
        // the full validator set.
        let digest = Block::candidate_digest(0, &Digest::ZERO, &[]);
        let votes: Vec<Vote> = ledger
            .validator_secrets
            .iter()
            .map(|(id, secret)| Vote {
                validator: id.clone(),
                signature: keyed_signature(secret, &digest),
            })
            .collect();
        let mut genesis = Block {
            height: 0,
            prev_hash: Digest::ZERO,
            tx_list: Vec::new(),
            votes,
            block_hash: Digest::ZERO,
        };
        genesis.block_hash = genesis.compute_hash();
        ledger.blocks.push(genesis);
        Ok(ledger)
    }

    pub fn config(&self) -> &ConsensusConfig {
        &self.config
    }

    pub fn quorum(&self) -> usize {
        self.config.quorum()
    }

    pub fn height(&self) -> u64 {
        (self.blocks.len() - 1) as u64
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.tx_list.len()).sum()
    }

    pub fn is_validator(&self, id: &str) -> bool {
        self.validator_secrets.contains_key(id)
    }

    pub fn validators(&self) -> impl Iterator<Item = &str> {
        self.validator_secrets.keys().map(String::as_str)
    }

    pub fn is_known_author(&self, id: &str) -> bool {
        self.known_authors.contains(id)
    }

    /// Register an identity as a valid transaction author. Called by the
    /// identity module once issuance is sealed.
    pub fn register_author(&mut self, id: impl Into<String>) {
        self.known_authors.insert(id.into());
    }

    /// Sign a candidate digest on behalf of a registered validator.
    pub fn sign_as(&self, validator: &str, digest: &Digest) -> Result<Vote, LedgerError> {
        let secret = self
            .validator_secrets
            .get(validator)
            .ok_or_else(|| LedgerError::UnknownValidator(validator.to_string()))?;
        Ok(Vote {
            validator: validator.to_string(),
            signature: keyed_signature(secret, digest),
        })
    }

    /// Digest of the block that would seal the current pending pool.
    pub fn candidate_digest(&self) -> Digest {
        let prev = self.blocks.last().expect("genesis always present");
        Block::candidate_digest(prev.height + 1, &prev.block_hash, &self.pending)
    }

    /// Queue a transaction. Assigns the chain-unique id and returns it.
    /// The author must resolve to a registered identity, except for
    /// identity-issue transactions (bootstrap).
    pub fn append_transaction(&mut self, mut tx: Transaction) -> Result<u64, LedgerError> {
        if sha256(&tx.payload) != tx.payload_digest {
            return Err(LedgerError::DigestMismatch(tx.author));
        }
        if tx.kind != TxKind::IdentityIssue && !self.known_authors.contains(&tx.author) {
            return Err(LedgerError::UnknownAuthor(tx.author));
        }
        tx.id = self.next_tx_id;
        self.next_tx_id += 1;
        let id = tx.id;
        self.pending.push(tx);
        Ok(id)
    }

    /// Count the distinct registered validators in `approvers`.
    pub fn distinct_registered(&self, approvers: &[&str]) -> usize {
        approvers
            .iter()
            .filter(|id| self.validator_secrets.contains_key(**id))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Cheap pre-check used by quorum-gated operations so that nothing is
    /// appended when the vote set cannot seal.
    pub fn check_quorum(&self, approvers: &[&str]) -> Result<(), LedgerError> {
        let have = self.distinct_registered(approvers);
        let need = self.quorum();
        if have < need {
            return Err(LedgerError::BelowQuorum { have, need });
        }
        Ok(())
    }

    /// Seal the pending pool into a new block if the votes reach quorum.
    /// Votes are deduplicated by validator id (counted once) and checked
    /// against the validator's keyed signature over the candidate digest.
    /// On refusal the state is unchanged.
    pub fn seal_block(&mut self, votes: &[Vote]) -> Result<&Block, LedgerError> {
        if self.pending.is_empty() {
            return Err(LedgerError::EmptyPool);
        }
        let digest = self.candidate_digest();
        let mut valid: BTreeMap<&str, &Vote> = BTreeMap::new();
        for vote in votes {
            if let Some(secret) = self.validator_secrets.get(&vote.validator) {
                if keyed_signature(secret, &digest) == vote.signature {
                    valid.entry(vote.validator.as_str()).or_insert(vote);
                }
            }
        }
        let need = self.quorum();
        if valid.len() < need {
            return Err(LedgerError::BelowQuorum {
                have: valid.len(),
                need,
            });
        }
        let prev = self.blocks.last().expect("genesis always present");
        let height = prev.height + 1;
        let prev_hash = prev.block_hash;
        let tx_list = std::mem::take(&mut self.pending);
        let votes: Vec<Vote> = valid.into_values().cloned().collect();
        let mut block = Block {
            height,
            prev_hash,
            tx_list,
            votes,
            block_hash: Digest::ZERO,
        };
        block.block_hash = block.compute_hash();
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Sign with each named validator and seal. Fails with `BelowQuorum`
    /// (leaving the pool intact) if the distinct registered approvers are
    /// short of quorum.
    pub fn approve_and_seal(&mut self, approvers: &[&str]) -> Result<&Block, LedgerError> {
        self.check_quorum(approvers)?;
        if self.pending.is_empty() {
            return Err(LedgerError::EmptyPool);
        }
        let digest = self.candidate_digest();
        let votes: Vec<Vote> = approvers
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter_map(|id| self.sign_as(id, &digest).ok())
            .collect();
        self.seal_block(&votes)
    }

    /// Seal with the full validator set; the common path for simulation
    /// bookkeeping blocks.
    pub fn seal_with_all(&mut self) -> Result<&Block, LedgerError> {
        let ids: Vec<String> = self.validator_secrets.keys().cloned().collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        self.approve_and_seal(&refs)
    }

    /// Walk the chain and report the lowest corrupted height, if any.
    /// A block is corrupt when its hash no longer recomputes from its
    /// contents or its prev_hash does not match its predecessor.
    pub fn verify_chain_integrity(&self) -> IntegrityReport {
        verify_blocks(&self.blocks)
    }

    /// All and only the matching transactions, in chain order.
    pub fn query_audit_trail(&self, filter: &AuditFilter) -> Result<Vec<&Transaction>, LedgerError> {
        if let IntegrityReport::CorruptAt(h) = self.verify_chain_integrity() {
            return Err(LedgerError::CorruptChain(h));
        }
        Ok(self
            .blocks
            .iter()
            .flat_map(|b| b.tx_list.iter())
            .filter(|tx| filter.matches(tx))
            .collect())
    }

    /// Canonical binary dump of the sealed chain.
    pub fn dump_binary(&self) -> Vec<u8> {
        encode_chain(&self.blocks)
    }

    /// Line-oriented human-readable dump for diffing.
    pub fn dump_text(&self) -> String {
        chain_text(&self.blocks)
    }

    #[cfg(test)]
    pub(crate) fn blocks_mut(&mut self) -> &mut Vec<Block> {
        &mut self.blocks
    }
}

fn verify_blocks(blocks: &[Block]) -> IntegrityReport {
    let mut prev_hash = Digest::ZERO;
    for (i, block) in blocks.iter().enumerate() {
        let corrupt = block.height != i as u64
            || block.prev_hash != prev_hash
            || block.compute_hash() != block.block_hash;
        if corrupt {
            return IntegrityReport::CorruptAt(i as u64);
        }
        prev_hash = block.block_hash;
    }
    IntegrityReport::Valid
}

pub fn encode_chain(blocks: &[Block]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&(blocks.len() as u32).to_be_bytes());
    for b in blocks {
        buf.extend_from_slice(&b.canonical_bytes());
    }
    buf
}

fn chain_text(blocks: &[Block]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for b in blocks {
        let _ = writeln!(
            out,
            "block height={} prev={} hash={} txs={} votes={}",
            b.height,
            b.prev_hash,
            b.block_hash,
            b.tx_list.len(),
            b.votes.len()
        );
        for v in &b.votes {
            let _ = writeln!(out, "  vote validator={} sig={}", v.validator, v.signature);
        }
        for tx in &b.tx_list {
            let _ = writeln!(
                out,
                "  tx id={} author={} kind={} payload={} digest={}",
                tx.id,
                tx.author,
                tx.kind,
                hex::encode(&tx.payload),
                tx.payload_digest
            );
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DumpError {
    #[error("truncated dump while reading block {0}")]
    Truncated(u64),
    #[error("invalid tx kind byte {kind} in block {height}")]
    InvalidKind { height: u64, kind: u8 },
    #[error("non-utf8 string in block {0}")]
    BadString(u64),
    #[error("trailing bytes after final block")]
    TrailingBytes,
}

impl DumpError {
    /// Height of the block being parsed when decoding failed; a corrupted
    /// encoding is corruption at that block.
    pub fn height(&self) -> u64 {
        match self {
            DumpError::Truncated(h) | DumpError::BadString(h) => *h,
            DumpError::InvalidKind { height, .. } => *height,
            DumpError::TrailingBytes => u64::MAX,
        }
    }
}

/// A decoded chain dump: sealed blocks only, no validator or pool state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainDump {
    pub blocks: Vec<Block>,
}

impl ChainDump {
    pub fn decode(bytes: &[u8]) -> Result<ChainDump, DumpError> {
        let mut r = Reader {
            bytes,
            pos: 0,
            block: 0,
        };
        let count = r.u32()?;
        let mut blocks = Vec::with_capacity(count as usize);
        for i in 0..count {
            r.block = i as u64;
            blocks.push(r.block_record()?);
        }
        if r.pos != bytes.len() {
            return Err(DumpError::TrailingBytes);
        }
        Ok(ChainDump { blocks })
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_chain(&self.blocks)
    }

    pub fn to_text(&self) -> String {
        chain_text(&self.blocks)
    }

    pub fn verify_integrity(&self) -> IntegrityReport {
        verify_blocks(&self.blocks)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    block: u64,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DumpError> {
        if self.pos + n > self.bytes.len() {
            return Err(DumpError::Truncated(self.block));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, DumpError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DumpError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DumpError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn digest(&mut self) -> Result<Digest, DumpError> {
        Ok(Digest(self.take(32)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, DumpError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| DumpError::BadString(self.block))
    }

    fn block_record(&mut self) -> Result<Block, DumpError> {
        let height = self.u64()?;
        let prev_hash = self.digest()?;
        let tx_count = self.u32()?;
        let mut tx_list = Vec::with_capacity(tx_count as usize);
        for _ in 0..tx_count {
            let id = self.u64()?;
            let author = self.string()?;
            let kind_byte = self.u8()?;
            let kind = TxKind::from_code(kind_byte).ok_or(DumpError::InvalidKind {
                height: self.block,
                kind: kind_byte,
            })?;
            let payload_len = self.u32()? as usize;
            let payload = self.take(payload_len)?.to_vec();
            let payload_digest = self.digest()?;
            tx_list.push(Transaction {
                id,
                author,
                kind,
                payload,
                payload_digest,
            });
        }
        let vote_count = self.u32()?;
        let mut votes = Vec::with_capacity(vote_count as usize);
        for _ in 0..vote_count {
            let validator = self.string()?;
            let signature = self.digest()?;
            votes.push(Vote {
                validator,
                signature,
            });
        }
        let block_hash = self.digest()?;
        Ok(Block {
            height,
            prev_hash,
            tx_list,
            votes,
            block_hash,
        })
    }
}
