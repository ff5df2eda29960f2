//! Consensus-issued, expiring identity certificates.
//!
//! The ledger's validator quorum replaces a trusted third-party issuing
//! authority. Certificates carry the X.509-analog fields, expire after a
//! fixed term, and are verified with multi-factor evidence checked against
//! enrollment records. Every issuance and revocation is anchored on chain.

use crate::event::{kv_get, kv_payload, payload_text};
use crate::hash::{sha256, Digest};
use crate::ledger::{Ledger, LedgerError, Transaction, TxKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub type Tick = u64;

/// Default validity term in simulation ticks; re-verification re-issues
/// with a new serial.
pub const DEFAULT_VALIDITY_TICKS: Tick = 100;

/// Default number of distinct factor kinds required to verify.
pub const DEFAULT_REQUIRED_FACTORS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmId {
    KeyedSha256,
    HmacSha256,
    Ed25519Sim,
}

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::KeyedSha256 => "keyed-sha256",
            AlgorithmId::HmacSha256 => "hmac-sha256",
            AlgorithmId::Ed25519Sim => "ed25519-sim",
        }
    }

    pub fn from_name(name: &str) -> Option<AlgorithmId> {
        match name {
            "keyed-sha256" => Some(AlgorithmId::KeyedSha256),
            "hmac-sha256" => Some(AlgorithmId::HmacSha256),
            "ed25519-sim" => Some(AlgorithmId::Ed25519Sim),
            _ => None,
        }
    }
}

/// Reference to the ledger block/tx that sealed an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRef {
    pub height: u64,
    pub tx_id: u64,
}

impl fmt::Display for LedgerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.height, self.tx_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityCertificate {
    pub version: u32,
    pub serial: u64,
    pub algorithm_id: AlgorithmId,
    pub issuing_record: LedgerRef,
    /// (start tick, end tick); valid while start <= now < end.
    pub validity: (Tick, Tick),
    pub subject_name: String,
    pub public_key: Vec<u8>,
    pub revoked: bool,
}

impl IdentityCertificate {
    pub fn in_window(&self, now: Tick) -> bool {
        now >= self.validity.0 && now < self.validity.1
    }

    /// Fixed-order text form used by golden-file tests and tooling.
    pub fn to_text(&self) -> String {
        format!(
            "version={}\nserial={}\nalgorithm={}\nissuing_record={}\nvalidity={}..{}\nsubject={}\npublic_key={}\n",
            self.version,
            self.serial,
            self.algorithm_id.name(),
            self.issuing_record,
            self.validity.0,
            self.validity.1,
            self.subject_name,
            hex::encode(&self.public_key),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorKind {
    KeyProof,
    BiometricToken,
    OneTimeCode,
}

impl FactorKind {
    pub fn name(self) -> &'static str {
        match self {
            FactorKind::KeyProof => "key-proof",
            FactorKind::BiometricToken => "biometric-token",
            FactorKind::OneTimeCode => "one-time-code",
        }
    }
}

/// Presented verification evidence; biometrics are pre-registered byte
/// tokens at simulation grade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthenticationFactor {
    pub factor_kind: FactorKind,
    pub evidence: Vec<u8>,
}

impl AuthenticationFactor {
    pub fn new(factor_kind: FactorKind, evidence: Vec<u8>) -> Result<AuthenticationFactor, IdentityError> {
        if evidence.is_empty() {
            return Err(IdentityError::EmptyEvidence);
        }
        Ok(AuthenticationFactor {
            factor_kind,
            evidence,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CertificateRequest {
    pub version: u32,
    pub algorithm_id: AlgorithmId,
    pub subject_name: String,
    pub public_key: Vec<u8>,
    pub validity_ticks: Tick,
    /// Enrollment evidence, stored off-chain in the registry.
    pub factors: Vec<AuthenticationFactor>,
}

impl CertificateRequest {
    pub fn new(subject: impl Into<String>, public_key: Vec<u8>) -> CertificateRequest {
        CertificateRequest {
            version: 3,
            algorithm_id: AlgorithmId::KeyedSha256,
            subject_name: subject.into(),
            public_key,
            validity_ticks: DEFAULT_VALIDITY_TICKS,
            factors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyFailure {
    Revoked,
    Expired,
    ChainMismatch,
    FactorMismatch,
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerifyFailure::Revoked => "revoked",
            VerifyFailure::Expired => "expired",
            VerifyFailure::ChainMismatch => "chain-mismatch",
            VerifyFailure::FactorMismatch => "factor-mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    Verified,
    Failure(VerifyFailure),
}

impl VerifyOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(self, VerifyOutcome::Verified)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("subject `{0}` already holds a live certificate")]
    DuplicateSubject(String),
    #[error("authentication factor evidence must be non-empty")]
    EmptyEvidence,
    #[error("no certificate with serial {0}")]
    UnknownSerial(u64),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Result of a revocation; revoking twice is an idempotent success that is
/// logged only once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevokeOutcome {
    Revoked,
    AlreadyRevoked,
}

/// Registry of issued certificates and enrollment factor evidence.
///
/// Certificates are immutable after issuance except the revoked flag,
/// which changes only via ledger-anchored revocation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityRegistry {
    certs: BTreeMap<u64, IdentityCertificate>,
    factors: BTreeMap<String, BTreeMap<FactorKind, Vec<u8>>>,
    next_serial: u64,
}

impl IdentityRegistry {
    pub fn new() -> IdentityRegistry {
        IdentityRegistry {
            certs: BTreeMap::new(),
            factors: BTreeMap::new(),
            next_serial: 1,
        }
    }

    pub fn certificates(&self) -> &BTreeMap<u64, IdentityCertificate> {
        &self.certs
    }

    pub fn cert_by_serial(&self, serial: u64) -> Option<&IdentityCertificate> {
        self.certs.get(&serial)
    }

    /// The unrevoked, in-window certificate for a subject, if any.
    pub fn live_cert(&self, subject: &str, now: Tick) -> Option<&IdentityCertificate> {
        self.certs
            .values()
            .find(|c| c.subject_name == subject && !c.revoked && c.in_window(now))
    }

    pub fn registered_factors(&self, subject: &str) -> Option<&BTreeMap<FactorKind, Vec<u8>>> {
        self.factors.get(subject)
    }

    /// Issue a certificate, anchored by an identity-issue transaction that
    /// the given approvers seal. All seven certificate fields must be
    /// derivable from the request; on below-quorum nothing is anchored.
    pub fn issue_certificate(
        &mut self,
        ledger: &mut Ledger,
        request: &CertificateRequest,
        approvers: &[&str],
        now: Tick,
    ) -> Result<IdentityCertificate, IdentityError> {
        if request.subject_name.is_empty() {
            return Err(IdentityError::MissingField("subject_name"));
        }
        if request.public_key.is_empty() {
            return Err(IdentityError::MissingField("public_key"));
        }
        if request.validity_ticks == 0 {
            return Err(IdentityError::MissingField("validity"));
        }
        if self.live_cert(&request.subject_name, now).is_some() {
            return Err(IdentityError::DuplicateSubject(request.subject_name.clone()));
        }
        ledger.check_quorum(approvers)?;

        let serial = self.next_serial;
        let validity = (now, now + request.validity_ticks);
        let payload = kv_payload(&[
            ("event", "identity-issue"),
            ("version", &request.version.to_string()),
            ("serial", &serial.to_string()),
            ("algorithm", request.algorithm_id.name()),
            ("validity", &format!("{}..{}", validity.0, validity.1)),
            ("subject", &request.subject_name),
            ("public_key", &hex::encode(&request.public_key)),
        ]);
        let tx = Transaction::new(request.subject_name.clone(), TxKind::IdentityIssue, payload);
        let tx_id = ledger.append_transaction(tx)?;
        let block = ledger.approve_and_seal(approvers)?;
        let issuing_record = LedgerRef {
            height: block.height,
            tx_id,
        };

        let cert = IdentityCertificate {
            version: request.version,
            serial,
            algorithm_id: request.algorithm_id,
            issuing_record,
            validity,
            subject_name: request.subject_name.clone(),
            public_key: request.public_key.clone(),
            revoked: false,
        };
        self.next_serial += 1;
        self.certs.insert(serial, cert.clone());
        let enrolled = self.factors.entry(request.subject_name.clone()).or_default();
        for f in &request.factors {
            enrolled.insert(f.factor_kind, f.evidence.clone());
        }
        ledger.register_author(&request.subject_name);
        Ok(cert)
    }

    /// Verify a certificate against the chain and `required` distinct
    /// factor kinds. Failures are values, not errors.
    pub fn verify_identity(
        &self,
        cert: &IdentityCertificate,
        presented: &[AuthenticationFactor],
        required: usize,
        now: Tick,
        ledger: &Ledger,
    ) -> VerifyOutcome {
        // The registry copy is the source of truth for the revoked flag.
        let current = self.certs.get(&cert.serial).unwrap_or(cert);
        if current.revoked {
            return VerifyOutcome::Failure(VerifyFailure::Revoked);
        }
        if !current.in_window(now) {
            return VerifyOutcome::Failure(VerifyFailure::Expired);
        }
        if !issuing_record_checks_out(current, ledger) {
            return VerifyOutcome::Failure(VerifyFailure::ChainMismatch);
        }
        let Some(enrolled) = self.factors.get(&current.subject_name) else {
            return VerifyOutcome::Failure(VerifyFailure::FactorMismatch);
        };
        let mut matched: Vec<FactorKind> = presented
            .iter()
            .filter(|f| enrolled.get(&f.factor_kind) == Some(&f.evidence))
            .map(|f| f.factor_kind)
            .collect();
        matched.sort();
        matched.dedup();
        if matched.len() >= required {
            VerifyOutcome::Verified
        } else {
            VerifyOutcome::Failure(VerifyFailure::FactorMismatch)
        }
    }

    /// Revoke by serial with quorum approval. Idempotent; the second
    /// revocation anchors nothing.
    pub fn revoke_certificate(
        &mut self,
        ledger: &mut Ledger,
        serial: u64,
        approvers: &[&str],
    ) -> Result<RevokeOutcome, IdentityError> {
        let cert = self
            .certs
            .get(&serial)
            .ok_or(IdentityError::UnknownSerial(serial))?;
        if cert.revoked {
            return Ok(RevokeOutcome::AlreadyRevoked);
        }
        ledger.check_quorum(approvers)?;
        let payload = kv_payload(&[
            ("event", "identity-revoke"),
            ("serial", &serial.to_string()),
            ("subject", &cert.subject_name),
        ]);
        let author = cert.subject_name.clone();
        ledger.append_transaction(Transaction::new(author, TxKind::Generic, payload))?;
        ledger.approve_and_seal(approvers)?;
        self.certs.get_mut(&serial).expect("checked above").revoked = true;
        Ok(RevokeOutcome::Revoked)
    }

    /// Rebuild certificate state from the audit trail alone. Factor
    /// enrollment evidence is off-chain and not reconstructed.
    pub fn replay(ledger: &Ledger) -> Result<IdentityRegistry, LedgerError> {
        let mut registry = IdentityRegistry::new();
        for block in ledger.blocks() {
            for tx in &block.tx_list {
                match tx.kind {
                    TxKind::IdentityIssue => {
                        let Some(body) = payload_text(&tx.payload) else {
                            continue;
                        };
                        if kv_get(body, "event") != Some("identity-issue") {
                            continue;
                        }
                        let Some(cert) = cert_from_payload(body, block.height, tx.id) else {
                            continue;
                        };
                        registry.next_serial = registry.next_serial.max(cert.serial + 1);
                        registry.certs.insert(cert.serial, cert);
                    }
                    TxKind::Generic => {
                        let Some(body) = payload_text(&tx.payload) else {
                            continue;
                        };
                        if kv_get(body, "event") != Some("identity-revoke") {
                            continue;
                        }
                        if let Some(serial) = kv_get(body, "serial").and_then(|s| s.parse().ok()) {
                            if let Some(cert) = registry.certs.get_mut(&serial) {
                                cert.revoked = true;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(registry)
    }

    /// Deterministic enrollment evidence used by simulations: a keyed hash
    /// of (secret seed, subject, factor kind).
    pub fn derive_evidence(seed: u64, subject: &str, kind: FactorKind) -> Vec<u8> {
        sha256(format!("factor:{seed}:{subject}:{}", kind.name()).as_bytes())
            .as_bytes()
            .to_vec()
    }
}

fn issuing_record_checks_out(cert: &IdentityCertificate, ledger: &Ledger) -> bool {
    let Some(block) = ledger.blocks().get(cert.issuing_record.height as usize) else {
        return false;
    };
    let Some(tx) = block.tx_list.iter().find(|t| t.id == cert.issuing_record.tx_id) else {
        return false;
    };
    if tx.kind != TxKind::IdentityIssue {
        return false;
    }
    let Some(body) = payload_text(&tx.payload) else {
        return false;
    };
    kv_get(body, "subject") == Some(cert.subject_name.as_str())
        && kv_get(body, "serial") == Some(cert.serial.to_string().as_str())
}

fn cert_from_payload(body: &str, height: u64, tx_id: u64) -> Option<IdentityCertificate> {
    let validity = kv_get(body, "validity")?;
    let (start, end) = validity.split_once("..")?;
    Some(IdentityCertificate {
        version: kv_get(body, "version")?.parse().ok()?,
        serial: kv_get(body, "serial")?.parse().ok()?,
        algorithm_id: AlgorithmId::from_name(kv_get(body, "algorithm")?)?,
        issuing_record: LedgerRef { height, tx_id },
        validity: (start.parse().ok()?, end.parse().ok()?),
        subject_name: kv_get(body, "subject")?.to_string(),
        public_key: hex::decode(kv_get(body, "public_key")?).ok()?,
        revoked: false,
    })
}

/// `Digest` of a certificate's text form; handy as a stable reference.
pub fn certificate_digest(cert: &IdentityCertificate) -> Digest {
    sha256(cert.to_text().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::ConsensusConfig;

    fn setup() -> (Ledger, IdentityRegistry) {
        let ledger = Ledger::new(
            &["v0", "v1", "v2", "v3"],
            ConsensusConfig::two_thirds(4),
            7,
        )
        .unwrap();
        (ledger, IdentityRegistry::new())
    }

    fn request(subject: &str) -> CertificateRequest {
        let mut req = CertificateRequest::new(subject, vec![1, 2, 3]);
        req.factors = vec![
            AuthenticationFactor::new(
                FactorKind::KeyProof,
                IdentityRegistry::derive_evidence(7, subject, FactorKind::KeyProof),
            )
            .unwrap(),
            AuthenticationFactor::new(
                FactorKind::OneTimeCode,
                IdentityRegistry::derive_evidence(7, subject, FactorKind::OneTimeCode),
            )
            .unwrap(),
        ];
        req
    }

    fn good_factors(subject: &str) -> Vec<AuthenticationFactor> {
        vec![
            AuthenticationFactor {
                factor_kind: FactorKind::KeyProof,
                evidence: IdentityRegistry::derive_evidence(7, subject, FactorKind::KeyProof),
            },
            AuthenticationFactor {
                factor_kind: FactorKind::OneTimeCode,
                evidence: IdentityRegistry::derive_evidence(7, subject, FactorKind::OneTimeCode),
            },
        ]
    }

    const QUORUM: [&str; 3] = ["v0", "v1", "v2"];

    #[test]
    fn issuance_anchors_on_chain() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        assert_eq!(cert.serial, 1);
        assert_eq!(cert.issuing_record.height, 1);
        let block = &ledger.blocks()[cert.issuing_record.height as usize];
        assert!(block.tx_list.iter().any(|t| t.id == cert.issuing_record.tx_id
            && t.kind == TxKind::IdentityIssue));
        assert!(ledger.is_known_author("alice"));
    }

    #[test]
    fn missing_public_key_rejected() {
        let (mut ledger, mut registry) = setup();
        let mut req = request("alice");
        req.public_key.clear();
        assert_eq!(
            registry.issue_certificate(&mut ledger, &req, &QUORUM, 0),
            Err(IdentityError::MissingField("public_key"))
        );
    }

    #[test]
    fn below_quorum_anchors_nothing() {
        let (mut ledger, mut registry) = setup();
        let err = registry
            .issue_certificate(&mut ledger, &request("alice"), &["v0", "v1"], 0)
            .unwrap_err();
        assert!(matches!(
            err,
            IdentityError::Ledger(LedgerError::BelowQuorum { have: 2, need: 3 })
        ));
        assert_eq!(ledger.height(), 0);
        assert_eq!(ledger.pending_count(), 0);
        assert!(registry.certificates().is_empty());
    }

    #[test]
    fn duplicate_live_subject_rejected() {
        let (mut ledger, mut registry) = setup();
        registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        assert!(matches!(
            registry.issue_certificate(&mut ledger, &request("alice"), &QUORUM, 1),
            Err(IdentityError::DuplicateSubject(_))
        ));
        // After expiry, re-issuance gets a fresh serial.
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, DEFAULT_VALIDITY_TICKS + 1)
            .unwrap();
        assert_eq!(cert.serial, 2);
    }

    #[test]
    fn verify_happy_path() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        let outcome = registry.verify_identity(&cert, &good_factors("alice"), 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Verified);
    }

    #[test]
    fn expired_certificate_fails() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        let outcome = registry.verify_identity(
            &cert,
            &good_factors("alice"),
            2,
            cert.validity.1 + 1,
            &ledger,
        );
        assert_eq!(outcome, VerifyOutcome::Failure(VerifyFailure::Expired));
    }

    #[test]
    fn factor_mismatch_fails() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        let mut factors = good_factors("alice");
        factors[1].evidence = b"wrong".to_vec();
        let outcome = registry.verify_identity(&cert, &factors, 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Failure(VerifyFailure::FactorMismatch));
    }

    #[test]
    fn impersonator_evidence_fails() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        // mallory presents evidence derived for herself, not for alice.
        let forged = vec![
            AuthenticationFactor {
                factor_kind: FactorKind::KeyProof,
                evidence: IdentityRegistry::derive_evidence(7, "mallory", FactorKind::KeyProof),
            },
            AuthenticationFactor {
                factor_kind: FactorKind::OneTimeCode,
                evidence: IdentityRegistry::derive_evidence(7, "mallory", FactorKind::OneTimeCode),
            },
        ];
        let outcome = registry.verify_identity(&cert, &forged, 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Failure(VerifyFailure::FactorMismatch));
    }

    #[test]
    fn chain_mismatch_detected() {
        let (mut ledger, mut registry) = setup();
        let mut cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        cert.serial = 99; // not the registry's record; points nowhere
        let outcome = registry.verify_identity(&cert, &good_factors("alice"), 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Failure(VerifyFailure::ChainMismatch));
    }

    #[test]
    fn revocation_is_anchored_and_idempotent() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        assert_eq!(
            registry
                .revoke_certificate(&mut ledger, cert.serial, &QUORUM)
                .unwrap(),
            RevokeOutcome::Revoked
        );
        let outcome = registry.verify_identity(&cert, &good_factors("alice"), 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Failure(VerifyFailure::Revoked));

        let height_before = ledger.height();
        assert_eq!(
            registry
                .revoke_certificate(&mut ledger, cert.serial, &QUORUM)
                .unwrap(),
            RevokeOutcome::AlreadyRevoked
        );
        assert_eq!(ledger.height(), height_before, "second revoke logs nothing");
    }

    #[test]
    fn sub_quorum_revoke_leaves_cert_live() {
        let (mut ledger, mut registry) = setup();
        let cert = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        assert!(registry
            .revoke_certificate(&mut ledger, cert.serial, &["v0"])
            .is_err());
        let outcome = registry.verify_identity(&cert, &good_factors("alice"), 2, 10, &ledger);
        assert_eq!(outcome, VerifyOutcome::Verified);
    }

    #[test]
    fn replay_reconstructs_certificates() {
        let (mut ledger, mut registry) = setup();
        let a = registry
            .issue_certificate(&mut ledger, &request("alice"), &QUORUM, 0)
            .unwrap();
        registry
            .issue_certificate(&mut ledger, &request("bob"), &QUORUM, 0)
            .unwrap();
        registry
            .revoke_certificate(&mut ledger, a.serial, &QUORUM)
            .unwrap();
        let replayed = IdentityRegistry::replay(&ledger).unwrap();
        assert_eq!(replayed.certificates(), registry.certificates());
    }

    #[test]
    fn certificate_text_form_golden() {
        let (mut ledger, mut registry) = setup();
        let mut req = request("alice");
        req.public_key = vec![0xde, 0xad, 0xbe, 0xef];
        let cert = registry
            .issue_certificate(&mut ledger, &req, &QUORUM, 0)
            .unwrap();
        assert_eq!(
            cert.to_text(),
            "version=3\n\
             serial=1\n\
             algorithm=keyed-sha256\n\
             issuing_record=1/1\n\
             validity=0..100\n\
             subject=alice\n\
             public_key=deadbeef\n"
        );
    }
}
