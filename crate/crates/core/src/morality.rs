//! Anchored ethics policies and the voluntary-exchange morality predicate.
//!
//! Ethics here means an entity's fundamental value set, expressed as ordered
//! guard rules and committed to the ledger by digest so any later mutation
//! is detectable. Morality is the narrower fixed predicate: an exchange is
//! moral iff it is voluntary — no force, no fraud (declared terms equal
//! actual terms), every party consents, and no third party has the outcome
//! imposed on it. Self-regarding choices that affect no other volitional
//! entity are moral by definition.

use crate::event::payload_text;
use crate::hash::{sha256, Digest};
use crate::identity::LedgerRef;
use crate::ledger::{Ledger, LedgerError, Transaction, TxKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleVerdict {
    Allow,
    Forbid,
}

/// One ethics rule: a conjunction of `attr=value` guards and a verdict.
/// The guard language is deliberately tiny; no general predicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthicsRule {
    pub id: String,
    pub guard: Vec<(String, String)>,
    pub verdict: RuleVerdict,
}

impl EthicsRule {
    pub fn matches(&self, attrs: &BTreeMap<String, String>) -> bool {
        self.guard
            .iter()
            .all(|(k, v)| attrs.get(k).map(String::as_str) == Some(v.as_str()))
    }
}

/// Where a policy is committed on chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyAnchor {
    pub ledger_ref: LedgerRef,
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthicsPolicy {
    pub rules: Vec<EthicsRule>,
    pub anchor: Option<PolicyAnchor>,
}

impl EthicsPolicy {
    pub fn new(rules: Vec<EthicsRule>) -> EthicsPolicy {
        EthicsPolicy {
            rules,
            anchor: None,
        }
    }

    /// Canonical serialization: one `rule` line per rule, LF endings.
    /// These exact bytes are what gets digested and anchored.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str("rule ");
            out.push_str(&rule.id);
            out.push_str(": when ");
            for (i, (k, v)) in rule.guard.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(k);
                out.push('=');
                out.push_str(v);
            }
            out.push_str(" then ");
            out.push_str(match rule.verdict {
                RuleVerdict::Allow => "allow",
                RuleVerdict::Forbid => "forbid",
            });
            out.push('\n');
        }
        out
    }

    pub fn digest(&self) -> Digest {
        sha256(self.canonical_text().as_bytes())
    }

    /// Parse the policy file format; the exact inverse of
    /// `canonical_text`.
    pub fn parse(text: &str) -> Result<EthicsPolicy, MoralityError> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let parse_err = || MoralityError::MalformedPolicy {
                line: lineno + 1,
                text: line.to_string(),
            };
            let rest = line.strip_prefix("rule ").ok_or_else(parse_err)?;
            let (id, rest) = rest.split_once(": when ").ok_or_else(parse_err)?;
            let (guard_text, verdict_text) = rest.rsplit_once(" then ").ok_or_else(parse_err)?;
            let verdict = match verdict_text {
                "allow" => RuleVerdict::Allow,
                "forbid" => RuleVerdict::Forbid,
                _ => return Err(parse_err()),
            };
            let mut guard = Vec::new();
            for clause in guard_text.split(',') {
                let (k, v) = clause.split_once('=').ok_or_else(parse_err)?;
                if k.is_empty() || v.is_empty() {
                    return Err(parse_err());
                }
                guard.push((k.to_string(), v.to_string()));
            }
            rules.push(EthicsRule {
                id: id.to_string(),
                guard,
                verdict,
            });
        }
        Ok(EthicsPolicy::new(rules))
    }

    /// First matching rule's verdict, if any rule matches.
    pub fn evaluate(&self, attrs: &BTreeMap<String, String>) -> Option<(&EthicsRule, RuleVerdict)> {
        self.rules
            .iter()
            .find(|r| r.matches(attrs))
            .map(|r| (r, r.verdict))
    }

    /// Does any rule forbid these action attributes?
    pub fn forbids(&self, attrs: &BTreeMap<String, String>) -> Option<&EthicsRule> {
        match self.evaluate(attrs) {
            Some((rule, RuleVerdict::Forbid)) => Some(rule),
            _ => None,
        }
    }
}

/// Opaque term record; equality is byte equality of this canonical form.
pub type Terms = Vec<u8>;

/// A proposed exchange between parties, as the morality predicate sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionProposal {
    pub parties: Vec<String>,
    /// One entry per party, same order.
    pub consents: Vec<bool>,
    pub declared_terms: Terms,
    pub actual_terms: Terms,
    /// Physical coercion present.
    pub force_flag: bool,
    /// Declared by the scenario, never inferred.
    pub affected_third_parties: Vec<String>,
}

impl TransactionProposal {
    /// A fully voluntary two-party exchange; useful as a test/scenario base.
    pub fn voluntary(a: impl Into<String>, b: impl Into<String>, terms: &[u8]) -> TransactionProposal {
        TransactionProposal {
            parties: vec![a.into(), b.into()],
            consents: vec![true, true],
            declared_terms: terms.to_vec(),
            actual_terms: terms.to_vec(),
            force_flag: false,
            affected_third_parties: Vec::new(),
        }
    }

    /// A single-party, self-regarding act.
    pub fn self_regarding(agent: impl Into<String>) -> TransactionProposal {
        TransactionProposal {
            parties: vec![agent.into()],
            consents: vec![true],
            declared_terms: Vec::new(),
            actual_terms: Vec::new(),
            force_flag: false,
            affected_third_parties: Vec::new(),
        }
    }
}

/// Why a proposal is immoral; the first violated condition in the fixed
/// order force, fraud, involuntary, third-party-imposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImmoralReason {
    Force,
    Fraud,
    Involuntary,
    ThirdPartyImposition,
}

impl fmt::Display for ImmoralReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ImmoralReason::Force => "force",
            ImmoralReason::Fraud => "fraud",
            ImmoralReason::Involuntary => "involuntary",
            ImmoralReason::ThirdPartyImposition => "third-party-imposition",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoralVerdict {
    Moral,
    Immoral(ImmoralReason),
}

impl MoralVerdict {
    pub fn is_moral(&self) -> bool {
        matches!(self, MoralVerdict::Moral)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoralityError {
    #[error("malformed proposal: {0}")]
    MalformedProposal(&'static str),
    #[error("policy line {line} is malformed: `{text}`")]
    MalformedPolicy { line: usize, text: String },
    #[error("policy claims no anchor")]
    Unanchored,
    #[error("anchor not found on chain")]
    AnchorNotFound,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Classify a proposal. A pure function: same proposal, same verdict.
pub fn classify_transaction(p: &TransactionProposal) -> Result<MoralVerdict, MoralityError> {
    classify_inner(p, None)
}

/// Classification for force-exempt agent classes (police/military premise):
/// the force clause is replaced by the ethics policy's guard rules over the
/// action attributes; fraud, consent, and third-party clauses still apply.
pub fn classify_force_exempt(
    p: &TransactionProposal,
    attrs: &BTreeMap<String, String>,
    policy: &EthicsPolicy,
) -> Result<MoralVerdict, MoralityError> {
    classify_inner(p, Some((attrs, policy)))
}

fn classify_inner(
    p: &TransactionProposal,
    exemption: Option<(&BTreeMap<String, String>, &EthicsPolicy)>,
) -> Result<MoralVerdict, MoralityError> {
    if p.parties.is_empty() {
        return Err(MoralityError::MalformedProposal("parties must be non-empty"));
    }
    if p.consents.len() != p.parties.len() {
        return Err(MoralityError::MalformedProposal(
            "consents must have one entry per party",
        ));
    }
    // Self-regarding: choices that affect no other volitional entity.
    if p.parties.len() == 1 && p.affected_third_parties.is_empty() {
        return Ok(MoralVerdict::Moral);
    }
    match exemption {
        None => {
            if p.force_flag {
                return Ok(MoralVerdict::Immoral(ImmoralReason::Force));
            }
        }
        Some((attrs, policy)) => {
            // Force clause substituted by the anchored value set.
            if policy.forbids(attrs).is_some() {
                return Ok(MoralVerdict::Immoral(ImmoralReason::Force));
            }
        }
    }
    if p.declared_terms != p.actual_terms {
        return Ok(MoralVerdict::Immoral(ImmoralReason::Fraud));
    }
    if !p.consents.iter().all(|c| *c) {
        return Ok(MoralVerdict::Immoral(ImmoralReason::Involuntary));
    }
    if !p.affected_third_parties.is_empty() {
        return Ok(MoralVerdict::Immoral(ImmoralReason::ThirdPartyImposition));
    }
    Ok(MoralVerdict::Moral)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EthicsVerdict {
    Unchanged,
    Tampered,
}

/// Commit a policy digest to the chain via an ethics-anchor transaction.
/// Returns the anchored policy digest, which doubles as the policy id.
pub fn anchor_ethics(
    policy: &mut EthicsPolicy,
    ledger: &mut Ledger,
    author: &str,
    approvers: &[&str],
) -> Result<Digest, MoralityError> {
    ledger.check_quorum(approvers)?;
    let payload = policy.canonical_text().into_bytes();
    let digest = sha256(&payload);
    let tx = Transaction::new(author, TxKind::EthicsAnchor, payload);
    let tx_id = ledger.append_transaction(tx)?;
    let block = ledger.approve_and_seal(approvers)?;
    policy.anchor = Some(PolicyAnchor {
        ledger_ref: LedgerRef {
            height: block.height,
            tx_id,
        },
        digest,
    });
    Ok(digest)
}

/// Recompute the policy digest and compare with the anchored bytes on
/// chain. `Tampered` is a value; a missing or non-ethics anchor is an error.
pub fn verify_ethics_unchanged(
    policy: &EthicsPolicy,
    ledger: &Ledger,
) -> Result<EthicsVerdict, MoralityError> {
    let anchor = policy.anchor.as_ref().ok_or(MoralityError::Unanchored)?;
    let block = ledger
        .blocks()
        .get(anchor.ledger_ref.height as usize)
        .ok_or(MoralityError::AnchorNotFound)?;
    let tx = block
        .tx_list
        .iter()
        .find(|t| t.id == anchor.ledger_ref.tx_id)
        .ok_or(MoralityError::AnchorNotFound)?;
    if tx.kind != TxKind::EthicsAnchor {
        return Err(MoralityError::AnchorNotFound);
    }
    if policy.digest() == tx.payload_digest {
        Ok(EthicsVerdict::Unchanged)
    } else {
        Ok(EthicsVerdict::Tampered)
    }
}

/// Find an anchored policy digest on chain (used by compliance checks).
pub fn ethics_anchor_exists(ledger: &Ledger, digest: &Digest) -> bool {
    ledger.blocks().iter().any(|b| {
        b.tx_list
            .iter()
            .any(|t| t.kind == TxKind::EthicsAnchor && t.payload_digest == *digest)
    })
}

/// A small allow/forbid value set used by simulations and tests: forbids
/// strikes on civilians and tampering with safeguards, allows the rest of
/// the enumerated benign actions.
pub fn baseline_policy() -> EthicsPolicy {
    EthicsPolicy::parse(
        "rule no-civilian-strike: when action=strike,target=civilian then forbid\n\
         rule no-safeguard-tamper: when action=tamper,target=safeguard then forbid\n\
         rule no-unbounded-replication: when action=replicate,scope=unbounded then forbid\n\
         rule allow-exchange: when action=exchange then allow\n\
         rule allow-compute: when action=compute then allow\n",
    )
    .expect("baseline policy parses")
}

/// Render an anchored-policy summary for payload text.
pub fn policy_summary(policy: &EthicsPolicy) -> String {
    match &policy.anchor {
        Some(a) => format!("digest={} anchor={}", policy.digest(), a.ledger_ref),
        None => format!("digest={} anchor=-", policy.digest()),
    }
}

/// Extract the rule text from an ethics-anchor transaction payload.
pub fn anchored_policy_text(tx_payload: &[u8]) -> Option<&str> {
    payload_text(tx_payload)
}
