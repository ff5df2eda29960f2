//! Smart contracts and their specializations: technology licenses, metered
//! compliance tokens, ostracism petitions, and generation-unlock vaults.
//!
//! A contract is an ordered list of machine-checkable clauses evaluated
//! against the sealed chain and module registries, with all-or-nothing
//! effects. Licenses gate access to registered technology behind identity,
//! conformity, ethics, and ostracism checks. Tokens meter resource requests
//! and flag exponential growth. Petitions enact resource denial at a
//! signature threshold. Vaults hold next-generation capability behind a
//! k-of-n custodian quorum and a verified successor value anchor.

use crate::behavior::WorldState;
use crate::components::{ComponentId, ComponentRegistry, ConfigurationItem};
use crate::event::kv_payload;
use crate::hash::Digest;
use crate::identity::{AuthenticationFactor, IdentityCertificate, IdentityRegistry, Tick};
use crate::ledger::{Ledger, LedgerError, Transaction, TxKind};
use crate::morality::{verify_ethics_unchanged, EthicsPolicy, EthicsVerdict};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub use crate::probability::{hack_probability, ProbabilityError};

/// Default flag parameters: a spend sequence is flagged when each of the
/// last `window` requests reaches `ratio` times its predecessor.
pub const DEFAULT_GROWTH_RATIO: f64 = 2.0;
pub const DEFAULT_GROWTH_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractState {
    Open,
    Executed,
    Breached,
    Expired,
}

/// Machine-checkable obligation; names bind to these built-ins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Obligation {
    OnChainTxExists {
        kind: TxKind,
        author: Option<String>,
    },
    LicenseHeld {
        licensee: String,
        technology: ComponentId,
    },
    ConformityDeclared {
        subject: String,
    },
    EthicsAnchored {
        digest: Digest,
    },
    IdentityValid {
        subject: String,
    },
}

impl Obligation {
    pub fn name(&self) -> &'static str {
        match self {
            Obligation::OnChainTxExists { .. } => "on-chain-tx-exists",
            Obligation::LicenseHeld { .. } => "license-held",
            Obligation::ConformityDeclared { .. } => "conformity-declared",
            Obligation::EthicsAnchored { .. } => "ethics-anchored",
            Obligation::IdentityValid { .. } => "identity-valid",
        }
    }

    fn args(&self) -> String {
        match self {
            Obligation::OnChainTxExists { kind, author } => match author {
                Some(a) => format!("kind={},author={a}", kind.name()),
                None => format!("kind={}", kind.name()),
            },
            Obligation::LicenseHeld {
                licensee,
                technology,
            } => format!("licensee={licensee},technology={technology}"),
            Obligation::ConformityDeclared { subject } => format!("subject={subject}"),
            Obligation::EthicsAnchored { digest } => format!("digest={digest}"),
            Obligation::IdentityValid { subject } => format!("subject={subject}"),
        }
    }

    pub fn verify(&self, ctx: &ObligationCtx) -> bool {
        match self {
            Obligation::OnChainTxExists { kind, author } => {
                ctx.ledger.blocks().iter().any(|b| {
                    b.tx_list.iter().any(|tx| {
                        tx.kind == *kind
                            && author.as_ref().is_none_or(|a| tx.author == *a)
                    })
                })
            }
            Obligation::LicenseHeld {
                licensee,
                technology,
            } => ctx.licenses.holds(licensee, technology),
            Obligation::ConformityDeclared { subject } => {
                let owned: Vec<&ConfigurationItem> = ctx
                    .cis
                    .values()
                    .filter(|ci| ci.owner.as_deref() == Some(subject))
                    .collect();
                !owned.is_empty() && owned.iter().all(|ci| ci.conformity_declared)
            }
            Obligation::EthicsAnchored { digest } => {
                crate::morality::ethics_anchor_exists(ctx.ledger, digest)
            }
            Obligation::IdentityValid { subject } => ctx
                .identities
                .live_cert(subject, ctx.now)
                .is_some(),
        }
    }
}

/// Read-only world the obligations are checked against. Contract
/// evaluation sees the sealed chain only, never the pending pool.
pub struct ObligationCtx<'a> {
    pub ledger: &'a Ledger,
    pub identities: &'a IdentityRegistry,
    pub cis: &'a BTreeMap<ComponentId, ConfigurationItem>,
    pub licenses: &'a LicenseBook,
    pub now: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub id: String,
    pub responsible: String,
    pub obligation: Obligation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmartContract {
    pub contract_id: u64,
    pub parties: Vec<String>,
    pub clauses: Vec<Clause>,
    pub state: ContractState,
    /// World-state deltas applied atomically on execution.
    pub effects: Vec<(String, String)>,
}

impl SmartContract {
    pub fn new(contract_id: u64, parties: Vec<String>, clauses: Vec<Clause>) -> SmartContract {
        SmartContract {
            contract_id,
            parties,
            clauses,
            state: ContractState::Open,
            effects: Vec::new(),
        }
    }

    /// Contract file format: one `clause` line per clause.
    pub fn clauses_to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            out.push_str(&format!(
                "clause {}: party={} requires {}({})\n",
                c.id,
                c.responsible,
                c.obligation.name(),
                c.obligation.args()
            ));
        }
        out
    }

    pub fn clauses_from_text(text: &str) -> Result<Vec<Clause>, ContractError> {
        let mut clauses = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ContractError::ParseClause {
                line: idx + 1,
                message,
            };
            let rest = line
                .strip_prefix("clause ")
                .ok_or_else(|| err("expected `clause <id>: ...`".to_string()))?;
            let (id, rest) = rest
                .split_once(": party=")
                .ok_or_else(|| err("expected `: party=`".to_string()))?;
            let (party, rest) = rest
                .split_once(" requires ")
                .ok_or_else(|| err("expected ` requires `".to_string()))?;
            let (name, args) = rest
                .strip_suffix(')')
                .and_then(|r| r.split_once('('))
                .ok_or_else(|| err("expected `<name>(<args>)`".to_string()))?;
            let kv: BTreeMap<&str, &str> = if args.is_empty() {
                BTreeMap::new()
            } else {
                args.split(',')
                    .map(|p| {
                        p.split_once('=')
                            .ok_or_else(|| err(format!("bad argument `{p}`")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let get = |k: &str| {
                kv.get(k)
                    .copied()
                    .ok_or_else(|| err(format!("{name} requires `{k}=`")))
            };
            let obligation = match name {
                "on-chain-tx-exists" => {
                    let kind_name = get("kind")?;
                    let kind = TxKind::ALL
                        .into_iter()
                        .find(|k| k.name() == kind_name)
                        .ok_or_else(|| err(format!("unknown tx kind `{kind_name}`")))?;
                    Obligation::OnChainTxExists {
                        kind,
                        author: kv.get("author").map(|s| s.to_string()),
                    }
                }
                "license-held" => Obligation::LicenseHeld {
                    licensee: get("licensee")?.to_string(),
                    technology: ComponentId::from_hex(get("technology")?)
                        .ok_or_else(|| err("bad technology id".to_string()))?,
                },
                "conformity-declared" => Obligation::ConformityDeclared {
                    subject: get("subject")?.to_string(),
                },
                "ethics-anchored" => Obligation::EthicsAnchored {
                    digest: Digest::from_hex(get("digest")?)
                        .ok_or_else(|| err("bad digest".to_string()))?,
                },
                "identity-valid" => Obligation::IdentityValid {
                    subject: get("subject")?.to_string(),
                },
                other => return Err(err(format!("unknown obligation `{other}`"))),
            };
            clauses.push(Clause {
                id: id.to_string(),
                responsible: party.to_string(),
                obligation,
            });
        }
        Ok(clauses)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Executed,
    /// Unmet clause ids, in clause order; zero effects were applied.
    Pending(Vec<String>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContractError {
    #[error("contract is expired")]
    Expired,
    #[error("contract is breached")]
    Breached,
    #[error("contract file line {line}: {message}")]
    ParseClause { line: usize, message: String },
    #[error("unknown technology {0}")]
    UnknownTechnology(String),
    #[error("spend amount must be positive")]
    InvalidAmount,
    #[error("signer identity does not verify")]
    UnverifiedSigner,
    #[error("vault is already unlocked")]
    AlreadyUnlocked,
    #[error("no petition with id {0}")]
    UnknownPetition(u64),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// All-or-nothing execution: effects apply and the state moves to
/// `Executed` iff every clause verifies against chain and registries;
/// otherwise nothing changes and the unmet clause ids come back.
pub fn execute_contract(
    contract: &mut SmartContract,
    ctx: &ObligationCtx,
    world: &mut WorldState,
    ledger: &mut Ledger,
    author: &str,
) -> Result<ExecOutcome, ContractError> {
    match contract.state {
        ContractState::Expired => return Err(ContractError::Expired),
        ContractState::Breached => return Err(ContractError::Breached),
        ContractState::Executed | ContractState::Open => {}
    }
    let unmet: Vec<String> = contract
        .clauses
        .iter()
        .filter(|c| !c.obligation.verify(ctx))
        .map(|c| c.id.clone())
        .collect();
    if !unmet.is_empty() {
        ledger.append_transaction(Transaction::new(
            author,
            TxKind::Generic,
            kv_payload(&[
                ("event", "contract-exec"),
                ("contract", &contract.contract_id.to_string()),
                ("outcome", "pending"),
                ("unmet", &unmet.join(",")),
            ]),
        ))?;
        return Ok(ExecOutcome::Pending(unmet));
    }
    for (k, v) in &contract.effects {
        world.set(k.clone(), v.clone());
    }
    contract.state = ContractState::Executed;
    ledger.append_transaction(Transaction::new(
        author,
        TxKind::Generic,
        kv_payload(&[
            ("event", "contract-exec"),
            ("contract", &contract.contract_id.to_string()),
            ("outcome", "executed"),
        ]),
    ))?;
    Ok(ExecOutcome::Executed)
}

// ---------------------------------------------------------------------------
// Licenses

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseGrant {
    pub licensee: String,
    pub technology: ComponentId,
    pub terms: Option<u64>,
    pub granted_at: Tick,
    pub revoked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LicenseBook {
    grants: Vec<LicenseGrant>,
}

impl LicenseBook {
    pub fn new() -> LicenseBook {
        LicenseBook::default()
    }

    pub fn holds(&self, licensee: &str, technology: &ComponentId) -> bool {
        self.grants
            .iter()
            .any(|g| g.licensee == licensee && g.technology == *technology && !g.revoked)
    }

    pub fn grants(&self) -> &[LicenseGrant] {
        &self.grants
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LicenseDenial {
    Identity,
    Conformity,
    Ethics,
    Ostracized,
}

impl fmt::Display for LicenseDenial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LicenseDenial::Identity => "identity",
            LicenseDenial::Conformity => "conformity",
            LicenseDenial::Ethics => "ethics",
            LicenseDenial::Ostracized => "ostracized",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LicenseOutcome {
    Granted(LicenseGrant),
    Denied(LicenseDenial),
}

/// Which compliance requirements apply. The full set is the module
/// contract; a simulation relaxes entries to model disabled mechanisms.
#[derive(Debug, Clone, Copy)]
pub struct ComplianceChecks {
    pub identity: bool,
    pub conformity: bool,
    pub ethics: bool,
    pub ostracism: bool,
}

impl Default for ComplianceChecks {
    fn default() -> ComplianceChecks {
        ComplianceChecks {
            identity: true,
            conformity: true,
            ethics: true,
            ostracism: true,
        }
    }
}

/// Everything the license/token compliance predicate reads.
pub struct ComplianceEnv<'a> {
    pub identities: &'a IdentityRegistry,
    pub cis: &'a BTreeMap<ComponentId, ConfigurationItem>,
    pub petitions: &'a PetitionBook,
    /// The subject's ethics policy, if it has anchored one.
    pub policy: Option<&'a EthicsPolicy>,
    pub checks: ComplianceChecks,
}

fn conformity_declared(cis: &BTreeMap<ComponentId, ConfigurationItem>, subject: &str) -> bool {
    let owned: Vec<&ConfigurationItem> = cis
        .values()
        .filter(|ci| ci.owner.as_deref() == Some(subject))
        .collect();
    !owned.is_empty() && owned.iter().all(|ci| ci.conformity_declared)
}

fn ethics_verified(policy: Option<&EthicsPolicy>, ledger: &Ledger) -> bool {
    matches!(
        policy.map(|p| verify_ethics_unchanged(p, ledger)),
        Some(Ok(EthicsVerdict::Unchanged))
    )
}

/// Grant or deny a technology license. Denial reasons are reported in the
/// fixed order identity, conformity, ethics, ostracized; a grant lands on
/// the chain as a pending license transaction.
#[allow(clippy::too_many_arguments)]
pub fn issue_license(
    requester: &IdentityCertificate,
    factors: &[AuthenticationFactor],
    technology: ComponentId,
    components: &ComponentRegistry,
    env: &ComplianceEnv,
    book: &mut LicenseBook,
    ledger: &mut Ledger,
    now: Tick,
) -> Result<LicenseOutcome, ContractError> {
    if !components.contains(&technology) {
        return Err(ContractError::UnknownTechnology(technology.to_hex()));
    }
    let subject = &requester.subject_name;
    if env.checks.identity
        && !env
            .identities
            .verify_identity(requester, factors, crate::identity::DEFAULT_REQUIRED_FACTORS, now, ledger)
            .is_verified()
    {
        return Ok(LicenseOutcome::Denied(LicenseDenial::Identity));
    }
    if env.checks.conformity && !conformity_declared(env.cis, subject) {
        return Ok(LicenseOutcome::Denied(LicenseDenial::Conformity));
    }
    if env.checks.ethics && !ethics_verified(env.policy, ledger) {
        return Ok(LicenseOutcome::Denied(LicenseDenial::Ethics));
    }
    if env.checks.ostracism && env.petitions.is_ostracized(subject) {
        return Ok(LicenseOutcome::Denied(LicenseDenial::Ostracized));
    }
    let grant = LicenseGrant {
        licensee: subject.clone(),
        technology,
        terms: None,
        granted_at: now,
        revoked: false,
    };
    ledger.append_transaction(Transaction::new(
        subject.clone(),
        TxKind::License,
        kv_payload(&[
            ("event", "license-grant"),
            ("licensee", subject),
            ("technology", &technology.to_hex()),
            ("granted_at", &now.to_string()),
        ]),
    ))?;
    book.grants.push(grant.clone());
    Ok(LicenseOutcome::Granted(grant))
}

// ---------------------------------------------------------------------------
// Smart tokens

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartToken {
    pub holder: String,
    /// Append-only (tick, requested units) history.
    pub usage_meter: Vec<(Tick, f64)>,
    pub growth_ratio: f64,
    pub growth_window: usize,
}

impl SmartToken {
    pub fn new(holder: impl Into<String>) -> SmartToken {
        SmartToken {
            holder: holder.into(),
            usage_meter: Vec::new(),
            growth_ratio: DEFAULT_GROWTH_RATIO,
            growth_window: DEFAULT_GROWTH_WINDOW,
        }
    }

    /// Each of the last `window` requests reached `ratio` times its
    /// predecessor.
    fn exponential_growth(&self) -> bool {
        let m = &self.usage_meter;
        let w = self.growth_window;
        if m.len() < w + 1 {
            return false;
        }
        (m.len() - w..m.len()).all(|i| {
            let prev = m[i - 1].1;
            let cur = m[i].1;
            cur > 0.0 && cur >= self.growth_ratio * prev
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpendDenial {
    Compliance,
    Ostracized,
}

impl fmt::Display for SpendDenial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpendDenial::Compliance => "compliance",
            SpendDenial::Ostracized => "ostracized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpendOutcome {
    pub granted: bool,
    pub denial: Option<SpendDenial>,
    pub flagged: bool,
}

/// Request resources against a token. The request is metered and logged
/// whether or not it is granted; exponential request growth raises a flag
/// event alongside the spend record.
pub fn spend_token(
    token: &mut SmartToken,
    amount: f64,
    env: &ComplianceEnv,
    ledger: &mut Ledger,
    now: Tick,
) -> Result<SpendOutcome, ContractError> {
    if !(amount > 0.0) {
        return Err(ContractError::InvalidAmount);
    }
    let compliant = (!env.checks.conformity || conformity_declared(env.cis, &token.holder))
        && (!env.checks.ethics || ethics_verified(env.policy, ledger));
    let denial = if !compliant {
        Some(SpendDenial::Compliance)
    } else if env.checks.ostracism && env.petitions.is_ostracized(&token.holder) {
        Some(SpendDenial::Ostracized)
    } else {
        None
    };
    token.usage_meter.push((now, amount));
    let flagged = token.exponential_growth();
    let outcome = if denial.is_none() { "granted" } else { "denied" };
    ledger.append_transaction(Transaction::new(
        token.holder.clone(),
        TxKind::TokenSpend,
        kv_payload(&[
            ("event", "token-spend"),
            ("holder", &token.holder),
            ("amount", &format!("{amount}")),
            ("tick", &now.to_string()),
            ("outcome", outcome),
            ("flagged", if flagged { "true" } else { "false" }),
        ]),
    ))?;
    if flagged {
        ledger.append_transaction(Transaction::new(
            token.holder.clone(),
            TxKind::Generic,
            kv_payload(&[
                ("event", "exponential-growth-flag"),
                ("holder", &token.holder),
                ("tick", &now.to_string()),
            ]),
        ))?;
    }
    Ok(SpendOutcome {
        granted: denial.is_none(),
        denial,
        flagged,
    })
}

// ---------------------------------------------------------------------------
// Petitions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Petition {
    pub petition_id: u64,
    pub target: String,
    pub signatories: BTreeSet<String>,
    pub threshold: usize,
    pub enacted: bool,
    pub repealed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PetitionBook {
    petitions: BTreeMap<u64, Petition>,
    next: u64,
}

/// Default petition threshold: ceiling(2/3 of the registered voters).
pub fn default_petition_threshold(registered_voters: usize) -> usize {
    (2 * registered_voters).div_ceil(3).max(1)
}

impl PetitionBook {
    pub fn new() -> PetitionBook {
        PetitionBook {
            petitions: BTreeMap::new(),
            next: 1,
        }
    }

    pub fn open_petition(&mut self, target: impl Into<String>, threshold: usize) -> u64 {
        let id = self.next;
        self.next += 1;
        self.petitions.insert(
            id,
            Petition {
                petition_id: id,
                target: target.into(),
                signatories: BTreeSet::new(),
                threshold: threshold.max(1),
                enacted: false,
                repealed: false,
            },
        );
        id
    }

    pub fn get(&self, id: u64) -> Option<&Petition> {
        self.petitions.get(&id)
    }

    pub fn petitions(&self) -> impl Iterator<Item = &Petition> {
        self.petitions.values()
    }

    /// Is any enacted, unrepealed petition standing against this subject?
    pub fn is_ostracized(&self, subject: &str) -> bool {
        self.petitions
            .values()
            .any(|p| p.target == subject && p.enacted && !p.repealed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignOutcome {
    /// False when the signer had already signed (idempotent).
    pub added: bool,
    pub enacted_now: bool,
}

/// Add a verified signature; at threshold the petition enacts and the
/// resource layer starts denying the target.
pub fn sign_petition(
    book: &mut PetitionBook,
    petition_id: u64,
    signer: &IdentityCertificate,
    factors: &[AuthenticationFactor],
    identities: &IdentityRegistry,
    ledger: &mut Ledger,
    now: Tick,
) -> Result<SignOutcome, ContractError> {
    if !identities
        .verify_identity(signer, factors, crate::identity::DEFAULT_REQUIRED_FACTORS, now, ledger)
        .is_verified()
    {
        return Err(ContractError::UnverifiedSigner);
    }
    let petition = book
        .petitions
        .get_mut(&petition_id)
        .ok_or(ContractError::UnknownPetition(petition_id))?;
    let added = petition.signatories.insert(signer.subject_name.clone());
    if !added {
        return Ok(SignOutcome {
            added: false,
            enacted_now: false,
        });
    }
    ledger.append_transaction(Transaction::new(
        signer.subject_name.clone(),
        TxKind::PetitionSign,
        kv_payload(&[
            ("event", "petition-sign"),
            ("petition", &petition_id.to_string()),
            ("target", &petition.target),
            ("signer", &signer.subject_name),
            ("count", &petition.signatories.len().to_string()),
        ]),
    ))?;
    let enacted_now = !petition.enacted && petition.signatories.len() >= petition.threshold;
    if enacted_now {
        petition.enacted = true;
        let target = petition.target.clone();
        ledger.append_transaction(Transaction::new(
            signer.subject_name.clone(),
            TxKind::Generic,
            kv_payload(&[
                ("event", "ostracism-enacted"),
                ("petition", &petition_id.to_string()),
                ("target", &target),
            ]),
        ))?;
    }
    Ok(SignOutcome { added, enacted_now })
}

/// Repeal an enacted petition; takes the same validator quorum as any
/// other anchored governance action.
pub fn repeal_petition(
    book: &mut PetitionBook,
    petition_id: u64,
    approvers: &[&str],
    ledger: &mut Ledger,
    author: &str,
) -> Result<(), ContractError> {
    ledger.check_quorum(approvers)?;
    let petition = book
        .petitions
        .get_mut(&petition_id)
        .ok_or(ContractError::UnknownPetition(petition_id))?;
    petition.repealed = true;
    ledger.append_transaction(Transaction::new(
        author,
        TxKind::Generic,
        kv_payload(&[
            ("event", "ostracism-repealed"),
            ("petition", &petition_id.to_string()),
            ("target", &petition.target),
        ]),
    ))?;
    ledger.approve_and_seal(approvers)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Generation vaults

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationVault {
    /// Next-generation capability held in the vault.
    pub capability: ComponentId,
    pub custodians: Vec<String>,
    pub unlock_quorum: usize,
    pub unlocked: bool,
    /// Digest of the value system the successor must anchor.
    pub value_system_ref: Digest,
}

impl GenerationVault {
    pub fn new(
        capability: ComponentId,
        custodians: Vec<String>,
        unlock_quorum: usize,
        value_system_ref: Digest,
    ) -> GenerationVault {
        GenerationVault {
            capability,
            custodians,
            unlock_quorum,
            unlocked: false,
            value_system_ref,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnlockOutcome {
    Unlocked,
    Refused(RefuseReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefuseReason {
    BelowQuorum { have: usize, need: usize },
    TamperedSuccessorEthics,
}

impl fmt::Display for RefuseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefuseReason::BelowQuorum { have, need } => {
                write!(f, "below-quorum:{have}/{need}")
            }
            RefuseReason::TamperedSuccessorEthics => f.write_str("tampered-successor-ethics"),
        }
    }
}

/// Unlock the vault with k-of-n distinct verified custodian signatures and
/// a successor value anchor that verifies unchanged. The unlock record —
/// capability id, signer set, and the successor's ethics digest — is the
/// moral baton passed to the next generation. Refusals leave the vault
/// locked and record the refusal, not an unlock.
pub fn unlock_generation(
    vault: &mut GenerationVault,
    signers: &[(&IdentityCertificate, &[AuthenticationFactor])],
    successor_ethics: &EthicsPolicy,
    identities: &IdentityRegistry,
    ledger: &mut Ledger,
    now: Tick,
) -> Result<UnlockOutcome, ContractError> {
    if vault.unlocked {
        return Err(ContractError::AlreadyUnlocked);
    }
    // Distinct verified custodians; duplicates are deduplicated, imposters
    // and stale certificates simply do not count.
    let mut valid: BTreeSet<String> = BTreeSet::new();
    for (cert, factors) in signers {
        if !vault.custodians.contains(&cert.subject_name) {
            continue;
        }
        if identities
            .verify_identity(cert, factors, crate::identity::DEFAULT_REQUIRED_FACTORS, now, ledger)
            .is_verified()
        {
            valid.insert(cert.subject_name.clone());
        }
    }
    let need = vault.unlock_quorum;
    let author = valid
        .iter()
        .next()
        .cloned()
        .unwrap_or_else(|| vault.custodians.first().cloned().unwrap_or_default());
    let refuse = |ledger: &mut Ledger, reason: RefuseReason| -> Result<UnlockOutcome, ContractError> {
        ledger.append_transaction(Transaction::new(
            author.clone(),
            TxKind::UnlockVote,
            kv_payload(&[
                ("event", "vault-unlock"),
                ("capability", &vault.capability.to_hex()),
                ("outcome", "refused"),
                ("reason", &reason.to_string()),
            ]),
        ))?;
        Ok(UnlockOutcome::Refused(reason))
    };
    if valid.len() < need {
        return refuse(
            ledger,
            RefuseReason::BelowQuorum {
                have: valid.len(),
                need,
            },
        );
    }
    match verify_ethics_unchanged(successor_ethics, ledger) {
        Ok(EthicsVerdict::Unchanged) => {}
        _ => return refuse(ledger, RefuseReason::TamperedSuccessorEthics),
    }
    let signer_csv = valid.iter().cloned().collect::<Vec<_>>().join(",");
    ledger.append_transaction(Transaction::new(
        author,
        TxKind::UnlockVote,
        kv_payload(&[
            ("event", "vault-unlock"),
            ("capability", &vault.capability.to_hex()),
            ("outcome", "unlocked"),
            ("signers", &signer_csv),
            ("ethics", &successor_ethics.digest().to_hex()),
        ]),
    ))?;
    vault.unlocked = true;
    Ok(UnlockOutcome::Unlocked)
}
