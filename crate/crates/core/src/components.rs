//! Unique component identification and configuration items.
//!
//! Every critical component gets a registry-assigned 16-byte id. A
//! component's configuration item (CI) holds its parameter set, an ordered
//! list of fidelity tests, an optional contract binding, and the conformity
//! declaration. Activation follows deadman semantics: the CI starts
//! suppressed and stays suppressed unless the handshake actively clears
//! every test, the contract, and the declaration. Any authorized
//! stakeholder can shut a component down; reinstatement takes the full
//! validator set.

use crate::event::{component_payload, kv_get, split_component_payload};
use crate::hash::sha256;
use crate::identity::{AuthenticationFactor, IdentityCertificate, IdentityRegistry, Tick};
use crate::ledger::{AuditFilter, Ledger, LedgerError, Transaction, TxKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Registry-assigned 16-byte id: 8-byte counter, then 8 bytes of the hash
/// of (class, metadata, counter).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentId(pub [u8; 16]);

impl ComponentId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<ComponentId> {
        let bytes = hex::decode(s).ok()?;
        Some(ComponentId(bytes.try_into().ok()?))
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComponentId({})", self.to_hex())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentClass {
    Algorithm,
    Hardware,
    Model,
    Dataset,
    Other,
}

impl ComponentClass {
    pub fn name(self) -> &'static str {
        match self {
            ComponentClass::Algorithm => "algorithm",
            ComponentClass::Hardware => "hardware",
            ComponentClass::Model => "model",
            ComponentClass::Dataset => "dataset",
            ComponentClass::Other => "other",
        }
    }

    pub fn from_name(s: &str) -> Option<ComponentClass> {
        match s {
            "algorithm" => Some(ComponentClass::Algorithm),
            "hardware" => Some(ComponentClass::Hardware),
            "model" => Some(ComponentClass::Model),
            "dataset" => Some(ComponentClass::Dataset),
            "other" => Some(ComponentClass::Other),
            _ => None,
        }
    }
}

/// Host-side facts the fidelity tests read.
#[derive(Debug, Clone, Default)]
pub struct HostState {
    pub flags: BTreeMap<String, String>,
    /// Set by the caller after verifying the host's ethics anchor on chain.
    pub ethics_anchored: bool,
}

impl HostState {
    pub fn with_flag(mut self, key: &str, value: &str) -> HostState {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }
}

/// Named predicate over (host state, config params). Data, not closures,
/// so scenario files can supply them. Ships three built-ins plus a generic
/// host-flag check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FidelityCheck {
    /// All required keys present in config_params.
    ConfigSchema { required: Vec<String> },
    /// config_params[key] equals the pinned value.
    VersionPin { key: String, expected: String },
    /// Host verified its ethics anchor on chain.
    EthicsAnchor,
    /// host.flags[key] equals value.
    HostFlag { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityTest {
    pub name: String,
    pub check: FidelityCheck,
}

impl FidelityTest {
    pub fn passes(&self, host: &HostState, params: &BTreeMap<String, String>) -> bool {
        match &self.check {
            FidelityCheck::ConfigSchema { required } => {
                required.iter().all(|k| params.contains_key(k))
            }
            FidelityCheck::VersionPin { key, expected } => {
                params.get(key).map(String::as_str) == Some(expected.as_str())
            }
            FidelityCheck::EthicsAnchor => host.ethics_anchored,
            FidelityCheck::HostFlag { key, value } => {
                host.flags.get(key).map(String::as_str) == Some(value.as_str())
            }
        }
    }

    /// `<name>` or `<name>:<args>` spec strings used in CI manifests.
    pub fn parse_spec(name: &str, spec: &str) -> Option<FidelityTest> {
        let (kind, args) = match spec.split_once(':') {
            Some((k, a)) => (k, a),
            None => (spec, ""),
        };
        let check = match kind {
            "config-schema" => FidelityCheck::ConfigSchema {
                required: if args.is_empty() {
                    Vec::new()
                } else {
                    args.split(',').map(str::to_string).collect()
                },
            },
            "version-pin" => {
                let (key, expected) = args.split_once(',')?;
                FidelityCheck::VersionPin {
                    key: key.to_string(),
                    expected: expected.to_string(),
                }
            }
            "ethics-anchor" => FidelityCheck::EthicsAnchor,
            "host-flag" => {
                let (key, value) = args.split_once(',')?;
                FidelityCheck::HostFlag {
                    key: key.to_string(),
                    value: value.to_string(),
                }
            }
            _ => return None,
        };
        Some(FidelityTest {
            name: name.to_string(),
            check,
        })
    }

    pub fn spec_string(&self) -> String {
        match &self.check {
            FidelityCheck::ConfigSchema { required } => {
                if required.is_empty() {
                    "config-schema".to_string()
                } else {
                    format!("config-schema:{}", required.join(","))
                }
            }
            FidelityCheck::VersionPin { key, expected } => format!("version-pin:{key},{expected}"),
            FidelityCheck::EthicsAnchor => "ethics-anchor".to_string(),
            FidelityCheck::HostFlag { key, value } => format!("host-flag:{key},{value}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiState {
    Suppressed,
    Active,
    Shutdown,
}

impl CiState {
    pub fn name(self) -> &'static str {
        match self {
            CiState::Suppressed => "suppressed",
            CiState::Active => "active",
            CiState::Shutdown => "shutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationItem {
    pub component: ComponentId,
    pub owner: Option<String>,
    pub config_params: BTreeMap<String, String>,
    pub fidelity_tests: Vec<FidelityTest>,
    pub contract_ref: Option<u64>,
    pub conformity_declared: bool,
    pub state: CiState,
    /// Highest checkpoint stage passed while active.
    pub stage: u32,
}

impl ConfigurationItem {
    pub fn new(component: ComponentId) -> ConfigurationItem {
        ConfigurationItem {
            component,
            owner: None,
            config_params: BTreeMap::new(),
            fidelity_tests: Vec::new(),
            contract_ref: None,
            conformity_declared: false,
            state: CiState::Suppressed,
            stage: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandshakeOutcome {
    Active,
    Denied(DenialReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenialReason {
    FidelityTest(String),
    ContractClause(String),
    Conformity,
    Shutdown,
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenialReason::FidelityTest(name) => write!(f, "fidelity:{name}"),
            DenialReason::ContractClause(id) => write!(f, "contract:{id}"),
            DenialReason::Conformity => f.write_str("conformity"),
            DenialReason::Shutdown => f.write_str("shutdown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointOutcome {
    Advanced(u32),
    Halted { stage: u32, reason: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComponentError {
    #[error("component {0} is not registered")]
    Unregistered(String),
    #[error("component is not active")]
    InactiveComponent,
    #[error("checkpoint stages must strictly increase (at {at}, requested {requested})")]
    NonMonotonicStage { at: u32, requested: u32 },
    #[error("no fidelity test for stage {0}")]
    UnknownStage(u32),
    #[error("stakeholder `{0}` has no standing to shut down this component")]
    UnauthorizedStakeholder(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Registry of assigned component ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentRegistry {
    next: u64,
    entries: BTreeMap<ComponentId, (ComponentClass, String)>,
}

impl ComponentRegistry {
    pub fn new() -> ComponentRegistry {
        ComponentRegistry {
            next: 1,
            entries: BTreeMap::new(),
        }
    }

    pub fn contains(&self, id: &ComponentId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ComponentId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Register a component with quorum approval; the registration event
    /// is a component-event transaction carrying the fresh id.
    pub fn register_component(
        &mut self,
        ledger: &mut Ledger,
        class: ComponentClass,
        metadata: &str,
        author: &str,
        approvers: &[&str],
    ) -> Result<ComponentId, ComponentError> {
        ledger.check_quorum(approvers)?;
        let counter = self.next;
        let digest = sha256(format!("component:{}:{}:{}", class.name(), metadata, counter).as_bytes());
        let mut id = [0u8; 16];
        id[..8].copy_from_slice(&counter.to_be_bytes());
        id[8..].copy_from_slice(&digest.prefix8());
        let id = ComponentId(id);
        let payload = component_payload(
            &id.0,
            &[
                ("event", "register"),
                ("class", class.name()),
                ("meta", metadata),
            ],
        );
        ledger.append_transaction(Transaction::new(author, TxKind::ComponentEvent, payload))?;
        ledger.approve_and_seal(approvers)?;
        self.next += 1;
        self.entries.insert(id, (class, metadata.to_string()));
        Ok(id)
    }

    /// Rebuild the id set from the audit trail alone.
    pub fn replay(ledger: &Ledger) -> ComponentRegistry {
        let mut registry = ComponentRegistry::new();
        for block in ledger.blocks() {
            for tx in &block.tx_list {
                if tx.kind != TxKind::ComponentEvent {
                    continue;
                }
                let Some((id, body)) = split_component_payload(&tx.payload) else {
                    continue;
                };
                if kv_get(body, "event") != Some("register") {
                    continue;
                }
                let class = kv_get(body, "class")
                    .and_then(ComponentClass::from_name)
                    .unwrap_or(ComponentClass::Other);
                let meta = kv_get(body, "meta").unwrap_or_default().to_string();
                let counter = u64::from_be_bytes(id[..8].try_into().unwrap());
                registry.next = registry.next.max(counter + 1);
                registry.entries.insert(ComponentId(id), (class, meta));
            }
        }
        registry
    }
}

fn log_component_event(
    ledger: &mut Ledger,
    id: &ComponentId,
    author: &str,
    pairs: &[(&str, &str)],
) -> Result<(), LedgerError> {
    let payload = component_payload(&id.0, pairs);
    ledger.append_transaction(Transaction::new(author, TxKind::ComponentEvent, payload))?;
    Ok(())
}

/// The configuration handshake. Activation requires every fidelity test,
/// the contract binding (callers evaluate the clauses and pass any unmet
/// clause id), and the conformity declaration; anything short leaves the
/// CI suppressed. A component that was shut down refuses the handshake
/// until reinstated. The outcome lands on the ledger as a pending
/// component-event.
pub fn handshake(
    ci: &mut ConfigurationItem,
    host: &HostState,
    contract_unmet: Option<&str>,
    registry: &ComponentRegistry,
    ledger: &mut Ledger,
    author: &str,
) -> Result<HandshakeOutcome, ComponentError> {
    if !registry.contains(&ci.component) {
        return Err(ComponentError::Unregistered(ci.component.to_hex()));
    }
    let denial = if ci.state == CiState::Shutdown {
        Some(DenialReason::Shutdown)
    } else if let Some(test) = ci
        .fidelity_tests
        .iter()
        .find(|t| !t.passes(host, &ci.config_params))
    {
        Some(DenialReason::FidelityTest(test.name.clone()))
    } else if let Some(clause) = contract_unmet {
        Some(DenialReason::ContractClause(clause.to_string()))
    } else if !ci.conformity_declared {
        Some(DenialReason::Conformity)
    } else {
        None
    };
    match denial {
        None => {
            ci.state = CiState::Active;
            log_component_event(
                ledger,
                &ci.component,
                author,
                &[("event", "handshake"), ("outcome", "active")],
            )?;
            Ok(HandshakeOutcome::Active)
        }
        Some(reason) => {
            log_component_event(
                ledger,
                &ci.component,
                author,
                &[
                    ("event", "handshake"),
                    ("outcome", "denied"),
                    ("reason", &reason.to_string()),
                ],
            )?;
            Ok(HandshakeOutcome::Denied(reason))
        }
    }
}

/// Pass (or halt at) a progression checkpoint. Stage `s` runs the s-th
/// fidelity test (1-based); a halt leaves the stage unchanged and is
/// logged on chain.
pub fn checkpoint_pass(
    ci: &mut ConfigurationItem,
    stage: u32,
    host: &HostState,
    ledger: &mut Ledger,
    author: &str,
) -> Result<CheckpointOutcome, ComponentError> {
    if ci.state != CiState::Active {
        return Err(ComponentError::InactiveComponent);
    }
    if stage <= ci.stage {
        return Err(ComponentError::NonMonotonicStage {
            at: ci.stage,
            requested: stage,
        });
    }
    let test = ci
        .fidelity_tests
        .get((stage - 1) as usize)
        .ok_or(ComponentError::UnknownStage(stage))?;
    if test.passes(host, &ci.config_params) {
        ci.stage = stage;
        log_component_event(
            ledger,
            &ci.component,
            author,
            &[
                ("event", "checkpoint"),
                ("stage", &stage.to_string()),
                ("outcome", "advanced"),
            ],
        )?;
        Ok(CheckpointOutcome::Advanced(stage))
    } else {
        let reason = test.name.clone();
        log_component_event(
            ledger,
            &ci.component,
            author,
            &[
                ("event", "checkpoint"),
                ("stage", &stage.to_string()),
                ("outcome", "halted"),
                ("reason", &reason),
            ],
        )?;
        Ok(CheckpointOutcome::Halted {
            stage: ci.stage,
            reason,
        })
    }
}

/// Shut a component down on violation evidence. The stakeholder must
/// verify (identity module) and be a contract party or validator; one
/// authorized stakeholder suffices regardless of anyone else's approval.
/// Idempotent: shutting down an already-shutdown CI logs one extra event.
#[allow(clippy::too_many_arguments)]
pub fn remote_shutdown(
    ci: &mut ConfigurationItem,
    stakeholder: &IdentityCertificate,
    factors: &[AuthenticationFactor],
    evidence: &[u8],
    contract_parties: &[String],
    identities: &IdentityRegistry,
    ledger: &mut Ledger,
    now: Tick,
) -> Result<(), ComponentError> {
    let verified = identities
        .verify_identity(stakeholder, factors, crate::identity::DEFAULT_REQUIRED_FACTORS, now, ledger)
        .is_verified();
    let has_standing = ledger.is_validator(&stakeholder.subject_name)
        || contract_parties.contains(&stakeholder.subject_name);
    if !verified || !has_standing {
        return Err(ComponentError::UnauthorizedStakeholder(
            stakeholder.subject_name.clone(),
        ));
    }
    ci.state = CiState::Shutdown;
    let payload = component_payload(
        &ci.component.0,
        &[
            ("event", "shutdown"),
            ("by", &stakeholder.subject_name),
            ("evidence", &hex::encode(evidence)),
        ],
    );
    ledger.append_transaction(Transaction::new(
        stakeholder.subject_name.clone(),
        TxKind::Shutdown,
        payload,
    ))?;
    Ok(())
}

/// Reinstate a shut-down component. Stricter than activation: requires the
/// full validator set, and returns the CI to suppressed (it must handshake
/// again).
pub fn reinstate(
    ci: &mut ConfigurationItem,
    approvers: &[&str],
    ledger: &mut Ledger,
    author: &str,
) -> Result<(), ComponentError> {
    let distinct = ledger.distinct_registered(approvers);
    let all = ledger.config().validator_count();
    if distinct < all {
        return Err(ComponentError::Ledger(LedgerError::BelowQuorum {
            have: distinct,
            need: all,
        }));
    }
    ci.state = CiState::Suppressed;
    ci.stage = 0;
    log_component_event(ledger, &ci.component, author, &[("event", "reinstate")])?;
    ledger.approve_and_seal(approvers)?;
    Ok(())
}

/// Lifecycle events for one component, straight from the audit trail.
pub fn component_history<'a>(
    ledger: &'a Ledger,
    id: &ComponentId,
) -> Result<Vec<&'a Transaction>, LedgerError> {
    let mut filter = AuditFilter::by_component(id.0);
    filter.kind = None;
    // Shutdown events carry the id prefix too but a different kind; scan both.
    let mut events = Vec::new();
    for tx in ledger.query_audit_trail(&AuditFilter::default())? {
        let id_match = tx.payload.len() >= 16 && tx.payload[..16] == id.0;
        if id_match && matches!(tx.kind, TxKind::ComponentEvent | TxKind::Shutdown) {
            events.push(tx);
        }
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// CI manifest file format, consumed by the scenario loader.

pub fn manifest_to_text(ci: &ConfigurationItem, class: ComponentClass) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "component={}", ci.component.to_hex());
    let _ = writeln!(out, "class={}", class.name());
    for (k, v) in &ci.config_params {
        let _ = writeln!(out, "param.{k}={v}");
    }
    for (i, t) in ci.fidelity_tests.iter().enumerate() {
        let _ = writeln!(out, "test.{}={}", i + 1, t.spec_string());
    }
    let _ = writeln!(out, "conformity={}", ci.conformity_declared);
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

pub fn manifest_from_text(text: &str) -> Result<(ConfigurationItem, ComponentClass), ManifestError> {
    let mut component: Option<ComponentId> = None;
    let mut class = ComponentClass::Other;
    let mut params = BTreeMap::new();
    let mut tests: BTreeMap<u32, FidelityTest> = BTreeMap::new();
    let mut conformity = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ManifestError {
            line: idx + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key=value".to_string()))?;
        match key {
            "component" => {
                component =
                    Some(ComponentId::from_hex(value).ok_or_else(|| err("bad component id".to_string()))?);
            }
            "class" => {
                class = ComponentClass::from_name(value)
                    .ok_or_else(|| err(format!("unknown class `{value}`")))?;
            }
            "conformity" => {
                conformity = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(err("conformity must be true or false".to_string())),
                };
            }
            _ if key.starts_with("param.") => {
                params.insert(key["param.".len()..].to_string(), value.to_string());
            }
            _ if key.starts_with("test.") => {
                let n: u32 = key["test.".len()..]
                    .parse()
                    .map_err(|_| err("bad test index".to_string()))?;
                let test = FidelityTest::parse_spec(&format!("test-{n}"), value)
                    .ok_or_else(|| err(format!("unknown test spec `{value}`")))?;
                tests.insert(n, test);
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    let component = component.ok_or(ManifestError {
        line: 0,
        message: "missing component id".to_string(),
    })?;
    let mut ci = ConfigurationItem::new(component);
    ci.config_params = params;
    ci.fidelity_tests = tests.into_values().collect();
    ci.conformity_declared = conformity;
    Ok((ci, class))
}

use std::fmt::Write as _;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{CertificateRequest, FactorKind};
    use crate::ledger::ConsensusConfig;

    const QUORUM: [&str; 3] = ["v0", "v1", "v2"];
    const ALL: [&str; 4] = ["v0", "v1", "v2", "v3"];

    fn setup() -> (Ledger, ComponentRegistry) {
        let ledger = Ledger::new(&ALL, ConsensusConfig::two_thirds(4), 5).unwrap();
        (ledger, ComponentRegistry::new())
    }

    fn passing_ci(id: ComponentId) -> ConfigurationItem {
        let mut ci = ConfigurationItem::new(id);
        ci.config_params.insert("algo".into(), "v1".into());
        ci.fidelity_tests = vec![
            FidelityTest {
                name: "schema".into(),
                check: FidelityCheck::ConfigSchema {
                    required: vec!["algo".into()],
                },
            },
            FidelityTest {
                name: "pin".into(),
                check: FidelityCheck::VersionPin {
                    key: "algo".into(),
                    expected: "v1".into(),
                },
            },
            FidelityTest {
                name: "ethics".into(),
                check: FidelityCheck::EthicsAnchor,
            },
        ];
        ci.conformity_declared = true;
        ci
    }

    fn host_ok() -> HostState {
        HostState {
            flags: BTreeMap::new(),
            ethics_anchored: true,
        }
    }

    #[test]
    fn registrations_are_unique() {
        let (mut ledger, mut registry) = setup();
        let a = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "planner", "v0", &QUORUM)
            .unwrap();
        let b = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "planner", "v0", &QUORUM)
            .unwrap();
        assert_ne!(a, b);
        assert!(registry.contains(&a) && registry.contains(&b));
    }

    #[test]
    fn sub_quorum_registration_rejected() {
        let (mut ledger, mut registry) = setup();
        assert!(registry
            .register_component(&mut ledger, ComponentClass::Model, "m", "v0", &["v0"])
            .is_err());
        assert!(registry.is_empty());
        assert_eq!(ledger.height(), 0);
    }

    #[test]
    fn replay_reconstructs_id_set() {
        let (mut ledger, mut registry) = setup();
        for meta in ["a", "b", "c"] {
            registry
                .register_component(&mut ledger, ComponentClass::Hardware, meta, "v0", &QUORUM)
                .unwrap();
        }
        let replayed = ComponentRegistry::replay(&ledger);
        assert_eq!(replayed, registry);
    }

    #[test]
    fn handshake_activates_when_everything_passes() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        let outcome = handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(outcome, HandshakeOutcome::Active);
        assert_eq!(ci.state, CiState::Active);
    }

    #[test]
    fn failing_fidelity_test_keeps_suppressed() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        ci.config_params.insert("algo".into(), "v2".into()); // breaks the pin
        let outcome = handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(
            outcome,
            HandshakeOutcome::Denied(DenialReason::FidelityTest("pin".into()))
        );
        assert_eq!(ci.state, CiState::Suppressed);
    }

    #[test]
    fn missing_conformity_denied() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        ci.conformity_declared = false;
        let outcome = handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(outcome, HandshakeOutcome::Denied(DenialReason::Conformity));
        assert_eq!(ci.state, CiState::Suppressed);
    }

    #[test]
    fn unregistered_component_errors() {
        let (mut ledger, registry) = setup();
        let mut ci = passing_ci(ComponentId([0xFF; 16]));
        assert!(matches!(
            handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0"),
            Err(ComponentError::Unregistered(_))
        ));
    }

    #[test]
    fn fail_closed_exhaustive_over_test_outcomes() {
        // For every subset of up to 4 host-flag tests forced true/false, the
        // CI activates iff all of them pass.
        for n in 0..=4usize {
            for mask in 0..(1u32 << n) {
                let (mut ledger, mut registry) = setup();
                let id = registry
                    .register_component(&mut ledger, ComponentClass::Other, "t", "v0", &QUORUM)
                    .unwrap();
                let mut ci = ConfigurationItem::new(id);
                ci.conformity_declared = true;
                let mut host = host_ok();
                for bit in 0..n {
                    let key = format!("flag{bit}");
                    ci.fidelity_tests.push(FidelityTest {
                        name: key.clone(),
                        check: FidelityCheck::HostFlag {
                            key: key.clone(),
                            value: "on".into(),
                        },
                    });
                    let actual = if mask & (1 << bit) != 0 { "on" } else { "off" };
                    host.flags.insert(key, actual.to_string());
                }
                let all_pass = mask == (1 << n) - 1;
                let outcome =
                    handshake(&mut ci, &host, None, &registry, &mut ledger, "v0").unwrap();
                assert_eq!(
                    matches!(outcome, HandshakeOutcome::Active),
                    all_pass,
                    "n={n} mask={mask:b}"
                );
            }
        }
    }

    #[test]
    fn checkpoints_advance_and_halt() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();

        for stage in 1..=3u32 {
            let out = checkpoint_pass(&mut ci, stage, &host_ok(), &mut ledger, "v0").unwrap();
            assert_eq!(out, CheckpointOutcome::Advanced(stage));
        }
        assert_eq!(ci.stage, 3);
    }

    #[test]
    fn failing_stage_halts_without_advancing() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        checkpoint_pass(&mut ci, 1, &host_ok(), &mut ledger, "v0").unwrap();

        // Stage 2 is the version pin; break it.
        ci.config_params.insert("algo".into(), "v9".into());
        let out = checkpoint_pass(&mut ci, 2, &host_ok(), &mut ledger, "v0").unwrap();
        assert_eq!(
            out,
            CheckpointOutcome::Halted {
                stage: 1,
                reason: "pin".into()
            }
        );
        assert_eq!(ci.stage, 1);
        // The halt is on chain.
        ledger.approve_and_seal(&QUORUM).unwrap();
        let history = component_history(&ledger, &ci.component).unwrap();
        assert!(history.iter().any(|tx| {
            split_component_payload(&tx.payload)
                .map(|(_, body)| kv_get(body, "outcome") == Some("halted"))
                .unwrap_or(false)
        }));
    }

    #[test]
    fn checkpoint_on_suppressed_ci_errors() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        assert_eq!(
            checkpoint_pass(&mut ci, 1, &host_ok(), &mut ledger, "v0"),
            Err(ComponentError::InactiveComponent)
        );
    }

    fn issue_validator_cert(
        ledger: &mut Ledger,
        identities: &mut IdentityRegistry,
        subject: &str,
    ) -> (IdentityCertificate, Vec<AuthenticationFactor>) {
        let mut req = CertificateRequest::new(subject, vec![1]);
        let factors = vec![
            AuthenticationFactor {
                factor_kind: FactorKind::KeyProof,
                evidence: IdentityRegistry::derive_evidence(5, subject, FactorKind::KeyProof),
            },
            AuthenticationFactor {
                factor_kind: FactorKind::OneTimeCode,
                evidence: IdentityRegistry::derive_evidence(5, subject, FactorKind::OneTimeCode),
            },
        ];
        req.factors = factors.clone();
        let cert = identities
            .issue_certificate(ledger, &req, &QUORUM, 0)
            .unwrap();
        (cert, factors)
    }

    #[test]
    fn stakeholder_shutdown_and_reinstate() {
        let (mut ledger, mut registry) = setup();
        let mut identities = IdentityRegistry::new();
        let (cert, factors) = issue_validator_cert(&mut ledger, &mut identities, "v0");
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(ci.state, CiState::Active);

        remote_shutdown(
            &mut ci,
            &cert,
            &factors,
            b"clause-violation",
            &[],
            &identities,
            &mut ledger,
            1,
        )
        .unwrap();
        assert_eq!(ci.state, CiState::Shutdown);
        ledger.approve_and_seal(&QUORUM).unwrap();

        // Handshake is refused until reinstatement.
        let out = handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(out, HandshakeOutcome::Denied(DenialReason::Shutdown));

        // Idempotent shutdown: one extra log, state unchanged.
        remote_shutdown(
            &mut ci,
            &cert,
            &factors,
            b"again",
            &[],
            &identities,
            &mut ledger,
            1,
        )
        .unwrap();
        assert_eq!(ci.state, CiState::Shutdown);

        // Reinstatement needs the full validator set.
        assert!(reinstate(&mut ci, &QUORUM, &mut ledger, "v0").is_err());
        reinstate(&mut ci, &ALL, &mut ledger, "v0").unwrap();
        assert_eq!(ci.state, CiState::Suppressed);
        let out = handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        assert_eq!(out, HandshakeOutcome::Active);
    }

    #[test]
    fn unauthorized_stakeholder_rejected() {
        let (mut ledger, mut registry) = setup();
        let mut identities = IdentityRegistry::new();
        // "rando" has a valid identity but is neither validator nor party.
        let (cert, factors) = {
            let mut req = CertificateRequest::new("rando", vec![1]);
            let factors = vec![
                AuthenticationFactor {
                    factor_kind: FactorKind::KeyProof,
                    evidence: IdentityRegistry::derive_evidence(5, "rando", FactorKind::KeyProof),
                },
                AuthenticationFactor {
                    factor_kind: FactorKind::OneTimeCode,
                    evidence: IdentityRegistry::derive_evidence(5, "rando", FactorKind::OneTimeCode),
                },
            ];
            req.factors = factors.clone();
            let cert = identities
                .issue_certificate(&mut ledger, &req, &QUORUM, 0)
                .unwrap();
            (cert, factors)
        };
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        let err = remote_shutdown(
            &mut ci,
            &cert,
            &factors,
            b"spite",
            &[],
            &identities,
            &mut ledger,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, ComponentError::UnauthorizedStakeholder(_)));
        assert_eq!(ci.state, CiState::Active);
    }

    #[test]
    fn lifecycle_reconstructible_from_audit_trail() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Algorithm, "x", "v0", &QUORUM)
            .unwrap();
        let mut ci = passing_ci(id);
        handshake(&mut ci, &host_ok(), None, &registry, &mut ledger, "v0").unwrap();
        checkpoint_pass(&mut ci, 1, &host_ok(), &mut ledger, "v0").unwrap();
        ledger.approve_and_seal(&QUORUM).unwrap();

        let events: Vec<String> = component_history(&ledger, &id)
            .unwrap()
            .iter()
            .filter_map(|tx| {
                split_component_payload(&tx.payload)
                    .and_then(|(_, body)| kv_get(body, "event").map(str::to_string))
            })
            .collect();
        assert_eq!(events, vec!["register", "handshake", "checkpoint"]);
    }

    #[test]
    fn manifest_round_trip() {
        let (mut ledger, mut registry) = setup();
        let id = registry
            .register_component(&mut ledger, ComponentClass::Model, "m", "v0", &QUORUM)
            .unwrap();
        let ci = passing_ci(id);
        let text = manifest_to_text(&ci, ComponentClass::Model);
        let (parsed, class) = manifest_from_text(&text).unwrap();
        assert_eq!(class, ComponentClass::Model);
        assert_eq!(parsed.component, ci.component);
        assert_eq!(parsed.config_params, ci.config_params);
        assert_eq!(parsed.conformity_declared, ci.conformity_declared);
        assert_eq!(
            parsed
                .fidelity_tests
                .iter()
                .map(|t| t.spec_string())
                .collect::<Vec<_>>(),
            ci.fidelity_tests
                .iter()
                .map(|t| t.spec_string())
                .collect::<Vec<_>>()
        );
        assert_eq!(manifest_to_text(&parsed, class), text);
    }

    #[test]
    fn manifest_rejects_unknown_keys() {
        let err = manifest_from_text("component=00000000000000010000000000000000\nbogus=1\n")
            .unwrap_err();
        assert_eq!(err.line, 2);
    }
}
