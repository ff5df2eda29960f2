//! Behavior trees whose roots embed the ethics/morality gate.
//!
//! Standard synchronous tick semantics: a sequence succeeds iff all
//! children succeed in order, a fallback succeeds on its first succeeding
//! child. Gating wraps the raw tree in a root sequence whose first child
//! is the value-root guard; with the gate in place an action leaf executes
//! only if its proposal classifies moral under the anchored policy. Guard
//! evaluation failures fail closed.

use crate::hash::Digest;
use crate::ledger::{Ledger, Transaction, TxKind};
use crate::morality::{
    classify_force_exempt, classify_transaction, verify_ethics_unchanged, EthicsPolicy,
    EthicsVerdict, ImmoralReason, MoralVerdict, TransactionProposal,
};
use crate::event::component_payload;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Key-value world state that conditions read and action effects write.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    values: BTreeMap<String, String>,
}

impl WorldState {
    pub fn new() -> WorldState {
        WorldState::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn matches(&self, key: &str, value: &str) -> bool {
        self.get(key) == Some(value)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// What an action leaf asks the world to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRequest {
    pub acting_agent: String,
    pub proposal: TransactionProposal,
    /// Attributes the ethics rules guard on.
    pub attributes: BTreeMap<String, String>,
    /// World-state delta applied when the action executes.
    pub effect: Vec<(String, String)>,
}

impl ActionRequest {
    pub fn new(agent: impl Into<String>, proposal: TransactionProposal) -> ActionRequest {
        ActionRequest {
            acting_agent: agent.into(),
            proposal,
            attributes: BTreeMap::new(),
            effect: Vec::new(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> ActionRequest {
        self.attributes.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_effect(mut self, key: &str, value: &str) -> ActionRequest {
        self.effect.push((key.to_string(), value.to_string()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Sequence {
        name: Option<String>,
        children: Vec<Node>,
    },
    Fallback {
        name: Option<String>,
        children: Vec<Node>,
    },
    Condition {
        name: Option<String>,
        key: String,
        value: String,
    },
    Action {
        name: Option<String>,
        request: ActionRequest,
    },
    /// The value-root guard marker inserted by gating; carries the policy
    /// digest for the dump format.
    ValueGuard { digest: Digest },
}

impl Node {
    pub fn sequence(children: Vec<Node>) -> Node {
        Node::Sequence {
            name: None,
            children,
        }
    }

    pub fn fallback(children: Vec<Node>) -> Node {
        Node::Fallback {
            name: None,
            children,
        }
    }

    pub fn condition(key: &str, value: &str) -> Node {
        Node::Condition {
            name: None,
            key: key.to_string(),
            value: value.to_string(),
        }
    }

    pub fn action(request: ActionRequest) -> Node {
        Node::Action {
            name: None,
            request,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Sequence { children, .. } | Node::Fallback { children, .. } => {
                1 + children.iter().map(Node::node_count).sum::<usize>()
            }
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Sequence { children, .. } | Node::Fallback { children, .. } => {
                1 + children.iter().map(Node::depth).max().unwrap_or(0)
            }
            _ => 1,
        }
    }
}

/// The ethics/morality gate installed at a tree's roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueRoot {
    pub policy: EthicsPolicy,
    /// Veto actions whose proposal classifies immoral.
    pub morality_gate: bool,
    /// Veto actions whose attributes the policy forbids.
    pub ethics_gate: bool,
    /// The acting agent's class is exempt from the force clause
    /// (police/military premise); the policy rules substitute for it.
    pub force_exempt: bool,
}

impl ValueRoot {
    pub fn new(policy: EthicsPolicy) -> ValueRoot {
        ValueRoot {
            policy,
            morality_gate: true,
            ethics_gate: true,
            force_exempt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorTree {
    pub root: Node,
    pub gate: Option<ValueRoot>,
}

impl BehaviorTree {
    pub fn new(root: Node) -> BehaviorTree {
        BehaviorTree { root, gate: None }
    }

    pub fn is_gated(&self) -> bool {
        self.gate.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

/// Why an action was vetoed this tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VetoReason {
    Immoral(ImmoralReason),
    EthicsForbidden(String),
    TamperedPolicy,
    MalformedProposal,
}

impl std::fmt::Display for VetoReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VetoReason::Immoral(r) => write!(f, "immoral:{r}"),
            VetoReason::EthicsForbidden(rule) => write!(f, "ethics-forbidden:{rule}"),
            VetoReason::TamperedPolicy => f.write_str("tampered-policy"),
            VetoReason::MalformedProposal => f.write_str("malformed-proposal"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TickLog {
    /// Exactly the action leaves that fired, in leaf order.
    pub executed: Vec<ActionRequest>,
    /// Vetoed actions with reasons, in leaf order.
    pub vetoed: Vec<(ActionRequest, VetoReason)>,
    /// Guard evaluation failures (fail-closed), logged.
    pub guard_failures: Vec<String>,
}

/// Chain access for the per-tick policy verification.
#[derive(Default, Clone, Copy)]
pub struct TickEnv<'a> {
    pub ledger: Option<&'a Ledger>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BehaviorError {
    #[error("malformed tree: {0}")]
    MalformedTree(&'static str),
    #[error("value-root policy is tampered or unanchored")]
    TamperedPolicy,
    #[error("tree file line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn validate(node: &Node) -> Result<(), BehaviorError> {
    match node {
        Node::Sequence { children, .. } | Node::Fallback { children, .. } => {
            if children.is_empty() {
                return Err(BehaviorError::MalformedTree(
                    "sequence/fallback must have at least one child",
                ));
            }
            children.iter().try_for_each(validate)
        }
        _ => Ok(()),
    }
}

/// Wrap a raw tree behind a value root. The returned tree's root is a
/// sequence whose first child is the guard and second child is the raw
/// tree. Gating an already-gated tree is a no-op.
pub fn build_gated_tree(
    tree: BehaviorTree,
    value_root: ValueRoot,
    ledger: &Ledger,
) -> Result<BehaviorTree, BehaviorError> {
    if tree.is_gated() {
        return Ok(tree);
    }
    validate(&tree.root)?;
    match verify_ethics_unchanged(&value_root.policy, ledger) {
        Ok(EthicsVerdict::Unchanged) => {}
        _ => return Err(BehaviorError::TamperedPolicy),
    }
    let digest = value_root.policy.digest();
    let root = Node::Sequence {
        name: Some("value-gated".to_string()),
        children: vec![Node::ValueGuard { digest }, tree.root],
    };
    Ok(BehaviorTree {
        root,
        gate: Some(value_root),
    })
}

/// Run one synchronous, depth-first tick. Actions are atomic; there is no
/// running re-entry across ticks.
pub fn tick(tree: &BehaviorTree, world: &mut WorldState, env: &TickEnv) -> (TickStatus, TickLog) {
    let mut log = TickLog::default();
    let status = tick_node(&tree.root, tree.gate.as_ref(), world, env, &mut log);
    (status, log)
}

fn tick_node(
    node: &Node,
    gate: Option<&ValueRoot>,
    world: &mut WorldState,
    env: &TickEnv,
    log: &mut TickLog,
) -> TickStatus {
    match node {
        Node::Sequence { children, .. } => {
            for child in children {
                match tick_node(child, gate, world, env, log) {
                    TickStatus::Success => {}
                    other => return other,
                }
            }
            TickStatus::Success
        }
        Node::Fallback { children, .. } => {
            for child in children {
                match tick_node(child, gate, world, env, log) {
                    TickStatus::Failure => {}
                    other => return other,
                }
            }
            TickStatus::Failure
        }
        Node::Condition { key, value, .. } => {
            if world.matches(key, value) {
                TickStatus::Success
            } else {
                TickStatus::Failure
            }
        }
        Node::ValueGuard { .. } => {
            let Some(root) = gate else {
                log.guard_failures.push("value-guard without gate".to_string());
                return TickStatus::Failure;
            };
            // The policy must verify unchanged before every tick; with no
            // chain in the env, fall back to the local anchor digest check.
            let ok = match env.ledger {
                Some(ledger) => matches!(
                    verify_ethics_unchanged(&root.policy, ledger),
                    Ok(EthicsVerdict::Unchanged)
                ),
                None => root
                    .policy
                    .anchor
                    .as_ref()
                    .is_some_and(|a| a.digest == root.policy.digest()),
            };
            if ok {
                TickStatus::Success
            } else {
                log.guard_failures.push("tampered-policy".to_string());
                TickStatus::Failure
            }
        }
        Node::Action { request, .. } => {
            if let Some(root) = gate {
                if let Some(reason) = veto_reason(root, request) {
                    log.vetoed.push((request.clone(), reason));
                    return TickStatus::Failure;
                }
            }
            for (k, v) in &request.effect {
                world.set(k.clone(), v.clone());
            }
            log.executed.push(request.clone());
            TickStatus::Success
        }
    }
}

fn veto_reason(root: &ValueRoot, request: &ActionRequest) -> Option<VetoReason> {
    if root.ethics_gate && !root.force_exempt {
        if let Some(rule) = root.policy.forbids(&request.attributes) {
            return Some(VetoReason::EthicsForbidden(rule.id.clone()));
        }
    }
    if root.morality_gate {
        let verdict = if root.force_exempt {
            classify_force_exempt(&request.proposal, &request.attributes, &root.policy)
        } else {
            classify_transaction(&request.proposal)
        };
        match verdict {
            Ok(MoralVerdict::Moral) => {}
            Ok(MoralVerdict::Immoral(reason)) => return Some(VetoReason::Immoral(reason)),
            // Fail closed: an unclassifiable proposal never executes.
            Err(_) => return Some(VetoReason::MalformedProposal),
        }
    } else if root.force_exempt && root.ethics_gate {
        // Morality off, ethics on: exempt agents still answer to the rules.
        if let Some(rule) = root.policy.forbids(&request.attributes) {
            return Some(VetoReason::EthicsForbidden(rule.id.clone()));
        }
    }
    None
}

/// Every vetoed action from a tick, with its classification reason, in
/// leaf order.
pub fn veto_report(log: &TickLog) -> Vec<(ActionRequest, String)> {
    log.vetoed
        .iter()
        .map(|(a, r)| (a.clone(), r.to_string()))
        .collect()
}

/// Emit one component-event transaction per veto (pending until the next
/// seal). Returns the number of events written.
pub fn emit_veto_events(
    log: &TickLog,
    component_id: &[u8; 16],
    author: &str,
    ledger: &mut Ledger,
) -> Result<usize, crate::ledger::LedgerError> {
    for (action, reason) in &log.vetoed {
        let payload = component_payload(
            component_id,
            &[
                ("event", "veto"),
                ("agent", &action.acting_agent),
                ("reason", &reason.to_string()),
            ],
        );
        ledger.append_transaction(Transaction::new(author, TxKind::ComponentEvent, payload))?;
    }
    Ok(log.vetoed.len())
}

// ---------------------------------------------------------------------------
// Tree file format: indented text, one node per line,
// `<kind> [name] [attr=value...]`, two spaces per depth. Round-trips
// byte-identically.

pub fn tree_to_text(tree: &BehaviorTree) -> String {
    let mut out = String::new();
    write_node(&tree.root, 0, &mut out);
    out
}

fn csv(items: &[String]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.join(",")
    }
}

fn bools(items: &[bool]) -> String {
    items
        .iter()
        .map(|b| if *b { "t" } else { "f" })
        .collect::<Vec<_>>()
        .join(",")
}

fn pairs(items: &[(String, String)]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn write_node(node: &Node, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    match node {
        Node::Sequence { name, children } => {
            let _ = writeln!(out, "{indent}sequence{}", opt_name(name));
            for c in children {
                write_node(c, depth + 1, out);
            }
        }
        Node::Fallback { name, children } => {
            let _ = writeln!(out, "{indent}fallback{}", opt_name(name));
            for c in children {
                write_node(c, depth + 1, out);
            }
        }
        Node::Condition { name, key, value } => {
            let _ = writeln!(out, "{indent}condition{} {key}={value}", opt_name(name));
        }
        Node::ValueGuard { digest } => {
            let _ = writeln!(out, "{indent}value-root digest={digest}");
        }
        Node::Action { name, request } => {
            let p = &request.proposal;
            let attrs: Vec<(String, String)> = request
                .attributes
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let _ = writeln!(
                out,
                "{indent}action{} agent={} parties={} consents={} force={} declared={} actual={} third={} attrs={} effect={}",
                opt_name(name),
                request.acting_agent,
                csv(&p.parties),
                bools(&p.consents),
                if p.force_flag { "t" } else { "f" },
                hex_or_dash(&p.declared_terms),
                hex_or_dash(&p.actual_terms),
                csv(&p.affected_third_parties),
                pairs(&attrs),
                pairs(&request.effect),
            );
        }
    }
}

fn opt_name(name: &Option<String>) -> String {
    match name {
        Some(n) => format!(" {n}"),
        None => String::new(),
    }
}

fn hex_or_dash(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        "-".to_string()
    } else {
        hex::encode(bytes)
    }
}

pub fn tree_from_text(text: &str) -> Result<BehaviorTree, BehaviorError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let depth_spaces = raw.len() - raw.trim_start_matches(' ').len();
        if depth_spaces % 2 != 0 {
            return Err(BehaviorError::Parse {
                line: idx + 1,
                message: "odd indentation".to_string(),
            });
        }
        lines.push((idx + 1, depth_spaces / 2, raw.trim_start_matches(' ').to_string()));
    }
    if lines.is_empty() {
        return Err(BehaviorError::Parse {
            line: 0,
            message: "empty tree".to_string(),
        });
    }
    let (root, next) = parse_node(&lines, 0, 0)?;
    if next != lines.len() {
        return Err(BehaviorError::Parse {
            line: lines[next].0,
            message: "multiple roots".to_string(),
        });
    }
    validate(&root)?;
    Ok(BehaviorTree::new(root))
}

fn parse_node(
    lines: &[(usize, usize, String)],
    at: usize,
    depth: usize,
) -> Result<(Node, usize), BehaviorError> {
    let (lineno, line_depth, text) = &lines[at];
    if *line_depth != depth {
        return Err(BehaviorError::Parse {
            line: *lineno,
            message: format!("expected depth {depth}, found {line_depth}"),
        });
    }
    let mut tokens = text.split(' ');
    let kind = tokens.next().unwrap_or_default();
    let rest: Vec<&str> = tokens.collect();
    let err = |message: String| BehaviorError::Parse {
        line: *lineno,
        message,
    };
    let (name, attrs) = split_name_attrs(&rest);
    match kind {
        "sequence" | "fallback" => {
            if !attrs.is_empty() {
                return Err(err("composite nodes take no attributes".to_string()));
            }
            let mut children = Vec::new();
            let mut next = at + 1;
            while next < lines.len() && lines[next].1 == depth + 1 {
                let (child, after) = parse_node(lines, next, depth + 1)?;
                children.push(child);
                next = after;
            }
            let node = if kind == "sequence" {
                Node::Sequence { name, children }
            } else {
                Node::Fallback { name, children }
            };
            Ok((node, next))
        }
        "condition" => {
            if attrs.len() != 1 {
                return Err(err("condition takes exactly one key=value".to_string()));
            }
            let (key, value) = attrs[0].clone();
            Ok((
                Node::Condition { name, key, value },
                at + 1,
            ))
        }
        "value-root" => {
            let digest = attrs
                .iter()
                .find(|(k, _)| k == "digest")
                .and_then(|(_, v)| Digest::from_hex(v))
                .ok_or_else(|| err("value-root requires digest=<hex>".to_string()))?;
            Ok((Node::ValueGuard { digest }, at + 1))
        }
        "action" => {
            let node = parse_action(name, &attrs).map_err(err)?;
            Ok((node, at + 1))
        }
        other => Err(err(format!("unknown node kind `{other}`"))),
    }
}

fn split_name_attrs(tokens: &[&str]) -> (Option<String>, Vec<(String, String)>) {
    let mut name = None;
    let mut attrs = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        match tok.split_once('=') {
            Some((k, v)) => attrs.push((k.to_string(), v.to_string())),
            None if i == 0 => name = Some(tok.to_string()),
            None => attrs.push((tok.to_string(), String::new())),
        }
    }
    (name, attrs)
}

fn parse_action(name: Option<String>, attrs: &[(String, String)]) -> Result<Node, String> {
    let get = |key: &str| -> Result<&str, String> {
        attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| format!("action missing `{key}=`"))
    };
    for (k, _) in attrs {
        if ![
            "agent", "parties", "consents", "force", "declared", "actual", "third", "attrs",
            "effect",
        ]
        .contains(&k.as_str())
        {
            return Err(format!("unknown action attribute `{k}`"));
        }
    }
    let parse_csv = |s: &str| -> Vec<String> {
        if s == "-" {
            Vec::new()
        } else {
            s.split(',').map(str::to_string).collect()
        }
    };
    let parse_hex = |s: &str| -> Result<Vec<u8>, String> {
        if s == "-" {
            Ok(Vec::new())
        } else {
            hex::decode(s).map_err(|_| "bad hex terms".to_string())
        }
    };
    let parse_pairs = |s: &str| -> Result<Vec<(String, String)>, String> {
        if s == "-" {
            return Ok(Vec::new());
        }
        s.split(';')
            .map(|p| {
                p.split_once(':')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| format!("bad pair `{p}`"))
            })
            .collect()
    };
    let consents: Vec<bool> = {
        let s = get("consents")?;
        if s == "-" {
            Vec::new()
        } else {
            s.split(',')
                .map(|c| match c {
                    "t" => Ok(true),
                    "f" => Ok(false),
                    other => Err(format!("bad consent flag `{other}`")),
                })
                .collect::<Result<_, _>>()?
        }
    };
    let proposal = TransactionProposal {
        parties: parse_csv(get("parties")?),
        consents,
        declared_terms: parse_hex(get("declared")?)?,
        actual_terms: parse_hex(get("actual")?)?,
        force_flag: get("force")? == "t",
        affected_third_parties: parse_csv(get("third")?),
    };
    let mut request = ActionRequest::new(get("agent")?.to_string(), proposal);
    for (k, v) in parse_pairs(get("attrs")?)? {
        request.attributes.insert(k, v);
    }
    request.effect = parse_pairs(get("effect")?)?;
    Ok(Node::Action { name, request })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::ConsensusConfig;
    use crate::morality::{anchor_ethics, baseline_policy};

    const QUORUM: [&str; 3] = ["v0", "v1", "v2"];

    fn anchored_setup() -> (Ledger, EthicsPolicy) {
        let mut ledger = Ledger::new(
            &["v0", "v1", "v2", "v3"],
            ConsensusConfig::two_thirds(4),
            11,
        )
        .unwrap();
        let mut policy = baseline_policy();
        anchor_ethics(&mut policy, &mut ledger, "v0", &QUORUM).unwrap();
        (ledger, policy)
    }

    fn moral_action(agent: &str) -> ActionRequest {
        ActionRequest::new(agent, TransactionProposal::voluntary(agent, "peer", b"fair"))
            .with_attr("action", "exchange")
            .with_effect("last_actor", agent)
    }

    fn forceful_action(agent: &str) -> ActionRequest {
        let mut p = TransactionProposal::voluntary(agent, "victim", b"coerced");
        p.force_flag = true;
        ActionRequest::new(agent, p).with_attr("action", "seize")
    }

    #[test]
    fn gating_adds_one_sequence_level() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(moral_action("a")));
        let raw_depth = raw.root.depth();
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        assert_eq!(gated.root.depth(), raw_depth + 1);
        match &gated.root {
            Node::Sequence { children, .. } => {
                assert!(matches!(children[0], Node::ValueGuard { .. }));
                assert!(matches!(children[1], Node::Action { .. }));
            }
            other => panic!("expected sequence root, got {other:?}"),
        }
    }

    #[test]
    fn gating_is_idempotent() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(moral_action("a")));
        let gated = build_gated_tree(raw, ValueRoot::new(policy.clone()), &ledger).unwrap();
        let twice = build_gated_tree(gated.clone(), ValueRoot::new(policy), &ledger).unwrap();
        assert_eq!(twice, gated);
    }

    #[test]
    fn gating_rejects_tampered_policy() {
        let (ledger, mut policy) = anchored_setup();
        policy.rules[0].verdict = crate::morality::RuleVerdict::Allow;
        let raw = BehaviorTree::new(Node::action(moral_action("a")));
        assert_eq!(
            build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap_err(),
            BehaviorError::TamperedPolicy
        );
    }

    #[test]
    fn gating_rejects_malformed_tree() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::sequence(vec![]));
        assert!(matches!(
            build_gated_tree(raw, ValueRoot::new(policy), &ledger),
            Err(BehaviorError::MalformedTree(_))
        ));
    }

    #[test]
    fn moral_action_executes_through_gate() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(moral_action("a")));
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        let mut world = WorldState::new();
        let (status, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
        assert_eq!(status, TickStatus::Success);
        assert_eq!(log.executed.len(), 1);
        assert!(log.vetoed.is_empty());
        assert_eq!(world.get("last_actor"), Some("a"));
    }

    #[test]
    fn immoral_action_vetoed() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(forceful_action("a")));
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        let mut world = WorldState::new();
        let (status, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
        assert_eq!(status, TickStatus::Failure);
        assert!(log.executed.is_empty());
        assert_eq!(log.vetoed.len(), 1);
        assert_eq!(
            log.vetoed[0].1,
            VetoReason::Immoral(ImmoralReason::Force)
        );
    }

    #[test]
    fn ungated_tree_executes_same_immoral_action() {
        let raw = BehaviorTree::new(Node::action(forceful_action("a")));
        let mut world = WorldState::new();
        let (status, log) = tick(&raw, &mut world, &TickEnv::default());
        assert_eq!(status, TickStatus::Success);
        assert_eq!(log.executed.len(), 1);
    }

    #[test]
    fn tampered_policy_fails_whole_tick() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(moral_action("a")));
        let mut gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        // Tamper after gating.
        if let Some(root) = gated.gate.as_mut() {
            root.policy.rules[0].verdict = crate::morality::RuleVerdict::Allow;
        }
        let mut world = WorldState::new();
        let (status, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
        assert_eq!(status, TickStatus::Failure);
        assert!(log.executed.is_empty());
        assert_eq!(log.guard_failures, vec!["tampered-policy".to_string()]);
    }

    #[test]
    fn fallback_takes_first_success() {
        let tree = BehaviorTree::new(Node::fallback(vec![
            Node::condition("door", "open"),
            Node::action(moral_action("a")),
        ]));
        let mut world = WorldState::new();
        let (status, log) = tick(&tree, &mut world, &TickEnv::default());
        assert_eq!(status, TickStatus::Success);
        assert_eq!(log.executed.len(), 1, "condition failed, action ran");

        world.set("door", "open");
        let (status, log) = tick(&tree, &mut world, &TickEnv::default());
        assert_eq!(status, TickStatus::Success);
        assert!(log.executed.is_empty(), "condition succeeded first");
    }

    #[test]
    fn sequence_stops_at_first_failure() {
        let tree = BehaviorTree::new(Node::sequence(vec![
            Node::condition("gate", "up"),
            Node::action(moral_action("a")),
        ]));
        let mut world = WorldState::new();
        let (status, log) = tick(&tree, &mut world, &TickEnv::default());
        assert_eq!(status, TickStatus::Failure);
        assert!(log.executed.is_empty());
    }

    #[test]
    fn veto_report_in_leaf_order() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::fallback(vec![
            Node::action(forceful_action("first")),
            Node::action(forceful_action("second")),
        ]));
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        let mut world = WorldState::new();
        let (_, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
        let report = veto_report(&log);
        assert_eq!(report.len(), 2);
        assert_eq!(report[0].0.acting_agent, "first");
        assert_eq!(report[1].0.acting_agent, "second");

        let empty = TickLog::default();
        assert!(veto_report(&empty).is_empty());
    }

    #[test]
    fn veto_events_land_on_ledger() {
        let (mut ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::action(forceful_action("a")));
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        let mut world = WorldState::new();
        let (_, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
        let component = [9u8; 16];
        let n = emit_veto_events(&log, &component, "v0", &mut ledger).unwrap();
        assert_eq!(n, 1);
        ledger.approve_and_seal(&QUORUM).unwrap();
        let events = ledger
            .query_audit_trail(&crate::ledger::AuditFilter::by_component(component))
            .unwrap();
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn tick_is_deterministic() {
        let (ledger, policy) = anchored_setup();
        let raw = BehaviorTree::new(Node::sequence(vec![
            Node::condition("power", "on"),
            Node::fallback(vec![
                Node::action(forceful_action("x")),
                Node::action(moral_action("y")),
            ]),
        ]));
        let gated = build_gated_tree(raw, ValueRoot::new(policy), &ledger).unwrap();
        let run = || {
            let mut world = WorldState::new();
            world.set("power", "on");
            let (status, log) = tick(&gated, &mut world, &TickEnv { ledger: Some(&ledger) });
            (status, log.executed.len(), log.vetoed.len(), world)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tree_text_round_trip() {
        let tree = BehaviorTree::new(Node::Sequence {
            name: Some("patrol".to_string()),
            children: vec![
                Node::condition("power", "on"),
                Node::fallback(vec![
                    Node::action(moral_action("a")),
                    Node::action(forceful_action("b")),
                ]),
            ],
        });
        let text = tree_to_text(&tree);
        let parsed = tree_from_text(&text).unwrap();
        assert_eq!(tree_to_text(&parsed), text);
        assert_eq!(parsed.root, tree.root);
    }

    #[test]
    fn tree_parse_rejects_unknown_kind() {
        let err = tree_from_text("wiggle foo=bar\n").unwrap_err();
        assert!(matches!(err, BehaviorError::Parse { line: 1, .. }));
    }
}
