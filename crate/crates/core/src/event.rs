//! Line-oriented `key=value` payload convention shared by every module
//! that writes events to the ledger, so module state can be replayed from
//! the audit trail alone.
//!
//! Component events additionally carry the 16-byte component id as a raw
//! prefix ahead of the text, which is what the audit-trail component
//! filter matches on.

/// Render `key=value` lines (LF-terminated, order as given).
pub fn kv_payload(pairs: &[(&str, &str)]) -> Vec<u8> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out.into_bytes()
}

/// Get the value for `key` from a `key=value` payload body.
pub fn kv_get<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    body.lines().find_map(|line| {
        let (k, v) = line.split_once('=')?;
        (k == key).then_some(v)
    })
}

/// Component-event payload: 16-byte id prefix, then `key=value` lines.
pub fn component_payload(id: &[u8; 16], pairs: &[(&str, &str)]) -> Vec<u8> {
    let mut out = id.to_vec();
    out.extend_from_slice(&kv_payload(pairs));
    out
}

/// Split a component-event payload into (id, text body).
pub fn split_component_payload(payload: &[u8]) -> Option<([u8; 16], &str)> {
    if payload.len() < 16 {
        return None;
    }
    let id: [u8; 16] = payload[..16].try_into().ok()?;
    let body = std::str::from_utf8(&payload[16..]).ok()?;
    Some((id, body))
}

/// Text body of a plain (non-component) payload.
pub fn payload_text(payload: &[u8]) -> Option<&str> {
    std::str::from_utf8(payload).ok()
}
