//! Canonical JSON documents.
//!
//! Every document is written with object keys sorted, id-keyed collections
//! sorted by id, two-space indentation and a trailing LF, so that
//! `save(load(save(x)))` is byte-identical to `save(x)`. Loaders map every
//! malformed input to a positioned `PARSE_ERROR`, a `SCHEMA_ERROR` carrying
//! a JSON path, or a `VERSION_ERROR`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain_model::DomainModel;
use crate::error::{Error, Result};
use crate::item_pool::ItemPool;
use crate::learner_model::IndividualModel;
use crate::micro_assessment::SessionState;
use crate::overlay::OverlayReport;
use crate::recommendation::{LearningPlan, ResourceRecommendation};
use crate::{SCHEMA_MAJOR, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarning {
    pub code: String,
    pub message: String,
}

/// A decoded document plus the non-fatal issues found while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<LoadWarning>,
}

/// Plans and the resource rankings that accompany them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub target_concept: String,
    pub plans: Vec<LearningPlan>,
    #[serde(default)]
    pub resources: Vec<ResourceRecommendation>,
}

fn parse(bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(idx) => message[..idx].to_owned(),
        None => message.to_owned(),
    }
}

fn check_version(value: &Value) -> Result<Vec<LoadWarning>> {
    let Some(version) = value.get("schema_version").and_then(Value::as_str) else {
        // Missing or mistyped versions surface as schema errors during decoding.
        return Ok(Vec::new());
    };
    let (major, minor) = version.split_once('.').ok_or_else(|| Error::Version(version.to_owned()))?;
    if major != SCHEMA_MAJOR || minor.is_empty() || !minor.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Version(version.to_owned()));
    }
    let current_minor = SCHEMA_VERSION.split_once('.').map(|(_, m)| m).unwrap_or("0");
    if minor != current_minor {
        return Ok(vec![LoadWarning {
            code: "UNKNOWN_MINOR".into(),
            message: format!("schema version {version} is newer or older than {SCHEMA_VERSION}; unknown fields are ignored"),
        }]);
    }
    Ok(Vec::new())
}

fn decode<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = String::from("$");
        let segments = e.path().to_string();
        if segments != "." {
            if !segments.starts_with('[') {
                path.push('.');
            }
            path.push_str(&segments);
        }
        let message = strip_position(&e.inner().to_string());
        if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.strip_suffix('`')) {
            path.push('.');
            path.push_str(field);
        }
        Error::Schema { path, message }
    })
}

fn load<T: DeserializeOwned>(bytes: &[u8]) -> Result<Loaded<T>> {
    let value = parse(bytes)?;
    let warnings = check_version(&value)?;
    Ok(Loaded { value: decode(value)?, warnings })
}

pub fn load_domain_model(bytes: &[u8]) -> Result<Loaded<DomainModel>> {
    load(bytes)
}

pub fn load_item_pool(bytes: &[u8]) -> Result<Loaded<ItemPool>> {
    load(bytes)
}

/// Loads an individual model, sorting out-of-order evidence (with an
/// `EVIDENCE_ORDER` warning) and rejecting duplicate records.
pub fn load_individual(bytes: &[u8]) -> Result<Loaded<IndividualModel>> {
    let mut loaded: Loaded<IndividualModel> = load(bytes)?;
    if loaded.value.sort_evidence() {
        loaded.warnings.push(LoadWarning {
            code: "EVIDENCE_ORDER".into(),
            message: "evidence was not sorted by (timestamp, item_id); sorted on load".into(),
        });
    }
    let evidence = &loaded.value.evidence;
    if let Some(i) = (1..evidence.len())
        .find(|&i| (evidence[i - 1].timestamp, &evidence[i - 1].item_id) == (evidence[i].timestamp, &evidence[i].item_id))
    {
        return Err(Error::Schema {
            path: "$.evidence".into(),
            message: format!("duplicate evidence for item `{}` at {}", evidence[i].item_id, evidence[i].timestamp),
        });
    }
    Ok(loaded)
}

pub fn load_session(bytes: &[u8]) -> Result<Loaded<SessionState>> {
    let loaded: Loaded<SessionState> = load(bytes)?;
    let s = &loaded.value;
    if s.interval.low > s.interval.high || s.interval.high > crate::domain_model::MAX_PROCESS_LEVEL {
        return Err(Error::Schema { path: "$.interval".into(), message: "interval must satisfy 0 <= low <= high <= 6".into() });
    }
    Ok(loaded)
}

pub fn load_overlay_report(bytes: &[u8]) -> Result<Loaded<OverlayReport>> {
    load(bytes)
}

pub fn load_plan(bytes: &[u8]) -> Result<Loaded<PlanDocument>> {
    load(bytes)
}

pub fn save_domain_model(model: &DomainModel) -> Vec<u8> {
    let mut model = model.clone();
    model.canonicalize();
    to_canonical_bytes(&model)
}

pub fn save_item_pool(pool: &ItemPool) -> Vec<u8> {
    to_canonical_bytes(pool)
}

pub fn save_individual(individual: &IndividualModel) -> Vec<u8> {
    if individual.is_sorted() {
        return to_canonical_bytes(individual);
    }
    let mut sorted = individual.clone();
    sorted.sort_evidence();
    to_canonical_bytes(&sorted)
}

pub fn save_session(session: &SessionState) -> Vec<u8> {
    to_canonical_bytes(session)
}

pub fn save_overlay_report(report: &OverlayReport) -> Vec<u8> {
    to_canonical_bytes(report)
}

pub fn save_plan(plan: &PlanDocument) -> Vec<u8> {
    to_canonical_bytes(plan)
}

/// Serializes any value as canonical JSON bytes.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    to_canonical_string(value).into_bytes()
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("documents serialize to JSON");
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Array(items) if !items.is_empty() => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            newline(out, depth);
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[key], depth + 1);
            }
            newline(out, depth);
            out.push('}');
        }
        Value::Array(_) => out.push_str("[]"),
        Value::Object(_) => out.push_str("{}"),
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}
