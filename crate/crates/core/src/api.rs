//! JSON requests and payloads shared by every front end, so that the
//! command line, the HTTP service and the Python bindings agree byte for
//! byte on the same request.

use serde::Deserialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::cfe::{self, CfeError, ControlSpec};
use crate::schema::{Instance, SchemaError};
use crate::workspace::{Workspace, WorkspaceError};

/// Result cap when a request names none.
pub const DEFAULT_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error(transparent)]
    Cfe(#[from] CfeError),
    #[error(transparent)]
    Instance(#[from] WorkspaceError),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("limit must be at least 1 (unlimited enumeration is only available from the command line)")]
    InvalidLimit,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Cfe(e) => e.code(),
            ApiError::Instance(_) => "invalid-instance",
            ApiError::Malformed(_) => "malformed-request",
            ApiError::InvalidLimit => "invalid-limit",
        }
    }

    /// 422 when the body could not be read as a request at all.
    pub fn status(&self) -> u16 {
        match self {
            ApiError::Malformed(_) => 422,
            _ => 400,
        }
    }

    pub fn to_json(&self) -> Json {
        json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub instance: Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainRequest {
    pub instance: Json,
    #[serde(default)]
    pub controls: ControlSpec,
    /// Highest cost to search; all costs up to the feature count if absent.
    #[serde(default)]
    pub cost: Option<usize>,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolantRequest {
    pub instance: Json,
    #[serde(default)]
    pub controls: ControlSpec,
}

/// Parses a request body. Anything that is not the expected shape is
/// malformed.
pub fn parse_request<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

/// The wire form of every payload.
pub fn render(payload: &Json) -> String {
    serde_json::to_string(payload).expect("JSON values serialize")
}

pub fn instance(ws: &Workspace, json: &Json) -> Result<Instance, ApiError> {
    Ok(ws.instance(json)?)
}

/// Checks names against every feature of the schema file and keeps the
/// controls of the features the rules use.
pub fn controls(ws: &Workspace, spec: &ControlSpec) -> Result<ControlSpec, ApiError> {
    let mut kept = ControlSpec::new();
    for (f, c) in spec.iter() {
        if ws.full_schema().get(f).is_none() {
            return Err(CfeError::Schema(SchemaError::UnknownFeature(f.to_string())).into());
        }
        if ws.schema().get(f).is_some() {
            kept = kept.set(f, c);
        }
    }
    Ok(kept)
}

pub fn health() -> Json {
    json!({ "ok": true })
}

pub fn schema(ws: &Workspace) -> Json {
    ws.full_schema().to_json()
}

pub fn classify(ws: &Workspace, req: &ClassifyRequest) -> Result<Json, ApiError> {
    let inst = instance(ws, &req.instance)?;
    Ok(cfe::classify(ws, &inst)?.to_json())
}

/// `None` means no cap. Zero is unlimited only where the caller allows it.
pub fn resolve_limit(limit: Option<usize>, allow_unlimited: bool) -> Result<Option<usize>, ApiError> {
    match limit {
        None => Ok(Some(DEFAULT_LIMIT)),
        Some(0) if allow_unlimited => Ok(None),
        Some(0) => Err(ApiError::InvalidLimit),
        Some(n) => Ok(Some(n)),
    }
}

pub fn explain(ws: &Workspace, req: &ExplainRequest, allow_unlimited: bool) -> Result<Json, ApiError> {
    let limit = resolve_limit(req.limit, allow_unlimited)?;
    let inst = instance(ws, &req.instance)?;
    let spec = controls(ws, &req.controls)?;
    let results = cfe::counterfactuals(ws, &inst, &spec, req.cost)?.take(limit.unwrap_or(usize::MAX));
    let mut out = Vec::new();
    for r in results {
        out.push(r?.to_json(ws.schema()));
    }
    Ok(json!({ "results": out }))
}

pub fn interpolant(ws: &Workspace, req: &InterpolantRequest) -> Result<Json, ApiError> {
    let inst = instance(ws, &req.instance)?;
    let spec = controls(ws, &req.controls)?;
    Ok(cfe::craig_interpolant(ws, &inst, &spec)?.to_json(ws.schema()))
}

pub fn enumerate(ws: &Workspace, limit: Option<usize>, allow_unlimited: bool) -> Result<Json, ApiError> {
    let limit = resolve_limit(limit, allow_unlimited)?.unwrap_or(usize::MAX);
    let results = cfe::enumerate_transitions(ws, limit)?;
    Ok(json!({ "results": results.iter().map(|r| r.to_json(ws.schema())).collect::<Vec<_>>() }))
}
