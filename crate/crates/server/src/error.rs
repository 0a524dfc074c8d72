use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use cmc_core::derivation::DerivationError;
use cmc_core::disambiguation::ResolveError;
use cmc_core::graph::GraphError;
use cmc_core::session::SessionError;

/// Error body shared by every endpoint.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Vec<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: Vec::new() }
    }

    pub fn with_details(mut self, details: Vec<Value>) -> Self {
        self.details = details;
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session with id `{id}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

fn graph_error(e: &GraphError) -> (StatusCode, &'static str) {
    match e {
        GraphError::GraphTooLarge { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "GraphTooLarge"),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "GraphError"),
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        let (status, code, details): (StatusCode, &'static str, Vec<Value>) = match &e {
            SessionError::Validation(diags) => (
                unprocessable,
                "ValidationFailed",
                diags
                    .iter()
                    .map(|d| json!({"kind": format!("{:?}", d.kind), "line": d.span.line, "col": d.span.col, "message": d.message}))
                    .collect(),
            ),
            SessionError::Profile(p) => (unprocessable, "DataUnreadable", vec![json!({"message": p.to_string()})]),
            SessionError::Data(errs) => (
                unprocessable,
                "DataMismatch",
                errs.iter().map(|d| json!({"message": d.to_string(), "error": d})).collect(),
            ),
            SessionError::Resolve(r) => match r {
                ResolveError::StaleAmbiguity(_) => (StatusCode::CONFLICT, "StaleAmbiguity", vec![]),
                ResolveError::UnknownAmbiguity(_) => (unprocessable, "UnknownAmbiguity", vec![]),
                ResolveError::ChoiceOutOfRange { .. } => (unprocessable, "ChoiceOutOfRange", vec![]),
                ResolveError::Graph(g) => {
                    let (s, c) = graph_error(g);
                    (s, c, vec![])
                }
            },
            SessionError::Derivation(d) => {
                let code = match d {
                    DerivationError::RefinementIncomplete => "RefinementIncomplete",
                    DerivationError::DegenerateInteraction { .. } => "DegenerateInteraction",
                    DerivationError::InvalidFamilyLink(_) => "InvalidFamilyLink",
                    DerivationError::AddedCovariateNotSuggested(_) => "AddedCovariateNotSuggested",
                    DerivationError::AddedInteractionNotSuggested(_) => "AddedInteractionNotSuggested",
                    DerivationError::MissingFamilyChoice => "MissingFamilyChoice",
                    DerivationError::UnknownDependentVariable(_) => "UnknownDependentVariable",
                    DerivationError::Graph(g) => graph_error(g).1,
                };
                (unprocessable, code, vec![])
            }
            SessionError::Graph(g) => {
                let (s, c) = graph_error(g);
                (s, c, vec![])
            }
            SessionError::Codegen(_) => (StatusCode::INTERNAL_SERVER_ERROR, "CodegenFailed", vec![]),
            SessionError::WrongPhase { .. } => (StatusCode::CONFLICT, "WrongPhase", vec![]),
            SessionError::NotFinalized => (StatusCode::CONFLICT, "NotFinalized", vec![]),
        };
        ApiError::new(status, code, message).with_details(details)
    }
}
