//! HTTP and WebSocket front end.
//!
//! Each socket gets one session thread and a sequential dispatcher: a chat
//! query is answered before the next message is read, so replies come back
//! in request order. Bad input never closes the connection.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use hairforge_core::protocol::{parse_command, Candidate, Command, Envelope, ErrorCode, Event, ProtocolError, SimAction};
use hairforge_core::retrieval::{embed_text, retrieve_top_k, route_intent, Intent, DEFAULT_TOP_K};
use serde_json::json;
use tokio::sync::mpsc;

use crate::session::{Outbound, SessionHandle};
use crate::state::AppState;

/// Outbound messages buffered per socket before frames start dropping.
pub const OUTBOUND_CAPACITY: usize = 16;

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/healthz", get(healthz))
        .route("/styles", get(list_styles))
        .route("/styles/{id}/thumbnail", get(thumbnail))
        .with_state(app)
}

/// Serves until the listener fails.
pub async fn serve(app: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}

fn thumbnail_url(id: &str) -> String {
    format!("/styles/{id}/thumbnail")
}

async fn healthz(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "styles": app.styles.len(),
        "indexed": app.index.len(),
        "provider": app.index.provider_id(),
    }))
}

async fn list_styles(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let list: Vec<_> = app
        .styles
        .values()
        .map(|h| {
            json!({
                "id": h.id,
                "caption": h.caption,
                "strands": h.strands.len(),
                "vertices": h.vertex_count(),
                "thumbnail": thumbnail_url(&h.id),
            })
        })
        .collect();
    Json(json!(list))
}

async fn thumbnail(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let result = tokio::task::spawn_blocking(move || app.thumbnail(&id).map(|r| r.map_err(|e| e.to_string()))).await;
    match result {
        Ok(Some(Ok(png))) => ([(header::CONTENT_TYPE, "image/png")], png.as_ref().clone()).into_response(),
        Ok(Some(Err(e))) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e}))).into_response(),
        Ok(None) => (StatusCode::NOT_FOUND, Json(json!({"error": "no such hairstyle"}))).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e.to_string()}))).into_response(),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| ws_session(socket, app))
}

async fn ws_session(socket: WebSocket, app: Arc<AppState>) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::channel::<Outbound>(OUTBOUND_CAPACITY);
    let session = SessionHandle::spawn(app.clone(), out_tx.clone());
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            let msg = match msg {
                Outbound::Text(s) => Message::Text(s.into()),
                Outbound::Frame(b) => Message::Binary(b.into()),
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let reply = match msg {
            Message::Text(text) => dispatch_text(&app, &session, text.as_str()).await,
            Message::Binary(_) => {
                Some(ProtocolError::new(ErrorCode::BadJson, "binary messages are not accepted; send JSON text").to_event())
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => None,
        };
        if let Some(ev) = reply {
            if out_tx.send(Outbound::Text(ev.to_json())).await.is_err() {
                break;
            }
        }
    }
    drop(session);
    drop(out_tx);
    writer.abort();
}

/// Handles one text message; returns the event to send directly, if any.
/// Simulation commands are answered by the session thread instead.
async fn dispatch_text(app: &Arc<AppState>, session: &SessionHandle, text: &str) -> Option<Event> {
    let env = match parse_command(text) {
        Ok(env) => env,
        Err(e) => return Some(e.to_event()),
    };
    let id = env.id;
    let forward = |command: Command| {
        if session.send(Envelope { id, command }) {
            None
        } else {
            Some(ProtocolError::new(ErrorCode::Internal, "session loop has stopped").with_id(id).to_event())
        }
    };
    let Command::Chat { text } = env.command else {
        return forward(env.command);
    };
    if text.trim().is_empty() {
        return Some(ProtocolError::new(ErrorCode::EmptyText, "chat text is empty").with_id(id).to_event());
    }
    match route_intent(&text) {
        Intent::Retrieve { query } => Some(retrieve(app.clone(), query, id).await),
        Intent::Wind { on, strength } => forward(Command::Wind {
            enabled: on,
            strength,
            direction: None,
            gust_amplitude: None,
            gust_frequency: None,
        }),
        Intent::Simulate { on } => {
            forward(Command::SimControl { action: if on { SimAction::Start } else { SimAction::Stop } })
        }
        Intent::Render { attributes } => forward(Command::Render { attributes, camera: None, seed: 0 }),
        Intent::Unknown { raw } => Some(
            ProtocolError::new(ErrorCode::EmptyText, format!("nothing to act on in `{raw}`")).with_id(id).to_event(),
        ),
    }
}

async fn retrieve(app: Arc<AppState>, query: String, id: Option<u64>) -> Event {
    let q = query.clone();
    let joined = tokio::task::spawn_blocking(move || {
        let emb = embed_text(&q, app.embedder.as_ref())?;
        let top = retrieve_top_k(&app.index, &emb, DEFAULT_TOP_K)?;
        Ok::<_, hairforge_core::retrieval::RetrievalError>(
            top.entries
                .into_iter()
                .map(|(sid, score)| Candidate {
                    caption: app.styles.get(&sid).map(|h| h.caption.clone()).unwrap_or_default(),
                    thumbnail: thumbnail_url(&sid),
                    id: sid,
                    score,
                })
                .collect::<Vec<_>>(),
        )
    })
    .await;
    match joined {
        Ok(Ok(entries)) => Event::Candidates { query, entries },
        Ok(Err(e)) => ProtocolError::new(ErrorCode::RetrievalFailed, e.to_string()).with_id(id).to_event(),
        Err(e) => ProtocolError::new(ErrorCode::Internal, e.to_string()).with_id(id).to_event(),
    }
}
