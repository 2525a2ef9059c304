//! A local chat-completion endpoint for tests and dry runs.
//!
//! Replies are chosen by the number of assistant turns in the posted history,
//! so one stub can serve many concurrent dialogues.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use haunted_core::messages::InstructionVariant;

use crate::agent::walkthrough_commands;

#[derive(Debug, Clone, Default)]
pub struct StubScript {
    /// Reply for assistant turn `i`; the last entry repeats once exhausted.
    pub replies: Vec<String>,
    /// Statuses returned, in order, before any successful response.
    pub failures: Vec<u16>,
    /// When set every request fails with this status.
    pub always_fail: Option<u16>,
}

impl StubScript {
    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> StubScript {
        StubScript {
            replies: replies.into_iter().map(Into::into).collect(),
            ..StubScript::default()
        }
    }

    /// The 12-move escape in the variant's command form.
    pub fn optimal(variant: InstructionVariant) -> StubScript {
        StubScript::replies(walkthrough_commands(variant).iter().map(|c| c.to_string()))
    }

    pub fn with_failures(mut self, failures: Vec<u16>) -> StubScript {
        self.failures = failures;
        self
    }

    pub fn always_failing(status: u16) -> StubScript {
        StubScript {
            always_fail: Some(status),
            ..StubScript::default()
        }
    }
}

#[derive(Debug, Default)]
struct Shared {
    script: StubScript,
    served: usize,
    requests: Vec<RecordedRequest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub authorization: Option<String>,
    pub body: Value,
}

/// A running stub; shut down on drop.
pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Mutex<Shared>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral localhost port and serves on a background thread.
    pub fn start(script: StubScript) -> std::io::Result<StubServer> {
        let shared = Arc::new(Mutex::new(Shared {
            script,
            ..Shared::default()
        }));
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let app = Router::new()
            .route("/v1/chat/completions", post(complete))
            .route("/", post(complete))
            .with_state(shared.clone());
        let (tx, rx) = oneshot::channel::<()>();
        let thread = thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(StubServer {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.lock().expect("stub lock").requests.clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn complete(
    State(shared): State<Arc<Mutex<Shared>>>,
    headers: axum::http::HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    let mut shared = shared.lock().expect("stub lock");
    shared.requests.push(RecordedRequest {
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned),
        body: body.clone(),
    });
    let failure = shared
        .script
        .always_fail
        .or_else(|| shared.script.failures.get(shared.served).copied());
    shared.served += 1;
    if let Some(code) = failure {
        let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        return (status, Json(json!({"error": "stub failure"}))).into_response();
    }
    let turn = body["messages"]
        .as_array()
        .map(|ms| ms.iter().filter(|m| m["role"] == "assistant").count())
        .unwrap_or(0);
    let replies = &shared.script.replies;
    let text = replies
        .get(turn)
        .or(replies.last())
        .cloned()
        .unwrap_or_default();
    Json(json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]
    }))
    .into_response()
}
