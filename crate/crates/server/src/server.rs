//! WebSocket transport. Each connection runs one loop that reads client
//! frames and steps its session on a timer; a separate task writes the
//! ordered outbound queue to the socket.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::connection::{Connection, Hub};
use crate::pacing::Pacer;
use crate::protocol::{ErrorCode, ErrorPayload, ServerBody, ServerMessage};

pub const DEFAULT_PORT: u16 = 8731;
pub const PORT_ENV: &str = "GM3_SIM_PORT";

/// Outbound frames buffered per connection before state messages are
/// deferred (their trace points ride along with the next one).
const OUTBOUND_CAPACITY: usize = 64;

/// Port from `GM3_SIM_PORT`, or [`DEFAULT_PORT`] when unset.
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{PORT_ENV}=`{v}` is not a port number")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/", get(|| async { "gm3 simulation server; connect a WebSocket client to /ws\n" }))
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", get(list_sessions))
        .route("/ws", get(upgrade))
        .with_state(hub)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, hub: Arc<Hub>) -> std::io::Result<()> {
    axum::serve(listener, router(hub)).await
}

/// Binds `addr` and serves.
pub async fn run(addr: SocketAddr, hub: Arc<Hub>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on ws://{}/ws", listener.local_addr()?);
    serve(listener, hub).await
}

async fn list_sessions(State(hub): State<Arc<Hub>>) -> impl IntoResponse {
    Json(hub.sessions())
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| handle_socket(socket, hub))
}

struct Outbound {
    tx: mpsc::Sender<String>,
    seq: u64,
}

impl Outbound {
    fn frame(&self, body: &ServerBody) -> String {
        serde_json::to_string(&ServerMessage { seq: self.seq + 1, body: body.clone() }).expect("serializable")
    }

    /// Queues a frame, waiting for room. Returns `false` once the writer is gone.
    async fn send(&mut self, body: &ServerBody) -> bool {
        let text = self.frame(body);
        if self.tx.send(text).await.is_err() {
            return false;
        }
        self.seq += 1;
        true
    }

    /// Queues a frame only if there is room.
    fn try_send(&mut self, body: &ServerBody) -> bool {
        let text = self.frame(body);
        if self.tx.try_send(text).is_err() {
            return false;
        }
        self.seq += 1;
        true
    }
}

fn tick_period(conn: &Connection) -> Duration {
    let dt = conn.session().map_or(0.01, |s| s.config().dt);
    Duration::from_secs_f64(dt.clamp(0.001, 0.05))
}

async fn handle_socket(socket: WebSocket, hub: Arc<Hub>) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::channel::<String>(OUTBOUND_CAPACITY);
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    let mut out = Outbound { tx, seq: 0 };
    let mut conn = hub.connect();

    // open the default session right away so a client can drive immediately
    let mut replies = conn.configure(&Default::default(), None);
    let mut clock =
        (Instant::now(), Pacer::new(conn.session().map_or(0.01, |s| s.config().dt), Pacer::DEFAULT_MAX_PER_TICK));
    let mut ticker = tokio::time::interval(tick_period(&conn));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);

    'conn: loop {
        for body in replies.drain(..) {
            if !out.send(&body).await {
                break 'conn;
            }
        }
        let reopened_before = conn.session().map(|s| s.id());
        tokio::select! {
            frame = stream.next() => {
                match frame {
                    Some(Ok(Message::Text(text))) => replies = conn.handle_text(text.as_str()),
                    Some(Ok(Message::Binary(_))) => {
                        replies = vec![ServerBody::Error(ErrorPayload {
                            code: ErrorCode::BadMessage,
                            message: "binary frames are not supported".into(),
                            in_reply_to: None,
                        })];
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => {}
                }
                if conn.session().map(|s| s.id()) != reopened_before {
                    let dt = conn.session().map_or(0.01, |s| s.config().dt);
                    clock = (Instant::now(), Pacer::new(dt, Pacer::DEFAULT_MAX_PER_TICK));
                    ticker = tokio::time::interval(tick_period(&conn));
                    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
                }
            }
            _ = ticker.tick() => {
                let Some(session) = conn.session_mut() else { continue };
                let n = clock.1.due(clock.0.elapsed().as_secs_f64());
                for _ in 0..n {
                    if session.step() {
                        let state = session.pending_state();
                        // a full queue defers the message; its trace points stay pending
                        if out.try_send(&ServerBody::State(state.clone())) {
                            session.commit_streamed(&state);
                        }
                    }
                }
            }
        }
    }
    drop(out);
    drop(conn);
    let _ = writer.await;
}
