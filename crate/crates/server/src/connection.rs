//! Per-connection protocol state machine and the shared session registry.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::protocol::{
    ClientBody, ClientMessage, ConfigureRequest, ErrorCode, ErrorPayload, Hello, ResetAck, ServerBody, PROTOCOL_VERSION,
};
use crate::session::{Catalog, Session, SessionConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub id: u64,
    pub vehicle: String,
    pub model: String,
}

/// State shared by all connections. The session registry is the only
/// mutable part and sits behind a mutex.
pub struct Hub {
    pub catalog: Catalog,
    pub defaults: SessionConfig,
    sessions: Mutex<BTreeMap<u64, SessionSummary>>,
    next_id: AtomicU64,
}

impl Hub {
    pub fn new(catalog: Catalog, defaults: SessionConfig) -> Arc<Self> {
        Arc::new(Self { catalog, defaults, sessions: Mutex::new(BTreeMap::new()), next_id: AtomicU64::new(1) })
    }

    pub fn sessions(&self) -> Vec<SessionSummary> {
        self.sessions.lock().expect("registry lock").values().cloned().collect()
    }

    pub fn connect(self: &Arc<Self>) -> Connection {
        Connection { hub: Arc::clone(self), session: None, last_seq: None }
    }

    fn register(&self, s: &Session) {
        let summary =
            SessionSummary { id: s.id(), vehicle: s.config().vehicle.clone(), model: s.config().model.clone() };
        self.sessions.lock().expect("registry lock").insert(s.id(), summary);
    }

    fn unregister(&self, id: u64) {
        self.sessions.lock().expect("registry lock").remove(&id);
    }
}

/// One client's view: at most one open session plus inbound seq tracking.
pub struct Connection {
    hub: Arc<Hub>,
    session: Option<Session>,
    last_seq: Option<u64>,
}

fn error(code: ErrorCode, message: impl Into<String>, in_reply_to: Option<u64>) -> ServerBody {
    ServerBody::Error(ErrorPayload { code, message: message.into(), in_reply_to })
}

impl Connection {
    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn session_mut(&mut self) -> Option<&mut Session> {
        self.session.as_mut()
    }

    fn hello(&self) -> ServerBody {
        ServerBody::Hello(Hello {
            protocol: PROTOCOL_VERSION,
            vehicles: self.hub.catalog.vehicle_ids(),
            models: self.hub.catalog.model_ids(),
            session: self.session.as_ref().map(Session::info),
        })
    }

    fn close(&mut self) {
        if let Some(s) = self.session.take() {
            self.hub.unregister(s.id());
        }
    }

    /// Closes any open session and opens one from `req` over the server
    /// defaults. Success yields `hello` and the `t = 0` state; failure an
    /// error and no session.
    pub fn configure(&mut self, req: &ConfigureRequest, seq: Option<u64>) -> Vec<ServerBody> {
        self.close();
        let config = self.hub.defaults.merged(req, &self.hub.catalog);
        let id = self.hub.next_id.fetch_add(1, Ordering::Relaxed);
        match Session::open(id, config, &self.hub.catalog) {
            Ok(s) => {
                self.hub.register(&s);
                self.session = Some(s);
                let state = self.session.as_mut().map(Session::take_state).expect("just opened");
                vec![self.hello(), ServerBody::State(state)]
            }
            Err(e) => vec![error(e.code(), e.to_string(), seq)],
        }
    }

    /// Parses and applies one text frame; returns the immediate replies.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerBody> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(m) => self.handle(m),
            Err(e) => vec![error(ErrorCode::BadMessage, e.to_string(), None)],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerBody> {
        let seq = msg.seq;
        if self.last_seq.is_some_and(|last| seq <= last) {
            // stale controls are dropped silently; anything else is reported
            return match msg.body {
                ClientBody::Control(_) => Vec::new(),
                _ => vec![error(
                    ErrorCode::StaleSeq,
                    format!("seq {seq} is not newer than {}", self.last_seq.unwrap_or(0)),
                    Some(seq),
                )],
            };
        }
        self.last_seq = Some(seq);
        if let ClientBody::Configure(req) = &msg.body {
            return self.configure(req, Some(seq));
        }
        let Some(s) = self.session.as_mut() else {
            return vec![error(ErrorCode::NoSession, "no open session; send configure first", Some(seq))];
        };
        match msg.body {
            ClientBody::Configure(_) => unreachable!("handled above"),
            ClientBody::Control(c) => {
                s.submit_control(seq, c);
                Vec::new()
            }
            ClientBody::TraceReset => {
                s.reset_trace();
                vec![ServerBody::TraceReset(ResetAck { t: s.engine().time() })]
            }
            ClientBody::StateReset => {
                s.reset_state();
                let ack = ServerBody::StateReset(ResetAck { t: s.engine().time() });
                vec![ack, ServerBody::State(s.take_state())]
            }
            ClientBody::LogExport => vec![ServerBody::LogExport(s.export())],
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ControlPayload;

    fn hub() -> Arc<Hub> {
        Hub::new(Catalog::builtin(), SessionConfig::new("cart", "gm3"))
    }

    fn msg(seq: u64, body: ClientBody) -> ClientMessage {
        ClientMessage { seq, body }
    }

    #[test]
    fn configure_then_hello_and_first_state() {
        let h = hub();
        let mut c = h.connect();
        let out = c.handle(msg(1, ClientBody::Configure(ConfigureRequest::default())));
        assert_eq!(out.iter().map(ServerBody::kind).collect::<Vec<_>>(), vec!["hello", "state"]);
        let ServerBody::State(s) = &out[1] else { panic!() };
        assert_eq!((s.t, s.step), (0.0, 0));
        let ServerBody::Hello(hello) = &out[0] else { panic!() };
        assert!(hello.session.as_ref().unwrap().columns.contains(&"tire0_fz".to_string()));
        assert_eq!(h.sessions().len(), 1);
        drop(c);
        assert!(h.sessions().is_empty());
    }

    #[test]
    fn unknown_model_leaves_no_session() {
        let h = hub();
        let mut c = h.connect();
        c.handle(msg(1, ClientBody::Configure(ConfigureRequest::default())));
        let bad = ConfigureRequest { model: Some("warp".into()), ..Default::default() };
        let out = c.handle(msg(2, ClientBody::Configure(bad)));
        assert!(matches!(&out[..], [ServerBody::Error(ErrorPayload { code: ErrorCode::UnknownModel, .. })]));
        assert!(c.session().is_none());
        assert!(h.sessions().is_empty());
        let out = c.handle(msg(3, ClientBody::LogExport));
        assert!(matches!(&out[..], [ServerBody::Error(ErrorPayload { code: ErrorCode::NoSession, .. })]));
    }

    #[test]
    fn stale_and_malformed_frames() {
        let h = hub();
        let mut c = h.connect();
        c.handle(msg(5, ClientBody::Configure(ConfigureRequest::default())));
        assert!(c.handle(msg(5, ClientBody::Control(ControlPayload::default()))).is_empty());
        let out = c.handle(msg(4, ClientBody::TraceReset));
        assert!(matches!(&out[..], [ServerBody::Error(ErrorPayload { code: ErrorCode::StaleSeq, .. })]));
        let out = c.handle_text(r#"{"seq":9,"kind":"fly"}"#);
        assert!(matches!(&out[..], [ServerBody::Error(ErrorPayload { code: ErrorCode::BadMessage, .. })]));
    }
}
