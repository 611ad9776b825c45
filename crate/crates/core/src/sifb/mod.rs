//! Communication service interface blocks: PUBLISH_n, SUBSCRIBE_n,
//! CLIENT_m_n and SERVER_m_n.
//!
//! Pins: inputs `QI`, `ID`, `SD_1..`; outputs `QO`, `STATUS`, `RD_1..`.
//! Events: `INIT`/`INITO` plus `REQ`/`CNF` (publish, client) or
//! `IND`/`RSP` (subscribe, server). Transport threads never touch block
//! state; they post occurrences that the scheduler turns into CNF or IND.

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::commstack::{build_stack, parse_comm_id, CommEndpoint, CommError, EndpointHandler, Inbound, Pattern};
use crate::fbcore::{Behavior, FbContext, Origin, ResourceStats, SifbSpec};
use crate::value::{Value, ValueKind};

const QI: usize = 0;
const ID: usize = 1;
const FIRST_DATA: usize = 2;
const QO: usize = 0;
const STATUS: usize = 1;
const INIT: usize = 0;
const INITO: usize = 0;
/// REQ or RSP on the input side, CNF or IND on the output side.
const SERVICE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SifbStatus {
    Ok,
    Initialized,
    Terminated,
    InvalidId,
    ConnectFailed,
    Timeout,
    DecodeError,
    TlsUnsupported,
}

impl SifbStatus {
    pub const ALL: [SifbStatus; 8] = [
        SifbStatus::Ok,
        SifbStatus::Initialized,
        SifbStatus::Terminated,
        SifbStatus::InvalidId,
        SifbStatus::ConnectFailed,
        SifbStatus::Timeout,
        SifbStatus::DecodeError,
        SifbStatus::TlsUnsupported,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SifbStatus::Ok => "OK",
            SifbStatus::Initialized => "INITIALIZED",
            SifbStatus::Terminated => "TERMINATED",
            SifbStatus::InvalidId => "INVALID_ID",
            SifbStatus::ConnectFailed => "CONNECT_FAILED",
            SifbStatus::Timeout => "TIMEOUT",
            SifbStatus::DecodeError => "DECODE_ERROR",
            SifbStatus::TlsUnsupported => "TLS_UNSUPPORTED",
        }
    }

    pub fn parse(text: &str) -> Option<SifbStatus> {
        SifbStatus::ALL.into_iter().find(|s| s.as_str() == text)
    }

    pub fn qo(self) -> bool {
        matches!(self, SifbStatus::Ok | SifbStatus::Initialized)
    }

    /// Status reported when building an endpoint fails.
    pub fn for_init_error(err: &CommError) -> SifbStatus {
        match err {
            CommError::TlsUnsupported => SifbStatus::TlsUnsupported,
            CommError::Id(_)
            | CommError::PayloadLayers(_)
            | CommError::Arity { .. }
            | CommError::BadParam(_)
            | CommError::WrongPattern(_) => SifbStatus::InvalidId,
            CommError::Codec(_) | CommError::TextBridge(_) => SifbStatus::DecodeError,
            CommError::Transport(_) | CommError::Xmpp(_) => SifbStatus::ConnectFailed,
        }
    }
}

impl fmt::Display for SifbStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Indication(Inbound);

struct ClientResponse(Result<Vec<Value>, CommError>);

struct ServerRequest {
    values: Vec<Value>,
    reply: Sender<Vec<Value>>,
    deadline: Instant,
}

struct PendingResponse {
    reply: Sender<Vec<Value>>,
    deadline: Instant,
}

/// True when `values` fit pins of `kinds` exactly.
fn fits(values: &[Value], kinds: &[ValueKind]) -> bool {
    values.len() == kinds.len() && values.iter().zip(kinds).all(|(v, k)| v.kind() == *k)
}

pub struct SifbBlock {
    spec: SifbSpec,
    endpoint: Option<Arc<CommEndpoint>>,
    in_flight: Arc<AtomicBool>,
    closing: Arc<AtomicBool>,
    pending: VecDeque<PendingResponse>,
}

impl SifbBlock {
    pub fn new(spec: SifbSpec) -> Self {
        SifbBlock {
            spec,
            endpoint: None,
            in_flight: Arc::new(AtomicBool::new(false)),
            closing: Arc::new(AtomicBool::new(false)),
            pending: VecDeque::new(),
        }
    }

    fn set_status(ctx: &mut FbContext<'_>, status: SifbStatus) {
        ctx.set_output(QO, Value::Bool(status.qo()));
        ctx.set_output(STATUS, Value::String(status.as_str().to_string()));
    }

    fn rd_kinds(ctx: &FbContext<'_>) -> Vec<ValueKind> {
        ctx.decl().data_outputs[FIRST_DATA..].iter().map(|(_, k)| *k).collect()
    }

    fn sd_values(&self, ctx: &FbContext<'_>) -> Vec<Value> {
        (0..self.spec.sd).map(|i| ctx.input(FIRST_DATA + i).clone()).collect()
    }

    fn latch_rd(ctx: &mut FbContext<'_>, values: Vec<Value>) {
        for (i, v) in values.into_iter().enumerate() {
            ctx.set_output(FIRST_DATA + i, v);
        }
    }

    fn teardown(&mut self) {
        self.closing.store(true, Ordering::SeqCst);
        self.pending.clear();
        self.endpoint = None;
        self.in_flight.store(false, Ordering::SeqCst);
    }

    fn init(&mut self, ctx: &mut FbContext<'_>) {
        self.teardown();
        if !ctx.input_bool(QI) {
            Self::set_status(ctx, SifbStatus::Terminated);
            return;
        }
        self.closing = Arc::new(AtomicBool::new(false));
        let id_text = ctx.input(ID).as_str().unwrap_or_default().to_string();
        let id = match parse_comm_id(&id_text) {
            Ok(id) => id,
            Err(err) => {
                log::warn!("{}: {err}", ctx.name());
                Self::set_status(ctx, SifbStatus::InvalidId);
                return;
            }
        };
        let handler = self.handler(ctx);
        let services = ctx.services();
        match build_stack(&id, self.spec.pattern, handler, &services.options.stack) {
            Ok(endpoint) => {
                self.endpoint = Some(Arc::new(endpoint));
                Self::set_status(ctx, SifbStatus::Initialized);
            }
            Err(err) => {
                log::warn!("{}: {err}", ctx.name());
                Self::set_status(ctx, SifbStatus::for_init_error(&err));
            }
        }
    }

    fn handler(&self, ctx: &FbContext<'_>) -> EndpointHandler {
        let poster = ctx.poster();
        match self.spec.pattern {
            Pattern::Subscribe => EndpointHandler::Indication(Arc::new(move |inbound| {
                let _ = poster.post_output(SERVICE, Box::new(Indication(inbound)));
            })),
            Pattern::Server => {
                let stats = Arc::clone(&ctx.services().stats);
                let window = ctx.services().options.response_window;
                let kinds = Self::rd_kinds(ctx);
                let closing = Arc::clone(&self.closing);
                EndpointHandler::Responder(Arc::new(move |inbound| {
                    let values = match inbound {
                        Inbound::Values(values) if fits(&values, &kinds) => values,
                        _ => {
                            ResourceStats::bump(&stats.decode_errors);
                            return None;
                        }
                    };
                    let (reply, answer) = mpsc::channel();
                    let deadline = Instant::now() + window;
                    let request = ServerRequest { values, reply, deadline };
                    poster.post_output(SERVICE, Box::new(request)).ok()?;
                    loop {
                        let slice = deadline.saturating_duration_since(Instant::now()).min(Duration::from_millis(50));
                        match answer.recv_timeout(slice) {
                            Ok(values) => return Some(values),
                            Err(RecvTimeoutError::Disconnected) => return None,
                            Err(RecvTimeoutError::Timeout) => {
                                if closing.load(Ordering::SeqCst) || Instant::now() >= deadline {
                                    return None;
                                }
                            }
                        }
                    }
                }))
            }
            Pattern::Publish | Pattern::Client => EndpointHandler::None,
        }
    }

    fn publish(&mut self, ctx: &mut FbContext<'_>) {
        let status = match &self.endpoint {
            None => SifbStatus::InvalidId,
            Some(endpoint) => match endpoint.publish(&self.sd_values(ctx)) {
                Ok(()) => SifbStatus::Ok,
                Err(err) => {
                    log::warn!("{}: {err}", ctx.name());
                    ResourceStats::bump(&ctx.services().stats.send_failures);
                    SifbStatus::ConnectFailed
                }
            },
        };
        Self::set_status(ctx, status);
        ctx.emit(SERVICE);
    }

    fn request(&mut self, ctx: &mut FbContext<'_>) {
        let Some(endpoint) = &self.endpoint else {
            Self::set_status(ctx, SifbStatus::InvalidId);
            ctx.emit(SERVICE);
            return;
        };
        if self.in_flight.swap(true, Ordering::SeqCst) {
            ResourceStats::bump(&ctx.services().stats.ignored_requests);
            return;
        }
        let endpoint = Arc::clone(endpoint);
        let values = self.sd_values(ctx);
        let timeout = ctx.services().options.client_timeout;
        let poster = ctx.poster();
        let in_flight = Arc::clone(&self.in_flight);
        let spawned = thread::Builder::new().name(format!("client-{}", ctx.name())).spawn(move || {
            let result = endpoint.request(&values, timeout);
            drop(endpoint);
            if poster.post_output(SERVICE, Box::new(ClientResponse(result))).is_err() {
                in_flight.store(false, Ordering::SeqCst);
            }
        });
        if spawned.is_err() {
            self.in_flight.store(false, Ordering::SeqCst);
            Self::set_status(ctx, SifbStatus::Timeout);
            ctx.emit(SERVICE);
        }
    }

    fn respond(&mut self, ctx: &mut FbContext<'_>) {
        let now = Instant::now();
        while self.pending.front().is_some_and(|p| p.deadline <= now) {
            self.pending.pop_front();
        }
        match self.pending.pop_front() {
            Some(pending) => {
                let _ = pending.reply.send(self.sd_values(ctx));
            }
            None => ResourceStats::bump(&ctx.services().stats.orphan_responses),
        }
    }
}

impl Behavior for SifbBlock {
    fn on_event(&mut self, event: usize, ctx: &mut FbContext<'_>) {
        if event == INIT {
            self.init(ctx);
            ctx.emit(INITO);
            return;
        }
        match self.spec.pattern {
            Pattern::Publish => self.publish(ctx),
            Pattern::Client => self.request(ctx),
            Pattern::Server => self.respond(ctx),
            Pattern::Subscribe => {}
        }
    }

    fn on_output(&mut self, event: usize, origin: Origin, ctx: &mut FbContext<'_>) {
        let Origin::External(payload) = origin else {
            return;
        };
        let stats = Arc::clone(&ctx.services().stats);
        let payload = match payload.downcast::<Indication>() {
            Ok(indication) => {
                if self.endpoint.is_none() {
                    return;
                }
                match indication.0 {
                    Inbound::Values(values) if fits(&values, &Self::rd_kinds(ctx)) => {
                        Self::latch_rd(ctx, values);
                        Self::set_status(ctx, SifbStatus::Ok);
                        ctx.emit(event);
                    }
                    _ => ResourceStats::bump(&stats.decode_errors),
                }
                return;
            }
            Err(other) => other,
        };
        let payload = match payload.downcast::<ClientResponse>() {
            Ok(response) => {
                self.in_flight.store(false, Ordering::SeqCst);
                let status = match response.0 {
                    Ok(values) if fits(&values, &Self::rd_kinds(ctx)) => {
                        Self::latch_rd(ctx, values);
                        SifbStatus::Ok
                    }
                    Ok(_) => {
                        ResourceStats::bump(&stats.decode_errors);
                        SifbStatus::DecodeError
                    }
                    Err(err) if err.is_decode_error() => {
                        ResourceStats::bump(&stats.decode_errors);
                        SifbStatus::DecodeError
                    }
                    Err(err) => {
                        log::debug!("{}: {err}", ctx.name());
                        SifbStatus::Timeout
                    }
                };
                Self::set_status(ctx, status);
                ctx.emit(event);
                return;
            }
            Err(other) => other,
        };
        if let Ok(request) = payload.downcast::<ServerRequest>() {
            if self.endpoint.is_none() || request.deadline <= Instant::now() {
                return;
            }
            let ServerRequest { values, reply, deadline } = *request;
            Self::latch_rd(ctx, values);
            self.pending.push_back(PendingResponse { reply, deadline });
            Self::set_status(ctx, SifbStatus::Ok);
            ctx.emit(event);
        }
    }

    fn shutdown(&mut self) {
        self.teardown();
    }
}
