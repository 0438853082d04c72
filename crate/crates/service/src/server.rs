//! Real-time wrapper around [`Service`].
//!
//! One task owns the service and ticks it at the engine rate. Network tasks
//! talk to it only through an ordered command queue; frames fan out over a
//! broadcast channel, so a slow client loses frames instead of stalling the
//! loop.
//!
//! - command port: TCP, newline-delimited JSON requests, one reply per line
//! - HTTP: `/ws` (websocket frame stream, also accepts command lines),
//!   `/frame` (latest frame JSON), `/frame.svg`, `/health`

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use hybrid_face::render::to_vector_text;

use crate::engine::Frame;
use crate::error::Result;
use crate::export::export_session;
use crate::protocol::{parse_request, Reply};
use crate::service::Service;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub command_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub token: Option<String>,
    /// Finished sessions are exported to `session_NNNN` below this directory.
    pub session_out: Option<PathBuf>,
    /// Frames buffered per subscriber before it starts losing them.
    pub frame_buffer: usize,
}

impl ServerConfig {
    pub fn local(command_port: u16, http_port: u16) -> ServerConfig {
        ServerConfig {
            command_addr: SocketAddr::from(([127, 0, 0, 1], command_port)),
            http_addr: SocketAddr::from(([127, 0, 0, 1], http_port)),
            token: None,
            session_out: None,
            frame_buffer: 64,
        }
    }
}

struct Pending {
    line: String,
    reply: oneshot::Sender<Reply>,
}

#[derive(Clone)]
struct Shared {
    commands: mpsc::Sender<Pending>,
    frames: broadcast::Sender<Arc<str>>,
    latest: Arc<Mutex<Option<Frame>>>,
}

pub struct ServerHandle {
    pub command_addr: SocketAddr,
    pub http_addr: SocketAddr,
    shared: Shared,
    shutdown: watch::Sender<bool>,
    engine: JoinHandle<Service>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    /// Frame and session messages as JSON text.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.shared.frames.subscribe()
    }

    /// Sends one command line through the same queue as network clients.
    pub async fn send_line(&self, line: &str) -> Option<Reply> {
        submit(&self.shared.commands, line.to_string()).await
    }

    /// Stops all tasks and returns the service with its replay log.
    pub async fn shutdown(self) -> Service {
        let _ = self.shutdown.send(true);
        for t in &self.tasks {
            t.abort();
        }
        match self.engine.await {
            Ok(mut svc) => {
                svc.mark_clock();
                svc
            }
            Err(e) => std::panic::resume_unwind(e.into_panic()),
        }
    }
}

async fn submit(commands: &mpsc::Sender<Pending>, line: String) -> Option<Reply> {
    let (tx, rx) = oneshot::channel();
    commands.send(Pending { line, reply: tx }).await.ok()?;
    rx.await.ok()
}

/// Binds both ports and starts the loop. Port 0 picks a free port.
pub async fn start(service: Service, config: ServerConfig) -> Result<ServerHandle> {
    let command_listener = TcpListener::bind(config.command_addr).await?;
    let http_listener = TcpListener::bind(config.http_addr).await?;
    let command_addr = command_listener.local_addr()?;
    let http_addr = http_listener.local_addr()?;

    let (cmd_tx, cmd_rx) = mpsc::channel(256);
    let (frames, _) = broadcast::channel(config.frame_buffer.max(1));
    let (shutdown, shutdown_rx) = watch::channel(false);
    let shared = Shared {
        commands: cmd_tx,
        frames: frames.clone(),
        latest: Arc::new(Mutex::new(None)),
    };

    let engine = tokio::spawn(engine_loop(
        service,
        cmd_rx,
        shared.clone(),
        shutdown_rx.clone(),
        config.clone(),
    ));

    let accept_shared = shared.clone();
    let accept = tokio::spawn(async move {
        while let Ok((stream, _)) = command_listener.accept().await {
            let _ = stream.set_nodelay(true);
            tokio::spawn(command_connection(stream, accept_shared.commands.clone()));
        }
    });

    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/frame", get(latest_frame))
        .route("/frame.svg", get(latest_svg))
        .route("/health", get(|| async { "ok" }))
        .with_state(shared.clone());
    let mut http_shutdown = shutdown_rx;
    let http = tokio::spawn(async move {
        let _ = axum::serve(http_listener, app)
            .with_graceful_shutdown(async move {
                let _ = http_shutdown.changed().await;
            })
            .await;
    });

    Ok(ServerHandle {
        command_addr,
        http_addr,
        shared,
        shutdown,
        engine,
        tasks: vec![accept, http],
    })
}

async fn engine_loop(
    mut svc: Service,
    mut rx: mpsc::Receiver<Pending>,
    shared: Shared,
    mut shutdown: watch::Receiver<bool>,
    config: ServerConfig,
) -> Service {
    let period = Duration::from_secs_f64(1.0 / svc.engine().config().tick_hz);
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut queue: VecDeque<Pending> = VecDeque::new();
    let mut exported = 0usize;
    loop {
        tokio::select! {
            _ = shutdown.changed() => break,
            Some(p) = rx.recv() => queue.push_back(p),
            _ = interval.tick() => {
                let t = svc.engine().next_frame_time();
                // At most one state change per tick; later commands wait.
                let mut mutated = false;
                while let Some(front) = queue.front() {
                    let reply = match parse_request(&front.line, config.token.as_deref()) {
                        Err(r) => Reply::error(r.id, r.error),
                        Ok(req) => {
                            let mutating = req.command.is_mutating();
                            if mutating && mutated {
                                break;
                            }
                            let reply = svc.handle_request(t, req);
                            mutated |= mutating && reply.ok;
                            reply
                        }
                    };
                    if let Some(p) = queue.pop_front() {
                        let _ = p.reply.send(reply);
                    }
                }
                if let Err(e) = svc.render_through(t) {
                    eprintln!("render failed at {t} ms: {e}");
                }
                for f in svc.drain_frames() {
                    let _ = shared.frames.send(Arc::from(f.to_json()));
                    if let Ok(mut latest) = shared.latest.lock() {
                        *latest = Some(f);
                    }
                }
                for n in svc.drain_notices() {
                    let _ = shared.frames.send(Arc::from(n.to_json()));
                }
                for record in svc.take_finished() {
                    if let Some(dir) = &config.session_out {
                        exported += 1;
                        let target = dir.join(format!("session_{exported:04}"));
                        if let Err(e) = export_session(&record, Some(svc.log()), &target) {
                            eprintln!("session export failed: {e}");
                        }
                    }
                }
            }
        }
    }
    svc
}

async fn command_connection(stream: TcpStream, commands: mpsc::Sender<Pending>) {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        if line.trim().is_empty() {
            continue;
        }
        let Some(reply) = submit(&commands, line).await else {
            break;
        };
        let mut out = reply.to_line();
        out.push('\n');
        if write.write_all(out.as_bytes()).await.is_err() {
            break;
        }
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| ws_session(socket, shared))
}

async fn ws_session(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = shared.frames.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::channel::<String>(16);
    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                r = frames.recv() => match r {
                    Ok(m) => m.to_string(),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                Some(r) = reply_rx.recv() => r,
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => {
                for line in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                    let Some(reply) = submit(&shared.commands, line.to_string()).await else {
                        break;
                    };
                    if reply_tx.send(reply.to_line()).await.is_err() {
                        break;
                    }
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    writer.abort();
}

fn latest(shared: &Shared) -> Option<Frame> {
    shared.latest.lock().ok().and_then(|l| l.clone())
}

async fn latest_frame(State(shared): State<Shared>) -> Response {
    match latest(&shared) {
        Some(f) => ([(header::CONTENT_TYPE, "application/json")], f.to_json()).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn latest_svg(State(shared): State<Shared>) -> Response {
    match latest(&shared) {
        Some(f) => ([(header::CONTENT_TYPE, "image/svg+xml")], to_vector_text(&f.scene)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}
