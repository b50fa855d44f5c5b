use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use pmu_core::game::{LogEntry, MatchEvent, MatchState, Snapshot};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{oneshot, watch, Notify};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use crate::queue::PendingQueue;
use crate::session;
use crate::ServeConfig;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("cannot open event log {path}: {source}")]
    EventLog { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error("pending queue overflow; message shed")]
    Overflow,
    #[error("match actor stopped")]
    Stopped,
}

struct Job {
    event: MatchEvent,
    ts_ms: u64,
    reply: oneshot::Sender<Result<LogEntry, SubmitError>>,
}

struct Shared {
    queue: Mutex<PendingQueue<Job>>,
    wake: Notify,
    clock: Instant,
    state: watch::Receiver<Arc<MatchState>>,
}

/// Cheap handle onto the single match: submit events, read state.
#[derive(Clone)]
pub struct MatchHandle {
    shared: Arc<Shared>,
}

impl MatchHandle {
    /// Enqueue an event stamped with the service clock and wait for its log
    /// entry.
    pub async fn submit(&self, event: MatchEvent) -> Result<LogEntry, SubmitError> {
        let (tx, rx) = oneshot::channel();
        let is_hit = event.is_hit();
        let shed = {
            let mut q = self.shared.queue.lock().expect("queue lock");
            let ts_ms = self.shared.clock.elapsed().as_millis() as u64;
            q.push(Job { event, ts_ms, reply: tx }, is_hit)
        };
        if let Some(job) = shed {
            let _ = job.reply.send(Err(SubmitError::Overflow));
        }
        self.shared.wake.notify_one();
        rx.await.map_err(|_| SubmitError::Stopped)?
    }

    pub fn state(&self) -> Arc<MatchState> {
        self.shared.state.borrow().clone()
    }

    pub fn snapshot(&self) -> Snapshot {
        self.shared.state.borrow().snapshot()
    }

    /// Receiver that wakes on every applied or rejected event.
    pub fn subscribe(&self) -> watch::Receiver<Arc<MatchState>> {
        self.shared.state.clone()
    }
}

fn run_actor(
    shared: Arc<Shared>,
    mut state: MatchState,
    publish: watch::Sender<Arc<MatchState>>,
    mut log: Option<BufWriter<File>>,
) -> impl std::future::Future<Output = ()> {
    async move {
        loop {
            loop {
                let job = shared.queue.lock().expect("queue lock").pop();
                let Some(job) = job else { break };
                let entry = state.apply_event(job.event, job.ts_ms).clone();
                if let Some(w) = log.as_mut() {
                    let line = serde_json::to_string(&entry).expect("log entry serializes");
                    if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                        tracing::error!("event log write failed: {e}");
                    }
                }
                publish.send_replace(Arc::new(state.clone()));
                let _ = job.reply.send(Ok(entry));
            }
            shared.wake.notified().await;
        }
    }
}

#[derive(Clone)]
pub(crate) struct AppState {
    pub handle: MatchHandle,
    pub token: Arc<str>,
}

/// A running service. Dropping it leaves the tasks running; call
/// [`Service::shutdown`] to stop them.
pub struct Service {
    tcp_addr: SocketAddr,
    http_addr: SocketAddr,
    handle: MatchHandle,
    tasks: Vec<JoinHandle<()>>,
}

impl Service {
    /// Bind both listeners and spawn the match actor. Ports of 0 pick free
    /// ports; the bound addresses are reported by the returned value.
    pub async fn start(config: ServeConfig) -> Result<Self, ServeError> {
        config.validate().map_err(ServeError::Config)?;
        let state = MatchState::new(config.match_config.clone()).map_err(|e| ServeError::Config(e.to_string()))?;
        let log = config
            .event_log
            .as_ref()
            .map(|path| {
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map(BufWriter::new)
                    .map_err(|source| ServeError::EventLog {
                        path: path.display().to_string(),
                        source,
                    })
            })
            .transpose()?;

        let tcp = bind(config.tcp_addr()).await?;
        let http = bind(config.http_addr()).await?;
        let tcp_addr = tcp.local_addr().expect("bound socket has an address");
        let http_addr = http.local_addr().expect("bound socket has an address");

        let (publish, subscribe) = watch::channel(Arc::new(state.clone()));
        let shared = Arc::new(Shared {
            queue: Mutex::new(PendingQueue::new(config.queue_capacity)),
            wake: Notify::new(),
            clock: Instant::now(),
            state: subscribe,
        });
        let handle = MatchHandle { shared: shared.clone() };
        let app = AppState {
            handle: handle.clone(),
            token: config.token.clone().into(),
        };

        let mut tasks = vec![tokio::spawn(run_actor(shared, state, publish, log))];
        tasks.push(tokio::spawn(session::accept_tcp(tcp, app.clone())));

        let mut router = Router::new()
            .route("/state", get(get_state))
            .route("/ws", get(ws_upgrade))
            .with_state(app);
        if let Some(dir) = &config.static_dir {
            router = router.fallback_service(ServeDir::new(dir));
        }
        tasks.push(tokio::spawn(async move {
            if let Err(e) = axum::serve(http, router).await {
                tracing::error!("http server stopped: {e}");
            }
        }));
        tracing::info!(%tcp_addr, %http_addr, "match service listening");
        Ok(Self {
            tcp_addr,
            http_addr,
            handle,
            tasks,
        })
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn handle(&self) -> &MatchHandle {
        &self.handle
    }

    pub fn shutdown(self) {
        for t in self.tasks {
            t.abort();
        }
    }
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

async fn get_state(State(app): State<AppState>) -> Json<Snapshot> {
    Json(app.handle.snapshot())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| session::run_ws(socket, app))
}
