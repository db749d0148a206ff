//! One live session shared by every websocket client at `/ws`.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::Result;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::sync::broadcast;

use prochart_core::session::{parse_client_message, Engine, ServerMessage, Session, SessionEvent, SessionSettings};

const POLL_INTERVAL: Duration = Duration::from_millis(250);

struct Live {
    session: Mutex<Session>,
    tx: broadcast::Sender<String>,
    started: Instant,
}

impl Live {
    fn now(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Runs `f` on the session and broadcasts what it logged. The lock is
    /// held across the broadcast so subscribers never miss or repeat events.
    fn drive(&self, f: impl FnOnce(&mut Session, f64) -> Vec<SessionEvent>) {
        let mut session = self.session.lock().expect("session lock poisoned");
        for e in f(&mut session, self.now()) {
            let _ = self.tx.send(ServerMessage::from(&e).to_json());
        }
    }

    fn backlog(&self) -> (Vec<String>, broadcast::Receiver<String>) {
        let session = self.session.lock().expect("session lock poisoned");
        let log = session.log().iter().map(|e| ServerMessage::from(e).to_json()).collect();
        (log, self.tx.subscribe())
    }
}

pub fn run(engine: Arc<Engine>, settings: SessionSettings, addr: &str) -> Result<()> {
    let (tx, _) = broadcast::channel(1024);
    let live = Arc::new(Live {
        session: Mutex::new(Session::new(engine, settings)),
        tx,
        started: Instant::now(),
    });
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;

        let poller = live.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(POLL_INTERVAL);
            loop {
                tick.tick().await;
                let p = poller.clone();
                let _ = tokio::task::spawn_blocking(move || p.drive(|s, now| s.poll(now))).await;
            }
        });

        let app = Router::new().route("/ws", get(upgrade)).with_state(live.clone());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        let l = live.clone();
        tokio::task::spawn_blocking(move || l.drive(|s, now| s.end(now))).await?;
        Ok(())
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(live): State<Arc<Live>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, live))
}

async fn client(mut socket: WebSocket, live: Arc<Live>) {
    let (backlog, mut rx) = live.backlog();
    for text in backlog {
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let l = live.clone();
                let _ = tokio::task::spawn_blocking(move || match parse_client_message(&text) {
                    Ok(msg) => l.drive(|s, now| s.apply(msg, now)),
                    Err(e) => l.drive(|s, now| s.protocol_error(&format!("bad client message: {e}"), now)),
                })
                .await;
            }
            out = rx.recv() => match out {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("client lagged by {n} events; closing");
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
        }
    }
}
