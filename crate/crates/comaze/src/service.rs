//! Websocket bridge between one live session and browser clients.
//!
//! Network tasks run on a private tokio runtime. The session thread only
//! touches the command mailbox, a broadcast sender and the control flags, so
//! a stalled client never delays a frame.

use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use comaze_core::partner::{CommandMailbox, PartnerCommand};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::broadcast;
use tokio_tungstenite::tungstenite::handshake::server::{Request, Response};
use tokio_tungstenite::tungstenite::Message;

use crate::wire::{self, ClientMessage, ControlAction, Role, ServerMessage};

/// Messages a stalled client may fall behind before it starts losing them.
const OUTBOUND_CAPACITY: usize = 4096;

#[derive(Debug, Clone)]
enum Outbound {
    Msg(ServerMessage),
    Close,
}

#[derive(Debug, Default)]
struct Flags {
    player: bool,
    started: bool,
    paused: bool,
    abort: bool,
}

#[derive(Debug, Default)]
struct Control {
    flags: Mutex<Flags>,
    changed: Condvar,
}

impl Control {
    fn lock(&self) -> MutexGuard<'_, Flags> {
        self.flags.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn update(&self, f: impl FnOnce(&mut Flags)) {
        f(&mut self.lock());
        self.changed.notify_all();
    }
}

struct Shared {
    mailbox: CommandMailbox,
    out: broadcast::Sender<Outbound>,
    control: Control,
    epoch: Instant,
}

pub struct Service {
    addr: SocketAddr,
    shared: Arc<Shared>,
    _runtime: tokio::runtime::Runtime,
}

impl Service {
    /// Binds `host:port` (port 0 picks a free one) and starts accepting.
    /// Fails immediately when the port is taken.
    pub fn start(host: &str, port: u16, max_tilt: f64) -> Result<Self> {
        let listener = TcpListener::bind((host, port)).with_context(|| format!("cannot listen on {host}:{port}"))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_all()
            .build()?;
        let mailbox = CommandMailbox::new(max_tilt);
        mailbox.close();
        let shared = Arc::new(Shared {
            mailbox,
            out: broadcast::channel(OUTBOUND_CAPACITY).0,
            control: Control::default(),
            epoch: Instant::now(),
        });
        let listener = {
            let _guard = runtime.enter();
            tokio::net::TcpListener::from_std(listener)?
        };
        runtime.spawn(accept_loop(listener, shared.clone()));
        log::info!("listening on ws://{addr}");
        Ok(Self {
            addr,
            shared,
            _runtime: runtime,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn mailbox(&self) -> CommandMailbox {
        self.shared.mailbox.clone()
    }

    /// Queues `msg` for every connected client without waiting.
    pub fn broadcast(&self, msg: ServerMessage) {
        let _ = self.shared.out.send(Outbound::Msg(msg));
    }

    /// Asks every client to flush its queue and close, waiting up to
    /// `timeout` for them to go.
    pub fn close(&self, timeout: Duration) {
        let _ = self.shared.out.send(Outbound::Close);
        let deadline = Instant::now() + timeout;
        while self.clients() > 0 && Instant::now() < deadline {
            std::thread::sleep(Duration::from_millis(10));
        }
    }

    pub fn clients(&self) -> usize {
        self.shared.out.receiver_count()
    }

    pub fn has_player(&self) -> bool {
        self.shared.control.lock().player
    }

    /// Blocks until a player has connected.
    pub fn wait_for_player(&self, timeout: Duration) -> Result<()> {
        self.wait_for(timeout, |f| f.player)
            .with_context(|| format!("no player connected within {:.0} s", timeout.as_secs_f64()))
    }

    /// Blocks until any client has connected.
    pub fn wait_for_client(&self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        while self.clients() == 0 {
            if Instant::now() >= deadline {
                bail!("no client connected within {:.0} s", timeout.as_secs_f64());
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        Ok(())
    }

    /// Blocks until a player is connected, has sent `start` and the session
    /// is not paused. Clears any stale abort request.
    pub fn wait_until_ready(&self) {
        let mut flags = self.shared.control.lock();
        while !(flags.player && flags.started && !flags.paused) {
            flags = self
                .shared
                .control
                .changed
                .wait(flags)
                .unwrap_or_else(|e| e.into_inner());
        }
        flags.abort = false;
    }

    /// Returns and clears a pending abort request.
    pub fn take_abort(&self) -> bool {
        std::mem::take(&mut self.shared.control.lock().abort)
    }

    fn wait_for(&self, timeout: Duration, pred: impl Fn(&Flags) -> bool) -> Result<()> {
        let flags = self.shared.control.lock();
        let (flags, _) = self
            .shared
            .control
            .changed
            .wait_timeout_while(flags, timeout, |f| !pred(f))
            .unwrap_or_else(|e| e.into_inner());
        if !pred(&flags) {
            bail!("timed out");
        }
        Ok(())
    }
}

async fn accept_loop(listener: tokio::net::TcpListener, shared: Arc<Shared>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tokio::spawn(serve_client(stream, peer, shared.clone()));
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

fn requested_role(query: Option<&str>) -> Role {
    let spectator = query
        .unwrap_or("")
        .split('&')
        .any(|kv| kv == "role=spectator");
    if spectator {
        Role::Spectator
    } else {
        Role::Player
    }
}

async fn serve_client(stream: tokio::net::TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let mut wanted = Role::Player;
    #[allow(clippy::result_large_err)]
    let callback = |req: &Request, resp: Response| {
        wanted = requested_role(req.uri().query());
        Ok(resp)
    };
    let ws = match tokio_tungstenite::accept_hdr_async(stream, callback).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake with {peer} failed: {e}");
            return;
        }
    };
    let mut outbound = shared.out.subscribe();
    let role = if wanted == Role::Player {
        let mut flags = shared.control.lock();
        if flags.player {
            Role::Spectator
        } else {
            flags.player = true;
            shared.mailbox.clear();
            shared.mailbox.reopen();
            Role::Player
        }
    } else {
        Role::Spectator
    };
    shared.control.changed.notify_all();
    log::info!("{peer} connected as {role:?}");

    let (mut tx, mut rx) = ws.split();
    let mut seq = 0u64;
    let mut send = |msg: &ServerMessage| {
        let text = wire::encode(msg, seq);
        seq += 1;
        Message::text(text)
    };
    if tx.send(send(&ServerMessage::Welcome { role })).await.is_ok() {
        loop {
            tokio::select! {
                incoming = rx.next() => match incoming {
                    Some(Ok(Message::Text(text))) => handle_client(&shared, role, peer, text.as_str()),
                    Some(Ok(Message::Close(_))) | None => break,
                    Some(Ok(_)) => {}
                    Some(Err(e)) => {
                        log::info!("{peer}: {e}");
                        break;
                    }
                },
                first = outbound.recv() => {
                    let (batch, close) = drain(first, &mut outbound, peer);
                    let mut failed = false;
                    for m in &batch {
                        failed |= tx.feed(send(m)).await.is_err();
                    }
                    failed |= tx.flush().await.is_err();
                    if close {
                        let _ = tx.send(Message::Close(None)).await;
                    }
                    if failed || close {
                        break;
                    }
                }
            }
        }
    }

    if role == Role::Player {
        shared.mailbox.close();
        shared.control.update(|f| {
            f.player = false;
            f.started = false;
        });
        log::warn!("player {peer} disconnected; session paused");
    } else {
        log::info!("spectator {peer} left");
    }
}

/// Everything queued for one client, with runs of consecutive states
/// reduced to their last element. Events are never coalesced.
fn drain(
    first: Result<Outbound, broadcast::error::RecvError>,
    rx: &mut broadcast::Receiver<Outbound>,
    peer: SocketAddr,
) -> (Vec<ServerMessage>, bool) {
    use broadcast::error::{RecvError, TryRecvError};
    let mut batch: Vec<ServerMessage> = Vec::new();
    let mut next = first.map_err(|e| match e {
        RecvError::Lagged(n) => TryRecvError::Lagged(n),
        RecvError::Closed => TryRecvError::Closed,
    });
    loop {
        match next {
            Ok(Outbound::Msg(m)) => {
                let is_state = matches!(m, ServerMessage::State { .. });
                if is_state && matches!(batch.last(), Some(ServerMessage::State { .. })) {
                    batch.pop();
                }
                batch.push(m);
            }
            Ok(Outbound::Close) | Err(TryRecvError::Closed) => return (batch, true),
            Err(TryRecvError::Lagged(n)) => log::warn!("{peer} stalled; {n} messages lost"),
            Err(TryRecvError::Empty) => return (batch, false),
        }
        next = rx.try_recv();
    }
}

fn handle_client(shared: &Shared, role: Role, peer: SocketAddr, text: &str) {
    let msg = match wire::decode_client(text) {
        Ok(env) => env.msg,
        Err(e) => {
            log::warn!("dropping malformed message from {peer}: {e}");
            return;
        }
    };
    if role != Role::Player {
        log::info!("ignoring {msg:?} from spectator {peer}");
        return;
    }
    match msg {
        ClientMessage::Command { phi_human } => {
            let cmd = PartnerCommand {
                phi_human,
                timestamp: shared.epoch.elapsed().as_secs_f64(),
            };
            if shared.mailbox.publish(cmd).is_none() {
                log::warn!("dropping non-finite command from {peer}");
            }
        }
        ClientMessage::Control { action } => shared.control.update(|f| match action {
            ControlAction::Start => {
                f.started = true;
                f.paused = false;
            }
            ControlAction::Pause => f.paused = true,
            ControlAction::Abort => f.abort = true,
        }),
    }
}
