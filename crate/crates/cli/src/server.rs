//! Live telemetry server.
//!
//! One simulation loop publishes frames to a bus; every network session
//! subscribes to it. A session opens with `hello` and is answered with
//! `welcome` or `reject`. At most one session holds the control role; the
//! rest observe. Clients speak the length-prefixed protocol over plain TCP,
//! or send an HTTP upgrade on the same port and exchange one JSON message per
//! WebSocket text message.

use std::io::{self, ErrorKind};
use std::net::{IpAddr, Ipv4Addr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use aerotwin_core::sim::SimError;
use aerotwin_core::telemetry::bus::{FrameBus, RecvError, Subscriber};
use aerotwin_core::telemetry::protocol::{
    self, CommandBody, Message, ProtocolError, Role, WireCommand,
};
use aerotwin_core::telemetry::stream::{
    item_message, run_loop, LoopOptions, LoopReport, StopToken, StreamEnd,
};
use aerotwin_core::{Config, SceneSetup, Simulation};
use thiserror::Error;
use tungstenite::WebSocket;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("stream rate {rate} Hz must divide the {sim_rate} Hz tick rate")]
    InvalidRate { rate: u32, sim_rate: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::PortInUse(_) => "port_in_use",
            ServeError::Bind { .. } => "bind_failed",
            ServeError::InvalidRate { .. } => "config_invalid",
            ServeError::Sim(_) => "simulation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    /// Simulated seconds to run; `None` runs until stopped.
    pub duration: Option<f64>,
    /// Hold the first tick until a session has completed its handshake.
    pub wait_for_client: bool,
    pub scene: SceneSetup,
}

impl ServeOptions {
    pub fn new(port: u16) -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port,
            duration: None,
            wait_for_client: false,
            scene: SceneSetup::default(),
        }
    }
}

struct Shared {
    config: Config,
    bus: FrameBus,
    commands: Mutex<Sender<WireCommand>>,
    control_taken: AtomicBool,
    next_session: AtomicU64,
    stop: StopToken,
    started: Mutex<bool>,
    start_signal: Condvar,
    sessions: Mutex<Vec<JoinHandle<()>>>,
}

impl Shared {
    fn submit(&self, cmd: WireCommand) {
        // The loop owns the receiver until it exits; later sends are moot.
        let _ = self.commands.lock().unwrap().send(cmd);
    }

    fn signal_start(&self) {
        *self.started.lock().unwrap() = true;
        self.start_signal.notify_all();
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    sim: JoinHandle<LoopReport>,
    acceptor: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Token that stops the server; safe to hand to a signal handler.
    pub fn stop_token(&self) -> StopToken {
        self.shared.stop.clone()
    }

    pub fn stop(&self) {
        self.shared.stop.request(StreamEnd::Stopped);
    }

    /// Waits for the simulation to finish, lets every session drain its
    /// queue and say goodbye, and returns the session record.
    pub fn wait(self) -> LoopReport {
        let report = self.sim.join().expect("simulation thread panicked");
        // The acceptor polls the stop flag; make sure it is set.
        self.shared.stop.request(StreamEnd::Stopped);
        let _ = self.acceptor.join();
        let sessions = std::mem::take(&mut *self.shared.sessions.lock().unwrap());
        for s in sessions {
            let _ = s.join();
        }
        report
    }
}

/// Binds the listener and starts the simulation and accept threads.
pub fn start(config: &Config, opts: ServeOptions) -> Result<ServerHandle, ServeError> {
    let sim_rate = config.telemetry.sim_rate;
    let rate = config.telemetry.rate;
    if rate == 0 || !sim_rate.is_multiple_of(rate) {
        return Err(ServeError::InvalidRate { rate, sim_rate });
    }
    let sim = Simulation::new(config, &opts.scene)?;

    let addr = SocketAddr::new(opts.bind, opts.port);
    let listener = TcpListener::bind(addr).map_err(|source| match source.kind() {
        ErrorKind::AddrInUse => ServeError::PortInUse(opts.port),
        _ => ServeError::Bind { addr, source },
    })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind { addr, source })?;
    listener
        .set_nonblocking(true)
        .map_err(|source| ServeError::Bind { addr, source })?;

    let (tx, rx) = mpsc::channel();
    let shared = Arc::new(Shared {
        config: config.clone(),
        bus: FrameBus::new(),
        commands: Mutex::new(tx),
        control_taken: AtomicBool::new(false),
        next_session: AtomicU64::new(1),
        stop: StopToken::new(),
        started: Mutex::new(!opts.wait_for_client),
        start_signal: Condvar::new(),
        sessions: Mutex::new(Vec::new()),
    });

    let loop_opts = LoopOptions {
        publish_every: u64::from(sim_rate / rate),
        ticks: opts
            .duration
            .map(|d| (d * f64::from(sim_rate)).round() as u64),
        realtime: true,
    };
    let sim_shared = Arc::clone(&shared);
    let sim = thread::Builder::new()
        .name("simulation".into())
        .spawn(move || {
            let s = &sim_shared;
            let mut started = s.started.lock().unwrap();
            while !*started && !s.stop.is_requested() {
                started = s.start_signal.wait_timeout(started, POLL).unwrap().0;
            }
            drop(started);
            log::info!("simulation running");
            let report = run_loop(sim, &s.bus, &rx, loop_opts, &s.stop);
            log::info!(
                "simulation ended after {} frames ({:?})",
                report.record.frames.len(),
                report.end
            );
            report
        })
        .expect("spawn simulation thread");

    let acc_shared = Arc::clone(&shared);
    let acceptor = thread::Builder::new()
        .name("acceptor".into())
        .spawn(move || accept_loop(listener, acc_shared))
        .expect("spawn acceptor thread");

    log::info!("listening on {addr}");
    Ok(ServerHandle {
        addr,
        shared,
        sim,
        acceptor,
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.stop.is_requested() {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::debug!("connection from {peer}");
                let s = Arc::clone(&shared);
                let handle = thread::spawn(move || {
                    if let Err(e) = serve_connection(stream, &s) {
                        log::warn!("session with {peer} ended: {e}");
                    }
                });
                let mut sessions = shared.sessions.lock().unwrap();
                sessions.retain(|h| !h.is_finished());
                sessions.push(handle);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn serve_connection(stream: TcpStream, shared: &Shared) -> Result<(), ProtocolError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut head = [0u8; 4];
    let n = stream.peek(&mut head)?;
    // A length prefix of "GET " would be ~1.2 GB, far beyond the message cap.
    if n == 4 && &head == b"GET " {
        let ws = tungstenite::accept(stream)
            .map_err(|e| ProtocolError::MalformedMessage(format!("websocket handshake: {e}")))?;
        serve_websocket(ws, shared)
    } else {
        serve_tcp(stream, shared)
    }
}

/// Outcome of the opening exchange.
struct Admitted {
    role: Role,
    sub: Subscriber,
}

/// Admits the session or returns the reason to put in the reject.
fn admit(first: Option<Message>, shared: &Shared) -> Result<Admitted, String> {
    let role = match first {
        Some(Message::Hello { role, client }) => {
            log::info!("hello from {} as {role:?}", client.as_deref().unwrap_or("client"));
            role
        }
        Some(other) => {
            return Err(format!("expected hello, got {}", other.type_name()))
        }
        None => {
            return Err("no hello".into())
        }
    };
    if role == Role::Control
        && shared
            .control_taken
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .is_err()
    {
        return Err("control session already taken".into());
    }
    let sub = shared.bus.subscribe(shared.config.telemetry.buffer_capacity);
    Ok(Admitted { role, sub })
}

fn welcome(role: Role, shared: &Shared) -> Message {
    Message::Welcome {
        role,
        session: shared.next_session.fetch_add(1, Ordering::SeqCst),
        geometry: shared.config.links(),
        limits: shared.config.joint_limits(),
        rate: shared.config.telemetry.rate,
        jog_step: shared.config.operator.jog_step,
    }
}

/// Applies a message from a client after the handshake. Returns false when
/// the client said goodbye.
fn handle_incoming(msg: Message, role: Role, shared: &Shared) -> bool {
    match msg {
        Message::Command(cmd) if role == Role::Control => shared.submit(cmd),
        Message::Command(_) => log::warn!("observer sent a command; ignored"),
        Message::Bye { .. } => return false,
        other => log::debug!("ignoring {} message", other.type_name()),
    }
    true
}

fn release_control(role: Role, shared: &Shared) {
    if role != Role::Control {
        return;
    }
    // Freeze the arm where it is, then free the role for the next operator.
    shared.submit(WireCommand {
        t: 0.0,
        seq: 0,
        grip: None,
        body: CommandBody::Hold,
    });
    shared.control_taken.store(false, Ordering::SeqCst);
    log::info!("control session closed; arm held");
}

fn serve_tcp(stream: TcpStream, shared: &Shared) -> Result<(), ProtocolError> {
    let mut reader = stream.try_clone()?;
    let mut writer = stream;
    let first = protocol::read_message(&mut reader);
    let first = match first {
        Ok(m) => m,
        Err(e) => {
            let _ = protocol::write_message(
                &mut writer,
                &Message::Reject {
                    reason: e.to_string(),
                },
            );
            return Err(e);
        }
    };
    let Admitted { role, sub } = match admit(first, shared) {
        Ok(a) => a,
        Err(reason) => {
            protocol::write_message(&mut writer, &Message::Reject { reason })?;
            let _ = writer.shutdown(Shutdown::Both);
            return Ok(());
        }
    };
    protocol::write_message(&mut writer, &welcome(role, shared))?;
    shared.signal_start();
    reader.set_read_timeout(None)?;

    let peer_gone = Arc::new(AtomicBool::new(false));
    let gone = Arc::clone(&peer_gone);
    thread::scope(|scope| {
        let reader_thread = scope.spawn(move || {
            loop {
                match protocol::read_message(&mut reader) {
                    Ok(Some(msg)) => {
                        if !handle_incoming(msg, role, shared) {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        log::debug!("read: {e}");
                        break;
                    }
                }
            }
            gone.store(true, Ordering::SeqCst);
            release_control(role, shared);
        });

        let result = pump(&sub, &peer_gone, |m| protocol::write_message(&mut writer, m));
        let _ = writer.shutdown(Shutdown::Both);
        let _ = reader_thread.join();
        result
    })
}

/// Forwards bus items to the client until the bus closes or the peer leaves.
fn pump<F>(sub: &Subscriber, peer_gone: &AtomicBool, mut send: F) -> Result<(), ProtocolError>
where
    F: FnMut(&Message) -> Result<(), ProtocolError>,
{
    loop {
        if peer_gone.load(Ordering::SeqCst) {
            return Ok(());
        }
        match sub.recv_timeout(POLL) {
            Ok(item) => send(&item_message(&item))?,
            Err(RecvError::Timeout) => {}
            Err(RecvError::Closed) => {
                return send(&Message::Bye {
                    reason: "server shutting down".into(),
                })
            }
        }
    }
}

fn ws_error(e: tungstenite::Error) -> ProtocolError {
    match e {
        tungstenite::Error::Io(io) => ProtocolError::Io(io),
        other => ProtocolError::MalformedMessage(other.to_string()),
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io)
        if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn ws_send(ws: &mut WebSocket<TcpStream>, m: &Message) -> Result<(), ProtocolError> {
    ws.send(tungstenite::Message::text(protocol::to_json(m)))
        .map_err(ws_error)
}

/// Reads one protocol message; `Ok(None)` when nothing arrived in time.
fn ws_read(ws: &mut WebSocket<TcpStream>) -> Result<Option<Message>, ProtocolError> {
    loop {
        match ws.read() {
            Ok(tungstenite::Message::Text(text)) => {
                return protocol::from_json(text.as_bytes()).map(Some)
            }
            Ok(tungstenite::Message::Binary(bytes)) => return protocol::from_json(&bytes).map(Some),
            Ok(tungstenite::Message::Close(_)) => {
                return Ok(Some(Message::Bye {
                    reason: "closed".into(),
                }))
            }
            Ok(_) => continue,
            Err(e) if is_timeout(&e) => return Ok(None),
            Err(e) => return Err(ws_error(e)),
        }
    }
}

fn serve_websocket(mut ws: WebSocket<TcpStream>, shared: &Shared) -> Result<(), ProtocolError> {
    let first = match ws_read(&mut ws) {
        Ok(m) => m,
        Err(e) => {
            let _ = ws_send(
                &mut ws,
                &Message::Reject {
                    reason: e.to_string(),
                },
            );
            return Err(e);
        }
    };
    let Admitted { role, sub } = match admit(first, shared) {
        Ok(a) => a,
        Err(reason) => {
            ws_send(&mut ws, &Message::Reject { reason })?;
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
    };
    ws_send(&mut ws, &welcome(role, shared))?;
    shared.signal_start();
    // One thread both reads and writes, so reads must not block for long.
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)))?;

    let result = (|| loop {
        while let Some(item) = sub.try_recv() {
            ws_send(&mut ws, &item_message(&item))?;
        }
        if let Some(msg) = ws_read(&mut ws)? {
            if !handle_incoming(msg, role, shared) {
                return Ok(());
            }
        }
        match sub.recv_timeout(POLL) {
            Ok(item) => ws_send(&mut ws, &item_message(&item))?,
            Err(RecvError::Timeout) => {}
            Err(RecvError::Closed) => {
                ws_send(
                    &mut ws,
                    &Message::Bye {
                        reason: "server shutting down".into(),
                    },
                )?;
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(());
            }
        }
    })();
    release_control(role, shared);
    result
}

/// Sets up Ctrl-C to stop the server.
pub fn stop_on_signal(token: StopToken) -> Result<(), ctrlc::Error> {
    ctrlc::set_handler(move || {
        log::info!("shutting down");
        token.request(StreamEnd::Stopped);
    })
}
