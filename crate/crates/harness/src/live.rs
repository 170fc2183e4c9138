//! Live mode: the simulation paced against the wall clock, steered and
//! observed over one TCP port carrying line-delimited JSON.
//!
//! Threads: an acceptor, one reader per client, a hub that owns every write
//! half (plus the optional UDP mirror), and the simulation loop. The loop
//! only talks to the others through channels, so it never blocks on I/O.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use ctipon::pon::DbaMode;
use ctipon::ran::UeId;
use ctipon::sim::SimTime;
use ctipon::telemetry::RunReport;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{CtiLogEntry, EngineError, EngineOptions, Simulation};
use crate::scenario::ScenarioConfig;

/// Sim time advanced per step when running unpaced, between mailbox checks.
const UNPACED_STEP: SimTime = SimTime::from_millis(1);
const IDLE_WAIT: Duration = Duration::from_millis(1);
const WRITE_TIMEOUT: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum LiveError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("cannot open CTI mirror socket: {0}")]
    Mirror(std::io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveOptions {
    pub bind: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Simulated seconds per wall second; 0 runs as fast as possible.
    pub pace: f64,
    pub cti_mirror: Option<String>,
    pub telemetry_interval: Duration,
}

impl LiveOptions {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Self {
        LiveOptions {
            bind: "127.0.0.1".into(),
            port: cfg.live.port,
            pace: cfg.live.pace,
            cti_mirror: cfg.live.cti_mirror.clone(),
            telemetry_interval: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum UeTarget {
    Ue(UeId),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetMode { mode: DbaMode },
    SetTrafficScale { ue: UeTarget, scale: f64 },
    // Braced so that stray keys are rejected like on the other commands.
    Pause {},
    Resume {},
    Reset {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    #[serde(rename = "type")]
    pub kind: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_at_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Reply {
    fn ok(at: SimTime, generation: u64) -> Self {
        Reply {
            kind: "reply".into(),
            ok: true,
            effective_at_ns: Some(at.as_nanos()),
            generation: Some(generation),
            error: None,
        }
    }

    fn err(msg: impl Into<String>) -> Self {
        Reply {
            kind: "reply".into(),
            ok: false,
            effective_at_ns: None,
            generation: None,
            error: Some(msg.into()),
        }
    }
}

enum Inbound {
    Line { client: u64, line: String },
}

enum Outbound {
    Join(u64, TcpStream),
    Leave(u64),
    Broadcast(String),
    Reply(u64, String),
    Mirror(Vec<u8>),
}

/// Running server. Dropping it without [`LiveHandle::shutdown`] leaves the
/// threads running.
pub struct LiveHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    finished: Arc<Mutex<Option<(u64, RunReport)>>>,
    threads: Vec<JoinHandle<()>>,
}

impl LiveHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Waits until the current generation reaches its duration and returns
    /// its report.
    pub fn wait_for_report(&self, timeout: Duration) -> Option<(u64, RunReport)> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(r) = self.finished.lock().expect("report lock").clone() {
                return Some(r);
            }
            if Instant::now() >= deadline {
                return None;
            }
            thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks for as long as the server runs.
    pub fn join(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

pub fn serve_live(cfg: &ScenarioConfig, opts: LiveOptions) -> Result<LiveHandle, LiveError> {
    let addr = format!("{}:{}", opts.bind, opts.port);
    let listener = TcpListener::bind(&addr).map_err(|source| LiveError::Bind {
        addr: addr.clone(),
        source,
    })?;
    let local = listener.local_addr().map_err(|source| LiveError::Bind {
        addr: addr.clone(),
        source,
    })?;
    listener
        .set_nonblocking(true)
        .map_err(|source| LiveError::Bind { addr, source })?;
    let mirror = match &opts.cti_mirror {
        Some(target) => {
            let sock = UdpSocket::bind("0.0.0.0:0").map_err(LiveError::Mirror)?;
            Some((sock, target.clone()))
        }
        None => None,
    };
    let sim = new_sim(cfg)?;

    let stop = Arc::new(AtomicBool::new(false));
    let finished = Arc::new(Mutex::new(None));
    let (in_tx, in_rx) = mpsc::channel::<Inbound>();
    let (out_tx, out_rx) = mpsc::channel::<Outbound>();

    let hub = {
        let stop = stop.clone();
        thread::spawn(move || run_hub(out_rx, mirror, stop))
    };
    let acceptor = {
        let stop = stop.clone();
        let out_tx = out_tx.clone();
        thread::spawn(move || run_acceptor(listener, in_tx, out_tx, stop))
    };
    let driver = {
        let stop = stop.clone();
        let finished = finished.clone();
        let cfg = cfg.clone();
        thread::spawn(move || {
            Driver {
                cfg,
                opts,
                sim,
                generation: 0,
                paused: false,
                halted: None,
                out: out_tx,
                finished,
            }
            .run(in_rx, stop)
        })
    };
    Ok(LiveHandle {
        addr: local,
        stop,
        finished,
        threads: vec![driver, acceptor, hub],
    })
}

fn new_sim(cfg: &ScenarioConfig) -> Result<Simulation, EngineError> {
    Simulation::new(
        cfg,
        cfg.mode,
        EngineOptions {
            cti_log: true,
            ..EngineOptions::default()
        },
    )
}

fn run_acceptor(
    listener: TcpListener,
    inbound: Sender<Inbound>,
    out: Sender<Outbound>,
    stop: Arc<AtomicBool>,
) {
    let next_id = AtomicU64::new(0);
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id.fetch_add(1, Ordering::SeqCst);
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                let _ = stream.set_write_timeout(Some(WRITE_TIMEOUT));
                let Ok(reader) = stream.try_clone() else { continue };
                log::info!("client {id} connected from {peer}");
                if out.send(Outbound::Join(id, stream)).is_err() {
                    return;
                }
                let inbound = inbound.clone();
                let out = out.clone();
                thread::spawn(move || {
                    for line in BufReader::new(reader).lines() {
                        let Ok(line) = line else { break };
                        if line.trim().is_empty() {
                            continue;
                        }
                        if inbound.send(Inbound::Line { client: id, line }).is_err() {
                            break;
                        }
                    }
                    let _ = out.send(Outbound::Leave(id));
                });
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

fn run_hub(rx: Receiver<Outbound>, mirror: Option<(UdpSocket, String)>, stop: Arc<AtomicBool>) {
    let mut clients: Vec<(u64, TcpStream)> = Vec::new();
    let send = |clients: &mut Vec<(u64, TcpStream)>, only: Option<u64>, text: &str| {
        clients.retain_mut(|(id, s)| {
            if only.is_some_and(|o| o != *id) {
                return true;
            }
            let ok = s
                .write_all(text.as_bytes())
                .and_then(|_| s.write_all(b"\n"))
                .is_ok();
            if !ok {
                log::info!("dropping client {id}");
            }
            ok
        });
    };
    loop {
        match rx.recv_timeout(Duration::from_millis(20)) {
            Ok(Outbound::Join(id, s)) => clients.push((id, s)),
            Ok(Outbound::Leave(id)) => clients.retain(|(c, _)| *c != id),
            Ok(Outbound::Broadcast(text)) => send(&mut clients, None, &text),
            Ok(Outbound::Reply(id, text)) => send(&mut clients, Some(id), &text),
            Ok(Outbound::Mirror(bytes)) => {
                if let Some((sock, target)) = &mirror {
                    if let Err(e) = sock.send_to(&bytes, target) {
                        log::debug!("CTI mirror send failed: {e}");
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if stop.load(Ordering::SeqCst) {
            break;
        }
    }
    for (_, s) in clients {
        let _ = s.shutdown(std::net::Shutdown::Both);
    }
}

struct Driver {
    cfg: ScenarioConfig,
    opts: LiveOptions,
    sim: Simulation,
    generation: u64,
    paused: bool,
    halted: Option<String>,
    out: Sender<Outbound>,
    finished: Arc<Mutex<Option<(u64, RunReport)>>>,
}

impl Driver {
    fn run(mut self, inbound: Receiver<Inbound>, stop: Arc<AtomicBool>) {
        let mut origin = (Instant::now(), self.sim.now());
        let mut next_emit = Instant::now();
        let mut slip = Duration::ZERO;
        let mut reported = false;
        while !stop.load(Ordering::SeqCst) {
            let busy = !self.paused && !self.sim.is_complete() && self.halted.is_none();
            // Block briefly only when there is nothing to simulate right away.
            let wait = if busy && self.opts.pace == 0.0 {
                Duration::ZERO
            } else {
                IDLE_WAIT
            };
            match inbound.recv_timeout(wait) {
                Ok(msg) => {
                    self.on_message(msg, &mut origin, &mut reported);
                    while let Ok(msg) = inbound.try_recv() {
                        self.on_message(msg, &mut origin, &mut reported);
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {}
            }

            if !self.paused && !self.sim.is_complete() && self.halted.is_none() {
                let now = self.sim.now();
                let target = if self.opts.pace == 0.0 {
                    now + UNPACED_STEP
                } else {
                    let wall = origin.0.elapsed().as_nanos() as f64 * self.opts.pace;
                    origin.1 + SimTime::from_nanos(wall as u64)
                };
                if let Err(e) = self.sim.advance_to(target) {
                    self.halted = Some(e.to_string());
                    self.broadcast(json!({"type": "error", "generation": self.generation, "error": e.to_string()}));
                }
                if self.opts.pace > 0.0 {
                    let behind = target.saturating_sub(self.sim.now()).min(self.sim.duration());
                    slip = Duration::from_nanos((behind.as_nanos() as f64 / self.opts.pace) as u64);
                }
            }
            for entry in self.sim.drain_cti_log() {
                self.publish_cti(&entry);
            }

            let just_done = self.sim.is_complete() && !reported;
            if just_done {
                reported = true;
                *self.finished.lock().expect("report lock") =
                    Some((self.generation, self.sim.report()));
            }
            if just_done || Instant::now() >= next_emit {
                next_emit = Instant::now() + self.opts.telemetry_interval;
                self.publish_window(slip);
            }
        }
    }

    fn broadcast(&self, v: Value) {
        let _ = self.out.send(Outbound::Broadcast(v.to_string()));
    }

    fn publish_window(&self, slip: Duration) {
        let w = self.sim.snapshot();
        let mut v = serde_json::to_value(&w).expect("window serializes");
        let obj = v.as_object_mut().expect("window is an object");
        obj.insert("type".into(), json!("window"));
        obj.insert("generation".into(), json!(self.generation));
        obj.insert("sim_time_ns".into(), json!(self.sim.now().as_nanos()));
        obj.insert("current_mode".into(), json!(self.sim.mode()));
        obj.insert("paused".into(), json!(self.paused));
        obj.insert("slip_ns".into(), json!(slip.as_nanos() as u64));
        obj.insert("complete".into(), json!(self.sim.is_complete()));
        self.broadcast(v);
    }

    fn publish_cti(&self, e: &CtiLogEntry) {
        let entries: Vec<Value> = e
            .report
            .entries
            .iter()
            .map(|x| {
                json!({
                    "tcont": x.tcont_id,
                    "bytes": x.expected_bytes,
                    "arrival_start_ns": x.arrival_start.as_nanos(),
                    "arrival_end_ns": x.arrival_end.as_nanos(),
                })
            })
            .collect();
        self.broadcast(json!({
            "type": "cti",
            "generation": self.generation,
            "seq": e.report.seq,
            "report_time_ns": e.report.report_time.as_nanos(),
            "sent_at_ns": e.sent_at.as_nanos(),
            "dropped": e.dropped,
            "entries": entries,
        }));
        let _ = self.out.send(Outbound::Mirror(e.wire.clone()));
    }

    fn on_message(
        &mut self,
        msg: Inbound,
        origin: &mut (Instant, SimTime),
        reported: &mut bool,
    ) {
        let Inbound::Line { client, line } = msg;
        let reply = match serde_json::from_str::<Command>(&line) {
            Err(e) => Reply::err(format!("malformed command: {e}")),
            Ok(cmd) => self.apply(cmd, origin, reported),
        };
        let text = serde_json::to_string(&reply).expect("reply serializes");
        let _ = self.out.send(Outbound::Reply(client, text));
    }

    fn apply(
        &mut self,
        cmd: Command,
        origin: &mut (Instant, SimTime),
        reported: &mut bool,
    ) -> Reply {
        let generation = self.generation;
        let no_boundary = || Reply::err("run has no boundary left; send reset first");
        match cmd {
            Command::SetMode { mode } => match self.sim.request_mode(mode) {
                Some(at) => Reply::ok(at, generation),
                None => no_boundary(),
            },
            Command::SetTrafficScale { ue, scale } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Reply::err(format!("scale must be a finite value >= 0, got {scale}"));
                }
                let target = match ue {
                    UeTarget::Ue(id) if self.sim.has_ue(id) => Some(id),
                    UeTarget::Ue(id) => return Reply::err(format!("unknown ue {id}")),
                    UeTarget::Keyword(k) if k == "all" => None,
                    UeTarget::Keyword(k) => {
                        return Reply::err(format!("ue must be an id or \"all\", got {k:?}"))
                    }
                };
                match self.sim.request_scale(target, scale) {
                    Some(at) => Reply::ok(at, generation),
                    None => no_boundary(),
                }
            }
            Command::Pause {} => {
                self.paused = true;
                Reply::ok(self.sim.now(), generation)
            }
            Command::Resume {} => {
                if self.paused {
                    self.paused = false;
                    *origin = (Instant::now(), self.sim.now());
                }
                Reply::ok(self.sim.now(), generation)
            }
            Command::Reset {} => match new_sim(&self.cfg) {
                Ok(sim) => {
                    self.sim = sim;
                    self.generation += 1;
                    self.halted = None;
                    *reported = false;
                    *self.finished.lock().expect("report lock") = None;
                    *origin = (Instant::now(), SimTime::ZERO);
                    Reply::ok(SimTime::ZERO, self.generation)
                }
                Err(e) => Reply::err(e.to_string()),
            },
        }
    }
}
