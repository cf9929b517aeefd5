//! Websocket snapshot service around the closed loop.
//!
//! The control loop runs on its own thread. Commands go through a
//! latest-value mailbox read at tick boundaries; snapshots are serialized
//! once and pushed into per-connection bounded queues that drop the oldest
//! entry when full, so a slow client never stalls the loop.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::command::{default_dphi, GaitCommand};
use super::controller::Controller;
use super::RuntimeError;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeOptions {
    pub addr: String,
    pub snapshot_hz: f64,
    /// Per-connection snapshot queue length.
    pub queue: usize,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8765".into(),
            snapshot_hz: 20.0,
            queue: 32,
            max_ticks: None,
        }
    }
}

/// Client → server messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        g: f64,
        a: [f64; 3],
        #[serde(default)]
        dphi: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSnapshot {
    pub position: [f64; 3],
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(rename = "type")]
    pub kind: String,
    pub tick: u64,
    pub phi: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub z_plan: [f64; 2],
    pub contacts: [f64; 4],
    pub joints: [f64; 12],
    pub base: BaseSnapshot,
    pub latency_us: u32,
    pub gait_label: f64,
    pub a: [f64; 3],
    pub dphi: f64,
}

/// Parse and validate a command message.
pub fn parse_command(text: &str, rate_hz: f64) -> Result<GaitCommand, RuntimeError> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| RuntimeError::InvalidCommand(e.to_string()))?;
    match msg {
        ClientMessage::Command { g, a, dphi } => GaitCommand {
            a,
            g,
            dphi: dphi.unwrap_or_else(|| default_dphi(g, rate_hz)),
        }
        .validate(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ServeStats {
    pub ticks: u64,
    /// Deadlines passed without a tick.
    pub missed_ticks: u64,
    /// Ticks whose publish step pushed them past the deadline.
    pub publish_overruns: u64,
    pub snapshots: u64,
    pub dropped_snapshots: u64,
    pub max_publish_us: u32,
    pub max_step_us: u32,
    pub error: Option<String>,
}

type Queue = Arc<Mutex<VecDeque<Arc<str>>>>;

struct Shared {
    stop: AtomicBool,
    mailbox: Mutex<Option<GaitCommand>>,
    subscribers: Mutex<Vec<Queue>>,
    stats: Mutex<ServeStats>,
}

pub struct ServeHandle {
    pub addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl ServeHandle {
    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_running(&self) -> bool {
        !self.shared.stop.load(Ordering::SeqCst)
    }

    pub fn stats(&self) -> ServeStats {
        self.shared.stats.lock().map(|s| s.clone()).unwrap_or_default()
    }

    /// Wait for the loop to finish (after [`stop`](Self::stop) or the tick
    /// limit).
    pub fn join(mut self) -> ServeStats {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        self.stats()
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        self.stop();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

pub fn serve(controller: Controller, initial: GaitCommand, opts: ServeOptions) -> Result<ServeHandle, RuntimeError> {
    if !(opts.snapshot_hz > 0.0) || opts.queue == 0 {
        return Err(RuntimeError::Config("snapshot rate and queue length must be positive".into()));
    }
    let listener = TcpListener::bind(&opts.addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        stop: AtomicBool::new(false),
        mailbox: Mutex::new(None),
        subscribers: Mutex::new(Vec::new()),
        stats: Mutex::new(ServeStats::default()),
    });
    let rate = controller.rate_hz();
    let s = shared.clone();
    let o = opts.clone();
    let control = std::thread::spawn(move || control_loop(controller, initial, o, s));
    let s = shared.clone();
    let accept = std::thread::spawn(move || accept_loop(listener, rate, opts.queue, s));
    Ok(ServeHandle {
        addr,
        shared,
        threads: vec![control, accept],
    })
}

fn control_loop(mut controller: Controller, initial: GaitCommand, opts: ServeOptions, shared: Arc<Shared>) {
    let rate = controller.rate_hz();
    let period = Duration::from_secs_f64(1.0 / rate);
    let every = ((rate / opts.snapshot_hz).round() as u64).max(1);
    let mut command = initial;
    let mut deadline = Instant::now() + period;
    let mut local = ServeStats::default();
    while !shared.stop.load(Ordering::SeqCst) {
        if let Ok(mut m) = shared.mailbox.lock() {
            if let Some(c) = m.take() {
                command = c;
            }
        }
        let t0 = Instant::now();
        let out = match controller.step(command) {
            Ok(o) => o,
            Err(e) => {
                local.error = Some(e.to_string());
                break;
            }
        };
        local.ticks += 1;
        local.max_step_us = local.max_step_us.max(t0.elapsed().as_micros() as u32);
        let stepped = Instant::now();

        if local.ticks % every == 0 {
            let (roll, pitch, yaw) = out.tracked.pose.rpy();
            let snap = Snapshot {
                kind: "snapshot".into(),
                tick: out.tick.tick,
                phi: out.tick.phi,
                radius: out.tick.radius,
                z_plan: out.tick.z_plan,
                contacts: out.tick.contact_probs,
                joints: out.tracked.state.q,
                base: BaseSnapshot {
                    position: out.tracked.pose.position.into(),
                    rpy: [roll, pitch, yaw],
                },
                latency_us: out.tick.latency.total_us,
                gait_label: command.g,
                a: command.a,
                dphi: command.dphi,
            };
            if let Ok(text) = serde_json::to_string(&snap) {
                let text: Arc<str> = text.into();
                if let Ok(subs) = shared.subscribers.lock() {
                    for q in subs.iter() {
                        if let Ok(mut q) = q.lock() {
                            if q.len() >= opts.queue {
                                q.pop_front();
                                local.dropped_snapshots += 1;
                            }
                            q.push_back(text.clone());
                        }
                    }
                }
                local.snapshots += 1;
            }
            let publish = stepped.elapsed();
            local.max_publish_us = local.max_publish_us.max(publish.as_micros() as u32);
            if Instant::now() > deadline && stepped <= deadline {
                local.publish_overruns += 1;
            }
        }

        if let Ok(mut s) = shared.stats.lock() {
            *s = local.clone();
        }
        if opts.max_ticks.is_some_and(|m| local.ticks >= m) {
            break;
        }
        let now = Instant::now();
        if now < deadline {
            std::thread::sleep(deadline - now);
            deadline += period;
        } else {
            let late = ((now - deadline).as_secs_f64() / period.as_secs_f64()) as u64;
            local.missed_ticks += late;
            deadline += period * (late as u32 + 1);
        }
    }
    if let Ok(mut s) = shared.stats.lock() {
        *s = local;
    }
    shared.stop.store(true, Ordering::SeqCst);
}

fn accept_loop(listener: TcpListener, rate: f64, queue: usize, shared: Arc<Shared>) {
    let mut conns = Vec::new();
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let s = shared.clone();
                conns.push(std::thread::spawn(move || {
                    let _ = connection(stream, rate, queue, s);
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => std::thread::sleep(Duration::from_millis(5)),
        }
    }
    for c in conns {
        let _ = c.join();
    }
}

fn send_text(ws: &mut WebSocket<TcpStream>, text: String) -> Result<(), tungstenite::Error> {
    ws.send(Message::Text(text))
}

fn connection(stream: TcpStream, rate: f64, queue: usize, shared: Arc<Shared>) -> Result<(), RuntimeError> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| RuntimeError::stage("serve", e))?;
    ws.get_mut().set_read_timeout(Some(Duration::from_millis(5)))?;
    let q: Queue = Arc::new(Mutex::new(VecDeque::with_capacity(queue)));
    if let Ok(mut subs) = shared.subscribers.lock() {
        subs.push(q.clone());
    }
    let result = (|| -> Result<(), RuntimeError> {
        while !shared.stop.load(Ordering::SeqCst) {
            let pending: Vec<Arc<str>> = q.lock().map(|mut q| q.drain(..).collect()).unwrap_or_default();
            for text in pending {
                send_text(&mut ws, text.to_string()).map_err(|e| RuntimeError::stage("serve", e))?;
            }
            match ws.read() {
                Ok(Message::Text(text)) => match parse_command(&text, rate) {
                    Ok(c) => {
                        if let Ok(mut m) = shared.mailbox.lock() {
                            *m = Some(c);
                        }
                    }
                    Err(e) => {
                        let reply = serde_json::json!({"type": "error", "message": e.to_string()});
                        send_text(&mut ws, reply.to_string()).map_err(|e| RuntimeError::stage("serve", e))?;
                    }
                },
                Ok(Message::Close(_)) => break,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(tungstenite::Error::ConnectionClosed) | Err(tungstenite::Error::AlreadyClosed) => break,
                Err(e) => return Err(RuntimeError::stage("serve", e)),
            }
        }
        Ok(())
    })();
    if let Ok(mut subs) = shared.subscribers.lock() {
        subs.retain(|s| !Arc::ptr_eq(s, &q));
    }
    let _ = ws.close(None);
    result
}
