//! Live classification over a line-oriented TCP protocol, plus a replay
//! client that feeds recorded samples into it.
//!
//! Wire protocol, one record per line in each direction:
//!
//! ```text
//! client -> server   <timestamp_ms>,<source_id>,<v1>,<v2>,<v3>,<i1>,<i2>,<i3>\n
//! server -> client   OK <class_code> <max_activation>\n
//!                    ERR <reason>\n
//! ```
//!
//! A rejected sample (threshold rule, no output high enough) is reported as
//! class code `0`. A malformed record gets an `ERR` reply and the connection
//! stays open.
//!
//! The server keeps one debounce counter per `source_id` per connection. A
//! [`FaultEvent`] fires when a source has produced `debounce_frames`
//! consecutive frames of the same non-`NoFault` class; the run must be
//! broken (by `NoFault`, a different class, or a rejection) before that
//! source can fire again. Events go to standard output and to an
//! append-only log with one `timestamp,source_id,class_code,consecutive_count`
//! line per event.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::dataset::{parse_measurement, Dataset, FaultClass, PhaseSample, CSV_HEADER, INPUT_DIM};
use crate::error::{Error, Result};
use crate::evaluation::{classify, DecisionRule, Prediction, ScoreModel};

const MAX_LINE_BYTES: usize = 4096;
const MAX_SOURCE_ID_LEN: usize = 64;
const POLL_INTERVAL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub source_id: String,
    pub sample: PhaseSample,
}

impl SensorFrame {
    /// The frame as one newline-terminated wire record.
    pub fn to_wire(&self) -> String {
        let s = &self.sample;
        format!(
            "{},{},{},{},{},{},{},{}\n",
            self.timestamp, self.source_id, s.v1, s.v2, s.v3, s.i1, s.i2, s.i3
        )
    }
}

/// Parses one wire record. A single trailing `\n` (or `\r\n`) is allowed;
/// any other whitespace is an error.
pub fn parse_frame(line: &[u8]) -> Result<SensorFrame> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let text = std::str::from_utf8(line).map_err(|_| protocol("record is not valid UTF-8"))?;
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 2 + INPUT_DIM {
        return Err(protocol(format!(
            "expected {} fields, found {}",
            2 + INPUT_DIM,
            fields.len()
        )));
    }
    let timestamp = fields[0]
        .parse::<u64>()
        .map_err(|_| protocol(format!("bad timestamp `{}`", fields[0])))?;
    let source_id = fields[1];
    if source_id.is_empty()
        || source_id.len() > MAX_SOURCE_ID_LEN
        || source_id.chars().any(|c| c.is_whitespace() || c.is_control())
    {
        return Err(protocol(format!("bad source id `{source_id}`")));
    }
    let mut values = [0.0; INPUT_DIM];
    for (slot, field) in values.iter_mut().zip(&fields[2..]) {
        *slot = parse_measurement(field).map_err(protocol)?;
    }
    Ok(SensorFrame {
        timestamp,
        source_id: source_id.to_owned(),
        sample: PhaseSample::from_array(values),
    })
}

fn protocol(reason: impl Into<String>) -> Error {
    Error::Protocol(reason.into())
}

/// Notification raised once per debounced fault episode.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultEvent {
    /// Timestamp of the frame that completed the run.
    pub timestamp: u64,
    pub predicted: FaultClass,
    pub outputs: Vec<f64>,
    pub consecutive_count: usize,
    pub source_id: String,
}

impl FaultEvent {
    /// `timestamp,source_id,class_code,consecutive_count`
    pub fn to_log_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.timestamp,
            self.source_id,
            self.predicted.code(),
            self.consecutive_count
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Run {
    class: Option<FaultClass>,
    count: usize,
}

/// Consecutive-detection counters keyed by source.
#[derive(Debug, Clone)]
pub struct Debouncer {
    debounce: usize,
    runs: HashMap<String, Run>,
}

impl Debouncer {
    pub fn new(debounce: usize) -> Self {
        Self {
            debounce: debounce.max(1),
            runs: HashMap::new(),
        }
    }

    /// Feeds one prediction; returns the run length when this frame
    /// completes a debounced fault run.
    pub fn observe(&mut self, source_id: &str, predicted: Prediction) -> Option<usize> {
        let run = self.runs.entry(source_id.to_owned()).or_default();
        match predicted {
            Prediction::Class(FaultClass::NoFault) | Prediction::Rejected => {
                *run = Run::default();
                None
            }
            Prediction::Class(c) => {
                if run.class == Some(c) {
                    run.count += 1;
                } else {
                    *run = Run { class: Some(c), count: 1 };
                }
                (run.count == self.debounce).then_some(run.count)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub debounce_frames: usize,
    pub rule: DecisionRule,
    pub max_connections: usize,
    pub event_log: Option<PathBuf>,
    /// Print each event to standard output.
    pub echo_events: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".to_owned(),
            port: 7878,
            debounce_frames: 3,
            rule: DecisionRule::argmax(),
            max_connections: 16,
            event_log: None,
            echo_events: true,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.debounce_frames == 0 {
            return Err(Error::usage("debounce must be at least 1 frame"));
        }
        if self.max_connections == 0 {
            return Err(Error::usage("max_connections must be at least 1"));
        }
        self.rule.validate()
    }
}

/// Serialized destination for fault events.
struct EventSink {
    log: Option<BufWriter<File>>,
    echo: bool,
    subscribers: Vec<Sender<FaultEvent>>,
}

impl EventSink {
    fn emit(&mut self, event: &FaultEvent) -> io::Result<()> {
        if self.echo {
            println!(
                "FAULT {} source={} class={} consecutive={}",
                event.timestamp, event.source_id, event.predicted, event.consecutive_count
            );
        }
        if let Some(log) = &mut self.log {
            writeln!(log, "{}", event.to_log_line())?;
            log.flush()?;
        }
        self.subscribers.retain(|tx| tx.send(event.clone()).is_ok());
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.log {
            Some(log) => log.flush(),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    connections: AtomicUsize,
    frames: AtomicUsize,
    errors: AtomicUsize,
    events: AtomicUsize,
}

/// Totals reported when a server shuts down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeSummary {
    pub connections: usize,
    pub frames: usize,
    pub errors: usize,
    pub events: usize,
}

/// Stops a running [`Server`] from any thread.
#[derive(Debug, Clone, Default)]
pub struct ShutdownHandle(Arc<AtomicBool>);

impl ShutdownHandle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shutdown(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_shutdown(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

pub struct Server<M> {
    model: Arc<M>,
    cfg: StreamConfig,
    listener: TcpListener,
    local_addr: SocketAddr,
    shutdown: ShutdownHandle,
    sink: Arc<Mutex<EventSink>>,
    counters: Arc<Counters>,
}

impl<M: ScoreModel + Send + Sync + 'static> Server<M> {
    /// Binds the listener and opens the event log. Nothing is served until
    /// [`run`](Self::run).
    pub fn bind(model: Arc<M>, cfg: StreamConfig) -> Result<Self> {
        cfg.validate()?;
        let addr = format!("{}:{}", cfg.host, cfg.port);
        let listener = TcpListener::bind(&addr).map_err(|source| Error::Bind {
            addr: addr.clone(),
            source,
        })?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let log = match &cfg.event_log {
            Some(path) => Some(BufWriter::new(
                OpenOptions::new().create(true).append(true).open(path)?,
            )),
            None => None,
        };
        let sink = EventSink {
            log,
            echo: cfg.echo_events,
            subscribers: Vec::new(),
        };
        Ok(Self {
            model,
            cfg,
            listener,
            local_addr,
            shutdown: ShutdownHandle::new(),
            sink: Arc::new(Mutex::new(sink)),
            counters: Arc::default(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    /// Channel that receives a copy of every event emitted after this call.
    pub fn subscribe(&self) -> Receiver<FaultEvent> {
        let (tx, rx) = mpsc::channel();
        self.sink.lock().expect("event sink poisoned").subscribers.push(tx);
        rx
    }

    /// Accepts and serves connections until shut down, then waits for every
    /// connection to finish and flushes the event log.
    pub fn run(self) -> Result<ServeSummary> {
        let active = Arc::new(AtomicUsize::new(0));
        let mut workers = Vec::new();
        while !self.shutdown.is_shutdown() {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    if active.load(Ordering::SeqCst) >= self.cfg.max_connections {
                        let mut stream = stream;
                        let _ = stream.write_all(b"ERR server busy\n");
                        continue;
                    }
                    active.fetch_add(1, Ordering::SeqCst);
                    self.counters.connections.fetch_add(1, Ordering::Relaxed);
                    let conn = Connection {
                        model: Arc::clone(&self.model),
                        rule: self.cfg.rule,
                        debouncer: Debouncer::new(self.cfg.debounce_frames),
                        sink: Arc::clone(&self.sink),
                        counters: Arc::clone(&self.counters),
                        shutdown: self.shutdown.clone(),
                    };
                    let active = Arc::clone(&active);
                    workers.push(thread::spawn(move || {
                        // per-connection I/O failures end only this connection
                        let _ = conn.serve(stream);
                        active.fetch_sub(1, Ordering::SeqCst);
                    }));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL_INTERVAL),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    self.shutdown.shutdown();
                    join_all(workers);
                    return Err(e.into());
                }
            }
        }
        join_all(workers);
        self.sink.lock().expect("event sink poisoned").flush()?;
        let c = &self.counters;
        Ok(ServeSummary {
            connections: c.connections.load(Ordering::SeqCst),
            frames: c.frames.load(Ordering::SeqCst),
            errors: c.errors.load(Ordering::SeqCst),
            events: c.events.load(Ordering::SeqCst),
        })
    }
}

fn join_all(workers: Vec<thread::JoinHandle<()>>) {
    for w in workers {
        let _ = w.join();
    }
}

/// Binds and serves until `shutdown` is triggered.
pub fn serve<M: ScoreModel + Send + Sync + 'static>(
    model: Arc<M>,
    cfg: StreamConfig,
    shutdown: ShutdownHandle,
) -> Result<ServeSummary> {
    let mut server = Server::bind(model, cfg)?;
    server.shutdown = shutdown;
    server.run()
}

struct Connection<M> {
    model: Arc<M>,
    rule: DecisionRule,
    debouncer: Debouncer,
    sink: Arc<Mutex<EventSink>>,
    counters: Arc<Counters>,
    shutdown: ShutdownHandle,
}

impl<M: ScoreModel> Connection<M> {
    fn serve(mut self, stream: TcpStream) -> io::Result<()> {
        stream.set_nonblocking(false)?;
        stream.set_read_timeout(Some(POLL_INTERVAL * 5))?;
        let mut writer = BufWriter::new(stream.try_clone()?);
        let mut reader = BufReader::new(stream);
        let mut line = Vec::with_capacity(128);
        loop {
            match reader.read_until(b'\n', &mut line) {
                Ok(0) => return Ok(()),
                Ok(_) => {}
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    if self.shutdown.is_shutdown() {
                        return Ok(());
                    }
                    if line.len() > MAX_LINE_BYTES {
                        writer.write_all(b"ERR record too long\n")?;
                        writer.flush()?;
                        return Ok(());
                    }
                    continue;
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
            if !line.ends_with(b"\n") {
                // EOF in the middle of a record
                if !line.is_empty() {
                    self.reply(&mut writer, &line)?;
                }
                return Ok(());
            }
            self.reply(&mut writer, &line)?;
            line.clear();
        }
    }

    fn reply(&mut self, writer: &mut impl Write, line: &[u8]) -> io::Result<()> {
        let response = match self.handle(line) {
            Ok((code, activation)) => format!("OK {code} {activation}\n"),
            Err(e) => {
                self.counters.errors.fetch_add(1, Ordering::Relaxed);
                let reason = match e {
                    Error::Protocol(reason) => reason,
                    other => other.to_string(),
                };
                format!("ERR {}\n", reason.replace('\n', " "))
            }
        };
        writer.write_all(response.as_bytes())?;
        writer.flush()
    }

    fn handle(&mut self, line: &[u8]) -> Result<(u8, f64)> {
        let frame = parse_frame(line)?;
        let result = classify(self.model.as_ref(), &frame.sample, &self.rule)?;
        self.counters.frames.fetch_add(1, Ordering::Relaxed);
        if let Some(count) = self.debouncer.observe(&frame.source_id, result.predicted) {
            let predicted = result.predicted.class().expect("only fault classes fire");
            let event = FaultEvent {
                timestamp: frame.timestamp,
                predicted,
                outputs: result.outputs.clone(),
                consecutive_count: count,
                source_id: frame.source_id,
            };
            self.counters.events.fetch_add(1, Ordering::Relaxed);
            self.sink
                .lock()
                .expect("event sink poisoned")
                .emit(&event)
                .map_err(Error::Io)?;
        }
        Ok((result.predicted.code(), result.max_activation()))
    }
}

/// One server reply.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Ok { code: u8, activation: f64 },
    Err(String),
}

impl Response {
    pub fn parse(line: &str) -> Result<Self> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        if let Some(reason) = line.strip_prefix("ERR ") {
            return Ok(Response::Err(reason.to_owned()));
        }
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["OK", code, activation] => {
                let code = code.parse().map_err(|_| protocol(format!("bad class code in `{line}`")))?;
                let activation = activation
                    .parse()
                    .map_err(|_| protocol(format!("bad activation in `{line}`")))?;
                Ok(Response::Ok { code, activation })
            }
            _ => Err(protocol(format!("unexpected reply `{line}`"))),
        }
    }

    /// Predicted class, when the reply carried one.
    pub fn class(&self) -> Option<FaultClass> {
        match self {
            Response::Ok { code, .. } => FaultClass::from_code(*code),
            Response::Err(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    pub rate_hz: f64,
    /// Source id stamped on frames built from dataset rows.
    pub source_id: String,
    /// Timestamp of the first synthesized frame.
    pub start_timestamp: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            rate_hz: 100.0,
            source_id: "replay".to_owned(),
            start_timestamp: 0,
        }
    }
}

/// Reads either a dataset CSV (detected by its header) or a log of wire
/// records, one per line.
///
/// Dataset rows become frames spaced `1000 / rate_hz` ms apart.
pub fn load_frames(text: &str, source_name: &str, opts: &ReplayOptions) -> Result<Vec<SensorFrame>> {
    if !(opts.rate_hz > 0.0 && opts.rate_hz.is_finite()) {
        return Err(Error::usage(format!("rate must be positive, got {}", opts.rate_hz)));
    }
    if text.lines().next() == Some(CSV_HEADER) {
        let data = Dataset::parse_csv(text, source_name)?;
        let step_ms = 1000.0 / opts.rate_hz;
        return Ok(data
            .iter()
            .enumerate()
            .map(|(i, s)| SensorFrame {
                timestamp: opts.start_timestamp + (i as f64 * step_ms).round() as u64,
                source_id: opts.source_id.clone(),
                sample: s.sample,
            })
            .collect());
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            parse_frame(l.as_bytes()).map_err(|e| {
                let reason = match e {
                    Error::Protocol(r) => r,
                    other => other.to_string(),
                };
                Error::parse(source_name, i + 1, reason)
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub responses: Vec<Response>,
}

impl ReplayReport {
    pub fn protocol_errors(&self) -> usize {
        self.responses.iter().filter(|r| matches!(r, Response::Err(_))).count()
    }

    pub fn predicted_codes(&self) -> Vec<Option<u8>> {
        self.responses
            .iter()
            .map(|r| match r {
                Response::Ok { code, .. } => Some(*code),
                Response::Err(_) => None,
            })
            .collect()
    }
}

/// Sends `frames` in order at `rate_hz`, waiting for each reply before the
/// next send. `on_response` sees every reply as it arrives.
pub fn replay<A: ToSocketAddrs>(
    frames: &[SensorFrame],
    addr: A,
    rate_hz: f64,
    mut on_response: impl FnMut(&SensorFrame, &Response),
) -> Result<ReplayReport> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::usage(format!("rate must be positive, got {rate_hz}")));
    }
    let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
    let display = addrs.first().map_or_else(|| "<no address>".to_owned(), SocketAddr::to_string);
    let stream = TcpStream::connect(&addrs[..]).map_err(|source| Error::Connect {
        addr: display,
        source,
    })?;
    stream.set_nodelay(true)?;
    let mut writer = BufWriter::new(stream.try_clone()?);
    let mut reader = BufReader::new(stream);

    let period = Duration::from_secs_f64(1.0 / rate_hz);
    let start = Instant::now();
    let mut report = ReplayReport::default();
    let mut line = String::new();
    for (i, frame) in frames.iter().enumerate() {
        let due = start + period.mul_f64(i as f64);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
        writer.write_all(frame.to_wire().as_bytes())?;
        writer.flush()?;
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(protocol(format!("server closed the connection after {i} replies")));
        }
        let response = Response::parse(&line)?;
        on_response(frame, &response);
        report.responses.push(response);
    }
    Ok(report)
}
