//! Client for external trainer workers speaking `mnas-bridge/1`.
//!
//! Framing is UTF-8 JSON, one object per line, over a child process's
//! stdin/stdout or a TCP stream:
//!
//! ```text
//! worker -> {"type":"hello","protocol":"mnas-bridge/1"}
//! client -> {"type":"eval","id":1,"genotype":"mnasgeno v1\n...","epochs":5,"seed":7}
//! worker -> {"type":"result","id":1,"fitness":0.81,"metrics":{"dsc":0.81,"miou":0.68},"wall_seconds":3.2}
//! worker -> {"type":"error","id":2,"message":"diverged"}
//! ```
//!
//! Several requests may be in flight; replies are matched by id and may
//! arrive in any order. Timeouts bound the wait for replies; writes to a
//! worker that stops reading can still block.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Cost, EvalError, EvalResult, Evaluator};
use crate::space::{encode, Genotype};

pub const PROTOCOL: &str = "mnas-bridge/1";

/// Longest line accepted from a worker.
pub const MAX_LINE: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Endpoint {
    /// Spawn a worker and talk over its stdin/stdout.
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
    /// Connect to a worker listening on `host:port`.
    Tcp { address: String },
}

#[derive(Debug, Serialize)]
struct EvalRequest<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    id: u64,
    genotype: &'a str,
    epochs: u64,
    seed: u64,
}

/// Encodes one request line, without the trailing newline.
pub fn encode_request(id: u64, genotype: &Genotype, epochs: u64, seed: u64) -> String {
    let text = encode(genotype);
    serde_json::to_string(&EvalRequest {
        kind: "eval",
        id,
        genotype: &text,
        epochs,
        seed,
    })
    .expect("request serializes")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum WorkerMessage {
    Hello {
        protocol: String,
    },
    Result {
        id: u64,
        fitness: f64,
        metrics: BTreeMap<String, f64>,
        wall_seconds: f64,
    },
    Error {
        id: u64,
        message: String,
    },
}

impl WorkerMessage {
    fn reply_id(&self) -> Option<u64> {
        match self {
            WorkerMessage::Hello { .. } => None,
            WorkerMessage::Result { id, .. } | WorkerMessage::Error { id, .. } => Some(*id),
        }
    }
}

fn protocol(message: impl Into<String>, line: &str) -> EvalError {
    let mut line = line.to_string();
    if line.len() > 512 {
        let mut cut = 512;
        while !line.is_char_boundary(cut) {
            cut -= 1;
        }
        line.truncate(cut);
    }
    EvalError::Protocol {
        message: message.into(),
        line,
    }
}

/// Parses and range-checks one line received from a worker.
pub fn parse_worker_line(line: &str) -> Result<WorkerMessage, EvalError> {
    let msg: WorkerMessage =
        serde_json::from_str(line).map_err(|e| protocol(format!("malformed record: {e}"), line))?;
    if let WorkerMessage::Result {
        fitness,
        metrics,
        wall_seconds,
        ..
    } = &msg
    {
        if !(0.0..=1.0).contains(fitness) {
            return Err(protocol(format!("fitness {fitness} outside [0, 1]"), line));
        }
        if !(wall_seconds.is_finite() && *wall_seconds >= 0.0) {
            return Err(protocol(format!("wall_seconds {wall_seconds} invalid"), line));
        }
        if let Some((k, v)) = metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(protocol(format!("metric `{k}` = {v} is not finite"), line));
        }
    }
    Ok(msg)
}

type Line = Result<String, String>;

fn spawn_reader<R: Read + Send + 'static>(reader: R) -> Receiver<Line> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        loop {
            let mut buf = Vec::new();
            let read = (&mut reader).take(MAX_LINE as u64 + 1).read_until(b'\n', &mut buf);
            let item = match read {
                Ok(0) => break,
                Ok(_) if buf.len() > MAX_LINE => Err(format!("line longer than {MAX_LINE} bytes")),
                Ok(_) => {
                    if buf.last() == Some(&b'\n') {
                        buf.pop();
                    }
                    String::from_utf8(buf).map_err(|_| "line is not valid UTF-8".to_string())
                }
                Err(e) => Err(e.to_string()),
            };
            let stop = item.is_err();
            if tx.send(item).is_err() || stop {
                break;
            }
        }
    });
    rx
}

/// A connection to one worker.
pub struct BridgeClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<Line>,
    timeout: Duration,
    next_id: u64,
    in_flight: HashSet<u64>,
    parked: HashMap<u64, WorkerMessage>,
    child: Option<Child>,
}

impl BridgeClient {
    /// Wraps an already-open transport and performs the handshake.
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Result<Self, EvalError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut client = Self {
            writer: Box::new(writer),
            lines: spawn_reader(reader),
            timeout,
            next_id: 1,
            in_flight: HashSet::new(),
            parked: HashMap::new(),
            child: None,
        };
        client.handshake()?;
        Ok(client)
    }

    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, EvalError> {
        match endpoint {
            Endpoint::Tcp { address } => {
                let stream =
                    TcpStream::connect(address).map_err(|e| EvalError::Io(format!("connect {address}: {e}")))?;
                let reader = stream.try_clone().map_err(|e| EvalError::Io(e.to_string()))?;
                Self::from_streams(reader, stream, timeout)
            }
            Endpoint::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| EvalError::Io(format!("spawn {program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut client = match Self::from_streams(stdout, stdin, timeout) {
                    Ok(c) => c,
                    Err(e) => {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(e);
                    }
                };
                client.child = Some(child);
                Ok(client)
            }
        }
    }

    fn recv(&self, deadline: Instant, id: u64) -> Result<String, EvalError> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(EvalError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout {
                id,
                seconds: self.timeout.as_secs_f64(),
            }),
            Err(RecvTimeoutError::Disconnected) => Err(EvalError::Io("worker closed the connection".into())),
        }
    }

    fn handshake(&mut self) -> Result<(), EvalError> {
        let deadline = Instant::now() + self.timeout;
        let line = self.recv(deadline, 0)?;
        match parse_worker_line(&line)? {
            WorkerMessage::Hello { protocol: p } if p == PROTOCOL => Ok(()),
            WorkerMessage::Hello { protocol: p } => Err(protocol(format!("unsupported protocol `{p}`"), &line)),
            _ => Err(protocol("expected hello record first", &line)),
        }
    }

    /// Sends a request and returns its id without waiting for the reply.
    pub fn submit(&mut self, genotype: &Genotype, epochs: u64, seed: u64) -> Result<u64, EvalError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = encode_request(id, genotype, epochs, seed);
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|()| self.writer.flush())
            .map_err(|e| EvalError::Io(format!("send request {id}: {e}")))?;
        self.in_flight.insert(id);
        Ok(id)
    }

    /// Waits for the reply to `id`, parking replies to other in-flight ids.
    pub fn wait(&mut self, id: u64) -> Result<EvalResult, EvalError> {
        if !self.in_flight.contains(&id) {
            return Err(EvalError::Invalid(format!("request {id} is not in flight")));
        }
        let deadline = Instant::now() + self.timeout;
        let reply = loop {
            if let Some(msg) = self.parked.remove(&id) {
                break msg;
            }
            let line = self.recv(deadline, id)?;
            let msg = parse_worker_line(&line)?;
            match msg.reply_id() {
                Some(got) if got == id => break msg,
                Some(got) if self.in_flight.contains(&got) && !self.parked.contains_key(&got) => {
                    self.parked.insert(got, msg);
                }
                Some(got) => return Err(protocol(format!("response id {got} matches no pending request"), &line)),
                None => return Err(protocol("unexpected hello record", &line)),
            }
        };
        self.in_flight.remove(&id);
        match reply {
            WorkerMessage::Result {
                fitness,
                metrics,
                wall_seconds,
                ..
            } => Ok(EvalResult {
                fitness,
                metrics,
                cost: Cost {
                    wall_seconds,
                    epochs: 0,
                },
            }),
            WorkerMessage::Error { message, .. } => Err(EvalError::Worker { id, message }),
            WorkerMessage::Hello { .. } => unreachable!("hello has no id"),
        }
    }

    pub fn evaluate(&mut self, genotype: &Genotype, epochs: u64, seed: u64) -> Result<EvalResult, EvalError> {
        let id = self.submit(genotype, epochs, seed)?;
        let mut result = self.wait(id)?;
        result.cost.epochs = epochs;
        Ok(result)
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            // closing stdin asks the worker to exit; give it a moment
            self.writer = Box::new(std::io::sink());
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// One-shot evaluation over a fresh connection.
pub fn bridge_evaluate(
    genotype: &Genotype,
    epochs: u64,
    seed: u64,
    endpoint: &Endpoint,
    timeout: Duration,
) -> Result<EvalResult, EvalError> {
    BridgeClient::connect(endpoint, timeout)?.evaluate(genotype, epochs, seed)
}

/// [`Evaluator`] that forwards every genotype to a worker.
pub struct BridgeEvaluator {
    client: BridgeClient,
    epochs: u64,
    seed: u64,
}

impl BridgeEvaluator {
    pub fn new(client: BridgeClient, epochs: u64, seed: u64) -> Self {
        Self { client, epochs, seed }
    }
}

impl Evaluator for BridgeEvaluator {
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError> {
        self.client.evaluate(genotype, self.epochs, self.seed)
    }
}
