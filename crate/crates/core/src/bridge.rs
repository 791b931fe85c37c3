//! Line-delimited JSON bridge to a model hosted in another process.
//!
//! The client writes one JSON object per line to the child's stdin and reads
//! one JSON object per line from its stdout:
//!
//! ```text
//! -> {"type":"hello","p":40,"mode":"vector"}
//! <- {"type":"ready","p":40}
//! -> {"type":"eval","id":1,"inputs":[[1.0,-1.0,...],...]}
//! <- {"type":"result","id":1,"outputs":[0.5,...]}
//! <- {"type":"error","id":1,"message":"..."}
//! ```
//!
//! One request is in flight at a time and ids increase strictly.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::blackbox::{BlackBox, Evaluator};
use crate::error::{BridgeError, EvalFailure, Result};
use crate::space::{Context, PerturbationSpace};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireMode {
    /// Realized input vectors are sent.
    #[default]
    Vector,
    /// Raw 0/1 masks are sent; the host owns the encoding.
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireInputs {
    Vectors(Vec<Vec<f64>>),
    Masks(Vec<Vec<u8>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello { p: usize, mode: WireMode },
    Eval { id: u64, inputs: WireInputs },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Reply {
    Ready { p: usize },
    Result { id: u64, outputs: Vec<f64> },
    Error { id: u64, message: String },
}

/// How to launch a model host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeCommand {
    pub program: String,
    pub args: Vec<String>,
    pub mode: WireMode,
    #[serde(skip, default = "default_timeout")]
    pub timeout: Duration,
}

fn default_timeout() -> Duration {
    DEFAULT_TIMEOUT
}

impl BridgeCommand {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            mode: WireMode::Vector,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Splits a shell-style command line.
    pub fn parse(line: &str) -> std::result::Result<Self, BridgeError> {
        let mut words = shlex::split(line)
            .ok_or_else(|| BridgeError::Handshake(format!("cannot parse command `{line}`")))?;
        if words.is_empty() {
            return Err(BridgeError::Handshake("empty bridge command".into()));
        }
        let program = words.remove(0);
        Ok(Self::new(program, words))
    }

    pub fn with_mode(mut self, mode: WireMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn display(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .map(|w| shlex::try_quote(w).map(|c| c.into_owned()).unwrap_or_else(|_| w.to_string()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    broken: Option<String>,
}

impl Session {
    fn send(&mut self, req: &Request) -> std::result::Result<(), BridgeError> {
        let mut line = serde_json::to_string(req).expect("requests always serialize");
        line.push('\n');
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> std::result::Result<Reply, BridgeError> {
        let line = match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(BridgeError::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(BridgeError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "stdout closed".into());
                return Err(BridgeError::Protocol(format!(
                    "host closed its output ({status})"
                )));
            }
        };
        serde_json::from_str(&line)
            .map_err(|e| BridgeError::Protocol(format!("unparseable reply `{line}`: {e}")))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Evaluator backed by a child process speaking the wire protocol.
pub struct BridgeEvaluator {
    session: Mutex<Session>,
    mode: WireMode,
    timeout: Duration,
}

impl BridgeEvaluator {
    /// Spawns the host and performs the handshake.
    pub fn spawn(command: &BridgeCommand, p: usize) -> std::result::Result<Self, BridgeError> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BridgeError::Spawn {
                command: command.display(),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut session = Session {
            child,
            stdin,
            lines: rx,
            next_id: 1,
            broken: None,
        };

        session
            .send(&Request::Hello {
                p,
                mode: command.mode,
            })
            .map_err(|e| BridgeError::Handshake(e.to_string()))?;
        match session.recv(command.timeout) {
            Ok(Reply::Ready { p: declared }) if declared == p => {}
            Ok(Reply::Ready { p: declared }) => {
                return Err(BridgeError::DimensionMismatch {
                    declared,
                    expected: p,
                })
            }
            Ok(other) => {
                return Err(BridgeError::Handshake(format!(
                    "expected a ready message, got {other:?}"
                )))
            }
            Err(BridgeError::Timeout(t)) => return Err(BridgeError::Timeout(t)),
            Err(e) => return Err(BridgeError::Handshake(e.to_string())),
        }

        Ok(Self {
            session: Mutex::new(session),
            mode: command.mode,
            timeout: command.timeout,
        })
    }

    fn request(
        &self,
        inputs: WireInputs,
        expected: usize,
    ) -> std::result::Result<Vec<f64>, BridgeError> {
        let mut session = self.session.lock().expect("bridge session poisoned");
        if let Some(reason) = &session.broken {
            return Err(BridgeError::Protocol(format!("session unusable: {reason}")));
        }
        let id = session.next_id;
        session.next_id += 1;
        let outcome = session
            .send(&Request::Eval { id, inputs })
            .and_then(|_| session.recv(self.timeout))
            .and_then(|reply| match reply {
                Reply::Result { id: got, outputs } if got == id => {
                    if outputs.len() == expected {
                        Ok(outputs)
                    } else {
                        Err(BridgeError::Protocol(format!(
                            "request {id}: expected {expected} outputs, got {}",
                            outputs.len()
                        )))
                    }
                }
                Reply::Error { id: got, message } if got == id => {
                    Err(BridgeError::Remote { id, message })
                }
                other => Err(BridgeError::Protocol(format!(
                    "request {id}: unexpected reply {other:?}"
                ))),
            });
        // a remote error leaves the stream in sync; anything else does not
        if let Err(e) = &outcome {
            if !matches!(e, BridgeError::Remote { .. }) {
                session.broken = Some(e.to_string());
            }
        }
        outcome
    }
}

impl Evaluator for BridgeEvaluator {
    fn evaluate(
        &self,
        space: &PerturbationSpace,
        batch: &[Context],
    ) -> std::result::Result<Vec<f64>, EvalFailure> {
        let inputs = match self.mode {
            WireMode::Vector => WireInputs::Vectors(
                batch
                    .iter()
                    .map(|c| space.realize(c))
                    .collect::<Result<_>>()
                    .map_err(|e| EvalFailure::Message(e.to_string()))?,
            ),
            WireMode::Mask => WireInputs::Masks(
                batch
                    .iter()
                    .map(|c| c.bits().map(u8::from).collect())
                    .collect(),
            ),
        };
        Ok(self.request(inputs, batch.len())?)
    }
}

/// Spawns a model host and wraps it as a memoized black box.
pub fn bridge_open(command: &BridgeCommand, space: PerturbationSpace) -> Result<BlackBox> {
    let evaluator = BridgeEvaluator::spawn(command, space.p())?;
    Ok(BlackBox::new(space, evaluator))
}

/// Host side of the protocol: answers requests on `input` until EOF.
///
/// `space` is needed only for hosts that accept mask-mode clients.
pub fn serve<R, W, F>(
    input: R,
    mut output: W,
    p: usize,
    space: Option<&PerturbationSpace>,
    f: F,
) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: Fn(&[f64]) -> std::result::Result<f64, String>,
{
    let mut mode = None;
    let write = |reply: &Reply, out: &mut W| -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, reply)?;
        out.write_all(b"\n")?;
        out.flush()
    };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                write(
                    &Reply::Error {
                        id: 0,
                        message: format!("bad request: {e}"),
                    },
                    &mut output,
                )?;
                continue;
            }
        };
        match request {
            Request::Hello { mode: m, .. } => {
                mode = Some(m);
                write(&Reply::Ready { p }, &mut output)?;
            }
            Request::Eval { id, inputs } => {
                let reply = match answer(mode, p, space, &inputs, &f) {
                    Ok(outputs) => Reply::Result { id, outputs },
                    Err(message) => Reply::Error { id, message },
                };
                write(&reply, &mut output)?;
            }
        }
    }
    Ok(())
}

fn answer<F>(
    mode: Option<WireMode>,
    p: usize,
    space: Option<&PerturbationSpace>,
    inputs: &WireInputs,
    f: &F,
) -> std::result::Result<Vec<f64>, String>
where
    F: Fn(&[f64]) -> std::result::Result<f64, String>,
{
    let mode = mode.ok_or("eval before hello")?;
    let rows: Vec<Vec<f64>> = match inputs {
        WireInputs::Vectors(v) => v.clone(),
        WireInputs::Masks(m) => m
            .iter()
            .map(|r| r.iter().map(|&b| f64::from(b)).collect())
            .collect(),
    };
    rows.iter()
        .map(|row| {
            if row.len() != p {
                return Err(format!("input of length {} for p={p}", row.len()));
            }
            match mode {
                WireMode::Vector => f(row),
                WireMode::Mask => {
                    let space = space.ok_or("this host does not accept masks")?;
                    let bits: Vec<bool> = row.iter().map(|&b| b != 0.0).collect();
                    let v = space
                        .realize(&Context::from_bits(&bits))
                        .map_err(|e| e.to_string())?;
                    f(&v)
                }
            }
        })
        .collect()
}
