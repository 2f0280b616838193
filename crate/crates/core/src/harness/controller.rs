use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use super::{CorpusEntry, EvalProtocol};
use crate::carrot::{carrot_act, CarrotConfig, CarrotError};
use crate::planner::PlannedPath;
use crate::sim::{Action, Env, Status};
use crate::tasks::RewardBreakdown;

/// Version of the JSON-lines controller protocol.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Carrot(#[from] CarrotError),
    #[error("controller i/o: {0}")]
    Io(String),
    #[error("controller protocol: {0}")]
    Protocol(String),
}

/// What a controller sees before choosing an action.
pub struct StepView<'a> {
    pub env: &'a Env,
    /// Reference path of the episode.
    pub path: &'a PlannedPath,
    /// Current observation, present iff the controller asked for one.
    pub observation: Option<&'a [f64]>,
}

/// Result of the step that followed an action.
pub struct StepFeedback<'a> {
    pub observation: Option<&'a [f64]>,
    pub reward: &'a RewardBreakdown,
    pub status: Status,
}

pub trait Controller {
    /// Whether the harness must build observation vectors each step.
    fn needs_observation(&self) -> bool {
        false
    }

    fn begin(&mut self, _entry: &CorpusEntry, _observation: Option<&[f64]>) -> Result<(), ControllerError> {
        Ok(())
    }

    fn act(&mut self, view: &StepView) -> Result<Action, ControllerError>;

    fn feedback(&mut self, _fb: &StepFeedback) -> Result<(), ControllerError> {
        Ok(())
    }
}

pub struct CarrotController {
    pub config: CarrotConfig,
}

impl CarrotController {
    pub fn new(config: CarrotConfig) -> Self {
        Self { config }
    }
}

impl Controller for CarrotController {
    fn act(&mut self, view: &StepView) -> Result<Action, ControllerError> {
        Ok(carrot_act(view.env.state(), view.path, &self.config)?)
    }
}

/// Serves one TCP client speaking JSON lines.
///
/// On connect the harness sends `hello` with the protocol version and the
/// observation spec. Each episode starts with a `reset` message carrying the
/// first observation; the client answers every observation with
/// `{"type":"action","action":[vx,vy,omega]}` and receives a `step` message
/// with the next observation, reward terms and status. `close` ends the run.
pub struct ExternalController {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    broken: Option<String>,
    pending_reset: Option<Value>,
}

fn io_err(e: std::io::Error) -> ControllerError {
    ControllerError::Io(e.to_string())
}

impl ExternalController {
    /// Binds `addr` and waits up to `timeout_ms` for a client.
    pub fn listen(addr: &str, timeout_ms: u64, protocol: &EvalProtocol) -> Result<Self, ControllerError> {
        let listener = TcpListener::bind(addr).map_err(io_err)?;
        eprintln!("waiting for controller on {}", listener.local_addr().map_err(io_err)?);
        Self::accept(listener, timeout_ms, protocol)
    }

    pub fn accept(listener: TcpListener, timeout_ms: u64, protocol: &EvalProtocol) -> Result<Self, ControllerError> {
        let timeout = Duration::from_millis(timeout_ms.max(1));
        listener.set_nonblocking(true).map_err(io_err)?;
        let deadline = Instant::now() + timeout;
        let stream = loop {
            match listener.accept() {
                Ok((s, _)) => break s,
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(ControllerError::Io("no controller connected before the timeout".into()));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(io_err(e)),
            }
        };
        stream.set_nonblocking(false).map_err(io_err)?;
        stream.set_read_timeout(Some(timeout)).map_err(io_err)?;
        stream.set_nodelay(true).map_err(io_err)?;
        let mut c = Self {
            reader: BufReader::new(stream.try_clone().map_err(io_err)?),
            writer: BufWriter::new(stream),
            broken: None,
            pending_reset: None,
        };
        let hello = json!({
            "type": "hello",
            "protocol_version": PROTOCOL_VERSION,
            "crate_version": env!("CARGO_PKG_VERSION"),
            "observation_spec": protocol.observation,
            "layout": protocol.observation.layout(),
            "action_limits": protocol.episode.limits,
        });
        c.send(&hello)?;
        Ok(c)
    }

    fn send(&mut self, v: &Value) -> Result<(), ControllerError> {
        let r = writeln!(self.writer, "{v}").and_then(|_| self.writer.flush());
        r.map_err(|e| self.fail(io_err(e)))
    }

    fn fail(&mut self, e: ControllerError) -> ControllerError {
        if matches!(e, ControllerError::Io(_)) {
            self.broken = Some(e.to_string());
        }
        e
    }

    fn read_action(&mut self) -> Result<Action, ControllerError> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => return Err(self.fail(ControllerError::Io("controller disconnected".into()))),
            Ok(_) => {}
            Err(e) => return Err(self.fail(io_err(e))),
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| ControllerError::Protocol(e.to_string()))?;
        if v.get("type").and_then(Value::as_str) != Some("action") {
            return Err(ControllerError::Protocol(format!("expected an action message, got {}", line.trim())));
        }
        let a: [f64; 3] = v
            .get("action")
            .cloned()
            .and_then(|a| serde_json::from_value(a).ok())
            .ok_or_else(|| ControllerError::Protocol("action must be three numbers".into()))?;
        Ok(Action::from_array(a))
    }

    /// Tells the client the run is over; errors are ignored.
    pub fn close(&mut self) {
        if self.broken.is_none() {
            let _ = self.send(&json!({ "type": "close" }));
        }
    }
}

impl Controller for ExternalController {
    fn needs_observation(&self) -> bool {
        true
    }

    fn begin(&mut self, entry: &CorpusEntry, observation: Option<&[f64]>) -> Result<(), ControllerError> {
        if let Some(why) = &self.broken {
            return Err(ControllerError::Io(why.clone()));
        }
        self.pending_reset = Some(json!({
            "type": "reset",
            "generator": entry.generator,
            "index": entry.index,
            "map_seed": entry.map_seed,
            "astar_length": entry.path.length,
            "observation": observation.unwrap_or_default(),
        }));
        Ok(())
    }

    fn act(&mut self, _view: &StepView) -> Result<Action, ControllerError> {
        if let Some(msg) = self.pending_reset.take() {
            self.send(&msg)?;
        }
        self.read_action()
    }

    fn feedback(&mut self, fb: &StepFeedback) -> Result<(), ControllerError> {
        let msg = json!({
            "type": "step",
            "observation": fb.observation.unwrap_or_default(),
            "reward": fb.reward.total,
            "reward_terms": fb.reward,
            "status": fb.status,
            "terminated": matches!(fb.status, Status::Success | Status::Collision),
            "truncated": fb.status == Status::Timeout,
        });
        self.send(&msg)
    }
}
