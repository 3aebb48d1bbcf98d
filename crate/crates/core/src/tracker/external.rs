//! Child-process propagator speaking line-delimited JSON over stdin/stdout.
//!
//! Both sides open with `{"op":"hello","protocol":1}`. Each predict request
//! gets exactly one response, in request order:
//!
//! ```text
//! > {"op":"predict","track_id":4,"init_frame":0,"init_box":[..],"history_frames":[..],"current_frame":"img/000007.jpg"}
//! < {"track_id":4,"box":[x1,y1,x2,y2]}      or      {"track_id":4,"box":null}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::propagator::{FrameContext, Propagator, PropagatorError};
use super::Trajectory;
use crate::geometry::BoundingBox;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Hello {
    pub op: String,
    pub protocol: u32,
}

impl Hello {
    pub fn current() -> Self {
        Self {
            op: "hello".into(),
            protocol: PROTOCOL_VERSION,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PredictRequest {
    pub op: String,
    pub track_id: u64,
    pub init_frame: usize,
    pub init_box: BoundingBox,
    pub history_frames: Vec<String>,
    pub current_frame: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PredictResponse {
    pub track_id: u64,
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
}

pub struct ExternalPropagator {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    /// Responses still owed for requests that timed out; skipped on arrival.
    stale: usize,
}

impl ExternalPropagator {
    /// Start `command` under `sh -c` and exchange the hello handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, PropagatorError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PropagatorError::Spawn {
                command: command.into(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut prop = Self {
            command: command.into(),
            child,
            stdin,
            lines: rx,
            timeout,
            stale: 0,
        };
        prop.send(&Hello::current())
            .map_err(|e| PropagatorError::Handshake(e.to_string()))?;
        let line = prop
            .recv()
            .map_err(|e| PropagatorError::Handshake(e.to_string()))?;
        let hello: Hello = serde_json::from_str(&line)
            .map_err(|e| PropagatorError::Handshake(format!("bad hello `{line}`: {e}")))?;
        if hello != Hello::current() {
            return Err(PropagatorError::Handshake(format!(
                "expected protocol {PROTOCOL_VERSION}, got `{line}`"
            )));
        }
        Ok(prop)
    }

    fn send<T: Serialize>(&mut self, msg: &T) -> Result<(), PropagatorError> {
        let stdin = self.stdin.as_mut().ok_or(PropagatorError::Closed)?;
        let mut line = serde_json::to_string(msg).map_err(|e| PropagatorError::Protocol(e.to_string()))?;
        line.push('\n');
        stdin.write_all(line.as_bytes())?;
        stdin.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, PropagatorError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PropagatorError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(PropagatorError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(PropagatorError::Closed),
        }
    }
}

impl Propagator for ExternalPropagator {
    fn name(&self) -> String {
        format!("extern:{}", self.command)
    }

    fn predict(
        &mut self,
        trajectory: &Trajectory,
        _current_frame: usize,
        context: &FrameContext<'_>,
    ) -> Result<Option<BoundingBox>, PropagatorError> {
        let request = PredictRequest {
            op: "predict".into(),
            track_id: trajectory.track_id(),
            init_frame: trajectory.first_frame(),
            init_box: trajectory.first_box(),
            history_frames: context.history.to_vec(),
            current_frame: context.current.to_string(),
        };
        self.send(&request)?;
        loop {
            let line = match self.recv() {
                Ok(line) => line,
                Err(e @ PropagatorError::Timeout(_)) => {
                    self.stale += 1;
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            if self.stale > 0 {
                self.stale -= 1;
                continue;
            }
            let response: PredictResponse = serde_json::from_str(&line)
                .map_err(|e| PropagatorError::Protocol(format!("bad response `{line}`: {e}")))?;
            if response.track_id != request.track_id {
                return Err(PropagatorError::Protocol(format!(
                    "response for track {} while waiting on track {}",
                    response.track_id, request.track_id
                )));
            }
            return Ok(response.bbox);
        }
    }
}

impl Drop for ExternalPropagator {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved server exit on EOF
        self.stdin.take();
        if let Ok(None) = self.child.try_wait() {
            thread::sleep(Duration::from_millis(20));
            if let Ok(None) = self.child.try_wait() {
                let _ = self.child.kill();
            }
        }
        let _ = self.child.wait();
    }
}
