//! Client for an external model process speaking JSON lines on its
//! standard streams.
//!
//! The session opens with `{"op":"hello","v":1,"width":W,"height":H,"n_frames":N}`
//! and the server must answer `ok` with the same version and dimensions.
//! Every later request is `{"op", "frame_index", "payload"}` and gets exactly
//! one response line `{"ok", "observations", "detections", "error"}`.
//! Masks travel as compressed RLE strings for the announced frame size.

use std::cell::RefCell;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, ExitStatus, Stdio};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::association::Detection;
use crate::error::{Error, Result};
use crate::mask::BBox;
use crate::rle::Rle;
use crate::segmenter::{Detector, Segmenter};
use crate::track::{MaskObservation, TrackId};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<usize>,
    #[serde(skip_serializing_if = "Value::is_null", default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    pub track_id: TrackId,
    pub rle: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub class_id: u32,
    pub score: f64,
    /// `[x1, y1, x2, y2]`
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub ok: bool,
    #[serde(default)]
    pub observations: Vec<WireObservation>,
    #[serde(default)]
    pub detections: Vec<WireDetection>,
    #[serde(default)]
    pub error: Option<String>,
    // handshake echo
    #[serde(default)]
    pub v: Option<u32>,
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub height: Option<usize>,
}

/// Protocol client over any line reader and writer.
pub struct AdapterClient<R, W> {
    reader: R,
    writer: W,
    width: usize,
    height: usize,
    line: String,
}

impl<R: BufRead, W: Write> AdapterClient<R, W> {
    /// Sends the handshake and checks the echoed version and frame size.
    pub fn connect(reader: R, writer: W, width: usize, height: usize, n_frames: usize) -> Result<Self> {
        let mut c = Self {
            reader,
            writer,
            width,
            height,
            line: String::new(),
        };
        let hello = json!({
            "op": "hello",
            "v": PROTOCOL_VERSION,
            "width": width,
            "height": height,
            "n_frames": n_frames,
        });
        let resp = c.exchange(&hello, None)?;
        match resp.v {
            Some(PROTOCOL_VERSION) => {}
            Some(v) => return Err(Error::Protocol(format!("server speaks version {v}, expected {PROTOCOL_VERSION}"))),
            None => return Err(Error::Protocol("handshake reply has no version".into())),
        }
        if resp.width != Some(width) || resp.height != Some(height) {
            return Err(Error::Protocol(format!(
                "handshake echoed {:?}x{:?}, expected {width}x{height}",
                resp.width, resp.height
            )));
        }
        Ok(c)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn exchange(&mut self, msg: &impl Serialize, frame: Option<usize>) -> Result<Response> {
        let text = serde_json::to_string(msg)?;
        log::trace!("adapter <- {text}");
        let io_err = |e: std::io::Error| Error::Protocol(format!("stream failure: {e}"));
        writeln!(self.writer, "{text}").map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        self.line.clear();
        let n = self.reader.read_line(&mut self.line).map_err(io_err)?;
        if n == 0 {
            return Err(Error::Protocol("server closed the stream".into()));
        }
        log::trace!("adapter -> {}", self.line.trim_end());
        let resp: Response = serde_json::from_str(self.line.trim_end())
            .map_err(|e| Error::Protocol(format!("malformed response line: {e}")))?;
        if !resp.ok {
            return Err(Error::Segmenter {
                frame: frame.unwrap_or(0),
                message: resp.error.unwrap_or_else(|| "request failed".into()),
            });
        }
        Ok(resp)
    }

    fn request(&mut self, op: &str, frame: Option<usize>, payload: Value) -> Result<Response> {
        let req = Request {
            op: op.into(),
            frame_index: frame,
            payload,
        };
        self.exchange(&req, frame)
    }

    fn observation(&self, o: WireObservation) -> Result<MaskObservation> {
        if !(0.0..=1.0).contains(&o.score) {
            return Err(Error::Protocol(format!("score {} outside [0, 1]", o.score)));
        }
        let mask = Rle::from_compressed(&o.rle, self.width, self.height)?.decode()?;
        Ok(MaskObservation {
            track_id: o.track_id,
            mask,
            score: o.score,
            embedding: Vec::new(),
        })
    }

    /// Asks the server to exit. The client is unusable afterwards.
    pub fn shutdown(&mut self) -> Result<()> {
        self.request("shutdown", None, Value::Null).map(|_| ())
    }
}

impl<R: BufRead, W: Write> Segmenter for AdapterClient<R, W> {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        let payload = json!({"track_id": track_id, "bbox": [bbox.x1, bbox.y1, bbox.x2, bbox.y2]});
        let mut resp = self.request("add_prompt", Some(frame), payload)?;
        if resp.observations.len() != 1 {
            return Err(Error::Protocol(format!(
                "add_prompt returned {} observations",
                resp.observations.len()
            )));
        }
        let obs = self.observation(resp.observations.remove(0))?;
        if obs.track_id != track_id {
            return Err(Error::IdentityMismatch {
                expected: track_id,
                got: obs.track_id,
            });
        }
        Ok(obs)
    }

    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        let resp = self.request("propagate", Some(frame), Value::Null)?;
        resp.observations.into_iter().map(|o| self.observation(o)).collect()
    }

    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.request("drop_track", None, json!({ "track_id": track_id })).map(|_| ())
    }

    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.request("set_window", None, json!({ "t_w": t_w })).map(|_| ())
    }
}

impl<R: BufRead, W: Write> Detector for AdapterClient<R, W> {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        let resp = self.request("detect", Some(frame), Value::Null)?;
        resp.detections
            .into_iter()
            .map(|d| {
                let [x1, y1, x2, y2] = d.bbox;
                Ok(Detection {
                    bbox: BBox::new(x1, y1, x2, y2).map_err(|e| Error::Protocol(e.to_string()))?,
                    score: d.score,
                    class_id: d.class_id,
                })
            })
            .collect()
    }
}

/// A client that serves as both detector and segmenter for one run.
pub struct SharedAdapter<C>(Rc<RefCell<C>>);

impl<C> Clone for SharedAdapter<C> {
    fn clone(&self) -> Self {
        Self(Rc::clone(&self.0))
    }
}

impl<C> SharedAdapter<C> {
    pub fn new(client: C) -> Self {
        Self(Rc::new(RefCell::new(client)))
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut C) -> T) -> T {
        f(&mut self.0.borrow_mut())
    }

    /// The client back, once no other handle is left.
    pub fn try_unwrap(self) -> std::result::Result<C, Self> {
        Rc::try_unwrap(self.0).map(RefCell::into_inner).map_err(Self)
    }
}

impl<C: Segmenter> Segmenter for SharedAdapter<C> {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        self.0.borrow_mut().add_prompt(frame, bbox, track_id)
    }
    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        self.0.borrow_mut().propagate(frame)
    }
    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.0.borrow_mut().drop_track(track_id)
    }
    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.0.borrow_mut().set_memory_window(t_w)
    }
}

impl<C: Detector> Detector for SharedAdapter<C> {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        self.0.borrow_mut().detect(frame)
    }
}

pub type ProcessClient = AdapterClient<BufReader<ChildStdout>, ChildStdin>;

/// An adapter running as a child process.
pub struct AdapterProcess {
    child: Child,
    client: Option<ProcessClient>,
}

impl AdapterProcess {
    /// Starts `command` with piped stdin and stdout and performs the
    /// handshake. Stderr is inherited.
    pub fn spawn(mut command: Command, width: usize, height: usize, n_frames: usize) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start adapter {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        match AdapterClient::connect(stdout, stdin, width, height, n_frames) {
            Ok(client) => Ok(Self {
                child,
                client: Some(client),
            }),
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn client(&mut self) -> &mut ProcessClient {
        self.client.as_mut().expect("adapter still running")
    }

    /// Sends `shutdown` and waits for the process to exit.
    pub fn finish(mut self) -> Result<ExitStatus> {
        self.client().shutdown()?;
        // closing stdin lets a server blocked on its next read exit
        self.client = None;
        self.child
            .wait()
            .map_err(|e| Error::Protocol(format!("adapter did not exit: {e}")))
    }
}

impl Segmenter for AdapterProcess {
    fn add_prompt(&mut self, frame: usize, bbox: &BBox, track_id: TrackId) -> Result<MaskObservation> {
        self.client().add_prompt(frame, bbox, track_id)
    }
    fn propagate(&mut self, frame: usize) -> Result<Vec<MaskObservation>> {
        self.client().propagate(frame)
    }
    fn drop_track(&mut self, track_id: TrackId) -> Result<()> {
        self.client().drop_track(track_id)
    }
    fn set_memory_window(&mut self, t_w: usize) -> Result<()> {
        self.client().set_memory_window(t_w)
    }
}

impl Detector for AdapterProcess {
    fn detect(&mut self, frame: usize) -> Result<Vec<Detection>> {
        self.client().detect(frame)
    }
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
