//! Session wire protocol: JSON commands and events tagged by `type`, and
//! the binary frame packet.
//!
//! Frame packet, little-endian: `"HFRM"`, u32 frame id, u32 strand count,
//! then per strand a u32 vertex count and `count × 3` f32 coordinates.

use glam::DVec3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::groom::TrimRegion;
use crate::imaging::Camera;
use crate::model::RenderAttributes;
use crate::sim::SimState;

pub const FRAME_MAGIC: [u8; 4] = *b"HFRM";
pub const FRAME_HEADER_LEN: usize = 12;

/// Every command type the server accepts.
pub const COMMAND_TYPES: [&str; 13] = [
    "chat",
    "select_style",
    "sim_control",
    "wind",
    "head_transform",
    "grab_begin",
    "grab_move",
    "grab_end",
    "trim",
    "grow",
    "set_params",
    "render",
    "set_stride",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimAction {
    Start,
    Stop,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Chat {
        text: String,
    },
    /// `style_id` rather than `id`: the envelope owns `id`.
    SelectStyle {
        style_id: String,
    },
    SimControl {
        action: SimAction,
    },
    Wind {
        enabled: bool,
        #[serde(default)]
        strength: Option<f64>,
        #[serde(default)]
        direction: Option<DVec3>,
        #[serde(default)]
        gust_amplitude: Option<f64>,
        #[serde(default)]
        gust_frequency: Option<f64>,
    },
    HeadTransform {
        /// Row-major 3×3; takes precedence over `yaw_degrees`.
        #[serde(default)]
        rotation: Option<[[f64; 3]; 3]>,
        #[serde(default)]
        yaw_degrees: f64,
        #[serde(default)]
        translation: DVec3,
    },
    GrabBegin {
        origin: DVec3,
        dir: DVec3,
        #[serde(default = "default_grab_radius")]
        radius: f64,
    },
    GrabMove {
        target: DVec3,
    },
    GrabEnd {},
    Trim {
        region: TrimRegion,
    },
    Grow {
        triangle_ids: Vec<u32>,
        #[serde(default = "default_density")]
        density: f64,
        /// Strand count; derived from area and density when absent.
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        seed: u64,
        /// Partial growth parameters merged over the session's current ones.
        #[serde(default)]
        params: Option<Value>,
    },
    SetParams {
        /// Partial simulation configuration merged over the current one.
        #[serde(default)]
        sim: Option<Value>,
        #[serde(default)]
        growth: Option<Value>,
    },
    Render {
        #[serde(default)]
        attributes: RenderAttributes,
        #[serde(default)]
        camera: Option<Camera>,
        #[serde(default)]
        seed: u64,
    },
    SetStride {
        stride: u32,
    },
}

fn default_grab_radius() -> f64 {
    1.0
}

fn default_density() -> f64 {
    4.0
}

impl Command {
    pub fn type_name(&self) -> &'static str {
        match self {
            Command::Chat { .. } => "chat",
            Command::SelectStyle { .. } => "select_style",
            Command::SimControl { .. } => "sim_control",
            Command::Wind { .. } => "wind",
            Command::HeadTransform { .. } => "head_transform",
            Command::GrabBegin { .. } => "grab_begin",
            Command::GrabMove { .. } => "grab_move",
            Command::GrabEnd {} => "grab_end",
            Command::Trim { .. } => "trim",
            Command::Grow { .. } => "grow",
            Command::SetParams { .. } => "set_params",
            Command::Render { .. } => "render",
            Command::SetStride { .. } => "set_stride",
        }
    }
}

/// A command with the optional client request id echoed in replies.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub id: Option<u64>,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadJson,
    UnknownType,
    InvalidPayload,
    EmptyText,
    NoStyle,
    NotFound,
    InvalidParams,
    EmptyGrab,
    StaleHandle,
    NoGrab,
    SimBlowup,
    RetrievalFailed,
    ServiceUnavailable,
    Timeout,
    MalformedResponse,
    RenderFailed,
    GrowFailed,
    Busy,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{code:?}: {message}")]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
    pub id: Option<u64>,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), id: None }
    }

    pub fn with_id(mut self, id: Option<u64>) -> Self {
        self.id = id;
        self
    }

    pub fn to_event(&self) -> Event {
        Event::Error { code: self.code, message: self.message.clone(), id: self.id }
    }
}

/// Parses one text frame. Never panics; every failure is a structured error.
pub fn parse_command(text: &str) -> Result<Envelope, ProtocolError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ProtocolError::new(ErrorCode::BadJson, e.to_string()))?;
    let Value::Object(mut map) = value else {
        return Err(ProtocolError::new(ErrorCode::BadJson, "command must be a JSON object"));
    };
    let id = match map.remove("id") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) if n.as_u64().is_some() => n.as_u64(),
        Some(_) => return Err(ProtocolError::new(ErrorCode::InvalidPayload, "id must be a non-negative integer")),
    };
    let ty = match map.get("type") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(ProtocolError::new(ErrorCode::InvalidPayload, "missing string field `type`").with_id(id)),
    };
    if !COMMAND_TYPES.contains(&ty.as_str()) {
        return Err(ProtocolError::new(ErrorCode::UnknownType, format!("unknown command type `{ty}`")).with_id(id));
    }
    let command: Command = serde_json::from_value(Value::Object(map))
        .map_err(|e| ProtocolError::new(ErrorCode::InvalidPayload, format!("{ty}: {e}")).with_id(id))?;
    Ok(Envelope { id, command })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
    pub caption: String,
    pub thumbnail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Candidates {
        query: String,
        entries: Vec<Candidate>,
    },
    Ack {
        command: String,
        #[serde(default)]
        id: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<Value>,
    },
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default)]
        id: Option<u64>,
    },
    RenderProgress {
        job: u64,
        stage: String,
        queue_length: usize,
    },
    RenderDone {
        job: u64,
        prompt: String,
        latency_ms: u64,
        /// Base64 PNG.
        image: String,
    },
    SimStatus {
        running: bool,
        time: f64,
        frame_id: u32,
        strands: usize,
        particles: usize,
        dropped_frames: u64,
    },
}

impl Event {
    pub fn ack(command: &Command, id: Option<u64>) -> Self {
        Event::Ack { command: command.type_name().to_string(), id, detail: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePacket {
    pub frame_id: u32,
    pub strands: Vec<Vec<[f32; 3]>>,
}

impl FramePacket {
    pub fn vertex_count(&self) -> usize {
        self.strands.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("frame truncated")]
    Truncated,
    #[error("trailing bytes after the last strand")]
    TrailingBytes,
}

pub fn encode_frame(packet: &FramePacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + 4 * packet.strands.len() + 12 * packet.vertex_count());
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&packet.frame_id.to_le_bytes());
    out.extend_from_slice(&(packet.strands.len() as u32).to_le_bytes());
    for s in &packet.strands {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for v in s {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}

/// Encodes every `stride`-th strand of a live state straight to bytes,
/// yielding `ceil(strands / stride)` strands.
pub fn encode_state_frame(frame_id: u32, state: &SimState, stride: u32) -> Vec<u8> {
    let stride = stride.max(1) as usize;
    let spans: Vec<_> = state.spans().iter().step_by(stride).collect();
    let verts: usize = spans.iter().map(|s| s.particles.len()).sum();
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + 4 * spans.len() + 12 * verts);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&frame_id.to_le_bytes());
    out.extend_from_slice(&(spans.len() as u32).to_le_bytes());
    for span in spans {
        out.extend_from_slice(&(span.particles.len() as u32).to_le_bytes());
        for p in &state.particles[span.particles.clone()] {
            for c in p.position.to_array() {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<FramePacket, FrameError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], FrameError> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(FrameError::Truncated)?;
        let out = &bytes[pos..end];
        pos = end;
        Ok(out)
    };
    let magic = take(4).map_err(|_| FrameError::Truncated)?;
    if magic != FRAME_MAGIC {
        return Err(FrameError::BadMagic);
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let frame_id = u32_at(take(4)?);
    let count = u32_at(take(4)?) as usize;
    let mut strands = Vec::with_capacity(count.min(bytes.len() / 4));
    for _ in 0..count {
        let n = u32_at(take(4)?) as usize;
        let raw = take(n.checked_mul(12).ok_or(FrameError::Truncated)?)?;
        strands.push(
            raw.chunks_exact(12)
                .map(|c| {
                    let f = |i: usize| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap());
                    [f(0), f(1), f(2)]
                })
                .collect(),
        );
    }
    if pos != bytes.len() {
        return Err(FrameError::TrailingBytes);
    }
    Ok(FramePacket { frame_id, strands })
}
