use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::{Observation, StepInfo};

pub const PROTOCOL_VERSION: &str = "1";
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Request {
    Hello {
        version: String,
    },
    /// `preset` names a bundled preset or a preset file; omitted means the
    /// server's default task.
    Reset {
        #[serde(default)]
        preset: Option<String>,
        seed: u64,
    },
    Observation,
    Intention {
        keypoint_index: usize,
        w_pos_index: usize,
        w_ori_index: usize,
    },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestEnvelope {
    pub seq: u64,
    #[serde(flatten)]
    pub request: Request,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    pub num_keypoints: usize,
    pub decision: usize,
    pub keypoints: Vec<f64>,
    pub goal_flow: Vec<f64>,
    pub clearance: Vec<f64>,
    pub mask: Vec<bool>,
}

impl WireObservation {
    pub fn new(obs: &Observation, mask: Vec<bool>, decision: usize) -> Self {
        let flat = |v: &[nalgebra::Vector3<f64>]| v.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        Self {
            num_keypoints: obs.keypoints.len(),
            decision,
            keypoints: flat(&obs.keypoints),
            goal_flow: flat(&obs.goal_flow),
            clearance: obs.clearance.clone(),
            mask,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reply {
    Hello {
        version: String,
        session: u64,
    },
    Observation {
        observation: WireObservation,
    },
    Outcome {
        reward: f64,
        done: bool,
        success: bool,
        info: StepInfo,
        observation: WireObservation,
    },
    Error {
        reason: String,
    },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplyEnvelope {
    pub seq: u64,
    #[serde(flatten)]
    pub reply: Reply,
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame; `None` on a clean end of stream before a header.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut header[filled..])? {
            0 if filled == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => filled += n,
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds limit")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}
