//! Length-prefixed JSON protocol that lets an out-of-process policy drive
//! episodes.
//!
//! Every frame is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON. Requests carry `seq` and `kind`; each gets exactly one reply
//! echoing `seq`. Session flow:
//! `hello → (reset → (observation? → intention → outcome)*)* → close`.
//!
//! Observation arrays are flat row-major lists already divided by the
//! object's characteristic size: `keypoints` and `goal_flow` hold `3·N`
//! numbers, `clearance` and `mask` hold `N`.

mod protocol;
mod server;

pub use protocol::{
    read_frame, write_frame, Reply, ReplyEnvelope, Request, RequestEnvelope, WireObservation, MAX_FRAME_BYTES,
    PROTOCOL_VERSION,
};
pub use server::{serve_listener, serve_stream, serve_tcp, BridgeClient, ServerConfig, Session};
