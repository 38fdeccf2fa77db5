use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::protocol::{read_frame, write_frame, Reply, ReplyEnvelope, Request, RequestEnvelope, WireObservation, PROTOCOL_VERSION};
use crate::env::{AssetLibrary, Environment, Episode, TaskConfig};
use crate::policy::{feasibility_mask, ContactIntention};
use crate::{Error, Result};

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

/// What every connection is served with.
#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Task used when a reset names no preset.
    pub default_task: TaskConfig,
    /// Overrides applied to presets named in resets.
    pub overrides: Vec<String>,
    pub assets: AssetLibrary,
}

impl ServerConfig {
    pub fn new(default_task: TaskConfig) -> Self {
        Self {
            default_task,
            overrides: Vec::new(),
            assets: AssetLibrary::from_env(),
        }
    }
}

/// Protocol state of one connection, independent of transport.
pub struct Session {
    id: u64,
    config: Arc<ServerConfig>,
    greeted: bool,
    envs: HashMap<Option<String>, Environment>,
    episode: Option<Episode>,
}

impl Session {
    pub fn new(config: Arc<ServerConfig>) -> Self {
        Self {
            id: NEXT_SESSION.fetch_add(1, Ordering::Relaxed),
            config,
            greeted: false,
            envs: HashMap::new(),
            episode: None,
        }
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    /// Handles one request frame. Returns the reply frame and whether the
    /// connection should close after sending it.
    pub fn handle_frame(&mut self, frame: &[u8]) -> (Vec<u8>, bool) {
        let (seq, reply, close) = match serde_json::from_slice::<RequestEnvelope>(frame) {
            Ok(env) => {
                let (reply, close) = self.handle(env.request);
                (env.seq, reply, close)
            }
            Err(e) => {
                let seq = serde_json::from_slice::<serde_json::Value>(frame)
                    .ok()
                    .and_then(|v| v.get("seq").and_then(|s| s.as_u64()))
                    .unwrap_or(0);
                (seq, Reply::Error { reason: format!("malformed message: {e}") }, false)
            }
        };
        let bytes = serde_json::to_vec(&ReplyEnvelope { seq, reply }).expect("reply serialization");
        (bytes, close)
    }

    pub fn handle(&mut self, request: Request) -> (Reply, bool) {
        match request {
            Request::Hello { version } => {
                if version != PROTOCOL_VERSION {
                    let reason = format!("protocol version mismatch: server speaks {PROTOCOL_VERSION}, client sent {version}");
                    return (Reply::Error { reason }, true);
                }
                self.greeted = true;
                (
                    Reply::Hello {
                        version: PROTOCOL_VERSION.into(),
                        session: self.id,
                    },
                    false,
                )
            }
            Request::Close => (Reply::Close, true),
            _ if !self.greeted => (error("expected hello first"), false),
            Request::Reset { preset, seed } => match self.reset(preset, seed) {
                Ok(obs) => (Reply::Observation { observation: obs }, false),
                Err(e) => (error(e), false),
            },
            Request::Observation => match &self.episode {
                Some(ep) => (Reply::Observation { observation: wire(ep) }, false),
                None => (error("no episode; send reset"), false),
            },
            Request::Intention {
                keypoint_index,
                w_pos_index,
                w_ori_index,
            } => {
                let intention = ContactIntention {
                    keypoint_index,
                    w_pos_index,
                    w_ori_index,
                };
                match self.step(&intention) {
                    Ok(reply) => (reply, false),
                    Err(e) => (error(e), false),
                }
            }
        }
    }

    fn reset(&mut self, preset: Option<String>, seed: u64) -> Result<WireObservation> {
        if !self.envs.contains_key(&preset) {
            let task = match &preset {
                None => self.config.default_task.clone(),
                Some(name) => TaskConfig::load(name, &self.config.overrides)?,
            };
            let env = Environment::new(task, &self.config.assets)?;
            self.envs.insert(preset.clone(), env);
        }
        let episode = self.envs[&preset].reset(seed)?;
        let obs = wire(&episode);
        self.episode = Some(episode);
        Ok(obs)
    }

    fn step(&mut self, intention: &ContactIntention) -> Result<Reply> {
        let episode = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::InvalidState("no episode; send reset".into()))?;
        intention.validate()?;
        if episode.is_done() {
            return Err(Error::InvalidState("episode is finished; send reset".into()));
        }
        let mask = feasibility_mask(&episode.observation(), episode.config().feasibility_threshold);
        if !mask[intention.keypoint_index] && mask.iter().any(|m| *m) {
            return Err(Error::InvalidArgument(format!(
                "keypoint {} is masked as infeasible",
                intention.keypoint_index
            )));
        }
        // Work on a copy so a failing step leaves the episode unchanged.
        let mut next = episode.clone();
        let outcome = next.apply_intention(intention)?;
        *episode = next;
        Ok(Reply::Outcome {
            reward: outcome.reward,
            done: outcome.done,
            success: outcome.success,
            info: outcome.info,
            observation: wire(episode),
        })
    }
}

fn error(reason: impl ToString) -> Reply {
    Reply::Error {
        reason: reason.to_string(),
    }
}

fn wire(episode: &Episode) -> WireObservation {
    let obs = episode.observation();
    let mask = feasibility_mask(&obs, episode.config().feasibility_threshold);
    WireObservation::new(&obs, mask, episode.decision())
}

/// Serves one session over a byte stream until close or end of stream.
pub fn serve_stream(reader: &mut impl Read, writer: &mut impl Write, config: Arc<ServerConfig>) -> io::Result<()> {
    let mut session = Session::new(config);
    while let Some(frame) = read_frame(reader)? {
        let (reply, close) = session.handle_frame(&frame);
        write_frame(writer, &reply)?;
        if close {
            break;
        }
    }
    Ok(())
}

/// Accepts connections forever, one thread and one environment per connection.
pub fn serve_listener(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    let config = Arc::new(config);
    for stream in listener.incoming() {
        let stream = stream?;
        let config = config.clone();
        std::thread::spawn(move || {
            let _ = handle_connection(stream, config);
        });
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = stream.try_clone()?;
    let mut writer = stream;
    serve_stream(&mut reader, &mut writer, config)
}

pub fn serve_tcp(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<()> {
    serve_listener(TcpListener::bind(addr)?, config)
}

/// Minimal synchronous client, used by scripted drivers and tests.
pub struct BridgeClient<S: Read + Write> {
    stream: S,
    seq: u64,
}

impl<S: Read + Write> BridgeClient<S> {
    pub fn new(stream: S) -> Self {
        Self { stream, seq: 0 }
    }

    /// Sends a request and returns the raw reply bytes.
    pub fn request_raw(&mut self, request: &Request) -> io::Result<Vec<u8>> {
        let env = RequestEnvelope {
            seq: self.seq,
            request: request.clone(),
        };
        self.seq += 1;
        let bytes = serde_json::to_vec(&env).map_err(io::Error::other)?;
        write_frame(&mut self.stream, &bytes)?;
        read_frame(&mut self.stream)?.ok_or_else(|| io::ErrorKind::UnexpectedEof.into())
    }

    pub fn request(&mut self, request: &Request) -> io::Result<ReplyEnvelope> {
        let bytes = self.request_raw(request)?;
        serde_json::from_slice(&bytes).map_err(io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        let mut task = TaskConfig::pushing();
        task.mpc.steps_per_decision = 3;
        task.mpc.sampler.num_samples = 4;
        let mut config = ServerConfig::new(task);
        config.assets = AssetLibrary::bundled();
        Session::new(Arc::new(config))
    }

    #[test]
    fn hello_then_reset() {
        let mut s = session();
        let (r, close) = s.handle(Request::Observation);
        assert!(matches!(r, Reply::Error { .. }) && !close);
        let (r, _) = s.handle(Request::Hello { version: "1".into() });
        assert!(matches!(r, Reply::Hello { ref version, .. } if version == "1"));
        let (r, _) = s.handle(Request::Reset { preset: None, seed: 7 });
        let Reply::Observation { observation } = r else { panic!("{r:?}") };
        assert_eq!(observation.keypoints.len(), 768);
        assert_eq!(observation.mask.len(), 256);
    }

    #[test]
    fn version_mismatch_closes() {
        let mut s = session();
        let (r, close) = s.handle(Request::Hello { version: "2".into() });
        assert!(matches!(r, Reply::Error { .. }));
        assert!(close);
    }

    #[test]
    fn bad_index_leaves_episode_alone() {
        let mut s = session();
        s.handle(Request::Hello { version: "1".into() });
        s.handle(Request::Reset { preset: None, seed: 1 });
        let before = *s.episode().unwrap().state();
        let (r, close) = s.handle(Request::Intention {
            keypoint_index: 256,
            w_pos_index: 1,
            w_ori_index: 0,
        });
        assert!(matches!(&r, Reply::Error { reason } if reason.contains("index out of range")), "{r:?}");
        assert!(!close);
        assert_eq!(*s.episode().unwrap().state(), before);
        let feasible = s.episode().unwrap().object().keypoint_normals.iter().position(|n| n.z > 0.5).unwrap();
        let (r, _) = s.handle(Request::Intention {
            keypoint_index: feasible,
            w_pos_index: 1,
            w_ori_index: 0,
        });
        assert!(matches!(r, Reply::Outcome { .. }), "{r:?}");
    }

    #[test]
    fn malformed_frame_gets_error_with_seq() {
        let mut s = session();
        let (bytes, close) = s.handle_frame(br#"{"seq": 4, "kind": "dance"}"#);
        let reply: ReplyEnvelope = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(reply.seq, 4);
        assert!(matches!(reply.reply, Reply::Error { .. }));
        assert!(!close);
        let (bytes, _) = s.handle_frame(b"not json");
        let reply: ReplyEnvelope = serde_json::from_slice(&bytes).unwrap();
        assert!(matches!(reply.reply, Reply::Error { .. }));
    }
}
