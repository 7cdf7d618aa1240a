//! One editing session: a 60 Hz simulation loop on its own thread.
//!
//! Commands queue on a channel and are applied between frames, never in the
//! middle of a substep. Outbound traffic shares one bounded channel; frames
//! are offered with `try_send` and dropped when the socket lags, events wait
//! for room so none is ever lost.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use hairforge_core::groom::{self, GrabHandle, GroomError};
use hairforge_core::imaging::{compose_prompt, Camera, DEFAULT_SIZE};
use hairforge_core::model::{Hairstyle, PaintSelection, StyleSource, Strand};
use hairforge_core::protocol::{encode_state_frame, Command, Envelope, ErrorCode, Event, ProtocolError, SimAction};
use hairforge_core::sim::{build_sim, RigidTransform, SimConfig, SimError, SimState, WindField};
use hairforge_core::{grow_region, DMat3, GrowthParams};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::mpsc as tokio_mpsc;

use crate::generation::{GenerationQueue, RenderJob};
use crate::state::AppState;

pub const FRAME_INTERVAL: Duration = Duration::from_micros(16_667);
/// A status event goes out every this many simulated frames.
const STATUS_EVERY: u64 = 60;
/// Upper bound on strands grown by one command.
pub const MAX_GROW: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Text(String),
    Frame(Vec<u8>),
}

pub type OutboundSender = tokio_mpsc::Sender<Outbound>;

/// Owner side of a session thread. Dropping it stops the loop at the next
/// frame boundary; the thread is not joined so async callers never block.
pub struct SessionHandle {
    tx: mpsc::Sender<Envelope>,
    _thread: JoinHandle<()>,
}

impl SessionHandle {
    pub fn spawn(app: Arc<AppState>, out: OutboundSender) -> Self {
        let (tx, rx) = mpsc::channel();
        let thread = std::thread::Builder::new()
            .name("session".into())
            .spawn(move || Session::new(app, out).run(rx))
            .expect("spawn session thread");
        Self { tx, _thread: thread }
    }

    /// False once the loop has exited.
    pub fn send(&self, env: Envelope) -> bool {
        self.tx.send(env).is_ok()
    }
}

fn err(code: ErrorCode, message: impl Into<String>) -> ProtocolError {
    ProtocolError::new(code, message)
}

fn groom_err(e: GroomError) -> ProtocolError {
    let code = match e {
        GroomError::EmptyGrab => ErrorCode::EmptyGrab,
        GroomError::StaleHandle => ErrorCode::StaleHandle,
        GroomError::InactiveHandle => ErrorCode::NoGrab,
        GroomError::InvalidRay | GroomError::InvalidGrab(_) | GroomError::InvalidRegion(_) => ErrorCode::InvalidParams,
    };
    err(code, e.to_string())
}

fn sim_err(e: SimError) -> ProtocolError {
    let code = match e {
        SimError::NumericalBlowup { .. } => ErrorCode::SimBlowup,
        SimError::InvalidHairstyle(_) => ErrorCode::InvalidPayload,
        _ => ErrorCode::InvalidParams,
    };
    err(code, e.to_string())
}

/// Recursively overlays `patch` on `base`. Keys absent from `base` are
/// rejected so a typo cannot pass silently.
pub fn merge_json(base: &mut Value, patch: &Value, path: &str) -> Result<(), String> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(k).ok_or_else(|| format!("unknown parameter `{here}`"))?;
                merge_json(slot, v, &here)?;
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

fn patched<T: Serialize + DeserializeOwned>(base: &T, patch: &Value) -> Result<T, ProtocolError> {
    let mut v = serde_json::to_value(base).expect("parameters serialize");
    merge_json(&mut v, patch, "").map_err(|m| err(ErrorCode::InvalidParams, m))?;
    serde_json::from_value(v).map_err(|e| err(ErrorCode::InvalidParams, e.to_string()))
}

struct Session {
    app: Arc<AppState>,
    out: OutboundSender,
    cfg: SimConfig,
    growth: GrowthParams,
    wind: WindField,
    head_transform: RigidTransform,
    selected: Option<Arc<Hairstyle>>,
    state: Option<SimState>,
    running: bool,
    grab: Option<GrabHandle>,
    stride: u32,
    frame_id: u32,
    frames_simulated: u64,
    dropped_frames: u64,
    /// Geometry changed since the last frame went out.
    dirty: bool,
    renders: GenerationQueue,
}

impl Session {
    fn new(app: Arc<AppState>, out: OutboundSender) -> Self {
        let sink_out = out.clone();
        let renders = GenerationQueue::spawn(
            app.backend.clone(),
            Box::new(move |ev: Event| {
                let _ = sink_out.blocking_send(Outbound::Text(ev.to_json()));
            }),
        );
        Self {
            app,
            out,
            cfg: SimConfig::default(),
            growth: GrowthParams::default(),
            wind: WindField::default(),
            head_transform: RigidTransform::IDENTITY,
            selected: None,
            state: None,
            running: false,
            grab: None,
            stride: 1,
            frame_id: 0,
            frames_simulated: 0,
            dropped_frames: 0,
            dirty: false,
            renders,
        }
    }

    fn run(mut self, rx: mpsc::Receiver<Envelope>) {
        let mut next = Instant::now() + FRAME_INTERVAL;
        loop {
            loop {
                match rx.recv_timeout(next.saturating_duration_since(Instant::now())) {
                    Ok(env) => self.dispatch(env),
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => return,
                }
            }
            if self.out.is_closed() {
                return;
            }
            self.tick();
            next += FRAME_INTERVAL;
            // An overrun frame is not made up for; the loop just runs late.
            let now = Instant::now();
            if next < now {
                next = now;
            }
        }
    }

    fn emit(&self, ev: Event) {
        let _ = self.out.blocking_send(Outbound::Text(ev.to_json()));
    }

    fn status(&self) -> Event {
        Event::SimStatus {
            running: self.running,
            time: self.state.as_ref().map_or(0.0, |s| s.time),
            frame_id: self.frame_id,
            strands: self.state.as_ref().map_or(0, |s| s.strand_count()),
            particles: self.state.as_ref().map_or(0, |s| s.particles.len()),
            dropped_frames: self.dropped_frames,
        }
    }

    fn tick(&mut self) {
        let Some(state) = self.state.as_mut() else { return };
        if self.running {
            match state.advance_frame(&self.cfg) {
                Ok(()) => {
                    if groom::collect_fragments(state) > 0 {
                        self.grab_refresh();
                    }
                    self.frames_simulated += 1;
                    if self.frames_simulated % STATUS_EVERY == 0 {
                        self.emit(self.status());
                    }
                }
                Err(e) => {
                    self.running = false;
                    self.emit(sim_err(e).to_event());
                    self.emit(self.status());
                }
            }
            self.dirty = true;
        }
        if self.dirty {
            self.send_frame();
        }
    }

    fn send_frame(&mut self) {
        let Some(state) = self.state.as_ref() else { return };
        let bytes = encode_state_frame(self.frame_id, state, self.stride);
        self.frame_id = self.frame_id.wrapping_add(1);
        self.dirty = false;
        if let Err(tokio_mpsc::error::TrySendError::Full(_)) = self.out.try_send(Outbound::Frame(bytes)) {
            self.dropped_frames += 1;
        }
    }

    /// Prunes the grab after particles were removed; a grab left with no
    /// particles is released.
    fn grab_refresh(&mut self) {
        if let (Some(state), Some(handle)) = (self.state.as_mut(), self.grab.as_mut()) {
            let target = handle.target;
            if groom::update_grab(state, handle, target).is_err() {
                self.grab = None;
            }
        }
    }

    fn dispatch(&mut self, env: Envelope) {
        let id = env.id;
        match self.handle(&env.command) {
            Ok(detail) => {
                self.emit(Event::Ack { command: env.command.type_name().to_string(), id, detail });
            }
            Err(e) => self.emit(e.with_id(id).to_event()),
        }
    }

    fn state_mut(&mut self) -> Result<&mut SimState, ProtocolError> {
        self.state.as_mut().ok_or_else(|| err(ErrorCode::NoStyle, "no hairstyle is loaded"))
    }

    /// Builds a fresh simulation from head-frame strands under the current
    /// head pose and wind.
    fn rebuild(&mut self, style: &Hairstyle) -> Result<(), ProtocolError> {
        let mut state = build_sim(style, self.app.head.clone(), &self.cfg).map_err(sim_err)?;
        state.set_head_transform(self.head_transform).map_err(sim_err)?;
        state.set_wind(self.wind).map_err(sim_err)?;
        self.state = Some(state);
        self.grab = None;
        self.dirty = true;
        Ok(())
    }

    fn handle(&mut self, cmd: &Command) -> Result<Option<Value>, ProtocolError> {
        match cmd {
            Command::Chat { .. } => Err(err(ErrorCode::InvalidPayload, "chat is not a simulation command")),
            Command::SelectStyle { style_id } => {
                let style = self
                    .app
                    .style(style_id)
                    .ok_or_else(|| err(ErrorCode::NotFound, format!("no hairstyle `{style_id}`")))?;
                self.rebuild(&style)?;
                self.selected = Some(style);
                self.running = true;
                let state = self.state.as_ref().expect("just built");
                Ok(Some(json!({"strands": state.strand_count(), "particles": state.particles.len()})))
            }
            Command::SimControl { action } => {
                match action {
                    SimAction::Start => {
                        self.state_mut()?;
                        self.running = true;
                    }
                    SimAction::Stop => self.running = false,
                    SimAction::Reset => {
                        let style = self.selected.clone().ok_or_else(|| err(ErrorCode::NoStyle, "nothing to reset to"))?;
                        self.rebuild(&style)?;
                        self.running = false;
                    }
                }
                self.emit(self.status());
                Ok(None)
            }
            Command::Wind { enabled, strength, direction, gust_amplitude, gust_frequency } => {
                let mut wind = if self.wind.strength > 0.0 { self.wind } else { WindField::breeze() };
                wind.enabled = *enabled;
                wind.strength = strength.unwrap_or(wind.strength);
                wind.direction = direction.unwrap_or(wind.direction);
                wind.gust_amplitude = gust_amplitude.unwrap_or(wind.gust_amplitude);
                wind.gust_frequency = gust_frequency.unwrap_or(wind.gust_frequency);
                wind.validate().map_err(sim_err)?;
                if let Some(state) = self.state.as_mut() {
                    state.set_wind(wind).map_err(sim_err)?;
                }
                self.wind = wind;
                Ok(None)
            }
            Command::HeadTransform { rotation, yaw_degrees, translation } => {
                let rot = match rotation {
                    Some(rows) => DMat3::from_cols_array_2d(rows).transpose(),
                    None => RigidTransform::from_yaw(yaw_degrees.to_radians()).rotation,
                };
                let t = RigidTransform::new(rot, *translation).map_err(sim_err)?;
                if let Some(state) = self.state.as_mut() {
                    state.set_head_transform(t).map_err(sim_err)?;
                    self.dirty = true;
                }
                self.head_transform = t;
                Ok(None)
            }
            Command::GrabBegin { origin, dir, radius } => {
                let state = self.state.as_mut().ok_or_else(|| err(ErrorCode::NoStyle, "no hairstyle is loaded"))?;
                if let Some(mut old) = self.grab.take() {
                    groom::end_grab(state, &mut old);
                }
                let handle = groom::begin_grab(state, *origin, *dir, *radius).map_err(groom_err)?;
                let detail = json!({"particles": handle.particle_ids.len(), "target": handle.target});
                self.grab = Some(handle);
                Ok(Some(detail))
            }
            Command::GrabMove { target } => {
                let state = self.state.as_mut().ok_or_else(|| err(ErrorCode::NoGrab, "no grab is active"))?;
                let handle = self.grab.as_mut().ok_or_else(|| err(ErrorCode::NoGrab, "no grab is active"))?;
                match groom::update_grab(state, handle, *target) {
                    Ok(()) => Ok(None),
                    Err(e) => {
                        if !handle.active {
                            self.grab = None;
                        }
                        Err(groom_err(e))
                    }
                }
            }
            Command::GrabEnd {} => {
                let mut handle = self.grab.take().ok_or_else(|| err(ErrorCode::NoGrab, "no grab is active"))?;
                if let Some(state) = self.state.as_mut() {
                    groom::end_grab(state, &mut handle);
                }
                Ok(None)
            }
            Command::Trim { region } => {
                let state = self.state_mut()?;
                let removed = groom::trim(state, region).map_err(groom_err)?;
                let particles = state.particles.len();
                if removed > 0 {
                    self.grab_refresh();
                    self.dirty = true;
                }
                Ok(Some(json!({"removed": removed, "particles": particles})))
            }
            Command::Grow { triangle_ids, density, count, seed, params } => {
                let params = match params {
                    Some(p) => patched(&self.growth, p)?,
                    None => self.growth,
                };
                let head = self.app.head.clone();
                let sel = PaintSelection::new(&head, triangle_ids.iter().copied(), *density)
                    .map_err(|e| err(ErrorCode::InvalidParams, e.to_string()))?;
                let count = count.unwrap_or_else(|| sel.strand_budget(&head));
                if count > MAX_GROW {
                    return Err(err(ErrorCode::InvalidParams, format!("{count} strands exceeds the limit of {MAX_GROW}")));
                }
                let grown =
                    grow_region(&head, &sel, &params, count, *seed).map_err(|e| err(ErrorCode::GrowFailed, e.to_string()))?;
                if grown.is_empty() {
                    return Ok(Some(json!({"grown": 0})));
                }
                match self.state.as_mut() {
                    Some(state) => {
                        let t = self.head_transform;
                        let world: Vec<Strand> =
                            grown.iter().map(|s| Strand::new(s.vertices.iter().map(|&v| t.apply(v)).collect())).collect();
                        state.add_strands(&world, &self.cfg).map_err(sim_err)?;
                        self.dirty = true;
                    }
                    None => {
                        let style = Hairstyle { source: StyleSource::Groomed, ..Hairstyle::new("groomed", grown) };
                        self.rebuild(&style)?;
                    }
                }
                Ok(Some(json!({"grown": count})))
            }
            Command::SetParams { sim, growth } => {
                let cfg = match sim {
                    Some(p) => patched(&self.cfg, p)?,
                    None => self.cfg,
                };
                cfg.validate().map_err(sim_err)?;
                let growth = match growth {
                    Some(p) => patched(&self.growth, p)?,
                    None => self.growth,
                };
                growth.validate().map_err(|e| err(ErrorCode::InvalidParams, e.to_string()))?;
                if let Some(state) = self.state.as_mut() {
                    state.apply_config(&cfg).map_err(sim_err)?;
                }
                self.cfg = cfg;
                self.growth = growth;
                Ok(None)
            }
            Command::Render { attributes, camera, seed } => {
                compose_prompt(attributes).map_err(|e| err(ErrorCode::InvalidParams, e.to_string()))?;
                let camera = camera.unwrap_or_else(|| Camera::frontal(DEFAULT_SIZE, DEFAULT_SIZE));
                camera.validate().map_err(|e| err(ErrorCode::InvalidParams, e.to_string()))?;
                let state = self.state.as_ref().ok_or_else(|| err(ErrorCode::NoStyle, "no hairstyle is loaded"))?;
                // The generator sees the head at rest, so hair goes back to the head frame.
                let t = state.head_transform;
                let mut style = state.to_hairstyle("render");
                for s in &mut style.strands {
                    for v in &mut s.vertices {
                        *v = t.apply_inverse(*v);
                    }
                }
                let job = RenderJob {
                    style,
                    head: self.app.head.clone(),
                    camera,
                    attributes: attributes.clone(),
                    seed: *seed,
                    reply_id: None,
                };
                let (job, queue_length) = self.renders.enqueue(job);
                Ok(Some(json!({"job": job, "queue_length": queue_length})))
            }
            Command::SetStride { stride } => {
                if *stride == 0 {
                    return Err(err(ErrorCode::InvalidParams, "stride must be at least 1"));
                }
                self.stride = *stride;
                self.dirty = true;
                Ok(None)
            }
        }
    }
}
