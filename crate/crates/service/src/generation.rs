//! Image generation brokering: backends and the per-session FIFO queue.
//!
//! The remote backend takes `POST {base}/generate` as multipart with fields
//! `edge` (image/png), `prompt`, `seed`, `width`, `height` and answers with
//! `image/png`, or a non-2xx status with `{"error": "..."}`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use base64::Engine;
use hairforge_core::imaging::{encode_png, prepare_generation, Camera, GenerationRequest, GrayImage, ImageResult};
use hairforge_core::model::{Hairstyle, HeadMesh, RenderAttributes};
use hairforge_core::protocol::{ErrorCode, Event};
use serde::Deserialize;
use thiserror::Error;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("generation service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("generation timed out")]
    Timeout,
    #[error("generation service returned a malformed response: {0}")]
    MalformedResponse(String),
    #[error("generation service rejected the request: {0}")]
    Rejected(String),
    #[error("invalid render request: {0}")]
    InvalidRequest(String),
}

impl GenerationError {
    pub fn code(&self) -> ErrorCode {
        match self {
            GenerationError::ServiceUnavailable(_) => ErrorCode::ServiceUnavailable,
            GenerationError::Timeout => ErrorCode::Timeout,
            GenerationError::MalformedResponse(_) => ErrorCode::MalformedResponse,
            GenerationError::Rejected(_) | GenerationError::InvalidRequest(_) => ErrorCode::RenderFailed,
        }
    }
}

/// Turns an edge-conditioned request into PNG bytes.
pub trait GenerationBackend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<u8>, GenerationError>;
}

/// Validates, sends and times one request.
pub fn request_generation(
    backend: &dyn GenerationBackend,
    req: &GenerationRequest,
) -> Result<ImageResult, GenerationError> {
    req.validate().map_err(|e| GenerationError::InvalidRequest(e.to_string()))?;
    let start = Instant::now();
    let png = backend.generate(req)?;
    if !png.starts_with(&PNG_SIGNATURE) {
        return Err(GenerationError::MalformedResponse("reply is not a PNG".into()));
    }
    Ok(ImageResult { png, latency_ms: start.elapsed().as_millis() as u64 })
}

/// The PNG every mock backend answers with: a 64×64 diagonal gradient.
pub fn fixture_png() -> Vec<u8> {
    let img = GrayImage::from_fn(64, 64, |x, y| ((x + y) * 2) as u8);
    encode_png(&img).expect("fixture encodes")
}

/// In-process stand-in for the diffusion service.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub png: Vec<u8>,
    pub delay: Duration,
    pub available: bool,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self { png: fixture_png(), delay: Duration::ZERO, available: true }
    }
}

impl MockBackend {
    pub fn with_delay(delay: Duration) -> Self {
        Self { delay, ..Self::default() }
    }

    pub fn unavailable() -> Self {
        Self { available: false, ..Self::default() }
    }
}

impl GenerationBackend for MockBackend {
    fn generate(&self, _req: &GenerationRequest) -> Result<Vec<u8>, GenerationError> {
        std::thread::sleep(self.delay);
        if !self.available {
            return Err(GenerationError::ServiceUnavailable("mock backend is down".into()));
        }
        Ok(self.png.clone())
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    timeout: Duration,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

impl HttpBackend {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        Self { endpoint: format!("{}/generate", base_url.trim_end_matches('/')), timeout }
    }
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<u8>, GenerationError> {
        use reqwest::blocking::multipart::{Form, Part};

        let edge = encode_png(&req.edge_map.to_image()).map_err(|e| GenerationError::InvalidRequest(e.to_string()))?;
        let part = Part::bytes(edge)
            .file_name("edge.png")
            .mime_str("image/png")
            .expect("static mime type parses");
        let form = Form::new()
            .part("edge", part)
            .text("prompt", req.prompt.clone())
            .text("seed", req.seed.to_string())
            .text("width", req.width.to_string())
            .text("height", req.height.to_string());
        // Built and dropped on the calling worker thread, never inside an async context.
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GenerationError::ServiceUnavailable(e.to_string()))?;
        let resp = client.post(&self.endpoint).multipart(form).send().map_err(classify)?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(classify)?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        let message = serde_json::from_slice::<ErrorBody>(&bytes)
            .map(|b| b.error)
            .unwrap_or_else(|_| format!("HTTP {status}"));
        if status.is_server_error() {
            Err(GenerationError::ServiceUnavailable(message))
        } else {
            Err(GenerationError::Rejected(message))
        }
    }
}

fn classify(e: reqwest::Error) -> GenerationError {
    if e.is_timeout() {
        GenerationError::Timeout
    } else {
        GenerationError::ServiceUnavailable(e.to_string())
    }
}

/// Everything a worker needs to render one snapshot.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub style: Hairstyle,
    pub head: Arc<HeadMesh>,
    pub camera: Camera,
    pub attributes: RenderAttributes,
    pub seed: u64,
    pub reply_id: Option<u64>,
}

type Sink = Box<dyn Fn(Event) + Send + 'static>;

/// Single worker, so at most one request is in flight and jobs finish in
/// submission order.
pub struct GenerationQueue {
    tx: Option<mpsc::Sender<(u64, RenderJob)>>,
    outstanding: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
    next_job: u64,
}

impl GenerationQueue {
    pub fn spawn(backend: Arc<dyn GenerationBackend>, sink: Sink) -> Self {
        let (tx, rx) = mpsc::channel::<(u64, RenderJob)>();
        let outstanding = Arc::new(AtomicUsize::new(0));
        let counter = outstanding.clone();
        let worker = std::thread::Builder::new()
            .name("generation".into())
            .spawn(move || {
                for (job, req) in rx {
                    let ahead = counter.load(Ordering::SeqCst).saturating_sub(1);
                    sink(Event::RenderProgress { job, stage: "started".into(), queue_length: ahead });
                    match run_job(backend.as_ref(), &req) {
                        Ok((prompt, result)) => sink(Event::RenderDone {
                            job,
                            prompt,
                            latency_ms: result.latency_ms,
                            image: base64::engine::general_purpose::STANDARD.encode(&result.png),
                        }),
                        Err(e) => sink(Event::Error {
                            code: e.code(),
                            message: format!("render job {job}: {e}"),
                            id: req.reply_id,
                        }),
                    }
                    counter.fetch_sub(1, Ordering::SeqCst);
                }
            })
            .expect("spawn generation worker");
        Self { tx: Some(tx), outstanding, worker: Some(worker), next_job: 1 }
    }

    /// Queues a job; returns its id and the number of jobs ahead of it.
    pub fn enqueue(&mut self, job: RenderJob) -> (u64, usize) {
        let id = self.next_job;
        self.next_job += 1;
        let ahead = self.outstanding.fetch_add(1, Ordering::SeqCst);
        if let Some(tx) = &self.tx {
            if tx.send((id, job)).is_err() {
                self.outstanding.fetch_sub(1, Ordering::SeqCst);
            }
        }
        (id, ahead)
    }

    /// Jobs submitted and not yet finished, including the one in flight.
    pub fn outstanding(&self) -> usize {
        self.outstanding.load(Ordering::SeqCst)
    }
}

impl Drop for GenerationQueue {
    fn drop(&mut self) {
        drop(self.tx.take());
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn run_job(backend: &dyn GenerationBackend, job: &RenderJob) -> Result<(String, ImageResult), GenerationError> {
    let req = prepare_generation(&job.style, Some(job.head.as_ref()), &job.camera, &job.attributes, job.seed)
        .map_err(|e| GenerationError::InvalidRequest(e.to_string()))?;
    let result = request_generation(backend, &req)?;
    Ok((req.prompt, result))
}
