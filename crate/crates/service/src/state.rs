//! Process-wide read-only state shared by every session.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use hairforge_core::assets::{load_database, load_index, render_thumbnail, thumbnail_path, AssetError};
use hairforge_core::fixtures::{fixture_database, head_mesh};
use hairforge_core::retrieval::{build_index, EmbeddingIndex, EmbeddingProvider, HashingEmbedder, RetrievalError};
use hairforge_core::{Hairstyle, HeadMesh};
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::embed::HttpEmbedder;
use crate::generation::{GenerationBackend, HttpBackend, MockBackend};

/// Timeout for embedding calls; queries are short and must stay interactive.
const EMBED_TIMEOUT: std::time::Duration = std::time::Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Assets(#[from] AssetError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("index was built with provider `{index}` but the server embeds with `{provider}`")]
    ProviderMismatch { index: String, provider: String },
    #[error("index lists `{0}`, which is not in the database")]
    UnknownIndexId(String),
}

pub struct AppState {
    pub styles: BTreeMap<String, Arc<Hairstyle>>,
    pub head: Arc<HeadMesh>,
    pub index: EmbeddingIndex,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub backend: Arc<dyn GenerationBackend>,
    pub assets_dir: Option<PathBuf>,
    thumbnails: Mutex<BTreeMap<String, Arc<Vec<u8>>>>,
}

impl AppState {
    /// Loads the database, connects the embedder and prepares the index.
    /// Blocking: run before the async runtime starts serving.
    pub fn load(config: &ServiceConfig) -> Result<Self, StartupError> {
        let styles = match &config.assets {
            Some(dir) => {
                let db = load_database(dir)?;
                for (path, why) in &db.skipped {
                    log::warn!("skipped {}: {why}", path.display());
                }
                db.styles
            }
            None => fixture_database(),
        };
        let embedder: Arc<dyn EmbeddingProvider> = if config.embed_url == "fallback" {
            Arc::new(HashingEmbedder::default())
        } else {
            Arc::new(HttpEmbedder::connect(&config.embed_url, EMBED_TIMEOUT)?)
        };
        let backend: Arc<dyn GenerationBackend> = if config.gen_url == "mock" {
            Arc::new(MockBackend::default())
        } else {
            Arc::new(HttpBackend::new(&config.gen_url, config.gen_timeout()))
        };
        let captions: Vec<(String, String)> = styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
        let index = match &config.index {
            Some(path) => load_index(path)?,
            None => build_index(&captions, embedder.as_ref())?,
        };
        Self::assemble(styles, index, embedder, backend, config.assets.clone())
    }

    /// Builds state from parts already in memory.
    pub fn assemble(
        styles: Vec<Hairstyle>,
        index: EmbeddingIndex,
        embedder: Arc<dyn EmbeddingProvider>,
        backend: Arc<dyn GenerationBackend>,
        assets_dir: Option<PathBuf>,
    ) -> Result<Self, StartupError> {
        if index.provider_id() != embedder.provider_id() {
            return Err(StartupError::ProviderMismatch {
                index: index.provider_id().to_string(),
                provider: embedder.provider_id().to_string(),
            });
        }
        let styles: BTreeMap<String, Arc<Hairstyle>> =
            styles.into_iter().map(|h| (h.id.clone(), Arc::new(h))).collect();
        if let Some(id) = index.ids().iter().find(|id| !styles.contains_key(*id)) {
            return Err(StartupError::UnknownIndexId(id.clone()));
        }
        Ok(Self {
            styles,
            head: Arc::new(head_mesh()),
            index,
            embedder,
            backend,
            assets_dir,
            thumbnails: Mutex::new(BTreeMap::new()),
        })
    }

    /// In-memory fixture database with the offline embedder and mock generator.
    pub fn fixtures() -> Self {
        let styles = fixture_database();
        let embedder: Arc<dyn EmbeddingProvider> = Arc::new(HashingEmbedder::default());
        let captions: Vec<(String, String)> = styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
        let index = build_index(&captions, embedder.as_ref()).expect("fixture captions embed");
        Self::assemble(styles, index, embedder, Arc::new(MockBackend::default()), None).expect("fixtures are consistent")
    }

    pub fn style(&self, id: &str) -> Option<Arc<Hairstyle>> {
        self.styles.get(id).cloned()
    }

    /// PNG preview: the file next to the database if present, else rendered
    /// once and cached.
    pub fn thumbnail(&self, id: &str) -> Option<Result<Arc<Vec<u8>>, AssetError>> {
        let style = self.styles.get(id)?;
        if let Some(png) = self.thumbnails.lock().expect("thumbnail cache").get(id) {
            return Some(Ok(png.clone()));
        }
        let on_disk = self.assets_dir.as_ref().map(|d| thumbnail_path(d, id)).and_then(|p| std::fs::read(p).ok());
        let png = match on_disk {
            Some(bytes) => bytes,
            None => match render_thumbnail(style, Some(&self.head)) {
                Ok(bytes) => bytes,
                Err(e) => return Some(Err(e)),
            },
        };
        let png = Arc::new(png);
        self.thumbnails.lock().expect("thumbnail cache").insert(id.to_string(), png.clone());
        Some(Ok(png))
    }
}
