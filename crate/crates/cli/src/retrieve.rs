use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use hairforge_core::assets::{load_database, load_index};
use hairforge_core::fixtures::fixture_database;
use hairforge_core::retrieval::{build_index, embed_text, retrieve_top_k, EmbeddingIndex, EmbeddingProvider, HashingEmbedder};
use hairforge_core::Hairstyle;
use hairforge_service::embed::HttpEmbedder;
use serde::Serialize;

use crate::CliError;

const EMBED_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Args)]
pub struct RetrieveArgs {
    /// Prebuilt index; built in memory from `--db` when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Database directory, used for captions and for building an index.
    /// The built-in fixture database is used when neither flag is given.
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// `fallback` for the offline hashing embedder, else a provider base URL.
    #[arg(long, default_value = "fallback")]
    pub provider: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hit {
    pub rank: usize,
    pub id: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrieveOutput {
    pub query: String,
    pub provider: String,
    pub results: Vec<Hit>,
}

pub fn provider(name: &str) -> Result<Arc<dyn EmbeddingProvider>, CliError> {
    if name == "fallback" {
        Ok(Arc::new(HashingEmbedder::default()))
    } else {
        Ok(Arc::new(HttpEmbedder::connect(name, EMBED_TIMEOUT)?))
    }
}

fn captions_of(styles: &[Hairstyle]) -> Vec<(String, String)> {
    styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect()
}

pub fn load_styles(db: Option<&Path>) -> Result<Vec<Hairstyle>, CliError> {
    match db {
        Some(dir) => Ok(load_database(dir)?.styles),
        None => Ok(fixture_database()),
    }
}

pub fn retrieve(a: &RetrieveArgs) -> Result<RetrieveOutput, CliError> {
    if a.query.trim().is_empty() {
        return Err(CliError::Usage("--query must not be empty".into()));
    }
    let provider = provider(&a.provider)?;
    let (index, captions): (EmbeddingIndex, BTreeMap<String, String>) = match (&a.index, &a.db) {
        (Some(path), db) => {
            let captions = match db {
                Some(dir) => captions_of(&load_styles(Some(dir))?).into_iter().collect(),
                None => BTreeMap::new(),
            };
            (load_index(path)?, captions)
        }
        (None, db) => {
            let styles = load_styles(db.as_deref())?;
            let captions = captions_of(&styles);
            (build_index(&captions, provider.as_ref())?, captions.into_iter().collect())
        }
    };
    let q = embed_text(&a.query, provider.as_ref())?;
    let top = retrieve_top_k(&index, &q, a.k)?;
    let results = top
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| Hit { rank: i + 1, caption: captions.get(&id).cloned(), id, score })
        .collect();
    Ok(RetrieveOutput { query: a.query.clone(), provider: provider.provider_id().to_string(), results })
}

pub fn run(a: &RetrieveArgs) -> Result<(), CliError> {
    let out = retrieve(a)?;
    if a.json {
        println!("{}", serde_json::to_string(&out).expect("results serialize"));
    } else {
        for h in &out.results {
            println!("{}\t{:.6}\t{}\t{}", h.rank, h.score, h.id, h.caption.as_deref().unwrap_or(""));
        }
    }
    Ok(())
}
