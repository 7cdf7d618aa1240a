use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use hairforge_core::assets::{save_index, write_database, write_thumbnails};
use hairforge_core::fixtures::{fixture_database, head_mesh};
use hairforge_core::imaging::{canny, decode_png, encode_png, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_SIGMA};
use hairforge_core::retrieval::build_index;
use hairforge_service::{AppState, ServiceConfig};

use crate::error::io;
use crate::retrieve::{load_styles, provider};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct EdgesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_LOW)]
    pub low: u8,
    #[arg(long, default_value_t = DEFAULT_HIGH)]
    pub high: u8,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn edges(a: &EdgesArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&a.input).map_err(io(&a.input))?;
    let img = decode_png(&bytes)?;
    let map = canny(&img, a.sigma, a.low, a.high)?;
    let png = encode_png(&map.to_image())?;
    std::fs::write(&a.out, png).map_err(io(&a.out))?;
    println!("{} edge pixels of {}", map.edge_count(), map.data.len());
    Ok(())
}

#[derive(Debug, Clone, Subcommand)]
pub enum IndexCmd {
    /// Embed every caption of a database into an index file.
    Build(IndexBuildArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IndexBuildArgs {
    /// Database directory; the built-in fixtures when absent.
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long, default_value = "fallback")]
    pub provider: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn index_build(a: &IndexBuildArgs) -> Result<(), CliError> {
    let styles = load_styles(a.db.as_deref())?;
    let captions: Vec<(String, String)> = styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
    let p = provider(&a.provider)?;
    let index = build_index(&captions, p.as_ref())?;
    save_index(&index, &a.out)?;
    println!("indexed {} captions with {} into {}", index.len(), index.provider_id(), a.out.display());
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_thumbnails: bool,
}

pub fn fixtures(a: &FixturesArgs) -> Result<(), CliError> {
    let styles = fixture_database();
    write_database(&a.out, &styles)?;
    if !a.no_thumbnails {
        write_thumbnails(&a.out, &styles, Some(&head_mesh()))?;
    }
    println!("wrote {} styles to {}", styles.len(), a.out.display());
    Ok(())
}

/// Loads everything synchronously, binds, prints the bound address, then
/// serves until killed.
pub fn serve(cfg: &ServiceConfig) -> Result<(), CliError> {
    let app = AppState::load(cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((cfg.host.as_str(), cfg.port))
            .await
            .map_err(|e| CliError::Runtime(format!("bind {}:{}: {e}", cfg.host, cfg.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("listening on http://{addr}");
        println!("port {}", addr.port());
        let _ = std::io::stdout().flush();
        hairforge_service::serve(Arc::new(app), listener).await.map_err(|e| CliError::Runtime(e.to_string()))
    })
}
