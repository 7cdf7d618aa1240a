use std::path::PathBuf;
use std::time::Duration;

use clap::Args;

/// Server settings. Every flag also reads a `HAIRFORGE_*` environment
/// variable; an explicit flag wins over the environment.
#[derive(Debug, Clone, Args)]
pub struct ServiceConfig {
    /// TCP port; 0 picks a free one.
    #[arg(long, env = "HAIRFORGE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "HAIRFORGE_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// Database directory of `<id>.hair` + `<id>.json` pairs. The built-in
    /// fixture database is used when absent.
    #[arg(long, env = "HAIRFORGE_ASSETS")]
    pub assets: Option<PathBuf>,
    /// Prebuilt caption index; built from the database at startup when absent.
    #[arg(long, env = "HAIRFORGE_INDEX")]
    pub index: Option<PathBuf>,
    /// Embedding provider base URL, or `fallback` for the offline hashing embedder.
    #[arg(long, env = "HAIRFORGE_EMBED_URL", default_value = "fallback")]
    pub embed_url: String,
    /// Generation backend base URL, or `mock` for the in-process echo backend.
    #[arg(long, env = "HAIRFORGE_GEN_URL", default_value = "mock")]
    pub gen_url: String,
    /// Generation request timeout in seconds.
    #[arg(long, env = "HAIRFORGE_GEN_TIMEOUT", default_value_t = 120)]
    pub gen_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            host: "127.0.0.1".into(),
            assets: None,
            index: None,
            embed_url: "fallback".into(),
            gen_url: "mock".into(),
            gen_timeout_secs: 120,
        }
    }
}

impl ServiceConfig {
    pub fn gen_timeout(&self) -> Duration {
        Duration::from_secs(self.gen_timeout_secs)
    }
}
