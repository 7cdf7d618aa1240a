use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use hairforge_core::fixtures::{bench_hairstyle, head_mesh};
use hairforge_core::sim::{build_sim, empty_sim, SimConfig};
use serde::Serialize;

use crate::error::io;
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Strand counts, comma-separated; one CSV row each.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000")]
    pub strands: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub vertices: usize,
    /// Timed display frames per row.
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    /// Untimed frames run first.
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub strands: usize,
    pub vertices: usize,
    pub particles: usize,
    pub frames: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

pub const CSV_HEADER: &str = "strands,vertices,particles,frames,mean_ms,p50_ms,p90_ms,p99_ms,max_ms";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.strands,
            self.vertices,
            self.particles,
            self.frames,
            self.mean_ms,
            self.p50_ms,
            self.p90_ms,
            self.p99_ms,
            self.max_ms
        )
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Times `frames` display frames of the synthetic style after `warmup`
/// untimed ones. Zero strands times an empty state.
pub fn bench_frames(
    strands: usize,
    vertices: usize,
    frames: usize,
    warmup: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Result<BenchRow, CliError> {
    let head = Arc::new(head_mesh());
    let mut state = if strands == 0 {
        empty_sim(head, cfg)?
    } else {
        build_sim(&bench_hairstyle(strands, vertices, seed), head, cfg)?
    };
    for _ in 0..warmup {
        state.advance_frame(cfg)?;
    }
    let mut times = Vec::with_capacity(frames);
    for _ in 0..frames {
        let t = Instant::now();
        state.advance_frame(cfg)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    times.sort_by(f64::total_cmp);
    Ok(BenchRow {
        strands,
        vertices,
        particles: state.particles.len(),
        frames,
        mean_ms,
        p50_ms: percentile(&times, 0.5),
        p90_ms: percentile(&times, 0.9),
        p99_ms: percentile(&times, 0.99),
        max_ms: times.last().copied().unwrap_or(0.0),
    })
}

/// For successive rows: (time ratio) / (strand ratio), from medians.
/// 1.0 is linear scaling.
pub fn scaling_ratios(rows: &[BenchRow]) -> Vec<f64> {
    rows.windows(2)
        .filter(|w| w[0].strands > 0 && w[0].p50_ms > 0.0)
        .map(|w| (w[1].p50_ms / w[0].p50_ms) / (w[1].strands as f64 / w[0].strands as f64))
        .collect()
}

pub fn run(a: &BenchArgs) -> Result<(), CliError> {
    let cfg = SimConfig::default();
    let mut rows = Vec::with_capacity(a.strands.len());
    let mut text = format!("{CSV_HEADER}\n");
    for &n in &a.strands {
        let row = bench_frames(n, a.vertices, a.frames, a.warmup, a.seed, &cfg)?;
        text.push_str(&row.csv());
        text.push('\n');
        log::info!("{} strands: p50 {:.2} ms", n, row.p50_ms);
        rows.push(row);
    }
    match &a.out {
        Some(path) => std::fs::write(path, &text).map_err(io(path))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    for (w, r) in rows.windows(2).zip(scaling_ratios(&rows)) {
        eprintln!("{} -> {} strands: {:.2}x linear", w[0].strands, w[1].strands, r);
    }
    Ok(())
}
