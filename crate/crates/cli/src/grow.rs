use std::path::{Path, PathBuf};

use clap::Args;
use glam::DVec3;
use hairforge_core::assets::write_hairstyle;
use hairforge_core::growth::{sweep_grid, trace_strand};
use hairforge_core::model::{Hairstyle, StyleSource, Strand};
use hairforge_core::rng::rng_from_seed;
use hairforge_core::GrowthParams;
use rand::Rng;
use serde::Serialize;

use crate::error::io;
use crate::{CliError, Vec3Arg};

#[derive(Debug, Clone, Args)]
pub struct GrowArgs {
    #[arg(long, default_value = "0,9.5,0")]
    pub root: Vec3Arg,
    #[arg(long, default_value = "0,1,0")]
    pub dir: Vec3Arg,
    /// JSON file of growth parameters; fields left out keep their defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u32>,
    #[arg(long)]
    pub p_gamma_cap: Option<f64>,
    #[arg(long)]
    pub p_gravity: Option<f64>,
    #[arg(long)]
    pub p_spiral: Option<f64>,
    #[arg(long = "p-h")]
    pub p_helix_radius: Option<f64>,
    #[arg(long)]
    pub p_freq: Option<f64>,
    #[arg(long)]
    pub segment_scale: Option<f64>,
    /// Scale of the seeded jitter added to `--dir`; 0 disables it.
    #[arg(long)]
    pub perturbation_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output `.hair` file, or a directory with `--sweep`.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid axes, e.g. `--sweep ph=0.2,0.5,1.0 pgamma=0.0,0.05,0.1`.
    #[arg(long, num_args = 1..)]
    pub sweep: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    file: String,
    row: usize,
    col: usize,
    p_helix_radius: f64,
    p_gravity: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    root: DVec3,
    dir0: DVec3,
    params: GrowthParams,
    p_h_values: Vec<f64>,
    p_gravity_values: Vec<f64>,
    entries: Vec<ManifestEntry>,
}

impl GrowArgs {
    pub fn growth_params(&self) -> Result<GrowthParams, CliError> {
        let mut p = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(io(path))?;
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            }
            None => GrowthParams::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.p_gamma_cap, self.p_gamma_cap);
        set(&mut p.p_gravity, self.p_gravity);
        set(&mut p.p_spiral, self.p_spiral);
        set(&mut p.p_helix_radius, self.p_helix_radius);
        set(&mut p.p_freq, self.p_freq);
        set(&mut p.segment_scale, self.segment_scale);
        set(&mut p.perturbation_scale, self.perturbation_scale);
        if let Some(t) = self.steps {
            p.steps = t;
        }
        p.validate()?;
        Ok(p)
    }

    /// `--dir` plus the seeded jitter, uniform per axis in ±scale.
    pub fn perturbed_dir(&self, params: &GrowthParams) -> (DVec3, DVec3) {
        let mut rng = rng_from_seed(self.seed);
        let jitter = DVec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * params.perturbation_scale;
        (self.dir.0 + jitter, jitter)
    }
}

fn parse_axis(arg: &str) -> Result<(String, Vec<f64>), CliError> {
    let (key, values) =
        arg.split_once('=').ok_or_else(|| CliError::Usage(format!("sweep axis `{arg}` must look like key=v1,v2")))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("sweep value `{v}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((key.trim().to_ascii_lowercase(), values))
}

fn style_of(path: &Path, strands: Vec<Strand>) -> Hairstyle {
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("grown");
    Hairstyle { source: StyleSource::Procedural, ..Hairstyle::new(id, strands) }
}

pub fn run(a: &GrowArgs) -> Result<(), CliError> {
    let params = a.growth_params()?;
    let (dir0, jitter) = a.perturbed_dir(&params);
    if a.sweep.is_empty() {
        let (strand, _) = trace_strand(a.root.0, dir0, jitter, &params)?;
        write_hairstyle(&style_of(&a.out, vec![strand]), &a.out)?;
        println!("wrote {} ({} vertices)", a.out.display(), params.steps + 1);
        return Ok(());
    }

    let mut p_h_values = vec![params.p_helix_radius];
    let mut p_gravity_values = vec![params.p_gravity];
    for arg in &a.sweep {
        match parse_axis(arg)? {
            (k, v) if k == "ph" || k == "p_h" => p_h_values = v,
            (k, v) if k == "pgamma" || k == "p_gamma" || k == "p_gravity" => p_gravity_values = v,
            (k, _) => return Err(CliError::Usage(format!("unknown sweep axis `{k}`; use ph or pgamma"))),
        }
    }
    let grid = sweep_grid(a.root.0, dir0, &params, &p_h_values, &p_gravity_values)?;
    std::fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    let mut entries = Vec::new();
    for (row, strands) in grid.into_iter().enumerate() {
        for (col, strand) in strands.into_iter().enumerate() {
            let file = format!("r{row}_c{col}.hair");
            let path = a.out.join(&file);
            write_hairstyle(&style_of(&path, vec![strand]), &path)?;
            entries.push(ManifestEntry {
                file,
                row,
                col,
                p_helix_radius: p_h_values[col],
                p_gravity: p_gravity_values[row],
            });
        }
    }
    let manifest = Manifest { root: a.root.0, dir0, params, p_h_values, p_gravity_values, entries };
    let path = a.out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io(&path))?;
    println!("wrote {} strands to {}", manifest.entries.len(), a.out.display());
    Ok(())
}
