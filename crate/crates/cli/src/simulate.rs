use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use glam::DVec3;
use hairforge_core::assets::{read_hairstyle, write_hairstyle};
use hairforge_core::fixtures::{fixture_style, head_mesh, pendulum_style};
use hairforge_core::protocol::encode_state_frame;
use hairforge_core::sim::{build_sim, SimConfig, SimError, SimState, WindField};
use hairforge_core::{Hairstyle, HeadMesh};
use serde::Serialize;

use crate::error::io;
use crate::{CliError, Vec3Arg};

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// A `.hair` file, `fixture:<id>` for a built-in style, or `fixture:pendulum`.
    #[arg(long = "in")]
    pub input: String,
    /// Substeps to run.
    #[arg(long, default_value_t = 600)]
    pub steps: u64,
    /// Substep length in seconds; defaults to the configured one.
    #[arg(long)]
    pub dt: Option<f64>,
    /// JSON simulation configuration; fields left out keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub no_gravity: bool,
    /// Simulate without the head's collision proxies.
    #[arg(long)]
    pub no_head: bool,
    /// Mean wind speed in cm/s; wind stays off when absent.
    #[arg(long)]
    pub wind: Option<f64>,
    #[arg(long, default_value = "1,0,0")]
    pub wind_dir: Vec3Arg,
    /// Final geometry as a `.hair` file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Concatenated frame packets, one every `--every` substeps.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub every: u64,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub steps: u64,
    pub time: f64,
    pub strands: usize,
    pub particles: usize,
    /// Largest distance any particle moved from its starting position.
    pub max_displacement: f64,
    pub kinetic_energy: f64,
    /// Last particle of the first strand.
    pub tip: Option<DVec3>,
}

pub fn load_input(input: &str) -> Result<(Hairstyle, bool), CliError> {
    match input.strip_prefix("fixture:") {
        Some("pendulum") => Ok((pendulum_style(DVec3::ZERO, 10.0), true)),
        Some(id) => fixture_style(id)
            .map(|h| (h, false))
            .ok_or_else(|| CliError::Usage(format!("no fixture style `{id}`"))),
        None => Ok((read_hairstyle(std::path::Path::new(input))?, false)),
    }
}

impl SimulateArgs {
    pub fn config(&self) -> Result<SimConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(io(path))?;
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            }
            None => SimConfig::default(),
        };
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if self.no_gravity {
            cfg.gravity = DVec3::ZERO;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs `steps` substeps; a blow-up reports the 1-based step that failed.
pub fn simulate(state: &mut SimState, cfg: &SimConfig, steps: u64, mut on_step: impl FnMut(u64, &SimState)) -> Result<(), CliError> {
    for k in 1..=steps {
        state.step(cfg, cfg.dt).map_err(|e| match e {
            SimError::NumericalBlowup { .. } => CliError::Runtime(format!("step {k}: {e}")),
            other => CliError::from(other),
        })?;
        on_step(k, state);
    }
    Ok(())
}

pub fn run(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = a.config()?;
    let (style, is_pendulum) = load_input(&a.input)?;
    let head = if a.no_head || is_pendulum { HeadMesh::empty() } else { head_mesh() };
    let mut state = build_sim(&style, Arc::new(head), &cfg)?;
    if let Some(strength) = a.wind {
        let wind = WindField { enabled: true, strength, direction: a.wind_dir.0, ..WindField::breeze() };
        state.set_wind(wind)?;
    }
    let start = state.positions();
    let mut trajectory = match &a.trajectory {
        Some(path) => Some((std::fs::File::create(path).map_err(io(path))?, path)),
        None => None,
    };
    let every = a.every.max(1);
    let mut write_err = None;
    simulate(&mut state, &cfg, a.steps, |k, s| {
        if let Some((file, _)) = trajectory.as_mut() {
            if k % every == 0 && write_err.is_none() {
                if let Err(e) = file.write_all(&encode_state_frame((k / every) as u32, s, 1)) {
                    write_err = Some(e);
                }
            }
        }
    })?;
    if let (Some(e), Some((_, path))) = (write_err, trajectory.as_ref()) {
        return Err(CliError::Runtime(format!("{}: {e}", path.display())));
    }
    let max_displacement = state.positions().iter().zip(&start).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
    let summary = SimSummary {
        steps: a.steps,
        time: state.time,
        strands: state.strand_count(),
        particles: state.particles.len(),
        max_displacement,
        kinetic_energy: state.kinetic_energy(),
        tip: state.spans().first().map(|s| state.particles[s.particles.end - 1].position),
    };
    if let Some(out) = &a.out {
        let mut h = state.to_hairstyle(&style.id);
        h.caption = style.caption.clone();
        write_hairstyle(&h, out)?;
    }
    if a.json {
        println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    } else {
        println!(
            "{} steps, t={:.4}s, {} particles, max displacement {:.3e} cm, kinetic energy {:.3e}",
            summary.steps, summary.time, summary.particles, summary.max_displacement, summary.kinetic_energy
        );
    }
    Ok(())
}
