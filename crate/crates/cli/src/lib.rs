//! Command-line front end. Every subcommand is a plain function over parsed
//! arguments so tests can drive it without spawning a process.

pub mod bench;
pub mod error;
pub mod grow;
pub mod misc;
pub mod retrieve;
pub mod simulate;

use std::ffi::OsString;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use glam::DVec3;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hairforge", version, about = "Hair authoring engine: growth, simulation, retrieval and rendering tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Grow one procedural strand, or a parameter sweep grid.
    Grow(grow::GrowArgs),
    /// Step a hairstyle offline and write the result.
    Simulate(simulate::SimulateArgs),
    /// Rank database styles against a text query.
    Retrieve(retrieve::RetrieveArgs),
    /// Time simulation frames and print CSV.
    Bench(bench::BenchArgs),
    /// Run the Canny edge detector on a PNG.
    Edges(misc::EdgesArgs),
    /// Caption index tools.
    #[command(subcommand)]
    Index(misc::IndexCmd),
    /// Write the built-in fixture database to a directory.
    Fixtures(misc::FixturesArgs),
    /// Run the session server.
    Serve(hairforge_service::ServiceConfig),
}

/// Comma-separated `x,y,z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3Arg(pub DVec3);

impl FromStr for Vec3Arg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            &[x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Ok(Vec3Arg(DVec3::new(x, y, z))),
            _ => Err(format!("expected three finite comma-separated numbers, got `{s}`")),
        }
    }
}

pub fn execute(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Grow(a) => grow::run(&a),
        Cmd::Simulate(a) => simulate::run(&a),
        Cmd::Retrieve(a) => retrieve::run(&a),
        Cmd::Bench(a) => bench::run(&a),
        Cmd::Edges(a) => misc::edges(&a),
        Cmd::Index(misc::IndexCmd::Build(a)) => misc::index_build(&a),
        Cmd::Fixtures(a) => misc::fixtures(&a),
        Cmd::Serve(cfg) => misc::serve(&cfg),
    }
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
