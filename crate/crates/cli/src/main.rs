use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sharpmesh::pipeline::{self, PipelineConfig, RunManifest};
use sharpmesh::Error;

#[derive(Parser, Debug)]
#[command(name = "sharpmesh", version, about = "Watertight remeshing, part decomposition, articulation and scene composition")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON pipeline configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "SHARPMESH_THREADS")]
    threads: Option<usize>,
    /// Overrides the remesh/extract lattice resolution.
    #[arg(long, global = true)]
    resolution: Option<u32>,
    /// Output directory (also holds the run manifest).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize, sample the narrow-band SDF and extract a watertight mesh.
    Remesh { input: PathBuf },
    /// Coarse prior, dilation and prior-pruned extraction at full resolution.
    Extract { input: PathBuf },
    /// Turn scored point masks into watertight per-part meshes.
    Parts {
        input: PathBuf,
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// Infer joints between parts and export URDF.
    Articulate {
        parts: PathBuf,
        /// Directory with camera.json and part_<k>/*.pbm silhouettes.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Compose assets from a layout JSON into one scene.
    Compose { layout: PathBuf },
}

fn load_config(common: &Common) -> sharpmesh::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    if let Some(n) = common.resolution {
        cfg.remesh.extraction.resolution = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> sharpmesh::Result<RunManifest> {
    let cfg = load_config(&cli.common)?;
    if let Some(t) = cfg.threads {
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out: &Path = &cli.common.out;
    match &cli.command {
        Command::Remesh { input } => pipeline::cmd_remesh(input, &cfg, out),
        Command::Extract { input } => pipeline::cmd_extract(input, &cfg, out),
        Command::Parts { input, masks } => pipeline::cmd_parts(input, masks.as_deref(), &cfg, out),
        Command::Articulate { parts, targets } => pipeline::cmd_articulate(parts, targets.as_deref(), &cfg, out),
        Command::Compose { layout } => pipeline::cmd_compose(layout, &cfg, out),
    }
}

fn report(manifest: &RunManifest) {
    for s in &manifest.stages {
        let state = if s.skipped { "skipped" } else { "done" };
        println!("{:<10} {:<8} {:>9.3}s", s.name, state, s.seconds);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(m) => {
            report(&m);
            ExitCode::from(pipeline::EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Stage { source, .. } = &e {
                if let Error::BandIncomplete { cells } = source.as_ref() {
                    eprintln!("uncovered cells: {}", cells.len());
                }
            }
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
