//! `bonsai`: grow, mesh, sample, splat, render and fit procedural bonsai.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error classes that map onto the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or input content.
    Invalid(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for Failure {}

#[derive(Parser, Debug)]
#[command(name = "bonsai", version, about = "Procedural bonsai structure priors", after_long_help = config::KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration file (see `bonsai --help` for keys).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow a skeleton; writes skeleton.json, growth_trace.csv and attractors.ply.
    Grow {
        #[command(flatten)]
        common: Common,
        /// Output directory (defaults to output.dir).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Size a skeleton and write its tube mesh as OBJ.
    Mesh {
        #[command(flatten)]
        common: Common,
        /// Skeleton JSON.
        #[arg(long = "in", short)]
        input: PathBuf,
        /// Output OBJ path.
        #[arg(long, short)]
        out: PathBuf,
        /// Run the sizing pass on an unsized skeleton.
        #[arg(long)]
        auto_size: bool,
        /// Also write the sized skeleton here.
        #[arg(long)]
        sized_out: Option<PathBuf>,
    },
    /// Sample labelled surface points from a skeleton's tube mesh as PLY.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        auto_size: bool,
        /// Points per unit area (overrides sampling.density).
        #[arg(long)]
        density: Option<f64>,
    },
    /// Turn a sampled point cloud into isotropic Gaussians (PLY).
    Gaussians {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render colour and depth from the seeded camera rig.
    Render {
        #[command(flatten)]
        common: Common,
        /// Gaussian PLY or mesh OBJ.
        #[arg(long = "in", short)]
        input: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Number of views (overrides render.views).
        #[arg(long)]
        views: Option<usize>,
        /// Also write 16-bit PGM depth previews.
        #[arg(long)]
        preview: bool,
        /// Also write 8-bit PGM silhouette masks.
        #[arg(long)]
        masks: bool,
    },
    /// Fit the attraction weights to a directory of silhouette masks.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory of PNG/PGM masks (gray > 127 is foreground).
        #[arg(long)]
        masks: PathBuf,
        /// Objective evaluations (overrides fit.budget).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run grow, mesh, sample, gaussians and render in one go.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Failure>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<bonsai_core::Error>() {
            return if e.is_io() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn configure_threads() {
    let Ok(raw) = std::env::var("BONSAI_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("BONSAI_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("BONSAI_THREADS must be a positive integer, got {raw:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Grow { common, out } => commands::grow(&common, out),
        Command::Mesh { common, input, out, auto_size, sized_out } => {
            commands::mesh(&common, &input, &out, auto_size, sized_out.as_deref())
        }
        Command::Sample { common, input, out, auto_size, density } => {
            commands::sample(&common, &input, &out, auto_size, density)
        }
        Command::Gaussians { common, input, out } => commands::gaussians(&common, &input, &out),
        Command::Render { common, input, out, views, preview, masks } => {
            commands::render(&common, &input, &out, views, preview, masks)
        }
        Command::Fit { common, masks, budget, out } => commands::fit(&common, &masks, budget, &out),
        Command::Pipeline { common, out } => commands::pipeline(&common, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}
