mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "fsd",
    version,
    about = "Latent SDF surface extraction and pose geometry tools"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "FSD_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Primary output file (standard output when absent).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ply,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChamferModeArg {
    Hinge,
    Clamped,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract surface points from decoder weights or analytic shapes.
    #[command(group(ArgGroup::new("source").required(true).args(["weights", "shape"])))]
    Extract {
        /// Decoder weights (binary or JSON).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Analytic shape: sphere:R, box:HX,HY,HZ or torus:R,r. Repeatable.
        #[arg(long)]
        shape: Vec<String>,
        /// Latent code file (JSON array), one per object. Repeatable.
        #[arg(long)]
        latent: Vec<PathBuf>,
        /// Number of seeded random latents to use instead of latent files.
        #[arg(long)]
        random_latents: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        latent_std: f64,
        #[arg(long, default_value_t = 6)]
        lod: u32,
        #[arg(long, default_value_t = 1)]
        lod_start: u32,
        #[arg(long, default_value_t = 1.0)]
        prune_k: f64,
        #[arg(long, default_value_t = 1)]
        projection_steps: u32,
        /// Output PLY (overrides --output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thresholded Chamfer distance between two PLY clouds.
    Chamfer {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "clamped")]
        mode: ChamferModeArg,
    },
    /// Back-project a depth PGM to a camera-frame PLY cloud.
    Backproject {
        depth: PathBuf,
        intrinsics: PathBuf,
        mask: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest rotation to a 3x3 matrix given as a JSON array of rows.
    Orthogonalize { matrix: PathBuf },
    /// Average precision report for JSON-lines predictions and ground truth.
    Metrics {
        preds: PathBuf,
        gts: PathBuf,
        config: Option<PathBuf>,
    },
    /// Time dense, per-object octree and batched octree extraction.
    Bench { config: Option<PathBuf> },
    /// Write a seeded random decoder.
    GenWeights {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = fsd_core::sdf::DEFAULT_LATENT_DIM)]
        latent_dim: usize,
        #[arg(long, default_value_t = fsd_core::sdf::DEFAULT_HIDDEN_DIM)]
        hidden_dim: usize,
        #[arg(long, default_value_t = fsd_core::sdf::DEFAULT_DEPTH)]
        depth: usize,
        /// Rescale the output layer so the field has a zero level set.
        #[arg(long)]
        shape_calibrated: bool,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Compute(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(3);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
