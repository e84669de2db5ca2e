//! Command-line front end: argument parsing, exit codes and the worker
//! pool. Exit status is 0 on success, 2 when an experiment misses its
//! threshold, 1 on input or solver errors and 64 on usage errors.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::f64::consts::FRAC_PI_6;
use std::ffi::OsString;
use std::path::PathBuf;

pub mod commands;
pub mod output;
pub mod scene;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "CORNERLAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cornerlab",
    version,
    about = "Acoustic scattering experiments around corners"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scene; write the total field on the grid and the far field.
    Forward(SceneArgs),
    /// Solve a scene; write its far-field pattern.
    Farfield(SceneArgs),
    /// Compare the grid solver with the series solution for a disk or ball.
    MieCheck(MieArgs),
    /// Far-field discrepancy of two scenes against the solver error.
    Distinguish(DistinguishArgs),
    /// Normalized far-field norms over a wavenumber range.
    NonscatterScan(ScanArgs),
    /// Rescaled corner integrals against the Laplace-transform limit.
    OrthoDecay(OrthoArgs),
    /// Decay of the exponential profile near the corner and its remainder.
    CgoDecay(CgoArgs),
    /// Laplace transform of a harmonic polynomial over a sector or octant.
    Laplace(LaplaceArgs),
    /// DFT of a sampled cube indicator against its closed form.
    CubeFft(CubeArgs),
    /// Green's identity on the truncated sector.
    GreenCheck(GreenArgs),
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene JSON file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Output directory; without it the main data file goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Far-field directions (overrides the scene).
    #[arg(long)]
    pub directions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MieArgs {
    /// Size parameter `k a`.
    #[arg(long)]
    pub ka: f64,
    /// Constant refractive index inside the disk or ball.
    #[arg(long)]
    pub q0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Cells across the diameter [default: 256 in 2D, 24 in 3D].
    #[arg(long)]
    pub cells: Option<usize>,
    /// Far-field directions [default: 256 in 2D, 16 polar nodes in 3D].
    #[arg(long)]
    pub directions: Option<usize>,
    /// Allowed relative L2 far-field error.
    #[arg(long, default_value_t = 2e-3)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    #[arg(long)]
    pub scene_a: PathBuf,
    #[arg(long)]
    pub scene_b: PathBuf,
    #[arg(long)]
    pub directions: Option<usize>,
    /// Required ratio of discrepancy to the refinement error.
    #[arg(long, default_value_t = 10.0)]
    pub margin: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub k_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub k_max: f64,
    #[arg(long, default_value_t = 64)]
    pub k_count: usize,
    /// Equispaced plane-wave directions per wavenumber.
    #[arg(long, default_value_t = 16)]
    pub plane_directions: usize,
    /// Random Herglotz waves per wavenumber.
    #[arg(long, default_value_t = 0)]
    pub herglotz: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
}

/// Truncated sector `S_R` with the corner profile `q - 1 = eta + c r^alpha`
/// and the exponential direction `phi`.
#[derive(Debug, Args)]
pub struct SectorArgs {
    /// Half-aperture of the sector.
    #[arg(long, default_value_t = FRAC_PI_6)]
    pub phi0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c: f64,
    /// Angle of the decay direction from the bisector.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    #[arg(long, value_enum, default_value_t = BranchArg::Plus)]
    pub branch: BranchArg,
}

/// Either an explicit list or a geometric grid of decay parameters.
#[derive(Debug, Args)]
pub struct TauArgs {
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["tau_min", "tau_max", "tau_count"])]
    pub taus: Option<Vec<f64>>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tau_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OrthoArgs {
    #[command(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    pub taus: TauArgs,
    /// Order of the Fourier-Bessel test mode.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub order: i64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 200)]
    pub radial_nodes: usize,
    #[arg(long, default_value_t = 128)]
    pub angular_nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CgoArgs {
    #[command(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    pub taus: TauArgs,
    /// Distance kept from the sector edges.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Samples per direction of the neighborhood.
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
    /// Also solve for the remainder on a periodic box.
    #[arg(long)]
    pub remainder: bool,
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LaplaceArgs {
    /// Degree of the harmonic polynomial.
    #[arg(long)]
    pub n: usize,
    /// Half-aperture of the sector (ignored for the octant).
    #[arg(long, default_value_t = FRAC_PI_6)]
    pub phi0: f64,
    /// Real parts of `z`; two components for a sector, three for the octant.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z: Vec<f64>,
    /// Imaginary parts of `z`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zi: Option<Vec<f64>>,
    /// Planar basis element `re` or `im` of `(x1 + i x2)^n`.
    #[arg(long, value_enum, default_value_t = PlanarPart::Re)]
    pub part: PlanarPart,
    /// Order `m` of the solid harmonic in 3D.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub order: i64,
    /// Also print the transform over `S_{R/2}` and the remaining tail.
    #[arg(long)]
    pub truncate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanarPart {
    Re,
    Im,
}

#[derive(Debug, Args)]
pub struct CubeArgs {
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4.0)]
    pub side: f64,
    #[arg(long, default_value_t = 1.0)]
    pub half_width: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[command(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    pub taus: TauArgs,
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.3, 0.0])]
    pub bump_center: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub bump_amplitude: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("{THREADS_VAR}={value:?} is not a positive integer"))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return EXIT_ERROR;
    }
    match commands::execute(&cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_THRESHOLD,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
