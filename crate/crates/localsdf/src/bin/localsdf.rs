//! Command-line front end over the library pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use localsdf::demo2d::Demo2dConfig;
use localsdf::pipeline::{
    self, Demo2dParams, EncodeInput, EncodeParams, EvalParams, FuseParams, ReconstructParams,
    TrainPriorParams,
};

#[derive(Parser)]
#[command(name = "localsdf", version, about = "Local latent SDF patches: train, encode, reconstruct, fuse, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the shared decoder prior on random primitive scenes.
    TrainPrior(TrainPriorArgs),
    /// Encode a scene (samples, mesh, or depth frames) into a latent grid.
    Encode(EncodeArgs),
    /// Extract a mesh from an encoded grid via masked marching cubes.
    Reconstruct(ReconstructArgs),
    /// Fuse depth frames into a TSDF volume and extract a mesh.
    Fuse(FuseArgs),
    /// Compare a predicted mesh against ground truth.
    Eval(EvalArgs),
    /// Planar receptive-field sweep with contour images.
    Demo2d(Demo2dArgs),
    /// Re-run a recorded manifest.
    Replay { manifest: PathBuf },
}

#[derive(Args)]
struct TrainPriorArgs {
    #[arg(long, default_value_t = 200)]
    primitives: usize,
    #[arg(long, default_value_t = 4)]
    scenes: usize,
    #[arg(long, default_value_t = 1.4)]
    extent: f64,
    #[arg(long, default_value_t = 0.056)]
    voxel_size: f64,
    #[arg(long, default_value_t = 1.5)]
    receptive_factor: f64,
    #[arg(long, default_value_t = 125)]
    code_dim: usize,
    #[arg(long, default_value_t = 128)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 20000)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_voxels: usize,
    #[arg(long, default_value_t = 16)]
    samples_per_voxel: usize,
    #[arg(long, default_value_t = 60000)]
    surface_samples: usize,
    #[arg(long, default_value_t = 15000)]
    uniform_samples: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100.0)]
    sigma_reg: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Samples CSV (x,y,z,sdf,weight).
    #[arg(long, conflicts_with_all = ["mesh", "depth"])]
    samples: Option<PathBuf>,
    /// Mesh file (OBJ/PLY) sampled on the fly.
    #[arg(long, conflicts_with = "depth")]
    mesh: Option<PathBuf>,
    /// One or more DLSD depth frames.
    #[arg(long, num_args = 1..)]
    depth: Vec<PathBuf>,
    #[arg(long, default_value_t = 40000)]
    mesh_surface_samples: usize,
    #[arg(long, default_value_t = 10000)]
    mesh_uniform_samples: usize,
    /// Normal displacement for depth samples (scene units).
    #[arg(long, default_value_t = 0.015)]
    displacement: f64,
    /// Free-space sample spacing (0 = one voxel).
    #[arg(long, default_value_t = 0.0)]
    free_space_step: f64,
    /// Grid voxel size (defaults to the training-time size from the checkpoint).
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    receptive_factor: f64,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100.0)]
    sigma_reg: f64,
    #[arg(long, default_value_t = 1e-4)]
    convergence_tol: f64,
    /// Disable the per-voxel early exit (determinism studies).
    #[arg(long)]
    no_early_exit: bool,
    #[arg(long, default_value_t = 128)]
    samples_per_step: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Encoded-grid checkpoint.
    #[arg(long)]
    grid: PathBuf,
    /// Lattice spacing (0 = voxel_size / 8).
    #[arg(long, default_value_t = 0.0)]
    resolution: f64,
    #[arg(long)]
    mask_radius: Option<f64>,
    /// Observation samples CSV (required with --mask-radius).
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// DLSD depth frames.
    #[arg(long, num_args = 1.., required = true)]
    frames: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    voxel_size: f64,
    #[arg(long, default_value_t = 3.0)]
    truncation_factor: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_ref_depth: f64,
    #[arg(long)]
    max_weight: Option<f64>,
    /// Extraction lattice spacing (0 = voxel size).
    #[arg(long, default_value_t = 0.0)]
    resolution: f64,
    #[arg(long)]
    mask_radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 30000)]
    points: usize,
    /// Completion threshold in scene units (7 mm for metric scenes).
    #[arg(long, default_value_t = 0.007)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Demo2dArgs {
    #[arg(long, default_value_t = 128.0)]
    domain: f64,
    #[arg(long, default_value_t = 16.0)]
    cell_size: f64,
    #[arg(long, default_value_t = 1200)]
    steps: usize,
    /// Receptive-field widths in cell units.
    #[arg(long, num_args = 1.., default_values_t = [1.0, 1.25, 1.5, 1.75, 2.0])]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    out: PathBuf,
}

fn run(cli: Cli) -> localsdf::Result<()> {
    match cli.command {
        Command::TrainPrior(a) => {
            let params = TrainPriorParams {
                primitives: a.primitives,
                scenes: a.scenes,
                extent: a.extent,
                voxel_size: a.voxel_size,
                receptive_factor: a.receptive_factor,
                code_dim: a.code_dim,
                hidden_dim: a.hidden_dim,
                steps: a.steps,
                batch_voxels: a.batch_voxels,
                samples_per_voxel_per_step: a.samples_per_voxel,
                surface_samples_per_scene: a.surface_samples,
                uniform_samples_per_scene: a.uniform_samples,
                lr: a.lr,
                sigma_reg: a.sigma_reg,
                seed: a.seed,
                threads: a.threads,
                out: a.out,
            };
            let outcome = pipeline::run_train_prior(&params)?;
            println!(
                "trained prior on {} patches in {} steps ({} ms); final loss {:.6}",
                outcome.patches, outcome.steps_run, outcome.wall_ms, outcome.final_loss
            );
            println!("checkpoint: {}", outcome.checkpoint.display());
            println!("loss curve: {}", outcome.loss_csv.display());
        }
        Command::Encode(a) => {
            let input = if let Some(s) = a.samples {
                EncodeInput::Samples(s)
            } else if let Some(m) = a.mesh {
                EncodeInput::Mesh {
                    path: m,
                    n_surface: a.mesh_surface_samples,
                    n_uniform: a.mesh_uniform_samples,
                }
            } else if !a.depth.is_empty() {
                EncodeInput::Depth {
                    paths: a.depth,
                    displacement: a.displacement,
                    free_space_step: if a.free_space_step > 0.0 {
                        Some(a.free_space_step)
                    } else {
                        None
                    },
                }
            } else {
                return Err(localsdf::Error::Config(
                    "encode needs --samples, --mesh, or --depth".into(),
                ));
            };
            if let Some(v) = a.voxel_size {
                if !(v > 0.0) {
                    return Err(localsdf::Error::Config(format!(
                        "--voxel-size must be positive, got {v}"
                    )));
                }
            }
            let params = EncodeParams {
                voxel_size: a.voxel_size.unwrap_or(0.0),
                receptive_factor: a.receptive_factor,
                iterations: a.iterations,
                lr: a.lr,
                sigma_reg: a.sigma_reg,
                convergence_tol: a.convergence_tol,
                early_exit: !a.no_early_exit,
                samples_per_step: a.samples_per_step,
                seed: a.seed,
                threads: a.threads,
                ..EncodeParams::new(a.checkpoint, input, a.out)
            };
            let outcome = pipeline::run_encode(&params)?;
            println!(
                "encoded {} voxels ({} without samples) from {} samples in {} ms; mean per-voxel loss {:.6}",
                outcome.voxels,
                outcome.empty_voxels,
                outcome.samples,
                outcome.wall_ms,
                outcome.mean_loss
            );
            println!("grid: {}", outcome.out.display());
        }
        Command::Reconstruct(a) => {
            let params = ReconstructParams {
                grid: a.grid,
                resolution: a.resolution,
                mask_radius: a.mask_radius,
                samples: a.samples,
                threads: a.threads,
                out: a.out,
            };
            let outcome = pipeline::run_reconstruct(&params)?;
            println!(
                "extracted {} vertices / {} triangles ({} cells masked) in {} ms",
                outcome.vertices, outcome.triangles, outcome.masked_cells, outcome.wall_ms
            );
            println!("mesh: {}", outcome.out.display());
        }
        Command::Fuse(a) => {
            let params = FuseParams {
                frames: a.frames,
                voxel_size: a.voxel_size,
                truncation_factor: a.truncation_factor,
                weight_ref_depth: a.weight_ref_depth,
                max_weight: a.max_weight,
                resolution: a.resolution,
                mask_radius: a.mask_radius,
                threads: a.threads,
                out: a.out,
            };
            let outcome = pipeline::run_fuse(&params)?;
            println!(
                "fused mesh: {} vertices / {} triangles, {} observed voxels, {} ms",
                outcome.vertices, outcome.triangles, outcome.observed_voxels, outcome.wall_ms
            );
            println!("mesh: {}", outcome.out.display());
        }
        Command::Eval(a) => {
            let params = EvalParams {
                pred: a.pred,
                gt: a.gt,
                points: a.points,
                completion_threshold: a.threshold,
                seed: a.seed,
                out: a.out.clone(),
            };
            let report = pipeline::run_eval(&params)?;
            println!(
                "chamfer(x1e3) {:.6}  accuracy(p90) {:.6}  completion {:.4} @ {}",
                report.chamfer_mean * 1e3,
                report.mesh_accuracy_p90,
                report.completion_fraction,
                report.completion_threshold
            );
            println!("report: {}", a.out.display());
        }
        Command::Demo2d(a) => {
            let params = Demo2dParams {
                config: Demo2dConfig {
                    domain: a.domain,
                    cell_size: a.cell_size,
                    steps: a.steps,
                    radius_factors: a.radii,
                    seed: a.seed,
                    ..Demo2dConfig::default()
                },
                threads: a.threads,
                out_dir: a.out,
            };
            let outcome = pipeline::run_demo2d(&params)?;
            for o in &outcome.outcomes {
                println!(
                    "radius {:.2}: test error {:.4} px (train loss {:.5})",
                    o.radius_factor, o.test_error_px, o.final_train_loss
                );
            }
            println!("sweep: {}", outcome.sweep_csv.display());
        }
        Command::Replay { manifest } => {
            let m = pipeline::load_manifest(&manifest)?;
            println!("replaying '{}' from {}", m.command, manifest.display());
            pipeline::replay(&m)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is usage.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
