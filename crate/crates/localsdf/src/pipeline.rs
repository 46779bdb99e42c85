//! End-to-end runs behind the CLI and the examples: prior training, scene
//! encoding, mesh extraction, TSDF fusion, evaluation, and the 2D study.
//!
//! Every run writes a JSON manifest beside its primary output with the
//! resolved parameters, inputs, outputs, seed, and wall clock, and any
//! manifest can be replayed. With a fixed seed and one thread, replays
//! reproduce results bit-exactly (the compute paths are thread-count
//! independent by construction, but one thread is the guaranteed contract).

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decoder::{Decoder, SdfEncoding};
use crate::error::{Error, Result};
use crate::inference::{encode_scene, EncodeConfig, GridSdf};
use crate::io;
use crate::latent_grid::LatentGrid;
use crate::math::{Aabb, Vec3};
use crate::meshing::{extract, ExtractionConfig};
use crate::mesh::TriangleMesh;
use crate::metrics::{chamfer, completion, mesh_accuracy, EvalReport};
use crate::nn::{Mlp, MlpSpec};
use crate::sampling::{
    sample_mesh, samples_from_depth, DepthFrame, DepthSampleConfig, SdfSample,
};
use crate::synth;
use crate::training::{
    build_patch_dataset, surface_positions, train_prior, GridTemplate, TrainConfig,
};

/// Reproducibility record written beside every primary output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u128,
    pub created_unix: u64,
}

pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    name.push_str(".manifest.json");
    primary_output.with_file_name(name)
}

fn write_manifest(
    command: &str,
    params: &impl Serialize,
    seed: u64,
    threads: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    wall_ms: u128,
) -> Result<PathBuf> {
    let primary = outputs
        .first()
        .cloned()
        .ok_or_else(|| Error::Config("run has no outputs".into()))?;
    let manifest = RunManifest {
        tool: "localsdf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        params: serde_json::to_value(params)?,
        seed,
        threads,
        inputs,
        outputs,
        wall_ms,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = manifest_path(&primary);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Run a closure on a dedicated rayon pool of `threads` workers
/// (0 = library default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// train-prior

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainPriorParams {
    /// Primitive count for the training corpus.
    pub primitives: usize,
    /// Number of scenes the primitives are split across.
    pub scenes: usize,
    /// Scene region side length (scene units).
    pub extent: f64,
    pub voxel_size: f64,
    pub receptive_factor: f64,
    pub code_dim: usize,
    pub hidden_dim: usize,
    /// Total optimizer steps (rounded up to whole epochs).
    pub steps: usize,
    pub batch_voxels: usize,
    pub samples_per_voxel_per_step: usize,
    pub surface_samples_per_scene: usize,
    pub uniform_samples_per_scene: usize,
    pub lr: f64,
    pub sigma_reg: f64,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for TrainPriorParams {
    fn default() -> Self {
        Self {
            primitives: 200,
            scenes: 4,
            extent: 1.4,
            voxel_size: 0.056,
            receptive_factor: 1.5,
            code_dim: 125,
            hidden_dim: 128,
            steps: 20_000,
            batch_voxels: 64,
            samples_per_voxel_per_step: 16,
            surface_samples_per_scene: 60_000,
            uniform_samples_per_scene: 15_000,
            lr: 0.01,
            sigma_reg: 100.0,
            seed: 1,
            threads: 0,
            out: PathBuf::from("prior.dls"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainPriorOutcome {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub manifest: PathBuf,
    pub patches: usize,
    pub steps_run: usize,
    pub final_loss: f64,
    pub wall_ms: u128,
}

pub fn run_train_prior(params: &TrainPriorParams) -> Result<TrainPriorOutcome> {
    if params.steps == 0 {
        return Err(Error::Config("--steps must be positive".into()));
    }
    if !(params.voxel_size > 0.0) {
        return Err(Error::Config("--voxel-size must be positive".into()));
    }
    if params.primitives == 0 || params.scenes == 0 {
        return Err(Error::Config("need at least one primitive and scene".into()));
    }
    let start = Instant::now();
    let result = with_threads(params.threads, || -> Result<_> {
        let per_scene = params.primitives.div_ceil(params.scenes);
        let scenes: Vec<_> = (0..params.scenes)
            .map(|s| {
                synth::random_primitive_scene(
                    per_scene,
                    params.extent,
                    params.voxel_size,
                    params.seed.wrapping_add(1000 + s as u64),
                )
            })
            .collect();
        let template = GridTemplate {
            origin: [0.0; 3],
            voxel_size: params.voxel_size,
            receptive_radius_factor: params.receptive_factor,
        };
        let encoding = SdfEncoding::for_voxel_size(params.voxel_size);
        let sampler = crate::sampling::SceneSampleConfig {
            n_surface: params.surface_samples_per_scene,
            n_uniform: params.uniform_samples_per_scene,
            sigma_near: 0.25 * params.voxel_size,
            sigma_far: 1.0 * params.voxel_size,
            truncation: encoding.truncation,
            seed: params.seed,
        };
        let dataset =
            build_patch_dataset::<f32>(&scenes, &template, &sampler, &encoding, params.code_dim)?;
        let spec = MlpSpec::new(params.code_dim + 3, params.hidden_dim, 4, 1);
        let decoder = Decoder::new(Mlp::init(spec, params.seed)?, params.code_dim, encoding)?;
        let steps_per_epoch = dataset.len().div_ceil(params.batch_voxels);
        let epochs = params.steps.div_ceil(steps_per_epoch).max(1);
        let config = TrainConfig {
            epochs,
            batch_voxels: params.batch_voxels,
            samples_per_voxel_per_step: params.samples_per_voxel_per_step,
            lr: params.lr,
            sigma_reg: params.sigma_reg,
            seed: params.seed,
            ..TrainConfig::default()
        };
        let trained = train_prior(&dataset, decoder, &config)?;
        Ok((dataset.len(), trained))
    })??;
    let (patches, trained) = result;

    io::save_checkpoint::<f32>(&params.out, &trained.decoder, None, None)?;
    let loss_csv = params.out.with_extension("loss.csv");
    io::save_loss_curve(&trained.loss_curve, &loss_csv)?;
    let wall_ms = start.elapsed().as_millis();
    let manifest = write_manifest(
        "train-prior",
        params,
        params.seed,
        params.threads,
        vec![],
        vec![params.out.clone(), loss_csv.clone()],
        wall_ms,
    )?;
    Ok(TrainPriorOutcome {
        checkpoint: params.out.clone(),
        loss_csv,
        manifest,
        patches,
        steps_run: trained.steps_run,
        final_loss: trained.loss_curve.last().map(|e| e.mean_loss).unwrap_or(f64::NAN),
        wall_ms,
    })
}

// ---------------------------------------------------------------------------
// encode

/// Where the SDF samples of the scene to encode come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EncodeInput {
    /// CSV of x,y,z,sdf,weight.
    Samples(PathBuf),
    /// Mesh file sampled on the fly.
    Mesh {
        path: PathBuf,
        n_surface: usize,
        n_uniform: usize,
    },
    /// Depth frames converted to samples.
    Depth {
        paths: Vec<PathBuf>,
        displacement: f64,
        free_space_step: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeParams {
    pub checkpoint: PathBuf,
    pub input: EncodeInput,
    /// Grid voxel size; 0 uses the training-time size from the checkpoint.
    pub voxel_size: f64,
    pub receptive_factor: f64,
    pub iterations: usize,
    pub lr: f64,
    pub sigma_reg: f64,
    pub convergence_tol: f64,
    pub early_exit: bool,
    pub samples_per_step: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl EncodeParams {
    pub fn new(checkpoint: PathBuf, input: EncodeInput, out: PathBuf) -> Self {
        Self {
            checkpoint,
            input,
            voxel_size: 0.0,
            receptive_factor: 1.5,
            iterations: 300,
            lr: 0.01,
            sigma_reg: 100.0,
            convergence_tol: 1e-4,
            early_exit: true,
            samples_per_step: 128,
            seed: 1,
            threads: 0,
            out,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeOutcome {
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub voxels: usize,
    pub empty_voxels: usize,
    pub samples: usize,
    pub mean_loss: f64,
    pub wall_ms: u128,
}

fn load_encode_samples(input: &EncodeInput, voxel_size: f64, truncation: f64, seed: u64) -> Result<(Vec<SdfSample>, Vec<PathBuf>)> {
    match input {
        EncodeInput::Samples(path) => Ok((io::load_samples(path)?, vec![path.clone()])),
        EncodeInput::Mesh {
            path,
            n_surface,
            n_uniform,
        } => {
            let mesh = io::load_mesh(path)?;
            let samples = sample_mesh(&mesh, *n_surface, *n_uniform, truncation, seed)?;
            Ok((samples, vec![path.clone()]))
        }
        EncodeInput::Depth {
            paths,
            displacement,
            free_space_step,
        } => {
            if paths.is_empty() {
                return Err(Error::Config("no depth frames given".into()));
            }
            let cfg = DepthSampleConfig {
                displacement: *displacement,
                free_space_step: free_space_step.unwrap_or(voxel_size),
                truncation,
                weight_ref_depth: 1.0,
            };
            let mut all = Vec::new();
            for p in paths {
                let frame = io::load_depth(p)?;
                all.extend(samples_from_depth(&frame, &cfg)?);
            }
            Ok((all, paths.clone()))
        }
    }
}

pub fn run_encode(params: &EncodeParams) -> Result<EncodeOutcome> {
    if params.voxel_size < 0.0 {
        return Err(Error::Config("--voxel-size must be positive".into()));
    }
    let start = Instant::now();
    let ckpt = io::load_checkpoint(&params.checkpoint)?;
    // The prior is scale-relative (normalized local coordinates), so the grid
    // may use a different voxel size than training; the encoding rescales.
    let voxel_size = if params.voxel_size > 0.0 {
        params.voxel_size
    } else {
        ckpt.decoder.encoding.encode_span / 2.0
    };
    let mut decoder = ckpt.decoder;
    decoder.encoding = SdfEncoding {
        tanh_clamp: decoder.encoding.tanh_clamp,
        ..SdfEncoding::for_voxel_size(voxel_size)
    };
    let (samples, mut inputs) = load_encode_samples(
        &params.input,
        voxel_size,
        decoder.encoding.truncation,
        params.seed,
    )?;
    inputs.insert(0, params.checkpoint.clone());
    if samples.is_empty() {
        return Err(Error::Data("no samples to encode".into()));
    }
    let (grid, stats) = with_threads(params.threads, || -> Result<_> {
        let mut grid =
            LatentGrid::<f32>::new([0.0; 3], voxel_size, decoder.code_dim(), params.seed)?;
        grid.receptive_radius_factor = params.receptive_factor;
        grid.allocate(&surface_positions(&samples, decoder.encoding.truncation));
        if grid.is_empty() {
            return Err(Error::Data("no near-surface samples to allocate from".into()));
        }
        let config = EncodeConfig {
            iterations: params.iterations,
            lr: params.lr,
            sigma_reg: params.sigma_reg,
            convergence_tol: params.convergence_tol,
            early_exit: params.early_exit,
            samples_per_step: params.samples_per_step,
            seed: params.seed,
        };
        let stats = encode_scene(&decoder, &mut grid, &samples, &config)?;
        Ok((grid, stats))
    })??;

    io::save_checkpoint::<f32>(&params.out, &decoder, None, Some(&grid))?;
    let wall_ms = start.elapsed().as_millis();
    let manifest = write_manifest(
        "encode",
        params,
        params.seed,
        params.threads,
        inputs,
        vec![params.out.clone()],
        wall_ms,
    )?;
    Ok(EncodeOutcome {
        out: params.out.clone(),
        manifest,
        voxels: grid.len(),
        empty_voxels: stats.empty_voxels.len(),
        samples: samples.len(),
        mean_loss: stats.mean_loss,
        wall_ms,
    })
}

// ---------------------------------------------------------------------------
// reconstruct

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructParams {
    /// Encoded-grid checkpoint (decoder + latent grid).
    pub grid: PathBuf,
    /// Query lattice spacing; 0 = voxel_size / 8.
    pub resolution: f64,
    pub mask_radius: Option<f64>,
    /// Observation points for the mask (samples CSV); required when masking.
    pub samples: Option<PathBuf>,
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructOutcome {
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub vertices: usize,
    pub triangles: usize,
    pub masked_cells: usize,
    pub wall_ms: u128,
}

/// Bounding box of the allocated voxels, padded by one voxel.
pub fn grid_region(grid: &LatentGrid<f32>) -> Aabb {
    let mut b = Aabb::empty();
    let v = grid.voxel_size();
    for (idx, _) in grid.iter() {
        let c = grid.center(*idx);
        b.grow([c[0] - v, c[1] - v, c[2] - v]);
        b.grow([c[0] + v, c[1] + v, c[2] + v]);
    }
    b
}

pub fn run_reconstruct(params: &ReconstructParams) -> Result<ReconstructOutcome> {
    if params.resolution < 0.0 {
        return Err(Error::Config("--resolution must be positive".into()));
    }
    let start = Instant::now();
    let ckpt = io::load_checkpoint(&params.grid)?;
    let grid = ckpt
        .grid
        .ok_or_else(|| Error::Data("checkpoint holds no latent grid".into()))?;
    let decoder = ckpt.decoder;
    let resolution = if params.resolution > 0.0 {
        params.resolution
    } else {
        grid.voxel_size() / 8.0
    };
    let mut inputs = vec![params.grid.clone()];
    let observed: Vec<Vec3> = match (&params.samples, params.mask_radius) {
        (Some(path), _) => {
            inputs.push(path.clone());
            io::load_samples(path)?
                .iter()
                .filter(|s| s.sdf.abs() <= 0.25 * decoder.encoding.truncation)
                .map(|s| s.position)
                .collect()
        }
        (None, Some(_)) => {
            return Err(Error::Config(
                "--mask-radius needs --samples for the observation points".into(),
            ))
        }
        (None, None) => Vec::new(),
    };
    let (mesh, stats) = with_threads(params.threads, || {
        let source = GridSdf {
            decoder: &decoder,
            grid: &grid,
        };
        let mut cfg = ExtractionConfig::new(resolution);
        cfg.mask_radius = params.mask_radius;
        extract(
            &|p| source.sample(p),
            grid_region(&grid),
            &observed,
            &cfg,
        )
    })?;
    if mesh.is_empty() {
        eprintln!("warning: extraction produced an empty mesh");
    }
    io::save_mesh(&mesh, &params.out)?;
    let wall_ms = start.elapsed().as_millis();
    let manifest = write_manifest(
        "reconstruct",
        params,
        0,
        params.threads,
        inputs,
        vec![params.out.clone()],
        wall_ms,
    )?;
    Ok(ReconstructOutcome {
        out: params.out.clone(),
        manifest,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        masked_cells: stats.masked_cells,
        wall_ms,
    })
}

// ---------------------------------------------------------------------------
// fuse

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuseParams {
    pub frames: Vec<PathBuf>,
    pub voxel_size: f64,
    /// Truncation as a multiple of the voxel size.
    pub truncation_factor: f64,
    pub weight_ref_depth: f64,
    pub max_weight: Option<f64>,
    /// Extraction lattice spacing; 0 = voxel_size.
    pub resolution: f64,
    pub mask_radius: Option<f64>,
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuseOutcome {
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub vertices: usize,
    pub triangles: usize,
    pub observed_voxels: usize,
    pub wall_ms: u128,
}

/// Integrate frames into a volume sized to cover their backprojected points.
pub fn fuse_frames(
    frames: &[DepthFrame],
    voxel_size: f64,
    truncation_factor: f64,
    weight_ref_depth: f64,
    max_weight: Option<f64>,
) -> Result<crate::fusion::TsdfVolume> {
    if frames.is_empty() {
        return Err(Error::Data("no depth frames to fuse".into()));
    }
    let mut bounds = Aabb::empty();
    for f in frames {
        for p in f.valid_points() {
            bounds.grow(p);
        }
    }
    if bounds.is_empty() {
        return Err(Error::Data("frames contain no valid depth".into()));
    }
    let truncation = truncation_factor * voxel_size;
    let padded = bounds.padded(truncation + voxel_size);
    let ext = padded.extent();
    let dims = [
        (ext[0] / voxel_size).ceil() as usize + 1,
        (ext[1] / voxel_size).ceil() as usize + 1,
        (ext[2] / voxel_size).ceil() as usize + 1,
    ];
    let mut vol = crate::fusion::TsdfVolume::new(padded.min, voxel_size, dims, truncation)?;
    vol.max_weight = max_weight;
    for f in frames {
        vol.integrate(f, weight_ref_depth)?;
    }
    Ok(vol)
}

pub fn run_fuse(params: &FuseParams) -> Result<FuseOutcome> {
    if !(params.voxel_size > 0.0) {
        return Err(Error::Config("--voxel-size must be positive".into()));
    }
    if params.frames.is_empty() {
        return Err(Error::Config("at least one depth frame is required".into()));
    }
    let start = Instant::now();
    let frames: Vec<DepthFrame> = params
        .frames
        .iter()
        .map(|p| io::load_depth(p))
        .collect::<Result<_>>()?;
    let (mesh, vol_observed) = with_threads(params.threads, || -> Result<_> {
        let vol = fuse_frames(
            &frames,
            params.voxel_size,
            params.truncation_factor,
            params.weight_ref_depth,
            params.max_weight,
        )?;
        let observed: Vec<Vec3> = if params.mask_radius.is_some() {
            frames.iter().flat_map(|f| f.valid_points()).collect()
        } else {
            Vec::new()
        };
        let resolution = if params.resolution > 0.0 {
            params.resolution
        } else {
            params.voxel_size
        };
        let mut cfg = ExtractionConfig::new(resolution);
        cfg.mask_radius = params.mask_radius;
        let region = Aabb::new(vol.origin, [
            vol.origin[0] + vol.dims[0] as f64 * vol.voxel_size,
            vol.origin[1] + vol.dims[1] as f64 * vol.voxel_size,
            vol.origin[2] + vol.dims[2] as f64 * vol.voxel_size,
        ]);
        let (mesh, _stats) = extract(&|p| vol.query(p), region, &observed, &cfg);
        Ok((mesh, vol.observed_voxel_count()))
    })??;
    if mesh.is_empty() {
        eprintln!("warning: fusion produced an empty mesh");
    }
    io::save_mesh(&mesh, &params.out)?;
    let wall_ms = start.elapsed().as_millis();
    let manifest = write_manifest(
        "fuse",
        params,
        0,
        params.threads,
        params.frames.clone(),
        vec![params.out.clone()],
        wall_ms,
    )?;
    Ok(FuseOutcome {
        out: params.out.clone(),
        manifest,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        observed_voxels: vol_observed,
        wall_ms,
    })
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    pub pred: PathBuf,
    pub gt: PathBuf,
    /// Surface points sampled per mesh.
    pub points: usize,
    pub completion_threshold: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            pred: PathBuf::new(),
            gt: PathBuf::new(),
            points: 30_000,
            completion_threshold: 0.007,
            seed: 1,
            out: PathBuf::from("eval.csv"),
        }
    }
}

/// Area-weighted surface point sampling (no jitter) for metric evaluation.
pub fn sample_surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    use rand::Rng;
    use rand::SeedableRng;
    if mesh.is_empty() {
        return Err(Error::Data("mesh has no triangles".into()));
    }
    let mut cum = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::Data("mesh has zero surface area".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = rng.random_range(0.0..total);
        let t = cum.partition_point(|&c| c < pick).min(cum.len() - 1);
        let [a, b, c] = mesh.triangle_vertices(t);
        let (mut u, mut v) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.push([
            a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
            a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
            a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2]),
        ]);
    }
    Ok(out)
}

pub fn run_eval(params: &EvalParams) -> Result<EvalReport> {
    let pred_mesh = io::load_mesh(&params.pred)?;
    let gt_mesh = io::load_mesh(&params.gt)?;
    let gt_points = sample_surface_points(&gt_mesh, params.points, params.seed)?;
    if pred_mesh.is_empty() {
        // Completion is well-defined (0); distance metrics are not.
        let report = EvalReport {
            chamfer_mean: f64::NAN,
            mesh_accuracy_p90: f64::NAN,
            completion_fraction: 0.0,
            completion_threshold: params.completion_threshold,
            pred_points: 0,
            gt_points: gt_points.len(),
        };
        io::save_eval_report(&report, &params.out)?;
        return Err(Error::Data(
            "prediction mesh is empty: completion 0 reported, distance metrics undefined".into(),
        ));
    }
    let pred_points = sample_surface_points(&pred_mesh, params.points, params.seed ^ 0xe7a1)?;
    let report = EvalReport {
        chamfer_mean: chamfer(&pred_points, &gt_points)?,
        mesh_accuracy_p90: mesh_accuracy(&pred_points, &gt_points)?,
        completion_fraction: completion(&gt_points, &pred_points, params.completion_threshold)?,
        completion_threshold: params.completion_threshold,
        pred_points: pred_points.len(),
        gt_points: gt_points.len(),
    };
    io::save_eval_report(&report, &params.out)?;
    write_manifest(
        "eval",
        params,
        params.seed,
        1,
        vec![params.pred.clone(), params.gt.clone()],
        vec![params.out.clone()],
        0,
    )?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// demo2d

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Demo2dParams {
    pub config: crate::demo2d::Demo2dConfig,
    pub threads: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Demo2dOutcome {
    pub sweep_csv: PathBuf,
    pub manifest: PathBuf,
    pub outcomes: Vec<crate::demo2d::RadiusOutcome>,
    pub wall_ms: u128,
}

pub fn run_demo2d(params: &Demo2dParams) -> Result<Demo2dOutcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&params.out_dir)?;
    let result = with_threads(params.threads, || {
        crate::demo2d::run_sweep(&params.config, Some(&params.out_dir))
    })??;
    let sweep_csv = params.out_dir.join("radius_sweep.csv");
    let rows: Vec<(f64, f64)> = result
        .outcomes
        .iter()
        .map(|o| (o.radius_factor, o.test_error_px))
        .collect();
    io::save_radius_sweep(&rows, &sweep_csv)?;
    let wall_ms = start.elapsed().as_millis();
    let manifest = write_manifest(
        "demo2d",
        params,
        params.config.seed,
        params.threads,
        vec![],
        vec![sweep_csv.clone()],
        wall_ms,
    )?;
    Ok(Demo2dOutcome {
        sweep_csv,
        manifest,
        outcomes: result.outcomes,
        wall_ms,
    })
}

// ---------------------------------------------------------------------------
// replay

/// Re-run the command recorded in a manifest with its recorded parameters.
pub fn replay(manifest: &RunManifest) -> Result<()> {
    match manifest.command.as_str() {
        "train-prior" => {
            let params: TrainPriorParams = serde_json::from_value(manifest.params.clone())?;
            run_train_prior(&params)?;
        }
        "encode" => {
            let params: EncodeParams = serde_json::from_value(manifest.params.clone())?;
            run_encode(&params)?;
        }
        "reconstruct" => {
            let params: ReconstructParams = serde_json::from_value(manifest.params.clone())?;
            run_reconstruct(&params)?;
        }
        "fuse" => {
            let params: FuseParams = serde_json::from_value(manifest.params.clone())?;
            run_fuse(&params)?;
        }
        "eval" => {
            let params: EvalParams = serde_json::from_value(manifest.params.clone())?;
            run_eval(&params)?;
        }
        "demo2d" => {
            let params: Demo2dParams = serde_json::from_value(manifest.params.clone())?;
            run_demo2d(&params)?;
        }
        other => {
            return Err(Error::Config(format!("unknown command '{other}' in manifest")));
        }
    }
    Ok(())
}

/// Render the standard synthetic scan set: `n` views of the given primitive
/// scene on a camera ring, written as DLSD files.
pub fn render_scan_set(
    shapes: &[crate::sampling::PrimitiveShape],
    center: Vec3,
    ring_radius: f64,
    n_views: usize,
    width: u32,
    height: u32,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let cam = synth::default_camera(width, height);
    let mut paths = Vec::new();
    for (i, pose) in synth::camera_ring(center, ring_radius, n_views).iter().enumerate() {
        let frame = crate::sampling::render_depth_primitives(shapes, &cam, pose, ring_radius * 4.0)?;
        let path = out_dir.join(format!("frame_{i:03}.dlsd"));
        io::save_depth(&frame, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
