//! Planar receptive-field study: train a 2D variant of the decoder
//! (input = code + 2 coordinates) on scenes of simple 2D primitives and
//! measure test SDF error inside each grid cell while sweeping the extended
//! receptive-field radius.
//!
//! Scene units are pixels. Every cell that the surface passes through gets a
//! latent code; training samples for a cell are all samples within
//! `radius_factor * cell_size` of its center under the L-infinity norm, and
//! test samples are fresh points inside the cell itself (indicator rule).

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::decoder::{DecodeScratch, Decoder, SdfEncoding};
use crate::error::{Error, Result};
use crate::latent_grid::CODE_INIT_SIGMA;
use crate::nn::{AdamState, Mlp, MlpSpec};

type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub enum Shape2d {
    Circle { center: Vec2, radius: f64 },
    Rect { center: Vec2, half: Vec2, angle: f64 },
    Triangle { a: Vec2, b: Vec2, c: Vec2 },
}

impl Shape2d {
    pub fn sdf(&self, p: Vec2) -> f64 {
        match *self {
            Shape2d::Circle { center, radius } => {
                ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() - radius
            }
            Shape2d::Rect { center, half, angle } => {
                let (s, c) = angle.sin_cos();
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let lx = (c * dx + s * dy).abs() - half[0];
                let ly = (-s * dx + c * dy).abs() - half[1];
                let ox = lx.max(0.0);
                let oy = ly.max(0.0);
                (ox * ox + oy * oy).sqrt() + lx.max(ly).min(0.0)
            }
            Shape2d::Triangle { a, b, c } => sd_triangle(p, a, b, c),
        }
    }
}

fn sd_triangle(p: Vec2, p0: Vec2, p1: Vec2, p2: Vec2) -> f64 {
    let sub = |a: Vec2, b: Vec2| [a[0] - b[0], a[1] - b[1]];
    let dot = |a: Vec2, b: Vec2| a[0] * b[0] + a[1] * b[1];
    let cross = |a: Vec2, b: Vec2| a[0] * b[1] - a[1] * b[0];
    let e0 = sub(p1, p0);
    let e1 = sub(p2, p1);
    let e2 = sub(p0, p2);
    let v0 = sub(p, p0);
    let v1 = sub(p, p1);
    let v2 = sub(p, p2);
    let proj = |v: Vec2, e: Vec2| {
        let t = (dot(v, e) / dot(e, e)).clamp(0.0, 1.0);
        [v[0] - e[0] * t, v[1] - e[1] * t]
    };
    let pq0 = proj(v0, e0);
    let pq1 = proj(v1, e1);
    let pq2 = proj(v2, e2);
    let s = cross(e0, e2).signum();
    let d0 = [dot(pq0, pq0), s * cross(v0, e0)];
    let d1 = [dot(pq1, pq1), s * cross(v1, e1)];
    let d2 = [dot(pq2, pq2), s * cross(v2, e2)];
    let d = [
        d0[0].min(d1[0]).min(d2[0]),
        d0[1].min(d1[1]).min(d2[1]),
    ];
    -d[0].sqrt() * d[1].signum()
}

pub fn scene_sdf_2d(shapes: &[Shape2d], p: Vec2) -> f64 {
    shapes
        .iter()
        .map(|s| s.sdf(p))
        .fold(f64::INFINITY, f64::min)
}

/// The standard study scene: a circle, a rotated rectangle, and a triangle
/// placed inside the pixel domain.
pub fn standard_scene(domain: f64, seed: u64) -> Vec<Shape2d> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain;
    let mut pt = |lo: f64, hi: f64| -> f64 { rng.random_range(lo * d..hi * d) };
    let circle = Shape2d::Circle {
        center: [pt(0.2, 0.4), pt(0.2, 0.4)],
        radius: pt(0.08, 0.16),
    };
    let rect_center = [pt(0.55, 0.8), pt(0.25, 0.45)];
    let rect_half = [pt(0.06, 0.14), pt(0.05, 0.1)];
    let a = [pt(0.15, 0.45), pt(0.55, 0.85)];
    let b = [a[0] + pt(0.1, 0.25), a[1] + pt(-0.08, 0.08)];
    let c = [a[0] + pt(0.0, 0.12), a[1] - pt(0.1, 0.25)];
    drop(pt);
    let rect = Shape2d::Rect {
        center: rect_center,
        half: rect_half,
        angle: rng.random_range(0.0..std::f64::consts::PI),
    };
    let tri = Shape2d::Triangle { a, b, c };
    vec![circle, rect, tri]
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Demo2dConfig {
    /// Side of the square pixel domain.
    pub domain: f64,
    pub cell_size: f64,
    pub code_dim: usize,
    pub hidden_dim: usize,
    pub train_samples_per_cell: usize,
    pub test_samples_per_cell: usize,
    pub steps: usize,
    pub samples_per_cell_per_step: usize,
    pub lr: f64,
    pub radius_factors: Vec<f64>,
    pub seed: u64,
}

impl Default for Demo2dConfig {
    fn default() -> Self {
        Self {
            domain: 128.0,
            cell_size: 16.0,
            code_dim: 32,
            hidden_dim: 64,
            train_samples_per_cell: 1000,
            test_samples_per_cell: 100,
            steps: 1200,
            samples_per_cell_per_step: 24,
            lr: 0.01,
            radius_factors: vec![1.0, 1.25, 1.5, 1.75, 2.0],
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RadiusOutcome {
    pub radius_factor: f64,
    /// Mean |predicted - true| SDF over in-cell test samples, in pixels.
    pub test_error_px: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Demo2dResult {
    pub outcomes: Vec<RadiusOutcome>,
    pub active_cells: usize,
}

#[derive(Clone, Copy)]
struct Sample2d {
    pos: Vec2,
    sdf: f64,
}

struct Study {
    shapes: Vec<Shape2d>,
    cells: Vec<(i32, i32)>,
    train: Vec<Sample2d>,
    test_per_cell: Vec<Vec<Sample2d>>,
    encoding: SdfEncoding,
    cell_size: f64,
}

/// A point on the scene surface (walks each shape's boundary by arc-length).
fn surface_point_2d<R: Rng>(shapes: &[Shape2d], domain: f64, rng: &mut R) -> Vec2 {
    // Rejection-free per shape: parametrize the boundary.
    let k = rng.random_range(0..shapes.len());
    match shapes[k] {
        Shape2d::Circle { center, radius } => {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        }
        Shape2d::Rect { center, half, angle } => {
            let per = 4.0 * (half[0] + half[1]);
            let mut t = rng.random_range(0.0..per);
            let local = if t < 2.0 * half[0] {
                [t - half[0], -half[1]]
            } else if t < 2.0 * half[0] + 2.0 * half[1] {
                t -= 2.0 * half[0];
                [half[0], t - half[1]]
            } else if t < 4.0 * half[0] + 2.0 * half[1] {
                t -= 2.0 * half[0] + 2.0 * half[1];
                [half[0] - t, half[1]]
            } else {
                t -= 4.0 * half[0] + 2.0 * half[1];
                [-half[0], half[1] - t]
            };
            let (s, c) = angle.sin_cos();
            [
                center[0] + c * local[0] - s * local[1],
                center[1] + s * local[0] + c * local[1],
            ]
        }
        Shape2d::Triangle { a, b, c } => {
            let len = |p: Vec2, q: Vec2| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            let (l0, l1, l2) = (len(a, b), len(b, c), len(c, a));
            let mut t = rng.random_range(0.0..l0 + l1 + l2);
            let (p, q, l) = if t < l0 {
                (a, b, l0)
            } else if t < l0 + l1 {
                t -= l0;
                (b, c, l1)
            } else {
                t -= l0 + l1;
                (c, a, l2)
            };
            let u = t / l;
            [p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])]
        }
    }
    .map(|v| v.clamp(0.0, domain))
}

fn build_study(cfg: &Demo2dConfig) -> Result<Study> {
    if !(cfg.cell_size > 0.0 && cfg.domain >= cfg.cell_size) {
        return Err(Error::Config("domain must cover at least one cell".into()));
    }
    let shapes = standard_scene(cfg.domain, cfg.seed);
    let n = (cfg.domain / cfg.cell_size).floor() as i32;
    let encoding = SdfEncoding::for_voxel_size(cfg.cell_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x2d2d).wrapping_add(17));

    // Points sampled around the shapes at two jitter scales, the same scheme
    // the 3D corpus uses; a little uniform coverage fills in free space.
    let cell_count = (n * n) as usize;
    let target_train = cfg.train_samples_per_cell * cell_count / 3;
    let near = Normal::new(0.0, 0.125 * cfg.cell_size).expect("sigma");
    let far = Normal::new(0.0, 0.5 * cfg.cell_size).expect("sigma");
    let draw = |rng: &mut ChaCha8Rng, k: usize| -> Sample2d {
        let base = surface_point_2d(&shapes, cfg.domain, rng);
        let dist = if k % 2 == 0 { &near } else { &far };
        let p = [
            (base[0] + dist.sample(rng)).clamp(0.0, cfg.domain),
            (base[1] + dist.sample(rng)).clamp(0.0, cfg.domain),
        ];
        Sample2d {
            pos: p,
            sdf: scene_sdf_2d(&shapes, p),
        }
    };
    let mut train: Vec<Sample2d> = (0..target_train).map(|k| draw(&mut rng, k)).collect();
    for _ in 0..target_train / 8 {
        let p = [
            rng.random_range(0.0..cfg.domain),
            rng.random_range(0.0..cfg.domain),
        ];
        train.push(Sample2d {
            pos: p,
            sdf: scene_sdf_2d(&shapes, p),
        });
    }

    // Cells the surface passes through become active.
    let mut near_count = vec![0usize; cell_count];
    for s in &train {
        if s.sdf.abs() <= 0.25 * encoding.truncation {
            let i = ((s.pos[0] / cfg.cell_size).floor() as i32).clamp(0, n - 1);
            let j = ((s.pos[1] / cfg.cell_size).floor() as i32).clamp(0, n - 1);
            near_count[(i * n + j) as usize] += 1;
        }
    }
    let cells: Vec<(i32, i32)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| near_count[(i * n + j) as usize] >= 4)
        .collect();
    if cells.is_empty() {
        return Err(Error::Data("no cell intersects the scene surface".into()));
    }

    // Test samples are uniform inside each active cell, so the error also
    // measures how well the code extrapolates away from the surface band its
    // training samples concentrate on.
    let test_per_cell: Vec<Vec<Sample2d>> = cells
        .iter()
        .map(|(i, j)| {
            let lo = [*i as f64 * cfg.cell_size, *j as f64 * cfg.cell_size];
            (0..cfg.test_samples_per_cell)
                .map(|_| {
                    let p = [
                        lo[0] + rng.random_range(0.0..cfg.cell_size),
                        lo[1] + rng.random_range(0.0..cfg.cell_size),
                    ];
                    Sample2d {
                        pos: p,
                        sdf: scene_sdf_2d(&shapes, p),
                    }
                })
                .collect()
        })
        .collect();
    Ok(Study {
        shapes,
        cells,
        train,
        test_per_cell,
        encoding,
        cell_size: cfg.cell_size,
    })
}

fn cell_center(cell: (i32, i32), cell_size: f64) -> Vec2 {
    [
        (cell.0 as f64 + 0.5) * cell_size,
        (cell.1 as f64 + 0.5) * cell_size,
    ]
}

struct TrainedRadius {
    decoder: Decoder<f32>,
    codes: Vec<Vec<f32>>,
    final_train_loss: f64,
}

/// Joint code + decoder training for one receptive-field radius.
///
/// `factor` scales the linear extent of the receptive square: a cell's
/// training samples come from within `factor * cell_size / 2` of its center
/// under the L-infinity norm. Factor 1.0 is therefore exactly the disjoint
/// division of space whose border artifacts motivate the study; larger
/// factors reach into the neighboring cells.
fn train_radius(cfg: &Demo2dConfig, study: &Study, factor: f64) -> Result<TrainedRadius> {
    // Gather each cell's extended-field training set (positions in the cell's
    // normalized local frame, targets in tanh space).
    let per_cell: Vec<Vec<([f32; 2], f32)>> = study
        .cells
        .par_iter()
        .map(|cell| {
            let c = cell_center(*cell, study.cell_size);
            let r = 0.5 * factor * study.cell_size;
            study
                .train
                .iter()
                .filter(|s| {
                    (s.pos[0] - c[0]).abs() < r && (s.pos[1] - c[1]).abs() < r
                })
                .map(|s| {
                    (
                        [
                            ((s.pos[0] - c[0]) / study.cell_size) as f32,
                            ((s.pos[1] - c[1]) / study.cell_size) as f32,
                        ],
                        study.encoding.encode_target(s.sdf) as f32,
                    )
                })
                .collect()
        })
        .collect();

    let spec = MlpSpec::new(cfg.code_dim + 2, cfg.hidden_dim, 4, 1);
    let mut decoder = Decoder::new(
        Mlp::<f32>::init(spec, cfg.seed ^ 0xdec0de)?,
        cfg.code_dim,
        study.encoding,
    )?;
    let n_cells = study.cells.len();
    let normal = Normal::new(0.0, CODE_INIT_SIGMA).expect("valid sigma");
    let mut codes: Vec<Vec<f32>> = (0..n_cells)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64).wrapping_mul(0x9e37));
            (0..cfg.code_dim)
                .map(|_| normal.sample(&mut rng) as f32)
                .collect()
        })
        .collect();
    let n_params = decoder.mlp().params().len();
    let mut adam_dec = AdamState::<f32>::new(n_params, cfg.lr);
    let mut adam_codes: Vec<AdamState<f32>> = (0..n_cells)
        .map(|_| AdamState::new(cfg.code_dim, cfg.lr))
        .collect();
    let reg_weight = 1e-4f32;
    let decay_steps = [cfg.steps / 2, cfg.steps * 3 / 4];
    let mut lr = cfg.lr;

    let mut last_loss = f64::NAN;
    for step in 0..cfg.steps {
        if step > 0 && decay_steps.contains(&step) {
            lr *= 0.5;
            adam_dec.lr = lr as f32;
            for a in &mut adam_codes {
                a.lr = lr as f32;
            }
        }
        let chunk_len = n_cells.div_ceil(8).max(1);
        let ids: Vec<usize> = (0..n_cells).collect();
        let results: Vec<(Vec<f32>, Vec<(usize, Vec<f32>, f64)>)> = ids
            .par_chunks(chunk_len)
            .map(|chunk| {
                let mut pg = vec![0.0f32; n_params];
                let mut scratch = DecodeScratch::new();
                let mut igb = Vec::new();
                let mut per = Vec::with_capacity(chunk.len());
                for &k in chunk {
                    let pool = &per_cell[k];
                    let code = &codes[k];
                    let mut cg = vec![0.0f32; cfg.code_dim];
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        cfg.seed ^ (step as u64) << 20 ^ (k as u64),
                    );
                    let mut data = 0.0f64;
                    let picks = cfg.samples_per_cell_per_step.min(pool.len().max(1));
                    if !pool.is_empty() {
                        let inv = 1.0 / picks as f32;
                        for _ in 0..picks {
                            let s = pool[rng.random_range(0..pool.len())];
                            let pre = decoder.forward_t(&mut scratch, code, &s.0);
                            let th = pre.tanh();
                            let resid = th - s.1;
                            data += resid.abs() as f64;
                            let up = resid.signum() * (1.0 - th * th) * inv;
                            decoder.backward(&mut scratch, up, Some(&mut pg), &mut cg, &mut igb);
                        }
                        data /= picks as f64;
                    }
                    for (g, z) in cg.iter_mut().zip(code.iter()) {
                        *g += 2.0 * reg_weight * *z;
                    }
                    let reg: f64 =
                        code.iter().map(|z| (*z as f64) * (*z as f64)).sum::<f64>() * reg_weight as f64;
                    per.push((k, cg, data + reg));
                }
                (pg, per)
            })
            .collect();
        let mut grad_sum = vec![0.0f32; n_params];
        let mut loss_sum = 0.0;
        for (pg, per) in results {
            for (d, s) in grad_sum.iter_mut().zip(pg.iter()) {
                *d += s;
            }
            for (k, cg, l) in per {
                if !l.is_finite() {
                    return Err(Error::Numerical(format!("2D study diverged at step {step}")));
                }
                adam_codes[k].step(&mut codes[k], &cg);
                loss_sum += l;
            }
        }
        adam_dec.step(decoder.mlp_mut().params_mut(), &grad_sum);
        last_loss = loss_sum / n_cells as f64;
    }
    Ok(TrainedRadius {
        decoder,
        codes,
        final_train_loss: last_loss,
    })
}

/// Predicted SDF in scene units: the exact inverse of the target squashing
/// (`pre / target_scale`), clamped to the truncation band.
fn predict_sdf(trained: &TrainedRadius, study: &Study, scratch: &mut DecodeScratch<f32>, k: usize, local: [f32; 2]) -> f64 {
    let pre = trained.decoder.forward_t(scratch, &trained.codes[k], &local) as f64;
    study.encoding.clamp(pre / study.encoding.target_scale())
}

/// Mean |predicted - true| SDF in pixels over in-cell test samples whose
/// ground truth lies strictly inside the truncation band (values at the band
/// edge saturate on both sides and carry no information about fit quality).
fn test_error(study: &Study, trained: &TrainedRadius) -> f64 {
    let mut scratch = DecodeScratch::new();
    let mut total = 0.0;
    let mut n = 0usize;
    for (k, cell) in study.cells.iter().enumerate() {
        let c = cell_center(*cell, study.cell_size);
        for s in &study.test_per_cell[k] {
            if s.sdf.abs() >= study.encoding.truncation {
                continue;
            }
            let local = [
                ((s.pos[0] - c[0]) / study.cell_size) as f32,
                ((s.pos[1] - c[1]) / study.cell_size) as f32,
            ];
            let pred = predict_sdf(trained, study, &mut scratch, k, local);
            total += (pred - s.sdf).abs();
            n += 1;
        }
    }
    total / n.max(1) as f64
}

/// Run the full radius sweep, optionally writing ground-truth and per-radius
/// prediction contour images (PPM) into `image_dir`.
pub fn run_sweep(cfg: &Demo2dConfig, image_dir: Option<&Path>) -> Result<Demo2dResult> {
    if cfg.steps == 0 || cfg.radius_factors.is_empty() {
        return Err(Error::Config(
            "demo2d needs steps > 0 and at least one radius".into(),
        ));
    }
    let study = build_study(cfg)?;
    if let Some(dir) = image_dir {
        std::fs::create_dir_all(dir)?;
        let gt = |p: Vec2| Some(scene_sdf_2d(&study.shapes, p));
        render_contour(&study, gt, &dir.join("gt.ppm"))?;
    }
    let mut outcomes = Vec::new();
    for &factor in &cfg.radius_factors {
        let trained = train_radius(cfg, &study, factor)?;
        let err = test_error(&study, &trained);
        if let Some(dir) = image_dir {
            let cells = &study.cells;
            let cell_size = study.cell_size;
            let pred = |p: Vec2| -> Option<f64> {
                let i = (p[0] / cell_size).floor() as i32;
                let j = (p[1] / cell_size).floor() as i32;
                let k = cells.iter().position(|c| *c == (i, j))?;
                let c = cell_center((i, j), cell_size);
                let local = [
                    ((p[0] - c[0]) / cell_size) as f32,
                    ((p[1] - c[1]) / cell_size) as f32,
                ];
                let mut scratch = DecodeScratch::new();
                Some(predict_sdf(&trained, &study, &mut scratch, k, local))
            };
            render_contour(&study, pred, &dir.join(format!("pred_r{factor:.2}.ppm")))?;
        }
        outcomes.push(RadiusOutcome {
            radius_factor: factor,
            test_error_px: err,
            final_train_loss: trained.final_train_loss,
        });
    }
    Ok(Demo2dResult {
        outcomes,
        active_cells: study.cells.len(),
    })
}

/// Rasterize an SDF over the domain: blue negative, red positive, green band
/// near the zero crossing, gray where the field is unavailable.
fn render_contour<F>(study: &Study, field: F, path: &Path) -> Result<()>
where
    F: Fn(Vec2) -> Option<f64>,
{
    let size = 256usize;
    let extent = study
        .cells
        .iter()
        .map(|c| ((c.0 + 1) as f64).max((c.1 + 1) as f64))
        .fold(1.0f64, f64::max)
        * study.cell_size;
    let mut rgb = vec![0u8; size * size * 3];
    for y in 0..size {
        for x in 0..size {
            let p = [
                (x as f64 + 0.5) / size as f64 * extent,
                (y as f64 + 0.5) / size as f64 * extent,
            ];
            let px = &mut rgb[(y * size + x) * 3..(y * size + x) * 3 + 3];
            match field(p) {
                Some(v) => {
                    let t = (v / study.encoding.truncation).clamp(-1.0, 1.0);
                    if t.abs() < 0.03 {
                        px.copy_from_slice(&[40, 200, 40]);
                    } else if t > 0.0 {
                        let k = (255.0 * (1.0 - t * 0.8)) as u8;
                        px.copy_from_slice(&[255, k, k]);
                    } else {
                        let k = (255.0 * (1.0 + t * 0.8)) as u8;
                        px.copy_from_slice(&[k, k, 255]);
                    }
                }
                None => px.copy_from_slice(&[128, 128, 128]),
            }
        }
    }
    crate::io::save_ppm(path, size, size, &rgb)
}
