//! The staged pipeline behind the command-line tool. Each stage reads and
//! updates `manifest.json` in an output directory:
//!
//! `decompose` → `bake` → `train` → `reconstruct` → `eval`
//!
//! plus `stats`, which runs axis selection over a whole directory of meshes.
//! Every artifact is recorded with its SHA-256 and verified before a later
//! stage consumes it. Given the same seed, stages rewrite byte-identical
//! artifacts; wall-clock timings go to `timings.json` and the per-axis
//! training logs, which are not hashed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::axis_select::{greedy_select, AxisSelection, EffectiveAreaMode, SelectConfig};
use crate::mesh::{load_mesh, normalize_to_unit_cube, Normalization, TriangleMesh};
use crate::metrics::{evaluate, MetricReport};
use crate::occupancy::{AxisField, CnDhfModel, HeightField};
use crate::raster::{bake_raster, export_hf_mesh, HeightFieldRaster, Which};
use crate::reconstruct::{export_model_hf_meshes, marching_cubes, voxelize};
use crate::siren::{param_count, width_for_budget, SirenModel};
use crate::train::{train, Batch, OutsideLoss, TrainConfig, TrainReport, TrainTarget};
use crate::{stage_seed, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const SCHEMA_VERSION: u32 = 1;
pub const NORMALIZED_MESH: &str = "normalized.obj";
pub const MODEL_FILE: &str = "model.cndhf";

/// A file inside the output directory and its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeRecord {
    pub config: SelectConfig,
    pub selection: AxisSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakeRecord {
    pub resolution: usize,
    pub rasters: Vec<FileRecord>,
    /// Near and far mesh per axis.
    pub hf_meshes: Vec<FileRecord>,
    pub odd_hit_pixels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub params_budget: usize,
    pub width: usize,
    pub params_per_axis: usize,
    pub iterations: usize,
    pub training_resolution: usize,
    pub config: TrainConfig,
    /// Milestone checkpoints per axis, in milestone order.
    pub checkpoints: Vec<Vec<FileRecord>>,
    pub model: FileRecord,
    pub final_l1: Vec<f64>,
    /// Timing logs (not hashed: they record wall-clock time).
    pub logs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructRecord {
    pub resolution: usize,
    pub mesh: FileRecord,
    pub hf_meshes: Vec<FileRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub report: MetricReport,
    pub json: FileRecord,
    pub csv: FileRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Source mesh path as given on the command line.
    pub shape: String,
    pub shape_sha256: String,
    pub name: String,
    pub normalization: Normalization,
    pub normalized_mesh: FileRecord,
    pub seed: u64,
    /// Completed stages in the order they ran.
    pub stages: Vec<String>,
    pub decompose: DecomposeRecord,
    pub bake: Option<BakeRecord>,
    pub train: Option<TrainRecord>,
    pub reconstruct: Option<ReconstructRecord>,
    pub eval: Option<EvalRecord>,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = out_dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn axis_count(&self) -> usize {
        self.decompose.selection.axes.len()
    }

    /// Every hashed artifact the manifest references.
    pub fn files(&self) -> Vec<&FileRecord> {
        let mut out = vec![&self.normalized_mesh];
        if let Some(b) = &self.bake {
            out.extend(&b.rasters);
            out.extend(&b.hf_meshes);
        }
        if let Some(t) = &self.train {
            out.extend(t.checkpoints.iter().flatten());
            out.push(&t.model);
        }
        if let Some(r) = &self.reconstruct {
            out.push(&r.mesh);
            out.extend(&r.hf_meshes);
        }
        if let Some(e) = &self.eval {
            out.push(&e.json);
            out.push(&e.csv);
        }
        out
    }

    /// Fails if any referenced file is missing or its hash differs.
    pub fn verify(&self, out_dir: &Path) -> Result<()> {
        for f in self.files() {
            verify_file(out_dir, f)?;
        }
        Ok(())
    }

    /// Marks `stage` complete and drops records of stages that depend on it.
    fn complete(&mut self, stage: &str) {
        const ORDER: [&str; 5] = ["decompose", "bake", "train", "reconstruct", "eval"];
        let rank = ORDER.iter().position(|s| *s == stage).expect("known stage");
        for later in &ORDER[rank + 1..] {
            match *later {
                "bake" => self.bake = None,
                "train" => self.train = None,
                "reconstruct" => self.reconstruct = None,
                "eval" => self.eval = None,
                _ => {}
            }
        }
        self.stages
            .retain(|s| ORDER.iter().position(|o| o == s).is_some_and(|r| r < rank));
        self.stages.push(stage.to_string());
    }
}

fn verify_file(out_dir: &Path, record: &FileRecord) -> Result<Vec<u8>> {
    let path = out_dir.join(&record.path);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != record.sha256 {
        return Err(Error::Manifest(format!("hash mismatch for {}", record.path)));
    }
    Ok(bytes)
}

fn write_file(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<FileRecord> {
    let path = out_dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(FileRecord {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
    })
}

fn record_timing(out_dir: &Path, stage: &str, seconds: f64) -> Result<()> {
    let path = out_dir.join(TIMINGS_FILE);
    let mut timings: BTreeMap<String, f64> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    timings.insert(stage.to_string(), seconds);
    std::fs::write(&path, serde_json::to_string_pretty(&timings)?).map_err(|e| Error::io(&path, e))
}

fn load_normalized(out_dir: &Path, manifest: &Manifest) -> Result<TriangleMesh> {
    verify_file(out_dir, &manifest.normalized_mesh)?;
    Ok(load_mesh(&out_dir.join(&manifest.normalized_mesh.path))?.mesh)
}

#[derive(Clone, Debug)]
pub struct DecomposeOptions {
    pub seed: u64,
    pub coverage_target: f64,
    pub n_fibonacci: usize,
    pub effective_area: EffectiveAreaMode,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        let d = SelectConfig::default();
        DecomposeOptions {
            seed: 0,
            coverage_target: d.coverage_target,
            n_fibonacci: d.n_fibonacci,
            effective_area: d.effective_area,
        }
    }
}

/// Loads and normalizes `shape`, selects axes and starts a fresh manifest.
pub fn cmd_decompose(shape: &Path, out_dir: &Path, opts: &DecomposeOptions) -> Result<Manifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let shape_bytes = std::fs::read(shape).map_err(|e| Error::io(shape, e))?;
    let loaded = load_mesh(shape)?;
    let (normalized, normalization) = normalize_to_unit_cube(&loaded.mesh)?;
    let config = SelectConfig {
        n_fibonacci: opts.n_fibonacci,
        coverage_target: opts.coverage_target,
        effective_area: opts.effective_area,
        seed: stage_seed(opts.seed, "decompose"),
    };
    let selection = greedy_select(&normalized, &config)?;
    let normalized_mesh = write_file(out_dir, NORMALIZED_MESH, normalized.to_obj_string().as_bytes())?;
    let name = shape
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "shape".into());
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        shape: shape.to_string_lossy().into_owned(),
        shape_sha256: sha256_hex(&shape_bytes),
        name,
        normalization,
        normalized_mesh,
        seed: opts.seed,
        stages: Vec::new(),
        decompose: DecomposeRecord { config, selection },
        bake: None,
        train: None,
        reconstruct: None,
        eval: None,
    };
    manifest.complete("decompose");
    manifest.save(out_dir)?;
    record_timing(out_dir, "decompose", start.elapsed().as_secs_f64())?;
    Ok(manifest)
}

/// Bakes one ground-truth raster per axis plus its near/far meshes.
pub fn cmd_bake(out_dir: &Path, resolution: usize) -> Result<Manifest> {
    let start = Instant::now();
    let mut manifest = Manifest::load(out_dir)?;
    let mesh = load_normalized(out_dir, &manifest)?;
    let mut record = BakeRecord {
        resolution,
        rasters: Vec::new(),
        hf_meshes: Vec::new(),
        odd_hit_pixels: Vec::new(),
    };
    for (i, axis) in manifest.decompose.selection.axes.iter().enumerate() {
        let bake = bake_raster(&mesh, axis, resolution, resolution)?;
        record.rasters.push(write_file(
            out_dir,
            &format!("raster_{i}.dhfr"),
            &bake.raster.to_bytes(),
        )?);
        for (which, tag) in [(Which::Near, "near"), (Which::Far, "far")] {
            let hf = export_hf_mesh(&bake.raster, axis, which)?;
            record.hf_meshes.push(write_file(
                out_dir,
                &format!("gt_hf_{i}_{tag}.obj"),
                hf.to_obj_string().as_bytes(),
            )?);
        }
        record.odd_hit_pixels.push(bake.odd_hit_pixels);
    }
    manifest.bake = Some(record);
    manifest.complete("bake");
    manifest.save(out_dir)?;
    record_timing(out_dir, "bake", start.elapsed().as_secs_f64())?;
    Ok(manifest)
}

/// Loads the baked rasters after checking their hashes.
pub fn load_rasters(out_dir: &Path, manifest: &Manifest) -> Result<Vec<HeightFieldRaster>> {
    let bake = manifest
        .bake
        .as_ref()
        .ok_or_else(|| Error::Manifest("bake stage has not run".into()))?;
    bake.rasters
        .iter()
        .map(|f| HeightFieldRaster::from_bytes(&verify_file(out_dir, f)?))
        .collect()
}

/// A model whose axes answer from the baked ground-truth rasters.
pub fn ground_truth_model(out_dir: &Path) -> Result<CnDhfModel> {
    let manifest = Manifest::load(out_dir)?;
    let entries = load_rasters(out_dir, &manifest)?
        .into_iter()
        .map(|r| AxisField::new(r.axis, HeightField::Raster(r)))
        .collect();
    CnDhfModel::new(manifest.name.clone(), manifest.normalization, entries)
}

/// Milestones at which checkpoints are written by default.
pub const DEFAULT_MILESTONES: [usize; 3] = [10_000, 100_000, 1_000_000];

/// How each training iteration draws pixels from the baked raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Resample the bake to the training resolution once and use all of it.
    Resampled,
    /// Random square patches of the resampled raster.
    Patch(usize),
    /// Sub-grids of the bake at the training resolution, at a random phase
    /// per iteration. The bake resolution must be a multiple of the
    /// training resolution.
    Subgrid,
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub params: usize,
    pub iterations: usize,
    pub training_resolution: usize,
    pub seed: u64,
    pub outside: OutsideLoss,
    pub laplacian_weight: f64,
    pub learning_rate: f64,
    pub sampling: Sampling,
    pub milestones: Vec<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainOptions {
            params: 17_487,
            iterations: d.iterations,
            training_resolution: 256,
            seed: 0,
            outside: d.outside,
            laplacian_weight: d.laplacian_weight,
            learning_rate: d.learning_rate,
            sampling: Sampling::Subgrid,
            milestones: DEFAULT_MILESTONES.to_vec(),
        }
    }
}

/// Trains one network per axis within the parameter budget and writes
/// milestone checkpoints, the final per-axis networks and `model.cndhf`.
pub fn cmd_train(out_dir: &Path, opts: &TrainOptions) -> Result<(Manifest, Vec<TrainReport>)> {
    let start = Instant::now();
    let mut manifest = Manifest::load(out_dir)?;
    let rasters = load_rasters(out_dir, &manifest)?;
    let width = width_for_budget(opts.params, rasters.len())?;
    let mut milestones: Vec<usize> = opts
        .milestones
        .iter()
        .copied()
        .filter(|&m| m > 0 && m < opts.iterations)
        .collect();
    milestones.sort_unstable();
    milestones.dedup();
    let res = opts.training_resolution;
    let batch = match opts.sampling {
        Sampling::Resampled => Batch::FullRaster,
        Sampling::Patch(size) => Batch::Patch(size),
        Sampling::Subgrid => {
            let bake = manifest.bake.as_ref().map_or(0, |b| b.resolution);
            if res == 0 || bake % res != 0 {
                return Err(Error::InvalidArgument(format!(
                    "sub-grid sampling needs the bake resolution {bake} to be a multiple of {res}"
                )));
            }
            Batch::Subgrid(bake / res)
        }
    };
    let base = TrainConfig {
        batch,
        iterations: opts.iterations,
        learning_rate: opts.learning_rate,
        laplacian_weight: opts.laplacian_weight,
        outside: opts.outside,
        milestones,
        seed: opts.seed,
        ..Default::default()
    };
    let mut checkpoints = Vec::new();
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut logs = Vec::new();
    for (i, raster) in rasters.iter().enumerate() {
        let target = match base.batch {
            Batch::Subgrid(_) => TrainTarget::new(raster),
            _ => TrainTarget::new(&raster.resample(res, res)),
        };
        let config = TrainConfig {
            seed: stage_seed(opts.seed, &format!("train-batch-{i}")),
            ..base.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(opts.seed, &format!("train-init-{i}")));
        let mut net = SirenModel::new(width, &mut rng);
        let mut axis_checkpoints = Vec::new();
        let report = train(&mut net, &target, &config, |it, m| {
            let name = format!("net_{i}_it{it}.cndhf-net");
            axis_checkpoints.push(write_file(out_dir, &name, &m.to_net_bytes(&raster.axis))?);
            Ok(())
        })?;
        let log = format!("train_log_{i}.csv");
        std::fs::write(out_dir.join(&log), report.to_csv()).map_err(|e| Error::io(out_dir.join(&log), e))?;
        logs.push(log);
        net.round_to_f32();
        axis_checkpoints.push(write_file(
            out_dir,
            &format!("net_{i}.cndhf-net"),
            &net.to_net_bytes(&raster.axis),
        )?);
        checkpoints.push(axis_checkpoints);
        entries.push(AxisField::new(raster.axis, HeightField::Siren(net)));
        reports.push(report);
    }
    let model = CnDhfModel::new(manifest.name.clone(), manifest.normalization, entries)?;
    let model_record = write_file(out_dir, MODEL_FILE, &model.to_bytes()?)?;
    manifest.train = Some(TrainRecord {
        params_budget: opts.params,
        width,
        params_per_axis: param_count(width),
        iterations: opts.iterations,
        training_resolution: opts.training_resolution,
        config: base,
        checkpoints,
        model: model_record,
        final_l1: reports.iter().map(|r| r.final_l1).collect(),
        logs,
    });
    manifest.complete("train");
    manifest.save(out_dir)?;
    record_timing(out_dir, "train", start.elapsed().as_secs_f64())?;
    Ok((manifest, reports))
}

/// Loads the trained model after checking its hash.
pub fn load_model(out_dir: &Path, manifest: &Manifest) -> Result<CnDhfModel> {
    let train = manifest
        .train
        .as_ref()
        .ok_or_else(|| Error::Manifest("train stage has not run".into()))?;
    CnDhfModel::from_bytes(&verify_file(out_dir, &train.model)?)
}

/// Voxelizes the trained model, extracts a mesh and exports the predicted
/// height-field meshes. Meshes are in normalized coordinates.
pub fn cmd_reconstruct(out_dir: &Path, resolution: usize) -> Result<Manifest> {
    let start = Instant::now();
    let mut manifest = Manifest::load(out_dir)?;
    let model = load_model(out_dir, &manifest)?;
    let grid = voxelize(&model, resolution)?;
    let mesh = marching_cubes(&grid)?;
    let mesh_record = write_file(out_dir, "reconstruction.obj", mesh.to_obj_string().as_bytes())?;
    let mut hf_meshes = Vec::new();
    for (k, hf) in export_model_hf_meshes(&model, resolution)?.into_iter().enumerate() {
        let tag = if k % 2 == 0 { "near" } else { "far" };
        hf_meshes.push(write_file(
            out_dir,
            &format!("pred_hf_{}_{tag}.obj", k / 2),
            hf.to_obj_string().as_bytes(),
        )?);
    }
    manifest.reconstruct = Some(ReconstructRecord {
        resolution,
        mesh: mesh_record,
        hf_meshes,
    });
    manifest.complete("reconstruct");
    manifest.save(out_dir)?;
    record_timing(out_dir, "reconstruct", start.elapsed().as_secs_f64())?;
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub samples: usize,
    pub iou_resolution: usize,
    pub seed: u64,
    /// Evaluate the baked rasters instead of the trained networks.
    pub ground_truth: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            samples: crate::metrics::DEFAULT_SAMPLES,
            iou_resolution: 128,
            seed: 0,
            ground_truth: false,
        }
    }
}

/// Measures the model against the normalized source mesh. Refuses to run
/// if any recorded artifact changed on disk.
pub fn cmd_eval(out_dir: &Path, opts: &EvalOptions) -> Result<MetricReport> {
    let start = Instant::now();
    let mut manifest = Manifest::load(out_dir)?;
    manifest.verify(out_dir)?;
    let reference = load_normalized(out_dir, &manifest)?;
    let model = if opts.ground_truth {
        ground_truth_model(out_dir)?
    } else {
        load_model(out_dir, &manifest)?
    };
    let report = evaluate(
        &model,
        &reference,
        opts.samples,
        opts.iou_resolution,
        stage_seed(opts.seed, "eval"),
    )?;
    if !opts.ground_truth {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        let json = write_file(out_dir, "metrics.json", json.as_bytes())?;
        let csv = format!("{}\n{}\n", MetricReport::csv_header(), report.csv_row());
        let csv = write_file(out_dir, "metrics.csv", csv.as_bytes())?;
        manifest.eval = Some(EvalRecord {
            report: report.clone(),
            json,
            csv,
        });
        manifest.complete("eval");
        manifest.save(out_dir)?;
    }
    record_timing(
        out_dir,
        if opts.ground_truth { "eval-ground-truth" } else { "eval" },
        start.elapsed().as_secs_f64(),
    )?;
    Ok(report)
}

/// Evaluates a standalone `.cndhf` file against a mesh in its original
/// coordinates; the model's normalization maps the mesh into place.
pub fn eval_model_file(model_path: &Path, reference: &Path, opts: &EvalOptions) -> Result<MetricReport> {
    let model = CnDhfModel::load(model_path)?;
    let norm = model.normalization;
    let mesh = load_mesh(reference)?.mesh.map_vertices(|p| norm.apply(p));
    evaluate(
        &model,
        &mesh,
        opts.samples,
        opts.iou_resolution,
        stage_seed(opts.seed, "eval"),
    )
}

/// One row of the coverage table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub shape: String,
    pub coverage: [f64; 4],
    pub visible_pct: f64,
    pub axes: usize,
}

pub const COVERAGE_HEADER: &str = "shape,coverage_1dhf,coverage_2dhf,coverage_3dhf,coverage_4dhf,visible_pct,axes";

impl CoverageRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            self.shape,
            100.0 * self.coverage[0],
            100.0 * self.coverage[1],
            100.0 * self.coverage[2],
            100.0 * self.coverage[3],
            self.visible_pct,
            self.axes
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub rows: Vec<CoverageRow>,
    /// Column means over all shapes; `axes` is rounded.
    pub aggregate: CoverageRow,
}

impl CoverageStats {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{COVERAGE_HEADER}\n");
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }
}

pub fn coverage_row(name: &str, mesh: &TriangleMesh, opts: &DecomposeOptions) -> Result<CoverageRow> {
    let (normalized, _) = normalize_to_unit_cube(mesh)?;
    let config = SelectConfig {
        n_fibonacci: opts.n_fibonacci,
        coverage_target: opts.coverage_target,
        effective_area: opts.effective_area,
        seed: stage_seed(opts.seed, "decompose"),
    };
    let sel = greedy_select(&normalized, &config)?;
    Ok(CoverageRow {
        shape: name.to_string(),
        coverage: sel.coverage_curve,
        visible_pct: 100.0 * sel.visible_fraction,
        axes: sel.axes.len(),
    })
}

/// Mesh files (`.obj`, `.stl`) directly inside `dir`, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("stl"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .obj or .stl files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Axis selection over every mesh in `dir`: one row per shape plus the
/// column means.
pub fn cmd_stats(dir: &Path, opts: &DecomposeOptions) -> Result<CoverageStats> {
    let mut rows = Vec::new();
    for path in corpus_files(dir)? {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        rows.push(coverage_row(&name, &load_mesh(&path)?.mesh, opts)?);
    }
    let n = rows.len() as f64;
    let mut coverage = [0.0; 4];
    for (k, c) in coverage.iter_mut().enumerate() {
        *c = rows.iter().map(|r| r.coverage[k]).sum::<f64>() / n;
    }
    let aggregate = CoverageRow {
        shape: "aggregate".into(),
        coverage,
        visible_pct: rows.iter().map(|r| r.visible_pct).sum::<f64>() / n,
        axes: (rows.iter().map(|r| r.axes).sum::<usize>() as f64 / n).round() as usize,
    };
    Ok(CoverageStats { rows, aggregate })
}
