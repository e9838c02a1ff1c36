use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cndhf::axis_select::{EffectiveAreaMode, DEFAULT_COVERAGE_TARGET, DEFAULT_FIBONACCI};
use cndhf::pipeline::{self, DecomposeOptions, EvalOptions, Sampling, TrainOptions};
use cndhf::train::OutsideLoss;

/// Compact neural double height fields: decompose a mesh into DHF axes,
/// bake ground truth, train per-axis networks, reconstruct and evaluate.
#[derive(Parser)]
#[command(name = "cndhf", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Root seed; every stage derives its own from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Raster resolution for `bake`, grid resolution for `reconstruct`,
    /// IoU grid resolution for `eval`.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Fraction of visible effective area the selected axes must cover.
    #[arg(long, global = true, default_value_t = DEFAULT_COVERAGE_TARGET)]
    coverage_target: f64,
    /// Total parameter budget shared by all axes.
    #[arg(long, global = true, default_value_t = 17_487)]
    params: usize,
    /// Training iterations per axis.
    #[arg(long, global = true, default_value_t = 2000)]
    iterations: usize,
    /// Working directory holding the manifest and all artifacts.
    #[arg(long, global = true, default_value = "cndhf-out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a mesh and select its DHF axes.
    Decompose {
        mesh: PathBuf,
        #[arg(long, value_enum, default_value_t = EffectiveArea::Printed)]
        effective_area: EffectiveArea,
        /// Number of spherical Fibonacci candidates (the three major axes
        /// are always added).
        #[arg(long, default_value_t = DEFAULT_FIBONACCI)]
        fibonacci: usize,
    },
    /// Bake one ground-truth raster and two height-field meshes per axis.
    Bake,
    /// Train one network per axis.
    Train {
        /// Resolution the ground-truth rasters are resampled to for training.
        #[arg(long, default_value_t = 256)]
        training_resolution: usize,
        #[arg(long, value_enum, default_value_t = Outside::Hinge)]
        outside: Outside,
        /// Weight of the Laplacian term.
        #[arg(long, default_value_t = 10.0)]
        laplacian_weight: f64,
        #[arg(long, default_value_t = 1e-4)]
        learning_rate: f64,
        /// Where each iteration's pixels come from: `subgrid` takes a grid
        /// of the training resolution from the full bake at a random offset
        /// (the bake resolution must be a multiple of it), `resampled` uses
        /// one fixed resampling of the bake, `patch` random squares of it.
        #[arg(long, value_enum, default_value_t = SamplingArg::Subgrid)]
        sampling: SamplingArg,
        /// Side of the square patches for `--sampling patch`.
        #[arg(long, default_value_t = 64)]
        patch_size: usize,
        /// Iteration counts at which to write checkpoints.
        #[arg(long, value_delimiter = ',', default_values_t = pipeline::DEFAULT_MILESTONES)]
        milestones: Vec<usize>,
    },
    /// Voxelize the trained model and extract meshes.
    Reconstruct,
    /// Chamfer-L1, Hausdorff and IoU against the source mesh.
    Eval {
        /// Stabbed surface samples per side.
        #[arg(long, default_value_t = cndhf::metrics::DEFAULT_SAMPLES)]
        samples: usize,
        /// Evaluate the baked rasters rather than the trained networks.
        #[arg(long)]
        ground_truth: bool,
        /// Evaluate a standalone `.cndhf` file instead of the manifest.
        #[arg(long, requires = "reference")]
        model: Option<PathBuf>,
        /// Reference mesh for `--model`, in its original coordinates.
        #[arg(long, requires = "model")]
        reference: Option<PathBuf>,
    },
    /// Coverage as a function of DHF count for every mesh in a directory.
    Stats {
        dir: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write one of the built-in test shapes as OBJ.
    Fixture { name: String, path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum EffectiveArea {
    Printed,
    Inverse,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Subgrid,
    Resampled,
    Patch,
}

#[derive(Clone, Copy, ValueEnum)]
enum Outside {
    Hinge,
    Regress,
}

fn decompose_options(g: &Global, effective_area: EffectiveArea, fibonacci: usize) -> DecomposeOptions {
    DecomposeOptions {
        seed: g.seed,
        coverage_target: g.coverage_target,
        n_fibonacci: fibonacci,
        effective_area: match effective_area {
            EffectiveArea::Printed => EffectiveAreaMode::AsPrinted,
            EffectiveArea::Inverse => EffectiveAreaMode::Inverse,
        },
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    match cli.command {
        Command::Decompose {
            mesh,
            effective_area,
            fibonacci,
        } => {
            let m = pipeline::cmd_decompose(&mesh, &g.out_dir, &decompose_options(g, effective_area, fibonacci))?;
            let sel = &m.decompose.selection;
            println!("N = {}", sel.axes.len());
            for (axis, cum) in sel.axes.iter().zip(&sel.cumulative_coverage) {
                let d = axis.direction;
                println!(
                    "  axis ({:+.4}, {:+.4}, {:+.4})  cumulative {:.4}%",
                    d[0],
                    d[1],
                    d[2],
                    100.0 * cum
                );
            }
            let row = pipeline::CoverageRow {
                shape: m.name.clone(),
                coverage: sel.coverage_curve,
                visible_pct: 100.0 * sel.visible_fraction,
                axes: sel.axes.len(),
            };
            println!("{}\n{}", pipeline::COVERAGE_HEADER, row.csv());
        }
        Command::Bake => {
            let m = pipeline::cmd_bake(&g.out_dir, g.resolution.unwrap_or(512))?;
            let bake = m.bake.as_ref().expect("bake record");
            println!("baked {} rasters at {}^2", bake.rasters.len(), bake.resolution);
            for (i, odd) in bake.odd_hit_pixels.iter().enumerate() {
                if *odd > 0 {
                    eprintln!("warning: axis {i}: {odd} pixels crossed the surface an odd number of times");
                }
            }
        }
        Command::Train {
            training_resolution,
            outside,
            laplacian_weight,
            learning_rate,
            sampling,
            patch_size,
            milestones,
        } => {
            let opts = TrainOptions {
                params: g.params,
                iterations: g.iterations,
                training_resolution,
                seed: g.seed,
                outside: match outside {
                    Outside::Hinge => OutsideLoss::Hinge,
                    Outside::Regress => OutsideLoss::RegressConstants,
                },
                laplacian_weight,
                learning_rate,
                sampling: match sampling {
                    SamplingArg::Subgrid => Sampling::Subgrid,
                    SamplingArg::Resampled => Sampling::Resampled,
                    SamplingArg::Patch => Sampling::Patch(patch_size),
                },
                milestones,
            };
            let (m, reports) = pipeline::cmd_train(&g.out_dir, &opts)?;
            let t = m.train.as_ref().expect("train record");
            println!("width {} ({} parameters per axis)", t.width, t.params_per_axis);
            for (i, r) in reports.iter().enumerate() {
                println!("  axis {i}: valid-pixel L1 {:.3e} in {:.1}s", r.final_l1, r.seconds);
            }
        }
        Command::Reconstruct => {
            let m = pipeline::cmd_reconstruct(&g.out_dir, g.resolution.unwrap_or(256))?;
            let r = m.reconstruct.as_ref().expect("reconstruct record");
            println!("wrote {} and {} height-field meshes", r.mesh.path, r.hf_meshes.len());
        }
        Command::Eval {
            samples,
            ground_truth,
            model,
            reference,
        } => {
            let opts = EvalOptions {
                samples,
                iou_resolution: g.resolution.unwrap_or(128),
                seed: g.seed,
                ground_truth,
            };
            let report = match (model, reference) {
                (Some(model), Some(reference)) => pipeline::eval_model_file(&model, &reference, &opts)?,
                _ => pipeline::cmd_eval(&g.out_dir, &opts)?,
            };
            println!("{}\n{}", cndhf::metrics::MetricReport::csv_header(), report.csv_row());
        }
        Command::Stats { dir, csv } => {
            let stats = pipeline::cmd_stats(&dir, &decompose_options(g, EffectiveArea::Printed, DEFAULT_FIBONACCI))?;
            let text = stats.to_csv();
            match csv {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Fixture { name, path } => {
            let Some(mesh) = cndhf::fixtures::by_name(&name) else {
                bail!(
                    "unknown fixture {name:?}; available: {}",
                    cndhf::fixtures::NAMES.join(", ")
                );
            };
            mesh.write_obj(&path)?;
            println!("wrote {} ({} triangles)", path.display(), mesh.num_triangles());
        }
    }
    Ok(())
}
