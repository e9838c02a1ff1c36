//! Choosing DHF axes: candidate directions, per-triangle visibility,
//! effective areas and greedy coverage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvh::{Bvh, Ray};
use crate::mesh::{sample_surface_points, SurfaceSample, TriangleMesh, Vec3};
use crate::rotation::DhfAxis;
use crate::{par, Error, Result};

pub const DEFAULT_FIBONACCI: usize = 50;
pub const DEFAULT_COVERAGE_TARGET: f64 = 0.999;
/// Offset of visibility ray origins along the ray, in normalized units.
pub const RAY_OFFSET: f64 = 1e-4;
const DEDUP_ANGLE: f64 = 1e-6;

/// The three major axes followed by `n_fibonacci` spherical Fibonacci
/// points, dropping any direction within `1e-6` rad of an earlier one.
pub fn candidate_directions(n_fibonacci: usize) -> Vec<Vec3> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let mut out = vec![Vec3::x(), Vec3::y(), Vec3::z()];
    for i in 0..n_fibonacci {
        let z = 1.0 - (2 * i + 1) as f64 / n_fibonacci as f64;
        let phi = 2.0 * std::f64::consts::PI * ((i as f64 + 0.5) / golden).fract();
        let r = (1.0 - z * z).max(0.0).sqrt();
        let d = Vec3::new(r * phi.cos(), r * phi.sin(), z).normalize();
        if out.iter().all(|e| e.angle(&d) > DEDUP_ANGLE) {
            out.push(d);
        }
    }
    out
}

/// Per-triangle visibility along `±axis`. A sample is visible when at least
/// one of the two rays leaving it escapes the mesh; a triangle is visible
/// when all of its samples are.
pub fn triangle_visibility(bvh: &Bvh, num_triangles: usize, samples: &[SurfaceSample], axis: &Vec3) -> Vec<bool> {
    let d = axis.normalize();
    let mut visible = vec![true; num_triangles];
    for s in samples {
        if !visible[s.triangle] {
            continue;
        }
        let up = Ray::new(s.position + d * RAY_OFFSET, d);
        let down = Ray::new(s.position - d * RAY_OFFSET, -d);
        if bvh.occluded(&up, 0.0, f64::INFINITY) && bvh.occluded(&down, 0.0, f64::INFINITY) {
            visible[s.triangle] = false;
        }
    }
    visible
}

/// Visibility bits of every triangle from every candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityTable {
    pub candidates: Vec<Vec3>,
    /// `bits[i][t]`: triangle `t` is visible from candidate `i`.
    pub bits: Vec<Vec<bool>>,
}

impl VisibilityTable {
    pub fn compute(mesh: &TriangleMesh, samples: &[SurfaceSample], candidates: &[Vec3]) -> Self {
        let bvh = Bvh::new(mesh);
        let n = mesh.num_triangles();
        let bits = par::map_range(candidates.len(), |i| {
            triangle_visibility(&bvh, n, samples, &candidates[i])
        });
        VisibilityTable {
            candidates: candidates.to_vec(),
            bits,
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.bits.first().map_or(0, Vec::len)
    }

    /// Number of candidates that see each triangle.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_triangles()];
        for row in &self.bits {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += b as usize;
            }
        }
        counts
    }

    pub fn visible_from_any(&self) -> Vec<bool> {
        self.counts().into_iter().map(|c| c > 0).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveAreaMode {
    /// `a * max(count / mean, 1)`: favors widely visible triangles.
    #[default]
    AsPrinted,
    /// `a * max(mean / count, 1)`: favors rarely visible triangles. Never
    /// visible triangles keep their plain area.
    Inverse,
}

/// Visibility-weighted triangle areas. The mean count runs over all
/// triangles, including those no candidate sees.
pub fn effective_areas(counts: &[usize], areas: &[f64], mode: EffectiveAreaMode) -> Result<Vec<f64>> {
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    if mean == 0.0 {
        return Err(Error::FullyOccluded);
    }
    Ok(counts
        .iter()
        .zip(areas)
        .map(|(&c, &a)| {
            let ratio = match mode {
                EffectiveAreaMode::AsPrinted => c as f64 / mean,
                EffectiveAreaMode::Inverse if c == 0 => 1.0,
                EffectiveAreaMode::Inverse => mean / c as f64,
            };
            a * ratio.max(1.0)
        })
        .collect())
}

/// Greedy order over candidates: each step takes the candidate covering the
/// most not-yet-covered effective area (lowest index on ties). Stops after
/// `limit` picks or when nothing is left to gain.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedySequence {
    pub picks: Vec<usize>,
    /// Newly covered share of the visible effective area per pick.
    pub marginal: Vec<f64>,
    pub cumulative: Vec<f64>,
}

pub fn greedy_sequence(table: &VisibilityTable, effective: &[f64], limit: usize) -> GreedySequence {
    let n = table.num_triangles();
    let visible = table.visible_from_any();
    let visible_area: f64 = (0..n).filter(|&t| visible[t]).map(|t| effective[t]).sum();
    let mut uncovered = visible.clone();
    let mut remaining = visible.iter().filter(|&&v| v).count();
    let mut covered = 0.0;
    let mut seq = GreedySequence {
        picks: Vec::new(),
        marginal: Vec::new(),
        cumulative: Vec::new(),
    };
    while seq.picks.len() < limit && remaining > 0 {
        let mut best = (0usize, 0.0f64);
        for (i, row) in table.bits.iter().enumerate() {
            let gain: f64 = (0..n).filter(|&t| row[t] && uncovered[t]).map(|t| effective[t]).sum();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        if best.1 <= 0.0 {
            break;
        }
        for (open, &seen) in uncovered.iter_mut().zip(&table.bits[best.0]) {
            if seen && *open {
                *open = false;
                remaining -= 1;
            }
        }
        covered += best.1;
        seq.picks.push(best.0);
        seq.marginal.push(best.1 / visible_area);
        seq.cumulative.push(if remaining == 0 {
            1.0
        } else {
            (covered / visible_area).min(1.0)
        });
    }
    seq
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub n_fibonacci: usize,
    pub coverage_target: f64,
    pub effective_area: EffectiveAreaMode,
    /// Seed for the surface samples.
    pub seed: u64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            n_fibonacci: DEFAULT_FIBONACCI,
            coverage_target: DEFAULT_COVERAGE_TARGET,
            effective_area: EffectiveAreaMode::AsPrinted,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSelection {
    pub axes: Vec<DhfAxis>,
    pub candidate_indices: Vec<usize>,
    pub per_axis_marginal_coverage: Vec<f64>,
    pub cumulative_coverage: Vec<f64>,
    /// Effective-area share visible from at least one candidate.
    pub visible_fraction: f64,
    pub visible_effective_area: f64,
    pub total_effective_area: f64,
    /// Cumulative coverage after 1, 2, 3 and 4 greedy picks; the greedy
    /// order continues past the stopping point to fill this in.
    pub coverage_curve: [f64; 4],
}

/// Full selection pipeline: surface samples, visibility against every
/// candidate, effective areas and the greedy stop at `coverage_target` of
/// the visible effective area.
pub fn greedy_select(mesh: &TriangleMesh, config: &SelectConfig) -> Result<AxisSelection> {
    if !(config.coverage_target > 0.0 && config.coverage_target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage target {} outside (0, 1]",
            config.coverage_target
        )));
    }
    if config.n_fibonacci == 0 {
        return Err(Error::InvalidArgument("need at least one Fibonacci direction".into()));
    }
    let candidates = candidate_directions(config.n_fibonacci);
    let samples = sample_surface_points(mesh, &mut ChaCha8Rng::seed_from_u64(config.seed));
    let table = VisibilityTable::compute(mesh, &samples, &candidates);
    select_from_table(&table, mesh.areas(), config)
}

pub fn select_from_table(table: &VisibilityTable, areas: &[f64], config: &SelectConfig) -> Result<AxisSelection> {
    let counts = table.counts();
    let effective = effective_areas(&counts, areas, config.effective_area)?;
    let total: f64 = effective.iter().sum();
    let visible: f64 = counts
        .iter()
        .zip(&effective)
        .filter(|(&c, _)| c > 0)
        .map(|(_, a)| a)
        .sum();
    let seq = greedy_sequence(table, &effective, table.candidates.len());
    let stop = seq
        .cumulative
        .iter()
        .position(|&c| c >= config.coverage_target)
        .map_or(seq.picks.len(), |k| k + 1);
    let mut curve = [0.0; 4];
    for (k, c) in curve.iter_mut().enumerate() {
        *c = seq.cumulative.get(k).or(seq.cumulative.last()).copied().unwrap_or(0.0);
    }
    Ok(AxisSelection {
        axes: seq.picks[..stop]
            .iter()
            .map(|&i| DhfAxis::new(table.candidates[i]))
            .collect(),
        candidate_indices: seq.picks[..stop].to_vec(),
        per_axis_marginal_coverage: seq.marginal[..stop].to_vec(),
        cumulative_coverage: seq.cumulative[..stop].to_vec(),
        visible_fraction: visible / total,
        visible_effective_area: visible,
        total_effective_area: total,
        coverage_curve: curve,
    })
}
