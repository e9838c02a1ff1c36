//! Browser bindings for the CN-DHF demo page: pick a built-in shape, select
//! its axes, bake per-axis height rasters and compare a slice of the
//! intersected occupancy against the mesh.

use wasm_bindgen::prelude::*;

use cndhf::axis_select::{greedy_select, AxisSelection, SelectConfig};
use cndhf::mesh::normalize_to_unit_cube;
use cndhf::metrics::{MeshInOut, OccupancySource};
use cndhf::occupancy::{AxisField, CnDhfModel, HeightField};
use cndhf::raster::{bake_raster, HeightFieldRaster};
use cndhf::{fixtures, TriangleMesh, Vec3};

/// Shapes offered by the page. The fine sphere is left out: it is slow to
/// build single-threaded.
#[wasm_bindgen]
pub fn fixture_names() -> Vec<String> {
    fixtures::NAMES
        .iter()
        .filter(|n| **n != "sphere-fine")
        .map(|n| n.to_string())
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    mesh: TriangleMesh,
    selection: Option<AxisSelection>,
    rasters: Vec<HeightFieldRaster>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(fixture: &str) -> Result<Demo, JsError> {
        let mesh = fixtures::by_name(fixture).ok_or_else(|| JsError::new(&format!("unknown shape {fixture}")))?;
        let (mesh, _) = normalize_to_unit_cube(&mesh)?;
        Ok(Demo {
            mesh,
            selection: None,
            rasters: Vec::new(),
        })
    }

    pub fn triangle_count(&self) -> usize {
        self.mesh.num_triangles()
    }

    /// Runs axis selection and returns it as JSON.
    pub fn decompose(&mut self, coverage_target: f64, seed: u64) -> Result<String, JsError> {
        let config = SelectConfig {
            coverage_target,
            seed,
            ..Default::default()
        };
        let selection = greedy_select(&self.mesh, &config)?;
        let json = serde_json::to_string(&selection)?;
        self.selection = Some(selection);
        self.rasters.clear();
        Ok(json)
    }

    /// Bakes every selected axis at `resolution^2`.
    pub fn bake(&mut self, resolution: usize) -> Result<usize, JsError> {
        let selection = self.selection.as_ref().ok_or_else(|| JsError::new("decompose first"))?;
        self.rasters = selection
            .axes
            .iter()
            .map(|a| bake_raster(&self.mesh, a, resolution, resolution).map(|b| b.raster))
            .collect::<Result<_, _>>()?;
        Ok(self.rasters.len())
    }

    /// RGBA image of one raster: far height in red, near height in blue,
    /// black where there is no surface.
    pub fn raster_image(&self, axis: usize) -> Result<Vec<u8>, JsError> {
        let r = self
            .rasters
            .get(axis)
            .ok_or_else(|| JsError::new("no such baked axis"))?;
        let shade = |h: f32| (127.5 * (h + 1.0)).clamp(0.0, 255.0) as u8;
        let mut out = Vec::with_capacity(4 * r.len());
        // Canvas rows run top-down; raster rows run bottom-up in v.
        for j in (0..r.height).rev() {
            for i in 0..r.width {
                let k = j * r.width + i;
                if r.valid[k] {
                    out.extend_from_slice(&[shade(r.far[k]), 64, shade(-r.near[k]), 255]);
                } else {
                    out.extend_from_slice(&[0, 0, 0, 255]);
                }
            }
        }
        Ok(out)
    }

    /// RGBA image of the plane `z = height` over `[-1, 1]^2`: white where
    /// both the intersected rasters and the mesh are inside, red where only
    /// the rasters are, blue where only the mesh is.
    pub fn slice_image(&self, height: f64, resolution: usize) -> Result<Vec<u8>, JsError> {
        if self.rasters.is_empty() {
            return Err(JsError::new("bake first"));
        }
        let entries = self
            .rasters
            .iter()
            .map(|r| AxisField::new(r.axis, HeightField::Raster(r.clone())))
            .collect();
        let model = CnDhfModel::new("demo", cndhf::mesh::Normalization::identity(), entries)?;
        let mut pts = Vec::with_capacity(resolution * resolution);
        for j in (0..resolution).rev() {
            for i in 0..resolution {
                let c = |k: usize| -1.0 + (2 * k + 1) as f64 / resolution as f64;
                pts.push(Vec3::new(c(i), c(j), height));
            }
        }
        let ours = model.occupancy(&pts);
        let theirs = MeshInOut::new(&self.mesh).occupancy(&pts);
        let mut out = Vec::with_capacity(4 * pts.len());
        for (a, b) in ours.into_iter().zip(theirs) {
            out.extend_from_slice(match (a, b) {
                (true, true) => &[235, 235, 235, 255],
                (true, false) => &[220, 50, 47, 255],
                (false, true) => &[38, 139, 210, 255],
                (false, false) => &[20, 20, 20, 255],
            });
        }
        Ok(out)
    }
}
