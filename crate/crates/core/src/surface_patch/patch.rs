use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::geometry::{point_geometry, PointGeometry};
use super::immersion::{Immersion, Jet};
use crate::ambient_metric::{AmbientMetric, Vec3};
use crate::disk_field::{partials, second_partials, DiskGrid, RealField};
use crate::error::{Error, Result};

/// An immersed disk with cached geometry at the interior nodes and at the
/// boundary samples.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub grid: Arc<DiskGrid>,
    pub metric: AmbientMetric,
    pub immersion: Arc<dyn Immersion>,
    /// ±1 relative to the metric-raised cross product of the tangents.
    pub orientation: f64,
    pub nodes: Vec<PointGeometry>,
    pub boundary: Vec<PointGeometry>,
}

fn geometry_at(
    metric: &AmbientMetric,
    imm: &dyn Immersion,
    pts: &[num_complex::Complex64],
    sign: f64,
) -> Result<Vec<PointGeometry>> {
    pts.par_iter()
        .map(|z| point_geometry(metric, &imm.jet(z.re, z.im), sign))
        .collect()
}

/// Builds the patch with a prescribed orientation, without the convexity check.
pub fn build_oriented(
    metric: &AmbientMetric,
    immersion: Arc<dyn Immersion>,
    grid: &Arc<DiskGrid>,
    sign: f64,
) -> Result<SurfacePatch> {
    let nodes = geometry_at(metric, immersion.as_ref(), &grid.nodes, sign)?;
    let boundary = geometry_at(metric, immersion.as_ref(), &grid.boundary_samples, sign)?;
    Ok(SurfacePatch { grid: grid.clone(), metric: *metric, immersion, orientation: sign, nodes, boundary })
}

/// Builds the patch oriented so that the mean curvature is positive.
pub fn build_patch(
    metric: &AmbientMetric,
    immersion: Arc<dyn Immersion>,
    grid: &Arc<DiskGrid>,
) -> Result<SurfacePatch> {
    let mut patch = build_oriented(metric, immersion.clone(), grid, 1.0)?;
    if patch.nodes[0].h < 0.0 {
        patch = build_oriented(metric, immersion, grid, -1.0)?;
    }
    let bad = patch.nodes.iter().chain(&patch.boundary).position(|p| p.h <= 0.0);
    if let Some(k) = bad {
        return Err(Error::geometry(format!(
            "mean curvature is not positive for either orientation (sample {k})"
        )));
    }
    Ok(patch)
}

impl SurfacePatch {
    pub fn field(&self, f: impl Fn(&PointGeometry) -> f64) -> RealField {
        RealField { grid: self.grid.clone(), values: self.nodes.iter().map(f).collect() }
    }

    pub fn v_field(&self) -> RealField {
        self.field(|p| p.v)
    }

    pub fn k_field(&self) -> RealField {
        self.field(|p| p.k)
    }

    pub fn h_field(&self) -> RealField {
        self.field(|p| p.h)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|p| p.y).collect()
    }

    pub fn boundary_positions(&self) -> Vec<Vec3> {
        self.boundary.iter().map(|p| p.y).collect()
    }
}

/// max over nodes of max(|b₁₁ − b₂₂|, |b₁₂|) / max(|b₁₁|, ε_machine).
pub fn conjugate_isothermal_residual(patch: &SurfacePatch) -> f64 {
    patch
        .nodes
        .iter()
        .map(|p| {
            let (b11, b12, b22) = (p.b[(0, 0)], p.b[(0, 1)], p.b[(1, 1)]);
            (b11 - b22).abs().max(b12.abs()) / b11.abs().max(f64::EPSILON)
        })
        .fold(0.0, f64::max)
}

/// Parameter jets of a nodal displacement field, by the grid stencils.
pub fn displacement_jets(grid: &Arc<DiskGrid>, z: &[Vec3]) -> Result<Vec<Jet>> {
    if z.len() != grid.len() {
        return Err(Error::invalid("displacement length does not match the grid"));
    }
    let mut jets = vec![Jet::zero(); grid.len()];
    for c in 0..3 {
        let comp = RealField { grid: grid.clone(), values: z.iter().map(|v| v[c]).collect() }.to_complex();
        let (d1, d2) = partials(&comp)?;
        let [d11, d12, d22] = second_partials(&comp)?;
        for (k, jet) in jets.iter_mut().enumerate() {
            jet.y[c] = z[k][c];
            jet.d1[c] = d1.values[k].re;
            jet.d2[c] = d2.values[k].re;
            jet.d11[c] = d11.values[k].re;
            jet.d12[c] = d12.values[k].re;
            jet.d22[c] = d22.values[k].re;
        }
    }
    Ok(jets)
}

/// Geometry of y + z at the nodes, keeping the patch's orientation.
pub fn deformed_geometry(patch: &SurfacePatch, z: &[Vec3]) -> Result<Vec<PointGeometry>> {
    let dz = displacement_jets(&patch.grid, z)?;
    patch
        .grid
        .nodes
        .par_iter()
        .zip(dz.par_iter())
        .map(|(x, d)| {
            let jet = patch.immersion.jet(x.re, x.im).add(d);
            point_geometry(&patch.metric, &jet, patch.orientation).map_err(|e| match e {
                Error::Geometry(m) => Error::geometry(format!("deformed patch: {m}")),
                other => other,
            })
        })
        .collect()
}

/// Gaussian curvature of the deformed immersion y + z at the nodes.
pub fn curvature_of_deformed(patch: &SurfacePatch, z: &[Vec3]) -> Result<RealField> {
    let geo = deformed_geometry(patch, z)?;
    Ok(RealField { grid: patch.grid.clone(), values: geo.iter().map(|p| p.k).collect() })
}

/// OBJ dump of the polar mesh: interior rings, then the boundary ring when
/// given; quads split into triangles, ring 0 closed by a fan.
pub fn write_obj<W: Write>(
    grid: &DiskGrid,
    interior: &[Vec3],
    boundary: Option<&[Vec3]>,
    mut out: W,
) -> Result<()> {
    let na = grid.n_angular;
    for p in interior.iter().chain(boundary.unwrap_or(&[]).iter()) {
        writeln!(out, "v {:.11e} {:.11e} {:.11e}", p[0], p[1], p[2])?;
    }
    let idx = |i: usize, j: usize| i * na + (j % na) + 1;
    for j in 1..na - 1 {
        writeln!(out, "f {} {} {}", idx(0, 0), idx(0, j), idx(0, j + 1))?;
    }
    let rings = grid.n_radial + usize::from(boundary.is_some());
    for i in 0..rings - 1 {
        for j in 0..na {
            let (a, b, c, d) = (idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j));
            writeln!(out, "f {a} {b} {c}")?;
            writeln!(out, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}
