use std::sync::Arc;

use crate::ambient_metric::Vec3;
use crate::disk_field::{DiskGrid, RealField};
use crate::surface_patch::SurfacePatch;

/// Deformation fields of one chart at one time, with their rates.
#[derive(Debug, Clone)]
pub struct ChartState {
    pub a1: RealField,
    pub a2: RealField,
    pub c: RealField,
    /// Displacement z^σ per node.
    pub z: Vec<Vec3>,
    pub a1_dot: RealField,
    pub a2_dot: RealField,
    pub c_dot: RealField,
}

impl ChartState {
    pub fn zero(grid: &Arc<DiskGrid>) -> Self {
        let z = RealField::zeros(grid);
        ChartState {
            a1: z.clone(),
            a2: z.clone(),
            c: z.clone(),
            z: vec![Vec3::zeros(); grid.len()],
            a1_dot: z.clone(),
            a2_dot: z.clone(),
            c_dot: z,
        }
    }

    /// Displacement a^j y_{,j} + c n at every node of the undeformed patch.
    pub fn ansatz_displacement(&self, patch: &SurfacePatch) -> Vec<Vec3> {
        patch
            .nodes
            .iter()
            .enumerate()
            .map(|(k, p)| p.y1 * self.a1.values[k] + p.y2 * self.a2.values[k] + p.n * self.c.values[k])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        [&self.a1, &self.a2, &self.c].iter().all(|f| f.values.iter().all(|v| *v == 0.0))
            && self.z.iter().all(|v| v.norm() == 0.0)
    }
}

/// Both charts at one time, with the displacement history used for the
/// transport check.
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub t: f64,
    pub plus: ChartState,
    pub minus: ChartState,
    /// (t, plus z, minus z) at every accepted step, starting with t = 0.
    pub history: Vec<(f64, Vec<Vec3>, Vec<Vec3>)>,
}

impl DeformationState {
    pub fn initial(grid: &Arc<DiskGrid>) -> Self {
        let zero = ChartState::zero(grid);
        let z = zero.z.clone();
        DeformationState { t: 0.0, plus: zero.clone(), minus: zero, history: vec![(0.0, z.clone(), z)] }
    }

    pub fn chart(&self, i: usize) -> &ChartState {
        if i == 0 {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// Largest gap between the stored displacement and the ansatz rebuilt
    /// from (a, c).
    pub fn ansatz_residual(&self, plus: &SurfacePatch, minus: &SurfacePatch) -> f64 {
        [(&self.plus, plus), (&self.minus, minus)]
            .iter()
            .flat_map(|(s, p)| s.ansatz_displacement(p).into_iter().zip(s.z.clone()).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max)
    }
}
