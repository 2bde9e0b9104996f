use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::DiskGrid;
use crate::error::{Error, Result};

/// Complex samples, one per interior node.
#[derive(Debug, Clone)]
pub struct DiskField {
    pub grid: Arc<DiskGrid>,
    pub values: Vec<Complex64>,
}

/// Real samples, one per interior node.
#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: Arc<DiskGrid>,
    pub values: Vec<f64>,
}

/// Complex samples, one per boundary sample.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub grid: Arc<DiskGrid>,
    pub values: Vec<Complex64>,
}

fn check_finite_c(v: &[Complex64]) -> Result<()> {
    if let Some(k) = v.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::solver(format!("non-finite field value at index {k}")));
    }
    Ok(())
}

impl DiskField {
    pub fn new(grid: Arc<DiskGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        check_finite_c(&values)?;
        Ok(DiskField { grid, values })
    }

    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        DiskField { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = grid.nodes.iter().map(|&z| f(z)).collect();
        DiskField { grid: grid.clone(), values }
    }

    pub fn from_real(re: &RealField, im: &RealField) -> Self {
        let values = re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect();
        DiskField { grid: re.grid.clone(), values }
    }

    pub fn re(&self) -> RealField {
        RealField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.re).collect() }
    }

    pub fn im(&self) -> RealField {
        RealField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.im).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        DiskField { grid: self.grid.clone(), values: self.values.iter().map(|&z| f(z)).collect() }
    }

    pub fn zip_map(&self, other: &DiskField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        DiskField { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &DiskField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DiskField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &DiskField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        check_finite_c(&self.values).is_ok()
    }

    /// Writes the `x1,x2,re,im` dump, one row per node in index order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x1,x2,re,im")?;
        for (z, v) in self.grid.nodes.iter().zip(&self.values) {
            writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", z.re, z.im, v.re, v.im)?;
        }
        Ok(())
    }
}

impl RealField {
    pub fn new(grid: Arc<DiskGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        RealField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<DiskGrid>, c: f64) -> Self {
        RealField { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|z| f(z.re, z.im)).collect();
        RealField { grid: grid.clone(), values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RealField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        RealField { grid: self.grid.clone(), values }
    }

    pub fn to_complex(&self) -> DiskField {
        DiskField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl BoundaryTrace {
    pub fn new(grid: Arc<DiskGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_boundary() {
            return Err(Error::invalid(format!(
                "trace has {} values for {} boundary samples",
                values.len(),
                grid.n_boundary()
            )));
        }
        check_finite_c(&values)?;
        Ok(BoundaryTrace { grid, values })
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.angles.iter().map(|&s| f(s)).collect();
        BoundaryTrace { grid: grid.clone(), values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}
