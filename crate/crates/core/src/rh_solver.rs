//! Riemann–Hilbert problem Re{λ̄w} = φ̇ on the unit circle for
//! ∂_z̄w + Aw + Bw̄ + E(w) = Ψ̇, by successive approximation
//! w_{k+1} = Φ + T(Ψ̇ − E(w) − Aw_k − Bw̄_k) with Φ a truncated polynomial.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::disk_field::{dbar, eval_poly, BoundaryTrace, DiskField, PompeiuOperator};
use crate::elliptic_system::{CoefficientProvider, SystemCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, orthonormal_columns, scaled_null_space, GapRule};
use crate::surface_patch::SurfacePatch;

/// Re{conj(direction)·w(z)} = value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointConstraint {
    pub z: Complex64,
    pub direction: Complex64,
    pub value: f64,
}

impl PointConstraint {
    /// Both real conditions of w(z) = value.
    pub fn pin(z: Complex64, value: Complex64) -> [PointConstraint; 2] {
        [
            PointConstraint { z, direction: Complex64::new(1.0, 0.0), value: value.re },
            PointConstraint { z, direction: Complex64::i(), value: value.im },
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RHProblem {
    pub a: DiskField,
    pub b: DiskField,
    pub psi_dot: DiskField,
    /// Unit-modulus boundary coefficient.
    pub lambda: BoundaryTrace,
    pub phi_dot: Vec<f64>,
    pub constraints: Vec<PointConstraint>,
    pub provider: Option<Arc<dyn CoefficientProvider>>,
    pub t: f64,
}

impl RHProblem {
    /// Normalizes λ to unit modulus.
    pub fn new(a: DiskField, b: DiskField, psi_dot: DiskField, lambda: BoundaryTrace, phi_dot: Vec<f64>) -> Result<Self> {
        let g = &a.grid;
        if !b.grid.same_shape(g) || !psi_dot.grid.same_shape(g) || !lambda.grid.same_shape(g) {
            return Err(Error::invalid("problem fields live on different grids"));
        }
        if phi_dot.len() != g.n_boundary() || lambda.values.len() != g.n_boundary() {
            return Err(Error::invalid("boundary data length differs from the boundary sample count"));
        }
        if let Some(k) = lambda.values.iter().position(|l| !(l.norm() > 0.0)) {
            return Err(Error::invalid(format!("lambda vanishes at boundary sample {k}")));
        }
        let lambda = BoundaryTrace { grid: lambda.grid.clone(), values: lambda.values.iter().map(|l| l / l.norm()).collect() };
        Ok(RHProblem { a, b, psi_dot, lambda, phi_dot, constraints: Vec::new(), provider: None, t: 0.0 })
    }

    pub fn from_coefficients(c: &SystemCoefficients, lambda: BoundaryTrace, phi_dot: Vec<f64>) -> Result<Self> {
        RHProblem::new(c.a.clone(), c.b.clone(), c.psi_dot.clone(), lambda, phi_dot)
    }

    /// Homogeneous problem with A = B = 0 and the given λ.
    pub fn analytic(lambda: BoundaryTrace) -> Result<Self> {
        let z = DiskField::zeros(&lambda.grid);
        let n = lambda.values.len();
        RHProblem::new(z.clone(), z.clone(), z, lambda, vec![0.0; n])
    }

    pub fn with_constraint(mut self, c: PointConstraint) -> Result<Self> {
        if !(c.z.norm() <= 1.0) {
            return Err(Error::invalid(format!("constraint point {} lies outside the closed disk", c.z)));
        }
        if c.direction.norm() == 0.0 {
            return Err(Error::invalid("constraint direction is zero"));
        }
        self.constraints.push(c);
        Ok(self)
    }

    pub fn with_provider(mut self, provider: Arc<dyn CoefficientProvider>, t: f64) -> Self {
        self.provider = Some(provider);
        self.t = t;
        self
    }

    fn e_term(&self, w: &DiskField) -> Option<DiskField> {
        let p = self.provider.as_ref()?;
        if p.is_trivial() {
            return None;
        }
        Some(p.e_term(w, self.t))
    }

    /// max(2n, 8) where n is the index of λ (8 for negative index).
    pub fn default_degree(&self) -> Result<usize> {
        let n = compute_index(&self.lambda)?;
        Ok((2 * n.max(0) as usize).max(8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop when successive iterates differ by less than this (sup norm,
    /// relative to max(1, ‖w‖)).
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations before the contraction check starts.
    pub warm_up: usize,
    pub max_outer: usize,
    pub boundary_tol: f64,
    pub degree: Option<usize>,
    pub gap: GapRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 400,
            warm_up: 3,
            max_outer: 200,
            boundary_tol: 1e-6,
            degree: None,
            gap: GapRule::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RHSolution {
    pub w: DiskField,
    pub w_boundary: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub family: Vec<DiskField>,
    /// Inner iterations of the particular response, summed over outer rounds.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Ratios ‖w_{k+1} − w_k‖ / ‖w_k − w_{k−1}‖ of the last particular response.
    pub contraction_history: Vec<f64>,
    pub interior_residual: f64,
    pub boundary_residual: f64,
}

/// A fixed point of w = Φ + T(g − Aw − Bw̄ [− E(w)]) with its integrand.
#[derive(Debug, Clone)]
struct Response {
    phi: Vec<Complex64>,
    w: DiskField,
    f: DiskField,
    iterations: usize,
    history: Vec<f64>,
}

impl Response {
    fn boundary(&self, t_op: &PompeiuOperator) -> Vec<Complex64> {
        let tb = t_op.boundary_trace(&self.f);
        self.f.grid.boundary_samples.iter().zip(&tb.values).map(|(&z, v)| eval_poly(&self.phi, z) + v).collect()
    }

    fn at(&self, t_op: &PompeiuOperator, z: Complex64) -> Complex64 {
        eval_poly(&self.phi, z) + t_op.eval_at(&self.f, z)
    }
}

fn integrand(p: &RHProblem, w: &DiskField, g: &DiskField, linear_e: bool) -> DiskField {
    let mut f: Vec<Complex64> =
        (0..w.values.len()).map(|k| g.values[k] - p.a.values[k] * w.values[k] - p.b.values[k] * w.values[k].conj()).collect();
    if linear_e {
        if let Some(e) = p.e_term(w) {
            f.iter_mut().zip(&e.values).for_each(|(x, y)| *x -= y);
        }
    }
    DiskField { grid: w.grid.clone(), values: f }
}

fn respond(
    p: &RHProblem,
    t_op: &PompeiuOperator,
    phi: Vec<Complex64>,
    g: &DiskField,
    linear_e: bool,
    opts: &SolveOptions,
) -> Result<Response> {
    let grid = p.a.grid.clone();
    let phi_field = DiskField { grid: grid.clone(), values: grid.nodes.iter().map(|&z| eval_poly(&phi, z)).collect() };
    let mut f = integrand(p, &DiskField::zeros(&grid), g, linear_e);
    let mut w = phi_field.add(&t_op.apply(&f));
    let mut history = Vec::new();
    let mut prev_diff = f64::NAN;
    let mut rising = 0;
    for k in 1..=opts.max_iter {
        f = integrand(p, &w, g, linear_e);
        let next = phi_field.add(&t_op.apply(&f));
        let diff = next.sub(&w).sup_norm();
        w = next;
        if !diff.is_finite() {
            return Err(Error::solver("successive approximation produced non-finite values"));
        }
        if prev_diff > 0.0 {
            let ratio = diff / prev_diff;
            history.push(ratio);
            if k > opts.warm_up && ratio >= 1.0 {
                rising += 1;
                if rising >= 3 {
                    return Err(Error::solver(format!("not a contraction at this t: ratio {ratio:.3}")));
                }
            } else {
                rising = 0;
            }
        }
        prev_diff = diff;
        if diff <= opts.tol * w.sup_norm().max(1.0) {
            let f = integrand(p, &w, g, linear_e);
            return Ok(Response { phi, w, f, iterations: k, history });
        }
    }
    Err(Error::solver(format!("successive approximation did not converge in {} iterations", opts.max_iter)))
}

/// Real parameters of Φ: (Re c_k, Im c_k) for k = 0..=degree.
fn monomial(degree: usize, j: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); degree + 1];
    c[j / 2] = if j % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
    c
}

struct Responses {
    basis: Vec<Response>,
    boundary: Vec<Vec<Complex64>>,
}

fn basis_responses(p: &RHProblem, t_op: &PompeiuOperator, degree: usize, linear_e: bool, opts: &SolveOptions) -> Result<Responses> {
    if degree > p.a.grid.n_angular / 4 {
        return Err(Error::invalid(format!("degree {degree} exceeds n_angular/4")));
    }
    let zero = DiskField::zeros(&p.a.grid);
    let basis: Vec<Response> = (0..2 * (degree + 1))
        .into_par_iter()
        .map(|j| respond(p, t_op, monomial(degree, j), &zero, linear_e, opts))
        .collect::<Result<_>>()?;
    let boundary = basis.iter().map(|r| r.boundary(t_op)).collect();
    Ok(Responses { basis, boundary })
}

/// Rows: boundary samples Re{λ̄ R(s)}, then constraints weighted by √n_b.
fn boundary_matrix(p: &RHProblem, t_op: &PompeiuOperator, r: &Responses) -> DMatrix<f64> {
    let nb = p.lambda.values.len();
    let nc = p.constraints.len();
    let weight = (nb as f64).sqrt();
    let mut m = DMatrix::zeros(nb + nc, r.basis.len());
    for (j, resp) in r.basis.iter().enumerate() {
        for s in 0..nb {
            m[(s, j)] = (p.lambda.values[s].conj() * r.boundary[j][s]).re;
        }
        for (c, pc) in p.constraints.iter().enumerate() {
            m[(nb + c, j)] = weight * (pc.direction.conj() * resp.at(t_op, pc.z)).re;
        }
    }
    m
}

fn combine(fields: &[&DiskField], x: &[f64]) -> DiskField {
    let grid = fields[0].grid.clone();
    let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (f, &c) in fields.iter().zip(x) {
        v.iter_mut().zip(&f.values).for_each(|(a, b)| *a += c * b);
    }
    DiskField { grid, values: v }
}

/// Accumulated argument increment of λ over the closed boundary, in turns.
pub fn compute_index(lambda: &BoundaryTrace) -> Result<i64> {
    let n = lambda.values.len();
    if n < 3 {
        return Err(Error::invalid("boundary trace needs at least three samples"));
    }
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (lambda.values[k], lambda.values[(k + 1) % n]);
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return Err(Error::invalid(format!("lambda vanishes near sample {k}")));
        }
        let d = (b / a).arg();
        if d.abs() > PI / 2.0 {
            return Err(Error::solver(format!("trace under-resolved: argument jump {d:.3} at sample {k}")));
        }
        total += d;
    }
    let turns = total / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.1 {
        return Err(Error::solver(format!("winding {turns:.4} is not near an integer")));
    }
    Ok(rounded as i64)
}

/// λ and φ̇ of the boundary condition λ̃_k ẇ^k = γ̇ from a tangent field
/// l^i on the boundary: λ̃_k = g_ki l^i, λ = (λ̃₁ + iλ̃₂)/|λ̃|, φ̇ = γ̇/|λ̃|.
/// The condition then reads Re{λ̄w} = φ̇ for w = ȧ¹ + iȧ².
pub fn boundary_from_tangent_field(
    patch: &SurfacePatch,
    l: &[(f64, f64)],
    gamma_dot: &[f64],
) -> Result<(BoundaryTrace, Vec<f64>)> {
    let nb = patch.boundary.len();
    if l.len() != nb || gamma_dot.len() != nb {
        return Err(Error::invalid("boundary field length differs from the boundary sample count"));
    }
    let mut lam = Vec::with_capacity(nb);
    let mut phi = Vec::with_capacity(nb);
    for (k, q) in patch.boundary.iter().enumerate() {
        let (l1, l2) = l[k];
        let t1 = q.g[(0, 0)] * l1 + q.g[(0, 1)] * l2;
        let t2 = q.g[(1, 0)] * l1 + q.g[(1, 1)] * l2;
        let m = t1.hypot(t2);
        if !(m > 0.0) {
            return Err(Error::invalid(format!("lambda vanishes at boundary sample {k}")));
        }
        lam.push(Complex64::new(t1, t2) / m);
        phi.push(gamma_dot[k] / m);
    }
    Ok((BoundaryTrace { grid: patch.grid.clone(), values: lam }, phi))
}

/// Basis of the homogeneous problem (Ψ̇ = 0, φ̇ = 0, constraint values 0)
/// with E treated as linear.
#[derive(Debug, Clone)]
pub struct HomogeneousFamily {
    /// Orthonormal in the quadrature inner product Re ∫ u v̄.
    pub basis: Vec<DiskField>,
    pub singular_values: Vec<f64>,
    pub dimension: usize,
}

pub fn homogeneous_family(problem: &RHProblem, opts: &SolveOptions) -> Result<HomogeneousFamily> {
    let t_op = PompeiuOperator::new(&problem.a.grid);
    homogeneous_family_with(problem, &t_op, opts)
}

pub fn homogeneous_family_with(problem: &RHProblem, t_op: &PompeiuOperator, opts: &SolveOptions) -> Result<HomogeneousFamily> {
    let degree = match opts.degree {
        Some(d) => d,
        None => problem.default_degree()?,
    };
    let r = basis_responses(problem, t_op, degree, true, opts)?;
    let m = boundary_matrix(problem, t_op, &r);
    family_from_matrix(&r, &m, &opts.gap)
}

fn family_from_matrix(r: &Responses, m: &DMatrix<f64>, gap: &GapRule) -> Result<HomogeneousFamily> {
    let (sv, null) = scaled_null_space(m, gap)?;
    let dim = null.ncols();
    let fields: Vec<&DiskField> = r.basis.iter().map(|x| &x.w).collect();
    let members: Vec<DiskField> = (0..dim).map(|c| combine(&fields, null.column(c).as_slice())).collect();
    let basis = if dim == 0 { Vec::new() } else { orthonormal_fields(&members)? };
    Ok(HomogeneousFamily { basis, singular_values: sv, dimension: dim })
}

/// Real vector (√w Re, √w Im) per node, so Euclidean products are quadrature products.
pub fn weighted_real_vector(f: &DiskField) -> Vec<f64> {
    f.values
        .iter()
        .zip(&f.grid.quadrature_weights)
        .flat_map(|(v, w)| {
            let s = w.sqrt();
            [s * v.re, s * v.im]
        })
        .collect()
}

fn orthonormal_fields(fields: &[DiskField]) -> Result<Vec<DiskField>> {
    let grid = fields[0].grid.clone();
    let cols: Vec<DVector<f64>> = fields.iter().map(|f| DVector::from_vec(weighted_real_vector(f))).collect();
    let q = orthonormal_columns(&DMatrix::from_columns(&cols))?;
    Ok((0..q.ncols())
        .map(|c| {
            let values = (0..grid.len())
                .map(|k| {
                    let s = grid.quadrature_weights[k].sqrt();
                    Complex64::new(q[(2 * k, c)], q[(2 * k + 1, c)]) / s
                })
                .collect();
            DiskField { grid: grid.clone(), values }
        })
        .collect())
}

/// Sup norm of ∂_z̄w + Aw + Bw̄ + E(w) − Ψ̇ with ∂_z̄ by the grid stencils.
pub fn interior_residual(problem: &RHProblem, w: &DiskField) -> Result<f64> {
    let d = dbar(w)?;
    let e = problem.e_term(w);
    let mut worst: f64 = 0.0;
    for k in 0..w.values.len() {
        let mut r = d.values[k] + problem.a.values[k] * w.values[k] + problem.b.values[k] * w.values[k].conj()
            - problem.psi_dot.values[k];
        if let Some(e) = &e {
            r += e.values[k];
        }
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

pub fn solve(problem: &RHProblem, opts: &SolveOptions) -> Result<RHSolution> {
    let t_op = PompeiuOperator::new(&problem.a.grid);
    solve_with(problem, &t_op, opts)
}

pub fn solve_with(problem: &RHProblem, t_op: &PompeiuOperator, opts: &SolveOptions) -> Result<RHSolution> {
    let degree = match opts.degree {
        Some(d) => d,
        None => problem.default_degree()?,
    };
    let r = basis_responses(problem, t_op, degree, false, opts)?;
    let m = boundary_matrix(problem, t_op, &r);
    let nb = problem.lambda.values.len();
    let weight = (nb as f64).sqrt();
    let grid = problem.a.grid.clone();
    let nonlinear = problem.e_term(&DiskField::zeros(&grid)).is_some();

    let mut w = DiskField::zeros(&grid);
    let mut damping = 1.0;
    let mut prev_change = f64::INFINITY;
    let mut iterations = 0;
    let mut outer = 0;
    let mut history;
    let mut phi;
    let mut w_boundary;
    loop {
        outer += 1;
        let g = match problem.e_term(&w) {
            Some(e) => problem.psi_dot.sub(&e),
            None => problem.psi_dot.clone(),
        };
        let part = respond(problem, t_op, vec![Complex64::new(0.0, 0.0)], &g, false, opts)?;
        iterations += part.iterations;
        history = part.history.clone();
        let pb = part.boundary(t_op);
        let mut rhs = DVector::zeros(m.nrows());
        for s in 0..nb {
            rhs[s] = problem.phi_dot[s] - (problem.lambda.values[s].conj() * pb[s]).re;
        }
        for (c, pc) in problem.constraints.iter().enumerate() {
            rhs[nb + c] = weight * (pc.value - (pc.direction.conj() * part.at(t_op, pc.z)).re);
        }
        let x = lstsq(&m, &rhs, 1e-12)?;
        let mut fields: Vec<&DiskField> = r.basis.iter().map(|b| &b.w).collect();
        fields.push(&part.w);
        let mut coef: Vec<f64> = x.iter().copied().collect();
        coef.push(1.0);
        let w_new = combine(&fields, &coef);
        let mut bnd = pb.clone();
        for (j, b) in r.boundary.iter().enumerate() {
            bnd.iter_mut().zip(b).for_each(|(a, v)| *a += x[j] * v);
        }
        phi = vec![Complex64::new(0.0, 0.0); degree + 1];
        for (j, c) in x.iter().enumerate() {
            phi[j / 2] += c * if j % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
        }
        if !nonlinear {
            w = w_new;
            w_boundary = bnd;
            break;
        }
        let change = w_new.sub(&w).sup_norm();
        if change > prev_change {
            damping = 0.5;
        }
        prev_change = change;
        w = w.scale(Complex64::new(1.0 - damping, 0.0)).add(&w_new.scale(Complex64::new(damping, 0.0)));
        w_boundary = bnd;
        if change <= opts.tol.max(1e-10) * w.sup_norm().max(1.0) {
            break;
        }
        if outer >= opts.max_outer {
            return Err(Error::solver(format!("outer E iteration did not settle in {outer} rounds")));
        }
    }

    let boundary_residual = (0..nb)
        .map(|s| ((problem.lambda.values[s].conj() * w_boundary[s]).re - problem.phi_dot[s]).abs())
        .fold(0.0, f64::max);
    let constraint_residual = problem
        .constraints
        .iter()
        .map(|pc| {
            let val = eval_poly(&phi, pc.z) + t_op.eval_at(&integrand(problem, &w, &problem.psi_dot, true), pc.z);
            ((pc.direction.conj() * val).re - pc.value).abs()
        })
        .fold(0.0, f64::max);
    if !(boundary_residual.max(constraint_residual) <= opts.boundary_tol) {
        return Err(Error::solver(format!(
            "boundary system inconsistent: boundary residual {boundary_residual:.3e}, constraint residual {constraint_residual:.3e}"
        )));
    }
    // constraint rows do not depend on the constraint values, so the
    // homogeneous problem shares the boundary matrix when E is absent
    let family = if nonlinear {
        let hom = RHProblem {
            psi_dot: DiskField::zeros(&grid),
            phi_dot: vec![0.0; nb],
            constraints: problem.constraints.iter().map(|c| PointConstraint { value: 0.0, ..*c }).collect(),
            ..problem.clone()
        };
        homogeneous_family_with(&hom, t_op, opts)?.basis
    } else {
        family_from_matrix(&r, &m, &opts.gap)?.basis
    };
    let interior_residual = interior_residual(problem, &w)?;
    Ok(RHSolution {
        w,
        w_boundary,
        phi,
        family,
        iterations,
        outer_iterations: outer,
        contraction_history: history,
        interior_residual,
        boundary_residual,
    })
}
