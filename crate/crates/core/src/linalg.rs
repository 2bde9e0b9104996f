//! Dense and matrix-free linear algebra used by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-11, restart: 80, max_iter: 800 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with modified Gram-Schmidt for `op(x) = b`.
pub fn gmres<F>(op: F, b: &[f64], x0: Option<&[f64]>, opts: GmresOptions) -> Result<(Vec<f64>, GmresReport)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], GmresReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut total = 0;
    loop {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= opts.tol {
            return Ok((x, GmresReport { iterations: total, relative_residual: beta / bnorm }));
        }
        if total >= opts.max_iter {
            return Err(Error::solver(format!(
                "GMRES did not converge: relative residual {:.3e} after {total} iterations",
                beta / bnorm
            )));
        }
        let m = opts.restart;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iter {
            let mut w = op(&basis[k]);
            for (j, q) in basis.iter().enumerate() {
                let hj = dot(&w, q);
                h[(j, k)] = hj;
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= hj * qi);
            }
            let hn = norm(&w);
            h[(k + 1, k)] = hn;
            for j in 0..k {
                let t = cs[j] * h[(j, k)] + sn[j] * h[(j + 1, k)];
                h[(j + 1, k)] = -sn[j] * h[(j, k)] + cs[j] * h[(j + 1, k)];
                h[(j, k)] = t;
            }
            let den = h[(k, k)].hypot(h[(k + 1, k)]);
            cs[k] = h[(k, k)] / den;
            sn[k] = h[(k + 1, k)] / den;
            h[(k, k)] = den;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            total += 1;
            if g[k].abs() / bnorm <= 0.1 * opts.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[(i, j)] * y[j]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[i]).for_each(|(xv, q)| *xv += yi * q);
        }
    }
}

/// Thin singular value decomposition M = U diag(s) Vᵀ with s descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi SVD. Small singular values come out with relative
/// accuracy, which the null-space decisions rely on. nalgebra's bidiagonal
/// SVD returned a wrong factorization on matrices mixing O(1) and O(1e-20)
/// entries, so it is not used here.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (rows, n) = m.shape();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::solver("SVD of a matrix with non-finite entries"));
    }
    let mut a = if rows < n { m.clone().resize_vertically(n, 0.0) } else { m.clone() };
    let mut v = DMatrix::<f64>::identity(n, n);
    // columns below this are numerically zero and are left alone
    let tiny = (f64::EPSILON * m.norm()).powi(2) * 1e-4;
    let tol = (a.nrows() as f64).sqrt() * f64::EPSILON;
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (a.column(p), a.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha <= tiny || beta <= tiny || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::solver("SVD failed to converge"));
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let k = n.min(rows);
    let mut u = DMatrix::zeros(rows, k);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (c, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        vs.set_column(c, &v.column(j));
        if c < k && norms[j] > 0.0 {
            u.set_column(c, &(a.column(j).rows(0, rows) / norms[j]));
        }
    }
    Ok(Svd { u, s, v: vs })
}

/// Singular values sorted descending together with the right singular
/// vectors (as matrix columns in the same order). Short matrices are padded
/// with zero rows so the right basis is complete.
pub fn svd_sorted(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = svd(m)?;
    Ok((d.s, d.v))
}

/// Rule for deciding the numerical null-space of a discrete operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRule {
    /// Required ratio between the smallest kept and largest discarded value.
    pub gap: f64,
    /// Values below `floor · σ_max` are always discarded.
    pub floor: f64,
    /// Values below `threshold · σ_max` are discarded.
    pub threshold: f64,
}

impl Default for GapRule {
    fn default() -> Self {
        GapRule { gap: 10.0, floor: 1e-6, threshold: 1e-3 }
    }
}

impl GapRule {
    /// Number of discarded singular values. `sv` is sorted descending.
    pub fn null_dimension(&self, sv: &[f64]) -> Result<usize> {
        let Some(&smax) = sv.first() else { return Ok(0) };
        if smax == 0.0 {
            return Ok(sv.len());
        }
        let cut = self.threshold.max(self.floor) * smax;
        let kept = sv.iter().take_while(|&&s| s >= cut).count();
        let dim = sv.len() - kept;
        if kept > 0 && dim > 0 {
            let (small_kept, big_dropped) = (sv[kept - 1], sv[kept]);
            if big_dropped > self.floor * smax && small_kept < self.gap * big_dropped {
                return Err(Error::solver(format!(
                    "ill-conditioned null-space extraction: kept {small_kept:.3e} vs discarded {big_dropped:.3e} (gap < {}x)",
                    self.gap
                )));
            }
        }
        if dim == 0 && sv.len() > 0 {
            let smin = sv[sv.len() - 1];
            if smin < self.gap * cut {
                return Err(Error::solver(format!(
                    "ill-conditioned null-space extraction: smallest value {:.3e} within {}x of the cut {cut:.3e}",
                    smin, self.gap
                )));
            }
        }
        Ok(dim)
    }
}

/// Singular values of the column-normalized matrix and the null vectors the
/// gap rule keeps, mapped back to the original column scaling.
pub fn scaled_null_space(m: &DMatrix<f64>, gap: &GapRule) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let raw: Vec<f64> = (0..m.ncols()).map(|j| m.column(j).norm()).collect();
    let top = raw.iter().copied().fold(0.0, f64::max);
    // round-off columns stay unscaled
    let norms: Vec<f64> = raw.iter().map(|&n| if n > 1e-12 * top { n } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / norms[j]);
    let (sv, v) = svd_sorted(&scaled)?;
    let dim = gap.null_dimension(&sv)?;
    let n = v.ncols();
    let null = DMatrix::from_fn(v.nrows(), dim, |j, c| v[(j, n - dim + c)] / norms[j]);
    Ok((sv, null))
}

/// Orthonormal basis of the column span, dropping directions whose
/// singular values fall below `1e-12 · σ_max`.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = svd(m)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cols: Vec<_> = (0..d.u.ncols()).filter(|&i| d.s[i] > 1e-12 * smax).map(|i| d.u.column(i).into_owned()).collect();
    if cols.is_empty() {
        return Err(Error::solver("empty column span"));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Largest principal angle (radians) between two column spans of equal dimension.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (qa, qb) = (orthonormal_columns(a)?, orthonormal_columns(b)?);
    if qa.ncols() != qb.ncols() {
        return Err(Error::invalid(format!("span dimensions differ: {} vs {}", qa.ncols(), qb.ncols())));
    }
    // the largest singular value of the residual projection is the sine of the
    // largest angle, which stays accurate for tiny angles
    let resid = &qb - &qa * (qa.transpose() * &qb);
    Ok(svd(&resid)?.s.first().copied().unwrap_or(0.0).min(1.0).asin())
}

/// Least-squares solve by SVD with relative cutoff.
pub fn lstsq(m: &DMatrix<f64>, rhs: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    if rhs.len() != m.nrows() {
        return Err(Error::invalid("right-hand side length differs from row count"));
    }
    let d = svd(m)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(m.ncols());
    for i in 0..d.u.ncols() {
        if d.s[i] > rcond * smax && d.s[i] > 0.0 {
            let coef = d.u.column(i).dot(rhs) / d.s[i];
            x += d.v.column(i) * coef;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 60;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                3.0 + i as f64 / n as f64
            } else {
                ((i * 7 + j * 3) % 11) as f64 / 40.0 - 0.12
            }
        });
        let xs = DVector::from_fn(n, |i, _| (i as f64).sin());
        let b = &a * &xs;
        let op = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
        let (x, rep) = gmres(op, b.as_slice(), None, GmresOptions { restart: 10, ..Default::default() }).unwrap();
        let err = (DVector::from_vec(x) - xs).amax();
        assert!(err < 1e-9, "{err} after {}", rep.iterations);
    }

    #[test]
    fn gmres_zero_rhs_and_failure() {
        let (x, _) = gmres(|v: &[f64]| v.to_vec(), &[0.0; 4], None, GmresOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        // a rotation by 90 degrees in blocks stalls restarted GMRES(1)
        let op = |v: &[f64]| vec![-v[1], v[0]];
        let r = gmres(op, &[1.0, 0.0], None, GmresOptions { tol: 1e-12, restart: 1, max_iter: 20 });
        assert!(r.is_err());
    }

    #[test]
    fn gap_rule_counts_and_rejects() {
        let rule = GapRule::default();
        assert_eq!(rule.null_dimension(&[1.0, 0.5, 0.2, 1e-5, 1e-7]).unwrap(), 2);
        assert_eq!(rule.null_dimension(&[1.0, 0.5, 0.2]).unwrap(), 0);
        assert_eq!(rule.null_dimension(&[1.0, 1e-9, 1e-12]).unwrap(), 2);
        assert!(rule.null_dimension(&[1.0, 0.02, 0.009]).is_err());
        assert!(rule.null_dimension(&[1.0, 0.5, 0.005]).is_err());
    }

    #[test]
    fn principal_angle_of_rotated_plane() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let th: f64 = 0.3;
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, th.cos(), th.sin()]);
        assert!((largest_principal_angle(&a, &b).unwrap() - th).abs() < 1e-12);
        let tiny: f64 = 1e-7;
        let c = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, tiny.cos(), tiny.sin()]);
        assert!((largest_principal_angle(&a, &c).unwrap() - tiny).abs() < 1e-12);
    }

    fn recompose(d: &Svd) -> DMatrix<f64> {
        let k = d.u.ncols();
        &d.u * DMatrix::from_diagonal(&DVector::from_column_slice(&d.s[..k])) * d.v.columns(0, k).transpose()
    }

    #[test]
    fn svd_handles_mixed_scale_fit_matrix() {
        // 10×6 column-major fit matrix on which a bidiagonal SVD recomposed
        // with error 5e-3
        let data = [
            0.0, 0.0057890339799016085, -0.005246874559077241, -0.5000610370168951, 5.64858569846971e-21,
            -0.5000610370168952, -6.94640200395169e-14, 0.0, 6.778351613954335e-24, 6.295831911362626e-14, 0.0,
            0.005789033979901598, 0.005246874559077241, -0.5000610370168951, -5.64858569846971e-21, 0.5000610370168952,
            -6.94640200395169e-14, 0.0, -6.778351613954335e-24, -6.295831911362626e-14, 0.0, -0.005246874559073689,
            0.00578903397993003, 0.0, -0.5000610370168951, 1.129717139693942e-20, 0.0, -2.3154655276469427e-14,
            2.0986156063808326e-14, 2.0335054841863007e-23, 0.0, -0.2500305185094476, 3.388959045363483e-21, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.388959045363483e-21, -0.2500305185094476, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ];
        let m = DMatrix::from_column_slice(10, 6, &data);
        let d = svd(&m).unwrap();
        // near-equal column pairs must not keep the sweep rotating
        let nearly = DMatrix::from_fn(10, 6, |i, j| m[(i, j)] + if j < 2 && i == 1 { 0.09 } else { 0.0 });
        let e = svd(&nearly).unwrap();
        assert!((recompose(&e) - &nearly).norm() < 1e-14);
        assert!((recompose(&d) - &m).norm() < 1e-14);
        let x = DVector::from_column_slice(&[-1.0, 0.0, 0.0, -0.02, 0.03, 2.0]);
        let back = lstsq(&m, &(&m * &x), 1e-12).unwrap();
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn svd_sorted_gives_null_vector() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let (sv, v) = svd_sorted(&m).unwrap();
        assert_eq!(sv.len(), 3);
        assert!(sv[2] < 1e-14);
        let nv = v.column(2);
        assert!((&m * nv).norm() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn svd_recomposes_and_is_orthogonal(rows in 1usize..9, cols in 1usize..9, seed in 0u64..10_000) {
            let mut st = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                st = st.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((st >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            });
            let d = svd(&m).unwrap();
            prop_assert_eq!(d.s.len(), cols);
            prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!((recompose(&d) - &m).norm() < 1e-13 * (1.0 + m.norm()));
            let vtv = d.v.transpose() * &d.v;
            prop_assert!((vtv - DMatrix::identity(cols, cols)).norm() < 1e-13);
        }

        #[test]
        fn gmres_matches_direct_solve(seed in 0u64..1000) {
            let n = 12;
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
            let a = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 } else { 0.0 }) + DMatrix::from_fn(n, n, |_, _| next());
            let b = DVector::from_fn(n, |_, _| next());
            let direct = a.clone().lu().solve(&b).unwrap();
            let op = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
            let (x, _) = gmres(op, b.as_slice(), None, GmresOptions::default()).unwrap();
            prop_assert!((DVector::from_vec(x) - direct).amax() < 1e-9);
        }
    }
}
