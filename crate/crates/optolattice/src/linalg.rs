//! Thin wrappers over faer for the dense complex algebra used everywhere else.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn transpose(m: &CMat) -> CMat {
    m.transpose().to_owned()
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// Right eigenpairs of a general complex matrix.
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMat,
}

pub fn eig(m: &CMat) -> Result<Eigen> {
    let e = m.eigen().map_err(|err| Error::Eigensolver(format!("{err:?}")))?;
    let values: Vec<C64> = e.S().column_vector().iter().copied().collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(Eigen { values, vectors: e.U().to_owned() })
}

pub fn eigvals(m: &CMat) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|err| Error::Eigensolver(format!("{err:?}")))
}

/// Eigenvalues in ascending order with orthonormal eigenvectors.
pub fn eigh(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::Eigensolver(format!("{err:?}")))?;
    let vals = e.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn inverse(m: &CMat) -> CMat {
    m.partial_piv_lu().inverse()
}

/// Solves `m x = rhs`.
pub fn solve(m: &CMat, rhs: &CMat) -> CMat {
    use faer::linalg::solvers::Solve;
    m.partial_piv_lu().solve(rhs)
}

pub fn det(m: &CMat) -> C64 {
    m.determinant()
}

/// Frobenius-norm condition estimate ‖M‖·‖M⁻¹‖ (max-norm based, cheap).
pub fn condition_estimate(m: &CMat, inv: &CMat) -> f64 {
    m.norm_l2() * inv.norm_l2()
}

/// Real symmetric eigen-decomposition of a small matrix given row-major.
pub fn eigh_real(m: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.len();
    let cm = Mat::from_fn(n, n, |i, j| c(m[i][j], 0.0));
    let (vals, vecs) = eigh(&cm)?;
    let cols = (0..n).map(|k| (0..n).map(|i| vecs[(i, k)].re).collect()).collect();
    Ok((vals, cols))
}

/// Groups indices whose values lie within `tol` of each other (single linkage).
pub fn cluster(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if values[b].re - values[a].re > tol {
                break;
            }
            if (values[a] - values[b]).norm() <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Modified Gram-Schmidt on the given columns; returns an orthonormal basis of their span.
pub fn orthonormalize(cols: &[Vec<C64>], tol: f64) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in cols {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol * scale.max(1e-300) {
            basis.push(w.into_iter().map(|z| z / norm).collect());
        }
    }
    basis
}

pub fn column(m: &CMat, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Multiset distance between two eigenvalue lists: greedy nearest matching.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&x, &y| a[x].re.total_cmp(&a[y].re).then(a[x].im.total_cmp(&a[y].im)));
    for i in order {
        let mut best = None;
        let mut bd = f64::INFINITY;
        for (j, bj) in b.iter().enumerate() {
            if !used[j] {
                let d = (a[i] - bj).norm();
                if d < bd {
                    bd = d;
                    best = Some(j);
                }
            }
        }
        if let Some(j) = best {
            used[j] = true;
        }
        worst = worst.max(bd);
    }
    worst
}
