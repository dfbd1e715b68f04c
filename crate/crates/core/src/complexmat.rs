//! Dense complex matrices at antenna-array scale.
//!
//! Only what the MIMO reduction needs: products, adjoints, a full SVD by
//! one-sided (Hestenes) Jacobi, Haar-distributed unitaries and uniformly
//! random permutation matrices.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-14;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries; fails on a size mismatch or
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!("empty {rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Real matrix from rows of `f64`.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self::from_vec(r, c, data)
    }

    pub fn diagonal(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, k: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    /// `‖AᴴA − I‖_F`; zero for a matrix with orthonormal columns.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.adjoint().matmul(self);
        g.sub(&CMatrix::identity(self.cols)).frobenius_norm()
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "dimension mismatch in matrix product ({}x{} * {}x{})",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// Selects the listed columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, idx.len());
        for (new_c, &c) in idx.iter().enumerate() {
            for r in 0..self.rows {
                out[(r, new_c)] = self[(r, c)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Full singular value decomposition `A = U Λ Vᴴ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × rows`, unitary.
    pub u: CMatrix,
    /// Non-increasing, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// `cols × cols`, unitary. Columns past the rank span the null space.
    pub v: CMatrix,
}

impl SvdResult {
    /// The `rows × cols` rectangular diagonal Λ.
    pub fn sigma_matrix(&self) -> CMatrix {
        CMatrix::diagonal(self.u.rows(), self.v.rows(), &self.singular_values)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.u
            .matmul(&self.sigma_matrix())
            .matmul(&self.v.adjoint())
    }
}

/// Full SVD by one-sided Jacobi rotations on the columns of `a`.
///
/// Ties between singular values keep the original column order.
pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    let (m, n) = (a.rows, a.cols);
    let norm_a = a.frobenius_norm();
    if !norm_a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    // columns below this norm are treated as exact null directions
    let null_sq = (1e-15 * norm_a).powi(2);

    let mut b = a.clone();
    let mut v = CMatrix::identity(n);
    let mut converged = false;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    let bi = b[(k, i)];
                    let bj = b[(k, j)];
                    alpha += bi.norm_sqr();
                    beta += bj.norm_sqr();
                    gamma += bi.conj() * bj;
                }
                let g = gamma.norm();
                if alpha <= null_sq || beta <= null_sq || g <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase_conj = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut b, i, j, c, s, phase_conj);
                rotate_columns(&mut v, i, j, c, s, phase_conj);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|c| (0..m).map(|r| b[(r, c)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal norms keep column order
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let rank_cap = m.min(n);
    let null_sigma = null_sq.sqrt();
    let singular_values: Vec<f64> = order[..rank_cap]
        .iter()
        .map(|&c| {
            if norms[c] <= null_sigma {
                0.0
            } else {
                norms[c]
            }
        })
        .collect();
    let v_sorted = v.select_columns(&order);

    let mut u_cols: Vec<Option<Vec<Complex64>>> = vec![None; m];
    for (k, &c) in order[..rank_cap].iter().enumerate() {
        if singular_values[k] > 0.0 {
            let inv = 1.0 / norms[c];
            u_cols[k] = Some((0..m).map(|r| b[(r, c)] * inv).collect());
        }
    }
    let u = complete_orthonormal_basis(m, u_cols);

    let out = SvdResult {
        u,
        singular_values,
        v: v_sorted,
    };
    let residual = out.reconstruct().sub(a).frobenius_norm();
    if !converged || residual > 1e-10 * norm_a.max(1.0) {
        return Err(Error::SvdNoConvergence {
            rows: m,
            cols: n,
            residual,
        });
    }
    Ok(out)
}

fn rotate_columns(x: &mut CMatrix, i: usize, j: usize, c: f64, s: f64, phase_conj: Complex64) {
    for k in 0..x.rows {
        let xi = x[(k, i)];
        let xj = x[(k, j)] * phase_conj;
        x[(k, i)] = xi * c - xj * s;
        x[(k, j)] = xi * s + xj * c;
    }
}

/// Fills the missing columns of an `m × m` matrix so the result is unitary.
/// Present columns must already be orthonormal.
fn complete_orthonormal_basis(m: usize, mut cols: Vec<Option<Vec<Complex64>>>) -> CMatrix {
    let mut candidate = 0;
    for slot in 0..m {
        if cols[slot].is_some() {
            continue;
        }
        while candidate < m {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            // Gram-Schmidt twice for numerical orthogonality
            for _ in 0..2 {
                for q in cols.iter().flatten() {
                    let proj: Complex64 = q.iter().zip(&e).map(|(qi, ei)| qi.conj() * ei).sum();
                    for (ei, qi) in e.iter_mut().zip(q) {
                        *ei -= proj * qi;
                    }
                }
            }
            let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                cols[slot] = Some(e.into_iter().map(|z| z / norm).collect());
                break;
            }
        }
    }
    let mut u = CMatrix::zeros(m, m);
    for (c, col) in cols.into_iter().enumerate() {
        let col = col.expect("standard basis spans the space");
        for (r, z) in col.into_iter().enumerate() {
            u[(r, c)] = z;
        }
    }
    u
}

/// One circularly-symmetric complex Gaussian with `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. unit-variance complex Gaussians.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix {
        rows,
        cols,
        data: (0..rows * cols).map(|_| complex_gaussian(rng)).collect(),
    }
}

/// Haar-distributed `n × n` unitary.
///
/// QR of a complex Gaussian matrix by Gram–Schmidt; the triangular factor
/// produced this way has a positive real diagonal, which is the phase
/// normalization that makes `Q` exactly Haar.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    assert!(n >= 1, "unitary dimension must be positive");
    loop {
        let z = sample_gaussian_matrix(n, n, rng);
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        let mut degenerate = false;
        for c in 0..n {
            let mut col = z.column(c);
            for _ in 0..2 {
                for prev in &q {
                    let proj: Complex64 = prev.iter().zip(&col).map(|(p, x)| p.conj() * x).sum();
                    for (x, p) in col.iter_mut().zip(prev) {
                        *x -= proj * p;
                    }
                }
            }
            let norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                degenerate = true;
                break;
            }
            q.push(col.into_iter().map(|x| x / norm).collect());
        }
        if degenerate {
            continue;
        }
        let mut out = CMatrix::zeros(n, n);
        for (c, col) in q.into_iter().enumerate() {
            for (r, x) in col.into_iter().enumerate() {
                out[(r, c)] = x;
            }
        }
        return out;
    }
}

/// Permutation π of `{0, …, n−1}`.
///
/// As a matrix `P` has `P[π(l), l] = 1`, so `Pᵀ v` has entries `v[π(l)]`
/// and `V·P` has column `l` equal to column `π(l)` of `V`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct PermMatrix {
    mapping: Vec<usize>,
}

impl PermMatrix {
    pub fn identity(n: usize) -> Self {
        PermMatrix {
            mapping: (0..n).collect(),
        }
    }

    /// Fails unless `mapping` is a bijection on `0..len`.
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || seen[m] {
                return Err(Error::InvalidInput(format!(
                    "{mapping:?} is not a permutation"
                )));
            }
            seen[m] = true;
        }
        Ok(PermMatrix { mapping })
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// π(l).
    pub fn apply(&self, l: usize) -> usize {
        self.mapping[l]
    }

    pub fn inverse(&self) -> PermMatrix {
        let mut inv = vec![0; self.mapping.len()];
        for (l, &m) in self.mapping.iter().enumerate() {
            inv[m] = l;
        }
        PermMatrix { mapping: inv }
    }

    /// `(self ∘ other)(l) = self(other(l))`.
    pub fn compose(&self, other: &PermMatrix) -> PermMatrix {
        PermMatrix {
            mapping: other.mapping.iter().map(|&l| self.mapping[l]).collect(),
        }
    }

    /// `(Pᵀ v)_l = v[π(l)]`.
    pub fn permute<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.mapping.iter().map(|&m| v[m].clone()).collect()
    }

    pub fn to_matrix(&self) -> CMatrix {
        let n = self.mapping.len();
        let mut p = CMatrix::zeros(n, n);
        for (l, &m) in self.mapping.iter().enumerate() {
            p[(m, l)] = Complex64::new(1.0, 0.0);
        }
        p
    }
}

/// Uniformly random permutation (Fisher–Yates).
pub fn sample_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PermMatrix {
    assert!(n >= 1, "permutation size must be positive");
    let mut mapping: Vec<usize> = (0..n).collect();
    mapping.shuffle(rng);
    PermMatrix { mapping }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn check_svd(a: &CMatrix) -> SvdResult {
        let s = svd(a).expect("svd");
        let scale = a.frobenius_norm().max(1.0);
        assert!(s.reconstruct().sub(a).frobenius_norm() <= 1e-10 * scale);
        assert!(s.u.unitarity_residual() <= 1e-10);
        assert!(s.v.unitarity_residual() <= 1e-10);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.singular_values.iter().all(|&x| x >= 0.0));
        s
    }

    /// Eigenvalues of a Hermitian matrix by cyclic two-sided Jacobi; kept
    /// separate from the one-sided SVD path it checks.
    fn hermitian_eigenvalues(mut h: CMatrix) -> Vec<f64> {
        let n = h.rows();
        for _ in 0..200 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| h[(i, j)].norm_sqr())
                .sum();
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let hpq = h[(p, q)];
                    if hpq.norm() < 1e-300 {
                        continue;
                    }
                    let app = h[(p, p)].re;
                    let aqq = h[(q, q)].re;
                    let phase = hpq / hpq.norm();
                    let theta = 0.5 * (2.0 * hpq.norm()).atan2(aqq - app);
                    let (s, c) = theta.sin_cos();
                    // G = diag(1, e^{-iφ}) · [[c, s], [−s, c]] on the (p, q) plane
                    let mut g = CMatrix::identity(n);
                    g[(p, p)] = Complex64::new(c, 0.0);
                    g[(p, q)] = Complex64::new(s, 0.0);
                    g[(q, p)] = -phase.conj() * s;
                    g[(q, q)] = phase.conj() * c;
                    h = g.adjoint().matmul(&h).matmul(&g);
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn identity_svd() {
        let s = check_svd(&CMatrix::identity(2));
        assert_eq!(s.singular_values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_svd_sorted() {
        let a = CMatrix::from_real_rows(&[&[3.0, 0.0], &[0.0, 4.0]]).unwrap();
        let s = check_svd(&a);
        assert!((s.singular_values[0] - 4.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_tall_matrix_matches_gram_eigenvalues() {
        let mut r = rng(7);
        let a = sample_gaussian_matrix(4, 2, &mut r);
        let s = check_svd(&a);
        let ev = hermitian_eigenvalues(a.adjoint().matmul(&a));
        for (sv, e) in s.singular_values.iter().zip(&ev) {
            assert!((sv * sv - e).abs() < 1e-10, "{sv}^2 vs {e}");
        }
    }

    #[test]
    fn wide_and_square_shapes() {
        let mut r = rng(11);
        for &(m, n) in &[(1, 2), (2, 4), (3, 4), (4, 4), (5, 2), (6, 6)] {
            let a = sample_gaussian_matrix(m, n, &mut r);
            let s = check_svd(&a);
            assert_eq!(s.singular_values.len(), m.min(n));
            let ev = hermitian_eigenvalues(a.matmul(&a.adjoint()));
            for (sv, e) in s.singular_values.iter().zip(&ev) {
                assert!((sv * sv - e).abs() < 1e-9 * (1.0 + e));
            }
        }
    }

    #[test]
    fn row_vector_null_space() {
        let a = CMatrix::from_real_rows(&[&[1.0, 1.0]]).unwrap();
        let s = check_svd(&a);
        assert!((s.singular_values[0] - 2f64.sqrt()).abs() < 1e-14);
        // second right singular vector is orthogonal to the row
        let v1 = s.v.column(1);
        let dot = v1[0] + v1[1];
        assert!(dot.norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_matrix() {
        let a = CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]).unwrap();
        let s = check_svd(&a);
        assert!(s.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let s = check_svd(&CMatrix::zeros(2, 3));
        assert_eq!(s.singular_values, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let bad = CMatrix::from_vec(1, 1, vec![Complex64::new(f64::NAN, 0.0)]);
        assert!(bad.is_err());
    }

    #[test]
    fn haar_scalar_has_unit_modulus() {
        let q = sample_haar_unitary(1, &mut rng(3));
        assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_is_unitary() {
        let q = sample_haar_unitary(4, &mut rng(5));
        assert!(q.unitarity_residual() < 1e-10);
    }

    #[test]
    fn permutation_of_size_one() {
        assert_eq!(sample_permutation(1, &mut rng(1)), PermMatrix::identity(1));
    }

    #[test]
    fn permutation_matrix_convention() {
        let p = PermMatrix::from_mapping(vec![2, 0, 1]).unwrap();
        let v = [10.0, 20.0, 30.0];
        assert_eq!(p.permute(&v), vec![30.0, 10.0, 20.0]);
        // Pᵀ v computed through the matrix agrees with permute
        let pt = p.to_matrix().adjoint();
        let col =
            CMatrix::from_vec(3, 1, v.iter().map(|&x| Complex64::new(x, 0.0)).collect()).unwrap();
        let out = pt.matmul(&col);
        for (l, want) in p.permute(&v).iter().enumerate() {
            assert_eq!(out[(l, 0)].re, *want);
        }
        assert!(PermMatrix::from_mapping(vec![0, 0]).is_err());
    }

    #[test]
    fn permutation_frequencies_are_uniform() {
        let mut r = rng(99);
        let trials = 60_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            *counts
                .entry(sample_permutation(3, &mut r).mapping().to_vec())
                .or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for &c in counts.values() {
            assert!((c as f64 / trials as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn haar_second_moment() {
        // E|u00|² = 1/2 for n = 2. Under Haar, |u00|² is uniform on [0,1]
        // (direct integration over the 2x2 parametrization), variance 1/12.
        let mut r = rng(2024);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sample_haar_unitary(2, &mut r)[(0, 0)].norm_sqr())
            .sum();
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((sum / n as f64 - 0.5).abs() < 3.0 * se);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn svd_residuals(seed in any::<u64>(), m in 1usize..6, n in 1usize..6) {
                let a = sample_gaussian_matrix(m, n, &mut rng(seed));
                check_svd(&a);
            }

            #[test]
            fn column_permutation_preserves_singular_values(seed in any::<u64>(), n in 1usize..6) {
                let mut r = rng(seed);
                let a = sample_gaussian_matrix(3, n, &mut r);
                let p = sample_permutation(n, &mut r);
                let ap = a.matmul(&p.to_matrix());
                let s1 = svd(&a).unwrap().singular_values;
                let s2 = svd(&ap).unwrap().singular_values;
                for (x, y) in s1.iter().zip(&s2) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }

            #[test]
            fn permutation_inverse_is_identity(seed in any::<u64>(), n in 1usize..10) {
                let p = sample_permutation(n, &mut rng(seed));
                prop_assert_eq!(p.compose(&p.inverse()), PermMatrix::identity(n));
                prop_assert_eq!(p.inverse().compose(&p), PermMatrix::identity(n));
            }
        }
    }
}
