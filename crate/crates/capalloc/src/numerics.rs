//! Dense real vectors and matrices, a damped least-squares solver, power
//! iteration, and a counter-based deterministic RNG.
//!
//! Everything here is 64-bit floating point. The problem sizes are small
//! (parameter dimension up to a few hundred, at most a few dozen columns in
//! a least-squares system), so the solvers are direct and dependency-free:
//! normal equations with Tikhonov damping for least squares, plain power
//! iteration for extremal eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for power iteration convergence.
const POWER_ITER_TOL: f64 = 1e-8;

/// Tikhonov damping added to the Gram matrix in [`least_squares`]. Keeps the
/// normal equations nonsingular and makes rank-deficient systems resolve to
/// the minimum-norm coefficient vector deterministically.
const LSQ_DAMPING: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

/// A dense real vector with at least one finite entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    entries: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::usage("vector dimension must be at least 1"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("vector entries must be finite"));
        }
        Ok(Vector { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Vector {
            entries: vec![0.0; dim],
        }
    }

    /// Standard basis vector `e_k` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut entries = vec![0.0; dim];
        entries[k] = 1.0;
        Vector { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.entries[i] = value;
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector {
            entries: self.entries.iter().map(|x| c * x).collect(),
        }
    }

    /// `self + c * other`; dimensions must already agree.
    pub fn add_scaled(&self, c: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.add_scaled(-1.0, other)
    }

    pub fn normalized(&self) -> Option<Vector> {
        let n = norm(self);
        if n > 0.0 {
            Some(self.scale(1.0 / n))
        } else {
            None
        }
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.entries
    }
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// A dense row-major real matrix. Serializes as nested row arrays so config
/// files can write matrices the way they read on paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Vec<Vec<f64>> {
        (0..m.rows)
            .map(|i| m.entries[i * m.cols..(i + 1) * m.cols].to_vec())
            .collect()
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::usage("matrix must have at least one row and column"));
        }
        if entries.len() != rows * cols {
            return Err(Error::usage(format!(
                "matrix needs {} entries for shape {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("matrix entries must be finite"));
        }
        Ok(Matrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::usage("matrix must have at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::usage("matrix rows must have equal length"));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        Matrix::new(n, n, entries)
    }

    pub fn identity(n: usize) -> Self {
        Matrix::diagonal(&vec![1.0; n]).expect("identity dimension must be positive")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// `A x`; requires `x.dim() == cols`.
    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.dim(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
        }
        Vector { entries: out }
    }

    /// `A^T y`; requires `y.dim() == rows`.
    pub fn transpose_matvec(&self, y: &Vector) -> Vector {
        debug_assert_eq!(y.dim(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y.get(i);
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        Vector { entries: out }
    }
}

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

/// Inner product `sum_k a_k b_k`.
pub fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::usage(format!(
            "dot: dimension mismatch ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    Ok(dot_slices(a.as_slice(), b.as_slice()))
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm; `norm(0) = 0`.
pub fn norm(a: &Vector) -> f64 {
    dot_slices(a.as_slice(), a.as_slice()).sqrt()
}

/// Least squares `min_a || sum_j a_j col_j - target ||` by damped normal
/// equations. Returns the coefficients and the residual
/// `target - sum_j a_j col_j`.
///
/// The Gram matrix gets `1e-12` added on the diagonal, so degenerate or
/// collinear columns resolve to the minimum-norm coefficient vector instead
/// of failing. The residual is orthogonal to every column to within
/// `damping * |a_j|`, far below the `1e-9 * (1 + ||target||)` contract for
/// reasonably scaled inputs.
pub fn least_squares(columns: &[Vector], target: &Vector) -> Result<(Vector, Vector)> {
    if columns.is_empty() {
        return Err(Error::usage("least_squares: need at least one column"));
    }
    let d = target.dim();
    if columns.iter().any(|c| c.dim() != d) {
        return Err(Error::usage(
            "least_squares: columns must share the target dimension",
        ));
    }
    let m = columns.len();

    // Gram matrix G = B^T B plus damping, and right-hand side B^T t.
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g = dot_slices(columns[i].as_slice(), columns[j].as_slice());
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
        gram[i * m + i] += LSQ_DAMPING;
    }
    let rhs: Vec<f64> = columns
        .iter()
        .map(|c| dot_slices(c.as_slice(), target.as_slice()))
        .collect();

    let coeffs = solve_symmetric(&mut gram, rhs, m);

    let mut residual = target.clone();
    for (a, col) in coeffs.iter().zip(columns) {
        residual = residual.add_scaled(-a, col);
    }
    Ok((Vector { entries: coeffs }, residual))
}

/// Gaussian elimination with partial pivoting on an `n x n` system.
/// The damped Gram matrix is strictly positive definite, so a vanishing
/// pivot cannot occur; the guard keeps degenerate input from propagating NaN.
fn solve_symmetric(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        let pivot = a[k * n + k];
        if pivot.abs() < f64::MIN_POSITIVE {
            continue;
        }
        for r in (k + 1)..n {
            let f = a[r * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a[r * n + c] -= f * a[k * n + c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in (k + 1)..n {
            s -= a[k * n + c] * x[c];
        }
        let pivot = a[k * n + k];
        x[k] = if pivot.abs() < f64::MIN_POSITIVE {
            0.0
        } else {
            s / pivot
        };
    }
    x
}

/// Largest eigenvalue magnitude of a symmetric operator given as a matvec
/// closure, by power iteration to relative tolerance `1e-8`.
///
/// The Rayleigh quotient of the iterate converges from below, so callers that
/// need a strict upper bound should inflate the result by their own safety
/// factor.
pub fn power_iteration_max_eig<F>(dim: usize, apply: F) -> f64
where
    F: Fn(&Vector) -> Vector,
{
    // Deterministic start with a mild ramp so the iterate is not accidentally
    // orthogonal to the dominant eigenvector of structured matrices.
    let mut v = Vector {
        entries: (0..dim).map(|i| 1.0 + 1e-3 * i as f64).collect(),
    };
    v = match v.normalized() {
        Some(u) => u,
        None => return 0.0,
    };
    let mut lambda = 0.0_f64;
    for _ in 0..20_000 {
        let w = apply(&v);
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        let next = dot_slices(v.as_slice(), w.as_slice()).abs();
        v = w.scale(1.0 / wn);
        if (next - lambda).abs() <= POWER_ITER_TOL * next.max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Spectral norm squared of a rectangular matrix: largest eigenvalue of
/// `A^T A`.
pub fn max_eig_ata(a: &Matrix) -> f64 {
    power_iteration_max_eig(a.cols(), |v| a.transpose_matvec(&a.matvec(v)))
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

/// Counter-based RNG: output `k` is the SplitMix64 finalizer applied to
/// `seed + (k+1) * 0x9E3779B97F4A7C15`. The state is just the seed and a
/// counter, so sequences are reproducible from the seed alone and streams
/// can be split by offsetting seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeededRng {
    seed: u64,
    counter: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        splitmix64(
            self.seed
                .wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Log-uniform draw in `[lo, hi)`; both bounds must be positive.
    pub fn next_log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (self.next_range(lo.ln(), hi.ln())).exp()
    }

    /// Standard normal via Box-Muller. Each draw consumes two uniforms and
    /// uses only the cosine branch, which keeps the counter advance
    /// independent of any cached state.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// `d` independent standard normal draws.
pub fn gaussian_vector(rng: &mut SeededRng, d: usize) -> Result<Vector> {
    if d == 0 {
        return Err(Error::usage("gaussian_vector: dimension must be at least 1"));
    }
    Ok(Vector {
        entries: (0..d).map(|_| rng.next_normal()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn dot_orthogonal_basis() {
        assert_eq!(dot(&vec2(1.0, 0.0), &vec2(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn dot_hand_evaluated() {
        assert_eq!(dot(&vec2(1.0, 2.0), &vec2(1.0, 2.0)).unwrap(), 5.0);
    }

    #[test]
    fn dot_basis_projection_of_anisotropic_gradient() {
        // e_1 against the gradient (-3, -0.1) picks out the first coordinate.
        let g = vec2(-3.0, -0.1);
        assert_eq!(dot(&Vector::basis(2, 0), &g).unwrap(), -3.0);
    }

    #[test]
    fn dot_dimension_mismatch_is_usage_error() {
        let a = Vector::new(vec![1.0]).unwrap();
        let b = vec2(1.0, 2.0);
        assert!(matches!(dot(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn norm_cases() {
        assert_eq!(norm(&Vector::zeros(3)), 0.0);
        assert_eq!(norm(&vec2(3.0, 4.0)), 5.0);
        let v = vec2(2.0, -1.0).normalized().unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vector_rejects_nan_and_empty() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![f64::NAN]).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn least_squares_exact_membership() {
        let e1 = Vector::basis(2, 0);
        let (a, r) = least_squares(&[e1.clone()], &e1).unwrap();
        assert!((a.get(0) - 1.0).abs() < 1e-9);
        assert!(norm(&r) < 1e-9);
    }

    #[test]
    fn least_squares_orthogonal_target() {
        let e1 = Vector::basis(2, 0);
        let e2 = Vector::basis(2, 1);
        let (a, r) = least_squares(&[e1], &e2).unwrap();
        assert!(a.get(0).abs() < 1e-9);
        assert!((norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_matches_normal_equations_oracle() {
        // columns (1,0) and (1,1)/sqrt(2), target (2,1). The span is all of
        // R^2, so the residual must vanish and the reconstruction must be
        // exact. Oracle: solve the 2x2 normal equations by hand.
        let c0 = vec2(1.0, 0.0);
        let s = 1.0 / 2.0_f64.sqrt();
        let c1 = vec2(s, s);
        let t = vec2(2.0, 1.0);
        let (a, r) = least_squares(&[c0.clone(), c1.clone()], &t).unwrap();

        // G = [[1, s],[s, 1]], rhs = [2, 3s]; det = 1 - 1/2 = 1/2.
        // a0 = (2 - s*3s)/ (1/2) = (2 - 1.5)*2 = 1; a1 = (3s - 2s)*2 = 2s = sqrt(2).
        assert!((a.get(0) - 1.0).abs() < 1e-9, "a0 = {}", a.get(0));
        assert!((a.get(1) - 2.0_f64.sqrt()).abs() < 1e-9, "a1 = {}", a.get(1));
        assert!(norm(&r) < 1e-9);

        let recon = c0.scale(a.get(0)).add_scaled(a.get(1), &c1).add_scaled(1.0, &r);
        assert!(norm(&recon.sub(&t)) <= 1e-9 * (1.0 + norm(&t)));
    }

    #[test]
    fn least_squares_zero_column_minimum_norm() {
        let z = Vector::zeros(2);
        let t = vec2(1.0, 2.0);
        let (a, r) = least_squares(&[z], &t).unwrap();
        assert_eq!(a.get(0), 0.0);
        assert_eq!(norm(&r), norm(&t));
    }

    #[test]
    fn least_squares_collinear_columns_split_coefficients() {
        // Two identical columns: the damped solution splits the weight evenly,
        // which is the minimum-norm convention.
        let c = vec2(1.0, 0.0);
        let t = vec2(3.0, 0.0);
        let (a, r) = least_squares(&[c.clone(), c], &t).unwrap();
        assert!((a.get(0) - 1.5).abs() < 1e-6);
        assert!((a.get(1) - 1.5).abs() < 1e-6);
        assert!(norm(&r) < 1e-9);
    }

    #[test]
    fn power_iteration_diag() {
        let a = Matrix::diagonal(&[3.0, 0.1]).unwrap();
        let l = max_eig_ata(&a);
        assert!((l - 9.0).abs() < 1e-6, "lambda = {l}");
        let id = Matrix::identity(4);
        assert!((max_eig_ata(&id) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_zero_matrix() {
        let z = Matrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(max_eig_ata(&z), 0.0);
    }

    #[test]
    fn rng_reproducibility() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);

        let mut c = SeededRng::new(43);
        let zs: Vec<u64> = (0..64).map(|_| c.next_u64()).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn gaussian_vector_shape_and_determinism() {
        let mut rng = SeededRng::new(7);
        let v = gaussian_vector(&mut rng, 3).unwrap();
        assert_eq!(v.dim(), 3);
        let mut rng2 = SeededRng::new(7);
        let w = gaussian_vector(&mut rng2, 3).unwrap();
        assert_eq!(v, w);
        assert!(matches!(
            gaussian_vector(&mut rng, 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn gaussian_sample_mean_near_zero() {
        let mut rng = SeededRng::new(2024);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rng.next_normal()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
    }

    proptest! {
        #[test]
        fn dot_symmetry(xs in proptest::collection::vec(-1e3..1e3f64, 1..8)) {
            let n = xs.len();
            let a = Vector::new(xs.clone()).unwrap();
            let rev: Vec<f64> = xs.iter().rev().cloned().collect();
            let b = Vector::new(rev).unwrap();
            prop_assert_eq!(dot(&a, &b).unwrap(), dot(&b, &a).unwrap());
            prop_assert_eq!(a.dim(), n);
        }

        #[test]
        fn cauchy_schwarz(
            xs in proptest::collection::vec(-1e3..1e3f64, 2..8),
            ys in proptest::collection::vec(-1e3..1e3f64, 2..8),
        ) {
            let n = xs.len().min(ys.len());
            let a = Vector::new(xs[..n].to_vec()).unwrap();
            let b = Vector::new(ys[..n].to_vec()).unwrap();
            let lhs = dot(&a, &b).unwrap().abs();
            let rhs = norm(&a) * norm(&b) * (1.0 + 1e-12);
            prop_assert!(lhs <= rhs, "lhs {} rhs {}", lhs, rhs);
        }

        #[test]
        fn least_squares_residual_orthogonality(
            seed in 0u64..5000,
            d in 2usize..6,
            m in 1usize..4,
        ) {
            let mut rng = SeededRng::new(seed);
            let cols: Vec<Vector> = (0..m)
                .map(|_| gaussian_vector(&mut rng, d).unwrap())
                .collect();
            let target = gaussian_vector(&mut rng, d).unwrap();
            let (a, r) = least_squares(&cols, &target).unwrap();
            let tol = 1e-9 * (1.0 + norm(&target));
            for col in &cols {
                prop_assert!(dot(&r, col).unwrap().abs() <= tol);
            }
            // Reconstruction.
            let mut recon = r.clone();
            for (c, col) in a.iter().zip(&cols) {
                recon = recon.add_scaled(*c, col);
            }
            prop_assert!(norm(&recon.sub(&target)) <= tol);
        }
    }
}
