//! Small dense matrices for the band-domain solvers.
//!
//! Everything in the band domain is tiny (at most ~100 rows), so a plain
//! row-major `Vec<f64>` store with direct algorithms is enough: LU with
//! partial pivoting for linear solves and scaling-and-squaring with a Padé
//! approximant for the matrix exponential.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    /// Dense product `self * other`.
    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self + scale * other`, elementwise.
    pub fn add_scaled(&self, scale: f64, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Largest singular value, estimated by power iteration on `AᵀA`.
    ///
    /// Deterministic: starts from the all-ones vector and runs a fixed
    /// iteration count, which is ample at these sizes.
    pub fn spectral_norm_est(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v = vec![1.0; self.cols];
        let mut sigma2 = 0.0;
        for _ in 0..200 {
            let w = self.matvec_t(&self.matvec(&v));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            sigma2 = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        sigma2.sqrt()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu, SingularMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        // Pivots below this fraction of the matrix scale are treated as rank
        // deficiency rather than divided through.
        let scale = self.one_norm().max(f64::MIN_POSITIVE);
        let tol = 1e-13 * scale;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let cand = lu[(i, k)].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            if best <= tol {
                return Err(SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    let sub = m * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Lu { lu, perm })
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// The matrix (or the weighted system built from it) has no usable pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix;

impl core::fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "matrix is singular to working precision")
    }
}

impl core::error::Error for SingularMatrix {}

/// Packed LU factors with the row permutation applied during pivoting.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward substitution (unit lower triangle)
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // back substitution
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.lu.rows;
        assert_eq!(b.rows, n);
        let mut out = Mat::zeros(n, b.cols);
        let mut col = vec![0.0; n];
        for j in 0..b.cols {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Minimize ‖A x - b‖₂ by Householder QR with column pivoting.
///
/// Columns beyond the numerical rank (diagonal below `rank_tol` times the
/// leading diagonal) are left at x = 0, which picks a deterministic
/// representative when columns are linearly dependent. Requires at least
/// as many rows as columns. Returns the solution and the detected rank.
pub fn pivoted_least_squares(a: &Mat, b: &[f64], rank_tol: f64) -> (Vec<f64>, usize) {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n);
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // pivot on the column with the largest remaining norm
        let mut best = k;
        let mut best_norm = 0.0;
        for j in k..n {
            let norm: f64 = (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            for i in 0..m {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
            perm.swap(k, best);
        }
        // Householder reflection zeroing column k below the diagonal
        let alpha = best_norm.sqrt() * if r[(k, k)] > 0.0 { -1.0 } else { 1.0 };
        if alpha == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|x| x * x).sum();
        if v_norm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let scale = 2.0 * dot / v_norm2;
            for i in k..m {
                r[(i, j)] -= scale * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * rhs[i]).sum();
        let scale = 2.0 * dot / v_norm2;
        for i in k..m {
            rhs[i] -= scale * v[i - k];
        }
    }

    let lead = r[(0, 0)].abs();
    let mut rank = 0;
    while rank < n && r[(rank, rank)].abs() > rank_tol * lead.max(f64::MIN_POSITIVE) {
        rank += 1;
    }

    let mut x = vec![0.0; n];
    for i in (0..rank).rev() {
        let mut acc = rhs[i];
        for j in i + 1..rank {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    let mut out = vec![0.0; n];
    for (pos, &col) in perm.iter().enumerate() {
        out[col] = x[pos];
    }
    (out, rank)
}

// Padé coefficients for the [13/13] approximant of exp.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];

const PADE7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];

const PADE5: [f64; 6] = [30_240.0, 15_120.0, 3_360.0, 420.0, 30.0, 1.0];

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];

// 1-norm thresholds at which each Padé order keeps the backward error below
// the f64 unit roundoff (Higham's scaling-and-squaring analysis).
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn pade_uv(a: &Mat, coeffs: &[f64]) -> (Mat, Mat) {
    let n = a.rows();
    let a2 = a.mul(a);
    match coeffs.len() {
        4 | 6 | 8 | 10 => {
            // U = A (b3 A² + b1 I), V = b2 A² + b0 I, extended with higher
            // even powers for the larger orders.
            let mut powers = vec![Mat::identity(n), a2.clone()];
            let degree = (coeffs.len() - 2) / 2;
            for _ in 2..=degree {
                let next = powers.last().unwrap().mul(&a2);
                powers.push(next);
            }
            let mut u_inner = Mat::zeros(n, n);
            let mut v = Mat::zeros(n, n);
            for (p, pow) in powers.iter().enumerate() {
                u_inner = u_inner.add_scaled(coeffs[2 * p + 1], pow);
                v = v.add_scaled(coeffs[2 * p], pow);
            }
            (a.mul(&u_inner), v)
        }
        14 => {
            let a4 = a2.mul(&a2);
            let a6 = a2.mul(&a4);
            let b = &PADE13;
            let u_hi = a6
                .scale(b[13])
                .add_scaled(b[11], &a4)
                .add_scaled(b[9], &a2);
            let u_inner = a6
                .mul(&u_hi)
                .add_scaled(b[7], &a6)
                .add_scaled(b[5], &a4)
                .add_scaled(b[3], &a2)
                .add_scaled(b[1], &Mat::identity(n));
            let u = a.mul(&u_inner);
            let v_hi = a6
                .scale(b[12])
                .add_scaled(b[10], &a4)
                .add_scaled(b[8], &a2);
            let v = a6
                .mul(&v_hi)
                .add_scaled(b[6], &a6)
                .add_scaled(b[4], &a4)
                .add_scaled(b[2], &a2)
                .add_scaled(b[0], &Mat::identity(n));
            (u, v)
        }
        _ => unreachable!(),
    }
}

/// Matrix exponential by scaling-and-squaring with Padé approximants.
pub fn expm(a: &Mat) -> Mat {
    assert_eq!(a.rows(), a.cols());
    let norm = a.one_norm();
    let (scaled, squarings, coeffs): (Mat, u32, &[f64]) = if norm <= THETA3 {
        (a.clone(), 0, &PADE3)
    } else if norm <= THETA5 {
        (a.clone(), 0, &PADE5)
    } else if norm <= THETA7 {
        (a.clone(), 0, &PADE7)
    } else if norm <= THETA9 {
        (a.clone(), 0, &PADE9)
    } else {
        let mut s = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > THETA13 {
            scaled_norm /= 2.0;
            s += 1;
        }
        (a.scale(0.5_f64.powi(s as i32)), s, &PADE13)
    };
    let (u, v) = pade_uv(&scaled, coeffs);
    let p = v.add_scaled(1.0, &u);
    let q = v.add_scaled(-1.0, &u);
    let mut r = q
        .lu()
        .expect("denominator of the Padé approximant must be nonsingular")
        .solve_mat(&p);
    for _ in 0..squarings {
        r = r.mul(&r);
    }
    r
}
