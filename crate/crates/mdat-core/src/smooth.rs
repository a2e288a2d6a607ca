//! Constraint-preserving smoothing of the band weights over the wide bands.
//!
//! Within every band of width >= 3 the two band constraints (unit weight
//! mass, c-weighted mass) leave spare degrees of freedom. Those are spent
//! minimizing the squared first difference of the weights ρ over the
//! contiguous bin range the wide bands occupy, by following the projected
//! gradient flow u' = (I-R)Au: A is the tridiagonal second-difference
//! operator on the range and R the orthogonal projector onto the span of
//! the constraint gradients, block-diagonal per band. Both constraints are
//! exactly conserved along the flow, which has the closed form
//! u(τ) = exp((I-R)Aτ) u₀.

use alloc::vec;
use alloc::vec::Vec;

use crate::bands::{BandTable, NUM_BINS};
use crate::matrix::{expm, Mat};

/// The contiguous run of bins covered by bands of width >= 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// First bin of the run.
    pub k0: usize,
    /// Number of bins in the run (extends to bin 127).
    pub len: usize,
    /// Bands making up the run, in order.
    pub layout: Vec<BandSlice>,
}

/// One band's slice of the smoothing region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSlice {
    /// Band index in the table.
    pub band: usize,
    /// Offset of the band's first bin relative to `k0`.
    pub offset: usize,
    /// Band width.
    pub len: usize,
}

impl BandSlice {
    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Locate the wide-band run of a table.
pub fn region_of(table: &BandTable) -> Region {
    let first = table.first_wide_band();
    let k0 = table.band(first).low_bin;
    let mut layout = Vec::new();
    for band in &table.bands()[first..] {
        debug_assert!(band.width() >= 3);
        layout.push(BandSlice { band: band.index, offset: band.low_bin - k0, len: band.width() });
    }
    Region { k0, len: NUM_BINS - k0, layout }
}

/// A smoothing instance: initial weights and unpredictability values over
/// one region, plus the per-band weight targets the flow must conserve.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingProblem {
    /// Initial ρ values over the region's bins.
    pub u0: Vec<f64>,
    /// Unpredictability values over the same bins.
    pub c: Vec<f64>,
    /// Band layout of the region.
    pub layout: Vec<BandSlice>,
    /// Per-band θ targets, aligned with `layout` (used for constraint
    /// bookkeeping; the flow operators do not depend on them).
    pub thetas: Vec<f64>,
}

/// Centered unpredictability over one band: c̃_k = 1 - c_k N_b / Σ c_j.
///
/// Always sums to zero; an all-zero c slice (where the centering is
/// undefined) yields an all-zero c̃, which drops the second constraint.
pub fn tilde_c(psi: &[f64]) -> Vec<f64> {
    let total: f64 = psi.iter().sum();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in psi {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    // A constant slice centers to zero analytically; snap it there so that
    // rounding noise never masquerades as a constraint direction.
    if total <= 0.0 || hi - lo <= 1e-12 {
        return vec![0.0; psi.len()];
    }
    let scale = psi.len() as f64 / total;
    psi.iter().map(|&ck| 1.0 - ck * scale).collect()
}

/// The flow's building blocks over a region of n bins.
#[derive(Debug, Clone)]
pub struct FlowOperators {
    /// Symmetric tridiagonal with 1 off the diagonal and (-1,-2,…,-2,-1)
    /// on it; the negated path Laplacian, so f's gradient is -Au.
    pub a: Mat,
    /// Block-diagonal orthogonal projector onto the constraint gradients:
    /// per band, entries N_b⁻¹ + c̃_i c̃_j / Σ c̃², with the rank-one term
    /// absent when c̃ vanishes.
    pub r: Mat,
}

impl FlowOperators {
    /// The flow generator (I - R)A.
    pub fn generator(&self) -> Mat {
        let n = self.a.rows();
        Mat::identity(n).add_scaled(-1.0, &self.r).mul(&self.a)
    }
}

/// Assemble A and R for a smoothing problem.
pub fn build_operators(problem: &SmoothingProblem) -> FlowOperators {
    let n = problem.u0.len();
    debug_assert_eq!(problem.c.len(), n);

    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = if i == 0 || i == n - 1 { -1.0 } else { -2.0 };
        if i + 1 < n {
            a[(i, i + 1)] = 1.0;
            a[(i + 1, i)] = 1.0;
        }
    }

    let mut r = Mat::zeros(n, n);
    for slice in &problem.layout {
        let ct = tilde_c(&problem.c[slice.range()]);
        let ct_norm2: f64 = ct.iter().map(|v| v * v).sum();
        let inv_n = 1.0 / slice.len as f64;
        for i in 0..slice.len {
            for j in 0..slice.len {
                let mut entry = inv_n;
                if ct_norm2 > 0.0 {
                    entry += ct[i] * ct[j] / ct_norm2;
                }
                r[(slice.offset + i, slice.offset + j)] = entry;
            }
        }
    }

    FlowOperators { a, r }
}

/// Closed-form flow solution u(τ) = exp((I-R)Aτ) u₀.
pub fn flow(problem: &SmoothingProblem, ops: &FlowOperators, tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    if tau == 0.0 {
        return problem.u0.clone();
    }
    expm(&ops.generator().scale(tau)).matvec(&problem.u0)
}

/// The smoothness objective f = ½ Σ (u_{k+1} - u_k)².
pub fn objective(u: &[f64]) -> f64 {
    0.5 * u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>()
}

/// Weight-mass constraint residual g_b = Σρ - 1 over one band slice.
pub fn constraint_g(u: &[f64], slice: &BandSlice) -> f64 {
    u[slice.range()].iter().sum::<f64>() - 1.0
}

/// The centered form of the weighted constraint,
/// h̃_b = Σ c̃ ρ - 1 + N_b θ_b / Σ c, which shares no component with g_b.
/// Zero by convention when the band's c vanishes identically (the second
/// constraint is redundant there).
pub fn constraint_h_tilde(u: &[f64], c: &[f64], slice: &BandSlice, theta: f64) -> f64 {
    let c_slice = &c[slice.range()];
    let total: f64 = c_slice.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let ct = tilde_c(c_slice);
    let dot: f64 = ct.iter().zip(&u[slice.range()]).map(|(a, b)| a * b).sum();
    dot - 1.0 + slice.len as f64 * theta / total
}

/// Smooth the wide-band part of a full per-bin weight vector in place.
///
/// Bins belonging to bands of width <= 2 are untouched. The flow acts on ρ
/// (squared weights); clamping of any negative components happens once,
/// afterwards, in the caller.
pub fn smooth_weights(
    rho_bins: &mut [f64; NUM_BINS],
    c_bins: &[f64; NUM_BINS],
    table: &BandTable,
    tau: f64,
) {
    if tau == 0.0 {
        return;
    }
    let region = region_of(table);
    let problem = SmoothingProblem {
        u0: rho_bins[region.k0..].to_vec(),
        c: c_bins[region.k0..].to_vec(),
        layout: region.layout.clone(),
        thetas: vec![0.0; region.layout.len()],
    };
    let ops = build_operators(&problem);
    let smoothed = flow(&problem, &ops, tau);
    rho_bins[region.k0..].copy_from_slice(&smoothed);
}
