//! Inversion: recover the per-band weight targets θ_b from the perception
//! payload, solve the two-constraint weight problem per band in closed
//! form, and rebuild a spectrum that conserves every band's energy and
//! c-weighted energy.
//!
//! Two recovery routes exist. The canonical payload (e, ec) gives
//! θ_b = ec(b)/e(b) directly. From the (e, cb) description the targets are
//! found by box-constrained least squares against the row-stochastic
//! spread-and-normalize matrix Q, with per-band bounds taken from the side
//! information's c values. A plain linear solve of the energy-weighted
//! spreading system is also provided for SNR-invariant processing; unlike
//! the box solver it can return negative components.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::bands::{BandTable, NUM_BINS};
use crate::forward::{AnalyzedFrame, Analysis, SideInfo, SpreadingMatrix};
use crate::matrix::Mat;
use crate::smooth;
use crate::spectrum::{self, SpectralFrame, SpectrumError, FRAME_LEN};

/// Which payload fields drive θ recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMode {
    /// Recover θ from (e, cb) by box-constrained least squares.
    V1,
    /// Read θ = ec/e directly from the canonical payload.
    V2,
}

/// Inversion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertOptions {
    pub mode: InversionMode,
    /// Flow time of the spectral smoother; 0 disables smoothing.
    pub tau: f64,
}

impl Default for InvertOptions {
    fn default() -> Self {
        InvertOptions { mode: InversionMode::V2, tau: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvertError {
    /// The energy-weighted spreading system has no unique solution (this
    /// happens structurally at 44.1 kHz, where the top four bands share a
    /// bark value and the spreading matrix repeats rows).
    SingularSystem,
    /// The box-constrained solver ran out of iterations; the best iterate
    /// and its residual are attached.
    QpNonConvergence { iterations: usize, residual: f64, best: Vec<f64> },
    /// Spreading of an all-silent spectrum was requested.
    SilentSpectrum,
    /// The rebuilt spectrum failed the inverse transform's checks.
    Spectrum(SpectrumError),
}

impl core::fmt::Display for InvertError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InvertError::SingularSystem => {
                write!(f, "energy-weighted spreading system is singular")
            }
            InvertError::QpNonConvergence { iterations, residual, .. } => write!(
                f,
                "box-constrained solver did not converge in {iterations} iterations \
                 (residual {residual:e})"
            ),
            InvertError::SilentSpectrum => {
                write!(f, "all bands are silent; no spreading normalization exists")
            }
            InvertError::Spectrum(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for InvertError {}

impl From<SpectrumError> for InvertError {
    fn from(e: SpectrumError) -> Self {
        InvertError::Spectrum(e)
    }
}

/// How a θ vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMethod {
    DirectSolve,
    BoxLeastSquares,
    PassthroughV2,
}

/// Recovered per-band θ targets. Indexed by band (0..=J); `None` marks the
/// DC band and bands with no energy, which reconstruct to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRecovery {
    pub theta: Vec<Option<f64>>,
    /// Final ‖cb - Qy‖₂ (0 for the direct routes).
    pub residual: f64,
    pub method: RecoveryMethod,
    /// Iterations spent by the box solver (0 for the direct routes).
    pub iterations: usize,
}

/// θ_b = ec(b)/e(b), the c-weighted mean square weight each band must
/// reproduce. Bands without energy are inactive.
pub fn theta_from_v2(e: &[f64], ec: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(e.len(), ec.len());
    let mut theta: Vec<Option<f64>> = e
        .iter()
        .zip(ec)
        .map(|(&eb, &ecb)| if eb > 0.0 { Some(ecb / eb) } else { None })
        .collect();
    theta[0] = None; // DC is carried verbatim, never weighted
    theta
}

/// The row-stochastic recovery matrix: row i, column j holds band j's
/// share of the spread energy landing in band i. Rows sum to one.
pub fn q_matrix(e: &[f64], s: &SpreadingMatrix) -> Result<Mat, InvertError> {
    let j = s.j();
    assert_eq!(e.len(), j + 1);
    let mut q = Mat::from_fn(j, j, |to, from| e[from + 1] * s.value(from + 1, to + 1));
    for i in 0..j {
        let denom: f64 = (0..j).map(|col| q[(i, col)]).sum();
        if denom <= 0.0 {
            return Err(InvertError::SilentSpectrum);
        }
        for col in 0..j {
            q[(i, col)] /= denom;
        }
    }
    Ok(q)
}

const QP_MAX_ITERS: usize = 10_000;
// Stop once the step-scaled gradient projection falls below this. Tighter
// than the reported solver tolerance of 1e-8 so that consistent systems
// also reach residuals below 1e-8.
const QP_STOP: f64 = 1e-10;

fn project(y: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in y.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Minimize ‖cb - Q y‖₂ subject to lo <= y <= hi by projected gradient
/// descent with fixed step 1/‖Q‖₂².
fn solve_box_least_squares(
    q: &Mat,
    cb: &[f64],
    lo: &[f64],
    hi: &[f64],
    mut y: Vec<f64>,
) -> Result<(Vec<f64>, f64, usize), InvertError> {
    project(&mut y, lo, hi);
    let sigma = q.spectral_norm_est();
    if sigma == 0.0 {
        return Ok((y, l2(cb), 0));
    }
    let step = 1.0 / (sigma * sigma * 1.05);
    for iter in 1..=QP_MAX_ITERS {
        let mut r = q.matvec(&y);
        for (ri, &c) in r.iter_mut().zip(cb) {
            *ri -= c;
        }
        let g = q.matvec_t(&r);
        let mut y_next: Vec<f64> = y.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        project(&mut y_next, lo, hi);
        let pg = y
            .iter()
            .zip(&y_next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / step;
        y = y_next;
        if pg < QP_STOP {
            let mut r = q.matvec(&y);
            for (ri, &c) in r.iter_mut().zip(cb) {
                *ri -= c;
            }
            return Ok((y, l2(&r), iter));
        }
    }
    let mut r = q.matvec(&y);
    for (ri, &c) in r.iter_mut().zip(cb) {
        *ri -= c;
    }
    Err(InvertError::QpNonConvergence {
        iterations: QP_MAX_ITERS,
        residual: l2(&r),
        best: y,
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Recover θ from the (e, cb) payload by box-constrained least squares.
///
/// `bounds[b]` is the (min, max) of the side information's c values over
/// band b. Bands without energy are excluded from the problem (their
/// columns of Q vanish) and come back as `None`.
pub fn theta_from_v1(
    e: &[f64],
    cb: &[f64],
    bounds: &[(f64, f64)],
    s: &SpreadingMatrix,
) -> Result<ThetaRecovery, InvertError> {
    let j = s.j();
    assert_eq!(e.len(), j + 1);
    assert_eq!(cb.len(), j + 1);
    assert_eq!(bounds.len(), j + 1);

    let active: Vec<usize> = (1..=j).filter(|&b| e[b] > 0.0).collect();
    let mut theta = vec![None; j + 1];
    if active.is_empty() {
        return Ok(ThetaRecovery {
            theta,
            residual: 0.0,
            method: RecoveryMethod::BoxLeastSquares,
            iterations: 0,
        });
    }

    let q_full = q_matrix(e, s)?;
    let qa = Mat::from_fn(j, active.len(), |row, col| q_full[(row, active[col] - 1)]);
    let lo: Vec<f64> = active.iter().map(|&b| bounds[b].0).collect();
    let hi: Vec<f64> = active.iter().map(|&b| bounds[b].1).collect();
    let y0: Vec<f64> = active.iter().map(|&b| cb[b]).collect();
    let cb_rows = &cb[1..];

    match solve_box_least_squares(&qa, cb_rows, &lo, &hi, y0) {
        Ok((y, residual, iterations)) => {
            for (&b, &yb) in active.iter().zip(&y) {
                theta[b] = Some(yb);
            }
            Ok(ThetaRecovery {
                theta,
                residual,
                method: RecoveryMethod::BoxLeastSquares,
                iterations,
            })
        }
        Err(e) => Err(e),
    }
}

/// Recover θ by directly solving the energy-weighted spreading system
/// (no box, no projection). Suits processing that keeps band SNRs
/// invariant; the solution may contain negative components, which the
/// caller must treat (the spreading system has no nonnegative inverse).
pub fn theta_direct(
    cb: &[f64],
    s: &SpreadingMatrix,
    e: &[f64],
) -> Result<Vec<Option<f64>>, InvertError> {
    let j = s.j();
    assert_eq!(e.len(), j + 1);
    assert_eq!(cb.len(), j + 1);
    let active: Vec<usize> = (1..=j).filter(|&b| e[b] > 0.0).collect();
    let mut theta = vec![None; j + 1];
    if active.is_empty() {
        return Ok(theta);
    }
    // Row b: Σ_{b'} spread(b'→b) e(b') θ(b') = cb(b) Σ_{b'} spread(b'→b) e(b'),
    // restricted to bands that carry energy.
    let m = Mat::from_fn(active.len(), active.len(), |row, col| {
        s.value(active[col], active[row]) * e[active[col]]
    });
    let rhs: Vec<f64> = active
        .iter()
        .map(|&b| {
            let ecb: f64 = active.iter().map(|&src| s.value(src, b) * e[src]).sum();
            cb[b] * ecb
        })
        .collect();
    let x = m.lu().map_err(|_| InvertError::SingularSystem)?.solve_vec(&rhs);
    for (&b, &xb) in active.iter().zip(&x) {
        theta[b] = Some(xb);
    }
    Ok(theta)
}

/// The two-constraint weight problem of one band: unit mass and c-weighted
/// mass θ over the band's unpredictability values ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct BandWeightProblem {
    pub band: usize,
    pub psi: Vec<f64>,
    pub theta: f64,
}

/// Solved band weights: squared weights ρ (unit sum) and their roots.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    /// True when negative components had to be clamped away.
    pub clamped: bool,
    pub theta_target: f64,
    /// Σρc actually achieved (differs from the target only after clamping).
    pub theta_achieved: f64,
}

// ψ spreads smaller than this are treated as parallel to the ones vector.
const PARALLEL_EPS: f64 = 1e-12;
// Negative ρ mass larger than this counts as material clamping in the
// diagnostics; anything negative is zeroed regardless.
const CLAMP_REPORT_EPS: f64 = 1e-9;

/// The minimum-norm two-dimensional solution of the band constraints:
/// ρ lies in span{1, ψ} with Σρ = 1 and ψ·ρ = θ. Components may be
/// negative when θ sits near an end of ψ's range; callers clamp afterwards.
/// A ψ parallel to the ones vector (constant, including all-zero) leaves
/// only the mass constraint and yields the uniform solution.
pub fn band_rho(psi: &[f64], theta: f64) -> Vec<f64> {
    let n = psi.len();
    let nf = n as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in psi {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if n == 1 || hi - lo <= PARALLEL_EPS {
        return vec![1.0 / nf; n];
    }
    let sum_psi: f64 = psi.iter().sum();
    let ratio = nf / sum_psi; // e·e / e·ψ
    let t = 1.0 - ratio * theta;
    let v_norm2: f64 = psi
        .iter()
        .map(|&p| {
            let d = 1.0 - ratio * p;
            d * d
        })
        .sum();
    let along_ones = 1.0 / nf + t / v_norm2;
    let along_psi = -ratio * t / v_norm2;
    psi.iter().map(|&p| along_ones + along_psi * p).collect()
}

/// Zero out negative components and rescale to unit mass, reporting
/// whether material clamping happened and the c-weighted mass achieved.
pub fn finalize_rho(rho: &mut [f64], psi: &[f64]) -> (bool, f64) {
    let mut min = 0.0_f64;
    for &r in rho.iter() {
        min = min.min(r);
    }
    let clamped = min < -CLAMP_REPORT_EPS;
    if min < 0.0 {
        for r in rho.iter_mut() {
            if *r < 0.0 {
                *r = 0.0;
            }
        }
    }
    let sum: f64 = rho.iter().sum();
    debug_assert!(sum > 0.0, "band weight mass vanished");
    for r in rho.iter_mut() {
        *r /= sum;
    }
    let achieved: f64 = rho.iter().zip(psi).map(|(r, c)| r * c).sum();
    (clamped, achieved)
}

/// Solve one band's weight problem end to end (no smoothing).
pub fn simple_weights(problem: &BandWeightProblem) -> WeightVector {
    let mut rho = band_rho(&problem.psi, problem.theta);
    let (clamped, theta_achieved) = finalize_rho(&mut rho, &problem.psi);
    let w = rho.iter().map(|&r| r.sqrt()).collect();
    WeightVector { rho, w, clamped, theta_target: problem.theta, theta_achieved }
}

/// Per-frame inversion diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameDiagnostics {
    /// AC bands carrying energy.
    pub active_bands: usize,
    /// Bands whose weights needed material clamping.
    pub clamped_bands: usize,
    /// Largest |Σρc - θ| over the frame's bands.
    pub max_theta_deviation: f64,
    /// ‖cb - Qy‖₂ of the θ recovery (V1 mode only).
    pub qp_residual: Option<f64>,
    /// Iterations of the θ recovery (V1 mode only).
    pub qp_iterations: Option<usize>,
}

fn raw_rho_bins(
    e: &[f64],
    theta: &[Option<f64>],
    side: &SideInfo,
    table: &BandTable,
) -> [f64; NUM_BINS] {
    let mut rho_bins = [0.0; NUM_BINS];
    for band in table.ac_bands() {
        let Some(theta_b) = theta[band.index] else { continue };
        debug_assert!(e[band.index] > 0.0);
        let psi: Vec<f64> = band.bins().map(|k| side.c_f64(k)).collect();
        for (value, k) in band_rho(&psi, theta_b).into_iter().zip(band.bins()) {
            rho_bins[k] = value;
        }
    }
    rho_bins
}

fn finalize_and_assemble(
    e: &[f64],
    theta: &[Option<f64>],
    mut rho_bins: [f64; NUM_BINS],
    side: &SideInfo,
    table: &BandTable,
) -> (SpectralFrame, FrameDiagnostics) {
    let mut bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
    let mut diag = FrameDiagnostics::default();
    for band in table.ac_bands() {
        let Some(theta_b) = theta[band.index] else { continue };
        diag.active_bands += 1;
        let psi: Vec<f64> = band.bins().map(|k| side.c_f64(k)).collect();
        let slice = &mut rho_bins[band.low_bin..=band.high_bin];
        let (clamped, achieved) = finalize_rho(slice, &psi);
        if clamped {
            diag.clamped_bands += 1;
        }
        diag.max_theta_deviation = diag.max_theta_deviation.max((achieved - theta_b).abs());
        let amp_scale = e[band.index].sqrt();
        for (i, k) in band.bins().enumerate() {
            bins[k] = Complex64::from_polar(slice[i].sqrt() * amp_scale, side.phase_f64(k));
        }
    }
    bins[0] = side.dc;
    bins[FRAME_LEN / 2] = side.nyquist;
    for k in 1..FRAME_LEN / 2 {
        bins[FRAME_LEN - k] = bins[k].conj();
    }
    (SpectralFrame { bins, index: 0 }, diag)
}

/// Rebuild a spectrum from band energies, θ targets and side information
/// (the τ = 0 path; no smoothing). Per active band, the assembled bins
/// carry exactly the band energy; inactive bands come out silent; DC and
/// Nyquist are copied verbatim and the upper half mirrors by conjugation.
pub fn reconstruct_spectrum(
    e: &[f64],
    theta: &[Option<f64>],
    side: &SideInfo,
    table: &BandTable,
) -> (SpectralFrame, FrameDiagnostics) {
    let rho = raw_rho_bins(e, theta, side, table);
    finalize_and_assemble(e, theta, rho, side, table)
}

/// Reusable per-table state for frame inversion.
pub struct InversionContext {
    pub table: BandTable,
    pub spreading: SpreadingMatrix,
}

impl InversionContext {
    pub fn new(table: BandTable) -> Self {
        let spreading = SpreadingMatrix::new(&table);
        InversionContext { table, spreading }
    }
}

/// Invert a single analyzed frame into a spectrum.
pub fn invert_frame(
    frame: &AnalyzedFrame,
    ctx: &InversionContext,
    opts: &InvertOptions,
) -> Result<(SpectralFrame, FrameDiagnostics), InvertError> {
    let e = &frame.perception.e;
    let (theta, qp_residual, qp_iterations) = match opts.mode {
        InversionMode::V2 => (theta_from_v2(e, &frame.perception.ec), None, None),
        InversionMode::V1 => {
            let bounds = band_c_bounds(&frame.side, &ctx.table);
            let recovery = theta_from_v1(e, &frame.perception.cb, &bounds, &ctx.spreading)?;
            (recovery.theta, Some(recovery.residual), Some(recovery.iterations))
        }
    };

    let mut rho = raw_rho_bins(e, &theta, &frame.side, &ctx.table);
    if opts.tau > 0.0 {
        let mut c_bins = [0.0; NUM_BINS];
        for (k, c) in c_bins.iter_mut().enumerate() {
            *c = frame.side.c_f64(k);
        }
        smooth::smooth_weights(&mut rho, &c_bins, &ctx.table, opts.tau);
    }
    let (spectral, mut diag) = finalize_and_assemble(e, &theta, rho, &frame.side, &ctx.table);
    diag.qp_residual = qp_residual;
    diag.qp_iterations = qp_iterations;
    Ok((spectral, diag))
}

/// Per-band (min, max) of the stored unpredictability values; the box the
/// V1 recovery is constrained to.
pub fn band_c_bounds(side: &SideInfo, table: &BandTable) -> Vec<(f64, f64)> {
    table
        .bands()
        .iter()
        .map(|band| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in band.bins() {
                let c = side.c_f64(k);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            (lo, hi)
        })
        .collect()
}

/// Aggregate diagnostics of a whole-signal inversion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvertReport {
    pub frames: usize,
    pub active_bands: usize,
    pub clamped_bands: usize,
    pub max_theta_deviation: f64,
    pub max_qp_residual: f64,
    pub max_qp_iterations: usize,
}

impl InvertReport {
    fn absorb(&mut self, diag: &FrameDiagnostics) {
        self.active_bands += diag.active_bands;
        self.clamped_bands += diag.clamped_bands;
        self.max_theta_deviation = self.max_theta_deviation.max(diag.max_theta_deviation);
        if let Some(r) = diag.qp_residual {
            self.max_qp_residual = self.max_qp_residual.max(r);
        }
        if let Some(i) = diag.qp_iterations {
            self.max_qp_iterations = self.max_qp_iterations.max(i);
        }
    }

    /// Fraction of active bands that needed clamping.
    pub fn clamp_rate(&self) -> f64 {
        if self.active_bands == 0 {
            0.0
        } else {
            self.clamped_bands as f64 / self.active_bands as f64
        }
    }
}

/// Invert a whole analysis back to a time signal, trimmed to the original
/// length. Frames are processed in order; each one is independent given
/// its side information.
pub fn invert(
    analysis: &Analysis,
    opts: &InvertOptions,
) -> Result<(Vec<f64>, InvertReport), InvertError> {
    let ctx = InversionContext::new(analysis.table());
    let mut samples = Vec::with_capacity(analysis.frames.len() * FRAME_LEN);
    let mut report = InvertReport { frames: analysis.frames.len(), ..Default::default() };
    for frame in &analysis.frames {
        let (spectral, diag) = invert_frame(frame, &ctx, opts)?;
        report.absorb(&diag);
        let time = spectrum::idft(&spectral)?;
        samples.extend_from_slice(&time.samples);
    }
    samples.truncate(analysis.original_len);
    Ok((samples, report))
}
