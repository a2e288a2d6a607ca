//! Forward transform: band energies, unpredictability, bark-domain
//! spreading, tonality and band SNRs.
//!
//! Per frame, every DFT bin gets an unpredictability measure c(k) in [0,1]
//! from a two-frame linear extrapolation of amplitude and phase. Band
//! energy e(b) and the c-weighted energy ec(b) are summed over each band,
//! convolved with a spreading function on the bark axis, and reduced to a
//! noise-to-signal ratio, a tonality index and finally a band SNR between
//! the noise-masking-tone and tone-masking-noise limits.
//!
//! Analysis is strictly sequential per channel (the predictor carries two
//! frames of history); independent channels can run concurrently.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::bands::{BandTable, BandsError, NUM_BINS};
use crate::matrix::Mat;
use crate::spectrum::{self, SpectralFrame, SpectrumError, FRAME_LEN};

/// Tone-masking-noise limit in dB.
pub const TMN_DB: f64 = 18.0;
/// Noise-masking-tone limit in dB.
pub const NMT_DB: f64 = 6.0;

/// Spreading level in dB at a signed bark distance `dz` (positive = upward
/// in frequency), after Schroeder's analytic filter shape.
pub fn spread_db(dz_bark: f64) -> f64 {
    let z = dz_bark + 0.474;
    15.81 + 7.5 * z - 17.5 * (1.0 + z * z).sqrt()
}

/// `spread_db` converted to linear power.
pub fn spread_linear(dz_bark: f64) -> f64 {
    let db = spread_db(dz_bark);
    10.0_f64.powf(db / 10.0)
}

/// Inter-band spreading weights over the AC bands 1..=J of a table.
///
/// `value(from, to)` is the linear leakage of band `from` into band `to`,
/// evaluated at the bark distance of the two bands. All entries are
/// positive, with upward spread (to > from) heavier than downward at equal
/// distance.
#[derive(Debug, Clone)]
pub struct SpreadingMatrix {
    j: usize,
    s: Mat,
}

impl SpreadingMatrix {
    pub fn new(table: &BandTable) -> Self {
        let j = table.j();
        let bands = table.ac_bands();
        let s = Mat::from_fn(j, j, |from, to| {
            spread_linear(bands[to].bark - bands[from].bark)
        });
        SpreadingMatrix { j, s }
    }

    /// Wrap an explicit weight matrix (row = source band, column = target).
    /// Useful for custom filter shapes and tests.
    pub fn from_mat(s: Mat) -> Self {
        assert_eq!(s.rows(), s.cols());
        SpreadingMatrix { j: s.rows(), s }
    }

    /// Number of AC bands covered.
    pub fn j(&self) -> usize {
        self.j
    }

    /// Leakage of band `from` into band `to`; both indices 1-based AC band
    /// numbers.
    pub fn value(&self, from: usize, to: usize) -> f64 {
        self.s[(from - 1, to - 1)]
    }

    /// The raw J×J weight matrix, row = source band, column = target band.
    pub fn mat(&self) -> &Mat {
        &self.s
    }
}

/// Amplitude/phase history of the previous two frames, per bin.
#[derive(Debug, Clone)]
pub struct PredictorState {
    r1: [f64; NUM_BINS],
    f1: [f64; NUM_BINS],
    r2: [f64; NUM_BINS],
    f2: [f64; NUM_BINS],
    frames_seen: usize,
}

/// Prediction requested before two frames of history exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsufficientHistory {
    pub frames_seen: usize,
}

impl core::fmt::Display for InsufficientHistory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "bin prediction needs two prior frames, have {}",
            self.frames_seen
        )
    }
}

impl core::error::Error for InsufficientHistory {}

impl PredictorState {
    pub fn new() -> Self {
        PredictorState {
            r1: [0.0; NUM_BINS],
            f1: [0.0; NUM_BINS],
            r2: [0.0; NUM_BINS],
            f2: [0.0; NUM_BINS],
            frames_seen: 0,
        }
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    /// Linear extrapolation of amplitude and phase for bin `k`: one step
    /// beyond the previous frame along the last observed difference. The
    /// extrapolated amplitude may come out negative; it is used as-is when
    /// forming the predicted complex bin.
    pub fn predict(&self, k: usize) -> Result<(f64, f64), InsufficientHistory> {
        if self.frames_seen < 2 {
            return Err(InsufficientHistory { frames_seen: self.frames_seen });
        }
        let r_pred = 2.0 * self.r1[k] - self.r2[k];
        let f_pred = 2.0 * self.f1[k] - self.f2[k];
        Ok((r_pred, f_pred))
    }

    /// Record the amplitudes and phases of a frame, shifting history.
    pub fn advance(&mut self, spectrum: &SpectralFrame) {
        self.r2 = self.r1;
        self.f2 = self.f1;
        for k in 0..NUM_BINS {
            let (r, f) = spectrum.amp_phase(k);
            self.r1[k] = r;
            self.f1[k] = f;
        }
        self.frames_seen += 1;
    }
}

impl Default for PredictorState {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-bin unpredictability of a frame against its two-frame prediction.
///
/// Each value is in [0,1]: 0 for a perfectly predicted (tonal) bin, 1 for
/// an antipodal miss. With fewer than two frames of history every bin is
/// maximally unpredictable (c = 1); a silent bin predicted as silent is
/// c = 0.
pub fn unpredictability(spectrum: &SpectralFrame, state: &PredictorState) -> [f64; NUM_BINS] {
    let mut c = [1.0; NUM_BINS];
    if state.frames_seen() < 2 {
        return c;
    }
    for (k, ck) in c.iter_mut().enumerate() {
        let (r_pred, f_pred) = state.predict(k).expect("history checked above");
        let predicted = Complex64::from_polar(r_pred, f_pred);
        let actual = spectrum.bins[k];
        let denom = actual.norm() + predicted.norm();
        *ck = if denom == 0.0 {
            0.0
        } else {
            ((actual - predicted).norm() / denom).clamp(0.0, 1.0)
        };
    }
    c
}

/// Energy per band: e(b) = Σ |ŝ_k|² over the band's bins (single-sided,
/// bins 0..=127). Returned vector is indexed by band, length J+1.
pub fn band_energy(spectrum: &SpectralFrame, table: &BandTable) -> Vec<f64> {
    table
        .bands()
        .iter()
        .map(|band| band.bins().map(|k| spectrum.bins[k].norm_sqr()).sum())
        .collect()
}

/// Energy-weighted unpredictability per band: ec(b) = Σ r²(k) c(k).
/// Componentwise 0 <= ec(b) <= e(b).
pub fn weighted_unpredictability(
    spectrum: &SpectralFrame,
    c: &[f64; NUM_BINS],
    table: &BandTable,
) -> Vec<f64> {
    table
        .bands()
        .iter()
        .map(|band| band.bins().map(|k| spectrum.bins[k].norm_sqr() * c[k]).sum())
        .collect()
}

/// Convolve AC-band energy vectors with the spreading weights:
/// ecb = Sᵀe, ct = Sᵀec. Inputs and outputs are AC-only slices of length J
/// (index 0 = band 1).
pub fn spread_convolve(
    e_ac: &[f64],
    ec_ac: &[f64],
    s: &SpreadingMatrix,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(e_ac.len(), s.j());
    assert_eq!(ec_ac.len(), s.j());
    (s.s.matvec_t(e_ac), s.s.matvec_t(ec_ac))
}

/// Noise-to-signal ratio per band: cb = ct/ecb, with cb = 0 where the
/// spread energy is zero (an all-silent frame).
pub fn noise_to_signal(ecb: &[f64], ct: &[f64]) -> Vec<f64> {
    ecb.iter()
        .zip(ct)
        .map(|(&d, &n)| if d == 0.0 { 0.0 } else { n / d })
        .collect()
}

/// Tonality index per band: clamp(-0.299 - 0.43 ln cb, 0, 1), with the
/// limit value 1 at cb = 0.
pub fn tonality(cb: &[f64]) -> Vec<f64> {
    cb.iter()
        .map(|&v| {
            if v <= 0.0 {
                1.0
            } else {
                (-0.299 - 0.43 * v.ln()).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Band SNR in dB: tonal bands rate the tone-masking-noise limit (18 dB),
/// noisy bands the noise-masking-tone limit (6 dB).
pub fn band_snr(tb: &[f64]) -> Vec<f64> {
    tb.iter().map(|&t| t * TMN_DB + (1.0 - t) * NMT_DB).collect()
}

/// Band-domain image of one frame.
///
/// `e` and `ec` cover all bands 0..=J. The spread-domain fields `ecb`,
/// `ct`, `cb`, `tb`, `snr` are defined for the AC bands only; index 0 is
/// kept for alignment and is always 0 (the DC bin is carried verbatim as
/// side information and takes no part in spreading, tonality or SNR).
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionVector {
    pub e: Vec<f64>,
    pub ec: Vec<f64>,
    pub ecb: Vec<f64>,
    pub ct: Vec<f64>,
    pub cb: Vec<f64>,
    pub tb: Vec<f64>,
    pub snr: Vec<f64>,
}

impl PerceptionVector {
    /// Rebuild the derived chain (spreading, cb, tb, snr) from stored band
    /// energies. This is the canonical path both at analysis time and when
    /// loading a serialized payload.
    pub fn from_energies(e: Vec<f64>, ec: Vec<f64>, s: &SpreadingMatrix) -> Self {
        assert_eq!(e.len(), s.j() + 1);
        assert_eq!(ec.len(), s.j() + 1);
        let (ecb_ac, ct_ac) = spread_convolve(&e[1..], &ec[1..], s);
        let cb_ac = noise_to_signal(&ecb_ac, &ct_ac);
        let tb_ac = tonality(&cb_ac);
        let snr_ac = band_snr(&tb_ac);
        let pad = |ac: Vec<f64>| {
            let mut v = vec![0.0];
            v.extend(ac);
            v
        };
        PerceptionVector {
            e,
            ec,
            ecb: pad(ecb_ac),
            ct: pad(ct_ac),
            cb: pad(cb_ac),
            tb: pad(tb_ac),
            snr: pad(snr_ac),
        }
    }
}

/// Everything the inverse assumes known: bin phases, the verbatim DC and
/// Nyquist bins, and the per-bin unpredictability values the band weights
/// are solved against. Phases and c are kept at the 32-bit precision they
/// are serialized with, so in-memory and through-file pipelines agree
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub phases: [f32; NUM_BINS],
    pub c: [f32; NUM_BINS],
    pub dc: Complex64,
    pub nyquist: Complex64,
}

impl SideInfo {
    /// Unpredictability of bin `k` widened back to f64.
    pub fn c_f64(&self, k: usize) -> f64 {
        f64::from(self.c[k])
    }

    /// Phase of bin `k` widened back to f64.
    pub fn phase_f64(&self, k: usize) -> f64 {
        f64::from(self.phases[k])
    }
}

/// One analyzed frame: the perception payload plus its side information.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedFrame {
    pub perception: PerceptionVector,
    pub side: SideInfo,
}

/// Full forward image of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub sample_rate: u32,
    /// Length of the analyzed signal in samples (pre-padding).
    pub original_len: usize,
    pub frames: Vec<AnalyzedFrame>,
}

impl Analysis {
    pub fn table(&self) -> BandTable {
        BandTable::for_sample_rate(self.sample_rate).expect("rate validated at construction")
    }

    pub fn j(&self) -> usize {
        self.table().j()
    }
}

/// Streaming analyzer; owns the predictor state, so frames must be pushed
/// in temporal order.
pub struct Analyzer {
    table: BandTable,
    spreading: SpreadingMatrix,
    state: PredictorState,
}

impl Analyzer {
    pub fn new(table: BandTable) -> Self {
        let spreading = SpreadingMatrix::new(&table);
        Analyzer { table, spreading, state: PredictorState::new() }
    }

    pub fn table(&self) -> &BandTable {
        &self.table
    }

    pub fn spreading(&self) -> &SpreadingMatrix {
        &self.spreading
    }

    /// Analyze the next frame. c is rounded to its serialized 32-bit
    /// precision before ec and everything downstream is computed, which
    /// keeps the payload self-consistent across the file boundary.
    pub fn push(&mut self, spectrum: &SpectralFrame) -> AnalyzedFrame {
        let c_raw = unpredictability(spectrum, &self.state);
        let mut c_stored = [0.0f32; NUM_BINS];
        let mut c = [0.0f64; NUM_BINS];
        for k in 0..NUM_BINS {
            c_stored[k] = c_raw[k] as f32;
            c[k] = f64::from(c_stored[k]);
        }

        let e = band_energy(spectrum, &self.table);
        let ec = weighted_unpredictability(spectrum, &c, &self.table);
        let perception = PerceptionVector::from_energies(e, ec, &self.spreading);

        let mut phases = [0.0f32; NUM_BINS];
        for (k, p) in phases.iter_mut().enumerate() {
            *p = spectrum.amp_phase(k).1 as f32;
        }
        let side = SideInfo {
            phases,
            c: c_stored,
            dc: spectrum.bins[0],
            nyquist: spectrum.bins[FRAME_LEN / 2],
        };

        self.state.advance(spectrum);
        AnalyzedFrame { perception, side }
    }
}

/// Errors from the whole-signal forward transform.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardError {
    Bands(BandsError),
    Spectrum(SpectrumError),
}

impl From<BandsError> for ForwardError {
    fn from(e: BandsError) -> Self {
        ForwardError::Bands(e)
    }
}

impl From<SpectrumError> for ForwardError {
    fn from(e: SpectrumError) -> Self {
        ForwardError::Spectrum(e)
    }
}

impl core::fmt::Display for ForwardError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ForwardError::Bands(e) => write!(f, "{e}"),
            ForwardError::Spectrum(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ForwardError {}

/// Forward transform of a whole signal: frame, transform, analyze.
pub fn analyze(samples: &[f64], sample_rate: u32) -> Result<Analysis, ForwardError> {
    let table = BandTable::for_sample_rate(sample_rate)?;
    let frames = spectrum::frames_of(samples)?;
    let mut analyzer = Analyzer::new(table);
    let analyzed = frames.iter().map(|f| analyzer.push(&spectrum::dft(f))).collect();
    Ok(Analysis { sample_rate, original_len: samples.len(), frames: analyzed })
}
