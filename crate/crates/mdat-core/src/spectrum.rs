//! Frame extraction and the 256-point transform between time and spectrum.
//!
//! Frames are consecutive, non-overlapping, rectangular-windowed blocks of
//! 256 samples; the last block of a signal is zero-padded. The forward
//! transform is the plain DFT sum `ŝ_k = Σ s_n e^{-i2πnk/N}` (no 1/N), run
//! through an in-place radix-2 FFT; the inverse carries the 1/N.

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use core::f64::consts::PI;

/// Samples per frame. Fixed by the transform's band tables.
pub const FRAME_LEN: usize = 256;

/// One 256-sample block of the input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: [f64; FRAME_LEN],
    /// Position of the frame in the stream, starting at 0.
    pub index: usize,
}

/// DFT of one frame: 256 complex bins, conjugate-symmetric for real input.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub bins: [Complex64; FRAME_LEN],
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumError {
    /// `frames_of` was handed an empty signal.
    EmptySignal,
    /// The spectrum handed to `idft` is not conjugate-symmetric.
    AsymmetricSpectrum { max_error: f64, tolerance: f64 },
    /// The inverse produced a significant imaginary part.
    ImaginaryResidue { max_error: f64 },
}

impl core::fmt::Display for SpectrumError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpectrumError::EmptySignal => write!(f, "signal is empty"),
            SpectrumError::AsymmetricSpectrum { max_error, tolerance } => write!(
                f,
                "spectrum violates conjugate symmetry: max error {max_error:e} > {tolerance:e}"
            ),
            SpectrumError::ImaginaryResidue { max_error } => write!(
                f,
                "inverse transform left an imaginary residue of {max_error:e}"
            ),
        }
    }
}

impl core::error::Error for SpectrumError {}

/// Split a signal into consecutive frames, zero-padding the last one.
pub fn frames_of(signal: &[f64]) -> Result<Vec<Frame>, SpectrumError> {
    if signal.is_empty() {
        return Err(SpectrumError::EmptySignal);
    }
    let count = signal.len().div_ceil(FRAME_LEN);
    let mut frames = Vec::with_capacity(count);
    for index in 0..count {
        let start = index * FRAME_LEN;
        let end = (start + FRAME_LEN).min(signal.len());
        let mut samples = [0.0; FRAME_LEN];
        samples[..end - start].copy_from_slice(&signal[start..end]);
        frames.push(Frame { samples, index });
    }
    Ok(frames)
}

// In-place radix-2 FFT; `sign` is the exponent sign (-1 forward, +1 inverse).
fn fft_in_place(bins: &mut [Complex64; FRAME_LEN], sign: f64) {
    for i in 0..FRAME_LEN {
        let j = (i as u8).reverse_bits() as usize;
        if j > i {
            bins.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= FRAME_LEN {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        for start in (0..FRAME_LEN).step_by(len) {
            for off in 0..half {
                let w = Complex64::new((step * off as f64).cos(), (step * off as f64).sin());
                let u = bins[start + off];
                let v = bins[start + off + half] * w;
                bins[start + off] = u + v;
                bins[start + off + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Forward DFT of one frame.
pub fn dft(frame: &Frame) -> SpectralFrame {
    let mut bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
    for (bin, &s) in bins.iter_mut().zip(&frame.samples) {
        *bin = Complex64::new(s, 0.0);
    }
    fft_in_place(&mut bins, -1.0);
    SpectralFrame { bins, index: frame.index }
}

/// Inverse DFT back to a real frame.
///
/// The spectrum must be conjugate-symmetric (relative to its own scale);
/// the real part of the inverse is returned and the imaginary residue is
/// checked.
pub fn idft(spectrum: &SpectralFrame) -> Result<Frame, SpectrumError> {
    let scale = spectrum
        .bins
        .iter()
        .map(|b| b.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut max_sym_err = 0.0_f64;
    for k in 1..FRAME_LEN / 2 {
        let err = (spectrum.bins[FRAME_LEN - k] - spectrum.bins[k].conj()).norm();
        max_sym_err = max_sym_err.max(err);
    }
    max_sym_err = max_sym_err
        .max(spectrum.bins[0].im.abs())
        .max(spectrum.bins[FRAME_LEN / 2].im.abs());
    let tolerance = 1e-6 * scale;
    if max_sym_err > tolerance {
        return Err(SpectrumError::AsymmetricSpectrum { max_error: max_sym_err, tolerance });
    }

    let mut bins = spectrum.bins;
    fft_in_place(&mut bins, 1.0);
    let mut samples = [0.0; FRAME_LEN];
    let mut max_im = 0.0_f64;
    for (out, bin) in samples.iter_mut().zip(&bins) {
        *out = bin.re / FRAME_LEN as f64;
        max_im = max_im.max(bin.im.abs() / FRAME_LEN as f64);
    }
    let re_scale = samples.iter().map(|s| s.abs()).fold(1.0, f64::max);
    if max_im > 1e-9 * re_scale {
        return Err(SpectrumError::ImaginaryResidue { max_error: max_im });
    }
    Ok(Frame { samples, index: spectrum.index })
}

impl SpectralFrame {
    /// Amplitude and phase of bin `k`, with phase in (-π, π] and the
    /// convention that a zero bin has phase 0.
    pub fn amp_phase(&self, k: usize) -> (f64, f64) {
        let bin = self.bins[k];
        let r = bin.norm();
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let mut f = bin.im.atan2(bin.re);
        if f == -PI {
            f = PI;
        }
        (r, f)
    }

    pub fn amplitude(&self, k: usize) -> f64 {
        self.bins[k].norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::vec;

    /// Direct evaluation of the transform sum; the oracle the FFT must match.
    fn dft_direct(samples: &[f64; FRAME_LEN]) -> [Complex64; FRAME_LEN] {
        let mut bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
        for (k, bin) in bins.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &s) in samples.iter().enumerate() {
                let ang = -2.0 * PI * (n * k) as f64 / FRAME_LEN as f64;
                acc += s * Complex64::new(ang.cos(), ang.sin());
            }
            *bin = acc;
        }
        bins
    }

    fn random_frame(rng: &mut impl Rng) -> Frame {
        let mut samples = [0.0; FRAME_LEN];
        for s in samples.iter_mut() {
            *s = rng.random_range(-1.0..1.0);
        }
        Frame { samples, index: 0 }
    }

    #[test]
    fn all_ones_frame_concentrates_in_dc() {
        let frame = Frame { samples: [1.0; FRAME_LEN], index: 0 };
        let spec = dft(&frame);
        assert!((spec.bins[0].re - 256.0).abs() < 1e-9);
        assert!(spec.bins[0].im.abs() < 1e-9);
        for k in 1..FRAME_LEN {
            assert!(spec.bins[k].norm() < 1e-9, "bin {k} = {}", spec.bins[k]);
        }
    }

    #[test]
    fn impulse_at_zero_gives_flat_spectrum() {
        let mut samples = [0.0; FRAME_LEN];
        samples[0] = 1.0;
        let spec = dft(&Frame { samples, index: 0 });
        for k in 0..FRAME_LEN {
            assert!((spec.bins[k] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn cosine_at_bin_five_has_half_n_amplitude() {
        let mut samples = [0.0; FRAME_LEN];
        for (n, s) in samples.iter_mut().enumerate() {
            *s = (2.0 * PI * n as f64 * 5.0 / 256.0).cos();
        }
        let spec = dft(&Frame { samples, index: 0 });
        // Expected values frozen from the direct-sum oracle.
        let direct = dft_direct(&samples);
        assert!((direct[5].norm() - 128.0).abs() < 1e-9 * 128.0);
        assert!((spec.bins[5].norm() - 128.0).abs() < 1e-9 * 128.0);
        for k in 0..=128 {
            if k != 5 {
                assert!(spec.bins[k].norm() <= 1e-9 * 128.0, "bin {k}");
            }
        }
    }

    #[test]
    fn fft_matches_direct_sum_on_100_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let frame = random_frame(&mut rng);
            let fast = dft(&frame);
            let direct = dft_direct(&frame.samples);
            let scale = direct.iter().map(|b| b.norm()).fold(f64::MIN_POSITIVE, f64::max);
            for k in 0..FRAME_LEN {
                worst = worst.max((fast.bins[k] - direct[k]).norm() / scale);
            }
        }
        assert!(worst < 1e-9, "max relative error {worst:e}");
    }

    #[test]
    fn idft_recovers_unit_impulse_from_flat_spectrum() {
        let bins = [Complex64::new(1.0, 0.0); FRAME_LEN];
        let frame = idft(&SpectralFrame { bins, index: 3 }).unwrap();
        assert!((frame.samples[0] - 1.0).abs() < 1e-12);
        for &s in &frame.samples[1..] {
            assert!(s.abs() < 1e-12);
        }
        assert_eq!(frame.index, 3);
    }

    #[test]
    fn zero_spectrum_inverts_to_silence() {
        let bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
        let frame = idft(&SpectralFrame { bins, index: 0 }).unwrap();
        assert!(frame.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let mut bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
        bins[3] = Complex64::new(1.0, 0.0);
        // bins[253] left at zero: not the conjugate of bin 3.
        let err = idft(&SpectralFrame { bins, index: 0 }).unwrap_err();
        assert!(matches!(err, SpectrumError::AsymmetricSpectrum { .. }), "{err:?}");
    }

    #[test]
    fn round_trip_is_identity_within_1e9() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let frame = random_frame(&mut rng);
            let back = idft(&dft(&frame)).unwrap();
            for (a, b) in frame.samples.iter().zip(&back.samples) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn amp_phase_conventions() {
        let mut bins = [Complex64::new(0.0, 0.0); FRAME_LEN];
        bins[1] = Complex64::new(-2.0, 0.0);
        bins[2] = Complex64::new(1.0, 1.0);
        let spec = SpectralFrame { bins, index: 0 };
        assert_eq!(spec.amp_phase(0), (0.0, 0.0));
        let (r, f) = spec.amp_phase(1);
        assert!((r - 2.0).abs() < 1e-15 && (f - PI).abs() < 1e-15);
        let (r, f) = spec.amp_phase(2);
        assert!((r - 2.0_f64.sqrt()).abs() < 1e-15 && (f - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn amp_phase_reproduces_every_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = dft(&random_frame(&mut rng));
        for k in 0..FRAME_LEN {
            let (r, f) = spec.amp_phase(k);
            let rebuilt = Complex64::from_polar(r, f);
            assert!((rebuilt - spec.bins[k]).norm() <= 1e-12 * r.max(1.0), "bin {k}");
            assert!(f > -PI && f <= PI);
        }
    }

    #[test]
    fn frames_of_counts_and_padding() {
        assert_eq!(frames_of(&vec![0.5; 512]).unwrap().len(), 2);
        let frames = frames_of(&vec![0.5; 300]).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames[1].samples[44..].iter().all(|&s| s == 0.0));
        assert!(frames[1].samples[..44].iter().all(|&s| s == 0.5));
        let one = frames_of(&vec![0.25; 256]).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].samples.iter().all(|&s| s == 0.25));
        assert_eq!(frames_of(&[]).unwrap_err(), SpectrumError::EmptySignal);
    }

    proptest! {
        #[test]
        fn parseval_energy_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = random_frame(&mut rng);
            let spec = dft(&frame);
            let time_energy: f64 = frame.samples.iter().map(|s| s * s).sum();
            let spec_energy: f64 =
                spec.bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / FRAME_LEN as f64;
            prop_assert!((time_energy - spec_energy).abs() <= 1e-9 * time_energy.max(1.0));
        }

        #[test]
        fn dft_is_linear(seed in 0u64..200, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_frame(&mut rng);
            let y = random_frame(&mut rng);
            let mut combo = [0.0; FRAME_LEN];
            for i in 0..FRAME_LEN {
                combo[i] = a * x.samples[i] + b * y.samples[i];
            }
            let lhs = dft(&Frame { samples: combo, index: 0 });
            let fx = dft(&x);
            let fy = dft(&y);
            let scale = lhs.bins.iter().map(|c| c.norm()).fold(1.0, f64::max);
            for k in 0..FRAME_LEN {
                let rhs = fx.bins[k] * a + fy.bins[k] * b;
                prop_assert!((lhs.bins[k] - rhs).norm() <= 1e-9 * scale);
            }
        }

        #[test]
        fn real_input_spectra_are_conjugate_symmetric(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = dft(&random_frame(&mut rng));
            let scale = spec.bins.iter().map(|c| c.norm()).fold(1.0, f64::max);
            for k in 1..FRAME_LEN / 2 {
                let err = (spec.bins[FRAME_LEN - k] - spec.bins[k].conj()).norm();
                prop_assert!(err <= 1e-9 * scale);
            }
        }
    }
}
