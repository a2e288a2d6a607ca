//! Fixed critical-band partitions of the 128 single-sided DFT bins.
//!
//! One partition per supported sampling rate: 16 kHz (47 bands, speech
//! material) and 44.1 kHz (42 bands, music material). Band 0 holds only the
//! DC bin; the remaining "AC" bands group bins 1..=127 into widths that
//! track the human auditory filter bandwidths, each annotated with its bark
//! value at two-decimal precision. The tables are hard data, not derived
//! from a bark formula; a checksum test guards the transcription.

use alloc::format;
use alloc::string::String;

use num_traits::Float;

/// Number of single-sided DFT bins covered by a band table.
pub const NUM_BINS: usize = 128;

/// One critical band: a contiguous, inclusive range of DFT bins plus its
/// bark value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    /// Band index within its table (0 = DC).
    pub index: usize,
    /// Lowest DFT bin of the band (inclusive).
    pub low_bin: usize,
    /// Highest DFT bin of the band (inclusive).
    pub high_bin: usize,
    /// Bark value of the band.
    pub bark: f64,
}

impl Band {
    /// Number of DFT bins in the band.
    pub fn width(&self) -> usize {
        self.high_bin - self.low_bin + 1
    }

    /// Inclusive bin range as an iterator.
    pub fn bins(&self) -> core::ops::RangeInclusive<usize> {
        self.low_bin..=self.high_bin
    }
}

/// A complete band partition for one sampling rate.
///
/// Immutable static data; freely shareable across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandTable {
    /// Sampling rate the partition belongs to, in Hz.
    pub sample_rate: u32,
    bands: &'static [Band],
}

/// Requested something outside the fixed tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandsError {
    /// Only 16000 Hz and 44100 Hz have partitions.
    UnsupportedSampleRate(u32),
    /// Bin index outside 0..=127.
    BinOutOfRange(usize),
}

impl core::fmt::Display for BandsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BandsError::UnsupportedSampleRate(rate) => write!(
                f,
                "unsupported sample rate {rate} Hz (supported: 16000 Hz, 44100 Hz)"
            ),
            BandsError::BinOutOfRange(k) => {
                write!(f, "DFT bin {k} outside the banded range 0..={}", NUM_BINS - 1)
            }
        }
    }
}

impl core::error::Error for BandsError {}

impl BandTable {
    /// Look up the fixed partition for a sampling rate.
    pub fn for_sample_rate(sample_rate: u32) -> Result<BandTable, BandsError> {
        match sample_rate {
            16000 => Ok(BandTable { sample_rate, bands: &BANDS_16K }),
            44100 => Ok(BandTable { sample_rate, bands: &BANDS_44K1 }),
            other => Err(BandsError::UnsupportedSampleRate(other)),
        }
    }

    /// All bands in index order, band 0 (DC) first.
    pub fn bands(&self) -> &'static [Band] {
        self.bands
    }

    /// Highest band index; bands 1..=J are the AC bands.
    pub fn j(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn band(&self, b: usize) -> &'static Band {
        &self.bands[b]
    }

    /// The unique band containing DFT bin `k`.
    pub fn band_of_bin(&self, k: usize) -> Result<&'static Band, BandsError> {
        if k >= NUM_BINS {
            return Err(BandsError::BinOutOfRange(k));
        }
        let idx = self.bands.partition_point(|band| band.high_bin < k);
        Ok(&self.bands[idx])
    }

    /// AC bands in index order (everything except the DC band).
    pub fn ac_bands(&self) -> &'static [Band] {
        &self.bands[1..]
    }

    /// First band of the contiguous wide-band run (width >= 3) that extends
    /// to bin 127. Every table ends in such a run; the spectral smoother
    /// operates on exactly this range.
    pub fn first_wide_band(&self) -> usize {
        self.bands
            .iter()
            .position(|b| b.width() >= 3)
            .expect("every table has wide bands")
    }

    /// The table as CSV with columns `band,low,high,width,bark`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,low,high,width,bark\n");
        for b in self.bands {
            out.push_str(&format!(
                "{},{},{},{},{:.2}\n",
                b.index,
                b.low_bin,
                b.high_bin,
                b.width(),
                b.bark
            ));
        }
        out
    }

    /// FNV-1a digest over `(index, low, high, round(bark*100))` of every
    /// band, used by the transcription guard test.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.bands {
            for v in [
                b.index as u64,
                b.low_bin as u64,
                b.high_bin as u64,
                (b.bark * 100.0).round() as u64,
            ] {
                h ^= v;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

const fn band(low_bin: usize, high_bin: usize, bark: f64) -> Band {
    Band { index: 0, low_bin, high_bin, bark }
}

const fn with_indices<const N: usize>(mut bands: [Band; N]) -> [Band; N] {
    let mut i = 0;
    while i < N {
        bands[i].index = i;
        i += 1;
    }
    bands
}

/// Partition for 16 kHz material: 47 bands (J = 46) over bins 0..=127.
static BANDS_16K: [Band; 47] = with_indices([
    band(0, 0, 0.0),
    band(1, 1, 0.63),
    band(2, 2, 1.26),
    band(3, 3, 1.88),
    band(4, 4, 2.5),
    band(5, 5, 3.11),
    band(6, 6, 3.7),
    band(7, 7, 4.28),
    band(8, 8, 4.85),
    band(9, 9, 5.39),
    band(10, 10, 5.92),
    band(11, 11, 6.43),
    band(12, 12, 6.93),
    band(13, 13, 7.4),
    band(14, 14, 7.85),
    band(15, 15, 8.29),
    band(16, 16, 8.7),
    band(17, 17, 9.1),
    band(18, 18, 9.49),
    band(19, 19, 9.85),
    band(20, 20, 10.2),
    band(21, 22, 10.85),
    band(23, 24, 11.44),
    band(25, 26, 11.99),
    band(27, 28, 12.5),
    band(29, 30, 12.96),
    band(31, 32, 13.39),
    band(33, 34, 13.78),
    band(35, 36, 14.15),
    band(37, 39, 14.57),
    band(40, 42, 15.03),
    band(43, 45, 15.45),
    band(46, 48, 15.84),
    band(49, 51, 16.19),
    band(52, 55, 16.57),
    band(56, 59, 16.97),
    band(60, 63, 17.33),
    band(64, 68, 17.71),
    band(69, 73, 18.09),
    band(74, 78, 18.44),
    band(79, 84, 18.8),
    band(85, 90, 19.17),
    band(91, 97, 19.53),
    band(98, 104, 19.89),
    band(105, 112, 20.25),
    band(113, 120, 20.61),
    band(121, 127, 20.92),
]);

/// Partition for 44.1 kHz material: 42 bands (J = 41) over bins 0..=127.
///
/// The last four bands share the bark value 24.00, so bark values are
/// nondecreasing rather than strictly increasing here; the spreading matrix
/// consequently has identical rows for those bands.
static BANDS_44K1: [Band; 42] = with_indices([
    band(0, 0, 0.0),
    band(1, 1, 1.73),
    band(2, 2, 3.41),
    band(3, 3, 4.99),
    band(4, 4, 6.45),
    band(5, 5, 7.75),
    band(6, 6, 8.92),
    band(7, 7, 9.96),
    band(8, 8, 10.87),
    band(9, 9, 11.68),
    band(10, 10, 12.39),
    band(11, 11, 13.03),
    band(12, 12, 13.61),
    band(13, 13, 14.12),
    band(14, 14, 14.59),
    band(15, 15, 15.01),
    band(16, 16, 15.4),
    band(17, 17, 15.76),
    band(18, 19, 16.39),
    band(20, 21, 16.95),
    band(22, 23, 17.45),
    band(24, 25, 17.89),
    band(26, 27, 18.3),
    band(28, 29, 18.67),
    band(30, 31, 19.02),
    band(32, 34, 19.41),
    band(35, 37, 19.85),
    band(38, 40, 20.25),
    band(41, 43, 20.62),
    band(44, 47, 21.01),
    band(48, 51, 21.43),
    band(52, 55, 21.81),
    band(56, 59, 22.15),
    band(60, 64, 22.51),
    band(65, 69, 22.87),
    band(70, 75, 23.23),
    band(76, 81, 23.59),
    band(82, 88, 23.93),
    band(89, 96, 24.0),
    band(97, 105, 24.0),
    band(106, 115, 24.0),
    band(116, 127, 24.0),
]);

#[cfg(test)]
mod tests {
    use super::*;

    fn both_tables() -> [BandTable; 2] {
        [
            BandTable::for_sample_rate(16000).unwrap(),
            BandTable::for_sample_rate(44100).unwrap(),
        ]
    }

    #[test]
    fn band_counts_match_rates() {
        assert_eq!(BandTable::for_sample_rate(16000).unwrap().j(), 46);
        assert_eq!(BandTable::for_sample_rate(44100).unwrap().j(), 41);
    }

    #[test]
    fn unsupported_rate_is_rejected_with_supported_rates_named() {
        let err = BandTable::for_sample_rate(48000).unwrap_err();
        assert_eq!(err, BandsError::UnsupportedSampleRate(48000));
        let msg = std::format!("{err}");
        assert!(msg.contains("48000") && msg.contains("16000") && msg.contains("44100"), "{msg}");
    }

    #[test]
    fn spot_rows_16k() {
        let t = BandTable::for_sample_rate(16000).unwrap();
        let b21 = t.band(21);
        assert_eq!((b21.low_bin, b21.high_bin, b21.width()), (21, 22, 2));
        assert_eq!(b21.bark, 10.85);
        let b0 = t.band(0);
        assert_eq!((b0.low_bin, b0.high_bin, b0.width()), (0, 0, 1));
        assert_eq!(b0.bark, 0.0);
    }

    #[test]
    fn spot_rows_44k1() {
        let t = BandTable::for_sample_rate(44100).unwrap();
        let b41 = t.band(41);
        assert_eq!((b41.low_bin, b41.high_bin, b41.width()), (116, 127, 12));
        assert_eq!(b41.bark, 24.00);
    }

    #[test]
    fn band_of_bin_examples() {
        let t16 = BandTable::for_sample_rate(16000).unwrap();
        assert_eq!(t16.band_of_bin(37).unwrap().index, 29);
        assert_eq!(t16.band_of_bin(0).unwrap().index, 0);
        let t44 = BandTable::for_sample_rate(44100).unwrap();
        assert_eq!(t44.band_of_bin(127).unwrap().index, 41);
        assert_eq!(t16.band_of_bin(128).unwrap_err(), BandsError::BinOutOfRange(128));
    }

    #[test]
    fn every_bin_is_in_exactly_one_band() {
        for t in both_tables() {
            for k in 0..NUM_BINS {
                let owners = t.bands().iter().filter(|b| b.bins().contains(&k)).count();
                assert_eq!(owners, 1, "bin {k} at {} Hz", t.sample_rate);
                let b = t.band_of_bin(k).unwrap();
                assert!(b.bins().contains(&k));
            }
        }
    }

    #[test]
    fn widths_are_consistent_and_sum_to_128() {
        for t in both_tables() {
            let total: usize = t.bands().iter().map(Band::width).sum();
            assert_eq!(total, 128, "{} Hz", t.sample_rate);
            assert_eq!(t.band(0).bins().collect::<std::vec::Vec<_>>(), std::vec![0]);
        }
    }

    #[test]
    fn bark_values_never_decrease() {
        // Strictly increasing except for the tied 24.00 run that closes the
        // 44.1 kHz table.
        for t in both_tables() {
            let mut ties = 0;
            for pair in t.bands().windows(2) {
                assert!(pair[1].bark >= pair[0].bark, "{} Hz band {}", t.sample_rate, pair[1].index);
                if pair[1].bark == pair[0].bark {
                    ties += 1;
                }
            }
            let expected_ties = if t.sample_rate == 44100 { 3 } else { 0 };
            assert_eq!(ties, expected_ties, "{} Hz", t.sample_rate);
        }
    }

    #[test]
    fn wide_bands_form_one_run_to_the_last_bin() {
        let expected = [(16000u32, 29usize, 37usize), (44100, 25, 32)];
        for (rate, first_band, first_bin) in expected {
            let t = BandTable::for_sample_rate(rate).unwrap();
            let first = t.first_wide_band();
            assert_eq!(first, first_band);
            assert_eq!(t.band(first).low_bin, first_bin);
            for b in &t.bands()[first..] {
                assert!(b.width() >= 3, "{rate} Hz band {}", b.index);
            }
            for b in &t.bands()[..first] {
                assert!(b.width() <= 2);
            }
            assert_eq!(t.bands().last().unwrap().high_bin, 127);
        }
    }

    #[test]
    fn transcription_checksums_are_stable() {
        assert_eq!(
            BandTable::for_sample_rate(16000).unwrap().checksum(),
            0x6316e333398cf61b,
            "16 kHz table was edited; re-verify against the published partition"
        );
        assert_eq!(
            BandTable::for_sample_rate(44100).unwrap().checksum(),
            0x5d72ca26f4413a68,
            "44.1 kHz table was edited; re-verify against the published partition"
        );
    }

    #[test]
    fn csv_dump_has_header_and_one_row_per_band() {
        let t = BandTable::for_sample_rate(16000).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("band,low,high,width,bark"));
        assert_eq!(csv.lines().count(), 48);
        assert!(csv.contains("21,21,22,2,10.85"));
        assert!(csv.contains("46,121,127,7,20.92"));
    }
}
