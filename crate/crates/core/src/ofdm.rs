//! QPSK mapping and the OFDM modulate/demodulate chain shared by the end
//! nodes and the relay.
//!
//! The transform pair is unitary (symmetric `1/sqrt(K)` scaling on both
//! directions), so time-domain and frequency-domain powers agree and a noise
//! variance calibrated per frequency-domain sample can be injected per
//! time-domain sample unchanged.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{config, framing, ModelError};

/// Transmitting end node identity; selects which pilot slot a frame fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeId {
    A,
    B,
}

// ---------------------------------------------------------------------------
// Bit packets
// ---------------------------------------------------------------------------

/// A source or decoded binary sequence. Every element is 0 or 1 and the
/// length is even (QPSK consumes bits in pairs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPacket {
    bits: Vec<u8>,
}

impl BitPacket {
    pub fn new(bits: Vec<u8>) -> Result<Self, ModelError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(framing("bit packet contains a value other than 0/1"));
        }
        if bits.len() % 2 != 0 {
            return Err(framing(format!(
                "bit packet length {} is odd; QPSK consumes bit pairs",
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    /// Draws `len` uniform bits. `len` must be even.
    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        assert!(len % 2 == 0, "packet length must be even");
        Self {
            bits: (0..len).map(|_| rng.gen_range(0..=1u8)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Bitwise XOR of two equal-length packets.
    pub fn xor(&self, other: &BitPacket) -> Result<BitPacket, ModelError> {
        if self.len() != other.len() {
            return Err(framing(format!(
                "xor of packets with lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(BitPacket {
            bits: self
                .bits
                .iter()
                .zip(other.bits.iter())
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Frame layout
// ---------------------------------------------------------------------------

/// Static OFDM frame geometry: transform size, cyclic prefix, active
/// subcarrier map, and the two time-orthogonal pilot symbols that lead every
/// frame (slot 0 for node A, slot 1 for node B).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub fft_size: usize,
    pub cp_len: usize,
    /// Payload OFDM symbols per frame.
    pub n_data_symbols: usize,
    /// Leading pilot symbols per frame (one per end node).
    pub n_pilot_symbols: usize,
    /// Ascending indices of the subcarriers that carry data. The rest are
    /// nulls (DC and guard bands).
    pub data_bins: Vec<usize>,
    /// Zadoff-Chu roots for the two pilot sequences.
    pub pilot_root_a: u32,
    pub pilot_root_b: u32,
}

impl FrameLayout {
    /// 802.11-style map: DC null plus a guard band around the Nyquist bins.
    /// For `fft_size = 64` this leaves the usual 52 data subcarriers.
    pub fn conventional(
        fft_size: usize,
        cp_len: usize,
        n_data_symbols: usize,
    ) -> Result<Self, ModelError> {
        let guard_lo = (27 * fft_size).div_euclid(64);
        let guard_hi = (37 * fft_size).div_euclid(64);
        let data_bins = (1..fft_size)
            .filter(|&k| k < guard_lo || k > guard_hi)
            .collect();
        let layout = Self {
            fft_size,
            cp_len,
            n_data_symbols,
            n_pilot_symbols: 2,
            data_bins,
            pilot_root_a: 1,
            pilot_root_b: 3,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.fft_size == 0 {
            return Err(config("fft_size must be positive"));
        }
        if self.cp_len >= self.fft_size {
            return Err(config(format!(
                "cp_len {} must be smaller than fft_size {}",
                self.cp_len, self.fft_size
            )));
        }
        if self.data_bins.is_empty() {
            return Err(config("no data subcarriers"));
        }
        if self.data_bins.iter().any(|&k| k >= self.fft_size) {
            return Err(config("data subcarrier index out of range"));
        }
        if self.n_data_symbols == 0 {
            return Err(config("frame must carry at least one payload symbol"));
        }
        Ok(())
    }

    pub fn data_subcarriers(&self) -> usize {
        self.data_bins.len()
    }

    /// Null (non-data) subcarrier indices; used for in-band noise estimation.
    pub fn null_bins(&self) -> Vec<usize> {
        (0..self.fft_size)
            .filter(|k| !self.data_bins.contains(k))
            .collect()
    }

    /// Payload bits carried by one frame.
    pub fn bits_per_frame(&self) -> usize {
        2 * self.data_subcarriers() * self.n_data_symbols
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Samples in one slot: pilots plus payload, cyclic prefixes included.
    pub fn samples_per_slot(&self) -> usize {
        (self.n_data_symbols + self.n_pilot_symbols) * self.samples_per_symbol()
    }

    /// Spectral efficiency of an error-free one-way stream through this
    /// frame: data bits per complex sample, per QPSK bit pair.
    pub fn eta(&self) -> f64 {
        (self.data_subcarriers() * self.n_data_symbols) as f64 / self.samples_per_slot() as f64
    }

    /// Fraction of subcarriers that carry data.
    pub fn data_fraction(&self) -> f64 {
        self.data_subcarriers() as f64 / self.fft_size as f64
    }

    /// Unit-magnitude Zadoff-Chu-style pilot sequence over the data bins.
    pub fn pilot_sequence(&self, root: u32) -> Vec<Complex64> {
        let n = self.data_subcarriers();
        (0..n)
            .map(|i| {
                let i = i as f64;
                let num = if n % 2 == 0 { i * i } else { i * (i + 1.0) };
                Complex64::from_polar(1.0, -PI * root as f64 * num / n as f64)
            })
            .collect()
    }

    pub fn pilot_for(&self, node: NodeId) -> Vec<Complex64> {
        match node {
            NodeId::A => self.pilot_sequence(self.pilot_root_a),
            NodeId::B => self.pilot_sequence(self.pilot_root_b),
        }
    }
}

// ---------------------------------------------------------------------------
// Symbol grids and frames
// ---------------------------------------------------------------------------

/// Frequency-domain symbol matrix, stored column-major: one column per OFDM
/// symbol, `fft_size` entries per column. Pilot columns, when present, lead.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskSymbolGrid {
    symbols: Vec<Complex64>,
    fft_size: usize,
    n_pilot_cols: usize,
    n_data_cols: usize,
}

impl QpskSymbolGrid {
    pub fn zeroed(fft_size: usize, n_pilot_cols: usize, n_data_cols: usize) -> Self {
        Self {
            symbols: vec![Complex64::new(0.0, 0.0); fft_size * (n_pilot_cols + n_data_cols)],
            fft_size,
            n_pilot_cols,
            n_data_cols,
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn n_pilot_cols(&self) -> usize {
        self.n_pilot_cols
    }

    pub fn n_data_cols(&self) -> usize {
        self.n_data_cols
    }

    pub fn total_cols(&self) -> usize {
        self.n_pilot_cols + self.n_data_cols
    }

    #[inline]
    pub fn at(&self, bin: usize, col: usize) -> Complex64 {
        self.symbols[col * self.fft_size + bin]
    }

    #[inline]
    pub fn at_mut(&mut self, bin: usize, col: usize) -> &mut Complex64 {
        &mut self.symbols[col * self.fft_size + bin]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.symbols[col * self.fft_size..(col + 1) * self.fft_size]
    }

    /// The payload columns of this grid as a pilot-free grid.
    pub fn data_part(&self) -> QpskSymbolGrid {
        QpskSymbolGrid {
            symbols: self.symbols[self.n_pilot_cols * self.fft_size..].to_vec(),
            fft_size: self.fft_size,
            n_pilot_cols: 0,
            n_data_cols: self.n_data_cols,
        }
    }

    /// The pilot columns of this grid.
    pub fn pilot_part(&self) -> QpskSymbolGrid {
        QpskSymbolGrid {
            symbols: self.symbols[..self.n_pilot_cols * self.fft_size].to_vec(),
            fft_size: self.fft_size,
            n_pilot_cols: self.n_pilot_cols,
            n_data_cols: 0,
        }
    }

    pub fn max_abs_diff(&self, other: &QpskSymbolGrid) -> f64 {
        self.symbols
            .iter()
            .zip(other.symbols.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Time-domain OFDM sample stream: per symbol, `cp_len` prefix samples
/// followed by the `fft_size` body.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    pub samples: Vec<Complex64>,
    pub fft_size: usize,
    pub cp_len: usize,
    pub n_data_symbols: usize,
    pub n_pilot_symbols: usize,
    /// Mean squared clipping distortion recorded by the intensity
    /// front-end; `None` for complex-baseband frames.
    pub clip_distortion_power: Option<f64>,
}

impl OfdmFrame {
    pub fn total_symbols(&self) -> usize {
        self.n_data_symbols + self.n_pilot_symbols
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn same_layout(&self, other: &OfdmFrame) -> bool {
        self.fft_size == other.fft_size
            && self.cp_len == other.cp_len
            && self.n_data_symbols == other.n_data_symbols
            && self.n_pilot_symbols == other.n_pilot_symbols
    }
}

// ---------------------------------------------------------------------------
// QPSK constellation
// ---------------------------------------------------------------------------

/// Gray-coded QPSK point for a bit pair packed as `(b0 << 1) | b1`:
/// `((1 - 2*b0) + j*(1 - 2*b1)) / sqrt(2)`.
#[inline]
pub fn qpsk_point(pair: u8) -> Complex64 {
    debug_assert!(pair < 4);
    let b0 = (pair >> 1) & 1;
    let b1 = pair & 1;
    Complex64::new(
        (1.0 - 2.0 * b0 as f64) * FRAC_1_SQRT_2,
        (1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2,
    )
}

/// Hard decision to the nearest constellation point, returned as a packed
/// bit pair. Boundary values resolve toward the smaller pair.
#[inline]
pub fn qpsk_slice(value: Complex64) -> u8 {
    let b0 = if value.re >= 0.0 { 0 } else { 1 };
    let b1 = if value.im >= 0.0 { 0 } else { 1 };
    (b0 << 1) | b1
}

/// Maps a packet onto the data subcarriers, filling each symbol's
/// subcarriers in ascending bin order before moving to the next symbol.
pub fn qpsk_map(bits: &BitPacket, layout: &FrameLayout) -> Result<QpskSymbolGrid, ModelError> {
    let per_symbol = 2 * layout.data_subcarriers();
    if bits.len() == 0 || bits.len() % per_symbol != 0 {
        return Err(framing(format!(
            "packet length {} is not a positive multiple of 2*K_data = {}",
            bits.len(),
            per_symbol
        )));
    }
    let n_cols = bits.len() / per_symbol;
    let mut grid = QpskSymbolGrid::zeroed(layout.fft_size, 0, n_cols);
    let b = bits.bits();
    let mut idx = 0;
    for col in 0..n_cols {
        for &bin in &layout.data_bins {
            let pair = (b[idx] << 1) | b[idx + 1];
            *grid.at_mut(bin, col) = qpsk_point(pair);
            idx += 2;
        }
    }
    Ok(grid)
}

/// Hard-decision inverse of [`qpsk_map`] over the payload columns. Assumes
/// the grid is already equalized.
pub fn qpsk_demap(grid: &QpskSymbolGrid, layout: &FrameLayout) -> BitPacket {
    let mut bits = Vec::with_capacity(2 * layout.data_subcarriers() * grid.n_data_cols());
    for col in grid.n_pilot_cols()..grid.total_cols() {
        for &bin in &layout.data_bins {
            let pair = qpsk_slice(grid.at(bin, col));
            bits.push((pair >> 1) & 1);
            bits.push(pair & 1);
        }
    }
    BitPacket { bits }
}

fn fill_pilot_slot(grid: &mut QpskSymbolGrid, node: NodeId, layout: &FrameLayout) {
    let pilot_col = match node {
        NodeId::A => 0,
        NodeId::B => 1,
    };
    for (i, &bin) in layout.data_bins.iter().enumerate() {
        *grid.at_mut(bin, pilot_col) = layout.pilot_for(node)[i];
    }
}

/// Prepends the two time-orthogonal pilot symbols to a payload grid. The
/// transmitting node fills its own pilot slot and stays silent in the
/// other's.
pub fn build_frame(
    data: &QpskSymbolGrid,
    node: NodeId,
    layout: &FrameLayout,
) -> Result<QpskSymbolGrid, ModelError> {
    if data.n_pilot_cols() != 0 {
        return Err(framing("payload grid already contains pilot symbols"));
    }
    if data.fft_size() != layout.fft_size {
        return Err(framing("grid fft size does not match layout"));
    }
    let mut framed = QpskSymbolGrid::zeroed(layout.fft_size, 2, data.n_data_cols());
    fill_pilot_slot(&mut framed, node, layout);
    for col in 0..data.n_data_cols() {
        for bin in 0..layout.fft_size {
            *framed.at_mut(bin, col + 2) = data.at(bin, col);
        }
    }
    Ok(framed)
}

/// A pilot-only grid: the node's sounding transmission with no payload
/// attached.
pub fn pilot_frame(node: NodeId, layout: &FrameLayout) -> QpskSymbolGrid {
    let mut grid = QpskSymbolGrid::zeroed(layout.fft_size, 2, 0);
    fill_pilot_slot(&mut grid, node, layout);
    grid
}

// ---------------------------------------------------------------------------
// Modem
// ---------------------------------------------------------------------------

/// Unitary IFFT/FFT pair with cyclic-prefix insertion and removal. Plans are
/// built once and shared freely across threads.
pub struct OfdmModem {
    fft_size: usize,
    cp_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl OfdmModem {
    pub fn new(fft_size: usize, cp_len: usize) -> Result<Self, ModelError> {
        if cp_len >= fft_size {
            return Err(config(format!(
                "cp_len {cp_len} must be smaller than fft_size {fft_size}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            cp_len,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn for_layout(layout: &FrameLayout) -> Result<Self, ModelError> {
        Self::new(layout.fft_size, layout.cp_len)
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// Per symbol: unitary inverse transform of the column, prefixed by its
    /// last `cp_len` samples.
    pub fn modulate(&self, grid: &QpskSymbolGrid) -> OfdmFrame {
        assert_eq!(grid.fft_size(), self.fft_size, "grid/modem size mismatch");
        let k = self.fft_size;
        let scale = 1.0 / (k as f64).sqrt();
        let mut samples = Vec::with_capacity(grid.total_cols() * (k + self.cp_len));
        let mut body = vec![Complex64::new(0.0, 0.0); k];
        for col in 0..grid.total_cols() {
            body.copy_from_slice(grid.column(col));
            self.inverse.process(&mut body);
            for s in body.iter_mut() {
                *s *= scale;
            }
            samples.extend_from_slice(&body[k - self.cp_len..]);
            samples.extend_from_slice(&body);
        }
        OfdmFrame {
            samples,
            fft_size: k,
            cp_len: self.cp_len,
            n_data_symbols: grid.n_data_cols(),
            n_pilot_symbols: grid.n_pilot_cols(),
            clip_distortion_power: None,
        }
    }

    /// Strips each symbol's cyclic prefix and applies the unitary forward
    /// transform.
    pub fn demodulate(&self, frame: &OfdmFrame) -> Result<QpskSymbolGrid, ModelError> {
        let k = self.fft_size;
        if frame.fft_size != k || frame.cp_len != self.cp_len {
            return Err(framing("frame layout does not match modem"));
        }
        let per_symbol = k + self.cp_len;
        let expected = frame.total_symbols() * per_symbol;
        if frame.samples.len() != expected {
            return Err(framing(format!(
                "frame holds {} samples, layout implies {}",
                frame.samples.len(),
                expected
            )));
        }
        let scale = 1.0 / (k as f64).sqrt();
        let mut grid = QpskSymbolGrid::zeroed(k, frame.n_pilot_symbols, frame.n_data_symbols);
        let mut body = vec![Complex64::new(0.0, 0.0); k];
        for col in 0..frame.total_symbols() {
            let start = col * per_symbol + self.cp_len;
            body.copy_from_slice(&frame.samples[start..start + k]);
            self.forward.process(&mut body);
            for (bin, s) in body.iter().enumerate() {
                *grid.at_mut(bin, col) = s * scale;
            }
        }
        Ok(grid)
    }
}

/// Optical intensity front-end: real part plus DC bias, clipped below
/// `clip_floor`. The mean squared clipping error is recorded on the frame.
/// The complex-baseband path used by the sweeps bypasses this stage.
pub fn intensity_frontend(frame: &OfdmFrame, dc_bias: f64, clip_floor: f64) -> OfdmFrame {
    assert!(dc_bias >= 0.0, "dc_bias must be non-negative");
    let mut out = frame.clone();
    let mut distortion = 0.0;
    for s in out.samples.iter_mut() {
        let biased = s.re + dc_bias;
        let clipped = biased.max(clip_floor);
        distortion += (clipped - biased) * (clipped - biased);
        *s = Complex64::new(clipped, 0.0);
    }
    out.clip_distortion_power = Some(distortion / frame.samples.len().max(1) as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout64() -> FrameLayout {
        FrameLayout::conventional(64, 16, 4).unwrap()
    }

    #[test]
    fn conventional_layout_has_52_data_bins() {
        let l = layout64();
        assert_eq!(l.data_subcarriers(), 52);
        assert_eq!(l.null_bins().len(), 12);
        assert!(!l.data_bins.contains(&0), "DC must be null");
        assert_eq!(l.bits_per_frame(), 416);
        assert_relative_eq!(l.eta(), 416.0 / (2.0 * 6.0 * 80.0), epsilon = 1e-12);
    }

    #[test]
    fn qpsk_map_matches_definition() {
        // 00 -> (1+j)/sqrt(2), 11 -> (-1-j)/sqrt(2)
        assert_relative_eq!(qpsk_point(0b00).re, FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b00).im, FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b11).re, -FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b11).im, -FRAC_1_SQRT_2);
        // 01 -> (1-j)/sqrt(2), 10 -> (-1+j)/sqrt(2)
        assert_relative_eq!(qpsk_point(0b01).re, FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b01).im, -FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b10).re, -FRAC_1_SQRT_2);
        assert_relative_eq!(qpsk_point(0b10).im, FRAC_1_SQRT_2);
    }

    #[test]
    fn qpsk_map_fills_subcarriers_then_symbols() {
        let mut layout = layout64();
        layout.data_bins = vec![1, 2];
        let bits = BitPacket::new(vec![0, 1, 1, 0]).unwrap();
        let grid = qpsk_map(&bits, &layout).unwrap();
        assert_eq!(grid.n_data_cols(), 1);
        assert_eq!(grid.at(1, 0), qpsk_point(0b01));
        assert_eq!(grid.at(2, 0), qpsk_point(0b10));
        // null bins stay empty
        assert_eq!(grid.at(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn qpsk_map_rejects_bad_length() {
        let layout = layout64();
        let bits = BitPacket::new(vec![0; 100]).unwrap();
        assert!(matches!(
            qpsk_map(&bits, &layout),
            Err(ModelError::Framing(_))
        ));
    }

    #[test]
    fn demap_slices_to_nearest_point() {
        assert_eq!(qpsk_slice(Complex64::new(0.9, 1.1)), 0b00);
        assert_eq!(qpsk_slice(Complex64::new(-0.1, 0.4)), 0b10);
        assert_eq!(qpsk_slice(qpsk_point(0b01)), 0b01);
    }

    #[test]
    fn demap_inverts_map() {
        let layout = layout64();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let grid = qpsk_map(&bits, &layout).unwrap();
        assert_eq!(qpsk_demap(&grid, &layout), bits);
    }

    #[test]
    fn mapped_grid_has_unit_symbol_energy() {
        let layout = layout64();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let grid = qpsk_map(&bits, &layout).unwrap();
        let mut sum = 0.0;
        let mut count = 0;
        for col in 0..grid.n_data_cols() {
            for &bin in &layout.data_bins {
                sum += grid.at(bin, col).norm_sqr();
                count += 1;
            }
        }
        assert_relative_eq!(sum / count as f64, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gray_adjacency() {
        // Points at distance sqrt(2) differ in exactly one bit.
        for a in 0..4u8 {
            for b in 0..4u8 {
                let d = (qpsk_point(a) - qpsk_point(b)).norm();
                if (d - std::f64::consts::SQRT_2).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1, "pairs {a:02b} and {b:02b}");
                }
            }
        }
    }

    #[test]
    fn build_frame_places_orthogonal_pilots() {
        let layout = layout64();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let data = qpsk_map(&bits, &layout).unwrap();

        let frame_a = build_frame(&data, NodeId::A, &layout).unwrap();
        let frame_b = build_frame(&data, NodeId::B, &layout).unwrap();
        assert_eq!(frame_a.total_cols(), layout.n_data_symbols + 2);

        for bin in 0..layout.fft_size {
            assert_eq!(frame_a.at(bin, 1), Complex64::new(0.0, 0.0));
            assert_eq!(frame_b.at(bin, 0), Complex64::new(0.0, 0.0));
        }
        for (i, &bin) in layout.data_bins.iter().enumerate() {
            assert_eq!(frame_a.at(bin, 0), layout.pilot_for(NodeId::A)[i]);
            assert_relative_eq!(frame_a.at(bin, 0).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn build_frame_rejects_already_framed_grid() {
        let layout = layout64();
        let grid = QpskSymbolGrid::zeroed(64, 2, 4);
        assert!(build_frame(&grid, NodeId::A, &layout).is_err());
    }

    #[test]
    fn modem_rejects_cp_not_smaller_than_fft() {
        assert!(matches!(OfdmModem::new(64, 64), Err(ModelError::Config(_))));
    }

    #[test]
    fn single_tone_modulates_to_constant_body() {
        let modem = OfdmModem::new(4, 1).unwrap();
        let mut grid = QpskSymbolGrid::zeroed(4, 0, 1);
        *grid.at_mut(0, 0) = Complex64::new(1.0, 0.0);
        let frame = modem.modulate(&grid);
        // IDFT of an impulse at bin 0 is the constant grid[0,0]/sqrt(K).
        for s in &frame.samples {
            assert_relative_eq!(s.re, 0.5, epsilon = 1e-12);
            assert_relative_eq!(s.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_zero_grid_round_trip() {
        let modem = OfdmModem::new(64, 16).unwrap();
        let grid = QpskSymbolGrid::zeroed(64, 0, 3);
        let frame = modem.modulate(&grid);
        assert!(frame.samples.iter().all(|s| s.norm() == 0.0));
        let back = modem.demodulate(&frame).unwrap();
        assert_eq!(back.max_abs_diff(&grid), 0.0);
    }

    #[test]
    fn cyclic_prefix_property_holds() {
        let layout = layout64();
        let modem = OfdmModem::for_layout(&layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let grid = build_frame(&qpsk_map(&bits, &layout).unwrap(), NodeId::A, &layout).unwrap();
        let frame = modem.modulate(&grid);
        let per = frame.samples_per_symbol();
        for col in 0..frame.total_symbols() {
            let sym = &frame.samples[col * per..(col + 1) * per];
            let (cp, body) = sym.split_at(layout.cp_len);
            assert_eq!(cp, &body[body.len() - layout.cp_len..]);
        }
    }

    #[test]
    fn parseval_holds() {
        let layout = layout64();
        let modem = OfdmModem::for_layout(&layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let grid = qpsk_map(&bits, &layout).unwrap();
        let frame = modem.modulate(&grid);

        let per = frame.samples_per_symbol();
        for col in 0..grid.total_cols() {
            let body = &frame.samples[col * per + layout.cp_len..(col + 1) * per];
            let time_power: f64 = body.iter().map(|s| s.norm_sqr()).sum::<f64>() / 64.0;
            let freq_power: f64 =
                grid.column(col).iter().map(|s| s.norm_sqr()).sum::<f64>() / 64.0;
            assert_relative_eq!(time_power, freq_power, epsilon = 1e-10);
        }
    }

    #[test]
    fn demodulate_rejects_sample_count_mismatch() {
        let modem = OfdmModem::new(64, 16).unwrap();
        let grid = QpskSymbolGrid::zeroed(64, 0, 2);
        let mut frame = modem.modulate(&grid);
        frame.samples.pop();
        assert!(matches!(
            modem.demodulate(&frame),
            Err(ModelError::Framing(_))
        ));
    }

    #[test]
    fn intensity_frontend_biases_and_clips() {
        let modem = OfdmModem::new(64, 16).unwrap();
        let grid = QpskSymbolGrid::zeroed(64, 0, 1);
        let frame = modem.modulate(&grid);

        let biased = intensity_frontend(&frame, 1.0, 0.0);
        assert!(biased.samples.iter().all(|s| s.re == 1.0 && s.im == 0.0));
        assert_relative_eq!(biased.clip_distortion_power.unwrap(), 0.0);

        let mut deep = frame.clone();
        deep.samples[0] = Complex64::new(-2.0, 0.0);
        let clipped = intensity_frontend(&deep, 1.0, 0.0);
        assert_eq!(clipped.samples[0], Complex64::new(0.0, 0.0));
        assert!(clipped.clip_distortion_power.unwrap() > 0.0);
    }

    #[test]
    fn large_bias_leaves_no_distortion() {
        let layout = layout64();
        let modem = OfdmModem::for_layout(&layout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bits = BitPacket::random(layout.bits_per_frame(), &mut rng);
        let frame = modem.modulate(&qpsk_map(&bits, &layout).unwrap());
        let out = intensity_frontend(&frame, 100.0, 0.0);
        assert_relative_eq!(out.clip_distortion_power.unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn ofdm_round_trip(seed in 0u64..500, k_idx in 0usize..3, cp_idx in 0usize..2) {
            let k = [16, 64, 256][k_idx];
            let cp = [4, 16][cp_idx];
            prop_assume!(cp < k); // the prefix must fit inside the symbol
            let modem = OfdmModem::new(k, cp).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut grid = QpskSymbolGrid::zeroed(k, 0, 3);
            for col in 0..3 {
                for bin in 0..k {
                    *grid.at_mut(bin, col) =
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let back = modem.demodulate(&modem.modulate(&grid)).unwrap();
            prop_assert!(back.max_abs_diff(&grid) < 1e-10);
        }

        #[test]
        fn qpsk_round_trip(seed in 0u64..500) {
            let layout = FrameLayout::conventional(64, 16, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bits = BitPacket::random(2 * layout.bits_per_frame(), &mut rng);
            let grid = qpsk_map(&bits, &layout).unwrap();
            prop_assert_eq!(qpsk_demap(&grid, &layout), bits);
        }
    }
}
