//! Performance metrics and the accounting conventions behind them.
//!
//! Throughput counts link-level goodput: every packet that survives its
//! integrity check contributes its length once per hop it traversed, over
//! the slots the exchange occupied. Under this convention an error-free
//! relay exchange carries `4 eta` bps/Hz in two slots, store-and-forward
//! carries half that in four, and a bidirectional point-to-point exchange
//! carries `2 eta`.

use serde::{Deserialize, Serialize};

use crate::error::{config, framing, ModelError};
use crate::ofdm::{BitPacket, FrameLayout};

/// Transmission scheme under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "PNC")]
    Pnc,
    #[serde(rename = "PNC_unaligned")]
    PncUnaligned,
    #[serde(rename = "Pt2Pt")]
    Pt2Pt,
    #[serde(rename = "StoreForward")]
    StoreForward,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Pnc => "PNC",
            Scheme::PncUnaligned => "PNC_unaligned",
            Scheme::Pt2Pt => "Pt2Pt",
            Scheme::StoreForward => "StoreForward",
        }
    }

    /// Slots one bidirectional exchange occupies.
    pub fn slots_per_exchange(&self) -> u64 {
        match self {
            Scheme::Pnc | Scheme::PncUnaligned => 2,
            Scheme::Pt2Pt => 2,
            Scheme::StoreForward => 4,
        }
    }

    /// Point-to-point link traversals per exchange (both directions).
    pub fn links_per_exchange(&self) -> u64 {
        match self {
            Scheme::Pnc | Scheme::PncUnaligned | Scheme::StoreForward => 4,
            Scheme::Pt2Pt => 2,
        }
    }

    /// Hops a delivered packet traversed; its weight in link throughput.
    pub fn hops_per_packet(&self) -> u64 {
        match self {
            Scheme::Pnc | Scheme::PncUnaligned | Scheme::StoreForward => 2,
            Scheme::Pt2Pt => 1,
        }
    }

    /// Normalized transmit energy per exchange: one unit per slot per
    /// active transmitter (the relay's multiple-access slot has two).
    pub fn energy_units_per_exchange(&self) -> u64 {
        match self {
            Scheme::Pnc | Scheme::PncUnaligned => 3,
            Scheme::Pt2Pt => 2,
            Scheme::StoreForward => 4,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Frame overhead constants used by the throughput and capacity formulas.
///
/// `samples_per_slot` is a float so a preset can pin the efficiency `eta`
/// directly instead of deriving it from the physical frame; the simulation
/// itself always runs on the physical layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOverhead {
    pub samples_per_slot: f64,
    /// Fraction of subcarriers carrying data, `K_data / K`.
    pub data_fraction: f64,
    /// One-way error-free bits per complex sample.
    pub eta: f64,
}

impl FrameOverhead {
    /// Overhead computed honestly from the physical frame layout.
    pub fn physical(layout: &FrameLayout) -> Self {
        Self {
            samples_per_slot: layout.samples_per_slot() as f64,
            data_fraction: layout.data_fraction(),
            eta: layout.eta(),
        }
    }

    /// Overhead with `eta` pinned to a target value; the slot duration is
    /// rescaled so the error-free rates hit the target exactly.
    pub fn with_eta(layout: &FrameLayout, eta: f64) -> Self {
        assert!(eta > 0.0 && eta <= 1.0);
        Self {
            samples_per_slot: (layout.data_subcarriers() * layout.n_data_symbols) as f64 / eta,
            data_fraction: layout.data_fraction(),
            eta,
        }
    }
}

// ---------------------------------------------------------------------------
// Metric operations
// ---------------------------------------------------------------------------

/// Hamming distance over equal-length packets.
pub fn hamming_distance(a: &BitPacket, b: &BitPacket) -> Result<u64, ModelError> {
    if a.len() != b.len() {
        return Err(framing(format!(
            "cannot compare packets of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bits()
        .iter()
        .zip(b.bits().iter())
        .filter(|(x, y)| x != y)
        .count() as u64)
}

/// Bit error rate: Hamming distance over length.
pub fn compute_ber(sent: &BitPacket, recovered: &BitPacket) -> Result<f64, ModelError> {
    let d = hamming_distance(sent, recovered)?;
    Ok(d as f64 / sent.len() as f64)
}

/// Link throughput for a batch of exchanges, in (bps/Hz, Mbps).
///
/// `delivered_bits` must already be hop-weighted per the module convention.
pub fn compute_throughput(
    delivered_bits: u64,
    scheme: Scheme,
    exchanges: u64,
    overhead: &FrameOverhead,
    sampling_rate_hz: f64,
) -> Result<(f64, f64), ModelError> {
    if exchanges == 0 {
        return Err(config("throughput over zero exchanges"));
    }
    let slots = (exchanges * scheme.slots_per_exchange()) as f64;
    let bps_hz = delivered_bits as f64 / (slots * overhead.samples_per_slot);
    let mbps = bps_hz * sampling_rate_hz / 1e6;
    Ok((bps_hz, mbps))
}

/// Shannon bound matched to the link-throughput convention: each slot's
/// active links contribute `data_fraction * log2(1 + SNR)` and the total is
/// averaged over the exchange's slots.
pub fn compute_capacity(snr_db: f64, scheme: Scheme, data_fraction: f64) -> f64 {
    assert!(snr_db.is_finite());
    let snr = 10f64.powf(snr_db / 10.0);
    let per_link = data_fraction * (1.0 + snr).log2();
    per_link * scheme.links_per_exchange() as f64 / scheme.slots_per_exchange() as f64
}

/// Normalized transmit energy per delivered information bit. Zero delivered
/// bits report as infinite cost rather than an error.
pub fn compute_energy_per_bit(total_tx_energy: f64, delivered_bits: u64) -> f64 {
    if delivered_bits == 0 {
        f64::INFINITY
    } else {
        total_tx_energy / delivered_bits as f64
    }
}

/// One sweep point's metrics for one scheme; serializes to one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub ber: f64,
    pub throughput_bps_hz: f64,
    pub throughput_mbps: f64,
    pub capacity_bps_hz: f64,
    pub energy_per_bit: f64,
    pub n_bits: u64,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Packet integrity
// ---------------------------------------------------------------------------

/// Bit-level CRC-32 (IEEE 802.3, reflected polynomial) over a 0/1 slice.
/// Operating on bits directly keeps packets free of byte-alignment padding.
pub mod crc {
    use super::*;

    const POLY: u32 = 0xEDB8_8320;
    pub const CRC_BITS: usize = 32;

    pub fn crc32_bits(bits: &[u8]) -> u32 {
        let mut crc = 0xFFFF_FFFFu32;
        for &b in bits {
            let bit = (crc ^ b as u32) & 1;
            crc >>= 1;
            if bit != 0 {
                crc ^= POLY;
            }
        }
        !crc
    }

    /// A packet of `len` bits whose last 32 bits are the CRC of the rest.
    pub fn sealed_packet(len: usize, rng: &mut impl rand::Rng) -> BitPacket {
        assert!(len > CRC_BITS && len % 2 == 0);
        let mut bits: Vec<u8> = (0..len - CRC_BITS).map(|_| rng.gen_range(0..=1u8)).collect();
        let crc = crc32_bits(&bits);
        for i in 0..CRC_BITS {
            bits.push(((crc >> (CRC_BITS - 1 - i)) & 1) as u8);
        }
        BitPacket::new(bits).expect("sealed packet is binary and even")
    }

    /// True when the trailing 32 bits match the CRC of the payload bits.
    pub fn check(packet: &BitPacket) -> bool {
        let bits = packet.bits();
        if bits.len() <= CRC_BITS {
            return false;
        }
        let (payload, tail) = bits.split_at(bits.len() - CRC_BITS);
        let crc = crc32_bits(payload);
        tail.iter()
            .enumerate()
            .all(|(i, &b)| b == ((crc >> (CRC_BITS - 1 - i)) & 1) as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ber_on_identical_and_complemented_packets() {
        let a = BitPacket::new(vec![0, 1, 1, 0, 1, 0]).unwrap();
        assert_eq!(compute_ber(&a, &a).unwrap(), 0.0);
        let flipped = BitPacket::new(a.bits().iter().map(|b| b ^ 1).collect()).unwrap();
        assert_eq!(compute_ber(&a, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn ber_counts_flips() {
        let mut bits = vec![0u8; 10_000];
        let sent = BitPacket::new(bits.clone()).unwrap();
        for i in [3, 700, 2001, 5000, 9999] {
            bits[i] = 1;
        }
        let recovered = BitPacket::new(bits).unwrap();
        assert_relative_eq!(compute_ber(&sent, &recovered).unwrap(), 5e-4);
    }

    #[test]
    fn ber_is_symmetric_and_checks_lengths() {
        let a = BitPacket::new(vec![0, 1, 1, 0]).unwrap();
        let b = BitPacket::new(vec![1, 1, 0, 0]).unwrap();
        assert_eq!(
            compute_ber(&a, &b).unwrap(),
            compute_ber(&b, &a).unwrap()
        );
        let short = BitPacket::new(vec![0, 1]).unwrap();
        assert!(compute_ber(&a, &short).is_err());
    }

    #[test]
    fn error_free_rates_hit_the_scheme_ideals() {
        let layout = FrameLayout::conventional(64, 16, 8).unwrap();
        let eta = 3.869 / 4.0;
        let overhead = FrameOverhead::with_eta(&layout, eta);
        let l = layout.bits_per_frame() as u64;

        // Relay exchange: both packets delivered, two hops each, two slots.
        let (bps, mbps) =
            compute_throughput(2 * 2 * l, Scheme::Pnc, 1, &overhead, 2e7).unwrap();
        assert_relative_eq!(bps, 3.869, max_relative = 1e-12);
        assert_relative_eq!(mbps, 77.38, max_relative = 1e-12);

        // Store-and-forward moves the same traffic in four slots.
        let (bps_sf, _) =
            compute_throughput(2 * 2 * l, Scheme::StoreForward, 1, &overhead, 2e7).unwrap();
        assert_relative_eq!(bps / bps_sf, 2.0, max_relative = 1e-12);

        // Point-to-point: one hop per packet.
        let (bps_p2p, _) =
            compute_throughput(2 * l, Scheme::Pt2Pt, 1, &overhead, 2e7).unwrap();
        assert_relative_eq!(bps_p2p, 2.0 * eta, max_relative = 1e-12);
    }

    #[test]
    fn physical_overhead_matches_layout() {
        let layout = FrameLayout::conventional(64, 16, 8).unwrap();
        let overhead = FrameOverhead::physical(&layout);
        assert_relative_eq!(overhead.samples_per_slot, 800.0);
        assert_relative_eq!(overhead.eta, 0.52);
        let l = layout.bits_per_frame() as u64;
        let (bps, _) = compute_throughput(4 * l, Scheme::Pnc, 1, &overhead, 2e7).unwrap();
        assert_relative_eq!(bps, 4.0 * 0.52, max_relative = 1e-12);
    }

    #[test]
    fn capacity_reference_points() {
        // Single active link, one slot equivalent: log2(1 + SNR).
        assert_relative_eq!(compute_capacity(0.0, Scheme::Pt2Pt, 1.0), 1.0);
        assert_relative_eq!(
            compute_capacity(22.86, Scheme::Pt2Pt, 1.0),
            7.60,
            max_relative = 1e-3
        );
        // The relay exchange keeps two links alive per slot.
        assert_relative_eq!(
            compute_capacity(0.0, Scheme::Pnc, 1.0),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn energy_per_bit_arithmetic() {
        // Identical per-slot energy: 2 slots vs 4 slots halves the cost.
        let delivered = 1000u64;
        let pnc = compute_energy_per_bit(2.0, delivered);
        let sf = compute_energy_per_bit(4.0, delivered);
        assert_relative_eq!(pnc / sf, 0.5);
        // Doubling slot energy doubles the cost.
        assert_relative_eq!(compute_energy_per_bit(4.0, delivered) / pnc, 2.0);
        // 10% packet loss raises the cost by 1/0.9.
        let lossy = compute_energy_per_bit(2.0, 900);
        assert_relative_eq!(lossy / pnc, 1.0 / 0.9, max_relative = 1e-12);
        // Nothing delivered: infinite cost, not an error.
        assert!(compute_energy_per_bit(2.0, 0).is_infinite());
    }

    #[test]
    fn crc_detects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let pkt = crc::sealed_packet(832, &mut rng);
        assert!(crc::check(&pkt));
        let mut bits = pkt.bits().to_vec();
        bits[17] ^= 1;
        assert!(!crc::check(&BitPacket::new(bits).unwrap()));
    }

    #[test]
    fn crc_known_vector() {
        // CRC-32 of ASCII "123456789" is 0xCBF43926; feed it bitwise LSB-first
        // per byte as the bit-serial convention requires.
        let bytes = b"123456789";
        let bits: Vec<u8> = bytes
            .iter()
            .flat_map(|&byte| (0..8).map(move |i| (byte >> i) & 1))
            .collect();
        assert_eq!(crc::crc32_bits(&bits), 0xCBF4_3926);
    }
}
