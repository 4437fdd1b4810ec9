//! The two-phase relay protocol: pilot-based channel estimation,
//! phase-aligning pre-compensation, maximum-likelihood XOR mapping of the
//! superposed constellation, and broadcast-phase recovery at the end nodes.

pub mod oracle;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{apply_p2p_channel, phase_offsets, ChannelRealization};
use crate::error::{config, framing, ModelError};
use crate::ofdm::{
    build_frame, qpsk_demap, qpsk_map, qpsk_point, BitPacket, FrameLayout, NodeId, OfdmModem,
    QpskSymbolGrid,
};

/// Magnitude below which a channel estimate is treated as unusable.
const ZERO_MAG: f64 = 1e-12;

/// Likelihood evaluation for the XOR decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodVariant {
    /// Marginalizes over the superposing symbol pairs (log-sum-exp).
    Exact,
    /// Keeps only the closest pair per hypothesis.
    MaxLog,
}

impl Default for LikelihoodVariant {
    fn default() -> Self {
        LikelihoodVariant::Exact
    }
}

// ---------------------------------------------------------------------------
// Channel estimation
// ---------------------------------------------------------------------------

/// Relay-side channel state, either estimated from the pilot symbols or
/// copied from the true realization (`genie`).
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h_a: Vec<Complex64>,
    pub h_b: Vec<Complex64>,
    pub phase_offsets: Vec<f64>,
    pub sigma2: f64,
    pub genie: bool,
}

impl ChannelEstimate {
    pub fn genie(ch: &ChannelRealization) -> Self {
        Self {
            h_a: ch.h_a.clone(),
            h_b: ch.h_b.clone(),
            phase_offsets: ch.phase_offsets.clone(),
            sigma2: ch.noise.sigma2,
            genie: true,
        }
    }

    /// The estimate seen by the XOR demapper once node B pre-rotates its
    /// payload: `h_b` composed with the fed-back rotations.
    pub fn with_precompensation(&self, pre: &Precompensation) -> Self {
        let h_b: Vec<Complex64> = self
            .h_b
            .iter()
            .zip(pre.rotations.iter())
            .map(|(h, c)| h * c)
            .collect();
        let phase_offsets = phase_offsets(&self.h_a, &h_b);
        Self {
            h_a: self.h_a.clone(),
            h_b,
            phase_offsets,
            sigma2: self.sigma2,
            genie: self.genie,
        }
    }
}

/// Per-subcarrier least squares on the two time-orthogonal pilot symbols:
/// `h_a[k] = Y[k,0] / P_A[k]`, `h_b[k] = Y[k,1] / P_B[k]`.
///
/// The noise variance is estimated from the null subcarriers of the pilot
/// symbols, which carry no signal energy; with a single pilot observation
/// per node and subcarrier the in-band least-squares residual is zero by
/// construction, so the guard bins are the frame's only noise reference.
pub fn estimate_channels(
    received: &QpskSymbolGrid,
    layout: &FrameLayout,
) -> Result<ChannelEstimate, ModelError> {
    if received.n_pilot_cols() < 2 {
        return Err(framing("received grid lacks the two pilot symbols"));
    }
    if received.fft_size() != layout.fft_size {
        return Err(framing("received grid fft size does not match layout"));
    }
    let p_a = layout.pilot_for(NodeId::A);
    let p_b = layout.pilot_for(NodeId::B);
    let zero = Complex64::new(0.0, 0.0);
    let mut h_a = vec![zero; layout.fft_size];
    let mut h_b = vec![zero; layout.fft_size];
    for (i, &bin) in layout.data_bins.iter().enumerate() {
        if p_a[i].norm() < ZERO_MAG || p_b[i].norm() < ZERO_MAG {
            return Err(config("pilot reference value is zero"));
        }
        h_a[bin] = received.at(bin, 0) / p_a[i];
        h_b[bin] = received.at(bin, 1) / p_b[i];
    }

    let nulls = layout.null_bins();
    let sigma2 = if nulls.is_empty() {
        0.0
    } else {
        let mut acc = 0.0;
        for &bin in &nulls {
            acc += received.at(bin, 0).norm_sqr();
            acc += received.at(bin, 1).norm_sqr();
        }
        acc / (2 * nulls.len()) as f64
    };

    let offsets = phase_offsets(&h_a, &h_b);
    Ok(ChannelEstimate {
        h_a,
        h_b,
        phase_offsets: offsets,
        sigma2,
        genie: false,
    })
}

// ---------------------------------------------------------------------------
// Phase alignment
// ---------------------------------------------------------------------------

/// Per-subcarrier rotations fed back to node B so the two constellations
/// overlap with (near) zero relative phase at the relay.
#[derive(Debug, Clone)]
pub struct Precompensation {
    /// One unit-magnitude rotation per subcarrier; identity on nulls and on
    /// unalignable bins.
    pub rotations: Vec<Complex64>,
    pub unalignable: Vec<bool>,
}

impl Precompensation {
    pub fn identity(fft_size: usize) -> Self {
        Self {
            rotations: vec![Complex64::new(1.0, 0.0); fft_size],
            unalignable: vec![false; fft_size],
        }
    }
}

/// `c[k] = exp(-j phase_offset[k])` on each data subcarrier, so that
/// `h_b[k] c[k]` lines up with `h_a[k]`. A vanished estimate leaves that
/// subcarrier on the identity rotation and flags it.
pub fn compute_precompensation(est: &ChannelEstimate, layout: &FrameLayout) -> Precompensation {
    let mut pre = Precompensation::identity(layout.fft_size);
    for &bin in &layout.data_bins {
        if est.h_a[bin].norm() < ZERO_MAG || est.h_b[bin].norm() < ZERO_MAG {
            pre.unalignable[bin] = true;
        } else {
            pre.rotations[bin] = Complex64::from_polar(1.0, -est.phase_offsets[bin]);
        }
    }
    pre
}

/// Rotates each payload subcarrier of a pilot-free grid; this is node B's
/// transmit-side alignment step, applied before the IFFT.
pub fn apply_precompensation(grid: &mut QpskSymbolGrid, pre: &Precompensation) {
    assert_eq!(grid.n_pilot_cols(), 0, "alignment applies to payload only");
    for col in 0..grid.n_data_cols() {
        for bin in 0..grid.fft_size() {
            *grid.at_mut(bin, col) *= pre.rotations[bin];
        }
    }
}

// ---------------------------------------------------------------------------
// Maximum-likelihood XOR mapping
// ---------------------------------------------------------------------------

/// Decides the XOR bit pair for one superposed observation.
///
/// For each XOR hypothesis `r` the likelihood marginalizes over the four
/// symbol pairs `(s_a, s_a ^ r)`, computed in the log domain. `sigma2 = 0`
/// takes the vanishing-noise limit: the closest pair wins. Ties resolve
/// toward the smallest pair value.
pub fn xor_map_ml(
    y: Complex64,
    h_a: Complex64,
    h_b: Complex64,
    sigma2: f64,
    variant: LikelihoodVariant,
) -> u8 {
    assert!(sigma2 >= 0.0, "noise variance must be non-negative");
    let mut d2 = [[0.0f64; 4]; 4];
    for sa in 0..4 {
        for sb in 0..4 {
            d2[sa][sb] =
                (y - h_a * qpsk_point(sa as u8) - h_b * qpsk_point(sb as u8)).norm_sqr();
        }
    }

    if sigma2 <= 0.0 {
        let mut best = (f64::INFINITY, 0u8);
        for sa in 0..4usize {
            for sb in 0..4usize {
                let r = (sa ^ sb) as u8;
                let d = d2[sa][sb];
                if d < best.0 || (d == best.0 && r < best.1) {
                    best = (d, r);
                }
            }
        }
        return best.1;
    }

    let mut best = (f64::NEG_INFINITY, 0u8);
    for r in 0..4usize {
        let exponents = [
            -d2[0][r] / sigma2,
            -d2[1][1 ^ r] / sigma2,
            -d2[2][2 ^ r] / sigma2,
            -d2[3][3 ^ r] / sigma2,
        ];
        let score = match variant {
            LikelihoodVariant::Exact => log_sum_exp(&exponents),
            LikelihoodVariant::MaxLog => {
                exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        if score > best.0 {
            best = (score, r as u8);
        }
    }
    best.1
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// Relay packet decoding
// ---------------------------------------------------------------------------

/// Decided XOR bit pairs for one payload, with per-decision log-posterior
/// margins and the count of subcarriers decoded as erasures.
#[derive(Debug, Clone)]
pub struct XorDecision {
    pub xor_symbols: Vec<u8>,
    pub posteriors: Vec<f64>,
    pub erasures: u64,
}

/// The relay's XOR packet `U_R`, an estimate of `U_A ^ U_B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayPacket {
    pub bits: BitPacket,
}

/// Applies [`xor_map_ml`] across the payload in the same subcarrier-major
/// order the mapper consumed bits, concatenating decided pairs into `U_R`.
/// Subcarriers whose estimate vanished decode as erasures (pair `00`) and
/// are counted in the decision diagnostics.
pub fn decode_relay_packet(
    obs: &QpskSymbolGrid,
    est: &ChannelEstimate,
    layout: &FrameLayout,
    variant: LikelihoodVariant,
) -> (RelayPacket, XorDecision) {
    let n_decisions = layout.data_subcarriers() * obs.n_data_cols();
    let mut xor_symbols = Vec::with_capacity(n_decisions);
    let mut posteriors = Vec::with_capacity(n_decisions);
    let mut erasures = 0u64;
    let mut bits = Vec::with_capacity(2 * n_decisions);

    for col in obs.n_pilot_cols()..obs.total_cols() {
        for &bin in &layout.data_bins {
            let h_a = est.h_a[bin];
            let h_b = est.h_b[bin];
            if h_a.norm() < ZERO_MAG || h_b.norm() < ZERO_MAG {
                erasures += 1;
                xor_symbols.push(0);
                posteriors.push(0.0);
                bits.push(0);
                bits.push(0);
                continue;
            }
            let y = obs.at(bin, col);
            let r = xor_map_ml(y, h_a, h_b, est.sigma2, variant);
            xor_symbols.push(r);
            posteriors.push(decision_margin(y, h_a, h_b, est.sigma2, r));
            bits.push((r >> 1) & 1);
            bits.push(r & 1);
        }
    }

    let packet = RelayPacket {
        bits: BitPacket::new(bits).expect("decisions emit 0/1 pairs"),
    };
    (
        packet,
        XorDecision {
            xor_symbols,
            posteriors,
            erasures,
        },
    )
}

/// Log-likelihood gap between the winning hypothesis and its best rival.
fn decision_margin(y: Complex64, h_a: Complex64, h_b: Complex64, sigma2: f64, winner: u8) -> f64 {
    if sigma2 <= 0.0 {
        return f64::INFINITY;
    }
    let mut scores = [0.0f64; 4];
    for (r, score) in scores.iter_mut().enumerate() {
        let exponents: Vec<f64> = (0..4usize)
            .map(|sa| {
                let sb = sa ^ r;
                -(y - h_a * qpsk_point(sa as u8) - h_b * qpsk_point(sb as u8)).norm_sqr() / sigma2
            })
            .collect();
        *score = log_sum_exp(&exponents);
    }
    let win = scores[winner as usize];
    let rival = scores
        .iter()
        .enumerate()
        .filter(|(r, _)| *r != winner as usize)
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    win - rival
}

// ---------------------------------------------------------------------------
// Broadcast phase
// ---------------------------------------------------------------------------

/// Receives a conventional single-transmitter frame: demodulate, equalize
/// per subcarrier by the genie or pilot-estimated channel, hard-demap.
pub fn p2p_receive(
    modem: &OfdmModem,
    layout: &FrameLayout,
    rx: &crate::ofdm::OfdmFrame,
    h_true: &[Complex64],
    tx_node: NodeId,
    genie_csi: bool,
) -> Result<BitPacket, ModelError> {
    let mut grid = modem.demodulate(rx)?;
    let h_hat: Vec<Complex64> = if genie_csi {
        h_true.to_vec()
    } else {
        let est = estimate_channels(&grid, layout)?;
        match tx_node {
            NodeId::A => est.h_a,
            NodeId::B => est.h_b,
        }
    };
    for col in grid.n_pilot_cols()..grid.total_cols() {
        for &bin in &layout.data_bins {
            let h = h_hat[bin];
            if h.norm() > ZERO_MAG {
                *grid.at_mut(bin, col) /= h;
            }
        }
    }
    Ok(qpsk_demap(&grid, layout))
}

/// One end node's view of the broadcast slot: the relay modulates `U_R`,
/// the node receives it over its downlink, equalizes, demaps, and XORs with
/// its own packet to recover the partner's. The relay transmits in pilot
/// slot 0.
#[allow(clippy::too_many_arguments)]
pub fn broadcast_and_recover(
    modem: &OfdmModem,
    layout: &FrameLayout,
    relay_pkt: &RelayPacket,
    h_down: &[Complex64],
    sigma2: f64,
    own_pkt: &BitPacket,
    genie_csi: bool,
    rng: &mut impl Rng,
) -> Result<BitPacket, ModelError> {
    if relay_pkt.bits.len() != own_pkt.len() {
        return Err(framing(format!(
            "relay packet length {} differs from own packet length {}",
            relay_pkt.bits.len(),
            own_pkt.len()
        )));
    }
    let grid = qpsk_map(&relay_pkt.bits, layout)?;
    let frame = modem.modulate(&build_frame(&grid, NodeId::A, layout)?);
    let rx = apply_p2p_channel(modem, &frame, h_down, sigma2, rng)?;
    let relay_hat = p2p_receive(modem, layout, &rx, h_down, NodeId::A, genie_csi)?;
    relay_hat.xor(own_pkt)
}
