//! One Monte-Carlo trial: a full bidirectional exchange under one scheme at
//! one sweep point.
//!
//! Each trial derives its own random stream from its labels, so tallies are
//! reproducible in isolation and independent of scheduling. All counters are
//! integers; merging is exact and order-free.

use rand_chacha::ChaCha8Rng;

use crate::channel::{draw_channel, draw_single_link, superpose_mac_phase, NoiseModel};
use crate::error::ModelError;
use crate::metrics::{crc, hamming_distance, Scheme};
use crate::ofdm::{build_frame, pilot_frame, qpsk_map, BitPacket, FrameLayout, NodeId, OfdmModem};
use crate::pnc::{
    apply_precompensation, broadcast_and_recover, compute_precompensation, decode_relay_packet,
    estimate_channels, p2p_receive, ChannelEstimate, Precompensation,
};
use crate::sim::config::ScenarioConfig;
use crate::sim::seed::trial_rng;
use crate::sim::SimError;

/// Integer tallies of one or more trials. Addition is associative and
/// commutative, so partial tallies merge in any order without changing the
/// result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialTally {
    pub trials: u64,
    /// End-to-end bits compared (both directions).
    pub bits_compared: u64,
    pub bit_errors: u64,
    /// Relay XOR-decision bits compared (relay schemes only).
    pub xor_bits: u64,
    pub xor_errors: u64,
    /// Hop-weighted goodput bits: packet length times hops traversed, per
    /// integrity-checked delivery.
    pub delivered_link_bits: u64,
    /// End-to-end information bits delivered (energy denominator).
    pub delivered_info_bits: u64,
    /// Normalized transmit energy: slot-transmitter units.
    pub energy_units: u64,
    /// Subcarrier decisions emitted as erasures.
    pub erasures: u64,
}

impl TrialTally {
    pub fn merge(&mut self, other: &TrialTally) {
        self.trials += other.trials;
        self.bits_compared += other.bits_compared;
        self.bit_errors += other.bit_errors;
        self.xor_bits += other.xor_bits;
        self.xor_errors += other.xor_errors;
        self.delivered_link_bits += other.delivered_link_bits;
        self.delivered_info_bits += other.delivered_info_bits;
        self.energy_units += other.energy_units;
        self.erasures += other.erasures;
    }

    pub fn ber(&self) -> f64 {
        if self.bits_compared == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }

    pub fn xor_ber(&self) -> f64 {
        if self.xor_bits == 0 {
            0.0
        } else {
            self.xor_errors as f64 / self.xor_bits as f64
        }
    }
}

/// Everything a trial needs that is constant across one sweep point.
pub struct PointContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub layout: &'a FrameLayout,
    pub modem: &'a OfdmModem,
    pub scheme: Scheme,
    pub snr_index: usize,
    pub snr_db: f64,
    pub noise: NoiseModel,
}

impl PointContext<'_> {
    fn annotate(&self, trial: u64) -> impl Fn(ModelError) -> SimError + '_ {
        let scheme = self.scheme;
        let snr_db = self.snr_db;
        move |source| SimError::Trial {
            scheme: scheme.name(),
            snr_db,
            trial,
            source,
        }
    }
}

/// Runs one exchange and returns its tallies. The random stream is derived
/// from `(master_seed, scenario, scheme, snr_index, trial_index)` alone.
pub fn run_trial(ctx: &PointContext<'_>, trial_index: u64) -> Result<TrialTally, SimError> {
    let mut rng = trial_rng(
        ctx.cfg.master_seed,
        &ctx.cfg.name,
        ctx.scheme,
        ctx.snr_index,
        trial_index,
    );
    let wrap = ctx.annotate(trial_index);
    match ctx.scheme {
        Scheme::Pnc => pnc_exchange(ctx, true, &mut rng).map_err(wrap),
        Scheme::PncUnaligned => pnc_exchange(ctx, false, &mut rng).map_err(wrap),
        Scheme::StoreForward => store_forward_exchange(ctx, &mut rng).map_err(wrap),
        Scheme::Pt2Pt => pt2pt_exchange(ctx, &mut rng).map_err(wrap),
    }
}

/// The two-slot relay exchange: simultaneous uplink with ML XOR mapping,
/// then one broadcast slot received by both end nodes.
fn pnc_exchange(
    ctx: &PointContext<'_>,
    aligned: bool,
    rng: &mut ChaCha8Rng,
) -> Result<TrialTally, ModelError> {
    let layout = ctx.layout;
    let modem = ctx.modem;
    let l = ctx.cfg.packet_bits;
    let hops = ctx.scheme.hops_per_packet();

    let u_a = crc::sealed_packet(l, rng);
    let u_b = crc::sealed_packet(l, rng);

    let ch = draw_channel(
        &ctx.cfg.geometry.a_to_r,
        &ctx.cfg.geometry.b_to_r,
        &ctx.noise,
        layout.fft_size,
        layout.cp_len,
        ctx.cfg.sampling_rate_hz,
        rng,
    )?;

    // Pilot head of the frame: both nodes sound, the relay estimates. Node
    // B's payload alignment below relies on the spec'd ideal, delay-free
    // feedback of these estimates within the block-constant channel.
    let pilots_a = modem.modulate(&pilot_frame(NodeId::A, layout));
    let pilots_b = modem.modulate(&pilot_frame(NodeId::B, layout));
    let rx_pilots = superpose_mac_phase(modem, &pilots_a, &pilots_b, &ch, rng)?;
    let est = if ctx.cfg.genie_csi {
        ChannelEstimate::genie(&ch)
    } else {
        estimate_channels(&modem.demodulate(&rx_pilots)?, layout)?
    };

    let pre = if aligned {
        compute_precompensation(&est, layout)
    } else {
        Precompensation::identity(layout.fft_size)
    };

    // Payload part of the frame, with node B pre-rotated per subcarrier.
    let grid_a = qpsk_map(&u_a, layout)?;
    let mut grid_b = qpsk_map(&u_b, layout)?;
    apply_precompensation(&mut grid_b, &pre);
    let rx_data = superpose_mac_phase(
        modem,
        &modem.modulate(&grid_a),
        &modem.modulate(&grid_b),
        &ch,
        rng,
    )?;
    let obs = modem.demodulate(&rx_data)?;

    // The relay fed the rotations back, so it decodes against the composed
    // downstream channel.
    let est_eff = est.with_precompensation(&pre);
    let (relay_pkt, diag) = decode_relay_packet(&obs, &est_eff, layout, ctx.cfg.likelihood);

    let xor_true = u_a.xor(&u_b)?;
    let mut tally = TrialTally {
        trials: 1,
        xor_bits: l as u64,
        xor_errors: hamming_distance(&relay_pkt.bits, &xor_true)?,
        erasures: diag.erasures,
        energy_units: ctx.scheme.energy_units_per_exchange(),
        ..TrialTally::default()
    };

    // Broadcast slot: one transmission, two independent downlinks.
    let down_a = draw_single_link(
        &ctx.cfg.geometry.r_to_a,
        layout.fft_size,
        layout.cp_len,
        ctx.cfg.sampling_rate_hz,
        rng,
    )?;
    let down_b = draw_single_link(
        &ctx.cfg.geometry.r_to_b,
        layout.fft_size,
        layout.cp_len,
        ctx.cfg.sampling_rate_hz,
        rng,
    )?;
    let recovered_at_a = broadcast_and_recover(
        modem,
        layout,
        &relay_pkt,
        &down_a.h,
        ctx.noise.sigma2,
        &u_a,
        ctx.cfg.genie_csi,
        rng,
    )?;
    let recovered_at_b = broadcast_and_recover(
        modem,
        layout,
        &relay_pkt,
        &down_b.h,
        ctx.noise.sigma2,
        &u_b,
        ctx.cfg.genie_csi,
        rng,
    )?;

    tally.bits_compared += 2 * l as u64;
    tally.bit_errors += hamming_distance(&recovered_at_a, &u_b)?;
    tally.bit_errors += hamming_distance(&recovered_at_b, &u_a)?;
    if crc::check(&recovered_at_a) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    if crc::check(&recovered_at_b) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    Ok(tally)
}

/// One conventional hop: modulate, cross the link, equalize, demap.
fn p2p_hop(
    ctx: &PointContext<'_>,
    geom: &crate::channel::GeometryConfig,
    payload: &BitPacket,
    tx_node: NodeId,
    rng: &mut ChaCha8Rng,
) -> Result<BitPacket, ModelError> {
    let layout = ctx.layout;
    let link = draw_single_link(
        geom,
        layout.fft_size,
        layout.cp_len,
        ctx.cfg.sampling_rate_hz,
        rng,
    )?;
    let frame = ctx
        .modem
        .modulate(&build_frame(&qpsk_map(payload, layout)?, tx_node, layout)?);
    let rx = crate::channel::apply_p2p_channel(ctx.modem, &frame, &link.h, ctx.noise.sigma2, rng)?;
    p2p_receive(ctx.modem, layout, &rx, &link.h, tx_node, ctx.cfg.genie_csi)
}

/// The four-slot baseline: the relay fully decodes each uplink packet and
/// re-transmits it on the matching downlink, errors and all.
fn store_forward_exchange(
    ctx: &PointContext<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialTally, ModelError> {
    let l = ctx.cfg.packet_bits;
    let hops = ctx.scheme.hops_per_packet();
    let u_a = crc::sealed_packet(l, rng);
    let u_b = crc::sealed_packet(l, rng);

    // A -> R -> B; the relay forwards in pilot slot 0.
    let at_relay = p2p_hop(ctx, &ctx.cfg.geometry.a_to_r, &u_a, NodeId::A, rng)?;
    let a_at_b = p2p_hop(ctx, &ctx.cfg.geometry.r_to_b, &at_relay, NodeId::A, rng)?;
    // B -> R -> A.
    let at_relay = p2p_hop(ctx, &ctx.cfg.geometry.b_to_r, &u_b, NodeId::B, rng)?;
    let b_at_a = p2p_hop(ctx, &ctx.cfg.geometry.r_to_a, &at_relay, NodeId::A, rng)?;

    let mut tally = TrialTally {
        trials: 1,
        bits_compared: 2 * l as u64,
        energy_units: ctx.scheme.energy_units_per_exchange(),
        ..TrialTally::default()
    };
    tally.bit_errors += hamming_distance(&a_at_b, &u_a)?;
    tally.bit_errors += hamming_distance(&b_at_a, &u_b)?;
    if crc::check(&a_at_b) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    if crc::check(&b_at_a) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    Ok(tally)
}

/// Direct bidirectional exchange with no relay: one slot each way over the
/// representative single links.
fn pt2pt_exchange(ctx: &PointContext<'_>, rng: &mut ChaCha8Rng) -> Result<TrialTally, ModelError> {
    let l = ctx.cfg.packet_bits;
    let hops = ctx.scheme.hops_per_packet();
    let u_a = crc::sealed_packet(l, rng);
    let u_b = crc::sealed_packet(l, rng);

    let a_at_b = p2p_hop(ctx, &ctx.cfg.geometry.a_to_r, &u_a, NodeId::A, rng)?;
    let b_at_a = p2p_hop(ctx, &ctx.cfg.geometry.b_to_r, &u_b, NodeId::B, rng)?;

    let mut tally = TrialTally {
        trials: 1,
        bits_compared: 2 * l as u64,
        energy_units: ctx.scheme.energy_units_per_exchange(),
        ..TrialTally::default()
    };
    tally.bit_errors += hamming_distance(&a_at_b, &u_a)?;
    tally.bit_errors += hamming_distance(&b_at_a, &u_b)?;
    if crc::check(&a_at_b) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    if crc::check(&b_at_a) {
        tally.delivered_link_bits += hops * l as u64;
        tally.delivered_info_bits += l as u64;
    }
    Ok(tally)
}
