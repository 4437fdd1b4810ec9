//! Optical channel models: Lambertian line-of-sight gain, frequency-selective
//! non-line-of-sight fading, frame-level occlusion, and the superposed
//! multiple-access reception at the relay.
//!
//! Channel coefficients are applied per subcarrier in the frequency domain,
//! which for a cyclic prefix longer than the channel memory is exactly the
//! circular convolution the prefix buys. Sweeps run with link gains jointly
//! rescaled to unit mean energy so the SNR axis reads as received SNR per
//! subcarrier; the raw Lambertian gains still fix the relative strength of
//! the two uplinks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, framing, ModelError};
use crate::ofdm::{OfdmFrame, OfdmModem};

/// Line-of-sight or diffuse propagation for one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagation {
    LoS,
    NLoS,
}

/// Geometry and impairment parameters of a single optical link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub distance_m: f64,
    /// Lambertian half-power semi-angle of the LED.
    pub led_semiangle_deg: f64,
    /// Effective photodetector area; optical filter and concentrator gains
    /// are folded in.
    pub pd_area_m2: f64,
    pub irradiance_deg: f64,
    pub incidence_deg: f64,
    pub fov_deg: f64,
    pub scenario: Propagation,
    /// RMS delay spread of the diffuse tail (NLoS only).
    pub rms_delay_spread_ns: f64,
    /// Per-frame probability that an obstacle shadows this link.
    pub occlusion_prob: f64,
    pub occlusion_atten_db: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            distance_m: 2.0,
            led_semiangle_deg: 60.0,
            pd_area_m2: 1e-4,
            irradiance_deg: 0.0,
            incidence_deg: 0.0,
            fov_deg: 70.0,
            scenario: Propagation::LoS,
            rms_delay_spread_ns: 0.0,
            occlusion_prob: 0.0,
            occlusion_atten_db: 0.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.distance_m <= 0.0 {
            return Err(config("distance_m must be positive"));
        }
        if !(self.led_semiangle_deg > 0.0 && self.led_semiangle_deg < 90.0) {
            return Err(config("led_semiangle_deg must lie in (0, 90)"));
        }
        if self.pd_area_m2 <= 0.0 {
            return Err(config("pd_area_m2 must be positive"));
        }
        if !(0.0..=180.0).contains(&self.incidence_deg) {
            return Err(config("incidence_deg must lie in [0, 180]"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) {
            return Err(config("occlusion_prob must lie in [0, 1]"));
        }
        if self.occlusion_atten_db < 0.0 {
            return Err(config("occlusion_atten_db must be non-negative"));
        }
        if self.rms_delay_spread_ns < 0.0 {
            return Err(config("rms_delay_spread_ns must be non-negative"));
        }
        Ok(())
    }
}

/// Additive noise level at the receiver.
///
/// `sigma2` is the complex-noise variance per frequency-domain sample; under
/// the unitary transform the same variance applies per time-domain sample.
/// Zero is permitted as the noiseless test mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
    /// Ambient photocurrent removed by AC coupling; retained for bookkeeping
    /// only.
    pub ambient_dc: f64,
    pub snr_db: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma2: 0.0,
            ambient_dc: 0.0,
            snr_db: f64::INFINITY,
        }
    }
}

/// Maps the sweep axis to a noise variance: `sigma2 = 10^(-snr_db/10)` under
/// unit per-subcarrier signal energy.
pub fn calibrate_noise(snr_db: f64) -> NoiseModel {
    assert!(snr_db.is_finite(), "snr_db must be finite");
    NoiseModel {
        sigma2: 10f64.powf(-snr_db / 10.0),
        ambient_dc: 0.0,
        snr_db,
    }
}

/// One frame's channel state for the two uplinks into the relay.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_a: Vec<Complex64>,
    pub h_b: Vec<Complex64>,
    /// Per-subcarrier phase of `h_b` relative to `h_a`, in (-pi, pi].
    pub phase_offsets: Vec<f64>,
    pub occluded_a: bool,
    pub occluded_b: bool,
    pub noise: NoiseModel,
}

impl ChannelRealization {
    pub fn from_coefficients(
        h_a: Vec<Complex64>,
        h_b: Vec<Complex64>,
        occluded_a: bool,
        occluded_b: bool,
        noise: NoiseModel,
    ) -> Self {
        assert_eq!(h_a.len(), h_b.len());
        let phase_offsets = phase_offsets(&h_a, &h_b);
        Self {
            h_a,
            h_b,
            phase_offsets,
            occluded_a,
            occluded_b,
            noise,
        }
    }

    /// Flat channel pair with the given relative phase on every subcarrier;
    /// handy for forcing worst-case constellation geometry in tests.
    pub fn flat_with_phase(fft_size: usize, phi: f64, noise: NoiseModel) -> Self {
        let h_a = vec![Complex64::new(1.0, 0.0); fft_size];
        let h_b = vec![Complex64::from_polar(1.0, phi); fft_size];
        Self::from_coefficients(h_a, h_b, false, false, noise)
    }

    pub fn fft_size(&self) -> usize {
        self.h_a.len()
    }
}

/// `arg(h_b[k] / h_a[k])` per subcarrier; zero where either coefficient
/// vanishes.
pub fn phase_offsets(h_a: &[Complex64], h_b: &[Complex64]) -> Vec<f64> {
    h_a.iter()
        .zip(h_b.iter())
        .map(|(a, b)| {
            if a.norm_sqr() > 0.0 && b.norm_sqr() > 0.0 {
                (b / a).arg()
            } else {
                0.0
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gains and link realizations
// ---------------------------------------------------------------------------

/// Lambertian line-of-sight DC gain:
/// `H = (m+1) A / (2 pi d^2) * cos^m(phi) * cos(psi)` for incidence within
/// the field of view, zero outside, with `m = -ln 2 / ln cos(semiangle)`.
pub fn lambertian_los_gain(geom: &GeometryConfig) -> Result<f64, ModelError> {
    if geom.distance_m <= 0.0 {
        return Err(config("distance_m must be positive"));
    }
    if geom.incidence_deg > geom.fov_deg {
        return Ok(0.0);
    }
    let semi = geom.led_semiangle_deg.to_radians();
    let m = -std::f64::consts::LN_2 / semi.cos().ln();
    let phi = geom.irradiance_deg.to_radians();
    let psi = geom.incidence_deg.to_radians();
    let h = (m + 1.0) * geom.pd_area_m2 / (2.0 * PI * geom.distance_m * geom.distance_m)
        * phi.cos().powf(m)
        * psi.cos();
    Ok(h)
}

/// A drawn frequency response for one link, before any cross-link
/// normalization.
#[derive(Debug, Clone)]
pub struct LinkRealization {
    pub h: Vec<Complex64>,
    pub occluded: bool,
}

fn delay_spread_samples(geom: &GeometryConfig, sample_rate_hz: f64) -> f64 {
    geom.rms_delay_spread_ns * 1e-9 * sample_rate_hz
}

/// Draws one link's frequency response with mean energy `gain^2` per
/// subcarrier. LoS gives a flat response with a random phase per frame;
/// NLoS transforms an exponential-decay tap profile with complex Gaussian
/// taps confined to the cyclic prefix.
fn draw_response(
    geom: &GeometryConfig,
    gain: f64,
    fft_size: usize,
    cp_len: usize,
    sample_rate_hz: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, ModelError> {
    match geom.scenario {
        Propagation::LoS => {
            let theta = rng.gen_range(-PI..PI);
            let h = Complex64::from_polar(gain, theta);
            Ok(vec![h; fft_size])
        }
        Propagation::NLoS => {
            let tau = delay_spread_samples(geom, sample_rate_hz);
            if tau > cp_len as f64 {
                return Err(config(format!(
                    "rms delay spread of {tau:.2} samples exceeds the {cp_len}-sample cyclic prefix"
                )));
            }
            // Taps out to ~6 tau carry all but e^-6 of the profile energy.
            let n_taps = (((6.0 * tau).ceil() as usize) + 1).min(cp_len.max(1));
            let mut powers: Vec<f64> = (0..n_taps)
                .map(|t| {
                    if tau > 0.0 {
                        (-(t as f64) / tau).exp()
                    } else if t == 0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = powers.iter().sum();
            for p in powers.iter_mut() {
                *p /= total;
            }
            let taps: Vec<Complex64> = powers
                .iter()
                .map(|&p| {
                    let s = (p / 2.0).sqrt();
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                })
                .collect();
            // Plain DFT of the tap vector: E|h_k|^2 = sum of tap powers = 1.
            let h = (0..fft_size)
                .map(|k| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, g) in taps.iter().enumerate() {
                        let angle = -2.0 * PI * (k * t) as f64 / fft_size as f64;
                        acc += g * Complex64::from_polar(1.0, angle);
                    }
                    acc * gain
                })
                .collect();
            Ok(h)
        }
    }
}

fn occlusion_factor(geom: &GeometryConfig, occluded: bool) -> f64 {
    if occluded {
        10f64.powf(-geom.occlusion_atten_db / 20.0)
    } else {
        1.0
    }
}

/// Draws one link with its raw Lambertian gain, so `E[|h_k|^2] = G^2` before
/// occlusion. Draw order: response, then the occlusion flag.
pub fn draw_link_raw(
    geom: &GeometryConfig,
    fft_size: usize,
    cp_len: usize,
    sample_rate_hz: f64,
    rng: &mut impl Rng,
) -> Result<LinkRealization, ModelError> {
    geom.validate()?;
    let gain = lambertian_los_gain(geom)?;
    let mut h = draw_response(geom, gain, fft_size, cp_len, sample_rate_hz, rng)?;
    let occluded = geom.occlusion_prob > 0.0 && rng.gen_bool(geom.occlusion_prob);
    let f = occlusion_factor(geom, occluded);
    if f != 1.0 {
        for v in h.iter_mut() {
            *v *= f;
        }
    }
    Ok(LinkRealization { h, occluded })
}

/// Draws one link normalized to unit mean energy before occlusion, for use
/// as a broadcast-phase downlink under the calibrated-SNR convention.
pub fn draw_single_link(
    geom: &GeometryConfig,
    fft_size: usize,
    cp_len: usize,
    sample_rate_hz: f64,
    rng: &mut impl Rng,
) -> Result<LinkRealization, ModelError> {
    geom.validate()?;
    let mut h = draw_response(geom, 1.0, fft_size, cp_len, sample_rate_hz, rng)?;
    let occluded = geom.occlusion_prob > 0.0 && rng.gen_bool(geom.occlusion_prob);
    let f = occlusion_factor(geom, occluded);
    if f != 1.0 {
        for v in h.iter_mut() {
            *v *= f;
        }
    }
    Ok(LinkRealization { h, occluded })
}

/// Draws the multiple-access channel pair for one frame.
///
/// The two raw gains are jointly rescaled so their mean square is one; with
/// symmetric geometry each uplink then has unit mean energy and `snr_db` is
/// the received per-subcarrier SNR. Occlusion attenuates after the rescale.
pub fn draw_channel(
    geom_a: &GeometryConfig,
    geom_b: &GeometryConfig,
    noise: &NoiseModel,
    fft_size: usize,
    cp_len: usize,
    sample_rate_hz: f64,
    rng: &mut impl Rng,
) -> Result<ChannelRealization, ModelError> {
    geom_a.validate()?;
    geom_b.validate()?;
    let g_a = lambertian_los_gain(geom_a)?;
    let g_b = lambertian_los_gain(geom_b)?;
    let mean_sq = (g_a * g_a + g_b * g_b) / 2.0;
    if mean_sq <= 0.0 {
        return Err(config("both uplink gains are zero; nothing reaches the relay"));
    }
    let scale = 1.0 / mean_sq.sqrt();

    let mut h_a = draw_response(geom_a, g_a * scale, fft_size, cp_len, sample_rate_hz, rng)?;
    let mut h_b = draw_response(geom_b, g_b * scale, fft_size, cp_len, sample_rate_hz, rng)?;
    let occluded_a = geom_a.occlusion_prob > 0.0 && rng.gen_bool(geom_a.occlusion_prob);
    let occluded_b = geom_b.occlusion_prob > 0.0 && rng.gen_bool(geom_b.occlusion_prob);
    let f_a = occlusion_factor(geom_a, occluded_a);
    let f_b = occlusion_factor(geom_b, occluded_b);
    if f_a != 1.0 {
        for v in h_a.iter_mut() {
            *v *= f_a;
        }
    }
    if f_b != 1.0 {
        for v in h_b.iter_mut() {
            *v *= f_b;
        }
    }
    Ok(ChannelRealization::from_coefficients(
        h_a, h_b, occluded_a, occluded_b, *noise,
    ))
}

// ---------------------------------------------------------------------------
// Channel application
// ---------------------------------------------------------------------------

fn add_awgn(samples: &mut [Complex64], sigma2: f64, rng: &mut impl Rng) {
    if sigma2 <= 0.0 {
        return;
    }
    let s = (sigma2 / 2.0).sqrt();
    for v in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(s * re, s * im);
    }
}

fn apply_in_freq(
    modem: &OfdmModem,
    frame: &OfdmFrame,
    h: &[Complex64],
) -> Result<crate::ofdm::QpskSymbolGrid, ModelError> {
    if h.len() != frame.fft_size {
        return Err(framing("channel coefficient count does not match fft size"));
    }
    let mut grid = modem.demodulate(frame)?;
    for col in 0..grid.total_cols() {
        for bin in 0..grid.fft_size() {
            *grid.at_mut(bin, col) *= h[bin];
        }
    }
    Ok(grid)
}

/// The relay's multiple-access reception: both uplinks applied per
/// subcarrier, summed, plus white Gaussian noise of variance `sigma2` per
/// sample. Demodulating the result gives exactly
/// `h_a[k] X_A[k,n] + h_b[k] X_B[k,n] + w[k,n]`.
pub fn superpose_mac_phase(
    modem: &OfdmModem,
    frame_a: &OfdmFrame,
    frame_b: &OfdmFrame,
    ch: &ChannelRealization,
    rng: &mut impl Rng,
) -> Result<OfdmFrame, ModelError> {
    if !frame_a.same_layout(frame_b) {
        return Err(framing("superposed frames must share one layout"));
    }
    let grid_a = apply_in_freq(modem, frame_a, &ch.h_a)?;
    let grid_b = apply_in_freq(modem, frame_b, &ch.h_b)?;
    let mut sum = grid_a;
    for col in 0..sum.total_cols() {
        for bin in 0..sum.fft_size() {
            *sum.at_mut(bin, col) += grid_b.at(bin, col);
        }
    }
    let mut out = modem.modulate(&sum);
    add_awgn(&mut out.samples, ch.noise.sigma2, rng);
    Ok(out)
}

/// Conventional single-transmitter reception, as used by the broadcast phase
/// and the baselines.
pub fn apply_p2p_channel(
    modem: &OfdmModem,
    frame: &OfdmFrame,
    h: &[Complex64],
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<OfdmFrame, ModelError> {
    let grid = apply_in_freq(modem, frame, h)?;
    let mut out = modem.modulate(&grid);
    add_awgn(&mut out.samples, sigma2, rng);
    Ok(out)
}
