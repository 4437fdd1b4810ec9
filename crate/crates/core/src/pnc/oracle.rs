//! Brute-force reference for the XOR demapper.
//!
//! [`xor_map_reference`] enumerates all sixteen transmit pairs in the linear
//! domain and accumulates each XOR hypothesis' likelihood directly, sharing
//! no code with the production log-domain path. The equivalence suite backs
//! the `oracle-check` CLI command and the acceptance tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::ofdm::qpsk_point;
use crate::pnc::{xor_map_ml, LikelihoodVariant};

/// Likelihood-maximizing XOR pair by exhaustive enumeration.
///
/// Likelihoods are exponentiated relative to the closest pair, which scales
/// every hypothesis by the same positive constant and so preserves the
/// argmax while staying representable. Ties resolve toward the smaller pair
/// value, like the production decoder.
pub fn xor_map_reference(y: Complex64, h_a: Complex64, h_b: Complex64, sigma2: f64) -> u8 {
    assert!(sigma2 >= 0.0);
    let mut d2 = [[0.0f64; 4]; 4];
    let mut d_min = f64::INFINITY;
    for sa in 0..4usize {
        for sb in 0..4usize {
            let d = (y - h_a * qpsk_point(sa as u8) - h_b * qpsk_point(sb as u8)).norm_sqr();
            d2[sa][sb] = d;
            d_min = d_min.min(d);
        }
    }

    if sigma2 <= 0.0 {
        // Vanishing-noise limit: the closest pair's XOR wins.
        let mut best = (f64::INFINITY, 0u8);
        for sa in 0..4usize {
            for sb in 0..4usize {
                let r = (sa ^ sb) as u8;
                if d2[sa][sb] < best.0 || (d2[sa][sb] == best.0 && r < best.1) {
                    best = (d2[sa][sb], r);
                }
            }
        }
        return best.1;
    }

    let mut likelihood = [0.0f64; 4];
    for sa in 0..4usize {
        for sb in 0..4usize {
            likelihood[sa ^ sb] += (-(d2[sa][sb] - d_min) / sigma2).exp();
        }
    }
    let mut best = (f64::NEG_INFINITY, 0u8);
    for (r, &l) in likelihood.iter().enumerate() {
        if l > best.0 {
            best = (l, r as u8);
        }
    }
    best.1
}

/// Outcome of one oracle-vs-decoder comparison run.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceReport {
    pub trials: u64,
    pub disagreements: u64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.disagreements == 0
    }
}

/// Compares the production demapper against the reference on random
/// observations, channels, and noise levels (`sigma2` in `[0.01, 1]`).
pub fn run_equivalence_suite(trials: u64, seed: u64) -> EquivalenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disagreements = 0u64;
    for _ in 0..trials {
        let h_a = Complex64::from_polar(rng.gen_range(0.2..1.5), rng.gen_range(-PI..PI));
        let h_b = Complex64::from_polar(rng.gen_range(0.2..1.5), rng.gen_range(-PI..PI));
        let sigma2: f64 = rng.gen_range(0.01..1.0);
        // Observations cover both on-constellation and outlying points.
        let y = if rng.gen_bool(0.5) {
            let sa = rng.gen_range(0..4u8);
            let sb = rng.gen_range(0..4u8);
            let s = (sigma2 / 2.0).sqrt();
            h_a * qpsk_point(sa)
                + h_b * qpsk_point(sb)
                + Complex64::new(
                    s * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    s * rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
        } else {
            Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
        };
        let got = xor_map_ml(y, h_a, h_b, sigma2, LikelihoodVariant::Exact);
        let want = xor_map_reference(y, h_a, h_b, sigma2);
        if got != want {
            disagreements += 1;
        }
    }
    EquivalenceReport {
        trials,
        disagreements,
    }
}
