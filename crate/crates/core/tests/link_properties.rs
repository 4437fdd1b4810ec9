//! Statistical link-level properties that span whole sweeps rather than
//! single operations.

use pncvlc_core::metrics::Scheme;
use pncvlc_core::sim::config::ScenarioConfig;
use pncvlc_core::sim::sweep::{run_sweep, PointResult};

fn sweep_for(schemes: &str) -> Vec<PointResult> {
    let cfg: ScenarioConfig = serde_json::from_str(&format!(
        r#"{{
            "name": "link-properties",
            "snr_sweep": {{ "start_db": 0.0, "stop_db": 20.0, "step_db": 5.0 }},
            "schemes": {schemes},
            "packet_bits": 832,
            "frames_per_point": 50,
            "min_bits_per_point": 200000,
            "master_seed": 31
        }}"#
    ))
    .unwrap();
    cfg.validate().unwrap();
    run_sweep(&cfg, 4).unwrap()
}

fn rate_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Pre-compensation never worsens the relay's mean XOR error rate, at any
/// sweep point, beyond three standard errors of the comparison.
#[test]
fn alignment_never_hurts() {
    let aligned = sweep_for(r#"["PNC"]"#);
    let unaligned = sweep_for(r#"["PNC_unaligned"]"#);
    assert_eq!(aligned.len(), unaligned.len());
    for (a, u) in aligned.iter().zip(unaligned.iter()) {
        assert_eq!(a.report.snr_db, u.report.snr_db);
        let ber_a = a.tally.xor_ber();
        let ber_u = u.tally.xor_ber();
        let tol = 3.0
            * (rate_se(ber_a, a.tally.xor_bits).powi(2)
                + rate_se(ber_u, u.tally.xor_bits).powi(2))
            .sqrt();
        assert!(
            ber_a <= ber_u + tol,
            "alignment hurts at {} dB: {ber_a:.4e} aligned vs {ber_u:.4e} unaligned",
            a.report.snr_db
        );
    }
}

/// With random per-frame link phases, the aligned scheme clears the error
/// floor the unaligned scheme keeps at high SNR.
#[test]
fn alignment_removes_the_high_snr_floor() {
    let aligned = sweep_for(r#"["PNC"]"#);
    let unaligned = sweep_for(r#"["PNC_unaligned"]"#);
    let a_top = aligned.last().unwrap();
    let u_top = unaligned.last().unwrap();
    assert_eq!(a_top.report.snr_db, 20.0);
    assert!(
        a_top.tally.xor_ber() < 1e-3,
        "aligned relay BER {} should be tiny at 20 dB",
        a_top.tally.xor_ber()
    );
    assert!(
        u_top.tally.xor_ber() > 10.0 * a_top.tally.xor_ber().max(1e-6),
        "unaligned relay BER {} should floor well above the aligned {}",
        u_top.tally.xor_ber(),
        a_top.tally.xor_ber()
    );
}

/// Every configured (scheme, SNR) pair appears exactly once in the output.
#[test]
fn sweep_reports_cover_all_pairs_once() {
    let results = sweep_for(r#"["PNC", "StoreForward", "Pt2Pt"]"#);
    assert_eq!(results.len(), 3 * 5);
    let mut seen = std::collections::BTreeSet::new();
    for p in &results {
        assert!(seen.insert((p.report.scheme, (p.report.snr_db * 100.0) as i64)));
    }
    for scheme in [Scheme::Pnc, Scheme::StoreForward, Scheme::Pt2Pt] {
        assert_eq!(
            results.iter().filter(|p| p.report.scheme == scheme).count(),
            5
        );
    }
}
