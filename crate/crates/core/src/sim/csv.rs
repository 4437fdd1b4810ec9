//! CSV emission and the run-metadata sidecar.
//!
//! Rows are sorted by `(scheme, snr_db)` and every numeric field is printed
//! with six significant decimal digits, so a repeated run of the same config
//! produces a byte-identical file.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::metrics::MetricsReport;
use crate::sim::config::ScenarioConfig;
use crate::sim::seed::GENERATOR_NAME;
use crate::sim::SimError;

pub const CSV_HEADER: &str =
    "scenario,scheme,snr_db,ber,throughput_bps_hz,throughput_mbps,capacity_bps_hz,energy_per_bit,n_bits,seed";

/// Six significant digits in plain decimal notation. Infinities print as
/// `inf`/`-inf` (zero delivered bits makes energy-per-bit infinite).
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let mut exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(exp - 5);
    let rounded = (x / scale).round() * scale;
    if rounded.abs() >= 10f64.powi(exp + 1) {
        exp += 1;
    }
    let decimals = (5 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn format_row(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.scenario,
        r.scheme.name(),
        format_sig6(r.snr_db),
        format_sig6(r.ber),
        format_sig6(r.throughput_bps_hz),
        format_sig6(r.throughput_mbps),
        format_sig6(r.capacity_bps_hz),
        format_sig6(r.energy_per_bit),
        r.n_bits,
        r.seed
    )
}

/// Renders the sorted CSV document. An empty report list is refused.
pub fn format_csv(reports: &[MetricsReport]) -> Result<String, SimError> {
    if reports.is_empty() {
        return Err(SimError::EmptyReport);
    }
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.partial_cmp(&b.snr_db).expect("finite snr"))
    });
    let mut out = String::with_capacity(64 * (sorted.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    Ok(out)
}

/// Writes the CSV file (UTF-8, LF line endings).
pub fn emit_csv(reports: &[MetricsReport], path: impl AsRef<Path>) -> Result<(), SimError> {
    let text = format_csv(reports)?;
    std::fs::write(path.as_ref(), text.as_bytes())?;
    Ok(())
}

/// SHA-256 of the effective (resolved) configuration, hex encoded. CLI
/// overrides are hashed because they change the run.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&canonical);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sidecar path for a CSV output: the extension becomes `.meta.json`.
pub fn sidecar_path(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("meta.json")
}

/// Writes the reproducibility sidecar: config hash, seed, generator name,
/// and artifact version.
pub fn write_meta(csv_path: impl AsRef<Path>, cfg: &ScenarioConfig) -> Result<(), SimError> {
    let meta = serde_json::json!({
        "config_sha256": config_hash(cfg),
        "master_seed": cfg.master_seed,
        "generator": GENERATOR_NAME,
        "artifact_version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(sidecar_path(csv_path), text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Scheme;

    fn report(scheme: Scheme, snr_db: f64) -> MetricsReport {
        MetricsReport {
            scenario: "t".into(),
            scheme,
            snr_db,
            ber: 5.176e-4,
            throughput_bps_hz: 3.869,
            throughput_mbps: 77.38,
            capacity_bps_hz: 7.60123,
            energy_per_bit: 0.00360577,
            n_bits: 1_000_000,
            seed: 42,
        }
    }

    #[test]
    fn sig6_formats_typical_values() {
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(10.0), "10.0000");
        assert_eq!(format_sig6(3.869), "3.86900");
        assert_eq!(format_sig6(77.38), "77.3800");
        assert_eq!(format_sig6(5.176e-4), "0.000517600");
        assert_eq!(format_sig6(-2.5), "-2.50000");
        assert_eq!(format_sig6(2e7), "20000000");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        // rounding across a decade keeps six significant digits
        assert_eq!(format_sig6(9.9999999), "10.0000");
    }

    #[test]
    fn rows_sort_by_scheme_then_snr() {
        let reports = vec![
            report(Scheme::Pt2Pt, 10.0),
            report(Scheme::Pnc, 20.0),
            report(Scheme::Pnc, 0.0),
        ];
        let text = format_csv(&reports).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("t,PNC,0.00000"));
        assert!(lines[2].starts_with("t,PNC,20.0000"));
        assert!(lines[3].starts_with("t,Pt2Pt,10.0000"));
    }

    #[test]
    fn empty_reports_are_refused() {
        assert!(matches!(format_csv(&[]), Err(SimError::EmptyReport)));
    }

    #[test]
    fn formatting_is_stable() {
        let reports = vec![report(Scheme::Pnc, 22.86)];
        assert_eq!(format_csv(&reports).unwrap(), format_csv(&reports).unwrap());
        let line = format_csv(&reports).unwrap();
        assert!(
            line.contains("PNC,22.8600,0.000517600,3.86900,77.3800,7.60123,0.00360577,1000000,42"),
            "{line}"
        );
    }

    #[test]
    fn sidecar_path_swaps_extension() {
        assert_eq!(
            sidecar_path("out/results.csv"),
            PathBuf::from("out/results.meta.json")
        );
    }
}
