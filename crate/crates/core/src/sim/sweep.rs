//! The seeded Monte-Carlo sweep engine.
//!
//! A sweep runs every configured `(scheme, SNR point)` pair for a fixed
//! number of trials; trials within a point may execute on a worker pool.
//! Because each trial owns a label-derived stream and tallies are integer
//! counters, the output is byte-identical for any worker count.

use rayon::prelude::*;

use crate::channel::calibrate_noise;
use crate::metrics::{
    compute_capacity, compute_energy_per_bit, compute_throughput, MetricsReport, Scheme,
};
use crate::ofdm::OfdmModem;
use crate::sim::config::ScenarioConfig;
use crate::sim::trial::{run_trial, PointContext, TrialTally};
use crate::sim::SimError;

/// One `(scheme, SNR point)` outcome: the CSV-facing report plus the raw
/// tallies behind it.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub report: MetricsReport,
    pub tally: TrialTally,
}

/// Trials needed at one point: enough frames and enough compared bits.
pub fn trials_per_point(cfg: &ScenarioConfig) -> u64 {
    let bits_per_trial = 2 * cfg.packet_bits as u64;
    let for_bits = cfg.min_bits_per_point.div_ceil(bits_per_trial);
    cfg.frames_per_point.max(for_bits).max(1)
}

fn run_point(
    cfg: &ScenarioConfig,
    layout: &crate::ofdm::FrameLayout,
    modem: &OfdmModem,
    overhead: &crate::metrics::FrameOverhead,
    scheme: Scheme,
    snr_index: usize,
    snr_db: f64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<PointResult, SimError> {
    let ctx = PointContext {
        cfg,
        layout,
        modem,
        scheme,
        snr_index,
        snr_db,
        noise: calibrate_noise(snr_db),
    };
    let n_trials = trials_per_point(cfg);

    // Collect per-trial tallies in index order and fold; integer merges make
    // the fold exact regardless of how the pool scheduled the work.
    let tallies: Result<Vec<TrialTally>, SimError> = match pool {
        Some(pool) => pool.install(|| {
            (0..n_trials)
                .into_par_iter()
                .map(|t| run_trial(&ctx, t))
                .collect()
        }),
        None => (0..n_trials).map(|t| run_trial(&ctx, t)).collect(),
    };
    let mut tally = TrialTally::default();
    for t in tallies? {
        tally.merge(&t);
    }

    let (throughput_bps_hz, throughput_mbps) = compute_throughput(
        tally.delivered_link_bits,
        scheme,
        tally.trials,
        overhead,
        cfg.sampling_rate_hz,
    )?;
    let capacity_bps_hz = compute_capacity(snr_db, scheme, overhead.data_fraction);
    assert!(
        throughput_bps_hz <= capacity_bps_hz + 1e-9,
        "throughput {throughput_bps_hz} exceeds the Shannon bound {capacity_bps_hz} \
         ({scheme} at {snr_db} dB)"
    );
    let energy_per_bit =
        compute_energy_per_bit(tally.energy_units as f64, tally.delivered_info_bits);

    Ok(PointResult {
        report: MetricsReport {
            scenario: cfg.name.clone(),
            scheme,
            snr_db,
            ber: tally.ber(),
            throughput_bps_hz,
            throughput_mbps,
            capacity_bps_hz,
            energy_per_bit,
            n_bits: tally.bits_compared,
            seed: cfg.master_seed,
        },
        tally,
    })
}

/// Runs the full sweep: every configured scheme at every SNR point, one
/// result per pair. `workers <= 1` runs single-threaded.
pub fn run_sweep(cfg: &ScenarioConfig, workers: usize) -> Result<Vec<PointResult>, SimError> {
    let layout = cfg.layout()?;
    let modem = OfdmModem::for_layout(&layout)?;
    let overhead = cfg.overhead(&layout);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| SimError::Pool(e.to_string()))?,
        )
    } else {
        None
    };

    let points = cfg.snr_sweep.points();
    let mut results = Vec::with_capacity(cfg.schemes.len() * points.len());
    for &scheme in &cfg.schemes {
        for (snr_index, &snr_db) in points.iter().enumerate() {
            results.push(run_point(
                cfg,
                &layout,
                &modem,
                &overhead,
                scheme,
                snr_index,
                snr_db,
                pool.as_ref(),
            )?);
        }
    }
    Ok(results)
}

/// Runs a comparison scheme on its own through the same engine. Only the
/// store-and-forward and point-to-point baselines are accepted.
pub fn run_baseline(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    workers: usize,
) -> Result<Vec<PointResult>, SimError> {
    if !matches!(scheme, Scheme::StoreForward | Scheme::Pt2Pt) {
        return Err(SimError::Pool(format!(
            "{scheme} is not a baseline scheme"
        )));
    }
    let mut restricted = cfg.clone();
    restricted.schemes = vec![scheme];
    run_sweep(&restricted, workers)
}
