//! End-to-end runs: a full pass through both protocols, the transmitter
//! aperture sweep and the keyless-communication profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ingest_loss_csv, loss_profile, zenith_loss_db, LossProfile};
use crate::detection::ProtocolParams;
use crate::error::{Error, Result};
use crate::finite_key::analyze_block;
use crate::key_rate::{cutoff_loss_db, optimize_block, LinkSetup, OptimizedBlock};
use crate::orbit::pass_geometry;
use crate::qkpc::{qkpc_profile, QkpcResult};
use crate::scenario::ScenarioConfig;

/// Loss bracket searched for the key cutoff.
pub const CUTOFF_BRACKET_DB: (f64, f64) = (5.0, 80.0);
const CUTOFF_TOLERANCE_DB: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkdWindow {
    pub t_s: f64,
    pub elevation_deg: Option<f64>,
    pub loss_db: f64,
    pub skl_bits: u64,
    pub skr_hz: f64,
    pub qber_z: f64,
    pub qber_x: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p_mu1: f64,
    pub p_za: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkpcSample {
    pub t_s: f64,
    pub loss_db: f64,
    pub qkpc_rate_bps: f64,
    pub mu_opt: f64,
    pub q_opt: f64,
    pub c_p: f64,
    pub r_dw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSummary {
    pub total_skl_bits: u64,
    /// Time spent with a positive key length.
    pub qkd_window_s: f64,
    pub peak_skr_hz: f64,
    /// Lowest key-basis error rate among windows with a positive key.
    pub min_qber_z: Option<f64>,
    pub qkd_cutoff_loss_db: Option<f64>,
    pub total_private_bits: f64,
    /// Median keyless rate over the pass.
    pub qkpc_rate_plateau_bps: f64,
    pub pass_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassReport {
    pub profile: LossProfile,
    pub qkd: Vec<QkdWindow>,
    pub qkpc: Vec<QkpcSample>,
    pub summary: PassSummary,
}

/// The loss profile a scenario runs on: the ingested CSV when one is given,
/// otherwise the computed pass.
pub fn scenario_profile(cfg: &ScenarioConfig) -> Result<LossProfile> {
    match &cfg.loss_csv {
        Some(path) => ingest_loss_csv(path),
        None => {
            let geometry = pass_geometry(&cfg.orbit_config())?;
            loss_profile(&geometry, &cfg.effective_channel()?)
        }
    }
}

fn window_record(
    t_s: f64,
    elevation_rad: Option<f64>,
    loss_db: f64,
    block: &OptimizedBlock,
) -> QkdWindow {
    QkdWindow {
        t_s,
        elevation_deg: elevation_rad.map(f64::to_degrees),
        loss_db,
        skl_bits: block.analysis.skl,
        skr_hz: block.analysis.skr_hz,
        qber_z: block.analysis.qber_z,
        qber_x: block.analysis.qber_x,
        mu1: block.params.mu1,
        mu2: block.params.mu2,
        p_mu1: block.params.p_mu1,
        p_za: block.params.p_za,
    }
}

fn key_windows(profile: &LossProfile, cfg: &ScenarioConfig) -> Result<Vec<QkdWindow>> {
    let link = cfg.link_setup();
    let optimizer = cfg.optimizer_for("optimizer");
    let fixed = |eta: f64| -> Result<OptimizedBlock> {
        let analysis = analyze_block(&cfg.protocol, eta, &link.budget, &link.detector, &link.security)?;
        Ok(OptimizedBlock {
            params: cfg.protocol,
            analysis,
            plateau: false,
        })
    };
    let record = |s: &crate::channel::LossSample, block: &OptimizedBlock| {
        window_record(s.t_s, s.elevation_rad, s.loss_total_db, block)
    };

    if !cfg.optimize_protocol {
        return profile
            .samples
            .par_iter()
            .map(|s| Ok(record(s, &fixed(s.eta_total)?)))
            .collect();
    }
    if !cfg.warm_start {
        return profile
            .samples
            .par_iter()
            .map(|s| {
                let block = optimize_block(s.eta_total, &link, &optimizer, Some(&cfg.protocol))?;
                Ok(record(s, &block))
            })
            .collect();
    }
    let mut previous: ProtocolParams = cfg.protocol;
    let mut out = Vec::with_capacity(profile.samples.len());
    for s in &profile.samples {
        let block = optimize_block(s.eta_total, &link, &optimizer, Some(&previous))?;
        previous = block.params;
        out.push(record(s, &block));
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn summarize(
    qkd: &[QkdWindow],
    qkpc: &[QkpcSample],
    window_s: f64,
    cutoff: Option<f64>,
) -> PassSummary {
    let keyed: Vec<&QkdWindow> = qkd.iter().filter(|w| w.skl_bits > 0).collect();
    let mut rates: Vec<f64> = qkpc.iter().map(|s| s.qkpc_rate_bps).collect();
    PassSummary {
        total_skl_bits: qkd.iter().map(|w| w.skl_bits).sum(),
        qkd_window_s: keyed.len() as f64 * window_s,
        peak_skr_hz: qkd.iter().map(|w| w.skr_hz).fold(0.0, f64::max),
        min_qber_z: keyed.iter().map(|w| w.qber_z).reduce(f64::min),
        qkd_cutoff_loss_db: cutoff,
        total_private_bits: qkpc.iter().map(|s| s.qkpc_rate_bps * window_s).sum(),
        qkpc_rate_plateau_bps: median(&mut rates),
        pass_duration_s: qkd.len().max(qkpc.len()) as f64 * window_s,
    }
}

/// Loss at which the optimized key vanishes, or `None` when it lies outside
/// [`CUTOFF_BRACKET_DB`].
pub fn key_cutoff(cfg: &ScenarioConfig) -> Result<Option<f64>> {
    match cutoff_loss_db(
        &cfg.link_setup(),
        &cfg.optimizer_for("cutoff"),
        CUTOFF_BRACKET_DB,
        CUTOFF_TOLERANCE_DB,
    ) {
        Ok(db) => Ok(Some(db)),
        Err(Error::Numerical(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn qkpc_samples(profile: &LossProfile, cfg: &ScenarioConfig) -> Result<Vec<QkpcSample>> {
    let results = qkpc_profile(
        profile,
        &cfg.qkpc,
        cfg.source_rate_hz,
        &cfg.optimizer_for("qkpc"),
    )?;
    Ok(profile
        .samples
        .iter()
        .zip(results)
        .map(|(s, r): (_, QkpcResult)| QkpcSample {
            t_s: s.t_s,
            loss_db: s.loss_total_db,
            qkpc_rate_bps: r.rate_bps,
            mu_opt: r.mu_opt,
            q_opt: r.q_opt,
            c_p: r.c_p,
            r_dw: r.r_dw,
        })
        .collect())
}

/// Runs both protocols over every window of the pass.
pub fn simulate_pass(cfg: &ScenarioConfig) -> Result<PassReport> {
    cfg.validate()?;
    let profile = scenario_profile(cfg)?;
    let qkd = key_windows(&profile, cfg)?;
    let qkpc = qkpc_samples(&profile, cfg)?;
    let cutoff = if cfg.optimize_protocol {
        key_cutoff(cfg)?
    } else {
        None
    };
    let summary = summarize(&qkd, &qkpc, cfg.window_s, cutoff);
    Ok(PassReport {
        profile,
        qkd,
        qkpc,
        summary,
    })
}

/// Keyless-communication rates only.
pub fn simulate_qkpc(cfg: &ScenarioConfig) -> Result<(LossProfile, Vec<QkpcSample>)> {
    cfg.validate()?;
    let profile = scenario_profile(cfg)?;
    let samples = qkpc_samples(&profile, cfg)?;
    Ok((profile, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AperturePoint {
    pub d_t_m: f64,
    pub zenith_loss_db: f64,
    pub skr_hz: f64,
}

/// Default transmitter apertures swept, in metres.
pub fn default_apertures() -> Vec<f64> {
    (2..=12).map(|cm| cm as f64 / 100.0).collect()
}

/// Optimized zenith key rate for each transmitter aperture, with the beam
/// waist tied to half the aperture. The zenith calibration, if any, is
/// applied once to the configured aperture and then held fixed.
pub fn aperture_sweep(cfg: &ScenarioConfig, apertures_m: &[f64]) -> Result<Vec<AperturePoint>> {
    cfg.validate()?;
    if let Some(bad) = apertures_m.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::config(
            "channel.d_t_m",
            format!("aperture {bad} m must be > 0"),
        ));
    }
    let base = cfg.effective_channel()?;
    let link: LinkSetup = cfg.link_setup();
    let optimizer = cfg.optimizer_for("optimizer");
    apertures_m
        .par_iter()
        .map(|&d| {
            let channel = base.with_tx_aperture(d);
            channel.validate()?;
            let loss = zenith_loss_db(cfg.orbit.altitude_km, &channel)?;
            let block = optimize_block(crate::channel::db_to_eta(loss), &link, &optimizer, None)?;
            Ok(AperturePoint {
                d_t_m: d,
                zenith_loss_db: loss,
                skr_hz: block.analysis.skr_hz,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn quick(extra: &str) -> ScenarioConfig {
        let text = format!(
            "optimizer.restarts = 2\noptimizer.max_evals = 400\norbit.theta_min_deg = 60\n{extra}"
        );
        ScenarioConfig::parse(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn summary_matches_records() {
        let report = simulate_pass(&quick("channel.zenith_loss_db = 31")).unwrap();
        let s = report.summary;
        assert_eq!(s.total_skl_bits, report.qkd.iter().map(|w| w.skl_bits).sum::<u64>());
        let private: f64 = report.qkpc.iter().map(|q| q.qkpc_rate_bps).sum();
        assert!((s.total_private_bits - private).abs() <= 1e-9 * private);
        assert!(s.total_skl_bits > 0);
        assert_eq!(s.pass_duration_s, report.qkd.len() as f64);
        assert!(s.qkd_cutoff_loss_db.is_some());
    }

    #[test]
    fn single_window_pass() {
        let cfg = ScenarioConfig::parse(
            "optimizer.restarts = 2\norbit.theta_min_deg = 89.9",
            Path::new("."),
        )
        .unwrap();
        let report = simulate_pass(&cfg).unwrap();
        assert_eq!(report.qkd.len(), 1);
        assert_eq!(report.qkpc.len(), 1);
    }

    #[test]
    fn warm_start_and_cold_start_agree_closely() {
        let warm = simulate_pass(&quick("channel.zenith_loss_db = 31")).unwrap();
        let cold = simulate_pass(&quick("channel.zenith_loss_db = 31\nqkd.warm_start = false")).unwrap();
        let (a, b) = (warm.summary.total_skl_bits as f64, cold.summary.total_skl_bits as f64);
        assert!((a - b).abs() / a < 1e-2);
    }

    #[test]
    fn fixed_parameters_are_reported() {
        let report = simulate_pass(&quick("qkd.optimize = false\nchannel.zenith_loss_db = 31")).unwrap();
        assert!(report.qkd.iter().all(|w| w.mu1 == 0.81 && w.p_za == 0.88));
        assert!(report.summary.qkd_cutoff_loss_db.is_none());
    }

    #[test]
    fn sweep_rejects_zero_aperture() {
        let cfg = quick("");
        assert!(matches!(
            aperture_sweep(&cfg, &[0.04, 0.0]),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&mut []), 0.0);
    }
}
