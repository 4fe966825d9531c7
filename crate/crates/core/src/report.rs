//! CSV and JSON output of pass reports and sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pass::{AperturePoint, PassReport, PassSummary, QkdWindow, QkpcSample};
use crate::plot::{LineChart, Series};

pub const QKD_CSV: &str = "qkd_pass.csv";
pub const QKPC_CSV: &str = "qkpc_pass.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const LOSS_CSV: &str = "loss_profile.csv";
pub const APERTURE_CSV: &str = "aperture_sweep.csv";

fn csv_failure(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_failure(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_failure(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_failure(path, e))?;
    r.deserialize()
        .map(|rec| rec.map_err(|e| csv_failure(path, e)))
        .collect()
}

pub fn write_summary(path: &Path, summary: &PassSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<PassSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes the pass outputs into `dir` and returns the paths written.
pub fn write_pass(dir: &Path, report: &PassReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths = [QKD_CSV, QKPC_CSV, SUMMARY_JSON, LOSS_CSV].map(|f| dir.join(f));
    write_records::<QkdWindow>(&paths[0], &report.qkd)?;
    write_records::<QkpcSample>(&paths[1], &report.qkpc)?;
    write_summary(&paths[2], &report.summary)?;
    report.profile.write_csv(&paths[3])?;
    Ok(paths.to_vec())
}

pub fn write_aperture_sweep(dir: &Path, points: &[AperturePoint]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(APERTURE_CSV);
    write_records(&path, points)?;
    Ok(path)
}

/// Rate, loss and parameter charts for a pass.
pub fn pass_charts(report: &PassReport) -> Vec<(&'static str, LineChart)> {
    let t = |f: fn(&QkdWindow) -> f64| -> Vec<(f64, f64)> {
        report.qkd.iter().map(|w| (w.t_s, f(w))).collect()
    };
    let mut charts = vec![
        (
            "skr_vs_time.svg",
            LineChart::new("Secret key rate", "time (s)", "SKR (bit/s)")
                .with_series(Series::new("SKR", t(|w| w.skr_hz))),
        ),
        (
            "qber_vs_time.svg",
            LineChart::new("Key-basis QBER", "time (s)", "QBER")
                .with_series(Series::new("Q_Z", t(|w| w.qber_z))),
        ),
        (
            "parameters_vs_time.svg",
            LineChart::new("Optimized parameters", "time (s)", "value")
                .with_series(Series::new("mu1", t(|w| w.mu1)))
                .with_series(Series::new("mu2", t(|w| w.mu2)))
                .with_series(Series::new("p_mu1", t(|w| w.p_mu1)))
                .with_series(Series::new("P_Z^A", t(|w| w.p_za))),
        ),
    ];
    let by_elevation: Vec<(f64, f64)> = report
        .qkd
        .iter()
        .filter_map(|w| Some((w.elevation_deg?, w.loss_db)))
        .collect();
    if !by_elevation.is_empty() {
        charts.push((
            "loss_vs_elevation.svg",
            LineChart::new("Total loss", "elevation (deg)", "loss (dB)")
                .with_series(Series::new("loss", by_elevation)),
        ));
    }
    charts.push(("qkpc_rate_vs_time.svg", qkpc_chart(&report.qkpc)));
    charts
}

pub fn qkpc_chart(samples: &[QkpcSample]) -> LineChart {
    LineChart::new("Keyless private rate", "time (s)", "rate (bit/s)").with_series(Series::new(
        "C_P f_s",
        samples.iter().map(|s| (s.t_s, s.qkpc_rate_bps)).collect(),
    ))
}

pub fn aperture_chart(points: &[AperturePoint]) -> LineChart {
    LineChart::new("Zenith key rate vs transmitter aperture", "D_T (m)", "SKR (bit/s)")
        .with_series(Series::new(
            "SKR",
            points.iter().map(|p| (p.d_t_m, p.skr_hz)).collect(),
        ))
}

/// Writes each chart into `dir` under its file name.
pub fn write_charts(dir: &Path, charts: &[(&str, LineChart)]) -> Result<Vec<PathBuf>> {
    charts
        .iter()
        .map(|(name, chart)| {
            let path = dir.join(name);
            chart.write(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ingest_loss_csv;
    use crate::pass::simulate_pass;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn pass_outputs_read_back() {
        let cfg = ScenarioConfig::parse(
            "optimizer.restarts = 2\norbit.theta_min_deg = 70\nchannel.zenith_loss_db = 31",
            Path::new("."),
        )
        .unwrap();
        let report = simulate_pass(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_pass(dir.path(), &report).unwrap();

        let qkd: Vec<QkdWindow> = read_records(&dir.path().join(QKD_CSV)).unwrap();
        let qkpc: Vec<QkpcSample> = read_records(&dir.path().join(QKPC_CSV)).unwrap();
        assert_eq!(qkd, report.qkd);
        assert_eq!(qkpc, report.qkpc);
        assert_eq!(read_summary(&dir.path().join(SUMMARY_JSON)).unwrap(), report.summary);

        let profile = ingest_loss_csv(&dir.path().join(LOSS_CSV)).unwrap();
        for (a, b) in profile.samples.iter().zip(&report.profile.samples) {
            assert_eq!(a.t_s, b.t_s);
            assert_eq!(a.loss_total_db, b.loss_total_db);
        }
    }

    #[test]
    fn summary_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SUMMARY_JSON);
        let summary = PassSummary {
            total_skl_bits: 1,
            qkd_window_s: 2.0,
            peak_skr_hz: 3.0,
            min_qber_z: None,
            qkd_cutoff_loss_db: Some(40.0),
            total_private_bits: 4.0,
            qkpc_rate_plateau_bps: 5.0,
            pass_duration_s: 6.0,
        };
        write_summary(&path, &summary).unwrap();
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in [
            "total_skl_bits",
            "qkd_window_s",
            "peak_skr_hz",
            "min_qber_z",
            "qkd_cutoff_loss_db",
            "total_private_bits",
            "qkpc_rate_plateau_bps",
            "pass_duration_s",
        ] {
            assert!(value.get(key).is_some(), "{key}");
        }
    }
}
