//! Drives the simulation from a loss time series produced elsewhere.

use std::fs;

use qsat::channel::ingest_loss_csv;
use qsat::pass::simulate_pass;
use qsat::scenario::ScenarioConfig;

fn main() -> qsat::Result<()> {
    let dir = std::env::temp_dir().join("qsat_external");
    fs::create_dir_all(&dir)?;
    let csv = dir.join("loss.csv");
    let mut text = String::from("t_s,loss_db\n");
    for t in 0..120 {
        let x = (t as f64 - 60.0) / 60.0;
        text += &format!("{t},{:.4}\n", 31.0 + 9.0 * x * x);
    }
    fs::write(&csv, text)?;

    let profile = ingest_loss_csv(&csv)?;
    println!("{} samples from {}", profile.samples.len(), csv.display());

    let cfg = ScenarioConfig {
        loss_csv: Some(csv),
        ..Default::default()
    };
    let report = simulate_pass(&cfg)?;
    let s = report.summary;
    println!(
        "key for {:.0} s, {} bits; keyless median {:.1} Mbit/s",
        s.qkd_window_s,
        s.total_skl_bits,
        s.qkpc_rate_plateau_bps / 1e6
    );
    Ok(())
}
