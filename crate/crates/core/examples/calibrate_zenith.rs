//! Finds the zenith loss that yields a target key rate, then simulates a
//! full pass with the channel calibrated to it and writes the outputs.
//!
//! cargo run --release --example calibrate_zenith -- [target_hz] [out_dir]

use std::path::{Path, PathBuf};

use qsat::key_rate::{loss_for_key_rate, optimized_skl_at_loss};
use qsat::pass::simulate_pass;
use qsat::report::write_pass;
use qsat::scenario::ScenarioConfig;

fn main() -> qsat::Result<()> {
    let mut args = std::env::args().skip(1);
    let target: f64 = args.next().map_or(80_800.0, |a| a.parse().expect("rate in Hz"));
    let out: PathBuf = args.next().map_or_else(|| std::env::temp_dir().join("qsat_pass"), PathBuf::from);

    let base = ScenarioConfig::default();
    let link = base.link_setup();
    let optimizer = base.optimizer_for("calibration");
    let zenith = loss_for_key_rate(target, &link, &optimizer, (20.0, 39.0), 1e-4)?;
    let at = optimized_skl_at_loss(zenith, &link, &optimizer)?;
    println!("zenith loss {zenith:.3} dB gives {:.0} bit/s", at.analysis.skr_hz);
    println!("  parameters {:?}", at.params);
    println!("  QBER_Z {:.4}%", at.analysis.qber_z * 100.0);

    let cfg = ScenarioConfig::parse(&format!("channel.zenith_loss_db = {zenith}"), Path::new("."))?;
    let report = simulate_pass(&cfg)?;
    write_pass(&out, &report)?;
    let s = report.summary;
    println!(
        "pass: {:.0} s with key, {:.2} Mbit total, {:.3e} private bits",
        s.qkd_window_s,
        s.total_skl_bits as f64 / 1e6,
        s.total_private_bits
    );
    println!("outputs in {}", out.display());
    Ok(())
}
