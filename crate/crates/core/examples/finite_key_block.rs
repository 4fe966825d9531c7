//! Finite-key analysis of one block with fixed protocol parameters.
//!
//! cargo run --example finite_key_block -- [loss_db]

use qsat::channel::db_to_eta;
use qsat::detection::{DetectorModel, ProtocolParams, PulseBudget};
use qsat::finite_key::{analyze_block, SecurityParams};

fn main() -> qsat::Result<()> {
    let loss: f64 = std::env::args()
        .nth(1)
        .map_or(30.0, |a| a.parse().expect("loss in dB"));
    let a = analyze_block(
        &ProtocolParams::default(),
        db_to_eta(loss),
        &PulseBudget::new(1e9, 1.0),
        &DetectorModel::default(),
        &SecurityParams::default(),
    )?;
    println!("loss {loss} dB, one second at 1 GHz");
    println!("  vacuum events        [{:.1}, {:.1}]", a.s_z0_low, a.s_z0_high);
    println!("  single-photon events >= {:.1}", a.s_z1_low);
    println!("  phase error          <= {:.4}", a.phi_z);
    println!("  error correction     {:.0} bits", a.lambda_ec);
    println!("  QBER Z / X           {:.4}% / {:.4}", a.qber_z * 100.0, a.qber_x);
    println!("  secret key           {} bits ({:.0} bit/s)", a.skl, a.skr_hz);
    Ok(())
}
