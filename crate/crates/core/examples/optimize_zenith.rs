//! Optimized protocol parameters against loss, and the loss where the key vanishes.

use qsat::key_rate::{cutoff_loss_db, optimized_skl_at_loss, LinkSetup};
use qsat::optimize::OptimizerConfig;

fn main() -> qsat::Result<()> {
    let link = LinkSetup::default();
    let optimizer = OptimizerConfig::default();
    println!("loss (dB)     SKL    mu1    mu2  p_mu1   P_Z^A   QBER_Z");
    for loss in [20.0, 25.0, 30.0, 33.0, 36.0, 38.0, 39.0] {
        let b = optimized_skl_at_loss(loss, &link, &optimizer)?;
        let p = b.params;
        println!(
            "{loss:9.1} {:7} {:6.3} {:6.3} {:6.3} {:7.3} {:7.4}%",
            b.analysis.skl,
            p.mu1,
            p.mu2,
            p.p_mu1,
            p.p_za,
            b.analysis.qber_z * 100.0
        );
    }
    let cutoff = cutoff_loss_db(&link, &optimizer, (20.0, 60.0), 0.01)?;
    println!("\nno key beyond {cutoff:.2} dB");
    Ok(())
}
