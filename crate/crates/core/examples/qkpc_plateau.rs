//! Keyless private rate stays flat as loss grows because the pulse energy
//! follows the loss.

use qsat::channel::db_to_eta;
use qsat::optimize::OptimizerConfig;
use qsat::qkpc::{optimize_point, QkpcParams};

fn main() -> qsat::Result<()> {
    let params = QkpcParams::default();
    let optimizer = OptimizerConfig::default();
    println!("loss (dB)   rate (Mbit/s)      mu_opt   Bob photons  Eve photons   R_DW");
    for loss in [30.0, 40.0, 50.0, 54.56, 60.0] {
        let eta = db_to_eta(loss);
        let r = optimize_point(eta, &params, 1e9, &optimizer)?;
        let bob = r.received_photons(eta);
        println!(
            "{loss:9.2} {:15.1} {:11.3e} {bob:13.3} {:12.3} {:6.4}",
            r.rate_bps / 1e6,
            r.mu_opt,
            bob * params.gamma,
            r.r_dw
        );
    }
    Ok(())
}
