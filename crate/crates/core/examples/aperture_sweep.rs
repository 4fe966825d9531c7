//! Zenith key rate against transmitter aperture, with the beam waist at half the aperture.

use std::path::Path;

use qsat::pass::{aperture_sweep, default_apertures};
use qsat::scenario::ScenarioConfig;

fn main() -> qsat::Result<()> {
    // intrinsic loss chosen so a 4 cm aperture gives 80.8 kbit/s at zenith
    let cfg = ScenarioConfig::parse("channel.zenith_loss_db = 30.8453", Path::new("."))?;
    let points = aperture_sweep(&cfg, &default_apertures())?;
    let reference = points
        .iter()
        .find(|p| (p.d_t_m - 0.04).abs() < 1e-9)
        .map_or(1.0, |p| p.skr_hz);
    println!("D_T (cm)  zenith loss (dB)   SKR (kbit/s)   vs 4 cm");
    for p in &points {
        println!(
            "{:8.0} {:17.2} {:14.1} {:9.2}",
            p.d_t_m * 100.0,
            p.zenith_loss_db,
            p.skr_hz / 1e3,
            p.skr_hz / reference
        );
    }
    Ok(())
}
