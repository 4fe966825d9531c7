//! Geometric, atmospheric and intrinsic loss across elevation.

use qsat::channel::{
    atmospheric_transmittance, eta_to_db, geometric_transmittance, zenith_loss_db, ChannelConfig,
};
use qsat::orbit::{slant_range, OrbitConfig};

fn main() -> qsat::Result<()> {
    let orbit = OrbitConfig::default();
    let channel = ChannelConfig::default();
    println!(
        "beam waist {:.1} mm, Rayleigh range {:.0} m, zenith loss {:.2} dB",
        channel.beam_waist_m * 1e3,
        channel.rayleigh_range_m(),
        zenith_loss_db(orbit.altitude_km, &channel)?
    );
    println!("\nelev (deg)  range (km)  geometric  atmosphere  intrinsic     total (dB)");
    for elev in [10.0f64, 15.0, 20.0, 30.0, 45.0, 60.0, 75.0, 90.0] {
        let e = elev.to_radians();
        let range = slant_range(e, &orbit);
        let geo = eta_to_db(geometric_transmittance(range, &channel));
        let atm = eta_to_db(atmospheric_transmittance(e, &channel.atmosphere)?);
        let total = geo + atm + channel.intrinsic_loss_db;
        println!(
            "{elev:10.0} {range:11.1} {geo:10.2} {atm:11.2} {:10.2} {total:14.2}",
            channel.intrinsic_loss_db
        );
    }
    Ok(())
}
