//! Pass geometry for a circular orbit over a ground station.
//!
//! cargo run --example orbit_pass -- [altitude_km] [min_elevation_deg]

use qsat::orbit::{pass_geometry, window_duration, OrbitConfig};

fn main() -> qsat::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let mut cfg = OrbitConfig::default();
    if let Some(h) = args.next() {
        cfg.altitude_km = h;
    }
    if let Some(m) = args.next() {
        cfg.min_elevation_rad = m.to_radians();
    }
    let pass = pass_geometry(&cfg)?;
    println!(
        "period {:.1} min, {} samples, {:.1} s above {:.1} deg, peak {:.2} deg",
        cfg.period_s() / 60.0,
        pass.samples.len(),
        pass.duration_s(),
        cfg.min_elevation_rad.to_degrees(),
        pass.max_elevation_rad().to_degrees()
    );
    for threshold in [20.0f64, 30.0, 45.0, 60.0] {
        println!(
            "  above {threshold:>4.0} deg: {:6.1} s",
            window_duration(&pass, threshold.to_radians())
        );
    }
    println!("\n   t (s)   elev (deg)   range (km)");
    for s in pass.samples.iter().step_by(30) {
        println!("{:8.0} {:12.2} {:12.1}", s.t_s, s.elevation_rad.to_degrees(), s.slant_range_km);
    }
    Ok(())
}
