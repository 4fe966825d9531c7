//! Geometry of a circular-orbit overpass seen from a single ground station.
//!
//! The Earth is treated as a non-rotating sphere. The orbital plane passes at an
//! Earth-central angle `plane_offset` from the station, so an offset of zero gives
//! a pass straight through the zenith. Time is measured from the instant of
//! closest approach.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig {
    pub altitude_km: f64,
    pub min_elevation_rad: f64,
    /// Earth-central angle between the station and the orbital plane.
    pub plane_offset_rad: f64,
    pub earth_radius_km: f64,
    pub mu_earth_km3s2: f64,
    pub sample_interval_s: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            altitude_km: 500.0,
            min_elevation_rad: 10f64.to_radians(),
            plane_offset_rad: 0.0,
            earth_radius_km: EARTH_RADIUS_KM,
            mu_earth_km3s2: MU_EARTH_KM3_S2,
            sample_interval_s: 1.0,
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km > 0.0) {
            return Err(Error::config("orbit.h_km", "altitude must be > 0"));
        }
        if !(0.0..FRAC_PI_2).contains(&self.min_elevation_rad) {
            return Err(Error::config(
                "orbit.theta_min_deg",
                "minimum elevation must lie in [0, 90) deg",
            ));
        }
        if !(self.sample_interval_s > 0.0) {
            return Err(Error::config("qkd.window_s", "sample interval must be > 0"));
        }
        if !(self.plane_offset_rad.abs() < FRAC_PI_2) {
            return Err(Error::config(
                "orbit.xi_deg",
                "plane offset must lie in (-90, 90) deg",
            ));
        }
        if !(self.earth_radius_km > 0.0 && self.mu_earth_km3s2 > 0.0) {
            return Err(Error::config("orbit", "Earth constants must be positive"));
        }
        Ok(())
    }

    fn orbit_radius_km(&self) -> f64 {
        self.earth_radius_km + self.altitude_km
    }

    /// Mean motion of the circular orbit, rad/s.
    pub fn angular_rate(&self) -> f64 {
        (self.mu_earth_km3s2 / self.orbit_radius_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.angular_rate()
    }

    /// Earth-central angle between station and sub-satellite point at which the
    /// satellite sits at `elevation_rad`.
    pub fn central_angle_at_elevation(&self, elevation_rad: f64) -> f64 {
        let ratio = self.earth_radius_km * elevation_rad.cos() / self.orbit_radius_km();
        ratio.acos() - elevation_rad
    }

    /// Elevation seen from the station when the central angle to the satellite is `central`.
    pub fn elevation_at_central_angle(&self, central: f64) -> f64 {
        let r = self.orbit_radius_km();
        (r * central.cos() - self.earth_radius_km).atan2(r * central.sin())
    }

    /// Elevation at time `t_s` relative to closest approach.
    pub fn elevation_at(&self, t_s: f64) -> f64 {
        let along = self.angular_rate() * t_s;
        let cos_central = (self.plane_offset_rad.cos() * along.cos()).clamp(-1.0, 1.0);
        self.elevation_at_central_angle(cos_central.acos())
    }

    /// Half-width of the visibility window above `min_elevation_rad`, if any.
    fn half_window_s(&self) -> Option<f64> {
        let central_max = self.central_angle_at_elevation(self.min_elevation_rad);
        let cos_along = central_max.cos() / self.plane_offset_rad.cos();
        if cos_along > 1.0 {
            None
        } else {
            Some(cos_along.acos() / self.angular_rate())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassSample {
    pub t_s: f64,
    pub elevation_rad: f64,
    pub slant_range_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassGeometry {
    pub samples: Vec<PassSample>,
    pub config: OrbitConfig,
}

/// Line-of-sight distance to a satellite at altitude `config.altitude_km` seen at
/// `elevation_rad` above the horizon.
pub fn slant_range(elevation_rad: f64, config: &OrbitConfig) -> f64 {
    let re = config.earth_radius_km;
    let r = config.orbit_radius_km();
    let (sin, cos) = elevation_rad.sin_cos();
    (r * r - re * re * cos * cos).sqrt() - re * sin
}

/// Samples the pass on a grid anchored at closest approach, keeping every grid
/// point whose elevation is at least the configured minimum.
pub fn pass_geometry(config: &OrbitConfig) -> Result<PassGeometry> {
    config.validate()?;
    let half = config.half_window_s().ok_or_else(|| Error::NoVisibility {
        max_elevation_deg: config.elevation_at(0.0).to_degrees(),
        min_elevation_deg: config.min_elevation_rad.to_degrees(),
    })?;
    let dt = config.sample_interval_s;
    let steps = (half / dt + 1e-9).floor() as i64;
    let samples = (-steps..=steps)
        .map(|k| {
            let t_s = k as f64 * dt;
            let elevation_rad = config.elevation_at(t_s);
            PassSample {
                t_s,
                elevation_rad,
                slant_range_km: slant_range(elevation_rad, config),
            }
        })
        .collect();
    Ok(PassGeometry {
        samples,
        config: *config,
    })
}

impl PassGeometry {
    pub fn max_elevation_rad(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.elevation_rad)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t_s - a.t_s,
            _ => 0.0,
        }
    }
}

/// Time spent at or above `threshold_elevation_rad`, treating elevation as
/// piecewise linear between samples.
pub fn window_duration(geometry: &PassGeometry, threshold_elevation_rad: f64) -> f64 {
    geometry
        .samples
        .windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            let dt = b.t_s - a.t_s;
            let above_a = a.elevation_rad >= threshold_elevation_rad;
            let above_b = b.elevation_rad >= threshold_elevation_rad;
            match (above_a, above_b) {
                (true, true) => dt,
                (false, false) => 0.0,
                _ => {
                    let frac = (threshold_elevation_rad - a.elevation_rad)
                        / (b.elevation_rad - a.elevation_rad);
                    if above_a {
                        dt * frac
                    } else {
                        dt * (1.0 - frac)
                    }
                }
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zenith_range_is_altitude() {
        let cfg = OrbitConfig::default();
        assert_abs_diff_eq!(slant_range(FRAC_PI_2, &cfg), 500.0, epsilon = 1e-9);
    }

    #[test]
    fn slant_range_at_low_elevations() {
        let cfg = OrbitConfig::default();
        // 30-digit evaluation of the closed form
        assert_abs_diff_eq!(
            slant_range(10f64.to_radians(), &cfg),
            1694.567221,
            epsilon = 1e-6
        );
        let horizon = (6871f64.powi(2) - 6371f64.powi(2)).sqrt();
        assert_abs_diff_eq!(slant_range(0.0, &cfg), horizon, epsilon = 1e-9);
        assert_abs_diff_eq!(horizon, 2573.1, epsilon = 0.1);
    }

    #[test]
    fn zenith_sample_is_overhead() {
        let geo = pass_geometry(&OrbitConfig::default()).unwrap();
        let mid = geo.samples.iter().find(|s| s.t_s == 0.0).unwrap();
        assert_abs_diff_eq!(mid.elevation_rad, FRAC_PI_2, epsilon = 1e-9);
        assert_abs_diff_eq!(mid.slant_range_km, 500.0, epsilon = 1e-6);
    }

    #[test]
    fn visibility_window_matches_root_finding() {
        let cfg = OrbitConfig::default();
        let closed_form = 2.0 * cfg.half_window_s().unwrap();
        let root = bisect(0.0, 2000.0, |t| cfg.elevation_at(t) - cfg.min_elevation_rad);
        assert_abs_diff_eq!(closed_form, 2.0 * root, epsilon = 1e-6);
        assert_abs_diff_eq!(closed_form, 442.7, epsilon = 0.5);

        let geo = pass_geometry(&cfg).unwrap();
        assert!((geo.duration_s() - closed_form).abs() <= cfg.sample_interval_s * 2.0);
        let w = window_duration(&geo, cfg.min_elevation_rad);
        assert!((w - closed_form).abs() <= cfg.sample_interval_s);
    }

    #[test]
    fn lower_horizon_gives_longer_window() {
        let geo10 = pass_geometry(&OrbitConfig::default()).unwrap();
        let geo0 = pass_geometry(&OrbitConfig {
            min_elevation_rad: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(geo0.duration_s() > geo10.duration_s());
    }

    #[test]
    fn window_threshold_edges() {
        let geo = pass_geometry(&OrbitConfig::default()).unwrap();
        assert_abs_diff_eq!(window_duration(&geo, 0.0), geo.duration_s());
        assert_eq!(window_duration(&geo, geo.max_elevation_rad() + 1e-6), 0.0);
    }

    #[test]
    fn offset_plane_never_reaches_zenith() {
        let cfg = OrbitConfig {
            plane_offset_rad: 5f64.to_radians(),
            ..Default::default()
        };
        let geo = pass_geometry(&cfg).unwrap();
        assert!(geo.max_elevation_rad() < FRAC_PI_2 - 1e-3);
    }

    #[test]
    fn far_offset_has_no_visibility() {
        let cfg = OrbitConfig {
            plane_offset_rad: 30f64.to_radians(),
            ..Default::default()
        };
        assert!(matches!(
            pass_geometry(&cfg),
            Err(Error::NoVisibility { .. })
        ));
    }

    #[test]
    fn high_horizon_gives_single_sample() {
        let cfg = OrbitConfig {
            min_elevation_rad: 89.9f64.to_radians(),
            ..Default::default()
        };
        let geo = pass_geometry(&cfg).unwrap();
        assert_eq!(geo.samples.len(), 1);
    }

    #[test]
    fn doubling_density_is_stable() {
        let coarse = OrbitConfig::default();
        let fine = OrbitConfig {
            sample_interval_s: 0.5,
            ..coarse
        };
        let thr = 30f64.to_radians();
        let a = window_duration(&pass_geometry(&coarse).unwrap(), thr);
        let b = window_duration(&pass_geometry(&fine).unwrap(), thr);
        assert!((a - b).abs() <= coarse.sample_interval_s);
    }

    #[test]
    fn profile_is_symmetric() {
        let geo = pass_geometry(&OrbitConfig::default()).unwrap();
        let n = geo.samples.len();
        for i in 0..n / 2 {
            let (a, b) = (geo.samples[i], geo.samples[n - 1 - i]);
            assert_eq!(a.t_s, -b.t_s);
            assert!((a.elevation_rad - b.elevation_rad).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn slant_range_decreases_with_elevation(a in 0.0..FRAC_PI_2, b in 0.0..FRAC_PI_2) {
            prop_assume!((a - b).abs() > 1e-9);
            let cfg = OrbitConfig::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(slant_range(lo, &cfg) > slant_range(hi, &cfg));
        }
    }
}
