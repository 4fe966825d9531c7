//! Scenario files: flat `key = value` text with `#` comments.
//!
//! ```text
//! # 10 cm transmitter, daylight stray light
//! channel.d_t_m = 0.10
//! qkpc.stray_mean = 1e-4
//! run.seed = 7
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::{zenith_loss_db, AtmosphereModel, ChannelConfig};
use crate::detection::{DetectorModel, ProtocolParams, PulseBudget};
use crate::error::{Error, Result};
use crate::finite_key::SecurityParams;
use crate::key_rate::{LinkSetup, ProtocolBounds};
use crate::optimize::OptimizerConfig;
use crate::orbit::OrbitConfig;
use crate::qkpc::QkpcParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub orbit: OrbitConfig,
    pub channel: ChannelConfig,
    /// When set, the intrinsic loss is adjusted so the zenith loss hits this value.
    pub zenith_loss_target_db: Option<f64>,
    pub detector: DetectorModel,
    pub security: SecurityParams,
    /// Fixed parameters, and the first window's starting point when optimizing.
    pub protocol: ProtocolParams,
    pub bounds: ProtocolBounds,
    pub optimize_protocol: bool,
    pub warm_start: bool,
    pub qkpc: QkpcParams,
    pub source_rate_hz: f64,
    pub window_s: f64,
    pub optimizer: OptimizerConfig,
    pub loss_csv: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            orbit: OrbitConfig::default(),
            channel: ChannelConfig::default(),
            zenith_loss_target_db: None,
            detector: DetectorModel::default(),
            security: SecurityParams::default(),
            protocol: ProtocolParams::default(),
            bounds: ProtocolBounds::default(),
            optimize_protocol: true,
            warm_start: true,
            qkpc: QkpcParams::default(),
            source_rate_hz: 1e9,
            window_s: 1.0,
            optimizer: OptimizerConfig::default(),
            loss_csv: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "orbit.h_km",
    "orbit.theta_min_deg",
    "orbit.xi_deg",
    "orbit.r_e_km",
    "channel.d_t_m",
    "channel.d_r_m",
    "channel.w0_m",
    "channel.lambda_nm",
    "channel.intrinsic_db",
    "channel.atm_tz",
    "channel.atm_table",
    "channel.zenith_loss_db",
    "detector.p_ec",
    "detector.p_ap",
    "detector.qber_i",
    "qkd.eps_s",
    "qkd.eps_c",
    "qkd.f_ec",
    "qkd.alpha",
    "qkd.num_decoys",
    "qkd.mu1",
    "qkd.mu2",
    "qkd.p_mu1",
    "qkd.p_za",
    "qkd.p_zb",
    "qkd.p_za_min",
    "qkd.window_s",
    "qkd.optimize",
    "qkd.warm_start",
    "qkpc.gamma",
    "qkpc.p_dark",
    "qkpc.stray_mean",
    "qkpc.q",
    "qkpc.optimize_q",
    "source.f_s_hz",
    "optimizer.restarts",
    "optimizer.max_evals",
    "optimizer.tolerance",
    "run.seed",
    "run.output_dir",
    "run.loss_csv",
];

fn number(key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::config(key, format!("`{raw}` is not a finite number")))
}

fn integer<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::config(key, format!("`{raw}` is not a non-negative integer")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("`{raw}` is not a boolean"))),
    }
}

impl ScenarioConfig {
    /// Parses scenario text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        let mut waist_given = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    Error::config(format!("line {}", i + 1), "expected `key = value`")
                })?;
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if !seen.insert(key.to_owned()) {
                return Err(Error::config(key, "given more than once"));
            }
            waist_given |= key == "channel.w0_m";
            cfg.set(key, raw, base_dir)?;
        }
        if seen.contains("channel.d_t_m") && !waist_given {
            cfg.channel.beam_waist_m = cfg.channel.tx_aperture_m / 2.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn set(&mut self, key: &str, raw: &str, base_dir: &Path) -> Result<()> {
        let path = || base_dir.join(raw);
        match key {
            "orbit.h_km" => self.orbit.altitude_km = number(key, raw)?,
            "orbit.theta_min_deg" => self.orbit.min_elevation_rad = number(key, raw)?.to_radians(),
            "orbit.xi_deg" => self.orbit.plane_offset_rad = number(key, raw)?.to_radians(),
            "orbit.r_e_km" => self.orbit.earth_radius_km = number(key, raw)?,
            "channel.d_t_m" => self.channel.tx_aperture_m = number(key, raw)?,
            "channel.d_r_m" => self.channel.rx_aperture_m = number(key, raw)?,
            "channel.w0_m" => self.channel.beam_waist_m = number(key, raw)?,
            "channel.lambda_nm" => self.channel.wavelength_m = number(key, raw)? / 1e9,
            "channel.intrinsic_db" => self.channel.intrinsic_loss_db = number(key, raw)?,
            "channel.atm_tz" => {
                self.channel.atmosphere = AtmosphereModel::Parametric {
                    zenith_transmittance: number(key, raw)?,
                }
            }
            "channel.atm_table" => self.channel.atmosphere = AtmosphereModel::from_csv(&path())?,
            "channel.zenith_loss_db" => self.zenith_loss_target_db = Some(number(key, raw)?),
            "detector.p_ec" => self.detector.extraneous_count_prob = number(key, raw)?,
            "detector.p_ap" => self.detector.afterpulse_prob = number(key, raw)?,
            "detector.qber_i" => self.detector.intrinsic_qber = number(key, raw)?,
            "qkd.eps_s" => self.security.eps_secrecy = number(key, raw)?,
            "qkd.eps_c" => self.security.eps_correctness = number(key, raw)?,
            "qkd.f_ec" => self.security.f_ec = number(key, raw)?,
            "qkd.alpha" => self.security.alpha = integer(key, raw)?,
            "qkd.num_decoys" => self.security.num_decoys = integer(key, raw)?,
            "qkd.mu1" => self.protocol.mu1 = number(key, raw)?,
            "qkd.mu2" => self.protocol.mu2 = number(key, raw)?,
            "qkd.p_mu1" => self.protocol.p_mu1 = number(key, raw)?,
            "qkd.p_za" => self.protocol.p_za = number(key, raw)?,
            "qkd.p_zb" => self.protocol.p_zb = number(key, raw)?,
            "qkd.p_za_min" => self.bounds.p_za.0 = number(key, raw)?,
            "qkd.window_s" => self.window_s = number(key, raw)?,
            "qkd.optimize" => self.optimize_protocol = flag(key, raw)?,
            "qkd.warm_start" => self.warm_start = flag(key, raw)?,
            "qkpc.gamma" => self.qkpc.gamma = number(key, raw)?,
            "qkpc.p_dark" => self.qkpc.p_dark = number(key, raw)?,
            "qkpc.stray_mean" => self.qkpc.stray_mean = number(key, raw)?,
            "qkpc.q" => self.qkpc.q = number(key, raw)?,
            "qkpc.optimize_q" => self.qkpc.optimize_q = flag(key, raw)?,
            "source.f_s_hz" => self.source_rate_hz = number(key, raw)?,
            "optimizer.restarts" => self.optimizer.restarts = integer(key, raw)?,
            "optimizer.max_evals" => self.optimizer.max_evals = integer(key, raw)?,
            "optimizer.tolerance" => self.optimizer.tolerance = number(key, raw)?,
            "run.seed" => self.seed = integer(key, raw)?,
            "run.output_dir" => self.output_dir = path(),
            "run.loss_csv" => self.loss_csv = Some(path()),
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::config("qkd.window_s", "must be > 0"));
        }
        if !(self.source_rate_hz > 0.0) {
            return Err(Error::config("source.f_s_hz", "must be > 0"));
        }
        self.orbit_config().validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        self.security.validate()?;
        self.protocol.validate()?;
        self.bounds.validate()?;
        self.qkpc.validate()?;
        self.optimizer.validate()?;
        if let Some(target) = self.zenith_loss_target_db {
            if !(target >= 0.0) {
                return Err(Error::config("channel.zenith_loss_db", "must be >= 0 dB"));
            }
        }
        Ok(())
    }

    /// Orbit sampled once per key window.
    pub fn orbit_config(&self) -> OrbitConfig {
        OrbitConfig {
            sample_interval_s: self.window_s,
            ..self.orbit
        }
    }

    /// Channel with the zenith calibration applied.
    pub fn effective_channel(&self) -> Result<ChannelConfig> {
        let Some(target) = self.zenith_loss_target_db else {
            return Ok(self.channel.clone());
        };
        let current = zenith_loss_db(self.orbit.altitude_km, &self.channel)?;
        let intrinsic = self.channel.intrinsic_loss_db + target - current;
        if intrinsic < 0.0 {
            return Err(Error::config(
                "channel.zenith_loss_db",
                format!(
                    "{target} dB is below the geometric and atmospheric loss alone ({:.3} dB)",
                    current - self.channel.intrinsic_loss_db
                ),
            ));
        }
        Ok(ChannelConfig {
            intrinsic_loss_db: intrinsic,
            ..self.channel.clone()
        })
    }

    pub fn link_setup(&self) -> LinkSetup {
        LinkSetup {
            detector: self.detector,
            security: self.security,
            budget: PulseBudget::new(self.source_rate_hz, self.window_s),
            p_zb: self.protocol.p_zb,
            bounds: self.bounds,
        }
    }

    /// Optimizer settings seeded from a named sub-stream of the run seed.
    pub fn optimizer_for(&self, stream: &str) -> OptimizerConfig {
        OptimizerConfig {
            seed: derive_seed(self.seed, stream),
            ..self.optimizer
        }
    }

    /// Canonical text form; parsing it back yields the same scenario.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("orbit.h_km", self.orbit.altitude_km.to_string());
        put("orbit.theta_min_deg", self.orbit.min_elevation_rad.to_degrees().to_string());
        put("orbit.xi_deg", self.orbit.plane_offset_rad.to_degrees().to_string());
        put("orbit.r_e_km", self.orbit.earth_radius_km.to_string());
        put("channel.d_t_m", self.channel.tx_aperture_m.to_string());
        put("channel.d_r_m", self.channel.rx_aperture_m.to_string());
        put("channel.w0_m", self.channel.beam_waist_m.to_string());
        put("channel.lambda_nm", (self.channel.wavelength_m * 1e9).to_string());
        put("channel.intrinsic_db", self.channel.intrinsic_loss_db.to_string());
        if let AtmosphereModel::Parametric { zenith_transmittance } = self.channel.atmosphere {
            put("channel.atm_tz", zenith_transmittance.to_string());
        }
        if let Some(t) = self.zenith_loss_target_db {
            put("channel.zenith_loss_db", t.to_string());
        }
        put("detector.p_ec", self.detector.extraneous_count_prob.to_string());
        put("detector.p_ap", self.detector.afterpulse_prob.to_string());
        put("detector.qber_i", self.detector.intrinsic_qber.to_string());
        put("qkd.eps_s", self.security.eps_secrecy.to_string());
        put("qkd.eps_c", self.security.eps_correctness.to_string());
        put("qkd.f_ec", self.security.f_ec.to_string());
        put("qkd.alpha", self.security.alpha.to_string());
        put("qkd.num_decoys", self.security.num_decoys.to_string());
        put("qkd.mu1", self.protocol.mu1.to_string());
        put("qkd.mu2", self.protocol.mu2.to_string());
        put("qkd.p_mu1", self.protocol.p_mu1.to_string());
        put("qkd.p_za", self.protocol.p_za.to_string());
        put("qkd.p_zb", self.protocol.p_zb.to_string());
        put("qkd.p_za_min", self.bounds.p_za.0.to_string());
        put("qkd.window_s", self.window_s.to_string());
        put("qkd.optimize", self.optimize_protocol.to_string());
        put("qkd.warm_start", self.warm_start.to_string());
        put("qkpc.gamma", self.qkpc.gamma.to_string());
        put("qkpc.p_dark", self.qkpc.p_dark.to_string());
        put("qkpc.stray_mean", self.qkpc.stray_mean.to_string());
        put("qkpc.q", self.qkpc.q.to_string());
        put("qkpc.optimize_q", self.qkpc.optimize_q.to_string());
        put("source.f_s_hz", self.source_rate_hz.to_string());
        put("optimizer.restarts", self.optimizer.restarts.to_string());
        put("optimizer.max_evals", self.optimizer.max_evals.to_string());
        put("optimizer.tolerance", self.optimizer.tolerance.to_string());
        put("run.seed", self.seed.to_string());
        s
    }
}

/// FNV-1a mix of the run seed and a stream name.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in stream.bytes().chain(seed.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::parse(text, Path::new("/tmp"))
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("# nothing\n\n").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn values_and_comments() {
        let cfg = parse(
            "orbit.h_km = 600 # higher\nchannel.lambda_nm=850\nrun.seed = 9\nqkd.warm_start = false\n",
        )
        .unwrap();
        assert_eq!(cfg.orbit.altitude_km, 600.0);
        assert_abs_diff_eq!(cfg.channel.wavelength_m, 850e-9, epsilon = 1e-18);
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.warm_start);
    }

    #[test]
    fn aperture_drags_waist_unless_given() {
        let cfg = parse("channel.d_t_m = 0.1").unwrap();
        assert_eq!(cfg.channel.beam_waist_m, 0.05);
        let cfg = parse("channel.d_t_m = 0.1\nchannel.w0_m = 0.03").unwrap();
        assert_eq!(cfg.channel.beam_waist_m, 0.03);
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("orbit.hkm = 5", "orbit.hkm"),
            ("orbit.h_km = abc", "orbit.h_km"),
            ("orbit.h_km = -5", "orbit.h_km"),
            ("qkd.mu1 = 0.1\nqkd.mu2 = 0.3", "qkd.mu2"),
            ("qkd.window_s = 0", "qkd.window_s"),
            ("channel.d_t_m = 0", "channel.d_t_m"),
            ("qkd.optimize = maybe", "qkd.optimize"),
            ("run.seed = 1\nrun.seed = 2", "run.seed"),
        ] {
            match parse(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn mu_order_message_cites_invariant() {
        let err = parse("qkd.mu1 = 0.1\nqkd.mu2 = 0.3").unwrap_err();
        assert!(err.to_string().contains("mu2 < mu1"));
    }

    #[test]
    fn missing_equals_sign() {
        assert!(matches!(parse("orbit.h_km 500"), Err(Error::Config { .. })));
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse("orbit.xi_deg = 12.5\nqkpc.gamma = 0.2\nchannel.zenith_loss_db = 31").unwrap();
        let again = parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn zenith_calibration_adjusts_intrinsic_loss() {
        let cfg = parse("channel.zenith_loss_db = 31").unwrap();
        let ch = cfg.effective_channel().unwrap();
        assert_abs_diff_eq!(zenith_loss_db(500.0, &ch).unwrap(), 31.0, epsilon = 1e-9);
        let cfg = parse("channel.zenith_loss_db = 5").unwrap();
        assert!(cfg.effective_channel().is_err());
    }

    #[test]
    fn sub_streams_differ() {
        assert_ne!(derive_seed(1, "optimizer"), derive_seed(1, "oracle"));
        assert_ne!(derive_seed(1, "oracle"), derive_seed(2, "oracle"));
        assert_eq!(derive_seed(3, "oracle"), derive_seed(3, "oracle"));
    }
}
