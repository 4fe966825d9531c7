//! Channel transmittance over a pass: Gaussian-beam collection, atmosphere and a
//! constant intrinsic efficiency, or an externally measured loss time series.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::orbit::PassGeometry;

pub fn db_to_eta(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn eta_to_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AtmosphereModel {
    /// Plane-parallel atmosphere: transmittance `zenith_transmittance^(1/sin(elevation))`.
    Parametric { zenith_transmittance: f64 },
    /// `(elevation_deg, transmittance)` rows, strictly increasing in elevation.
    Table { rows: Vec<(f64, f64)> },
}

impl Default for AtmosphereModel {
    fn default() -> Self {
        AtmosphereModel::Parametric {
            zenith_transmittance: 0.75,
        }
    }
}

impl AtmosphereModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AtmosphereModel::Parametric {
                zenith_transmittance: t,
            } => {
                if !(*t > 0.0 && *t <= 1.0) {
                    return Err(Error::config(
                        "channel.atm_tz",
                        "zenith transmittance must lie in (0, 1]",
                    ));
                }
            }
            AtmosphereModel::Table { rows } => {
                if rows.is_empty() {
                    return Err(Error::config("channel.atm_table", "table is empty"));
                }
                if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::config(
                        "channel.atm_table",
                        "elevations must be strictly increasing",
                    ));
                }
                if rows.iter().any(|&(_, t)| !(t > 0.0 && t <= 1.0)) {
                    return Err(Error::config(
                        "channel.atm_table",
                        "transmittance must lie in (0, 1]",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reads an `elevation_deg,transmittance` CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = open_csv(path)?;
        check_header(&mut reader, path, &["elevation_deg", "transmittance"])?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = record_line(&record);
            let elevation = parse_field(&record, 0, path, line)?;
            let transmittance = parse_field(&record, 1, path, line)?;
            rows.push((elevation, transmittance));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 1,
                message: "no data rows".into(),
            });
        }
        let model = AtmosphereModel::Table { rows };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub tx_aperture_m: f64,
    pub rx_aperture_m: f64,
    pub beam_waist_m: f64,
    pub wavelength_m: f64,
    pub intrinsic_loss_db: f64,
    pub atmosphere: AtmosphereModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_aperture_m: 0.04,
            rx_aperture_m: 0.7,
            beam_waist_m: 0.02,
            wavelength_m: 1550e-9,
            intrinsic_loss_db: 15.0,
            atmosphere: AtmosphereModel::default(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("channel.d_t_m", self.tx_aperture_m),
            ("channel.d_r_m", self.rx_aperture_m),
            ("channel.w0_m", self.beam_waist_m),
            ("channel.lambda_nm", self.wavelength_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be a positive length"));
            }
        }
        if self.beam_waist_m > self.tx_aperture_m / 2.0 * (1.0 + 1e-12) {
            return Err(Error::config(
                "channel.w0_m",
                "beam waist must not exceed half the transmitter aperture",
            ));
        }
        if !(self.intrinsic_loss_db >= 0.0) {
            return Err(Error::config("channel.intrinsic_db", "must be >= 0 dB"));
        }
        self.atmosphere.validate()
    }

    /// Same channel with a different transmitter aperture and the waist tied to it.
    pub fn with_tx_aperture(&self, tx_aperture_m: f64) -> Self {
        Self {
            tx_aperture_m,
            beam_waist_m: tx_aperture_m / 2.0,
            ..self.clone()
        }
    }

    pub fn rayleigh_range_m(&self) -> f64 {
        std::f64::consts::PI * self.beam_waist_m.powi(2) / self.wavelength_m
    }

    /// 1/e² beam radius after propagating `distance_m`.
    pub fn beam_radius_m(&self, distance_m: f64) -> f64 {
        self.beam_waist_m * (1.0 + (distance_m / self.rayleigh_range_m()).powi(2)).sqrt()
    }
}

/// Fraction of a Gaussian beam collected by the receiver aperture at `slant_range_km`.
pub fn geometric_transmittance(slant_range_km: f64, config: &ChannelConfig) -> f64 {
    let w = config.beam_radius_m(slant_range_km * 1e3);
    let a = config.rx_aperture_m / 2.0;
    -(-2.0 * a * a / (w * w)).exp_m1()
}

pub fn atmospheric_transmittance(elevation_rad: f64, model: &AtmosphereModel) -> Result<f64> {
    if !(elevation_rad > 0.0 && elevation_rad <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::domain("elevation_rad", elevation_rad, "(0, pi/2]"));
    }
    match model {
        AtmosphereModel::Parametric {
            zenith_transmittance,
        } => Ok(zenith_transmittance.powf(1.0 / elevation_rad.sin())),
        AtmosphereModel::Table { rows } => {
            let deg = elevation_rad.to_degrees();
            let (first, last) = (rows[0], rows[rows.len() - 1]);
            if deg < first.0 - 1.0 {
                return Err(Error::ElevationBelowTable {
                    elevation_deg: deg,
                    first_row_deg: first.0,
                });
            }
            if deg <= first.0 {
                return Ok(first.1);
            }
            if deg >= last.0 {
                return Ok(last.1);
            }
            let i = rows.partition_point(|r| r.0 <= deg);
            let (lo, hi) = (rows[i - 1], rows[i]);
            let frac = (deg - lo.0) / (hi.0 - lo.0);
            Ok(lo.1 + frac * (hi.1 - lo.1))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub eta_geometric: f64,
    pub eta_atmospheric: f64,
    pub eta_intrinsic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub t_s: f64,
    /// Unknown for ingested profiles.
    pub elevation_rad: Option<f64>,
    /// Per-source transmittances; optional for ingested profiles.
    pub breakdown: Option<LossBreakdown>,
    pub eta_total: f64,
    pub loss_total_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Computed,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile {
    pub samples: Vec<LossSample>,
    pub source: ProfileSource,
}

/// Composes the three loss sources at every sample of the pass.
pub fn loss_profile(geometry: &PassGeometry, config: &ChannelConfig) -> Result<LossProfile> {
    config.validate()?;
    let eta_intrinsic = db_to_eta(config.intrinsic_loss_db);
    let samples = geometry
        .samples
        .iter()
        .map(|s| {
            let eta_geometric = geometric_transmittance(s.slant_range_km, config);
            let eta_atmospheric = atmospheric_transmittance(s.elevation_rad, &config.atmosphere)?;
            let eta_total = eta_geometric * eta_atmospheric * eta_intrinsic;
            Ok(LossSample {
                t_s: s.t_s,
                elevation_rad: Some(s.elevation_rad),
                breakdown: Some(LossBreakdown {
                    eta_geometric,
                    eta_atmospheric,
                    eta_intrinsic,
                }),
                eta_total,
                loss_total_db: eta_to_db(eta_geometric)
                    + eta_to_db(eta_atmospheric)
                    + config.intrinsic_loss_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LossProfile {
        samples,
        source: ProfileSource::Computed,
    })
}

/// Total loss at the zenith for `config` and an orbit at `altitude_km`.
pub fn zenith_loss_db(altitude_km: f64, config: &ChannelConfig) -> Result<f64> {
    let eta_g = geometric_transmittance(altitude_km, config);
    let eta_a = atmospheric_transmittance(std::f64::consts::FRAC_PI_2, &config.atmosphere)?;
    Ok(eta_to_db(eta_g) + eta_to_db(eta_a) + config.intrinsic_loss_db)
}

impl LossProfile {
    /// A profile holding the same loss at every one of `n` samples spaced `dt` apart.
    pub fn flat(loss_db: f64, n: usize, dt: f64) -> Self {
        let samples = (0..n)
            .map(|i| LossSample {
                t_s: i as f64 * dt,
                elevation_rad: None,
                breakdown: None,
                eta_total: db_to_eta(loss_db),
                loss_total_db: loss_db,
            })
            .collect();
        LossProfile {
            samples,
            source: ProfileSource::Ingested,
        }
    }

    /// Writes `t_s,loss_db[,geometric_db,atmospheric_db,intrinsic_db]`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let with_breakdown = self.samples.iter().all(|s| s.breakdown.is_some());
        let mut out = BufWriter::new(File::create(path)?);
        if with_breakdown {
            writeln!(out, "t_s,loss_db,geometric_db,atmospheric_db,intrinsic_db")?;
        } else {
            writeln!(out, "t_s,loss_db")?;
        }
        for s in &self.samples {
            write!(out, "{},{}", s.t_s, s.loss_total_db)?;
            if let (true, Some(b)) = (with_breakdown, s.breakdown) {
                write!(
                    out,
                    ",{},{},{}",
                    eta_to_db(b.eta_geometric),
                    eta_to_db(b.eta_atmospheric),
                    eta_to_db(b.eta_intrinsic)
                )?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Loads a loss time series exported by this crate or produced by an external
/// link-budget tool.
pub fn ingest_loss_csv(path: &Path) -> Result<LossProfile> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.len() < 2 || names[0] != "t_s" || names[1] != "loss_db" {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("expected header `t_s,loss_db[,...]`, found `{}`", names.join(",")),
        });
    }
    let breakdown_cols = ["geometric_db", "atmospheric_db", "intrinsic_db"];
    let has_breakdown = match &names[2..] {
        [] => false,
        rest if rest == breakdown_cols => true,
        _ => {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 1,
                message: "breakdown columns must be geometric_db,atmospheric_db,intrinsic_db"
                    .into(),
            })
        }
    };

    let mut samples: Vec<LossSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        if record.len() != names.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let t_s = parse_field(&record, 0, path, line)?;
        let loss_db = parse_field(&record, 1, path, line)?;
        if loss_db < 0.0 {
            return Err(Error::LossOutOfRange {
                path: path.to_owned(),
                line,
                loss_db,
            });
        }
        if samples.last().is_some_and(|prev| t_s <= prev.t_s) {
            return Err(Error::NonMonotonicTime {
                path: path.to_owned(),
                line,
            });
        }
        let breakdown = if has_breakdown {
            let g = parse_field(&record, 2, path, line)?;
            let a = parse_field(&record, 3, path, line)?;
            let i = parse_field(&record, 4, path, line)?;
            if (g + a + i - loss_db).abs() > 1e-6 * loss_db.abs().max(1.0) {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line,
                    message: "breakdown columns do not sum to loss_db".into(),
                });
            }
            Some(LossBreakdown {
                eta_geometric: db_to_eta(g),
                eta_atmospheric: db_to_eta(a),
                eta_intrinsic: db_to_eta(i),
            })
        } else {
            None
        };
        samples.push(LossSample {
            t_s,
            elevation_rad: None,
            breakdown,
            eta_total: db_to_eta(loss_db),
            loss_total_db: loss_db,
        });
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(LossProfile {
        samples,
        source: ProfileSource::Ingested,
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(reader: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(|e| csv_error(path, e))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_field(record: &csv::StringRecord, idx: usize, path: &Path, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("field {} `{raw}` is not a finite number", idx + 1),
        })
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_owned(),
        line,
        message: err.to_string(),
    }
}
