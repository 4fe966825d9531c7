//! Keyless private communication with on-off keying over a lossy bosonic
//! wiretap channel.
//!
//! Alice sends vacuum with probability `q` and a coherent pulse of mean photon
//! number `mu` otherwise. Bob sees efficiency `eta`, Eve sees `gamma * eta`.
//! Every quantity depends on the channel only through `eta * mu`, so the
//! optimizer searches over the received photon number directly.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{db_to_eta, LossProfile};
use crate::error::{Error, Result};
use crate::finite_key::entropy;
use crate::optimize::{maximize, OptimizerConfig, SearchSpace};

/// Received photon number range searched by [`optimize_point`].
pub const RECEIVED_PHOTONS_RANGE: (f64, f64) = (1e-3, 50.0);
/// Range of the vacuum probability when it is optimized.
pub const VACUUM_PROB_RANGE: (f64, f64) = (0.05, 0.95);
const VACUUM_PROB_GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkpcParams {
    /// Probability of sending vacuum.
    pub q: f64,
    /// Fraction of Bob's channel efficiency available to Eve.
    pub gamma: f64,
    pub p_dark: f64,
    /// Mean stray-light photons per slot at Bob's detector.
    pub stray_mean: f64,
    /// Search `q` as well as the photon number.
    pub optimize_q: bool,
}

impl Default for QkpcParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            gamma: 0.1,
            p_dark: 1e-8,
            stray_mean: 0.0,
            optimize_q: false,
        }
    }
}

impl QkpcParams {
    pub fn noiseless(self) -> Self {
        Self {
            p_dark: 0.0,
            stray_mean: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config("qkpc.q", "must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("qkpc.gamma", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(Error::config("qkpc.p_dark", "must lie in [0, 1)"));
        }
        if !(self.stray_mean >= 0.0 && self.stray_mean.is_finite()) {
            return Err(Error::config("qkpc.stray_mean", "must be >= 0"));
        }
        Ok(())
    }
}

/// No-click probabilities at Bob given vacuum and given the ON pulse.
pub fn click_complements(mu: f64, eta: f64, params: &QkpcParams) -> (f64, f64) {
    let quiet = 1.0 - params.p_dark;
    let eps0 = quiet * (-params.stray_mean).exp();
    let eps1 = quiet * (-(eta * mu + params.stray_mean)).exp();
    (eps0, eps1)
}

/// Eve's minimum error discriminating the two OOK states.
pub fn eve_optimal_error(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    let q = params.q;
    let overlap = 4.0 * q * (1.0 - q) * (-eta * params.gamma * mu).exp();
    (0.5 * (1.0 - (1.0 - overlap).max(0.0).sqrt())).clamp(0.0, 0.5)
}

fn bob_information(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    let (eps0, eps1) = click_complements(mu, eta, params);
    entropy(0.5 * (eps0 + eps1)) - 0.5 * (entropy(eps1) + entropy(eps0))
}

/// Private capacity before clipping at zero.
pub fn private_capacity_raw(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    entropy(eve_optimal_error(mu, eta, params)) + bob_information(mu, eta, params) - 1.0
}

/// Private capacity in bits per channel use.
pub fn private_capacity(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    private_capacity_raw(mu, eta, params).clamp(0.0, 1.0)
}

/// Devetak–Winter rate before clipping at zero.
pub fn devetak_winter_rate_raw(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    let eps_star = eve_optimal_error(mu, eta, params);
    bob_information(mu, eta, params) - entropy(0.5 * (1.0 + eps_star))
}

/// Devetak–Winter rate in bits per channel use.
pub fn devetak_winter_rate(mu: f64, eta: f64, params: &QkpcParams) -> f64 {
    devetak_winter_rate_raw(mu, eta, params).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QkpcResult {
    pub eps0: f64,
    pub eps1: f64,
    pub eps_star: f64,
    pub c_p: f64,
    pub r_dw: f64,
    pub rate_bps: f64,
    pub mu_opt: f64,
    pub q_opt: f64,
    /// No positive capacity was found; the rate is reported as zero.
    pub no_capacity: bool,
}

impl QkpcResult {
    pub fn received_photons(&self, eta: f64) -> f64 {
        eta * self.mu_opt
    }
}

/// Evaluates every quantity at a fixed operating point.
pub fn evaluate(mu: f64, eta: f64, params: &QkpcParams, source_rate_hz: f64) -> QkpcResult {
    let (eps0, eps1) = click_complements(mu, eta, params);
    let c_p = private_capacity(mu, eta, params);
    QkpcResult {
        eps0,
        eps1,
        eps_star: eve_optimal_error(mu, eta, params),
        c_p,
        r_dw: devetak_winter_rate(mu, eta, params),
        rate_bps: c_p * source_rate_hz,
        mu_opt: mu,
        q_opt: params.q,
        no_capacity: c_p <= 0.0,
    }
}

fn search_photons(
    eta: f64,
    params: &QkpcParams,
    optimizer: &OptimizerConfig,
) -> Result<(f64, f64)> {
    let (lo, hi) = RECEIVED_PHOTONS_RANGE;
    let space = SearchSpace::new(vec![(lo.log10(), hi.log10())]);
    let best = maximize(
        |x| private_capacity_raw(10f64.powf(x[0]) / eta, eta, params),
        &space,
        optimizer,
        None,
    )?;
    Ok((10f64.powf(best.point[0]), best.value))
}

/// Maximizes the private capacity over the pulse photon number, and over the
/// vacuum probability when `params.optimize_q` is set.
pub fn optimize_point(
    eta: f64,
    params: &QkpcParams,
    source_rate_hz: f64,
    optimizer: &OptimizerConfig,
) -> Result<QkpcResult> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", eta, "(0, 1]"));
    }
    params.validate()?;

    let (received, q) = if params.optimize_q {
        let steps = ((VACUUM_PROB_RANGE.1 - VACUUM_PROB_RANGE.0) / VACUUM_PROB_GRID_STEP).round()
            as usize;
        let mut best: Option<(f64, f64, f64)> = None;
        for k in 0..=steps {
            let q = VACUUM_PROB_RANGE.0 + k as f64 * VACUUM_PROB_GRID_STEP;
            let trial = QkpcParams { q, ..*params };
            let (n, v) = search_photons(eta, &trial, optimizer)?;
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((n, q, v));
            }
        }
        let (n0, q0, _) = best.expect("grid is non-empty");
        let (lo, hi) = RECEIVED_PHOTONS_RANGE;
        let space = SearchSpace::new(vec![(lo.log10(), hi.log10()), VACUUM_PROB_RANGE]);
        let refined = maximize(
            |x| {
                let trial = QkpcParams { q: x[1], ..*params };
                private_capacity_raw(10f64.powf(x[0]) / eta, eta, &trial)
            },
            &space,
            optimizer,
            Some(&[n0.log10(), q0]),
        )?;
        (10f64.powf(refined.point[0]), refined.point[1])
    } else {
        (search_photons(eta, params, optimizer)?.0, params.q)
    };

    let at = QkpcParams { q, ..*params };
    let mut result = evaluate(received / eta, eta, &at, source_rate_hz);
    if result.no_capacity {
        result.rate_bps = 0.0;
    }
    Ok(result)
}

/// One optimized point per loss sample, in sample order.
pub fn qkpc_profile(
    profile: &LossProfile,
    params: &QkpcParams,
    source_rate_hz: f64,
    optimizer: &OptimizerConfig,
) -> Result<Vec<QkpcResult>> {
    if profile.samples.is_empty() {
        return Err(Error::config("loss_csv", "loss profile is empty"));
    }
    profile
        .samples
        .par_iter()
        .map(|s| optimize_point(db_to_eta(s.loss_total_db), params, source_rate_hz, optimizer))
        .collect()
}
