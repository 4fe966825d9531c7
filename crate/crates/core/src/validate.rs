//! Statistical validation of the analytic model against the pulse-level Monte
//! Carlo, plus a battery of analytic property checks.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::channel::{db_to_eta, eta_to_db, loss_profile};
use crate::detection::{expected_counts, monte_carlo_counts, PulseBudget};
use crate::error::{Error, Result};
use crate::finite_key::{
    analyze_block, analyze_counts, binary_entropy, chernoff_interval,
};
use crate::orbit::pass_geometry;
use crate::pass::{aperture_sweep, simulate_pass, simulate_qkpc};
use crate::qkpc::{
    devetak_winter_rate, eve_optimal_error, optimize_point, private_capacity, QkpcParams,
};
use crate::scenario::{derive_seed, ScenarioConfig};

pub const MIN_TRIALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPlan {
    /// Monte Carlo runs per statistical check.
    pub trials: usize,
    pub containment_pulses: f64,
    pub agreement_pulses: f64,
    pub loss_db: f64,
    pub chernoff_trials: usize,
    /// Skip the full-pass rerun checks.
    pub skip_reruns: bool,
}

impl Default for ValidationPlan {
    fn default() -> Self {
        Self {
            trials: 100,
            containment_pulses: 1e7,
            agreement_pulses: 1e6,
            loss_db: 30.0,
            chernoff_trials: 10_000,
            skip_reruns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub required: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, measured: String, required: &str, passed: bool) -> Self {
        Self {
            name: name.into(),
            measured,
            required: required.into(),
            passed,
        }
    }

    pub fn rate(name: &str, hits: usize, total: usize, min_fraction: f64) -> Self {
        let need = (min_fraction * total as f64).ceil() as usize;
        Self::new(
            name,
            format!("{hits}/{total}"),
            &format!(">= {need}/{total}"),
            hits >= need,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Mean of the X-basis QBER estimator minus the mean Monte Carlo X error fraction.
    pub qber_x_offset: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  {:<6}  {:<24}  required\n", "check", "result", "measured");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<w$}  {:<6}  {:<24}  {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.measured,
                c.required
            );
        }
        s
    }
}

/// Chernoff intervals built from binomial draws contain the binomial mean.
pub fn chernoff_coverage(trials: usize, eps: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let n = rng.random_range(1_000u64..10_000_000);
        let p = 10f64.powf(rng.random_range(-6.0..-1.0));
        let mean = n as f64 * p;
        let draw = Binomial::new(n, p).expect("valid binomial").sample(&mut rng) as f64;
        let (lo, hi) = chernoff_interval(draw, eps);
        hits += usize::from(lo <= mean && mean <= hi);
    }
    hits
}

/// Monte Carlo runs in which the decoy bounds hold against the true tallies.
fn containment(cfg: &ScenarioConfig, plan: &ValidationPlan) -> Result<[usize; 3]> {
    let eta = db_to_eta(plan.loss_db);
    let budget = PulseBudget::pulses(plan.containment_pulses);
    let base = derive_seed(cfg.seed, "oracle");
    let runs: Vec<[bool; 3]> = (0..plan.trials)
        .into_par_iter()
        .map(|i| {
            let (counts, truth) =
                monte_carlo_counts(&cfg.protocol, eta, &budget, &cfg.detector, base.wrapping_add(i as u64))?;
            let a = analyze_counts(&counts, &cfg.protocol, 1.0, &cfg.security)?;
            let vac = truth.vacuum_clicks_z as f64;
            let x_ratio = if truth.single_photon_clicks_x > 0 {
                truth.single_photon_errors_x as f64 / truth.single_photon_clicks_x as f64
            } else {
                0.0
            };
            Ok([
                a.s_z0_low <= vac && vac <= a.s_z0_high,
                a.s_z1_low <= truth.single_photon_clicks_z as f64,
                a.phi_z >= x_ratio,
            ])
        })
        .collect::<Result<_>>()?;
    let count = |k: usize| runs.iter().filter(|r| r[k]).count();
    Ok([count(0), count(1), count(2)])
}

/// Bound containment over `plan.trials` runs plus Chernoff interval coverage.
pub fn containment_checks(cfg: &ScenarioConfig, plan: &ValidationPlan) -> Result<Vec<Check>> {
    let [vacuum, single, phase] = containment(cfg, plan)?;
    let eps = cfg.security.eps_per_bound();
    let covered = chernoff_coverage(plan.chernoff_trials, eps, derive_seed(cfg.seed, "chernoff"));
    Ok(vec![
        Check::rate("vacuum count bracketed", vacuum, plan.trials, 0.99),
        Check::rate("single-photon count bounded below", single, plan.trials, 0.99),
        Check::rate("phase error bounded above", phase, plan.trials, 0.99),
        Check::rate("Chernoff interval coverage", covered, plan.chernoff_trials, 0.999),
    ])
}

/// Expected counts against Monte Carlo counts, and the mean offset of the
/// X-basis QBER estimator from the directly tallied X error fraction.
pub fn agreement_check(cfg: &ScenarioConfig, plan: &ValidationPlan) -> Result<(Check, f64)> {
    let (agree, offset) = agreement(cfg, plan)?;
    Ok((
        Check::rate("expected counts within 5 sigma", agree, plan.trials, 0.99),
        offset,
    ))
}

fn agreement(cfg: &ScenarioConfig, plan: &ValidationPlan) -> Result<(usize, f64)> {
    let eta = db_to_eta(plan.loss_db);
    let budget = PulseBudget::pulses(plan.agreement_pulses);
    let n = budget.n_pulses();
    let expected = expected_counts(&cfg.protocol, eta, &budget, &cfg.detector);
    let base = derive_seed(cfg.seed, "agreement");
    let runs: Vec<(bool, f64)> = (0..plan.trials)
        .into_par_iter()
        .map(|i| {
            let (counts, _) =
                monte_carlo_counts(&cfg.protocol, eta, &budget, &cfg.detector, base.wrapping_add(i as u64))?;
            let ok = counts
                .as_array()
                .iter()
                .zip(expected.as_array())
                .all(|(o, e)| {
                    let sigma = (e * (1.0 - e / n)).max(1.0).sqrt();
                    (o - e).abs() <= 5.0 * sigma
                });
            let estimator = analyze_counts(&counts, &cfg.protocol, 1.0, &cfg.security)?.qber_x;
            let tally = if counts.n_x() > 0.0 {
                counts.m_x() / counts.n_x()
            } else {
                0.0
            };
            Ok((ok, estimator - tally))
        })
        .collect::<Result<_>>()?;
    let hits = runs.iter().filter(|r| r.0).count();
    let offset = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    Ok((hits, offset))
}

/// Analytic properties of the entropy, key length, keyless rates and loss model.
pub fn property_checks(cfg: &ScenarioConfig, checks: &mut Vec<Check>) -> Result<()> {
    let mut worst = 0.0f64;
    let mut bounded = true;
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let (a, b) = (binary_entropy(x)?, binary_entropy(1.0 - x)?);
        worst = worst.max((a - b).abs());
        bounded &= (-1e-12..=1.0 + 1e-12).contains(&a);
    }
    checks.push(Check::new(
        "entropy symmetric and in [0, 1]",
        format!("{worst:.1e}"),
        "<= 1e-12",
        worst <= 1e-12 && bounded,
    ));

    let budget = PulseBudget::new(cfg.source_rate_hz, cfg.window_s);
    let skl: Vec<u64> = (0..50)
        .map(|k| {
            let loss = 20.0 + 30.0 * k as f64 / 49.0;
            analyze_block(&cfg.protocol, db_to_eta(loss), &budget, &cfg.detector, &cfg.security)
                .map(|a| a.skl)
        })
        .collect::<Result<_>>()?;
    let rises = skl.windows(2).filter(|w| w[1] > w[0]).count();
    checks.push(Check::new(
        "key length non-increasing in loss",
        format!("{rises} rises over 50 points"),
        "0 rises",
        rises == 0,
    ));

    let quiet = QkpcParams {
        p_dark: 0.0,
        stray_mean: 0.0,
        ..cfg.qkpc
    };
    let opt = cfg.optimizer_for("qkpc");
    let a = optimize_point(1e-5, &quiet, cfg.source_rate_hz, &opt)?;
    let b = optimize_point(1e-6, &quiet, cfg.source_rate_hz, &opt)?;
    let (na, nb) = (a.received_photons(1e-5), b.received_photons(1e-6));
    let drift = (na - nb).abs() / na;
    checks.push(Check::new(
        "keyless optimum scale invariant",
        format!("{:.2e} relative", drift),
        "<= 1e-2",
        drift <= 1e-2,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "properties"));
    let mut in_range = 0;
    let samples = 10_000;
    for _ in 0..samples {
        let p = QkpcParams {
            q: rng.random_range(0.01..0.99),
            gamma: rng.random_range(0.01..0.99),
            ..cfg.qkpc
        };
        let n = 10f64.powf(rng.random_range(-3.0..2.0));
        let e = eve_optimal_error(n, 1.0, &p);
        let c = private_capacity(n, 1.0, &p);
        let r = devetak_winter_rate(n, 1.0, &p);
        in_range += usize::from(
            (0.0..=0.5).contains(&e) && (0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&r),
        );
    }
    checks.push(Check::rate("keyless quantities in range", in_range, samples, 1.0));

    let geometry = pass_geometry(&cfg.orbit_config())?;
    let profile = loss_profile(&geometry, &cfg.effective_channel()?)?;
    let worst = profile
        .samples
        .iter()
        .filter_map(|s| {
            let b = s.breakdown?;
            let sum = eta_to_db(b.eta_geometric) + eta_to_db(b.eta_atmospheric) + eta_to_db(b.eta_intrinsic);
            Some((sum - s.loss_total_db).abs().max((eta_to_db(s.eta_total) - s.loss_total_db).abs()))
        })
        .fold(0.0f64, f64::max);
    checks.push(Check::new(
        "loss components add in dB",
        format!("{worst:.1e} dB"),
        "<= 1e-9 dB",
        worst <= 1e-9,
    ));
    Ok(())
}

/// Every run repeated with the same scenario gives identical results.
pub fn rerun_checks(cfg: &ScenarioConfig, checks: &mut Vec<Check>) -> Result<()> {
    let pass = simulate_pass(cfg)? == simulate_pass(cfg)?;
    checks.push(Check::new("pass rerun identical", pass.to_string(), "true", pass));
    let sweep = [0.04, 0.1];
    let same = aperture_sweep(cfg, &sweep)? == aperture_sweep(cfg, &sweep)?;
    checks.push(Check::new("aperture sweep rerun identical", same.to_string(), "true", same));
    let same = simulate_qkpc(cfg)? == simulate_qkpc(cfg)?;
    checks.push(Check::new("keyless profile rerun identical", same.to_string(), "true", same));
    Ok(())
}

/// Runs every validation check for the scenario.
pub fn run_validation(cfg: &ScenarioConfig, plan: &ValidationPlan) -> Result<ValidationReport> {
    if plan.trials < MIN_TRIALS {
        return Err(Error::config(
            "--trials",
            format!("need at least {MIN_TRIALS} trials, got {}", plan.trials),
        ));
    }
    cfg.validate()?;
    let mut checks = Vec::new();

    checks.extend(containment_checks(cfg, plan)?);
    let (agree, qber_x_offset) = agreement_check(cfg, plan)?;
    checks.push(agree);

    property_checks(cfg, &mut checks)?;
    if !plan.skip_reruns {
        rerun_checks(cfg, &mut checks)?;
    }
    Ok(ValidationReport {
        checks,
        qber_x_offset,
    })
}
