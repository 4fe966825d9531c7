//! Per-block choice of intensities and basis biases that maximizes the secret
//! key length, and the loss at which no key survives.

use crate::channel::db_to_eta;
use crate::detection::{DetectorModel, ProtocolParams, PulseBudget};
use crate::error::{Error, Result};
use crate::finite_key::{analyze_block, KeyAnalysis, SecurityParams};
use crate::optimize::{maximize, OptimizerConfig, SearchSpace};

/// Search box for `(mu1, mu2, p_mu1, p_za)`; `p_zb` stays fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolBounds {
    pub mu1: (f64, f64),
    pub mu2: (f64, f64),
    pub p_mu1: (f64, f64),
    pub p_za: (f64, f64),
    /// Minimum gap `mu1 - mu2`.
    pub min_gap: f64,
}

impl Default for ProtocolBounds {
    fn default() -> Self {
        Self {
            mu1: (0.1, 1.2),
            mu2: (0.005, 0.5),
            p_mu1: (0.05, 0.95),
            p_za: (0.1, 0.99),
            min_gap: 0.01,
        }
    }
}

impl ProtocolBounds {
    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(vec![self.mu1, self.mu2, self.p_mu1, self.p_za]).with_constraint(
            0,
            1,
            self.min_gap,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let boxes = [
            ("qkd.mu1_range", self.mu1),
            ("qkd.mu2_range", self.mu2),
            ("qkd.p_mu1_range", self.p_mu1),
            ("qkd.p_za_range", self.p_za),
        ];
        for (key, (lo, hi)) in boxes {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::config(key, "need 0 < lower < upper"));
            }
        }
        for (key, (_, hi)) in &boxes[2..] {
            if *hi >= 1.0 {
                return Err(Error::config(*key, "probabilities must stay below 1"));
            }
        }
        if !(self.min_gap > 0.0) {
            return Err(Error::config("qkd.min_gap", "must be > 0"));
        }
        Ok(())
    }
}

fn to_vector(p: &ProtocolParams) -> [f64; 4] {
    [p.mu1, p.mu2, p.p_mu1, p.p_za]
}

fn from_vector(x: &[f64], p_zb: f64) -> ProtocolParams {
    ProtocolParams {
        mu1: x[0],
        mu2: x[1],
        p_mu1: x[2],
        p_za: x[3],
        p_zb,
    }
}

/// Everything shared by the blocks of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSetup {
    pub detector: DetectorModel,
    pub security: SecurityParams,
    pub budget: PulseBudget,
    pub p_zb: f64,
    pub bounds: ProtocolBounds,
}

impl Default for LinkSetup {
    fn default() -> Self {
        Self {
            detector: DetectorModel::default(),
            security: SecurityParams::default(),
            budget: PulseBudget::new(1e9, 1.0),
            p_zb: 0.9,
            bounds: ProtocolBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedBlock {
    pub params: ProtocolParams,
    pub analysis: KeyAnalysis,
    /// The objective was flat everywhere the optimizer looked.
    pub plateau: bool,
}

/// Maximizes the unfloored key length at transmittance `eta`. `start` seeds
/// the first restart, which is how successive windows are warm-started.
pub fn optimize_block(
    eta: f64,
    link: &LinkSetup,
    optimizer: &OptimizerConfig,
    start: Option<&ProtocolParams>,
) -> Result<OptimizedBlock> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", eta, "(0, 1]"));
    }
    link.security.validate()?;
    link.bounds.validate()?;
    let objective = |x: &[f64]| {
        analyze_block(
            &from_vector(x, link.p_zb),
            eta,
            &link.budget,
            &link.detector,
            &link.security,
        )
        .map_or(f64::NEG_INFINITY, |a| a.skl_raw)
    };
    let start = start.map(to_vector);
    let best = maximize(
        objective,
        &link.bounds.search_space(),
        optimizer,
        start.as_ref().map(|s| s.as_slice()),
    )?;
    let params = from_vector(&best.point, link.p_zb);
    let analysis = analyze_block(&params, eta, &link.budget, &link.detector, &link.security)?;
    Ok(OptimizedBlock {
        params,
        analysis,
        plateau: best.plateau,
    })
}

/// Optimized key length at a total loss given in dB.
pub fn optimized_skl_at_loss(
    loss_db: f64,
    link: &LinkSetup,
    optimizer: &OptimizerConfig,
) -> Result<OptimizedBlock> {
    optimize_block(db_to_eta(loss_db), link, optimizer, None)
}

/// Bisects for the loss at which the optimized key length first drops to
/// zero, between `lo_db` (positive key) and `hi_db` (no key).
pub fn cutoff_loss_db(
    link: &LinkSetup,
    optimizer: &OptimizerConfig,
    (lo_db, hi_db): (f64, f64),
    tolerance_db: f64,
) -> Result<f64> {
    let positive = |loss: f64| -> Result<bool> {
        Ok(optimized_skl_at_loss(loss, link, optimizer)?.analysis.skl > 0)
    };
    if !positive(lo_db)? {
        return Err(Error::Numerical(format!(
            "no secret key even at {lo_db} dB"
        )));
    }
    if positive(hi_db)? {
        return Err(Error::Numerical(format!("secret key still positive at {hi_db} dB")));
    }
    let (mut lo, mut hi) = (lo_db, hi_db);
    while hi - lo > tolerance_db {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisects for the loss at which the optimized key rate equals `target_hz`,
/// assuming the rate falls with loss across `(lo_db, hi_db)`.
pub fn loss_for_key_rate(
    target_hz: f64,
    link: &LinkSetup,
    optimizer: &OptimizerConfig,
    (lo_db, hi_db): (f64, f64),
    tolerance_db: f64,
) -> Result<f64> {
    let rate = |loss: f64| -> Result<f64> {
        Ok(optimized_skl_at_loss(loss, link, optimizer)?.analysis.skr_hz)
    };
    if !(rate(lo_db)? >= target_hz && rate(hi_db)? <= target_hz) {
        return Err(Error::Numerical(format!(
            "key rate {target_hz} Hz is not bracketed by [{lo_db}, {hi_db}] dB"
        )));
    }
    let (mut lo, mut hi) = (lo_db, hi_db);
    while hi - lo > tolerance_db {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 4,
            ..Default::default()
        }
    }

    #[test]
    fn optimized_beats_fixed_parameters() {
        let link = LinkSetup::default();
        let eta = db_to_eta(30.0);
        let fixed = analyze_block(
            &ProtocolParams::default(),
            eta,
            &link.budget,
            &link.detector,
            &link.security,
        )
        .unwrap();
        let best = optimize_block(eta, &link, &fast(), None).unwrap();
        assert!(best.analysis.skl_raw >= fixed.skl_raw);
        assert!(best.params.mu1 >= best.params.mu2 + link.bounds.min_gap);
    }

    #[test]
    fn no_key_far_beyond_cutoff() {
        let best = optimized_skl_at_loss(55.0, &LinkSetup::default(), &fast()).unwrap();
        assert_eq!(best.analysis.skl, 0);
    }

    #[test]
    fn cutoff_is_bracketed() {
        let link = LinkSetup::default();
        let cut = cutoff_loss_db(&link, &fast(), (30.0, 50.0), 0.05).unwrap();
        assert!(optimized_skl_at_loss(cut - 0.2, &link, &fast()).unwrap().analysis.skl > 0);
        assert_eq!(optimized_skl_at_loss(cut + 0.2, &link, &fast()).unwrap().analysis.skl, 0);
    }

    #[test]
    fn warm_start_reaches_same_key() {
        let link = LinkSetup::default();
        let eta = db_to_eta(32.0);
        let cold = optimize_block(eta, &link, &fast(), None).unwrap();
        let warm = optimize_block(eta, &link, &fast(), Some(&cold.params)).unwrap();
        let rel = (warm.analysis.skl_raw - cold.analysis.skl_raw).abs() / cold.analysis.skl_raw;
        assert!(rel < 1e-3);
    }

    #[test]
    fn rate_target_inverts_rate_curve() {
        let link = LinkSetup::default();
        let loss = loss_for_key_rate(50_000.0, &link, &fast(), (20.0, 40.0), 0.001).unwrap();
        let skr = optimized_skl_at_loss(loss, &link, &fast()).unwrap().analysis.skr_hz;
        assert!((skr - 50_000.0).abs() / 50_000.0 < 0.01, "{skr}");
        assert!(loss_for_key_rate(1e9, &link, &fast(), (20.0, 40.0), 0.01).is_err());
    }

    #[test]
    fn bad_bounds_rejected() {
        let link = LinkSetup {
            bounds: ProtocolBounds {
                p_za: (0.5, 1.0),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            optimize_block(1e-3, &link, &fast(), None),
            Err(Error::Config { .. })
        ));
    }
}
