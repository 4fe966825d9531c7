//! Finite-key analysis of three-state BB84 with one decoy intensity.
//!
//! Counts are corrected for statistical fluctuations with a multiplicative
//! Chernoff interval, rescaled per intensity, and combined into lower bounds on
//! vacuum and single-photon detections and an upper bound on the single-photon
//! phase error rate. One accumulation block corresponds to one analysis window.

use crate::detection::{expected_counts, CountStatistics, DetectorModel, ProtocolParams, PulseBudget};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    pub eps_secrecy: f64,
    pub eps_correctness: f64,
    /// Number of failure-probability allocations: 19 for one decoy, 21 for two.
    pub alpha: u32,
    pub f_ec: f64,
    pub num_decoys: u32,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_secrecy: 1e-9,
            eps_correctness: 1e-15,
            alpha: 19,
            f_ec: 1.16,
            num_decoys: 1,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_secrecy > 0.0 && self.eps_secrecy < 1.0) {
            return Err(Error::config("qkd.eps_s", "must lie in (0, 1)"));
        }
        if !(self.eps_correctness > 0.0 && self.eps_correctness < 1.0) {
            return Err(Error::config("qkd.eps_c", "must lie in (0, 1)"));
        }
        if !matches!(self.alpha, 19 | 21) {
            return Err(Error::config("qkd.alpha", "must be 19 or 21"));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::config("qkd.f_ec", "must be >= 1"));
        }
        match self.num_decoys {
            1 => Ok(()),
            2 => Err(Error::Unsupported(
                "two-decoy analysis is not implemented".into(),
            )),
            _ => Err(Error::config("qkd.num_decoys", "must be 1 or 2")),
        }
    }

    /// Failure probability assigned to each individual statistical bound.
    pub fn eps_per_bound(&self) -> f64 {
        self.eps_secrecy / self.alpha as f64
    }
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "[0, 1]"));
    }
    Ok(entropy(x))
}

/// Binary entropy without the domain check; values outside (0, 1) map to 0.
pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2
    }
}

/// Probability that a pulse of the intensity mixture holds exactly `n` photons.
pub fn poisson_tau(n: u32, params: &ProtocolParams) -> f64 {
    let factorial: f64 = (1..=n).map(f64::from).product();
    params
        .intensities()
        .iter()
        .map(|&(mu, p)| p * (-mu).exp() * mu.powi(n as i32) / factorial)
        .sum()
}

/// Two-sided Chernoff interval `(low, high)` for an observed count, each side
/// failing with probability at most `eps`.
pub fn chernoff_interval(count: f64, eps: f64) -> (f64, f64) {
    let beta = (1.0 / eps).ln();
    let high = count + beta / 2.0 + (2.0 * beta * count + beta * beta / 4.0).sqrt();
    let low = (count - (2.0 * beta * count).sqrt()).max(0.0);
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoyBounds {
    pub s_z0_low: f64,
    pub s_z0_high: f64,
    pub s_z1_low: f64,
    pub v_x1_high: f64,
    pub s_x1_low: f64,
}

/// Single-photon lower bound shared by both bases.
fn single_photon_low(
    n: [f64; 2],
    vacuum_high: f64,
    params: &ProtocolParams,
    tau0: f64,
    tau1: f64,
    eps: f64,
) -> f64 {
    let [(mu1, p1), (mu2, p2)] = params.intensities();
    let n1_high = mu1.exp() / p1 * chernoff_interval(n[0], eps).1;
    let n2_low = mu2.exp() / p2 * chernoff_interval(n[1], eps).0;
    let ratio = (mu2 * mu2) / (mu1 * mu1);
    let vacuum_term = (mu1 * mu1 - mu2 * mu2) / (mu1 * mu1) * vacuum_high / tau0;
    let s1 = tau1 * mu1 / (mu2 * (mu1 - mu2)) * (n2_low - ratio * n1_high - vacuum_term);
    s1.clamp(0.0, n[0] + n[1])
}

pub fn decoy_bounds(
    counts: &CountStatistics,
    params: &ProtocolParams,
    security: &SecurityParams,
) -> Result<DecoyBounds> {
    let gap = params.mu1 - params.mu2;
    if gap < 1e-6 {
        return Err(Error::DegenerateIntensities { gap });
    }
    let eps = security.eps_per_bound();
    let [(mu1, p1), (mu2, p2)] = params.intensities();
    let tau0 = poisson_tau(0, params);
    let tau1 = poisson_tau(1, params);
    let high = |c: f64| chernoff_interval(c, eps).1;
    let low = |c: f64| chernoff_interval(c, eps).0;

    let nz1_high = mu1.exp() / p1 * high(counts.n_z_mu1);
    let nz2_low = mu2.exp() / p2 * low(counts.n_z_mu2);
    let s_z0_high = (2.0 * (high(counts.m_z_mu1) + high(counts.m_z_mu2))).min(counts.n_z());
    let s_z0_low = (tau0 * (mu1 * nz2_low - mu2 * nz1_high) / gap).clamp(0.0, s_z0_high);
    let s_z1_low = single_photon_low(
        [counts.n_z_mu1, counts.n_z_mu2],
        s_z0_high,
        params,
        tau0,
        tau1,
        eps,
    );

    let s_x0_high = (2.0 * (high(counts.m_x_mu1) + high(counts.m_x_mu2))).min(counts.n_x());
    let s_x1_low = single_photon_low(
        [counts.n_x_mu1, counts.n_x_mu2],
        s_x0_high,
        params,
        tau0,
        tau1,
        eps,
    );
    let mx1_high = mu1.exp() / p1 * high(counts.m_x_mu1);
    let mx2_low = mu2.exp() / p2 * low(counts.m_x_mu2);
    let v_x1_high = (tau1 * (mx1_high - mx2_low) / gap).clamp(0.0, counts.n_x());

    Ok(DecoyBounds {
        s_z0_low,
        s_z0_high,
        s_z1_low,
        v_x1_high,
        s_x1_low,
    })
}

/// Upper bound on the Z-basis single-photon phase error rate, capped at 0.5.
pub fn phase_error_bound(bounds: &DecoyBounds, security: &SecurityParams) -> f64 {
    let (c, d) = (bounds.s_z1_low, bounds.s_x1_low);
    if !(c > 0.0 && d > 0.0) {
        return 0.5;
    }
    let ratio = bounds.v_x1_high / d;
    if ratio >= 0.5 {
        return 0.5;
    }
    let b = ratio.max(f64::MIN_POSITIVE);
    // log2((c+d)/(c d (1-b) b) * (21/eps)^2), in pieces to avoid overflow
    let log_term = (c + d).log2() - c.log2() - d.log2() - (1.0 - b).log2() - b.log2()
        + 2.0 * (21.0 / security.eps_secrecy).log2();
    let radicand = (c + d) * (1.0 - b) * b / (c * d * std::f64::consts::LN_2) * log_term;
    if !(radicand >= 0.0) || !radicand.is_finite() {
        return 0.5;
    }
    (ratio + radicand.sqrt()).min(0.5)
}

/// Bits disclosed by error correction on a block of `n_z` sifted bits.
pub fn lambda_ec(n_z: f64, qber_z: f64, security: &SecurityParams) -> f64 {
    security.f_ec * n_z * entropy(qber_z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLengthInputs {
    pub s_z0: f64,
    pub s_z1: f64,
    pub phi_z: f64,
    pub lambda_ec: f64,
}

/// Key length before flooring and clipping; negative below the cutoff.
pub fn secret_key_length_raw(inputs: &KeyLengthInputs, security: &SecurityParams) -> f64 {
    inputs.s_z0 + inputs.s_z1 * (1.0 - entropy(inputs.phi_z))
        - inputs.lambda_ec
        - 6.0 * (security.alpha as f64 / security.eps_secrecy).log2()
        - (2.0 / security.eps_correctness).log2()
}

pub fn secret_key_length(inputs: &KeyLengthInputs, security: &SecurityParams) -> u64 {
    let raw = secret_key_length_raw(inputs, security).floor();
    if raw > 0.0 {
        raw as u64
    } else {
        0
    }
}

/// X-basis QBER estimator built from the sifted Z count and the cross-basis
/// detections of the three-state protocol. Clamped to `[0, 1]`.
pub fn qber_x(counts: &CountStatistics, params: &ProtocolParams) -> Result<f64> {
    let n_z = counts.n_z();
    if n_z <= 0.0 {
        return Err(Error::ZeroDivision("n_z = 0 in the X-basis QBER estimator"));
    }
    let (pza, pzb, pxa, pxb) = (params.p_za, params.p_zb, params.p_xa(), params.p_xb());
    let n_ad = counts.m_x() / (pxa * pxb);
    let n_az = counts.n_a_given_z / (pza * pxb);
    let n_zd = counts.n_z_given_d / (pxa * pzb);
    let bracket = n_ad + (n_ad + n_az - n_zd + 2.0 * n_z / (pza * pxb)).max(0.0);
    Ok((0.5 * pza * pzb / n_z * bracket).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyAnalysis {
    pub s_z0_low: f64,
    pub s_z0_high: f64,
    pub s_z1_low: f64,
    pub v_x1_high: f64,
    pub s_x1_low: f64,
    pub phi_z: f64,
    pub lambda_ec: f64,
    pub skl: u64,
    pub skl_raw: f64,
    pub skr_hz: f64,
    pub qber_z: f64,
    pub qber_x: f64,
}

/// Runs the full analysis on a given set of counts collected over `duration_s`.
pub fn analyze_counts(
    counts: &CountStatistics,
    params: &ProtocolParams,
    duration_s: f64,
    security: &SecurityParams,
) -> Result<KeyAnalysis> {
    let bounds = decoy_bounds(counts, params, security)?;
    let phi_z = phase_error_bound(&bounds, security);
    let n_z = counts.n_z();
    let qber_z = if n_z > 0.0 {
        (counts.m_z() / n_z).clamp(0.0, 0.5)
    } else {
        0.5
    };
    let qber_x = if n_z > 0.0 {
        qber_x(counts, params)?
    } else {
        0.5
    };
    let leak = lambda_ec(n_z, qber_z, security);
    let inputs = KeyLengthInputs {
        s_z0: bounds.s_z0_low,
        s_z1: bounds.s_z1_low,
        phi_z,
        lambda_ec: leak,
    };
    let skl = secret_key_length(&inputs, security);
    Ok(KeyAnalysis {
        s_z0_low: bounds.s_z0_low,
        s_z0_high: bounds.s_z0_high,
        s_z1_low: bounds.s_z1_low,
        v_x1_high: bounds.v_x1_high,
        s_x1_low: bounds.s_x1_low,
        phi_z,
        lambda_ec: leak,
        skl,
        skl_raw: secret_key_length_raw(&inputs, security),
        skr_hz: skl as f64 / duration_s,
        qber_z,
        qber_x,
    })
}

/// Expected-count analysis of one block of pulses sent through a channel of
/// transmittance `eta`.
pub fn analyze_block(
    params: &ProtocolParams,
    eta: f64,
    budget: &PulseBudget,
    detector: &DetectorModel,
    security: &SecurityParams,
) -> Result<KeyAnalysis> {
    security.validate()?;
    params.validate()?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain("eta", eta, "[0, 1]"));
    }
    let counts = expected_counts(params, eta, budget, detector);
    analyze_counts(&counts, params, budget.duration_s, security)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::db_to_eta;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn gbit_second() -> PulseBudget {
        PulseBudget::new(1e9, 1.0)
    }

    #[test]
    fn entropy_reference_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // 30-digit evaluation
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.499915958164528, epsilon = 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn tau_values() {
        let vac = ProtocolParams {
            mu1: 0.0,
            mu2: 0.0,
            ..Default::default()
        };
        assert_eq!(poisson_tau(0, &vac), 1.0);
        assert_eq!(poisson_tau(1, &vac), 0.0);
        let p = ProtocolParams::default();
        assert_abs_diff_eq!(poisson_tau(0, &p), 0.550953035141553, epsilon = 1e-12);
        assert_abs_diff_eq!(poisson_tau(1, &p), 0.299397934144297, epsilon = 1e-12);
    }

    #[test]
    fn chernoff_edges() {
        let (lo, hi) = chernoff_interval(0.0, 1e-9 / 19.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        for c in [1.0, 10.0, 1e3, 1e6] {
            let (lo, hi) = chernoff_interval(c, 1e-10);
            assert!(lo <= c && c <= hi);
        }
    }

    #[test]
    fn zero_counts_give_zero_bounds() {
        let b = decoy_bounds(
            &CountStatistics::default(),
            &ProtocolParams::default(),
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(b, DecoyBounds::default());
    }

    #[test]
    fn degenerate_intensities_rejected() {
        let p = ProtocolParams {
            mu1: 0.5,
            mu2: 0.5 - 1e-8,
            ..Default::default()
        };
        assert!(matches!(
            decoy_bounds(&CountStatistics::default(), &p, &SecurityParams::default()),
            Err(Error::DegenerateIntensities { .. })
        ));
    }

    #[test]
    fn single_photon_bound_below_analytic_truth() {
        let p = ProtocolParams::default();
        let eta = 1e-3;
        let budget = gbit_second();
        let counts = expected_counts(&p, eta, &budget, &DetectorModel::noiseless());
        let b = decoy_bounds(&counts, &p, &SecurityParams::default()).unwrap();
        // single-photon emissions that survive: N p_k P_Z^A P_Z^B mu_k e^-mu_k eta
        let truth: f64 = p
            .intensities()
            .iter()
            .map(|&(mu, pk)| 1e9 * pk * p.p_za * p.p_zb * mu * (-mu).exp() * eta)
            .sum();
        assert!(b.s_z1_low > 0.0);
        assert!(b.s_z1_low <= truth, "{} > {}", b.s_z1_low, truth);
        assert!(b.s_z1_low > 0.8 * truth);
    }

    #[test]
    fn phase_error_limits() {
        let sec = SecurityParams::default();
        let clean = DecoyBounds {
            s_z1_low: 1e12,
            s_x1_low: 1e12,
            ..Default::default()
        };
        let phi = phase_error_bound(&clean, &sec);
        assert!(phi > 0.0 && phi < 1e-6, "{phi}");
        let empty = DecoyBounds {
            s_z1_low: 1e6,
            ..Default::default()
        };
        assert_eq!(phase_error_bound(&empty, &sec), 0.5);
    }

    #[test]
    fn leakage_values() {
        let sec = SecurityParams::default();
        assert_eq!(lambda_ec(1e6, 0.0, &sec), 0.0);
        assert_abs_diff_eq!(lambda_ec(1e6, 0.5, &sec), 1.16e6, epsilon = 1e-6);
        assert_abs_diff_eq!(lambda_ec(1e6, 0.01, &sec), 93720.03763925696, epsilon = 1e-6);
    }

    #[test]
    fn key_length_penalties() {
        let sec = SecurityParams::default();
        let zero = KeyLengthInputs {
            s_z0: 0.0,
            s_z1: 0.0,
            phi_z: 0.0,
            lambda_ec: 0.0,
        };
        assert_eq!(secret_key_length(&zero, &sec), 0);
        let ideal = KeyLengthInputs { s_z1: 1e6, ..zero };
        // 1e6 - 6 log2(19e9) - log2(2e15) = 999744.2994
        assert_eq!(secret_key_length(&ideal, &sec), 999_744);
    }

    #[test]
    fn qber_x_algebra() {
        let p = ProtocolParams::default();
        // no X errors and a negative max() argument
        let c = CountStatistics {
            n_z_mu1: 100.0,
            n_a_given_z: 0.0,
            n_z_given_d: 1e9,
            ..Default::default()
        };
        assert_eq!(qber_x(&c, &p).unwrap(), 0.0);

        // both bracket terms equal T when the cross terms cancel the n_Z term
        let t = 40.0;
        let n_z = 1000.0;
        let n_ad = t * p.p_xa() * p.p_xb();
        let n_zd = 2.0 * n_z / (p.p_za * p.p_xb()) * p.p_xa() * p.p_zb;
        let c = CountStatistics {
            n_z_mu1: n_z,
            m_x_mu1: n_ad,
            n_z_given_d: n_zd,
            ..Default::default()
        };
        let expected = p.p_za * p.p_zb / n_z * t;
        assert_relative_eq!(qber_x(&c, &p).unwrap(), expected, max_relative = 1e-12);
        assert!(matches!(
            qber_x(&CountStatistics::default(), &p),
            Err(Error::ZeroDivision(_))
        ));
    }

    #[test]
    fn dark_channel_has_no_key() {
        let a = analyze_block(
            &ProtocolParams::default(),
            0.0,
            &gbit_second(),
            &DetectorModel::default(),
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(a.skl, 0);
        assert!((a.qber_z - 0.5).abs() < 1e-3);
    }

    #[test]
    fn key_at_30_db_not_at_50_db() {
        let run = |db: f64| {
            analyze_block(
                &ProtocolParams::default(),
                db_to_eta(db),
                &gbit_second(),
                &DetectorModel::default(),
                &SecurityParams::default(),
            )
            .unwrap()
        };
        let a30 = run(30.0);
        assert!(a30.skl > 0);
        assert_eq!(a30.skr_hz, a30.skl as f64);
        assert!(a30.s_z0_low <= a30.s_z0_high);
        assert!((0.0..=0.5).contains(&a30.phi_z));
        assert_eq!(run(50.0).skl, 0);
    }

    #[test]
    fn two_decoys_rejected() {
        let sec = SecurityParams {
            num_decoys: 2,
            alpha: 21,
            ..Default::default()
        };
        assert!(matches!(sec.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn qber_tends_to_intrinsic_value() {
        let det = DetectorModel {
            extraneous_count_prob: 0.0,
            afterpulse_prob: 0.0,
            intrinsic_qber: 1e-3,
        };
        let a = analyze_block(
            &ProtocolParams::default(),
            0.5,
            &gbit_second(),
            &det,
            &SecurityParams::default(),
        )
        .unwrap();
        assert_relative_eq!(a.qber_z, 1e-3, max_relative = 1e-9);
    }

    #[test]
    fn key_length_falls_with_loss() {
        let p = ProtocolParams::default();
        let mut last = u64::MAX;
        for i in 0..50 {
            let db = 20.0 + i as f64 * 0.5;
            let a = analyze_block(
                &p,
                db_to_eta(db),
                &gbit_second(),
                &DetectorModel::default(),
                &SecurityParams::default(),
            )
            .unwrap();
            assert!(a.skl <= last, "SKL rose at {db} dB");
            last = a.skl;
        }
    }

    proptest! {
        #[test]
        fn entropy_symmetric(x in 0.0..=1.0f64) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn chernoff_brackets_count(c in 0.0..1e9f64, e in 1e-15..0.5f64) {
            let (lo, hi) = chernoff_interval(c, e);
            prop_assert!(lo >= 0.0 && lo <= c && c <= hi);
        }
    }
}
