//! Detection and error statistics for weak coherent pulses.
//!
//! Two routes produce [`CountStatistics`]: closed-form expectations used by the key
//! analysis, and a pulse-by-pulse Monte Carlo that also records which detections
//! came from vacuum and single-photon pulses. The Monte Carlo exists to check the
//! decoy-state bounds against quantities the analysis can only estimate.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest pulse count accepted by [`monte_carlo_counts`].
pub const MONTE_CARLO_PULSE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub extraneous_count_prob: f64,
    pub afterpulse_prob: f64,
    pub intrinsic_qber: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            extraneous_count_prob: 1e-8,
            afterpulse_prob: 1e-3,
            intrinsic_qber: 1e-3,
        }
    }
}

impl DetectorModel {
    pub fn noiseless() -> Self {
        Self {
            extraneous_count_prob: 0.0,
            afterpulse_prob: 0.0,
            intrinsic_qber: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("detector.p_ec", self.extraneous_count_prob),
            ("detector.p_ap", self.afterpulse_prob),
            ("detector.qber_i", self.intrinsic_qber),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, "must lie in [0, 1)"));
            }
        }
        if self.extraneous_count_prob >= 0.5 {
            return Err(Error::config("detector.p_ec", "must be well below 0.5"));
        }
        Ok(())
    }
}

/// Alice's intensity and basis choices plus Bob's basis bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub mu1: f64,
    pub mu2: f64,
    pub p_mu1: f64,
    pub p_za: f64,
    pub p_zb: f64,
}

impl Default for ProtocolParams {
    /// Zenith-optimal values for the default link.
    fn default() -> Self {
        Self {
            mu1: 0.81,
            mu2: 0.12,
            p_mu1: 0.76,
            p_za: 0.88,
            p_zb: 0.9,
        }
    }
}

impl ProtocolParams {
    pub fn p_mu2(&self) -> f64 {
        1.0 - self.p_mu1
    }
    pub fn p_xa(&self) -> f64 {
        1.0 - self.p_za
    }
    pub fn p_xb(&self) -> f64 {
        1.0 - self.p_zb
    }

    /// `(mu, p_mu)` for the signal and decoy intensities, in that order.
    pub fn intensities(&self) -> [(f64, f64); 2] {
        [(self.mu1, self.p_mu1), (self.mu2, self.p_mu2())]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu2 > 0.0) {
            return Err(Error::config("qkd.mu2", "mu2 must be > 0"));
        }
        if !(self.mu2 < self.mu1) {
            return Err(Error::config(
                "qkd.mu2",
                format!("invariant 0 < mu2 < mu1 violated (mu1 = {}, mu2 = {})", self.mu1, self.mu2),
            ));
        }
        for (key, v) in [
            ("qkd.p_mu1", self.p_mu1),
            ("qkd.p_za", self.p_za),
            ("qkd.p_zb", self.p_zb),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, "probability must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseBudget {
    pub source_rate_hz: f64,
    pub duration_s: f64,
}

impl PulseBudget {
    pub fn new(source_rate_hz: f64, duration_s: f64) -> Self {
        Self {
            source_rate_hz,
            duration_s,
        }
    }

    /// Budget holding exactly `n` pulses over one second.
    pub fn pulses(n: f64) -> Self {
        Self::new(n, 1.0)
    }

    pub fn n_pulses(&self) -> f64 {
        self.source_rate_hz * self.duration_s
    }
}

/// Detection (`n`) and error (`m`) counts per basis and intensity.
///
/// `n_a_given_z` counts Bob's `A` outcomes in the X basis when Alice prepared a
/// Z-basis state; `n_z_given_d` counts Bob's Z-basis detections when Alice
/// prepared `D`. Both feed the X-basis QBER estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountStatistics {
    pub n_z_mu1: f64,
    pub n_z_mu2: f64,
    pub m_z_mu1: f64,
    pub m_z_mu2: f64,
    pub n_x_mu1: f64,
    pub n_x_mu2: f64,
    pub m_x_mu1: f64,
    pub m_x_mu2: f64,
    pub n_a_given_z: f64,
    pub n_z_given_d: f64,
}

impl CountStatistics {
    pub fn n_z(&self) -> f64 {
        self.n_z_mu1 + self.n_z_mu2
    }
    pub fn m_z(&self) -> f64 {
        self.m_z_mu1 + self.m_z_mu2
    }
    pub fn n_x(&self) -> f64 {
        self.n_x_mu1 + self.n_x_mu2
    }
    pub fn m_x(&self) -> f64 {
        self.m_x_mu1 + self.m_x_mu2
    }

    /// The eight basis/intensity counts followed by the two cross-basis counts.
    pub fn as_array(&self) -> [f64; 10] {
        [
            self.n_z_mu1,
            self.n_z_mu2,
            self.m_z_mu1,
            self.m_z_mu2,
            self.n_x_mu1,
            self.n_x_mu2,
            self.m_x_mu1,
            self.m_x_mu2,
            self.n_a_given_z,
            self.n_z_given_d,
        ]
    }

    pub const FIELD_NAMES: [&'static str; 10] = [
        "n_z_mu1",
        "n_z_mu2",
        "m_z_mu1",
        "m_z_mu2",
        "n_x_mu1",
        "n_x_mu2",
        "m_x_mu1",
        "m_x_mu2",
        "n_a_given_z",
        "n_z_given_d",
    ];
}

/// Quantities only the Monte Carlo knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroundTruthCounts {
    pub vacuum_clicks_z: u64,
    pub single_photon_clicks_z: u64,
    pub single_photon_errors_x: u64,
    pub single_photon_clicks_x: u64,
}

fn check_mu_eta(mu: f64, eta: f64) {
    debug_assert!(mu >= 0.0, "mu = {mu}");
    debug_assert!((0.0..=1.0).contains(&eta), "eta = {eta}");
}

/// Expected detections per pulse of mean photon number `mu` over a channel of
/// transmittance `eta`, afterpulses included.
pub fn click_probability(mu: f64, eta: f64, detector: &DetectorModel) -> f64 {
    check_mu_eta(mu, eta);
    let no_signal = (-eta * mu).exp();
    let d = (1.0 + detector.afterpulse_prob)
        * (1.0 - (1.0 - 2.0 * detector.extraneous_count_prob) * no_signal);
    d.clamp(0.0, 1.0)
}

/// Expected erroneous detections per pulse.
pub fn error_probability(mu: f64, eta: f64, detector: &DetectorModel) -> f64 {
    let d = click_probability(mu, eta, detector);
    let e = detector.extraneous_count_prob
        + 0.5 * detector.afterpulse_prob * d
        + detector.intrinsic_qber * -(-eta * mu).exp_m1();
    e.clamp(0.0, d)
}

pub fn expected_counts(
    params: &ProtocolParams,
    eta: f64,
    budget: &PulseBudget,
    detector: &DetectorModel,
) -> CountStatistics {
    let n = budget.n_pulses();
    let zz = params.p_za * params.p_zb;
    let xx = params.p_xa() * params.p_xb();
    let [(mu1, p1), (mu2, p2)] = params.intensities();
    let (d1, d2) = (
        click_probability(mu1, eta, detector),
        click_probability(mu2, eta, detector),
    );
    let (e1, e2) = (
        error_probability(mu1, eta, detector),
        error_probability(mu2, eta, detector),
    );
    let d_mix = p1 * d1 + p2 * d2;
    CountStatistics {
        n_z_mu1: n * p1 * zz * d1,
        n_z_mu2: n * p2 * zz * d2,
        m_z_mu1: n * p1 * zz * e1,
        m_z_mu2: n * p2 * zz * e2,
        n_x_mu1: n * p1 * xx * d1,
        n_x_mu2: n * p2 * xx * d2,
        m_x_mu1: n * p1 * xx * e1,
        m_x_mu2: n * p2 * xx * e2,
        // a Z-basis state projects onto |A> half of the time
        n_a_given_z: n * params.p_za * params.p_xb() * d_mix / 2.0,
        n_z_given_d: n * params.p_xa() * params.p_zb * d_mix,
    }
}

/// Inverse-CDF Poisson sampler for the small means used by weak coherent pulses.
struct PoissonTable {
    cdf: Vec<f64>,
    mean: f64,
}

impl PoissonTable {
    fn new(mean: f64) -> Self {
        let mut cdf = Vec::new();
        let mut pmf = (-mean).exp();
        let mut acc = 0.0;
        let mut k = 0u32;
        while acc < 1.0 - 1e-16 && k < 200 {
            acc += pmf;
            cdf.push(acc);
            k += 1;
            pmf *= mean / k as f64;
        }
        Self { cdf, mean }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        match self.cdf.iter().position(|&c| u < c) {
            Some(k) => k as u32,
            // tail beyond the table; walk on with the recurrence
            None => {
                let mut k = self.cdf.len() as u32;
                let mut pmf = (-self.mean).exp();
                for i in 1..=k {
                    pmf *= self.mean / i as f64;
                }
                let mut acc = *self.cdf.last().unwrap_or(&0.0);
                while u >= acc && pmf > 0.0 {
                    acc += pmf;
                    k += 1;
                    pmf *= self.mean / k as f64;
                }
                k
            }
        }
    }
}

/// Simulates `budget.n_pulses()` pulses one at a time.
///
/// Per pulse: intensity, Alice's basis (and bit for Z), Bob's basis, a Poisson
/// photon number, independent survival of each photon with probability `eta`, an
/// extraneous count with probability `2 P_EC`, and an afterpulse with probability
/// `P_AP` after any click. Signal clicks are wrong with probability `QBER_I`;
/// extraneous-only clicks and afterpulses pick an outcome uniformly.
pub fn monte_carlo_counts(
    params: &ProtocolParams,
    eta: f64,
    budget: &PulseBudget,
    detector: &DetectorModel,
    seed: u64,
) -> Result<(CountStatistics, GroundTruthCounts)> {
    let n_pulses = budget.n_pulses();
    if n_pulses > MONTE_CARLO_PULSE_LIMIT {
        return Err(Error::BudgetTooLarge {
            n_pulses,
            limit: MONTE_CARLO_PULSE_LIMIT,
        });
    }
    let n_pulses = n_pulses.round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = [PoissonTable::new(params.mu1), PoissonTable::new(params.mu2)];

    // [intensity] tallies as integers
    let mut n_z = [0u64; 2];
    let mut m_z = [0u64; 2];
    let mut n_x = [0u64; 2];
    let mut m_x = [0u64; 2];
    let mut n_a_given_z = 0u64;
    let mut n_z_given_d = 0u64;
    let mut truth = GroundTruthCounts::default();
    let p_dark = 2.0 * detector.extraneous_count_prob;

    for _ in 0..n_pulses {
        let k = usize::from(rng.random::<f64>() >= params.p_mu1);
        let alice_z = rng.random::<f64>() < params.p_za;
        let bob_z = rng.random::<f64>() < params.p_zb;
        let photons = tables[k].sample(&mut rng);
        let survivors = (0..photons).filter(|_| rng.random::<f64>() < eta).count();
        let signal = survivors > 0;
        let dark = rng.random::<f64>() < p_dark;
        if !(signal || dark) {
            continue;
        }
        let afterpulse = rng.random::<f64>() < detector.afterpulse_prob;

        // outcome of each detection: true when it disagrees with Alice's state
        // (matching basis) or lands on |A> (X measurement of a Z state)
        let mut outcomes = [false; 2];
        outcomes[0] = if signal {
            rng.random::<f64>() < detector.intrinsic_qber
        } else {
            rng.random::<bool>()
        };
        let detections = if afterpulse {
            outcomes[1] = rng.random::<bool>();
            2
        } else {
            1
        };

        for &flag in &outcomes[..detections] {
            match (alice_z, bob_z) {
                (true, true) => {
                    n_z[k] += 1;
                    m_z[k] += u64::from(flag);
                    match photons {
                        0 => truth.vacuum_clicks_z += 1,
                        1 => truth.single_photon_clicks_z += 1,
                        _ => {}
                    }
                }
                (false, false) => {
                    n_x[k] += 1;
                    m_x[k] += u64::from(flag);
                    if photons == 1 {
                        truth.single_photon_clicks_x += 1;
                        truth.single_photon_errors_x += u64::from(flag);
                    }
                }
                (true, false) => {
                    // the signal outcome is unbiased here; reuse the flag only for noise
                    let on_a = if signal { rng.random::<bool>() } else { flag };
                    n_a_given_z += u64::from(on_a);
                }
                (false, true) => n_z_given_d += 1,
            }
        }
    }

    let counts = CountStatistics {
        n_z_mu1: n_z[0] as f64,
        n_z_mu2: n_z[1] as f64,
        m_z_mu1: m_z[0] as f64,
        m_z_mu2: m_z[1] as f64,
        n_x_mu1: n_x[0] as f64,
        n_x_mu2: n_x[1] as f64,
        m_x_mu1: m_x[0] as f64,
        m_x_mu2: m_x[1] as f64,
        n_a_given_z: n_a_given_z as f64,
        n_z_given_d: n_z_given_d as f64,
    };
    Ok((counts, truth))
}
