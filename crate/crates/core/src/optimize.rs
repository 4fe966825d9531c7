//! Multi-start bounded Nelder–Mead maximization.
//!
//! The search runs in coordinates normalized to the unit box; trial points are
//! clamped back into the box and points violating an ordering constraint are
//! scored as infeasible. Restarts draw their starting points from independent
//! ChaCha streams of one seed, so results do not depend on how many threads
//! evaluate them.

use std::cell::Cell;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// `x[greater] >= x[lesser] + margin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedConstraint {
    pub greater: usize,
    pub lesser: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub bounds: Vec<(f64, f64)>,
    pub constraints: Vec<OrderedConstraint>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            bounds,
            constraints: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, greater: usize, lesser: usize, margin: f64) -> Self {
        self.constraints.push(OrderedConstraint {
            greater,
            lesser,
            margin,
        });
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::config("optimizer", "search space has no dimensions"));
        }
        if self.bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::config("optimizer", "every bound needs lower < upper"));
        }
        for c in &self.constraints {
            if c.greater >= self.dim() || c.lesser >= self.dim() || !(c.margin > 0.0) {
                return Err(Error::config(
                    "optimizer",
                    "constraints need valid indices and a positive margin",
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(v, &(lo, hi))| (lo..=hi).contains(v))
            && self
                .constraints
                .iter()
                .all(|c| x[c.greater] >= x[c.lesser] + c.margin)
    }

    fn to_point(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(&self.bounds)
            .map(|(u, &(lo, hi))| (lo + u.clamp(0.0, 1.0) * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_evals: usize,
    /// Relative spread of simplex values at which a restart stops.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_evals: 2000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::config("optimizer.restarts", "must be >= 1"));
        }
        if self.max_evals < 10 {
            return Err(Error::config("optimizer.max_evals", "must be >= 10"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("optimizer.tolerance", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Every feasible evaluation returned the same value.
    pub plateau: bool,
    /// Best value after each restart, in restart order.
    pub trace: Vec<f64>,
}

struct RestartOutcome {
    point: Vec<f64>,
    value: f64,
    evals: usize,
    min_seen: f64,
    max_seen: f64,
}

const SIMPLEX_STEP: f64 = 0.1;
const X_TOL: f64 = 1e-7;

/// Maximizes `objective` over `space`. The objective returns `f64::NEG_INFINITY`
/// (or NaN) for points it considers infeasible. `start`, when given, seeds the
/// first restart.
pub fn maximize<F>(
    objective: F,
    space: &SearchSpace,
    config: &OptimizerConfig,
    start: Option<&[f64]>,
) -> Result<Maximum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    space.validate()?;
    config.validate()?;
    let outcomes: Vec<Option<RestartOutcome>> = (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let first = if i == 0 { start } else { None };
            run_restart(&objective, space, config, first, &mut rng)
        })
        .collect();

    let mut best: Option<RestartOutcome> = None;
    let mut trace = Vec::with_capacity(outcomes.len());
    let mut evals = 0;
    let (mut lo_seen, mut hi_seen) = (f64::INFINITY, f64::NEG_INFINITY);
    for outcome in outcomes.into_iter().flatten() {
        evals += outcome.evals;
        lo_seen = lo_seen.min(outcome.min_seen);
        hi_seen = hi_seen.max(outcome.max_seen);
        // strict comparison keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|b| outcome.value > b.value) {
            best = Some(outcome);
        }
        trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value));
    }
    let best = best.ok_or(Error::NoFeasiblePoint {
        evals: config.restarts * config.max_evals,
    })?;
    let plateau = (hi_seen - lo_seen).abs() <= 1e-12 * hi_seen.abs().max(1.0);
    Ok(Maximum {
        point: best.point,
        value: best.value,
        evals,
        plateau,
        trace,
    })
}

fn feasible_start(
    space: &SearchSpace,
    preferred: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    if let Some(p) = preferred {
        let x = space.to_point(&space.to_unit(p));
        if space.contains(&x) {
            return Some(space.to_unit(&x));
        }
    }
    (0..10_000).find_map(|_| {
        let unit: Vec<f64> = (0..space.dim()).map(|_| rng.random::<f64>()).collect();
        space.contains(&space.to_point(&unit)).then_some(unit)
    })
}

fn run_restart<F>(
    objective: &F,
    space: &SearchSpace,
    config: &OptimizerConfig,
    preferred: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Option<RestartOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    let start = feasible_start(space, preferred, rng)?;
    let dim = space.dim();
    let evals = Cell::new(0usize);
    let min_seen = Cell::new(f64::INFINITY);
    let max_seen = Cell::new(f64::NEG_INFINITY);

    // cost = -objective, +inf when infeasible
    let cost = |unit: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        let x = space.to_point(unit);
        if !space.contains(&x) {
            return f64::INFINITY;
        }
        let v = objective(&x);
        if v.is_nan() || v == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        min_seen.set(min_seen.get().min(v));
        max_seen.set(max_seen.get().max(v));
        -v
    };

    let clamp = |u: Vec<f64>| -> Vec<f64> { u.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let c0 = cost(&start);
    simplex.push((start.clone(), c0));
    for i in 0..dim {
        let mut v = start.clone();
        v[i] = if v[i] + SIMPLEX_STEP <= 1.0 {
            v[i] + SIMPLEX_STEP
        } else {
            v[i] - SIMPLEX_STEP
        };
        let c = cost(&v);
        simplex.push((v, c));
    }

    while evals.get() < config.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_c, worst_c) = (simplex[0].1, simplex[dim].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread_ok = worst_c.is_finite()
            && (worst_c - best_c) <= config.tolerance * best_c.abs() + 1e-12;
        if spread_ok && diameter <= X_TOL {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(v, _)| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };

        let reflected = along(1.0);
        let rc = cost(&reflected);
        if rc < best_c {
            let expanded = along(2.0);
            let ec = cost(&expanded);
            simplex[dim] = if ec < rc { (expanded, ec) } else { (reflected, rc) };
            continue;
        }
        if rc < simplex[dim - 1].1 {
            simplex[dim] = (reflected, rc);
            continue;
        }
        let (contracted, cc) = if rc < worst_c {
            let c = along(0.5);
            let cc = cost(&c);
            (c, cc)
        } else {
            let c = along(-0.5);
            let cc = cost(&c);
            (c, cc)
        };
        if cc < worst_c.min(rc) {
            simplex[dim] = (contracted, cc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + 0.5 * (v - a))
                .collect();
            let c = cost(&shrunk);
            *vertex = (shrunk, c);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (unit, c) = &simplex[0];
    if !c.is_finite() {
        return None;
    }
    Some(RestartOutcome {
        point: space.to_point(unit),
        value: -c,
        evals: evals.get(),
        min_seen: min_seen.get(),
        max_seen: max_seen.get(),
    })
}
