use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("satellite never rises above the minimum elevation ({max_elevation_deg:.3} deg < {min_elevation_deg:.3} deg)")]
    NoVisibility {
        max_elevation_deg: f64,
        min_elevation_deg: f64,
    },

    #[error("elevation {elevation_deg:.3} deg is below the atmosphere table (first row {first_row_deg:.3} deg)")]
    ElevationBelowTable {
        elevation_deg: f64,
        first_row_deg: f64,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: line {line}: time column is not strictly increasing")]
    NonMonotonicTime { path: PathBuf, line: u64 },

    #[error("{path}: line {line}: loss {loss_db} dB is negative")]
    LossOutOfRange {
        path: PathBuf,
        line: u64,
        loss_db: f64,
    },

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("division by zero: {0}")]
    ZeroDivision(&'static str),

    #[error("intensities are degenerate: mu1 - mu2 = {gap:e}")]
    DegenerateIntensities { gap: f64 },

    #[error("pulse budget {n_pulses:e} exceeds the Monte Carlo limit {limit:e}")]
    BudgetTooLarge { n_pulses: f64, limit: f64 },

    #[error("optimizer found no feasible point in {evals} evaluations")]
    NoFeasiblePoint { evals: usize },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ZeroDivision(_)
            | Error::DegenerateIntensities { .. }
            | Error::NoFeasiblePoint { .. }
            | Error::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_input_from_numerics() {
        assert_eq!(Error::config("qkd.mu2", "bad").exit_code(), 1);
        assert_eq!(Error::domain("eta", 2.0, "[0, 1]").exit_code(), 1);
        assert_eq!(Error::Numerical("diverged".into()).exit_code(), 2);
        assert_eq!(Error::NoFeasiblePoint { evals: 10 }.exit_code(), 2);
        assert_eq!(Error::DegenerateIntensities { gap: 0.0 }.exit_code(), 2);
    }
}
