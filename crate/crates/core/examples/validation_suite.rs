//! A reduced run of the Monte Carlo validation suite.

use qsat::scenario::ScenarioConfig;
use qsat::validate::{run_validation, ValidationPlan};

fn main() -> qsat::Result<()> {
    let plan = ValidationPlan {
        trials: 20,
        containment_pulses: 2e6,
        agreement_pulses: 1e6,
        chernoff_trials: 2000,
        skip_reruns: true,
        ..Default::default()
    };
    let report = run_validation(&ScenarioConfig::default(), &plan)?;
    print!("{}", report.table());
    println!("X-basis QBER estimator minus direct tally: {:+.4}", report.qber_x_offset);
    Ok(())
}
