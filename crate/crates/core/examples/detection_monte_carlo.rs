//! Expected detection statistics next to a pulse-level Monte Carlo run.

use qsat::channel::db_to_eta;
use qsat::detection::{
    expected_counts, monte_carlo_counts, CountStatistics, DetectorModel, ProtocolParams,
    PulseBudget,
};

fn main() -> qsat::Result<()> {
    let params = ProtocolParams::default();
    let detector = DetectorModel::default();
    let budget = PulseBudget::pulses(1e7);
    let eta = db_to_eta(30.0);

    let expected = expected_counts(&params, eta, &budget, &detector);
    let (observed, truth) = monte_carlo_counts(&params, eta, &budget, &detector, 11)?;

    println!("{:<12} {:>12} {:>10} {:>8}", "count", "expected", "observed", "z");
    for ((name, e), o) in CountStatistics::FIELD_NAMES
        .iter()
        .zip(expected.as_array())
        .zip(observed.as_array())
    {
        let z = (o - e) / e.max(1.0).sqrt();
        println!("{name:<12} {e:12.1} {o:10} {z:8.2}");
    }
    println!("\nground truth: {truth:?}");
    Ok(())
}
