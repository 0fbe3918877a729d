//! The verification battery, at the default discount and at `gamma = 0`.
//!
//! ```bash
//! cargo run -p eigenpath --example verify_battery
//! ```

use eigenpath::experiments::{run_battery, ExperimentConfig, RateInstance};

fn main() -> eigenpath::Result<()> {
    for (label, cfg) in [
        ("default", ExperimentConfig::default()),
        (
            "gamma = 0",
            ExperimentConfig {
                gamma: 0.0,
                ..Default::default()
            },
        ),
        (
            "identity rate instance",
            ExperimentConfig {
                rate_instance: RateInstance::Identity,
                ..Default::default()
            },
        ),
    ] {
        let report = run_battery(&cfg)?;
        println!("== {label}: {}", if report.passed() { "all pass" } else { "FAILED" });
        print!("{report}");
    }
    Ok(())
}
