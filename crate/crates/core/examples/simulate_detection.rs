//! Simulates splitting trees until the first clock ring and compares the
//! number of carriers found with its geometric law.

use splitree::laws::DetectionLaw;
use splitree::levy::{LaplaceExponent, LifespanMeasure};
use splitree::verify::sample_trees;
use splitree::tree::Caps;

pub fn run_example() -> splitree::Result<()> {
    let measure = LifespanMeasure::exponential(0.8, 1.0)?;
    let delta = 0.3;
    let sample = sample_trees(&measure, delta, 20_000, 7, Caps::default())?;
    let law = DetectionLaw::new(&LaplaceExponent::new(measure), delta, 1e-3, 20.0)?;

    println!(
        "detected {} of {} trees (expected fraction {:.4}), {} capped",
        sample.detected(),
        sample.trials,
        law.detection_probability(),
        sample.capped
    );
    let hist = sample.count_histogram();
    let detected = sample.detected() as f64;
    println!("{:>3} {:>10} {:>10}", "n", "observed", "expected");
    for (i, &c) in hist.iter().take(8).enumerate() {
        let n = i as u64 + 1;
        println!("{n:>3} {:>10.4} {:>10.4}", c as f64 / detected, law.pmf_nt_given_detection(n)?);
    }
    let mean_age = sample.ages.iter().sum::<f64>() / sample.ages.len() as f64;
    println!("mean carrier age {mean_age:.4} (1/1.6 = 0.625 for this model)");
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
