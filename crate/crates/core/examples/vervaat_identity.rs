//! The tree stopped at the first ring against the Lévy-side construction:
//! concatenated excursions killed at an exponential time, rotated at their
//! minimum.

use splitree::levy::LifespanMeasure;
use splitree::stats;
use splitree::tree::Caps;
use splitree::verify::{histogram, sample_killed_paths, sample_trees};

pub fn run_example() -> splitree::Result<()> {
    let measure = LifespanMeasure::exponential(0.8, 1.0)?;
    let delta = 0.3;
    let reps = 20_000;
    let trees = sample_trees(&measure, delta, reps, 1, Caps::default())?;
    let paths = sample_killed_paths(&measure, delta, reps, 2)?;

    println!("tree side: {} detections, path side: {} nonempty paths", trees.detected(), paths.counts.len());
    let counts = stats::chi_square_homogeneity(&trees.count_histogram(), &histogram(&paths.counts));
    let times = stats::ks_two_sample(&trees.times, &paths.depths);
    let ages = stats::ks_two_sample(&trees.ages, &paths.undershoots);
    println!("carrier count vs excursion count: chi2 = {:.3}, p = {:.3}", counts.statistic, counts.p_value);
    println!("detection time vs depth:          D = {:.4}, p = {:.3}", times.statistic, times.p_value);
    println!("carrier ages vs undershoots:      D = {:.4}, p = {:.3}", ages.statistic, ages.p_value);
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
