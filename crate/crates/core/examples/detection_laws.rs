//! Closed-form laws of the detection time, the number of carriers and
//! their ages, plus the population law at a fixed time.

use splitree::laws::{DetectionLaw, FixedTimeLaw};
use splitree::levy::{LaplaceExponent, LifespanMeasure};

pub fn run_example() -> splitree::Result<()> {
    let exponent = LaplaceExponent::new(LifespanMeasure::exponential(0.8, 1.0)?);
    let law = DetectionLaw::new(&exponent, 0.3, 1e-3, 20.0)?;
    println!("phi(delta) = {:.6}", law.phi());
    println!("P(detection) = {:.6}", law.detection_probability());
    println!("count given detection is geometric with parameter {:.6}", law.geometric_parameter());

    println!("{:>5} {:>10} {:>10} {:>14}", "y", "P(T<y)", "density", "P(N=1 | T<y)");
    for y in [0.5, 1.0, 2.0, 5.0] {
        println!(
            "{y:>5.1} {:>10.6} {:>10.6} {:>14.6}",
            law.cdf_t(y)?,
            law.density_t(y)?,
            law.pmf_nt_given_time_before(1, y)?
        );
    }

    println!("carrier age density, no window and window 2:");
    for a in [0.0, 0.5, 1.0, 1.5] {
        println!("  a = {a}: {:.6} {:.6}", law.age_density(f64::INFINITY, a)?, law.age_density(2.0, a)?);
    }

    let factors = law.survival_factors(1.0)?;
    let undetected: f64 = (0..40).map(|n| factors.pmf(n)).sum();
    println!("P(T > 1) = {undetected:.6}, from the cdf {:.6}", 1.0 - law.cdf_t(1.0)?);

    let fixed = FixedTimeLaw::new(&exponent, 1e-3, 20.0)?;
    println!("P(extinct by 2) = {:.6}", fixed.extinct_by(2.0)?);
    for n in 1..=3 {
        println!("P(N_2 = {n}) = {:.6}", fixed.pmf(n, 2.0)?);
    }
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
