//! Simulates hospital outbreaks with exponential lengths of stay and
//! recovers the transmission and detection rates by maximum likelihood.

use splitree::epidemic::{fit, fit_per_hospital, simulate_outbreaks, FitOptions, StayDistribution};
use splitree::tree::Caps;

pub fn run_example() -> splitree::Result<()> {
    let stay = StayDistribution::exponential(1.0)?;
    let (b, delta) = (0.8, 0.3);
    let sim = simulate_outbreaks(&stay, b, delta, 500, 2024, 1_000_000, Caps::default())?;
    let mut data = sim.dataset();
    println!("{} outbreaks from {} trees, {} carriers", data.count(), sim.attempts, data.carriers());

    let est = fit(&data, &stay, &FitOptions::default())?;
    println!("status {:?}", est.status);
    println!("b     = {:.4}  interval {:?}", est.b_hat, est.b_interval.map(|i| (i.lower, i.upper)));
    println!("delta = {:.4}  interval {:?}", est.delta_hat, est.delta_interval.map(|i| (i.lower, i.upper)));

    // pretend the outbreaks came from two hospitals
    for (k, o) in data.outbreaks.iter_mut().enumerate() {
        o.hospital = Some(if k % 2 == 0 { "north".into() } else { "south".into() });
    }
    let pooled = fit_per_hospital(&data, &stay)?;
    for (h, r) in &pooled.hospitals {
        println!("{}: delta = {:.4}", h.as_deref().unwrap_or("-"), r.delta_hat);
    }
    if let Some(d) = pooled.delta_pooled {
        println!("pooled delta = {d:.4}");
    }
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
