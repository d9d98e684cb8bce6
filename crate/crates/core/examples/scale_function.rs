//! Tabulates the scale function of the contour process and checks it
//! against the closed form available for exponential lifetimes.

use splitree::levy::{LaplaceExponent, LifespanMeasure};
use splitree::scale::ScaleTable;

pub fn run_example() -> splitree::Result<()> {
    let exponent = LaplaceExponent::new(LifespanMeasure::exponential(0.8, 1.0)?);
    let q = 0.3;
    let table = ScaleTable::build(&exponent, q, 1e-3, 10.0)?;
    println!("phi(q) = {:.6}", table.phi_q());

    let exact = |x: f64| (1.6 * (0.6 * x).exp() - 0.5 * (-0.5 * x).exp()) / 1.1;
    let mut worst: f64 = 0.0;
    for x in table.grid() {
        worst = worst.max((table.w(x)? - exact(x)).abs() / exact(x));
    }
    println!("max relative error on [0, 10]: {worst:.2e}");

    println!("{:>6} {:>12} {:>12} {:>10}", "x", "W", "int W", "G");
    for x in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        println!("{x:>6.2} {:>12.6} {:>12.6} {:>10.6}", table.w(x)?, table.integral(x)?, table.g(x)?);
    }

    // the table's Laplace transform should be 1/(psi(a) - q) beyond phi(q)
    for a in [1.0, 2.0, 4.0] {
        let numeric = table.laplace_transform(a)?;
        let exact = 1.0 / (exponent.psi(a) - q);
        println!("a = {a}: transform {numeric:.8} vs {exact:.8}");
    }
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
