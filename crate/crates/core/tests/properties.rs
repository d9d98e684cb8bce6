//! Property tests over random parameters, seeds and datasets.

mod common;

use proptest::prelude::*;
use splitree::epidemic::{fit, log_likelihood, FitOptions, Outbreak, OutbreakDataset, StayDistribution};
use splitree::excursion::build_killed_reflected;
use splitree::levy::{LaplaceExponent, LifespanMeasure, LifetimeLaw};
use splitree::numeric::integrate;
use splitree::rng::replicate_rng;
use splitree::scale::ScaleTable;
use splitree::tree::{decompose_contour, TreeSimulator};

fn exponent(b: f64, d: f64) -> LaplaceExponent {
    LaplaceExponent::new(LifespanMeasure::exponential(b, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_increases_beyond_its_largest_root(b in 0.05f64..4.0, d in 0.1f64..3.0, x in 0.0f64..5.0, gap in 1e-3f64..5.0) {
        let e = exponent(b, d);
        let a1 = e.eta() + x;
        prop_assert!(e.psi(a1 + gap) > e.psi(a1));
    }

    #[test]
    fn phi_inverts_psi(b in 0.05f64..4.0, d in 0.1f64..3.0, log_q in -4.0f64..4.0) {
        let e = exponent(b, d);
        let q = 10f64.powf(log_q);
        let phi = e.phi(q).unwrap();
        prop_assert!(((e.psi(phi) - q) / q).abs() < 1e-10);
        prop_assert!(phi >= q * (1.0 - 1e-12));
        let (root, _) = common::roots(b, d, q);
        prop_assert!((phi - root).abs() < 1e-9 * root.max(1.0));
    }

    #[test]
    fn psi_closed_form_matches_quadrature(b in 0.05f64..4.0, d in 0.1f64..3.0, log_a in -2.0f64..2.0) {
        let e = exponent(b, d);
        let a = 10f64.powf(log_a);
        let exact = common::psi(b, d, a);
        prop_assert!((e.psi(a) - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        prop_assert!((e.psi_by_quadrature(a) - exact).abs() <= 1e-9 * exact.abs().max(1e-3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scale_table_matches_partial_fractions(b in 0.1f64..2.0, d in 0.5f64..2.0, q in 0.0f64..1.0) {
        let e = exponent(b, d);
        let table = ScaleTable::build(&e, q, 1e-3, 5.0).unwrap();
        // trapezoid error is O(h²) times the squared rates of the model
        let tol = 1e-6 * (b + d + q).powi(2).max(1.0);
        for x in [0.0, 0.3, 1.0, 2.5, 5.0] {
            let exact = common::scale(b, d, q, x);
            prop_assert!((table.w(x).unwrap() - exact).abs() / exact < tol, "x = {}", x);
            let int = common::scale_integral(b, d, q, x);
            prop_assert!((table.integral(x).unwrap() - int).abs() <= tol * int.max(1.0));
        }
    }

    #[test]
    fn g_complement_is_the_tail_convolution(t in 0.05f64..6.0, q in 0.05f64..1.0) {
        let e = exponent(0.8, 1.0);
        let table = ScaleTable::build(&e, q, 1e-3, 6.0).unwrap();
        let m = e.measure();
        let conv = integrate(|a| table.w(t - a).unwrap() * m.tail(a), 0.0, t, 1e-12, 1e-10).value;
        let lhs = 1.0 - table.g(t).unwrap();
        prop_assert!((lhs - conv / table.w(t).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn contour_decomposition_recovers_ages_and_residuals(seed in any::<u64>(), t in 0.1f64..3.0) {
        let law = LifetimeLaw::exponential(1.0).unwrap();
        let sim = TreeSimulator::new(1.1, &law).unwrap().with_horizon(t).unwrap();
        let (tree, _) = sim.run(&mut replicate_rng(seed, 0));
        let pieces = decompose_contour(&tree.contour(t).unwrap(), t).unwrap();
        let mut read: Vec<(f64, f64)> = pieces.iter().filter_map(|p| Some((p.undershoot?, p.overshoot?))).collect();
        let mut truth = tree.ages_residuals(t);
        read.sort_by(|a, b| a.partial_cmp(b).unwrap());
        truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(read.len(), tree.population(t));
        prop_assert_eq!(read, truth);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vervaat_output_is_positive_until_the_end_and_inverts(seed in any::<u64>()) {
        let m = LifespanMeasure::exponential(0.8, 1.0).unwrap();
        let k = build_killed_reflected(&m, 0.3, &mut replicate_rng(seed, 0)).unwrap();
        if let Some(v) = k.vervaat().unwrap() {
            let z = &v.path;
            prop_assert_eq!(z.terminal(), 0.0);
            prop_assert_eq!(z.jumps()[0].time, 0.0);
            for j in z.jumps() {
                prop_assert!(z.after(j) > 0.0);
                if j.time > 0.0 {
                    prop_assert!(j.before > 0.0, "touches 0 at {}", j.time);
                }
            }
            let source = k.path.as_ref().unwrap();
            let back = v.invert();
            prop_assert_eq!(back.jumps().len(), source.jumps().len());
            for (a, b) in back.jumps().iter().zip(source.jumps()) {
                prop_assert!((a.time - b.time).abs() <= 1e-12 * (1.0 + b.time));
                prop_assert!((a.before - b.before).abs() <= 1e-12 * (1.0 + b.before.abs()));
                prop_assert!((a.after_raw - b.after_raw).abs() <= 1e-12 * (1.0 + b.after_raw.abs()));
            }
        }
    }

    #[test]
    fn size_part_separates_from_durations(
        sizes in prop::collection::vec(1usize..5, 1..30),
        g1 in 0.01f64..0.99,
        g1_other in 0.01f64..0.99,
        log_g2 in -2.0f64..2.0,
        log_g2_other in -2.0f64..2.0,
    ) {
        let data = dataset(&sizes);
        let stay = StayDistribution::exponential(1.0).unwrap();
        let (g2, g2_other) = (10f64.powf(log_g2), 10f64.powf(log_g2_other));
        let diff = |g2: f64| log_likelihood(&data, &stay, g1, g2).unwrap() - log_likelihood(&data, &stay, g1_other, g2).unwrap();
        prop_assert!((diff(g2) - diff(g2_other)).abs() < 1e-12 * (1.0 + diff(g2).abs()) * sizes.len() as f64);
    }

    #[test]
    fn g1_hat_is_outbreaks_over_carriers(sizes in prop::collection::vec(1usize..6, 2..40), scale in 0.2f64..5.0) {
        let data = dataset(&sizes);
        let stay = StayDistribution::exponential(1.0).unwrap();
        let scaled = OutbreakDataset::new(
            data.outbreaks.iter().map(|o| Outbreak { durations: o.durations.iter().map(|y| y * scale).collect(), ..o.clone() }).collect(),
        ).unwrap();
        let expected = sizes.len() as f64 / sizes.iter().sum::<usize>() as f64;
        let options = FitOptions { intervals: false };
        prop_assert_eq!(fit(&data, &stay, &options).unwrap().g1_hat, expected);
        prop_assert_eq!(fit(&scaled, &stay, &options).unwrap().g1_hat, expected);
    }
}

fn dataset(sizes: &[usize]) -> OutbreakDataset {
    let mut k = 0u32;
    let outbreaks = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| Outbreak {
            id: i.to_string(),
            hospital: None,
            durations: (0..n)
                .map(|_| {
                    k += 1;
                    0.1 + (k as f64 * 0.618_033_988_75).fract() * 3.0
                })
                .collect(),
        })
        .collect();
    OutbreakDataset::new(outbreaks).unwrap()
}

#[test]
fn grid_refinement_is_second_order() {
    let e = exponent(0.8, 1.0);
    let at = |h: f64| ScaleTable::build(&e, 0.3, h, 10.0).unwrap().w(10.0).unwrap();
    let (coarse, mid, fine) = (at(4e-3), at(2e-3), at(1e-3));
    let order = ((coarse - mid) / (mid - fine)).abs().log2();
    assert!(order >= 1.8, "observed order {order}");
}
