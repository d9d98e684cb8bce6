//! Builds the contour of one tree observed up to a fixed level and splits
//! it at the visits of that level, one piece per individual alive there.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splitree::levy::LifetimeLaw;
use splitree::tree::{decompose_contour, TreeSimulator};

pub fn run_example() -> splitree::Result<()> {
    let lifetimes = LifetimeLaw::exponential(1.0)?;
    let horizon = 1.5;
    let sim = TreeSimulator::new(1.2, &lifetimes)?.with_horizon(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // keep drawing until the tree survives to the horizon with a few individuals
    let tree = loop {
        let (tree, _) = sim.run(&mut rng);
        if tree.population(horizon) >= 3 {
            break tree;
        }
    };
    println!("{} individuals born, {} alive at t = {horizon}", tree.individuals().len(), tree.population(horizon));

    let contour = tree.contour(horizon)?;
    println!("contour: {} jumps, total length {:.4}", contour.jumps().len(), contour.lifetime());
    let pieces = decompose_contour(&contour, horizon)?;
    for (k, piece) in pieces.iter().enumerate() {
        match (piece.undershoot, piece.overshoot) {
            (Some(age), Some(residual)) => {
                println!("piece {k}: length {:.4}, next age {age:.4}, residual {residual:.4}", piece.path.lifetime())
            }
            _ => println!("piece {k}: length {:.4}, runs to the end", piece.path.lifetime()),
        }
    }

    let mut tree_pairs = tree.ages_residuals(horizon);
    let mut path_pairs: Vec<(f64, f64)> = pieces.iter().filter_map(|p| Some((p.undershoot?, p.overshoot?))).collect();
    tree_pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    path_pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let same = tree_pairs.len() == path_pairs.len()
        && tree_pairs.iter().zip(&path_pairs).all(|(a, b)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    println!("ages and residuals read off the contour match the tree: {same}");
    Ok(())
}

fn main() -> splitree::Result<()> {
    run_example()
}
