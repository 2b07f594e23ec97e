//! Filtrations, adapted projection and the pairing with the orthogonal
//! complement of adapted processes.

use stochdual::{ScenarioTree, StochasticProcess};

fn main() -> stochdual::Result<()> {
    // three periods of a binomial model with up probability 0.4
    let tree = ScenarioTree::binary(3, 0.4)?;
    println!("{} leaves, {} stages", tree.leaf_count(), tree.stage_count());
    for t in 0..tree.stage_count() {
        println!("stage {t}: blocks {:?}", tree.blocks(t));
    }

    let dims = vec![1; tree.stage_count()];
    let raw = StochasticProcess::from_fn(&dims, tree.leaf_count(), |t, l, _| (t + 1) as f64 * (l as f64 - 3.5));
    let x = tree.adapted_projection(&raw)?;
    let v = raw.sub(&x)?;
    println!("raw adapted: {}, projection adapted: {}", tree.is_adapted(&raw), tree.is_adapted(&x));

    let report = tree.in_orthocomplement(&v, 1e-12);
    println!("raw - projection orthogonal to adapted processes: {} (residual {:.1e})", report.holds, report.residual);
    println!("E[x . v] = {:.3e}", tree.pairing(&x, &v)?);
    Ok(())
}
