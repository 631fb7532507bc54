//! Observation constants on a random graph and a probe-based check of the
//! resulting estimate, compared against the optimal constant.

use graph_heat_control::families::corpus_instance;
use graph_heat_control::observability::{exact_obs_constant, verify_weak_obs, weak_obs_constants};
use graph_heat_control::eigendecompose;

fn main() -> graph_heat_control::Result<()> {
    let (g, d) = corpus_instance(3, 8, 16);
    let sd = eigendecompose(&g)?;
    println!("n = {}, |D| = {}", g.len(), d.len());
    for r in [1.0, 2.0, f64::INFINITY] {
        let c = weak_obs_constants(&g, &sd, &d, 1.0, 0.5, r)?;
        let v = verify_weak_obs(&sd, &d, &c, 200, 0)?;
        println!(
            "r = {r}: lambda {:.4e} kappa {:.4e} K {:.4e} alpha {:.4e} min slack {:.4e} ({:?})",
            c.lambda, c.kappa, c.k, c.alpha, v.min_slack, v.worst
        );
    }
    println!("optimal L2 constant at T = 1: {:.4}", exact_obs_constant(&sd, &d, 1.0)?);
    Ok(())
}
