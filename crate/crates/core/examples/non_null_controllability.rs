//! Controlling C12 from its even vertices: an eigenfunction at energy 2
//! vanishes on D, so its component of the state cannot be removed.

use graph_heat_control::control::{hautus_obstruction, synth_control, HAUTUS_TOL};
use graph_heat_control::observability::exact_obs_constant;
use graph_heat_control::{eigendecompose, families, Error};
use nalgebra::DVector;

fn main() -> graph_heat_control::Result<()> {
    let g = families::cycle(12)?;
    let sd = eigendecompose(&g)?;
    let d = families::parity_subset(&g, true);
    let obs = hautus_obstruction(&sd, &d, HAUTUS_TOL);
    for o in &obs {
        println!("lambda = {} with {} invisible direction(s)", o.eigenvalue, o.vectors.len());
    }
    println!("exact observability constant: {}", exact_obs_constant(&sd, &d, 1.0)?);

    let phi = &obs[0].vectors[0];
    let f0 = DVector::from_element(12, 1.0) + phi;
    let floor = (-2.0f64).exp() * sd.inner(&f0, phi).abs() / sd.norm(&f0);
    println!("reachable floor at T = 1: {floor:.6}");
    for alpha in [0.5, 1.01 * floor, 0.5 * floor] {
        match synth_control(&sd, &d, 1.0, &f0, alpha) {
            Ok((_, r)) => println!("alpha {alpha:.6}: reached {:.6}", r.achieved_alpha),
            Err(Error::TargetUnreachable { target, floor }) => {
                println!("alpha {target:.6}: unreachable, floor {floor:.6}")
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
