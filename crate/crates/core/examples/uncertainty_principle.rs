//! Spectral inequality for low energies on C4 with D = {0, 2}, then a sweep
//! over every cutoff on a small torus.

use graph_heat_control::observability::{up_bounds, up_sharp_constant, up_sweep};
use graph_heat_control::{eigendecompose, families, EnergyInterval, VertexSet};

fn main() -> graph_heat_control::Result<()> {
    let c4 = families::cycle(4)?;
    let sd = eigendecompose(&c4)?;
    let d = VertexSet::new(4, [0, 2]);
    for level in [0.1, 1.0, 2.5, 4.0] {
        let interval = EnergyInterval::at_most(level);
        println!("sup I = {level}: sharp constant {}", up_sharp_constant(&sd, &d, &interval));
    }
    let rep = up_bounds(&c4, &sd, &d, &EnergyInterval::at_most(0.1))?;
    println!("threshold {:.4e}, bound {:?}", rep.threshold, rep.guaranteed_bound);

    let torus = families::torus(3, 4)?;
    let sd = eigendecompose(&torus)?;
    let d = families::parity_subset(&torus, true);
    println!("{:>10} {:>12} {:>14}", "sup I", "sharp", "bound");
    for r in up_sweep(&torus, &sd, &d)? {
        println!("{:>10.4} {:>12.4e} {:>14}", r.sup_i, r.sharp_constant, format!("{:?}", r.guaranteed_bound));
    }
    Ok(())
}
