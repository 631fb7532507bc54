//! Minimum-energy control on P6 driven from one end, re-simulated with an
//! independent quadrature of the Duhamel integral.

use graph_heat_control::control::{synth_control, verify_control_with, Duhamel};
use graph_heat_control::{eigendecompose, families, VertexSet};
use nalgebra::DVector;

fn main() -> graph_heat_control::Result<()> {
    let g = families::path(6)?;
    let sd = eigendecompose(&g)?;
    let d = VertexSet::new(6, [0]);
    let f0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);

    for alpha in [0.8, 0.5, 0.2, 0.05] {
        let (u, res) = synth_control(&sd, &d, 2.0, &f0, alpha)?;
        let check = verify_control_with(&sd, &f0, &u, Duhamel::Quadrature)?;
        let costs = u.costs()?;
        println!(
            "alpha {alpha:<5} reached {:.6} nu {:?} L1 {:.4} L2 {:.4} Linf {:.4} quadrature gap {:.2e}",
            res.achieved_alpha,
            res.nu,
            costs.l1,
            costs.l2,
            costs.linf,
            (check.final_vector() - res.final_vector()).norm()
        );
    }
    Ok(())
}
