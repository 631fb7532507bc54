//! Repeating a one-period control on K2 gives geometric decay at rate ln(alpha)/T.

use graph_heat_control::control::stabilize;
use graph_heat_control::{eigendecompose, families, VertexSet};
use nalgebra::DVector;

fn main() -> graph_heat_control::Result<()> {
    let g = families::path(2)?;
    let sd = eigendecompose(&g)?;
    let d = VertexSet::new(2, [0]);
    let f0 = DVector::from_vec(vec![1.0, 0.0]);
    let rep = stabilize(&sd, &d, 1.0, 0.5, 10, &f0)?;
    for (k, n) in rep.period_norms.iter().enumerate() {
        println!("k = {k:>2}: |f(kT)| = {n:.6e}");
    }
    println!(
        "omega {:.9} fitted {:.9} M {:.4} max envelope ratio {:.6}",
        rep.omega, rep.fitted_omega, rep.m, rep.max_envelope_ratio
    );
    Ok(())
}
