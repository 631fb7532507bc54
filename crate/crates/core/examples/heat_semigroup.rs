//! Heat flow on C6 from a point mass: mass is conserved, the state stays
//! nonnegative and the norm decays towards the constant state.

use graph_heat_control::{eigendecompose, families, EnergyInterval};
use nalgebra::DVector;

fn main() -> graph_heat_control::Result<()> {
    let g = families::cycle(6)?;
    let sd = eigendecompose(&g)?;
    println!("spectrum: {:?}", sd.eigenvalues());

    let f = DVector::from_fn(6, |x, _| if x == 0 { 1.0 } else { 0.0 });
    for t in [0.0, 0.25, 1.0, 4.0] {
        let ft = sd.semigroup_apply(t, &f)?;
        let mass: f64 = ft.iter().sum();
        println!("t = {t:<5} mass = {mass:.12} norm = {:.6} f = {:.4?}", sd.norm(&ft), ft.as_slice());
    }

    let low = sd.spectral_projection(&EnergyInterval::at_most(1.5), &f)?;
    println!("P_(-inf,1.5] delta_0 = {:.4?}", low.as_slice());
    Ok(())
}
