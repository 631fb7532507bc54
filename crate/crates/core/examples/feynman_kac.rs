//! Monte Carlo evaluation of the heat semigroup through random walks on C8,
//! compared with the spectral value.

use graph_heat_control::stochastic::{fk_estimate, sample_ctmc_path};
use graph_heat_control::{eigendecompose, families};
use nalgebra::DVector;

fn main() -> graph_heat_control::Result<()> {
    let g = families::cycle(8)?;
    let sd = eigendecompose(&g)?;
    let f = DVector::from_fn(8, |y, _| (y as f64 * 0.7).cos());

    let path = sample_ctmc_path(&g, 0, 2.0, 42)?;
    println!("sample path: {} jumps, states {:?}", path.jumps(), path.states);

    for t in [0.1, 0.5, 2.0] {
        let exact = sd.semigroup_apply(t, &f)?[3];
        let est = fk_estimate(&g, &f, t, 3, 20_000, 7)?;
        println!(
            "t = {t}: exact {exact:.6} estimate {:.6} +- {:.6} ({:.2} stderr)",
            est.mean,
            est.stderr,
            (est.mean - exact) / est.stderr
        );
    }
    Ok(())
}
