//! Heat started far from a single control vertex on P101 barely reaches it:
//! the observed mass is squeezed by a Poisson tail.

use graph_heat_control::stochastic::{erlang_tail, far_vertex_sequence, necessity_bounds_check};
use graph_heat_control::{eigendecompose, families, VertexSet};

fn main() -> graph_heat_control::Result<()> {
    let g = families::path(101)?;
    let sd = eigendecompose(&g)?;
    let d = VertexSet::new(101, [0]);
    let far = far_vertex_sequence(&g, &d, 6)?;
    println!("far vertices: {:?}", far.vertices);

    for x in [5, 20, 50] {
        let rep = necessity_bounds_check(&sd, &d, x, &[0.1, 1.0, 5.0, 10.0])?;
        for row in &rep.rows {
            println!(
                "x = {x:>2} t = {:>4}: observed mass {:.3e}, Erlang bound {:.3e}, norm {:.3e} >= {:.3e}",
                row.t, row.restricted_sq, row.erlang_bound, row.norm, row.lower_bound
            );
        }
    }
    println!("P(Poisson(2) >= 3) = {}", erlang_tail(2.0, 1.0, 3));
    println!("observed masses below about 1e-32 are rounding noise in the spectral evaluation");
    Ok(())
}
