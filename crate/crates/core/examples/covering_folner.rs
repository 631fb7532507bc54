//! Cyclic covers of C4, lifted eigenfunctions and exact Følner ratios.

use graph_heat_control::graph::{
    build_cyclic_cover, folner_ratio_exact, lemma_sets, lift_function, validate_covering,
};
use graph_heat_control::{families, VertexSet};

fn main() -> graph_heat_control::Result<()> {
    let base = families::cycle(4)?;
    let cover = build_cyclic_cover(&base, 3)?;
    println!("C{} -> C4 valid: {:?}", cover.cover().len(), validate_covering(&cover).is_ok());
    println!("fiber over 1: {:?}", cover.fiber(1).members());
    println!("lifted (0,1,0,-1): {:?}", lift_function(&cover, &[0, 1, 0, -1])?);

    let g = cover.cover();
    let n = g.len();
    for half in 0..(n - 1) / 2 {
        let seg = VertexSet::new(n, (0..=2 * half).map(|i| (i + n - half) % n));
        println!("segment of {} vertices: ratio {}", seg.len(), folner_ratio_exact(g, &seg)?);
    }

    let sets = lemma_sets(&cover, 0, &VertexSet::new(n, [0]), 2)?;
    println!("Z = {:?}, ratio {}", sets.z.members(), sets.ratio);
    Ok(())
}
