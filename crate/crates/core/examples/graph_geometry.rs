//! Distances, covering radius, inradius and ball volumes on a weighted path.

use graph_heat_control::graph::{GraphMetric, MetricKind};
use graph_heat_control::{build_graph, GraphSpec, VertexSet};

fn main() -> graph_heat_control::Result<()> {
    let mut spec = GraphSpec::default();
    for (id, m) in [("a", 1.0), ("b", 2.0), ("c", 1.0), ("d", 0.5), ("e", 1.0)] {
        spec.vertex(id, m);
    }
    spec.edge("a", "b", 2.0).edge("b", "c", 0.5).edge("c", "d", 1.0).edge("d", "e", 4.0);
    let g = build_graph(&spec)?;
    let d = g.subset(&["a", "e"])?;
    let omega = d.complement();

    for kind in [MetricKind::Combinatorial, MetricKind::Length] {
        let metric = GraphMetric::new(&g, kind);
        let inr = metric.inradius(&omega)?;
        println!("{kind:?}");
        println!("  d(a, e)       = {}", metric.distance(0, 4));
        println!("  Covr(D)       = {}", metric.covering_radius(&d)?);
        println!("  Inr(X \\ D)    = {inr}");
        println!("  vol(Inr)      = {}", metric.max_ball_volume(&g, inr));
        let ball: Vec<_> = metric.open_ball(2, 1.5).iter().map(|x| g.id(x)).collect();
        println!("  U_1.5(c)      = {ball:?}");
    }

    let lonely = VertexSet::new(g.len(), [2]);
    println!("Covr_L({{c}}) = {}", GraphMetric::new(&g, MetricKind::Length).covering_radius(&lonely)?);
    Ok(())
}
