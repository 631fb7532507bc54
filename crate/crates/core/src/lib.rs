//! Controllability, weak observability and uncertainty principles for the
//! heat equation `ḟ = -Hf + 1_D u` on finite weighted graphs.
//!
//! The crate computes everything exactly on finite graphs through the
//! m-orthonormal eigendecomposition of the weighted Laplacian, and
//! cross-checks the semigroup against the continuous-time random walk it
//! generates.
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | weighted graphs, metrics, covering radius / inradius, covers, Følner ratios |
//! | [`spectral`] | Laplacian, eigendecomposition, heat semigroup, spectral projections, time norms |
//! | [`observability`] | uncertainty-principle constants and weak observability |
//! | [`control`] | Gramian, minimal-energy controls, Hautus obstructions, stabilization |
//! | [`stochastic`] | random-walk sampling, Feynman–Kac estimates, Erlang tail bounds |
//! | [`scenario`] | JSON scenario runner behind the `ghc` binary |
//! | [`families`] | paths, cycles, tori, random graphs and control sets |
//! | [`quadrature`] | adaptive Simpson and golden-section search |
//! | [`report`] | round-trip float formatting, JSON and CSV output |
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod control;
pub mod error;
pub mod families;
pub mod graph;
pub mod observability;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};
pub use graph::{build_graph, GraphSpec, MetricKind, VertexSet, WeightedGraph};
pub use spectral::{eigendecompose, EnergyInterval, SpectralDecomposition};
