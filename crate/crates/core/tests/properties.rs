use graph_heat_control::control::{gramian, hautus_obstruction, synth_control, HAUTUS_TOL};
use graph_heat_control::families::{self, random_connected};
use graph_heat_control::graph::{build_cyclic_cover, WeightedGraph};
use graph_heat_control::observability::{exact_obs_constant, up_sharp_constant, OBS_RESOLUTION};
use graph_heat_control::stochastic::{necessity_bounds_check, sample_ctmc_path};
use graph_heat_control::{eigendecompose, EnergyInterval, Error, VertexSet};
use nalgebra::{Complex, DVector};
use proptest::prelude::*;

fn graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
    (1..=max_n, 0.0..0.6f64, any::<u64>())
        .prop_map(|(n, p, seed)| random_connected(n, p, seed).unwrap())
}

fn vector(n: usize, seed: u64) -> DVector<f64> {
    let mut s = seed;
    DVector::from_fn(n, |_, _| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}

fn subset(n: usize, mask: u64) -> VertexSet {
    VertexSet::new(n, (0..n).filter(|&x| mask >> (x % 64) & 1 == 1))
}

fn rel_close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax().max(b.amax()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_laws(g in graph(12), t in 0.0..5.0f64, s in 0.0..5.0f64, seed in any::<u64>()) {
        let sd = eigendecompose(&g).unwrap();
        let n = g.len();
        let f = vector(n, seed);
        let h = vector(n, seed ^ 1);
        let st_f = sd.semigroup_apply(t, &f).unwrap();

        prop_assert!(sd.norm(&st_f) <= sd.norm(&f) * (1.0 + 1e-12));

        let composed = sd.semigroup_apply(s, &st_f).unwrap();
        prop_assert!(rel_close(&composed, &sd.semigroup_apply(t + s, &f).unwrap(), 1e-10));

        let lhs = sd.inner(&st_f, &h);
        let rhs = sd.inner(&f, &sd.semigroup_apply(t, &h).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));

        let mass = |v: &DVector<f64>| (0..n).map(|x| v[x] * g.measure(x)).sum::<f64>();
        prop_assert!((mass(&st_f) - mass(&f)).abs() <= 1e-10 * (1.0 + mass(&f).abs()));

        let positive = f.map(f64::abs);
        let evolved = sd.semigroup_apply(t, &positive).unwrap();
        prop_assert!(evolved.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn complex_states_evolve_componentwise(g in graph(8), t in 0.0..3.0f64, seed in any::<u64>()) {
        let sd = eigendecompose(&g).unwrap();
        let re = vector(g.len(), seed);
        let im = vector(g.len(), !seed);
        let z = re.zip_map(&im, Complex::new);
        let evolved = sd.semigroup_apply(t, &z).unwrap();
        let re_t = sd.semigroup_apply(t, &re).unwrap();
        let im_t = sd.semigroup_apply(t, &im).unwrap();
        prop_assert!(rel_close(&evolved.map(|c| c.re), &re_t, 1e-12));
        prop_assert!(rel_close(&evolved.map(|c| c.im), &im_t, 1e-12));
    }

    #[test]
    fn projections_and_dissipation(g in graph(12), level in 0.0..6.0f64, tau in 0.0..3.0f64, seed in any::<u64>()) {
        let sd = eigendecompose(&g).unwrap();
        let f = vector(g.len(), seed);
        let interval = EnergyInterval::at_most(level);
        let p = sd.spectral_projection(&interval, &f).unwrap();
        prop_assert!(rel_close(&sd.spectral_projection(&interval, &p).unwrap(), &p, 1e-10));
        let rest = &f - &p;
        prop_assert!(sd.inner(&p, &rest).abs() <= 1e-10 * (1.0 + sd.norm(&f).powi(2)));

        // Components above the cutoff decay at least at rate `level`.
        let evolved = sd.semigroup_apply(tau, &rest).unwrap();
        let high = &evolved - sd.spectral_projection(&interval, &evolved).unwrap();
        prop_assert!(sd.norm(&high) <= (-tau * level).exp() * sd.norm(&rest) * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn sharp_constant_monotone_in_control_set(g in graph(8), small in any::<u64>(), extra in any::<u64>(), level in 0.0..6.0f64) {
        let sd = eigendecompose(&g).unwrap();
        let n = g.len();
        let d = subset(n, small);
        let bigger = subset(n, small | extra);
        let interval = EnergyInterval::at_most(level);
        let c = up_sharp_constant(&sd, &d, &interval);
        let c_big = up_sharp_constant(&sd, &bigger, &interval);
        prop_assert!(c_big <= c * (1.0 + 1e-9) || c.is_infinite());
        if !sd.indices_in(&interval).is_empty() {
            prop_assert!(c >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn full_observation_constant_finite_and_nonincreasing(g in graph(10), t in 0.1..4.0f64, dt in 0.0..2.0f64) {
        let sd = eigendecompose(&g).unwrap();
        let all = g.all_vertices();
        let c1 = exact_obs_constant(&sd, &all, t).unwrap();
        let c2 = exact_obs_constant(&sd, &all, t + dt).unwrap();
        prop_assert!(c1.is_finite());
        prop_assert!(c2 <= c1 * (1.0 + 1e-9));
    }

    #[test]
    fn infinite_observation_constant_iff_obstruction(g in graph(10), mask in any::<u64>(), t in 0.5..3.0f64) {
        let n = g.len();
        let mut d = subset(n, mask);
        if d.is_empty() {
            d = VertexSet::new(n, [0]);
        }
        let sd = eigendecompose(&g).unwrap();
        let blocked = !hautus_obstruction(&sd, &d, HAUTUS_TOL).is_empty();
        match exact_obs_constant(&sd, &d, t) {
            Ok(exact) => prop_assert_eq!(exact.is_infinite(), blocked),
            Err(Error::IllConditionedGramian { ratio }) => {
                prop_assert!(!blocked && ratio <= OBS_RESOLUTION);
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn gramian_symmetric_psd(g in graph(10), mask in any::<u64>(), t in 0.1..4.0f64, seed in any::<u64>()) {
        let n = g.len();
        let d = subset(n, mask | 1);
        let sd = eigendecompose(&g).unwrap();
        let q = gramian(&sd, &d, t).unwrap().vertex_matrix(&sd);
        let f = vector(n, seed);
        let h = vector(n, seed ^ 7);
        let lhs = sd.inner(&(&q * &f), &h);
        let rhs = sd.inner(&f, &(&q * &h));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!(sd.inner(&(&q * &f), &f) >= -1e-12);
    }

    #[test]
    fn tighter_targets_never_end_higher(g in graph(10), mask in any::<u64>(), t in 0.2..3.0f64, a in 0.05..1.0f64, b in 0.05..1.0f64, seed in any::<u64>()) {
        let n = g.len();
        let d = subset(n, mask | 1);
        let sd = eigendecompose(&g).unwrap();
        let f0 = vector(n, seed);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let reach = |alpha| synth_control(&sd, &d, t, &f0, alpha).map(|(_, r)| r);
        match (reach(lo), reach(hi)) {
            (Ok(r_lo), Ok(r_hi)) => {
                prop_assert!(r_lo.final_norm <= lo * r_lo.initial_norm * (1.0 + 1e-9));
                prop_assert!(r_lo.final_norm <= r_hi.final_norm * (1.0 + 1e-9) + 1e-14);
                prop_assert!(r_lo.energy >= r_hi.energy * (1.0 - 1e-9) - 1e-14);
            }
            (Err(Error::TargetUnreachable { .. }), _) => {
                prop_assert!(!hautus_obstruction(&sd, &d, HAUTUS_TOL).is_empty());
            }
            (lo, hi) => prop_assert!(false, "unexpected outcome {lo:?} / {hi:?}"),
        }
    }

    #[test]
    fn cyclic_cover_preserves_degrees(n in 3usize..9, k in 1usize..5, seed in any::<u64>()) {
        let base = random_connected(n, 0.0, seed).unwrap();
        let cyc = families::cycle(n).unwrap();
        for g in [&cyc, &base] {
            if let Ok(cover) = build_cyclic_cover(g, k) {
                for x in 0..cover.cover().len() {
                    let deg = cover.cover().degree(x);
                    let base_deg = cover.base().degree(cover.project(x));
                    prop_assert!((deg - base_deg).abs() <= 1e-12 * base_deg);
                }
            }
        }
    }

    #[test]
    fn necessity_bounds_on_random_graphs(g in graph(15), x_pick in any::<u64>(), t in 0.05..6.0f64) {
        let sd = eigendecompose(&g).unwrap();
        let n = g.len();
        if n < 2 {
            return Ok(());
        }
        let d = VertexSet::new(n, [0]);
        let x = 1 + (x_pick as usize % (n - 1));
        let rep = necessity_bounds_check(&sd, &d, x, &[0.0, t]).unwrap();
        prop_assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn ctmc_paths_follow_edges(g in graph(12), x0 in any::<u64>(), t in 0.1..5.0f64, seed in any::<u64>()) {
        let x0 = x0 as usize % g.len();
        let path = sample_ctmc_path(&g, x0, t, seed).unwrap();
        prop_assert_eq!(path.states[0], x0);
        for w in path.states.windows(2) {
            prop_assert!(g.weight(w[0], w[1]) > 0.0);
        }
        for w in path.jump_times.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        prop_assert_eq!(path.jump_times[0], 0.0);
        prop_assert!(path.jump_times.iter().all(|&j| j <= t));
        prop_assert_eq!(sample_ctmc_path(&g, x0, t, seed).unwrap().states, path.states);
    }
}
