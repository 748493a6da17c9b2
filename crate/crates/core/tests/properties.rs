use avgproc::entropy::{local_entropy, relative_entropy};
use avgproc::mc::replica_stream;
use avgproc::sim::{lp_distance, simulate, Lp, MassConfig};
use avgproc::Graph;
use proptest::prelude::*;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |raw| {
        let s: f64 = raw.iter().sum();
        (s > 1e-6).then(|| raw.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn simulation_conserves_mass_and_contracts(eta in simplex(8), t in 0.0f64..3.0, seed in any::<u64>()) {
        let g = Graph::complete_bipartite(3, 5).unwrap();
        let xi = MassConfig::new(eta.clone()).unwrap();
        let out = simulate(&g, &xi, t, &mut replica_stream(seed, 0)).unwrap();
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
        prop_assert!(out.as_slice().iter().all(|&v| v >= 0.0));
        let max0 = eta.iter().copied().fold(0.0, f64::max);
        prop_assert!(out.as_slice().iter().all(|&v| v <= max0 + 1e-15));
        prop_assert!(lp_distance(out.as_slice(), Lp::L2).power <= lp_distance(&eta, Lp::L2).power + 1e-12);
        prop_assert!(relative_entropy(out.as_slice()) <= relative_entropy(&eta) + 1e-12);
    }

    #[test]
    fn averaging_lowers_entropy_by_local_entropy(eta in simplex(6), x in 0usize..6, y in 0usize..6) {
        prop_assume!(x != y);
        let xi = MassConfig::new(eta.clone()).unwrap();
        let after = xi.pair_update(x, y).unwrap();
        let drop = relative_entropy(&eta) - relative_entropy(after.as_slice());
        prop_assert!((drop - 2.0 / 6.0 * local_entropy(&eta, x, y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn l1_is_bounded_by_two(eta in simplex(10)) {
        let l1 = lp_distance(&eta, Lp::L1).power;
        prop_assert!((0.0..=2.0 + 1e-12).contains(&l1));
    }
}
