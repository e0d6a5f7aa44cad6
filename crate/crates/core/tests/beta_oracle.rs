mod common;

use common::{close, random_system, random_table, Naive};
use locdep::bounds::{bound_general_beta, bound_main, nested_sums, DEFAULT_BUDGET};
use locdep::error::Error;
use locdep::moments::MomentTable;
use locdep::neighborhood::NeighborhoodSystem;
use proptest::prelude::*;

fn naive_narrow(sys: &NeighborhoodSystem, naive: &Naive, x: &[f64]) -> f64 {
    let n = sys.n();
    let mut acc = 0.0;
    for i in 0..n {
        let size = sys.a(i).len() as f64;
        for &j in sys.a(i) {
            for k in 0..n {
                if sys.a(i).contains(&k) || naive.n_sets[j].contains(&k) {
                    acc += size * x[j].powi(3) * x[k];
                }
            }
        }
    }
    acc
}

#[test]
fn beta_matches_naive_loops_on_random_systems() {
    for seed in 0..40u64 {
        let n = 2 + (seed as usize * 7) % 29;
        let sys = random_system(n, 1 + (seed as usize % 5), seed);
        let derived = sys.derive().unwrap();
        let naive = Naive::new(&sys);
        assert_eq!(naive.n_sets, derived.n_sets, "N sets, seed {seed}");
        let mut d = derived.d_sets.clone();
        d.iter_mut().for_each(|s| s.sort_unstable());
        assert_eq!(naive.d_sets, d, "D sets, seed {seed}");
        assert_eq!(naive.kappa_tau(), (derived.kappa, derived.tau));

        let table = random_table(n, derived.kappa, seed);
        let report = bound_general_beta(&table, &sys, &derived, DEFAULT_BUDGET).unwrap();
        let expect = naive.beta(&table.l4, table.sigma2);
        for (name, e) in ["beta1", "beta2", "beta3"].iter().zip(expect) {
            let got = report.term(name).unwrap();
            assert!(close(got, e, 1e-12), "{name} seed {seed}: {got} vs {e}");
        }
        let ns = nested_sums(&table.l4, &sys, &derived, DEFAULT_BUDGET).unwrap();
        assert!(close(ns.cube_cross_narrow, naive_narrow(&sys, &naive, &table.l4), 1e-12));
    }
}

#[test]
fn iid_beta_has_closed_form() {
    for n in [1usize, 5, 30] {
        let sys = NeighborhoodSystem::iid(n);
        let derived = sys.derive().unwrap();
        let table = MomentTable::homogeneous(n, 1.0, 1.0, 1.0, n as f64, 1);
        let r = bound_general_beta(&table, &sys, &derived, DEFAULT_BUDGET).unwrap();
        let s = (n as f64).sqrt();
        assert!(close(r.term("beta1").unwrap(), 2.0 * n as f64 / s.powi(3), 1e-12));
        // quad: n, cube_self: n, cube_cross: n
        assert!(close(r.term("beta2").unwrap(), (3.0 * n as f64).sqrt() / n as f64, 1e-12));
        // fifth sums: n each, D_i = {(i,i)}
        assert!(close(r.term("beta3").unwrap(), (4.0 * n as f64 / s.powi(5)).sqrt(), 1e-12));
    }
}

#[test]
fn zero_norms_give_zero_beta() {
    let sys = random_system(12, 3, 9);
    let derived = sys.derive().unwrap();
    let table = MomentTable::analytic(vec![0.0; 12], vec![0.0; 12], vec![0.0; 12], 1.0, derived.kappa);
    assert_eq!(bound_general_beta(&table, &sys, &derived, DEFAULT_BUDGET).unwrap().shape, 0.0);
}

#[test]
fn budget_refusal() {
    let sys = random_system(30, 4, 3);
    let derived = sys.derive().unwrap();
    let table = random_table(30, derived.kappa, 3);
    let err = bound_general_beta(&table, &sys, &derived, 100).unwrap_err();
    assert!(matches!(err, Error::ComplexityCapExceeded { budget: 100 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_dominated_by_kappa_tau_expressions(n in 2usize..30, width in 1usize..6, seed in any::<u64>()) {
        let sys = random_system(n, width, seed);
        let derived = sys.derive().unwrap();
        let table = random_table(n, derived.kappa, seed);
        let r = bound_general_beta(&table, &sys, &derived, DEFAULT_BUDGET).unwrap();
        let main = bound_main(&table, derived.kappa, derived.tau).unwrap();
        let slack = 1.0 + 1e-12;
        prop_assert!(r.term("beta1").unwrap() <= 2.0 * main.term("third_moment").unwrap() * slack);
        prop_assert!(r.term("beta2").unwrap() <= 6f64.sqrt() * main.term("fourth_moment").unwrap() * slack);
    }
}
