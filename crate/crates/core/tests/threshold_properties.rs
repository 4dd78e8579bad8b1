use proptest::prelude::*;
use semirandom::graph_adversary::delta_of_eps;
use semirandom::thresholds::{eps_star, majority_fn, majority_fn_poisson, recursion_iterates, MajorityModel};

#[test]
fn majority_fixed_values() {
    for k in 1..=40u64 {
        assert_eq!(majority_fn(k, 0.0), 0.0);
        assert_eq!(majority_fn(k, 1.0), 1.0);
        assert!((majority_fn(k, 0.5) - 0.5).abs() < 1e-14, "k = {k}");
    }
}

#[test]
fn majority_is_convex_then_concave() {
    for k in [3u64, 5, 11, 25] {
        let h = 1e-3;
        for i in 1..1000 {
            let q = i as f64 * h;
            let d2 = majority_fn(k, q + h) - 2.0 * majority_fn(k, q) + majority_fn(k, q - h);
            if q < 0.5 - h {
                assert!(d2 >= -1e-12, "k {k} q {q}: {d2}");
            } else if q > 0.5 + h {
                assert!(d2 <= 1e-12, "k {k} q {q}: {d2}");
            }
        }
    }
}

#[test]
fn recursion_splits_at_the_critical_noise() {
    for k in [3u64, 11] {
        let es = eps_star(k as f64, MajorityModel::Regular).unwrap();
        let below = *recursion_iterates(k, es.eps_star - 0.01, 10_000).last().unwrap();
        let above = *recursion_iterates(k, es.eps_star + 0.01, 10_000).last().unwrap();
        assert!(below >= es.p_star - 1e-9 && es.p_star > 0.5, "k {k}: {below} vs {}", es.p_star);
        assert!(above < 0.5, "k {k}: {above}");
    }
}

proptest! {
    #[test]
    fn majority_is_monotone(k in 1u64..60, q in 0.0f64..1.0, dq in 0.0f64..0.2) {
        prop_assert!(majority_fn(k, q) <= majority_fn(k, (q + dq).min(1.0)) + 1e-14);
    }

    #[test]
    fn poisson_race_tail(k in 0.5f64..40.0, nu in 0.0f64..0.5) {
        let bound = (-k * (1.0 - (1.0 - 4.0 * nu * nu).sqrt())).exp();
        prop_assert!(1.0 - majority_fn_poisson(k, 0.5 + nu) <= bound + 1e-12);
    }

    #[test]
    fn delta_cancels_the_noise_above_a_third(eps in (1.0f64 / 3.0)..0.5) {
        let d = delta_of_eps(eps).unwrap();
        prop_assert!((d * eps * eps - (1.0 - 2.0 * eps).powi(2)).abs() < 1e-14);
    }
}
