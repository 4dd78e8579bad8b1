mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;
use semirandom::graph_adversary::delta_of_eps;
use semirandom::tree_model::{
    cutting_adversary_majority_breaker, eps_prime, sample_dist2, sample_dist2_detailed, sample_dist4, sample_dist4_detailed,
    sample_plain, Birth, DPlus, EdgeNoise,
};
use semirandom::tree_reconstruct::{
    advantage_bound, exact_advantage, exact_posterior, exact_success, recursive_majority, PosteriorModel,
};
use semirandom::{Marking, Spin, Tree};

/// P(report = +1) for recursive majority with fair-coin ties, computed
/// exactly: children report independently, so the vote count is a sum of
/// independent Bernoullis.
fn recmaj_plus_probability(t: &Tree, v: usize) -> f64 {
    if t.is_leaf(v) {
        return if t.spin(v).is_plus() { 1.0 } else { 0.0 };
    }
    let kids: Vec<usize> = t.children(v).collect();
    if kids.is_empty() {
        return 0.5;
    }
    let mut dist = vec![1.0f64];
    for c in kids {
        let p = recmaj_plus_probability(t, c);
        let mut next = vec![0.0; dist.len() + 1];
        for (j, &w) in dist.iter().enumerate() {
            next[j] += w * (1.0 - p);
            next[j + 1] += w * p;
        }
        dist = next;
    }
    let m = dist.len() - 1;
    dist.iter()
        .enumerate()
        .map(|(j, &w)| {
            if 2 * j > m {
                w
            } else if 2 * j == m {
                0.5 * w
            } else {
                0.0
            }
        })
        .sum()
}

fn majority_plus_probability(t: &Tree) -> f64 {
    let (p, m) = t.leaf_census();
    match p.cmp(&m) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    }
}

fn map_plus_probability(t: &Tree, model: &PosteriorModel) -> f64 {
    let e = exact_posterior(t, model).unwrap();
    if (e.confidence.unwrap() - 0.5).abs() < 1e-12 {
        0.5
    } else if e.spin == Spin::Plus {
        1.0
    } else {
        0.0
    }
}

#[test]
fn posterior_dominates_other_estimators() {
    let mut checked = 0;
    for seed in 0..400u64 {
        let eps = [0.05, 0.15, 0.3][seed as usize % 3];
        let birth = if seed % 2 == 0 { Birth::Poisson(2.0) } else { Birth::Regular(2) };
        let t = sample_plain(birth, eps, 3, seed).unwrap();
        if t.leaf_count() == 0 || t.leaf_count() > 12 {
            continue;
        }
        let model = PosteriorModel::Plain { eps };
        let map = exact_success(&t, &model, |w| map_plus_probability(w, &model)).unwrap();
        let maj = exact_success(&t, &model, majority_plus_probability).unwrap();
        let rec = exact_success(&t, &model, |w| recmaj_plus_probability(w, 0)).unwrap();
        assert!(map >= maj - 1e-12 && map >= rec - 1e-12, "seed {seed}: map {map}, maj {maj}, rec {rec}");
        // 2·P(MAP correct) - 1 is the advantage.
        assert!((2.0 * map - 1.0 - exact_advantage(&t, &model).unwrap()).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn semirandom_laws_agree_at_depth_one() {
    // (root spin, leaf count, plus leaves) from both samplers.
    let draw = |d4: bool| {
        let mut m = BTreeMap::new();
        for seed in 0..60_000u64 {
            let t = if d4 { sample_dist4(3.0, 0.2, 1, seed) } else { sample_dist2(3.0, 0.2, 1, seed + (1 << 40)) }.unwrap();
            let (p, n) = t.leaf_census();
            *m.entry((t.root_spin().is_plus(), p, n)).or_insert(0u64) += 1;
        }
        m
    };
    let (_, _, p) = support::chi_square_two_sample(&draw(false), &draw(true));
    assert!(p > 0.001, "p = {p}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn two_step_identity(eps in 0.0f64..0.5) {
        let d = delta_of_eps(eps).unwrap();
        let lhs = ((1.0 - eps).powi(2) + eps * eps * (1.0 - d)) / (1.0 - eps * eps * d);
        let e = eps_prime(eps).unwrap();
        prop_assert!((lhs - ((1.0 - e).powi(2) + e * e)).abs() <= 1e-12);
    }

    #[test]
    fn dplus_normalizes(eps in 0.0f64..=0.5) {
        let d = DPlus::new(eps).unwrap();
        prop_assert!((d.pp + d.pm + d.mp + d.mm - 1.0).abs() <= 1e-15);
        prop_assert!(d.mm >= 0.0);
    }

    #[test]
    fn semirandom_trees_are_well_formed(seed in any::<u64>(), eps in 0.0f64..0.5, k in 1.0f64..3.5, depth in 1usize..5) {
        for d in [sample_dist2_detailed(k, eps, depth, seed).unwrap(), sample_dist4_detailed(k, eps, depth, seed).unwrap()] {
            let t = &d.tree;
            t.validate().unwrap();
            for v in t.leaves() {
                prop_assert!(t.marking(v) != Marking::Marked);
            }
            if let Some(noise) = &d.noise {
                let model = PosteriorModel::EdgeNoise { noise: noise.clone(), root_pair: d.root_pair };
                if (1..=8).contains(&t.leaf_count()) {
                    prop_assert!(exact_advantage(t, &model).unwrap() <= advantage_bound(t, noise) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cutting_adversary_only_cuts_flipped_back_leaves(seed in any::<u64>(), eps in 0.0f64..0.5) {
        let t = sample_plain(Birth::Poisson(2.5), eps, 5, seed).unwrap();
        let cut = cutting_adversary_majority_breaker(&t);
        let (ap, am) = t.leaf_census();
        let (bp, bm) = cut.leaf_census();
        let root = t.root_spin();
        let (agree_before, agree_after) = if root.is_plus() { (ap, bp) } else { (am, bm) };
        let (dis_before, dis_after) = if root.is_plus() { (am, bm) } else { (ap, bp) };
        prop_assert_eq!(dis_before, dis_after);
        let removable = t.leaves().filter(|&v| t.spin(v) == root && t.spin(t.parent(v).unwrap()) != root).count();
        prop_assert_eq!(agree_before - agree_after, removable);
        // Each removed edge joined opposite spins.
        prop_assert_eq!(t.len() - cut.len(), removable);
    }

    #[test]
    fn recursive_majority_flips_with_the_leaves(seed in any::<u64>(), eps in 0.0f64..0.5) {
        let t = sample_plain(Birth::Poisson(3.0), eps, 4, seed).unwrap();
        if t.leaf_count() == 0 {
            return Ok(());
        }
        let mut neg = t.clone();
        for v in 0..t.len() {
            neg.set_spin(v, -t.spin(v));
        }
        prop_assert_eq!(recursive_majority(&neg, seed).spin, -recursive_majority(&t, seed).spin);
    }

    #[test]
    fn bound_is_at_least_the_plain_advantage(seed in any::<u64>(), eps in 0.0f64..0.5) {
        let t = sample_plain(Birth::Poisson(1.8), eps, 3, seed).unwrap();
        if t.leaf_count() == 0 || t.leaf_count() > 10 {
            return Ok(());
        }
        let adv = exact_advantage(&t, &PosteriorModel::Plain { eps }).unwrap();
        prop_assert!(adv <= advantage_bound(&t, &EdgeNoise::uniform(&t, eps)) + 1e-12);
    }
}
