//! Brute-force oracles and fixtures shared by the integration tests. None
//! of these call the library routine they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use semirandom::graph_adversary::{apply_adversary_with_delta, compute_markings, is_cuttable};
use semirandom::rng;
use semirandom::{Graph, Mode, Spin, SpinAssignment};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Maximises a concave function on [lo, hi].
pub fn ternary_max(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..iters {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi))
}

/// max ⟨B, Z⟩ over 2×2 Z ⪰ 0 with diag ≤ 1. Writing Z = [[x, z], [z, y]]
/// with |z| ≤ √(xy), the best z is sgn(B₁₂)√(xy), which leaves a concave
/// function of (x, y) on the unit square.
pub fn sdp2_bruteforce(b: &DMatrix<f64>) -> f64 {
    let f = |x: f64, y: f64| b[(0, 0)] * x + b[(1, 1)] * y + 2.0 * b[(0, 1)].abs() * (x * y).sqrt();
    ternary_max(0.0, 1.0, 200, |x| ternary_max(0.0, 1.0, 200, |y| f(x, y)))
}

/// min Σy subject to diag(y) ⪰ B, y ≥ 0, which equals the 3×3 SDP value
/// by strong duality (Z = I/2 is strictly feasible). For fixed (y₁, y₂)
/// the least feasible y₃ is given by the Schur complement, and the
/// remaining function is convex.
pub fn sdp3_dual_bruteforce(b: &DMatrix<f64>) -> f64 {
    let bm = Matrix3::from_fn(|i, j| b[(i, j)]);
    let upper = bm.abs().sum() + 1.0;
    let tiny = 1e-11;
    let g = |y1: f64, y2: f64| -> f64 {
        let m11 = y1 - bm[(0, 0)];
        let m22 = y2 - bm[(1, 1)];
        let m12 = -bm[(0, 1)];
        let det = m11 * m22 - m12 * m12;
        if m11 <= 0.0 || det <= 0.0 {
            return f64::INFINITY;
        }
        let (c1, c2) = (-bm[(0, 2)], -bm[(1, 2)]);
        // cᵀ M⁻¹ c for the 2×2 block M.
        let quad = (m22 * c1 * c1 - 2.0 * m12 * c1 * c2 + m11 * c2 * c2) / det;
        y1 + y2 + (bm[(2, 2)] + quad).max(0.0)
    };
    let inner = |y1: f64| -> f64 {
        let m11 = y1 - bm[(0, 0)];
        if m11 <= 0.0 {
            return f64::INFINITY;
        }
        let lo = (bm[(1, 1)] + bm[(0, 1)].powi(2) / m11).max(0.0) + tiny;
        if lo >= upper {
            return f64::INFINITY;
        }
        -ternary_max(lo, upper, 200, |y2| -g(y1, y2))
    };
    let lo = bm[(0, 0)].max(0.0) + tiny;
    -ternary_max(lo, upper, 200, |y1| -inner(y1))
}

/// For k = 3, M(q) = 3q² - 2q³, so M(q)/q = 3q - 2q² peaks at q = 3/4
/// with value 9/8. Tangency of q/(1-ε) needs 1/(1-ε) = 9/8.
pub fn eps_star_three() -> (f64, f64, f64) {
    let q: f64 = 0.75;
    let ratio = 3.0 * q - 2.0 * q * q;
    let eps = 1.0 - 1.0 / ratio;
    (eps, q, q / (1.0 - eps))
}

fn edge_set(g: &Graph) -> Vec<(usize, usize)> {
    g.edges().collect()
}

/// Number of graphs H that the adversary can turn into `g`, found by
/// forward search: H adds edges only at nodes isolated in `g`, every node
/// that lost edges must have been cuttable in H, and H's markings must be
/// the ones `g` carries. Only practical with a handful of isolated nodes.
pub fn brute_force_precursor_count(g: &Graph, mode: Mode) -> usize {
    let n = g.node_count();
    let isolated: Vec<usize> = (0..n).filter(|&v| g.degree(v) == 0).collect();
    let mut options: Vec<Vec<Option<(usize, usize)>>> = Vec::new();
    for &v in &isolated {
        let mut o = vec![None];
        let others: Vec<usize> = (0..n).filter(|&u| u != v).collect();
        for i in 0..others.len() {
            for j in i + 1..others.len() {
                o.push(Some((others[i], others[j])));
            }
        }
        options.push(o);
    }
    let base = edge_set(g);
    let mut seen: HashSet<Vec<(usize, usize)>> = HashSet::new();
    let mut valid = 0usize;
    let mut choice = vec![0usize; isolated.len()];
    loop {
        let mut edges = base.clone();
        for (i, &v) in isolated.iter().enumerate() {
            if let Some((x, y)) = options[i][choice[i]] {
                edges.push((v.min(x), v.max(x)));
                edges.push((v.min(y), v.max(y)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        if seen.insert(edges.clone()) {
            let h = Graph::from_edges(g.spins().clone(), &edges).unwrap();
            let marks = compute_markings(&h);
            if marks == g.markings() {
                let h = h.with_markings(marks).unwrap();
                let dropped: Vec<usize> = (0..n).filter(|&v| h.degree(v) > 0 && g.degree(v) == 0).collect();
                if dropped.iter().all(|&v| is_cuttable(&h, v, mode)) {
                    valid += 1;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return valid;
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Marked precursors on at most 12 nodes: a complete core of 4 to 6 GOOD
/// nodes plus pendant paths and degree-2 attachments with random spins.
pub fn small_marked_fixtures(count: usize, seed: u64) -> Vec<Graph> {
    let mut r = rng::stream(seed, "fixtures/small");
    let mut out = Vec::new();
    while out.len() < count {
        let core = r.random_range(4..=6);
        let extra = r.random_range(0..=(12 - core).min(5));
        let n = core + extra;
        let spins: Vec<Spin> = (0..n).map(|_| Spin::from_bool(r.random_bool(0.5))).collect();
        let mut edges = Vec::new();
        for u in 0..core {
            for v in u + 1..core {
                edges.push((u, v));
            }
        }
        for v in core..n {
            let x = r.random_range(0..core);
            if r.random_bool(0.8) {
                let mut y = r.random_range(0..core - 1);
                if y >= x {
                    y += 1;
                }
                edges.push((x, v));
                edges.push((y, v));
            } else {
                edges.push((x, v));
            }
        }
        let g = Graph::from_edges(SpinAssignment::new(spins), &edges).unwrap();
        let marks = compute_markings(&g);
        out.push(g.with_markings(marks).unwrap());
    }
    out
}

/// Post-adversary graphs for the fixtures, keeping those with at most
/// three isolated nodes so the brute force stays small.
pub fn small_outcomes(mode: Mode, count: usize, seed: u64) -> Vec<Graph> {
    let mut out = Vec::new();
    for (i, pre) in small_marked_fixtures(count, seed).into_iter().enumerate() {
        for delta in [1.0, 0.5] {
            let post = apply_adversary_with_delta(&pre, mode, delta, rng::derive_seed(seed, "fixtures/cut", i as u64)).graph;
            if (0..post.node_count()).filter(|&v| post.degree(v) == 0).count() <= 3 {
                out.push(post);
            }
        }
    }
    out
}

/// All unlabelled rooted trees with `nodes` nodes, as parent lists.
pub fn rooted_shapes(nodes: usize) -> Vec<Vec<Option<usize>>> {
    fn canon(children: &[Vec<usize>], v: usize) -> String {
        let mut subs: Vec<String> = children[v].iter().map(|&c| canon(children, c)).collect();
        subs.sort();
        format!("({})", subs.concat())
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut parents = vec![0usize; nodes];
    fn rec(
        i: usize,
        nodes: usize,
        parents: &mut Vec<usize>,
        seen: &mut HashSet<String>,
        out: &mut Vec<Vec<Option<usize>>>,
        canon: &dyn Fn(&[Vec<usize>], usize) -> String,
    ) {
        if i == nodes {
            let mut children = vec![Vec::new(); nodes];
            for v in 1..nodes {
                children[parents[v]].push(v);
            }
            if seen.insert(canon(&children, 0)) {
                out.push((0..nodes).map(|v| if v == 0 { None } else { Some(parents[v]) }).collect());
            }
            return;
        }
        for p in 0..i {
            parents[i] = p;
            rec(i + 1, nodes, parents, seen, out, canon);
        }
    }
    rec(1, nodes, &mut parents, &mut seen, &mut out, &canon);
    out
}

/// Two-sample chi-square homogeneity test for equal sample sizes. Bins
/// with pooled expected count below 5 are merged. Returns (statistic,
/// degrees of freedom, p-value).
pub fn chi_square_two_sample<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> (f64, usize, f64) {
    let keys: Vec<K> = a.keys().chain(b.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for k in keys {
        let x = *a.get(&k).unwrap_or(&0) as f64;
        let y = *b.get(&k).unwrap_or(&0) as f64;
        if (x + y) / 2.0 < 5.0 {
            rest.0 += x;
            rest.1 += y;
        } else {
            bins.push((x, y));
        }
    }
    if rest.0 + rest.1 > 0.0 {
        bins.push(rest);
    }
    let stat: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let e = (x + y) / 2.0;
            ((x - e).powi(2) + (y - e).powi(2)) / e
        })
        .sum();
    let df = bins.len().saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p)
}
