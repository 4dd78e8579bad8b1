//! Broadcast-tree samplers and the tree adversaries.
//!
//! The two semirandom tree laws are sampled literally: `sample_dist2` runs
//! the graph adversary on a spin-labelled Galton-Watson tree, and
//! `sample_dist4` draws the topology and cuts first and then propagates
//! spins with the effective per-edge noise. They agree in law on (root
//! spin, topology, markings, leaf spins).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{param, Result};
use crate::graph_adversary::{compute_markings, delta_of_eps};
use crate::rng::{self, SimRng};
use crate::sbm::{Marking, Mode, Spin};
use crate::tree::Tree;

/// Offspring law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Birth {
    Poisson(f64),
    Regular(usize),
}

impl Birth {
    pub fn mean(self) -> f64 {
        match self {
            Birth::Poisson(k) => k,
            Birth::Regular(k) => k as f64,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Birth::Poisson(k) if !(k.is_finite() && k > 0.0) => Err(param(format!("Poisson mean must be positive, got {k}"))),
            _ => Ok(()),
        }
    }
}

/// Samples offspring counts; caches the Poisson sampler.
#[derive(Clone)]
struct Offspring {
    birth: Birth,
    poisson: Option<Poisson<f64>>,
}

impl Offspring {
    fn new(birth: Birth) -> Result<Self> {
        birth.validate()?;
        let poisson = match birth {
            Birth::Poisson(k) => Some(Poisson::new(k).map_err(|e| param(e.to_string()))?),
            Birth::Regular(_) => None,
        };
        Ok(Offspring { birth, poisson })
    }

    fn draw(&self, r: &mut SimRng) -> usize {
        match self.birth {
            Birth::Regular(k) => k,
            Birth::Poisson(_) => self.poisson.as_ref().unwrap().sample(r) as usize,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return Err(param(format!("eps must lie in [0, 1/2), got {eps}")));
    }
    Ok(())
}

/// Effective noise on edges at a MARKED node:
/// 1/2 - 1/2·sqrt((1-3ε)/(1+ε)) for ε ≤ 1/3, else 1/2.
pub fn eps_prime(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if eps <= 1.0 / 3.0 {
        Ok(0.5 - 0.5 * ((1.0 - 3.0 * eps).max(0.0) / (1.0 + eps)).sqrt())
    } else {
        Ok(0.5)
    }
}

/// Law of the two children's spins relative to a MARKED, uncut root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DPlus {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl DPlus {
    pub fn new(eps: f64) -> Result<DPlus> {
        check_eps(eps)?;
        let delta = delta_of_eps(eps)?;
        let z = 1.0 - delta * eps * eps;
        Ok(DPlus {
            pp: (1.0 - eps).powi(2) / z,
            pm: eps * (1.0 - eps) / z,
            mp: eps * (1.0 - eps) / z,
            mm: eps * eps * (1.0 - delta) / z,
        })
    }

    pub fn prob(&self, d1: Spin, d2: Spin) -> f64 {
        match (d1, d2) {
            (Spin::Plus, Spin::Plus) => self.pp,
            (Spin::Plus, Spin::Minus) => self.pm,
            (Spin::Minus, Spin::Plus) => self.mp,
            (Spin::Minus, Spin::Minus) => self.mm,
        }
    }

    pub fn sample(&self, r: &mut SimRng) -> (Spin, Spin) {
        let u: f64 = r.random();
        if u < self.pp {
            (Spin::Plus, Spin::Plus)
        } else if u < self.pp + self.pm {
            (Spin::Plus, Spin::Minus)
        } else if u < self.pp + self.pm + self.mp {
            (Spin::Minus, Spin::Plus)
        } else {
            (Spin::Minus, Spin::Minus)
        }
    }
}

/// Per-edge flip probabilities, indexed by the child endpoint; entry 0
/// (the root) is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNoise(Vec<f64>);

impl EdgeNoise {
    pub fn new(values: Vec<f64>) -> Self {
        EdgeNoise(values)
    }

    pub fn uniform(t: &Tree, eps: f64) -> Self {
        let mut v = vec![eps; t.len()];
        if !v.is_empty() {
            v[0] = 0.0;
        }
        EdgeNoise(v)
    }

    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    pub fn theta(&self, v: usize) -> f64 {
        1.0 - 2.0 * self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Zero noise on the root's edges.
    pub fn eased(&self, t: &Tree) -> EdgeNoise {
        let mut v = self.0.clone();
        for c in t.children(0) {
            v[c] = 0.0;
        }
        EdgeNoise(v)
    }
}

/// Grows a tree to uniform depth. With `eps = Some(e)` each child flips
/// its parent's spin with probability `e`; otherwise all spins are +1.
fn grow(birth: Birth, depth: usize, eps: Option<f64>, r: &mut SimRng, root: Spin) -> Result<Tree> {
    let off = Offspring::new(birth)?;
    let mut t = Tree::with_capacity(64);
    t.push_node(None, root);
    let mut v = 0;
    while v < t.len() {
        if t.depth(v) < depth {
            let c = off.draw(r);
            let s = t.spin(v);
            for _ in 0..c {
                let child = match eps {
                    Some(e) if r.random_bool(e) => -s,
                    _ => s,
                };
                t.push_node(Some(v), child);
            }
        }
        v += 1;
    }
    t.finish_layout();
    Ok(t)
}

/// Plain broadcast tree; leaves are the depth-`depth` nodes.
pub fn sample_plain(birth: Birth, eps: f64, depth: usize, seed: u64) -> Result<Tree> {
    check_eps(eps)?;
    let mut r = rng::stream(seed, "tree/plain");
    let root = Spin::from_bool(r.random_bool(0.5));
    Ok(grow(birth, depth, Some(eps), &mut r, root)?.with_leaves_at_depth(depth))
}

/// Applies the last two steps shared by both semirandom tree laws: keep the
/// root component below depth `depth`, then drop MARKED depth-`depth`
/// nodes with all their siblings so the parent becomes a leaf.
fn trim(grown: &Tree, depth: usize) -> (Tree, Vec<Option<usize>>) {
    let n = grown.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    for v in 1..n {
        let p = grown.parent(v).unwrap();
        keep[v] = keep[p] && !grown.is_cut(v) && !grown.is_cut(p) && grown.depth(v) <= depth;
    }
    let mut exposed = vec![false; n];
    for v in 1..n {
        if keep[v] && grown.depth(v) == depth && grown.marking(v) == Marking::Marked {
            exposed[grown.parent(v).unwrap()] = true;
        }
    }
    let mut marked = grown.clone();
    for v in 0..n {
        if v > 0 && exposed[grown.parent(v).unwrap()] {
            keep[v] = false;
        }
        let leaf = keep[v] && ((grown.depth(v) == depth && depth > 0) || exposed[v]);
        marked.set_leaf(v, leaf);
    }
    marked.retain(&keep)
}

/// Precursor and output of a semirandom tree draw.
#[derive(Debug, Clone)]
pub struct SemirandomTree {
    /// The depth-(R+3) tree with markings and cut flags.
    pub precursor: Tree,
    pub tree: Tree,
    /// Per-edge noise on `tree` (only `sample_dist4` sets it).
    pub noise: Option<EdgeNoise>,
    /// Child-pair law at the root when it is MARKED and uncut.
    pub root_pair: Option<DPlus>,
}

fn check_tree_params(k: f64, eps: f64, depth: usize) -> Result<()> {
    check_eps(eps)?;
    if !(k.is_finite() && k > 0.0) {
        return Err(param(format!("k must be positive, got {k}")));
    }
    if depth < 1 {
        return Err(param("depth must be at least 1"));
    }
    Ok(())
}

/// Indices of a node's graph neighbours inside a tree.
fn tree_neighbors(t: &Tree, v: usize) -> Vec<usize> {
    t.parent(v).into_iter().chain(t.children(v)).collect()
}

/// Semirandom tree by running the graph adversary on a labelled tree.
///
/// Children are Pois(k) with independent ε-flips, which is the same law as
/// independent Pois(a/2) same-spin and Pois(b/2) opposite-spin children.
pub fn sample_dist2(k: f64, eps: f64, depth: usize, seed: u64) -> Result<Tree> {
    Ok(sample_dist2_detailed(k, eps, depth, seed)?.tree)
}

pub fn sample_dist2_detailed(k: f64, eps: f64, depth: usize, seed: u64) -> Result<SemirandomTree> {
    check_tree_params(k, eps, depth)?;
    let delta = delta_of_eps(eps)?;
    let mut r = rng::stream(seed, "tree/d2/grow");
    let root = Spin::from_bool(r.random_bool(0.5));
    let mut pre = grow(Birth::Poisson(k), depth + 3, Some(eps), &mut r, root)?;
    let marks = compute_markings(&pre);
    for (v, m) in marks.into_iter().enumerate() {
        pre.set_marking(v, m);
    }
    let mut cut_rng = rng::stream(seed, "tree/d2/cut");
    for v in 0..pre.len() {
        if pre.marking(v) != Marking::Marked {
            continue;
        }
        let s = pre.spin(v);
        if tree_neighbors(&pre, v).iter().all(|&u| pre.spin(u) != s) && cut_rng.random_bool(delta) {
            pre.set_cut(v, true);
        }
    }
    let (tree, _) = trim(&pre, depth);
    Ok(SemirandomTree { precursor: pre, tree, noise: None, root_pair: None })
}

/// Semirandom tree by sampling topology and cuts first, then spins with
/// noise ε' on MARKED-incident edges.
pub fn sample_dist4(k: f64, eps: f64, depth: usize, seed: u64) -> Result<Tree> {
    Ok(sample_dist4_detailed(k, eps, depth, seed)?.tree)
}

pub fn sample_dist4_detailed(k: f64, eps: f64, depth: usize, seed: u64) -> Result<SemirandomTree> {
    check_tree_params(k, eps, depth)?;
    let delta = delta_of_eps(eps)?;
    let ep = eps_prime(eps)?;
    let dplus = DPlus::new(eps)?;
    let mut r = rng::stream(seed, "tree/d4/grow");
    let mut pre = grow(Birth::Poisson(k), depth + 3, None, &mut r, Spin::Plus)?;
    let marks = compute_markings(&pre);
    for (v, m) in marks.into_iter().enumerate() {
        pre.set_marking(v, m);
    }
    let mut cut_rng = rng::stream(seed, "tree/d4/cut");
    let p_cut = eps * eps * delta;
    for v in 0..pre.len() {
        if pre.marking(v) == Marking::Marked && cut_rng.random_bool(p_cut) {
            pre.set_cut(v, true);
        }
    }
    let noise: Vec<f64> = (0..pre.len())
        .map(|v| match pre.parent(v) {
            None => 0.0,
            Some(p) if pre.marking(v) == Marking::Marked || pre.marking(p) == Marking::Marked => ep,
            Some(_) => eps,
        })
        .collect();
    let mut spin_rng = rng::stream(seed, "tree/d4/spins");
    let root = Spin::from_bool(spin_rng.random_bool(0.5));
    pre.set_spin(0, root);
    let root_pair = pre.marking(0) == Marking::Marked && !pre.is_cut(0);
    let mut v = 1;
    if root_pair {
        let kids: Vec<usize> = pre.children(0).collect();
        debug_assert_eq!(kids.len(), 2);
        let (d1, d2) = dplus.sample(&mut spin_rng);
        pre.set_spin(kids[0], root * d1);
        pre.set_spin(kids[1], root * d2);
        v = 3;
    }
    while v < pre.len() {
        let p = pre.parent(v).unwrap();
        let s = pre.spin(p);
        pre.set_spin(v, if spin_rng.random_bool(noise[v]) { -s } else { s });
        v += 1;
    }
    let (tree, map) = trim(&pre, depth);
    let mut trimmed_noise = vec![0.0; tree.len()];
    for (old, new) in map.iter().enumerate() {
        if let Some(new) = *new {
            trimmed_noise[new] = noise[old];
        }
    }
    Ok(SemirandomTree {
        precursor: pre,
        tree,
        noise: Some(EdgeNoise(trimmed_noise)),
        root_pair: root_pair.then_some(dplus),
    })
}

/// Deletes every leaf whose spin matches the root while its parent's spin
/// does not.
pub fn cutting_adversary_majority_breaker(t: &Tree) -> Tree {
    let root = t.root_spin();
    let keep: Vec<bool> = (0..t.len())
        .map(|v| match t.parent(v) {
            Some(p) if t.is_leaf(v) => !(t.spin(v) == root && t.spin(p) != root),
            _ => true,
        })
        .collect();
    t.retain(&keep).0
}

/// Replaces every maximal subtree hanging below a spin change by a path to
/// depth `depth` ending in one leaf that misleads about the root.
///
/// In dissortative mode a "change" is an edge without a spin flip and the
/// path spins alternate, which is the image of the assortative rule under
/// the odd-level spin flip.
pub fn strong_adversary_opposite_path_mode(t: &Tree, depth: usize, mode: Mode) -> Tree {
    let root = t.root_spin();
    // Spin a path node at depth d must carry: opposite to the root in the
    // flipped frame.
    let misleading = |d: usize| match mode {
        Mode::Assortative => -root,
        Mode::Dissortative => {
            if d.is_multiple_of(2) {
                -root
            } else {
                root
            }
        }
    };
    let n = t.len();
    let mut parents: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut spins = Vec::with_capacity(n);
    let mut leaf = Vec::with_capacity(n);
    // Map from old index to new index for kept, non-replaced nodes.
    let mut map = vec![usize::MAX; n];
    parents.push(None);
    spins.push(root);
    leaf.push(t.is_leaf(0));
    map[0] = 0;
    for v in 1..n {
        let p = t.parent(v).unwrap();
        if map[p] == usize::MAX {
            continue;
        }
        let changed = mode.deletable(t.spin(p), t.spin(v));
        let id = parents.len();
        parents.push(Some(map[p]));
        if !changed {
            spins.push(t.spin(v));
            leaf.push(t.is_leaf(v));
            map[v] = id;
            continue;
        }
        let d0 = t.depth(v);
        spins.push(misleading(d0));
        leaf.push(d0 >= depth);
        let mut last = id;
        for d in d0 + 1..=depth {
            let nid = parents.len();
            parents.push(Some(last));
            spins.push(misleading(d));
            leaf.push(d == depth);
            last = nid;
        }
    }
    let (mut out, idx) = Tree::from_parents(&parents, &spins).expect("construction yields a tree");
    for (old, &new) in idx.iter().enumerate() {
        out.set_leaf(new, leaf[old]);
    }
    out
}

/// Assortative opposite-path adversary to the depth of the deepest leaf.
pub fn strong_adversary_opposite_path(t: &Tree) -> Tree {
    let depth = t.leaves().map(|v| t.depth(v)).max().unwrap_or_else(|| t.height());
    strong_adversary_opposite_path_mode(t, depth, Mode::Assortative)
}

/// Simulates the asymmetric broadcast chain from a symmetric tree with
/// noise ε + |asym|: top-down, each designated transition (+ to - when
/// `sign` is +, - to + otherwise) has its whole subtree flipped with
/// probability 2|asym|/(ε + |asym|).
pub fn strong_adversary_asymmetric(t: &Tree, eps: f64, asym: f64, sign: Spin, seed: u64) -> Result<Tree> {
    if !(asym >= 0.0 && asym <= eps) {
        return Err(param(format!("need 0 <= asym <= eps, got asym={asym}, eps={eps}")));
    }
    if eps + asym > 0.5 {
        return Err(param("eps + asym must not exceed 1/2"));
    }
    let mut out = t.clone();
    if asym == 0.0 {
        return Ok(out);
    }
    let r = 2.0 * asym / (eps + asym);
    let key = rng::derive_seed(seed, "tree/asym", 0);
    let (from, to) = (sign, -sign);
    // parity[v] is the accumulated flip applied to v's original spin.
    let mut parity = vec![false; t.len()];
    for v in 1..t.len() {
        let p = t.parent(v).unwrap();
        let parent_now = out.spin(p);
        let mut flip = parity[p];
        let own_now = if flip { -t.spin(v) } else { t.spin(v) };
        if parent_now == from && own_now == to && rng::hash_unit(key, v as u64) < r {
            flip = !flip;
        }
        parity[v] = flip;
        out.set_spin(v, if flip { -t.spin(v) } else { t.spin(v) });
    }
    Ok(out)
}

/// Leaf counts relative to the root spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafCensus {
    pub agree: u64,
    pub disagree: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensusAdversary {
    None,
    Cutting,
}

fn poisson_draw(lambda: f64, r: &mut SimRng) -> u64 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive mean").sample(r) as u64
    }
}

fn binomial_draw(n: u64, p: f64, r: &mut SimRng) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(r)
    }
}

/// Leaf census of a plain broadcast tree, optionally after the cutting
/// adversary, drawn level by level from aggregate counts. Equal in law to
/// counting the leaves of `sample_plain` (and of
/// `cutting_adversary_majority_breaker` applied to it) but linear in the
/// depth rather than the tree size.
pub fn sample_leaf_census(birth: Birth, eps: f64, depth: usize, adversary: CensusAdversary, seed: u64) -> Result<LeafCensus> {
    check_eps(eps)?;
    birth.validate()?;
    let mut r = rng::stream(seed, "tree/census");
    let (mut agree, mut disagree) = (1u64, 0u64);
    for level in 1..=depth {
        let last = level == depth;
        let (aa, ad, da, dd) = match birth {
            Birth::Poisson(k) => (
                poisson_draw(k * (1.0 - eps) * agree as f64, &mut r),
                poisson_draw(k * eps * agree as f64, &mut r),
                poisson_draw(k * eps * disagree as f64, &mut r),
                poisson_draw(k * (1.0 - eps) * disagree as f64, &mut r),
            ),
            Birth::Regular(k) => {
                let fa = k as u64 * agree;
                let fd = k as u64 * disagree;
                let aa = binomial_draw(fa, 1.0 - eps, &mut r);
                let dd = binomial_draw(fd, 1.0 - eps, &mut r);
                (aa, fa - aa, fd - dd, dd)
            }
        };
        // aa: agreeing children of agreeing parents, da: agreeing children
        // of disagreeing parents, and so on.
        let cut = last && adversary == CensusAdversary::Cutting;
        agree = aa + if cut { 0 } else { da };
        disagree = ad + dd;
    }
    Ok(LeafCensus { agree, disagree })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_prime_values() {
        assert_eq!(eps_prime(0.0).unwrap(), 0.0);
        assert!((eps_prime(1.0 / 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((eps_prime(0.2).unwrap() - (0.5 - 0.5 * (0.4f64 / 1.2).sqrt())).abs() < 1e-15);
        assert!((eps_prime(0.2).unwrap() - 0.211325).abs() < 1e-6);
        assert_eq!(eps_prime(0.4).unwrap(), 0.5);
        assert!(eps_prime(0.5).is_err());
        for i in 1..100 {
            let e = i as f64 / 200.0;
            let ep = eps_prime(e).unwrap();
            assert!(e < ep && ep <= 0.5);
        }
    }

    #[test]
    fn dplus_normalizes() {
        for i in 0..50 {
            let e = i as f64 / 100.0;
            let d = DPlus::new(e).unwrap();
            assert!((d.pp + d.pm + d.mp + d.mm - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dist4_cut_probability_above_one_third() {
        for e in [0.34, 0.4, 0.45] {
            let delta = delta_of_eps(e).unwrap();
            assert!((e * e * delta - (1.0 - 2.0 * e).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_noise_trees_are_plain() {
        for seed in 0..20 {
            let t = sample_dist2(2.0, 0.0, 4, seed).unwrap();
            assert!(t.spins().iter().all(|&s| s == t.root_spin()));
            assert!(t.leaves().all(|v| t.depth(v) <= 4));
            let pre = sample_dist2_detailed(2.0, 0.0, 4, seed).unwrap().precursor;
            assert!((0..pre.len()).all(|v| !pre.is_cut(v)));
        }
    }

    #[test]
    fn leaves_never_marked_and_layout_valid() {
        for seed in 0..200 {
            for t in [sample_dist2(2.5, 0.3, 4, seed).unwrap(), sample_dist4(2.5, 0.3, 4, seed).unwrap()] {
                t.validate().unwrap();
                assert!(t.leaves().all(|v| t.marking(v) != Marking::Marked));
                assert!(t.leaves().all(|v| t.child_count(v) == 0));
            }
        }
    }

    #[test]
    fn cutting_fixture() {
        // root +, child -, grandchildren (+, +)
        let parents = [None, Some(0), Some(1), Some(1)];
        let spins = [Spin::Plus, Spin::Minus, Spin::Plus, Spin::Plus];
        let (t, _) = Tree::from_parents(&parents, &spins).unwrap();
        let t = t.with_leaves_at_depth(2);
        let out = cutting_adversary_majority_breaker(&t);
        assert_eq!(out.len(), 2);
        assert_eq!(out.leaf_count(), 0);
        let plain = sample_plain(Birth::Poisson(3.0), 0.0, 4, 1).unwrap();
        assert_eq!(cutting_adversary_majority_breaker(&plain), plain);
    }

    #[test]
    fn opposite_path_fixture() {
        let parents = [None, Some(0), Some(0), Some(1), Some(2), Some(2)];
        let spins = [Spin::Plus, Spin::Plus, Spin::Minus, Spin::Plus, Spin::Minus, Spin::Plus];
        let (t, _) = Tree::from_parents(&parents, &spins).unwrap();
        let t = t.with_leaves_at_depth(2);
        let out = strong_adversary_opposite_path(&t);
        // node 2's subtree becomes a single path 2 -> x with x a - leaf
        assert_eq!(out.len(), 5);
        assert_eq!(out.leaf_census(), (1, 1));
        let plain = sample_plain(Birth::Regular(3), 0.0, 3, 0).unwrap();
        assert_eq!(strong_adversary_opposite_path(&plain), plain);
    }

    #[test]
    fn asymmetric_zero_is_identity() {
        let t = sample_plain(Birth::Regular(2), 0.2, 4, 5).unwrap();
        assert_eq!(strong_adversary_asymmetric(&t, 0.2, 0.0, Spin::Plus, 1).unwrap(), t);
        assert!(strong_adversary_asymmetric(&t, 0.1, 0.2, Spin::Plus, 1).is_err());
    }

    #[test]
    fn census_trivial_cases() {
        let c = sample_leaf_census(Birth::Regular(3), 0.0, 4, CensusAdversary::None, 1).unwrap();
        assert_eq!((c.agree, c.disagree), (81, 0));
        let c = sample_leaf_census(Birth::Regular(3), 0.2, 0, CensusAdversary::Cutting, 1).unwrap();
        assert_eq!((c.agree, c.disagree), (1, 0));
    }
}
