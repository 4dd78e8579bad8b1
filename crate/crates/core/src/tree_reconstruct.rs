//! Root-spin estimators and the advantage bound.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::graph_adversary::delta_of_eps;
use crate::rng::{self, SimRng};
use crate::sbm::{Marking, Mode, Spin};
use crate::tree::Tree;
use crate::tree_model::{Birth, DPlus, EdgeNoise};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootEstimate {
    pub spin: Spin,
    /// Posterior probability of `spin`; only the exact estimator sets it.
    pub confidence: Option<f64>,
}

impl RootEstimate {
    fn plain(spin: Spin) -> Self {
        RootEstimate { spin, confidence: None }
    }
}

fn coin(seed: u64, label: &str, index: u64) -> Spin {
    Spin::from_bool(rng::hash_coin(rng::derive_seed(seed, label, 0), index))
}

/// Sign of the leaf-spin sum; ties and empty leaf sets go to a coin.
pub fn majority_vote(t: &Tree, seed: u64) -> RootEstimate {
    let (plus, minus) = t.leaf_census();
    RootEstimate::plain(match plus.cmp(&minus) {
        std::cmp::Ordering::Greater => Spin::Plus,
        std::cmp::Ordering::Less => Spin::Minus,
        std::cmp::Ordering::Equal => coin(seed, "majority", 0),
    })
}

/// Reports of every node under recursive majority; `anti` negates the
/// vote at each internal node (the dissortative estimator).
fn recursive_reports(t: &Tree, seed: u64, anti: bool) -> Vec<Spin> {
    let key = rng::derive_seed(seed, "recmaj", 0);
    // Coins are multiplied by the first leaf's spin. Given the leaves they
    // are still iid fair, and flipping every leaf now flips the estimate.
    let orient = t.leaves().next().map_or(Spin::Plus, |v| t.spin(v));
    let mut report = vec![Spin::Plus; t.len()];
    for v in (0..t.len()).rev() {
        if t.is_leaf(v) {
            report[v] = t.spin(v);
            continue;
        }
        let sum: i64 = t.children(v).map(|c| report[c].value()).sum();
        let vote = if t.child_count(v) == 0 || sum == 0 {
            orient * Spin::from_bool(rng::hash_coin(key, v as u64))
        } else {
            Spin::from_sign(sum)
        };
        // Negating a fair coin keeps its law, so negating the whole vote is
        // fine for anti-majority.
        report[v] = if anti { -vote } else { vote };
    }
    report
}

/// Bottom-up majority of children's reports. Ties and childless internal
/// nodes use a per-node fair coin keyed by `seed`.
pub fn recursive_majority(t: &Tree, seed: u64) -> RootEstimate {
    RootEstimate::plain(recursive_reports(t, seed, false)[0])
}

/// Recursive anti-majority: each internal node reports the opposite of its
/// children's majority.
pub fn recursive_anti_majority(t: &Tree, seed: u64) -> RootEstimate {
    RootEstimate::plain(recursive_reports(t, seed, true)[0])
}

/// Spin law the exact estimator conditions on.
#[derive(Debug, Clone)]
pub enum PosteriorModel {
    /// Plain broadcast with flip probability ε on every edge.
    Plain { eps: f64 },
    /// Independent flips with per-edge noise, optionally with a D⁺ child
    /// pair at the root.
    EdgeNoise { noise: EdgeNoise, root_pair: Option<DPlus> },
    /// The law produced by running the graph adversary on a labelled tree:
    /// ε-flips on every edge, reweighted by the probability that each
    /// observed MARKED node survived.
    Dist2 { eps: f64 },
}

pub const MAX_PLAIN_NODES: usize = 10_000;
pub const MAX_DIST2_FREE_SPINS: usize = 20;
pub const MAX_ENUMERATED_LEAVES: usize = 20;

fn flip_prob(model: &PosteriorModel, v: usize) -> f64 {
    match model {
        PosteriorModel::Plain { eps } | PosteriorModel::Dist2 { eps } => *eps,
        PosteriorModel::EdgeNoise { noise, .. } => noise.get(v),
    }
}

/// P(leaf spins | root = +) and P(leaf spins | root = -) by the tree
/// recursion, unnormalized (exact likelihoods for small trees). With
/// `scaled` each message is renormalized to avoid underflow and only the
/// ratio is meaningful.
fn root_likelihoods(t: &Tree, model: &PosteriorModel, leaf_spins: Option<&[Spin]>, scaled: bool) -> (f64, f64) {
    let spin_of = |v: usize| leaf_spins.map_or(t.spin(v), |s| s[v]);
    // msg[v] = (P(obs below v | σ_v = +), P(obs below v | σ_v = -))
    let mut msg = vec![(1.0f64, 1.0f64); t.len()];
    let pair = match model {
        PosteriorModel::EdgeNoise { root_pair, .. } => *root_pair,
        _ => None,
    };
    for v in (0..t.len()).rev() {
        if t.is_leaf(v) {
            msg[v] = if spin_of(v).is_plus() { (1.0, 0.0) } else { (0.0, 1.0) };
            continue;
        }
        if let Some(d) = pair.filter(|_| v == 0 && t.child_count(0) == 2) {
            let (c1, c2) = (t.children(0).start, t.children(0).start + 1);
            let m = |c: usize, s: Spin| if s.is_plus() { msg[c].0 } else { msg[c].1 };
            let mut lik = [0.0; 2];
            for (i, root) in [Spin::Plus, Spin::Minus].into_iter().enumerate() {
                for d1 in [Spin::Plus, Spin::Minus] {
                    for d2 in [Spin::Plus, Spin::Minus] {
                        lik[i] += d.prob(d1, d2) * m(c1, root * d1) * m(c2, root * d2);
                    }
                }
            }
            msg[0] = (lik[0], lik[1]);
            continue;
        }
        let (mut lp, mut lm) = (1.0, 1.0);
        for c in t.children(v) {
            let e = flip_prob(model, c);
            let (cp, cm) = msg[c];
            lp *= (1.0 - e) * cp + e * cm;
            lm *= e * cp + (1.0 - e) * cm;
        }
        if scaled {
            let z = lp + lm;
            if z > 0.0 {
                lp /= z;
                lm /= z;
            }
        }
        msg[v] = (lp, lm);
    }
    msg[0]
}

/// Exact Dist2 likelihoods by summing over the spins of all non-leaf,
/// non-root nodes.
fn dist2_likelihoods(t: &Tree, eps: f64, leaf_spins: Option<&[Spin]>) -> Result<(f64, f64)> {
    let delta = delta_of_eps(eps)?;
    let free: Vec<usize> = (1..t.len()).filter(|&v| !t.is_leaf(v)).collect();
    if free.len() > MAX_DIST2_FREE_SPINS {
        return Err(Error::Capacity(format!(
            "{} unobserved spins exceed the enumeration limit {MAX_DIST2_FREE_SPINS}",
            free.len()
        )));
    }
    let mut spins: Vec<Spin> = (0..t.len()).map(|v| leaf_spins.map_or(t.spin(v), |s| s[v])).collect();
    let marked: Vec<usize> = (0..t.len()).filter(|&v| t.marking(v) == Marking::Marked).collect();
    let mut lik = [0.0f64; 2];
    for (i, root) in [Spin::Plus, Spin::Minus].into_iter().enumerate() {
        spins[0] = root;
        for mask in 0u64..(1u64 << free.len()) {
            for (j, &v) in free.iter().enumerate() {
                spins[v] = Spin::from_bool(mask >> j & 1 == 1);
            }
            let mut w = 1.0;
            for v in 1..t.len() {
                let p = t.parent(v).unwrap();
                w *= if spins[v] == spins[p] { 1.0 - eps } else { eps };
            }
            for &v in &marked {
                // Survival of a MARKED node: it escapes the cut unless both
                // neighbours oppose it. A missing child (impossible in
                // trimmed trees, handled for completeness) opposes with
                // probability ε.
                let nb: Vec<usize> = t.parent(v).into_iter().chain(t.children(v)).collect();
                let opposed = nb.iter().filter(|&&u| spins[u] != spins[v]).count();
                let missing = 2usize.saturating_sub(nb.len());
                let p_all = if opposed == nb.len() { eps.powi(missing as i32) } else { 0.0 };
                w *= 1.0 - delta * p_all;
            }
            lik[i] += w;
        }
    }
    Ok((lik[0], lik[1]))
}

fn likelihoods(t: &Tree, model: &PosteriorModel, leaf_spins: Option<&[Spin]>, scaled: bool) -> Result<(f64, f64)> {
    match model {
        PosteriorModel::Dist2 { eps } => dist2_likelihoods(t, *eps, leaf_spins),
        _ => {
            if t.len() > MAX_PLAIN_NODES {
                return Err(Error::Capacity(format!("{} nodes exceed the limit {MAX_PLAIN_NODES}", t.len())));
            }
            Ok(root_likelihoods(t, model, leaf_spins, scaled))
        }
    }
}

/// MAP root spin with its posterior probability under a uniform prior.
/// Exact ties resolve to +1.
pub fn exact_posterior(t: &Tree, model: &PosteriorModel) -> Result<RootEstimate> {
    let (lp, lm) = likelihoods(t, model, None, true)?;
    let z = lp + lm;
    if !(z > 0.0) {
        return Err(Error::Numeric("observation has zero likelihood under the model".into()));
    }
    let p = lp / z;
    Ok(if p >= 0.5 {
        RootEstimate { spin: Spin::Plus, confidence: Some(p) }
    } else {
        RootEstimate { spin: Spin::Minus, confidence: Some(1.0 - p) }
    })
}

/// sqrt(2 Σ_leaves Θ_v²) with Θ_v the product of 1 - 2ε_e along the path,
/// evaluated on the eased model: the root's edges carry no noise. Easing
/// only helps the estimator (the eased model can simulate both the
/// original first level and a D⁺ pair at a MARKED root), so the bound
/// covers the original law including the correlated root pair.
pub fn advantage_bound(t: &Tree, noise: &EdgeNoise) -> f64 {
    let eased = noise.eased(t);
    let mut theta = vec![1.0f64; t.len()];
    for v in 1..t.len() {
        theta[v] = theta[t.parent(v).unwrap()] * eased.theta(v);
    }
    (2.0 * t.leaves().map(|v| theta[v] * theta[v]).sum::<f64>()).sqrt()
}

/// Exact advantage 2·P(MAP correct) - 1 = ½ Σ_x |P(x | +) - P(x | -)|,
/// enumerating all leaf-spin patterns.
pub fn exact_advantage(t: &Tree, model: &PosteriorModel) -> Result<f64> {
    let leaves: Vec<usize> = t.leaves().collect();
    if leaves.len() > MAX_ENUMERATED_LEAVES {
        return Err(Error::Capacity(format!("{} leaves exceed {MAX_ENUMERATED_LEAVES}", leaves.len())));
    }
    let mut spins = t.spins().to_vec();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << leaves.len()) {
        for (j, &v) in leaves.iter().enumerate() {
            spins[v] = Spin::from_bool(mask >> j & 1 == 1);
        }
        let (lp, lm) = likelihoods(t, model, Some(&spins), false)?;
        total += (lp - lm).abs();
    }
    Ok(0.5 * total)
}

/// Probability that an estimator recovers the root, averaged exactly over
/// leaf patterns; `estimate` is called once per pattern with the root spin
/// set to +1 and the result is compared against +1 (the laws used here
/// are symmetric under a global flip).
pub fn exact_success<F: FnMut(&Tree) -> f64>(t: &Tree, model: &PosteriorModel, mut p_plus: F) -> Result<f64> {
    let leaves: Vec<usize> = t.leaves().collect();
    if leaves.len() > MAX_ENUMERATED_LEAVES {
        return Err(Error::Capacity(format!("{} leaves exceed {MAX_ENUMERATED_LEAVES}", leaves.len())));
    }
    let mut work = t.clone();
    work.set_spin(0, Spin::Plus);
    let mut total = 0.0;
    let mut norm = 0.0;
    for mask in 0u64..(1u64 << leaves.len()) {
        for (j, &v) in leaves.iter().enumerate() {
            work.set_spin(v, Spin::from_bool(mask >> j & 1 == 1));
        }
        let (lp, _) = likelihoods(t, model, Some(work.spins()), false)?;
        norm += lp;
        total += lp * p_plus(&work);
    }
    Ok(if norm > 0.0 { total / norm } else { 0.5 })
}

/// Spin-flip coupling for dissortative trees: negate spins on odd levels.
pub fn odd_level_flip(t: &Tree) -> Tree {
    let mut out = t.clone();
    for v in 0..t.len() {
        if t.depth(v) % 2 == 1 {
            out.set_spin(v, -t.spin(v));
        }
    }
    out
}

/// Recursive majority against the opposite-path adversary, simulated
/// without materialising the tree.
///
/// A node whose spin still equals the root's has its mutated children
/// replaced by paths that report the wrong spin, and recurses into the
/// others. Children are evaluated lazily and evaluation stops once the
/// vote is decided, which leaves the law of the outcome unchanged. Returns
/// whether the root is recovered.
pub fn simulate_recursive_majority_opposite_path(birth: Birth, eps: f64, depth: usize, seed: u64) -> Result<bool> {
    let mut r = rng::stream(seed, "recmaj/opp-path");
    let sampler = ChildSampler::new(birth, eps)?;
    Ok(opp_path_report(&sampler, depth, &mut r))
}

struct ChildSampler {
    birth: Birth,
    /// CDF of the number of unmutated children (regular birth).
    cdf: Vec<f64>,
    same: Option<Poisson<f64>>,
    flipped: Option<Poisson<f64>>,
}

impl ChildSampler {
    fn new(birth: Birth, eps: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps) {
            return Err(crate::error::param(format!("eps must lie in [0, 1/2), got {eps}")));
        }
        match birth {
            Birth::Regular(k) => {
                let mut cdf = Vec::with_capacity(k + 1);
                let mut acc = 0.0;
                for c in 0..=k {
                    acc += binom_pmf(k, c, 1.0 - eps);
                    cdf.push(acc);
                }
                Ok(ChildSampler { birth, cdf, same: None, flipped: None })
            }
            Birth::Poisson(k) => {
                let make = |m: f64| if m > 0.0 { Poisson::new(m).ok() } else { None };
                Ok(ChildSampler { birth, cdf: Vec::new(), same: make(k * (1.0 - eps)), flipped: make(k * eps) })
            }
        }
    }

    /// (unmutated, mutated) child counts.
    fn draw(&self, r: &mut SimRng) -> (usize, usize) {
        match self.birth {
            Birth::Regular(k) => {
                let u: f64 = r.random();
                let c = self.cdf.iter().position(|&x| u < x).unwrap_or(k);
                (c, k - c)
            }
            Birth::Poisson(_) => {
                let s = self.same.as_ref().map_or(0, |d| d.sample(r) as usize);
                let f = self.flipped.as_ref().map_or(0, |d| d.sample(r) as usize);
                (s, f)
            }
        }
    }
}

fn binom_pmf(k: usize, c: usize, p: f64) -> f64 {
    let mut coef = 1.0f64;
    for i in 0..c {
        coef = coef * (k - i) as f64 / (i + 1) as f64;
    }
    coef * p.powi(c as i32) * (1.0 - p).powi((k - c) as i32)
}

fn opp_path_report(s: &ChildSampler, height: usize, r: &mut SimRng) -> bool {
    if height == 0 {
        return true;
    }
    let (same, flipped) = s.draw(r);
    let total = same + flipped;
    if total == 0 {
        // childless internal node
        return r.random_bool(0.5);
    }
    let (mut yes, mut no) = (0usize, flipped);
    let mut remaining = same;
    while remaining > 0 && 2 * yes <= total && 2 * no <= total {
        if opp_path_report(s, height - 1, r) {
            yes += 1;
        } else {
            no += 1;
        }
        remaining -= 1;
    }
    if 2 * yes > total {
        true
    } else if 2 * no > total {
        false
    } else {
        r.random_bool(0.5)
    }
}

/// Mirror of the opposite-path adversary for `mode`, then the matching
/// estimator: recursive majority (assortative) or anti-majority.
pub fn recover_with_mode(t: &Tree, mode: Mode, seed: u64) -> RootEstimate {
    match mode {
        Mode::Assortative => recursive_majority(t, seed),
        Mode::Dissortative => recursive_anti_majority(t, seed),
    }
}
