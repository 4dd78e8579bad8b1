//! The monotone graph adversary: GOOD/MARKED marking, probabilistic
//! cutting of MARKED nodes, and the precursor count.

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{input, param, Error, Result};
use crate::rng;
use crate::sbm::{Graph, Marking, Mode, ModelParams, Spin};

/// Anything whose node degrees and neighbourhoods the marking rule can see.
pub trait Topology {
    fn node_count(&self) -> usize;
    fn degree(&self, v: usize) -> usize;
    fn for_each_neighbor(&self, v: usize, f: impl FnMut(usize));
}

impl Topology for Graph {
    fn node_count(&self) -> usize {
        Graph::node_count(self)
    }
    fn degree(&self, v: usize) -> usize {
        Graph::degree(self, v)
    }
    fn for_each_neighbor(&self, v: usize, f: impl FnMut(usize)) {
        self.neighbors(v).iter().copied().for_each(f)
    }
}

/// Cut probability δ(ε): 1 for ε ≤ 1/3, else (1-2ε)²/ε².
///
/// ε = 1/2 is accepted and gives 0, the continuous extension used by the
/// signal-free model a = b.
pub fn delta_of_eps(eps: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(param(format!("eps must lie in [0, 1/2], got {eps}")));
    }
    if eps <= 1.0 / 3.0 {
        Ok(1.0)
    } else {
        Ok(((1.0 - 2.0 * eps) / eps).powi(2))
    }
}

/// Nodes with at least three neighbours of degree other than 2.
pub fn goodness<T: Topology>(t: &T) -> Vec<bool> {
    (0..t.node_count())
        .map(|v| {
            let mut count = 0;
            t.for_each_neighbor(v, |u| {
                if t.degree(u) != 2 {
                    count += 1;
                }
            });
            count >= 3
        })
        .collect()
}

/// GOOD pass over all nodes, then MARKED: degree 2 with two GOOD
/// neighbours.
pub fn compute_markings<T: Topology>(t: &T) -> Vec<Marking> {
    let good = goodness(t);
    (0..t.node_count())
        .map(|v| {
            if good[v] {
                Marking::Good
            } else if t.degree(v) == 2 {
                let mut both = true;
                t.for_each_neighbor(v, |u| both &= good[u]);
                if both {
                    Marking::Marked
                } else {
                    Marking::None
                }
            } else {
                Marking::None
            }
        })
        .collect()
}

/// Marks a fresh precursor graph.
pub fn assign_markings(g: &Graph) -> Result<Graph> {
    if g.markings().iter().any(|&m| m != Marking::None) {
        return Err(input("graph is already marked"));
    }
    let marks = compute_markings(g);
    g.clone().with_markings(marks)
}

/// MARKED, degree 2, and both neighbours on the deletable side of `v`.
pub fn is_cuttable(g: &Graph, v: usize, mode: Mode) -> bool {
    g.marking(v) == Marking::Marked
        && g.degree(v) == 2
        && g.neighbors(v).iter().all(|&u| mode.deletable(g.spin(v), g.spin(u)))
}

#[derive(Debug, Clone)]
pub struct AdversaryOutcome {
    pub graph: Graph,
    pub cut_nodes: Vec<usize>,
    /// Cuttable nodes that survived.
    pub w: usize,
    /// Cut nodes.
    pub m: usize,
    pub delta: f64,
    pub mode: Mode,
}

/// Runs the adversary on a marked precursor. The cut probability is
/// δ of the effective noise, so dissortative graphs use δ(1 - ε).
pub fn apply_adversary(g: &Graph, params: &ModelParams, seed: u64) -> Result<AdversaryOutcome> {
    if g.node_count() != params.n {
        return Err(input(format!("graph has {} nodes, params say {}", g.node_count(), params.n)));
    }
    let delta = delta_of_eps(params.effective_eps())?;
    Ok(apply_adversary_with_delta(g, params.mode, delta, seed))
}

pub fn apply_adversary_with_delta(g: &Graph, mode: Mode, delta: f64, seed: u64) -> AdversaryOutcome {
    let mut r = rng::stream(seed, "adversary/cut");
    let mut post = g.clone();
    let mut cut_nodes = Vec::new();
    let mut w = 0;
    for v in 0..g.node_count() {
        if !is_cuttable(g, v, mode) {
            continue;
        }
        if r.random_bool(delta.clamp(0.0, 1.0)) {
            let nb = g.neighbors(v).to_vec();
            for u in nb {
                post.remove_edge(v, u);
            }
            cut_nodes.push(v);
        } else {
            w += 1;
        }
    }
    let m = cut_nodes.len();
    AdversaryOutcome { graph: post, cut_nodes, w, m, delta, mode }
}

/// Counts behind the precursor formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrecursorCensus {
    pub good_plus: u64,
    pub good_minus: u64,
    pub isolated_plus: u64,
    pub isolated_minus: u64,
}

impl PrecursorCensus {
    pub fn g(&self) -> u64 {
        self.good_plus + self.good_minus
    }
    pub fn m(&self) -> u64 {
        self.isolated_plus + self.isolated_minus
    }
    /// Twice the excess of +1 spins among isolated MARKED nodes.
    pub fn alpha_twice(&self) -> i64 {
        self.isolated_plus as i64 - self.isolated_minus as i64
    }
    /// Twice the excess of +1 spins among GOOD nodes.
    pub fn beta_twice(&self) -> i64 {
        self.good_plus as i64 - self.good_minus as i64
    }
    pub fn alpha(&self) -> f64 {
        self.alpha_twice() as f64 / 2.0
    }
    pub fn beta(&self) -> f64 {
        self.beta_twice() as f64 / 2.0
    }
}

pub fn precursor_census(g: &Graph) -> PrecursorCensus {
    let mut c = PrecursorCensus::default();
    for v in 0..g.node_count() {
        let plus = g.spin(v).is_plus();
        match g.marking(v) {
            Marking::Good => {
                if plus {
                    c.good_plus += 1
                } else {
                    c.good_minus += 1
                }
            }
            Marking::Marked if g.degree(v) == 0 => {
                if plus {
                    c.isolated_plus += 1
                } else {
                    c.isolated_minus += 1
                }
            }
            _ => {}
        }
    }
    c
}

fn choose2(x: u64) -> BigUint {
    BigUint::from(x) * BigUint::from(x.saturating_sub(1)) / 2u32
}

/// Number of precursors consistent with a post-adversary graph: each
/// isolated MARKED node reattaches to an unordered pair of GOOD nodes on
/// the other side (assortative) or on its own side (dissortative).
pub fn count_precursors(g: &Graph, mode: Mode) -> (BigUint, PrecursorCensus) {
    let c = precursor_census(g);
    let (plus_pool, minus_pool) = match mode {
        Mode::Assortative => (c.good_minus, c.good_plus),
        Mode::Dissortative => (c.good_plus, c.good_minus),
    };
    let count = choose2(plus_pool).pow(c.isolated_plus as u32) * choose2(minus_pool).pow(c.isolated_minus as u32);
    (count, c)
}

/// All precursors, by reattaching every isolated MARKED node to each
/// admissible GOOD pair.
pub fn enumerate_precursors(g: &Graph, mode: Mode, limit: usize) -> Result<Vec<Graph>> {
    let (count, _) = count_precursors(g, mode);
    if count > BigUint::from(limit) {
        return Err(Error::Capacity(format!("{count} precursors exceed limit {limit}")));
    }
    let isolated: Vec<usize> =
        (0..g.node_count()).filter(|&v| g.marking(v) == Marking::Marked && g.degree(v) == 0).collect();
    let pools: Vec<Vec<(usize, usize)>> = isolated
        .iter()
        .map(|&v| {
            let want = match mode {
                Mode::Assortative => -g.spin(v),
                Mode::Dissortative => g.spin(v),
            };
            let good: Vec<usize> =
                (0..g.node_count()).filter(|&u| g.marking(u) == Marking::Good && g.spin(u) == want).collect();
            let mut pairs = Vec::new();
            for i in 0..good.len() {
                for j in i + 1..good.len() {
                    pairs.push((good[i], good[j]));
                }
            }
            pairs
        })
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; isolated.len()];
    if pools.iter().any(Vec::is_empty) {
        return Ok(out);
    }
    loop {
        let mut h = g.clone();
        for (i, &v) in isolated.iter().enumerate() {
            let (x, y) = pools[i][choice[i]];
            h.add_edge(v, x)?;
            h.add_edge(v, y)?;
        }
        out.push(h);
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < pools[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// (1-δ)^w δ^m with 0⁰ = 1.
pub fn precursor_probability(w: u64, m: u64, delta: f64) -> f64 {
    let pow = |x: f64, e: u64| if e == 0 { 1.0 } else { x.powf(e as f64) };
    pow(1.0 - delta, w) * pow(delta, m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A deleted edge that the adversary was not allowed to delete.
    IllegalDeletion { u: usize, v: usize },
    /// An edge present after but not before.
    AddedEdge { u: usize, v: usize },
    /// A GOOD node with degree below 3 after cutting.
    GoodDegree { v: usize, degree: usize },
    /// A degree-2 node in the output whose neighbourhood differs from the
    /// precursor.
    NewDegreeTwo { v: usize },
    /// GOOD marking disagrees with the goodness property on the output.
    GoodnessMismatch { v: usize, marked_good: bool, has_property: bool },
    /// A MARKED node that is neither isolated nor degree 2 with two GOOD
    /// neighbours, or such a node that is not MARKED.
    MarkedMismatch { v: usize },
    /// A cut node that is not isolated, or did not have degree 2.
    BadCut { v: usize },
    /// Markings changed between precursor and output.
    MarkingChanged { v: usize },
    /// The recorded counts disagree with the graphs.
    CountMismatch { what: &'static str, recorded: usize, actual: usize },
}

/// Checks the structural facts every adversary outcome must satisfy.
pub fn verify_structure(pre: &Graph, post: &AdversaryOutcome) -> Vec<Violation> {
    let g = &post.graph;
    let mut out = Vec::new();
    if pre.node_count() != g.node_count() {
        out.push(Violation::CountMismatch { what: "nodes", recorded: g.node_count(), actual: pre.node_count() });
        return out;
    }
    for (u, v) in pre.edges() {
        if !g.has_edge(u, v) && !post.mode.deletable(pre.spin(u), pre.spin(v)) {
            out.push(Violation::IllegalDeletion { u, v });
        }
    }
    for (u, v) in g.edges() {
        if !pre.has_edge(u, v) {
            out.push(Violation::AddedEdge { u, v });
        }
    }
    for v in 0..g.node_count() {
        if pre.marking(v) != g.marking(v) {
            out.push(Violation::MarkingChanged { v });
        }
    }
    let good = goodness(g);
    for v in 0..g.node_count() {
        let marked_good = g.marking(v) == Marking::Good;
        if marked_good && g.degree(v) < 3 {
            out.push(Violation::GoodDegree { v, degree: g.degree(v) });
        }
        if g.degree(v) == 2 && (pre.degree(v) != 2 || pre.neighbors(v) != g.neighbors(v)) {
            out.push(Violation::NewDegreeTwo { v });
        }
        if marked_good != good[v] {
            out.push(Violation::GoodnessMismatch { v, marked_good, has_property: good[v] });
        }
        let shape = g.degree(v) == 2 && g.neighbors(v).iter().all(|&u| good[u]);
        let marked = g.marking(v) == Marking::Marked;
        if (marked && !(shape || g.degree(v) == 0)) || (shape && !marked) {
            out.push(Violation::MarkedMismatch { v });
        }
    }
    for &v in &post.cut_nodes {
        if g.degree(v) != 0 || pre.degree(v) != 2 || pre.marking(v) != Marking::Marked {
            out.push(Violation::BadCut { v });
        }
    }
    if post.m != post.cut_nodes.len() {
        out.push(Violation::CountMismatch { what: "m", recorded: post.m, actual: post.cut_nodes.len() });
    }
    let cuttable = (0..pre.node_count()).filter(|&v| is_cuttable(pre, v, post.mode)).count();
    if post.w + post.m != cuttable {
        out.push(Violation::CountMismatch { what: "w + m", recorded: post.w + post.m, actual: cuttable });
    }
    out
}

/// Spin with the sign flipped on one side of a bipartition; used to map
/// dissortative instances onto assortative ones.
pub fn flip_spins_where(g: &Graph, flip: &[bool]) -> Result<Graph> {
    let spins: Vec<Spin> = (0..g.node_count()).map(|v| if flip[v] { -g.spin(v) } else { g.spin(v) }).collect();
    g.clone().with_spins(spins.into())
}
