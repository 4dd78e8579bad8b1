//! Two-community stochastic block model: parameters, graph type, precursor
//! sampling and the basic recovery metrics.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Mul, Neg};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{input, param, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    pub fn from_sign(x: i64) -> Spin {
        if x >= 0 {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    pub fn from_bool(plus: bool) -> Spin {
        if plus {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    pub fn value(self) -> i64 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    pub fn flipped(self) -> Spin {
        -self
    }

    pub fn is_plus(self) -> bool {
        self == Spin::Plus
    }
}

impl Neg for Spin {
    type Output = Spin;
    fn neg(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }
}

impl Mul for Spin {
    type Output = Spin;
    fn mul(self, rhs: Spin) -> Spin {
        Spin::from_bool(self == rhs)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Plus => "+1",
            Spin::Minus => "-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Marking {
    Good,
    Marked,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Assortative,
    Dissortative,
}

impl Mode {
    /// Whether an edge between spins `s` and `t` is one the monotone
    /// adversary may delete.
    pub fn deletable(self, s: Spin, t: Spin) -> bool {
        match self {
            Mode::Assortative => s != t,
            Mode::Dissortative => s == t,
        }
    }
}

/// Parameters of G(n, a/n, b/n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub mode: Mode,
}

impl ModelParams {
    /// Validates the rates. `a == b` is accepted in either mode as the
    /// signal-free null model.
    pub fn new(n: usize, a: f64, b: f64, mode: Mode) -> Result<Self> {
        if n == 0 {
            return Err(param("n must be at least 1"));
        }
        for (name, x) in [("a", a), ("b", b)] {
            if !x.is_finite() || x < 0.0 {
                return Err(param(format!("{name} must be finite and nonnegative, got {x}")));
            }
            if x / n as f64 > 1.0 {
                return Err(param(format!("{name}/n = {} exceeds 1", x / n as f64)));
            }
        }
        match mode {
            Mode::Assortative if a < b => {
                return Err(param(format!("assortative mode needs a >= b (a={a}, b={b})")))
            }
            Mode::Dissortative if b < a => {
                return Err(param(format!("dissortative mode needs b >= a (a={a}, b={b})")))
            }
            _ => {}
        }
        Ok(ModelParams { n, a, b, mode })
    }

    pub fn from_k_eps(n: usize, k: f64, eps: f64, mode: Mode) -> Result<Self> {
        Self::new(n, 2.0 * k * (1.0 - eps), 2.0 * k * eps, mode)
    }

    /// Average degree (a+b)/2.
    pub fn k(&self) -> f64 {
        (self.a + self.b) / 2.0
    }

    /// b/(a+b); 0 for the empty model.
    pub fn eps(&self) -> f64 {
        if self.a + self.b == 0.0 {
            0.0
        } else {
            self.b / (self.a + self.b)
        }
    }

    /// The noise seen through the odd-level spin flip: `eps` in
    /// assortative mode, `1 - eps` in dissortative mode.
    pub fn effective_eps(&self) -> f64 {
        match self.mode {
            Mode::Assortative => self.eps(),
            Mode::Dissortative => 1.0 - self.eps(),
        }
    }

    /// The default regularizer (a+b)/(2n).
    pub fn lambda(&self) -> f64 {
        (self.a + self.b) / (2.0 * self.n as f64)
    }
}

/// A ±1 labelling of the nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinAssignment(Vec<Spin>);

impl SpinAssignment {
    pub fn new(spins: Vec<Spin>) -> Self {
        SpinAssignment(spins)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> Spin {
        self.0[v]
    }

    pub fn as_slice(&self) -> &[Spin] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Spin> + '_ {
        self.0.iter().copied()
    }

    pub fn negated(&self) -> SpinAssignment {
        SpinAssignment(self.0.iter().map(|&s| -s).collect())
    }

    /// Spins as a ±1.0 vector.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.value() as f64).collect()
    }

    pub fn into_vec(self) -> Vec<Spin> {
        self.0
    }
}

impl From<Vec<Spin>> for SpinAssignment {
    fn from(v: Vec<Spin>) -> Self {
        SpinAssignment(v)
    }
}

/// Undirected simple graph with spins and markings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    spins: SpinAssignment,
    markings: Vec<Marking>,
}

impl Graph {
    pub fn empty(spins: SpinAssignment) -> Graph {
        let n = spins.len();
        Graph { adjacency: vec![Vec::new(); n], spins, markings: vec![Marking::None; n] }
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(spins: SpinAssignment, edges: &[(usize, usize)]) -> Result<Graph> {
        let n = spins.len();
        let mut g = Graph::empty(spins);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(input(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(input(format!("self-loop at {u}")));
            }
            g.adjacency[u].push(v);
            g.adjacency[v].push(u);
        }
        for (u, list) in g.adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(input(format!("duplicate edge at node {u}")));
            }
        }
        Ok(g)
    }

    pub(crate) fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>, spins: SpinAssignment) -> Graph {
        let n = adjacency.len();
        debug_assert_eq!(n, spins.len());
        Graph { adjacency, spins, markings: vec![Marking::None; n] }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn spins(&self) -> &SpinAssignment {
        &self.spins
    }

    pub fn spin(&self, v: usize) -> Spin {
        self.spins.get(v)
    }

    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    pub fn marking(&self, v: usize) -> Marking {
        self.markings[v]
    }

    pub fn with_markings(mut self, markings: Vec<Marking>) -> Result<Graph> {
        if markings.len() != self.node_count() {
            return Err(input("markings length does not match node count"));
        }
        self.markings = markings;
        Ok(self)
    }

    pub fn with_spins(mut self, spins: SpinAssignment) -> Result<Graph> {
        if spins.len() != self.node_count() {
            return Err(input("spin vector length does not match node count"));
        }
        self.spins = spins;
        Ok(self)
    }

    /// Inserts an edge; returns false if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        let n = self.node_count();
        if u >= n || v >= n || u == v {
            return Err(input(format!("cannot add edge ({u}, {v})")));
        }
        match self.adjacency[u].binary_search(&v) {
            Ok(_) => Ok(false),
            Err(i) => {
                self.adjacency[u].insert(i, v);
                let j = self.adjacency[v].binary_search(&u).unwrap_err();
                self.adjacency[v].insert(j, u);
                Ok(true)
            }
        }
    }

    /// Deletes an edge; returns false if it was absent.
    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u >= self.node_count() || v >= self.node_count() {
            return false;
        }
        match self.adjacency[u].binary_search(&v) {
            Ok(i) => {
                self.adjacency[u].remove(i);
                let j = self.adjacency[v].binary_search(&u).expect("adjacency is symmetric");
                self.adjacency[v].remove(j);
                true
            }
            Err(_) => false,
        }
    }

    /// Cycle rank `m - n + c`; zero iff the graph is a forest.
    pub fn cycle_rank(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        self.edge_count() + components - n
    }
}

/// Draws G(n, a/n, b/n) with i.i.d. fair spins.
///
/// Edges are drawn by geometric skipping over each node's later neighbours
/// in its own and the other community, so each unordered pair is tried
/// exactly once.
pub fn sample_precursor(params: &ModelParams, seed: u64) -> Graph {
    let n = params.n;
    let mut spin_rng = rng::stream(seed, "sbm/spins");
    let spins: Vec<Spin> = (0..n).map(|_| Spin::from_bool(spin_rng.random_bool(0.5))).collect();
    let nf = n as f64;
    let (p_in, p_out) = (params.a / nf, params.b / nf);

    let plus: Vec<usize> = (0..n).filter(|&v| spins[v].is_plus()).collect();
    let minus: Vec<usize> = (0..n).filter(|&v| !spins[v].is_plus()).collect();
    let mut rank = vec![0usize; n];
    for list in [&plus, &minus] {
        for (i, &v) in list.iter().enumerate() {
            rank[v] = i;
        }
    }

    let mut edge_rng = rng::stream(seed, "sbm/edges");
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        let (same, other) = if spins[u].is_plus() { (&plus, &minus) } else { (&minus, &plus) };
        let tail_same = &same[rank[u] + 1..];
        let tail_other = &other[other.partition_point(|&v| v < u)..];
        for (cands, p) in [(tail_same, p_in), (tail_other, p_out)] {
            skip_sample(cands, p, &mut edge_rng, |v| {
                adjacency[u].push(v);
                adjacency[v].push(u);
            });
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Graph::from_sorted_adjacency(adjacency, SpinAssignment(spins))
}

fn skip_sample<R: Rng>(cands: &[usize], p: f64, rng: &mut R, mut hit: impl FnMut(usize)) {
    if p <= 0.0 || cands.is_empty() {
        return;
    }
    if p >= 1.0 {
        cands.iter().for_each(|&v| hit(v));
        return;
    }
    let geo = Geometric::new(p).expect("0 < p < 1");
    let mut i = geo.sample(rng);
    while (i as usize) < cands.len() {
        hit(cands[i as usize]);
        i = i.saturating_add(1).saturating_add(geo.sample(rng));
    }
}

/// Sum of spins.
pub fn census(spins: &SpinAssignment) -> i64 {
    spins.iter().map(Spin::value).sum()
}

/// Radius up to which the graph neighbourhood couples with the broadcast
/// tree: floor(log n / (10 log(2(a+b)))) - 3.
pub fn coupling_radius(params: &ModelParams) -> Result<i64> {
    let base = 2.0 * (params.a + params.b);
    if base <= 1.0 {
        return Err(param(format!("log base 2(a+b) = {base} must exceed 1")));
    }
    let ratio = (params.n as f64).ln() / (10.0 * base.ln());
    Ok(ratio.floor() as i64 - 3)
}

/// A neighbourhood ball with its global node ids.
#[derive(Debug, Clone)]
pub struct Ball {
    pub graph: Graph,
    /// Global id of each local node, ascending.
    pub nodes: Vec<usize>,
    /// Global ids of the nodes at distance exactly `radius`.
    pub boundary: Vec<usize>,
}

/// Induced subgraph on the nodes within distance `radius` of `center`.
///
/// The boundary is the set at distance exactly `radius`. At radius 0 an
/// isolated centre separates nothing and gets an empty boundary.
pub fn extract_ball(g: &Graph, center: usize, radius: usize) -> Result<Ball> {
    if center >= g.node_count() {
        return Err(input(format!("center {center} not in graph")));
    }
    let mut dist: Vec<Option<usize>> = vec![None; g.node_count()];
    dist[center] = Some(0);
    let mut queue = VecDeque::from([center]);
    let mut reached = vec![center];
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        if du == radius {
            continue;
        }
        for &v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                reached.push(v);
                queue.push_back(v);
            }
        }
    }
    reached.sort_unstable();
    let mut local = vec![usize::MAX; g.node_count()];
    for (i, &v) in reached.iter().enumerate() {
        local[v] = i;
    }
    let adjacency = reached
        .iter()
        .map(|&u| g.neighbors(u).iter().filter(|&&v| local[v] != usize::MAX).map(|&v| local[v]).collect())
        .collect();
    let spins = SpinAssignment(reached.iter().map(|&v| g.spin(v)).collect());
    let markings = reached.iter().map(|&v| g.marking(v)).collect();
    let mut sub = Graph::from_sorted_adjacency(adjacency, spins);
    sub.markings = markings;
    let boundary = reached
        .iter()
        .copied()
        .filter(|&v| dist[v] == Some(radius) && !(radius == 0 && g.degree(v) == 0))
        .collect();
    Ok(Ball { graph: sub, nodes: reached, boundary })
}

/// Fraction of agreeing spins, up to a global flip.
pub fn partial_recovery_score(est: &SpinAssignment, truth: &SpinAssignment) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(input(format!("length mismatch: {} vs {}", est.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(input("empty spin vectors"));
    }
    let agree = est.iter().zip(truth.iter()).filter(|(a, b)| a == b).count();
    let n = truth.len();
    Ok(agree.max(n - agree) as f64 / n as f64)
}
