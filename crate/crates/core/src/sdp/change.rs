//! Monotone changes to the observed adjacency: entries that only move the
//! objective toward σσᵀ.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{input, param, Result};
use crate::rng;
use crate::sbm::{Graph, Mode, SpinAssignment};

/// Sparse symmetric ±1 pattern S, stored once per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneChange {
    /// (u, v, s) with u < v and s ∈ {+1, -1}.
    pub entries: Vec<(usize, usize, i8)>,
    pub truth: SpinAssignment,
    pub mode: Mode,
}

impl MonotoneChange {
    pub fn empty(truth: SpinAssignment, mode: Mode) -> Self {
        MonotoneChange { entries: Vec::new(), truth, mode }
    }

    /// Nonzero matrix entries, counting (u,v) and (v,u) separately.
    pub fn nnz(&self) -> usize {
        2 * self.entries.len()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.truth.len();
        let mut s = DMatrix::zeros(n, n);
        for &(u, v, x) in &self.entries {
            s[(u, v)] = x as f64;
            s[(v, u)] = x as f64;
        }
        s
    }

    /// Change in the SDP objective B caused by applying S to A. In both
    /// modes each entry equals σ_u σ_v, which is what makes σσᵀ maximal.
    pub fn objective_delta(&self) -> DMatrix<f64> {
        let sign = match self.mode {
            Mode::Assortative => 1.0,
            Mode::Dissortative => -1.0,
        };
        self.dense() * sign
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChangeBudget {
    Empty,
    /// Each eligible addition with probability `add`, each eligible
    /// deletion with probability `delete`.
    Independent { add: f64, delete: f64 },
    /// Delete every edge the mode allows deleting (cross edges when
    /// assortative).
    DeleteAll,
    /// Every eligible entry with both endpoints in the subset.
    WithinSubset(Vec<usize>),
}

fn addable(mode: Mode, same: bool) -> bool {
    match mode {
        Mode::Assortative => same,
        Mode::Dissortative => !same,
    }
}

/// +1 / -1 if the pair may be changed in that direction, else 0.
fn eligible(g: &Graph, truth: &SpinAssignment, mode: Mode, u: usize, v: usize) -> i8 {
    let same = truth.get(u) == truth.get(v);
    let edge = g.has_edge(u, v);
    if !edge && addable(mode, same) {
        1
    } else if edge && !addable(mode, same) {
        -1
    } else {
        0
    }
}

pub fn sample_monotone_change(
    g: &Graph,
    truth: &SpinAssignment,
    budget: &ChangeBudget,
    mode: Mode,
    seed: u64,
) -> Result<MonotoneChange> {
    let n = g.node_count();
    if truth.len() != n || g.spins() != truth {
        return Err(input("truth must match the graph's stored spins"));
    }
    let mut out = MonotoneChange::empty(truth.clone(), mode);
    match budget {
        ChangeBudget::Empty => {}
        ChangeBudget::Independent { add, delete } => {
            if !(0.0..=1.0).contains(add) || !(0.0..=1.0).contains(delete) {
                return Err(param("change probabilities must lie in [0, 1]"));
            }
            let mut r = rng::stream(seed, "sdp/change");
            for u in 0..n {
                for v in u + 1..n {
                    let e = eligible(g, truth, mode, u, v);
                    let p = match e {
                        1 => *add,
                        -1 => *delete,
                        _ => continue,
                    };
                    if r.random_bool(p) {
                        out.entries.push((u, v, e));
                    }
                }
            }
        }
        ChangeBudget::DeleteAll => {
            for (u, v) in g.edges() {
                if eligible(g, truth, mode, u, v) == -1 {
                    out.entries.push((u, v, -1));
                }
            }
        }
        ChangeBudget::WithinSubset(nodes) => {
            let mut nodes = nodes.clone();
            nodes.sort_unstable();
            nodes.dedup();
            if nodes.last().is_some_and(|&v| v >= n) {
                return Err(input("subset node out of range"));
            }
            for (i, &u) in nodes.iter().enumerate() {
                for &v in &nodes[i + 1..] {
                    let e = eligible(g, truth, mode, u, v);
                    if e != 0 {
                        out.entries.push((u, v, e));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// True iff every entry follows the sign pattern: +1 only on addable
/// non-edges, -1 only on deletable edges, no diagonal, no repeats.
pub fn validate_monotone_change(s: &MonotoneChange, g: &Graph) -> bool {
    let n = g.node_count();
    if s.truth.len() != n {
        return false;
    }
    let mut seen = std::collections::HashSet::new();
    s.entries.iter().all(|&(u, v, x)| {
        u < v && v < n && (x == 1 || x == -1) && seen.insert((u, v)) && eligible(g, &s.truth, s.mode, u, v) == x
    })
}

/// The graph with adjacency A + S.
pub fn apply_change(g: &Graph, s: &MonotoneChange) -> Result<Graph> {
    if !validate_monotone_change(s, g) {
        return Err(input("change is not monotone for this graph"));
    }
    let mut out = g.clone();
    for &(u, v, x) in &s.entries {
        if x == 1 {
            out.add_edge(u, v)?;
        } else {
            out.remove_edge(u, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{sample_precursor, ModelParams, Spin};

    fn fixture(mode: Mode) -> Graph {
        let (a, b) = match mode {
            Mode::Assortative => (8.0, 3.0),
            Mode::Dissortative => (3.0, 8.0),
        };
        sample_precursor(&ModelParams::new(60, a, b, mode).unwrap(), 4)
    }

    #[test]
    fn empty_and_delete_all() {
        for mode in [Mode::Assortative, Mode::Dissortative] {
            let g = fixture(mode);
            let t = g.spins().clone();
            let s = sample_monotone_change(&g, &t, &ChangeBudget::Empty, mode, 0).unwrap();
            assert_eq!(s.nnz(), 0);
            assert!(validate_monotone_change(&s, &g));
            let s = sample_monotone_change(&g, &t, &ChangeBudget::DeleteAll, mode, 0).unwrap();
            let h = apply_change(&g, &s).unwrap();
            assert!(h.edges().all(|(u, v)| !mode.deletable(t.get(u), t.get(v))));
        }
    }

    #[test]
    fn sampled_changes_validate_and_align() {
        for mode in [Mode::Assortative, Mode::Dissortative] {
            let g = fixture(mode);
            let t = g.spins().clone();
            let x = nalgebra::DVector::from_vec(t.to_f64());
            let zr = &x * x.transpose();
            for seed in 0..10 {
                let budget = ChangeBudget::Independent { add: 0.05, delete: 0.5 };
                let s = sample_monotone_change(&g, &t, &budget, mode, seed).unwrap();
                assert!(validate_monotone_change(&s, &g));
                assert_eq!(s.objective_delta().dot(&zr), s.nnz() as f64);
            }
            let s = sample_monotone_change(&g, &t, &ChangeBudget::WithinSubset(vec![0, 1, 2, 3, 4, 5]), mode, 0).unwrap();
            assert!(validate_monotone_change(&s, &g));
        }
    }

    #[test]
    fn rejects_unhelpful_entries() {
        let spins = SpinAssignment::new(vec![Spin::Plus, Spin::Minus, Spin::Plus]);
        let g = Graph::from_edges(spins.clone(), &[(0, 1)]).unwrap();
        let mut s = MonotoneChange::empty(spins.clone(), Mode::Assortative);
        s.entries.push((1, 2, 1));
        assert!(!validate_monotone_change(&s, &g));
        s.entries = vec![(0, 2, 1), (0, 1, -1)];
        assert!(validate_monotone_change(&s, &g));
        s.entries.push((0, 2, 1));
        assert!(!validate_monotone_change(&s, &g));
        let wrong = SpinAssignment::new(vec![Spin::Plus; 3]);
        assert!(sample_monotone_change(&g, &wrong, &ChangeBudget::Empty, Mode::Assortative, 0).is_err());
    }
}
