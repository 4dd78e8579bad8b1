//! Rooted trees in breadth-first layout.
//!
//! Node 0 is the root and every node's children occupy a contiguous index
//! range, so parents always precede children.

use std::ops::Range;

use crate::error::{input, Result};
use crate::graph_adversary::Topology;
use crate::sbm::{Marking, Spin};

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    parent: Vec<usize>,
    depth: Vec<usize>,
    spin: Vec<Spin>,
    marking: Vec<Marking>,
    cut: Vec<bool>,
    child_start: Vec<usize>,
    child_len: Vec<usize>,
    leaf: Vec<bool>,
}

const NO_PARENT: usize = usize::MAX;

impl Tree {
    /// Builds a tree from a parent list (root has `None`), relaid out in
    /// breadth-first order with children kept in their input order.
    /// Returns the tree and the new index of every input node.
    pub fn from_parents(parents: &[Option<usize>], spins: &[Spin]) -> Result<(Tree, Vec<usize>)> {
        let n = parents.len();
        if n == 0 || spins.len() != n {
            return Err(input("tree needs at least one node and one spin per node"));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(input(format!("expected one root, found {}", roots.len())));
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(p) = parents[v] {
                if p >= n {
                    return Err(input(format!("parent {p} out of range")));
                }
                kids[p].push(v);
            }
        }
        let mut order = Vec::with_capacity(n);
        order.push(roots[0]);
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            order.extend_from_slice(&kids[u]);
            i += 1;
        }
        if order.len() != n {
            return Err(input("parent list contains a cycle"));
        }
        let mut new_index = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            new_index[v] = i;
        }
        let mut t = Tree::with_capacity(n);
        for &v in &order {
            let p = parents[v].map(|p| new_index[p]);
            t.push_node(p, spins[v]);
        }
        t.finish_layout();
        Ok((t, new_index))
    }

    pub(crate) fn with_capacity(n: usize) -> Tree {
        Tree {
            parent: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            spin: Vec::with_capacity(n),
            marking: Vec::with_capacity(n),
            cut: Vec::with_capacity(n),
            child_start: Vec::with_capacity(n),
            child_len: Vec::with_capacity(n),
            leaf: Vec::with_capacity(n),
        }
    }

    /// Appends a node; callers must append in breadth-first order.
    pub(crate) fn push_node(&mut self, parent: Option<usize>, spin: Spin) -> usize {
        let id = self.parent.len();
        match parent {
            None => {
                debug_assert_eq!(id, 0);
                self.parent.push(NO_PARENT);
                self.depth.push(0);
            }
            Some(p) => {
                debug_assert!(p < id);
                self.parent.push(p);
                self.depth.push(self.depth[p] + 1);
            }
        }
        self.spin.push(spin);
        self.marking.push(Marking::None);
        self.cut.push(false);
        self.child_start.push(0);
        self.child_len.push(0);
        self.leaf.push(false);
        id
    }

    /// Fills in child ranges once all nodes are pushed.
    pub(crate) fn finish_layout(&mut self) {
        let n = self.parent.len();
        for v in 0..n {
            self.child_len[v] = 0;
            self.child_start[v] = n;
        }
        for v in 1..n {
            let p = self.parent[v];
            if self.child_len[p] == 0 {
                self.child_start[p] = v;
            }
            debug_assert_eq!(self.child_start[p] + self.child_len[p], v, "children must be contiguous");
            self.child_len[p] += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NO_PARENT).then_some(self.parent[v])
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.depth.last().copied().unwrap_or(0)
    }

    pub fn spin(&self, v: usize) -> Spin {
        self.spin[v]
    }

    pub fn root_spin(&self) -> Spin {
        self.spin[0]
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spin
    }

    pub fn marking(&self, v: usize) -> Marking {
        self.marking[v]
    }

    pub fn markings(&self) -> &[Marking] {
        &self.marking
    }

    pub fn is_cut(&self, v: usize) -> bool {
        self.cut[v]
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        self.child_start[v]..self.child_start[v] + self.child_len[v]
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.child_len[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.leaf[v]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.leaf[v])
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf.iter().filter(|&&l| l).count()
    }

    /// (number of +1 leaves, number of -1 leaves).
    pub fn leaf_census(&self) -> (usize, usize) {
        let plus = self.leaves().filter(|&v| self.spin[v].is_plus()).count();
        (plus, self.leaf_count() - plus)
    }

    /// Nodes on the path from the root to `v`, excluding the root.
    pub fn path_to(&self, v: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut u = v;
        while let Some(p) = self.parent(u) {
            path.push(u);
            u = p;
        }
        path.reverse();
        path
    }

    pub fn set_spin(&mut self, v: usize, s: Spin) {
        self.spin[v] = s;
    }

    pub fn set_leaf(&mut self, v: usize, leaf: bool) {
        self.leaf[v] = leaf;
    }

    pub fn set_marking(&mut self, v: usize, m: Marking) {
        self.marking[v] = m;
    }

    pub fn set_cut(&mut self, v: usize, cut: bool) {
        self.cut[v] = cut;
    }

    /// Marks every node at depth `d` as a leaf and no other node.
    pub fn with_leaves_at_depth(mut self, d: usize) -> Tree {
        for v in 0..self.len() {
            self.leaf[v] = self.depth[v] == d;
        }
        self
    }

    /// Keeps the nodes with `keep[v]` set; the kept set must contain the
    /// root and be closed under taking parents. Node attributes carry
    /// over. Returns the new tree and, for each old node, its new index.
    pub fn retain(&self, keep: &[bool]) -> (Tree, Vec<Option<usize>>) {
        assert!(keep[0], "root must be kept");
        let mut map = vec![None; self.len()];
        let mut t = Tree::with_capacity(self.len());
        // BFS order restricted to a parent-closed set is again BFS order
        // with contiguous children.
        for v in 0..self.len() {
            if !keep[v] {
                continue;
            }
            let p = self.parent(v).map(|p| map[p].expect("kept set must be parent-closed"));
            let id = t.push_node(p, self.spin[v]);
            t.marking[id] = self.marking[v];
            t.cut[id] = self.cut[v];
            t.leaf[id] = self.leaf[v];
            map[v] = Some(id);
        }
        t.finish_layout();
        (t, map)
    }

    /// Checks parent/depth consistency and the leaf rule that leaves have
    /// no children.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() || self.parent[0] != NO_PARENT {
            return Err(input("root must be node 0"));
        }
        for v in 1..self.len() {
            let p = self.parent[v];
            if p >= v || self.depth[v] != self.depth[p] + 1 {
                return Err(input(format!("node {v} breaks breadth-first layout")));
            }
            if self.leaf[p] {
                return Err(input(format!("leaf {p} has a child")));
            }
        }
        Ok(())
    }
}

impl Topology for Tree {
    fn node_count(&self) -> usize {
        self.len()
    }
    fn degree(&self, v: usize) -> usize {
        self.child_len[v] + usize::from(v != 0)
    }
    fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        if let Some(p) = self.parent(v) {
            f(p);
        }
        self.children(v).for_each(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relayout_from_parent_list() {
        // 3 is the root, 0 and 2 its children, 1 child of 2.
        let parents = [Some(3), Some(2), Some(3), None];
        let spins = [Spin::Plus, Spin::Minus, Spin::Plus, Spin::Minus];
        let (t, idx) = Tree::from_parents(&parents, &spins).unwrap();
        assert_eq!(idx, vec![1, 3, 2, 0]);
        assert_eq!(t.children(0), 1..3);
        assert_eq!(t.children(2), 3..4);
        assert_eq!(t.depth(3), 2);
        assert_eq!(t.spin(3), Spin::Minus);
        assert_eq!(t.height(), 2);
        t.validate().unwrap();
        assert_eq!(t.path_to(3), vec![2, 3]);
        assert!(Tree::from_parents(&[None, None], &spins[..2]).is_err());
        assert!(Tree::from_parents(&[Some(1), Some(0), None], &spins[..3]).is_err());
    }

    #[test]
    fn retain_keeps_layout() {
        let parents = [None, Some(0), Some(0), Some(1), Some(1), Some(2)];
        let (t, _) = Tree::from_parents(&parents, &[Spin::Plus; 6]).unwrap();
        let t = t.with_leaves_at_depth(2);
        let (r, map) = t.retain(&[true, true, true, false, true, true]);
        assert_eq!(r.len(), 5);
        assert_eq!(map[3], None);
        assert_eq!(r.children(1).len(), 1);
        assert_eq!(r.leaf_count(), 2);
        r.validate().unwrap();
    }

    #[test]
    fn graph_degree_counts_parent() {
        let parents = [None, Some(0), Some(0), Some(1)];
        let (t, _) = Tree::from_parents(&parents, &[Spin::Plus; 4]).unwrap();
        assert_eq!(Topology::degree(&t, 0), 2);
        assert_eq!(Topology::degree(&t, 1), 2);
        assert_eq!(Topology::degree(&t, 3), 1);
    }
}
