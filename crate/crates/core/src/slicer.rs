//! Path-condition slicing: keep only the clauses that transitively share a
//! variable or an owning object with the suffix.

use std::collections::BTreeSet;

use crate::symcore::PathCondition;

/// Undirected dependency edges between clause indices. Edges are stored
/// as `(low, high)` pairs, so symmetry is structural and self-loops absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    pub nodes: usize,
    pub variable_edges: BTreeSet<(usize, usize)>,
    pub object_edges: BTreeSet<(usize, usize)>,
}

impl DependencyGraph {
    pub fn connected(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.variable_edges.contains(&key) || self.object_edges.contains(&key)
    }

    /// Indices reachable from `start` over both edge kinds, sorted.
    pub fn component_of(&self, start: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in self.variable_edges.iter().chain(&self.object_edges) {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        (0..self.nodes).filter(|&i| seen[i]).collect()
    }
}

pub fn build_dependency_graph(pc: &PathCondition) -> DependencyGraph {
    let vars: Vec<_> = pc.clauses().iter().map(|c| c.vars_of()).collect();
    let objs: Vec<_> = pc.clauses().iter().map(|c| c.objects_of()).collect();
    let mut g = DependencyGraph {
        nodes: pc.len(),
        ..Default::default()
    };
    for i in 0..pc.len() {
        for j in i + 1..pc.len() {
            if !vars[i].is_disjoint(&vars[j]) {
                g.variable_edges.insert((i, j));
            }
            if !objs[i].is_disjoint(&objs[j]) {
                g.object_edges.insert((i, j));
            }
        }
    }
    g
}

/// Returns the suffix's connected component in original order, suffix last.
/// A path condition without a suffix is sliced around its last clause.
pub fn slice(pc: &PathCondition) -> PathCondition {
    if pc.is_empty() {
        return pc.clone();
    }
    let suffix = pc.suffix_index().unwrap_or(pc.len() - 1);
    let keep = build_dependency_graph(pc).component_of(suffix);
    let mut clauses: Vec<_> = keep
        .iter()
        .filter(|&&i| i != suffix)
        .map(|&i| pc.clauses()[i].clone())
        .collect();
    clauses.push(pc.clauses()[suffix].clone());
    PathCondition::with_suffix(clauses)
}
