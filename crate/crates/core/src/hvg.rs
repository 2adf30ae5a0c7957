//! Horizontal visibility graphs over interval sequences.
//!
//! Vertices are the intervals in order; `a < b` are joined when every value
//! strictly between them is strictly lower than both endpoints. Equal
//! intermediate values block visibility, so a constant series gives a path.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::preprocess::IbiSequence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HvgError {
    #[error("graph has no edges")]
    NoEdges,
}

/// Undirected, simple, connected graph; vertex `j` is the `j`-th interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HvGraph {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl HvGraph {
    /// Monotonic-stack construction, linear in the series length.
    ///
    /// The stack holds the vertices that can still see to the right; it is
    /// strictly decreasing in value from bottom to top. A new value sees
    /// every stacked vertex up to and including the first one at least as
    /// high as itself, and hides those strictly lower (or equal) from later
    /// vertices.
    pub fn build(values: &[f64]) -> Self {
        let n = values.len();
        let mut edges = Vec::with_capacity(2 * n);
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        for (j, &v) in values.iter().enumerate() {
            while let Some(&top) = stack.last() {
                edges.push((top, j));
                if values[top] < v {
                    stack.pop();
                    continue;
                }
                if values[top] == v {
                    stack.pop();
                }
                break;
            }
            stack.push(j);
        }
        edges.sort_unstable();

        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { edges, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges `(a, b)` with `a < b`, 0-based, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Breadth-first hop counts from `source`; `None` for unreachable vertices.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].map(|d| d + 1);
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = next;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Eccentricity of every vertex. HVGs are connected, so every distance
    /// is defined.
    pub fn eccentricities(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .map(|v| {
                self.distances_from(v)
                    .into_iter()
                    .map(|d| d.expect("horizontal visibility graphs are connected"))
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Minimum eccentricity; 0 for a single vertex or an empty graph.
    pub fn radius(&self) -> usize {
        self.eccentricities().into_iter().min().unwrap_or(0)
    }

    pub fn diameter(&self) -> usize {
        self.eccentricities().into_iter().max().unwrap_or(0)
    }

    /// `u v` per line, 1-based vertex indices.
    pub fn write_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8);
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{} {}", a + 1, b + 1);
        }
        out
    }
}

/// Joint distribution of endpoint degrees over edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    entries: BTreeMap<(usize, usize), f64>,
}

impl MixingMatrix {
    /// `e_ab` for degrees `a`, `b`; zero when no edge has that degree pair.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries.get(&(a, b)).copied().unwrap_or(0.0)
    }

    /// Nonzero entries keyed by `(a, b)`.
    pub fn entries(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// `Σ e_ab ln e_ab` over the nonzero entries (nonpositive).
    pub fn log_sum(&self) -> f64 {
        self.entries.values().map(|&e| e * e.ln()).sum()
    }
}

pub fn build_hvg(ibi: &IbiSequence) -> HvGraph {
    HvGraph::build(ibi.intervals())
}

pub fn hvg_radius(ibi: &IbiSequence) -> usize {
    build_hvg(ibi).radius()
}

/// Each undirected edge contributes one half-edge in each direction, so
/// the matrix is symmetric and sums to one.
pub fn mixing_matrix(graph: &HvGraph) -> Result<MixingMatrix, HvgError> {
    let m = graph.edge_count();
    if m == 0 {
        return Err(HvgError::NoEdges);
    }
    let degrees = graph.degrees();
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(u, v) in graph.edges() {
        let (a, b) = (degrees[u], degrees[v]);
        *counts.entry((a, b)).or_default() += 1;
        *counts.entry((b, a)).or_default() += 1;
    }
    let half_edges = (2 * m) as f64;
    Ok(MixingMatrix {
        entries: counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / half_edges))
            .collect(),
    })
}

/// Disassortative entropy of a series, `Σ e_ab ln e_ab` of its HVG.
pub fn disassortative_entropy(values: &[f64]) -> Result<f64, HvgError> {
    Ok(mixing_matrix(&HvGraph::build(values))?.log_sum())
}

pub fn hvg_disassortative_entropy(ibi: &IbiSequence) -> Result<f64, HvgError> {
    disassortative_entropy(ibi.intervals())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(values: &[f64]) -> Vec<(usize, usize)> {
        HvGraph::build(values).edges().to_vec()
    }

    #[test]
    fn ties_block_visibility() {
        assert_eq!(edges(&[5.0, 5.0, 5.0, 5.0]), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn valley_is_seen_over() {
        assert_eq!(edges(&[3.0, 1.0, 2.0]), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn monotone_is_path() {
        assert_eq!(edges(&[1.0, 2.0, 3.0]), vec![(0, 1), (1, 2)]);
        let g = HvGraph::build(&[1.0, 2.0, 3.0]);
        assert_eq!(g.eccentricities(), vec![2, 1, 2]);
        assert_eq!(g.radius(), 1);
    }

    #[test]
    fn radius_small_cases() {
        assert_eq!(HvGraph::build(&[7.0]).radius(), 0);
        assert_eq!(HvGraph::build(&[5.0; 4]).radius(), 2);
        assert_eq!(HvGraph::build(&[]).radius(), 0);
    }

    #[test]
    fn mixing_single_edge() {
        let m = mixing_matrix(&HvGraph::build(&[1.0, 2.0])).unwrap();
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.log_sum(), 0.0);
    }

    #[test]
    fn mixing_path_p3() {
        let m = mixing_matrix(&HvGraph::build(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(m.get(1, 2), 0.5);
        assert_eq!(m.get(2, 1), 0.5);
        assert_eq!(m.entries().len(), 2);
        assert!((m.log_sum() - (0.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn no_edges() {
        assert_eq!(mixing_matrix(&HvGraph::build(&[1.0])), Err(HvgError::NoEdges));
        assert_eq!(disassortative_entropy(&[800.0]), Err(HvgError::NoEdges));
    }

    #[test]
    fn edge_list_is_one_based() {
        assert_eq!(HvGraph::build(&[3.0, 1.0, 2.0]).write_edge_list(), "1 2\n1 3\n2 3\n");
    }
}
