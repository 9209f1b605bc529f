//! Conjugation perception, the molecular hypergraph, its bipartite form,
//! and the geometric radius graph.
//!
//! A hyperedge is one maximal conjugated system: a connected component of
//! the subgraph induced by conjugated bonds. Hydrogens are vertices (the
//! vertex set is all atoms) but never members of any hyperedge.

use crate::chemio::Molecule;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hypergraph {
    pub num_vertices: usize,
    /// Vertex indices sorted ascending within each hyperedge; hyperedges are
    /// pairwise distinct as sets.
    pub hyperedges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Panics on an empty hyperedge, an out-of-range vertex, an unsorted or
    /// duplicated member list, or two equal hyperedges: those are
    /// construction bugs, not data errors.
    pub fn new(num_vertices: usize, hyperedges: Vec<Vec<usize>>) -> Hypergraph {
        for e in &hyperedges {
            assert!(!e.is_empty(), "empty hyperedge");
            assert!(
                e.windows(2).all(|w| w[0] < w[1]),
                "hyperedge not sorted/deduplicated: {e:?}"
            );
            assert!(
                *e.last().unwrap() < num_vertices,
                "hyperedge vertex out of range: {e:?} with {num_vertices} vertices"
            );
        }
        for (i, e) in hyperedges.iter().enumerate() {
            assert!(
                !hyperedges[..i].contains(e),
                "duplicate hyperedge: {e:?}"
            );
        }
        Hypergraph {
            num_vertices,
            hyperedges,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("hypergraph serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub num_vertex_nodes: usize,
    pub num_edge_nodes: usize,
    /// (vertex_node, edge_node) pairs, grouped by edge node in hyperedge
    /// order, vertices ascending within each group.
    pub incidence: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusGraph {
    /// Directed (i, j) pairs: j is a retained neighbor of i. Grouped by i
    /// ascending; within a group ordered by (distance, index).
    pub edges: Vec<(usize, usize)>,
    pub cutoff: f64,
    pub max_neighbors: usize,
}

/// Flags each bond as conjugated or not. A bond is conjugated iff it is
/// aromatic, or both endpoint atoms participate in at least one multiple
/// (double/triple/aromatic) bond, the bond itself included. Every multiple
/// bond therefore counts as conjugated; a single bond joins the system only
/// when pi systems sit on both sides.
pub fn perceive_conjugation(mut mol: Molecule) -> Molecule {
    let mut has_pi = vec![false; mol.n_atoms()];
    for b in &mol.bonds {
        if b.order.is_multiple() {
            has_pi[b.a] = true;
            has_pi[b.b] = true;
        }
    }
    for b in &mut mol.bonds {
        b.conjugated = b.order.is_multiple() || (has_pi[b.a] && has_pi[b.b]);
    }
    mol
}

/// Vertices are all atoms; one hyperedge per connected component of the
/// conjugated-bond subgraph. Call after `perceive_conjugation`.
pub fn build_hypergraph(mol: &Molecule) -> Hypergraph {
    let n = mol.n_atoms();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in &mol.bonds {
        if b.conjugated {
            adj[b.a].push(b.b);
            adj[b.b].push(b.a);
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut hyperedges = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX || adj[start].is_empty() {
            continue;
        }
        let id = hyperedges.len();
        let mut members = vec![start];
        component[start] = id;
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            for &w in &adj[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    members.push(w);
                    queue.push(w);
                }
            }
        }
        members.sort_unstable();
        hyperedges.push(members);
    }
    Hypergraph::new(n, hyperedges)
}

/// One edge node per hyperedge, in order; incidence (v, e) iff v is in
/// hyperedge e.
pub fn to_bipartite(h: &Hypergraph) -> BipartiteGraph {
    let mut incidence = Vec::new();
    for (e, members) in h.hyperedges.iter().enumerate() {
        for &v in members {
            incidence.push((v, e));
        }
    }
    BipartiteGraph {
        num_vertex_nodes: h.num_vertices,
        num_edge_nodes: h.hyperedges.len(),
        incidence,
    }
}

/// Inverse of `to_bipartite`: regroups incidence pairs into hyperedges.
pub fn from_bipartite(b: &BipartiteGraph) -> Hypergraph {
    let mut hyperedges = vec![Vec::new(); b.num_edge_nodes];
    for &(v, e) in &b.incidence {
        assert!(v < b.num_vertex_nodes && e < b.num_edge_nodes, "incidence out of range");
        hyperedges[e].push(v);
    }
    for e in &mut hyperedges {
        e.sort_unstable();
    }
    Hypergraph::new(b.num_vertex_nodes, hyperedges)
}

/// Distance-capped k-nearest neighborhood: for each node i, every j with
/// ‖x_i − x_j‖ ≤ cutoff is a candidate; when more than `max_neighbors`
/// qualify, the nearest win, equal distances resolved toward the smaller
/// index. Edges are directed (i, j) and not symmetrized after capping.
pub fn build_radius_graph(
    coords: &[[f64; 3]],
    cutoff: f64,
    max_neighbors: usize,
) -> Result<RadiusGraph> {
    assert!(cutoff > 0.0, "cutoff must be positive");
    assert!(max_neighbors >= 1, "max_neighbors must be at least 1");
    for (i, c) in coords.iter().enumerate() {
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!("non-finite coordinate at atom {i}: {c:?}")));
        }
    }
    let cutoff2 = cutoff * cutoff;
    let mut edges = Vec::new();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 0..coords.len() {
        candidates.clear();
        for (j, cj) in coords.iter().enumerate() {
            if i == j {
                continue;
            }
            let dx = coords[i][0] - cj[0];
            let dy = coords[i][1] - cj[1];
            let dz = coords[i][2] - cj[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 <= cutoff2 {
                candidates.push((d2, j));
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.truncate(max_neighbors);
        edges.extend(candidates.iter().map(|&(_, j)| (i, j)));
    }
    Ok(RadiusGraph {
        edges,
        cutoff,
        max_neighbors,
    })
}
