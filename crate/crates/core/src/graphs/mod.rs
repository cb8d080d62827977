//! Simple undirected graphs: construction, random models, components and spectra.

mod generate;
pub(crate) mod spectral;

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use generate::{
    barabasi_albert, erdos_renyi, named_graph, watts_strogatz, GraphModel, GraphSpec, NamedGraph,
    RngSeed,
};
pub use spectral::{spectral, SpectralData};

/// Simple undirected graph on nodes `0..n`: symmetric 0/1 adjacency, no self-loops.
///
/// Besides the dense adjacency the graph caches, per node, whichever of its
/// neighbour or non-neighbour lists is shorter. Products `A·v` then cost
/// `O(min(d, n-1-d))` per row, which keeps near-complete graphs as cheap as
/// sparse ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    rows: Vec<RowPlan>,
    row_idx: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RowPlan {
    start: u32,
    end: u32,
    complement: bool,
}

/// A connected component together with its local-to-global node map.
#[derive(Clone, Debug)]
pub struct Component {
    pub graph: Graph,
    /// `nodes[local] = global`.
    pub nodes: Vec<usize>,
}

impl Graph {
    fn from_dense(n: usize, adj: Vec<bool>) -> Self {
        debug_assert_eq!(adj.len(), n * n);
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| adj[i * n + j]).collect())
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut row_idx = Vec::new();
        for i in 0..n {
            let d = neighbors[i].len();
            let start = row_idx.len() as u32;
            let complement = d > (n - 1) / 2;
            if complement {
                row_idx.extend(
                    (0..n)
                        .filter(|&j| j != i && !adj[i * n + j])
                        .map(|j| j as u32),
                );
            } else {
                row_idx.extend(neighbors[i].iter().map(|&j| j as u32));
            }
            rows.push(RowPlan {
                start,
                end: row_idx.len() as u32,
                complement,
            });
        }
        Graph {
            n,
            adj,
            neighbors,
            rows,
            row_idx,
        }
    }

    /// Graph on `n` nodes with no links.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "a graph needs at least one node"));
        }
        Ok(Self::from_dense(n, vec![false; n * n]))
    }

    /// Builds a graph from an undirected link list. Repeated links are merged;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::param("n", "a graph needs at least one node"));
        }
        let mut adj = vec![false; n * n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::param(
                    "edge",
                    format!("({i}, {j}) out of range for n = {n}"),
                ));
            }
            if i == j {
                return Err(Error::param("edge", format!("self-loop at node {i}")));
            }
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        Ok(Self::from_dense(n, adj))
    }

    /// Builds a graph from a predicate evaluated on every pair `i < j`.
    pub fn from_pairs(n: usize, mut linked: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "a graph needs at least one node"));
        }
        let mut adj = vec![false; n * n];
        for i in 0..n {
            for j in i + 1..n {
                if linked(i, j) {
                    adj[i * n + j] = true;
                    adj[j * n + i] = true;
                }
            }
        }
        Ok(Self::from_dense(n, adj))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn links(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline]
    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Highest node degree; 0 for a graph without links.
    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.links() as f64 / self.n as f64
    }

    pub fn is_regular(&self) -> bool {
        let d = self.degree(0);
        self.neighbors.iter().all(|nb| nb.len() == d)
    }

    /// Links as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// `out = A·v`.
    pub fn mul_adjacency<S: Scalar>(&self, v: &[S], out: &mut [S]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let needs_total = self.rows.iter().any(|r| r.complement);
        let total: S = if needs_total {
            v.iter().copied().sum()
        } else {
            S::zero()
        };
        for (i, row) in self.rows.iter().enumerate() {
            let idx = &self.row_idx[row.start as usize..row.end as usize];
            let partial: S = idx.iter().map(|&j| v[j as usize]).sum();
            out[i] = if row.complement {
                // Cancellation can leave a tiny negative where the true sum is ~0.
                (total - v[i] - partial).max(S::zero())
            } else {
                partial
            };
        }
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().1 == 1
    }

    /// Component label per node (labels in order of lowest member) and the count.
    fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.neighbors[u] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Connected components by breadth-first reachability, ordered by lowest node.
    pub fn connected_components(&self) -> Vec<Component> {
        let (label, count) = self.component_labels();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        for (v, &l) in label.iter().enumerate() {
            members[l].push(v);
        }
        members
            .into_iter()
            .map(|nodes| {
                let mut local = vec![usize::MAX; self.n];
                for (k, &g) in nodes.iter().enumerate() {
                    local[g] = k;
                }
                let edges = nodes.iter().enumerate().flat_map(|(k, &g)| {
                    let local = &local;
                    self.neighbors[g]
                        .iter()
                        .map(move |&h| (k, local[h]))
                        .filter(|&(a, b)| a < b)
                });
                let graph = Graph::from_edges(nodes.len(), edges.collect::<Vec<_>>())
                    .expect("component of a valid graph is valid");
                Component { graph, nodes }
            })
            .collect()
    }

    /// Disjoint union; nodes of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.n;
        let edges: Vec<_> = self
            .edges()
            .chain(other.edges().map(|(i, j)| (i + off, j + off)))
            .collect();
        Graph::from_edges(self.n + other.n, edges).expect("union of valid graphs is valid")
    }

    /// Edge-list text: `N <n>` header, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("N {}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Parses the edge-list text format. Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut n = None;
        let mut edges = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = k + 1;
            let mut parts = line.split_whitespace();
            let (a, b) = (parts.next(), parts.next());
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected two fields".into(),
                });
            }
            match n {
                None => {
                    if a != Some("N") {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "first entry must be `N <n>`".into(),
                        });
                    }
                    let count = b
                        .and_then(|b| b.parse::<usize>().ok())
                        .ok_or(Error::Parse {
                            line: lineno,
                            msg: "bad node count".into(),
                        })?;
                    n = Some(count);
                }
                Some(_) => {
                    let parse = |s: Option<&str>| {
                        s.and_then(|s| s.parse::<usize>().ok()).ok_or(Error::Parse {
                            line: lineno,
                            msg: format!("bad link `{line}`"),
                        })
                    };
                    edges.push((parse(a)?, parse(b)?));
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            msg: "missing `N <n>` header".into(),
        })?;
        Graph::from_edges(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
        Graph::parse_edge_list(&std::fs::read_to_string(path)?)
    }
}

/// `R0 = tau * lambda1(A)`.
pub fn basic_reproduction_number<S: Scalar>(spectral: &SpectralData<S>, tau: S) -> S {
    tau * spectral.lambda1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k5_p3() -> Graph {
        let k5 = named_graph(NamedGraph::Complete, 5).unwrap();
        let p3 = named_graph(NamedGraph::Path, 3).unwrap();
        k5.disjoint_union(&p3)
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
        assert!(Graph::empty(0).is_err());
    }

    #[test]
    fn components_of_k5_and_p3() {
        let comps = k5_p3().connected_components();
        let sizes: Vec<_> = comps.iter().map(|c| c.nodes.len()).collect();
        assert_eq!(sizes, vec![5, 3]);
        assert!(comps.iter().all(|c| c.graph.is_connected()));
        assert_eq!(comps[0].graph.links(), 10);
        assert_eq!(comps[1].graph.links(), 2);
    }

    #[test]
    fn components_trivial_cases() {
        let k5 = named_graph(NamedGraph::Complete, 5).unwrap();
        assert_eq!(k5.connected_components().len(), 1);
        let e = Graph::empty(4).unwrap();
        let comps = e.connected_components();
        assert_eq!(comps.len(), 4);
        assert!(comps.iter().all(|c| c.nodes.len() == 1));
    }

    #[test]
    fn component_maps_preserve_links() {
        let g = k5_p3();
        let mut seen = vec![false; g.n()];
        for c in g.connected_components() {
            for (a, b) in c.graph.edges() {
                assert!(g.has_link(c.nodes[a], c.nodes[b]));
            }
            for &v in &c.nodes {
                assert!(!seen[v]);
                seen[v] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn max_degree_cases() {
        assert_eq!(
            named_graph(NamedGraph::Complete, 50).unwrap().max_degree(),
            49
        );
        assert_eq!(named_graph(NamedGraph::Star, 50).unwrap().max_degree(), 49);
        assert_eq!(Graph::empty(7).unwrap().max_degree(), 0);
    }

    #[test]
    fn adjacency_product_matches_dense_sum() {
        // Star hub uses the complement path, leaves the direct one.
        for g in [
            named_graph(NamedGraph::Star, 9).unwrap(),
            named_graph(NamedGraph::Complete, 6).unwrap(),
            erdos_renyi(20, 0.7, RngSeed(3)).unwrap(),
        ] {
            let v: Vec<f64> = (0..g.n()).map(|i| 0.1 + 0.03 * i as f64).collect();
            let mut out = vec![0.0; g.n()];
            g.mul_adjacency(&v, &mut out);
            for i in 0..g.n() {
                let direct: f64 = (0..g.n()).filter(|&j| g.has_link(i, j)).map(|j| v[j]).sum();
                assert!((out[i] - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# header comment\nN 4\n\n0 1   # trailing\n2 3\n1 0\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.links(), 2);
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Graph::parse_edge_list("0 1\n").is_err());
        assert!(Graph::parse_edge_list("N 3\n0 x\n").is_err());
        assert!(Graph::parse_edge_list("N 3\n0 0\n").is_err());
    }
}
