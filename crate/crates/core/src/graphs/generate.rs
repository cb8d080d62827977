use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Seed for every random generator in the crate. Equal seeds give equal output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for sub-task `index` (SplitMix64 finaliser).
    pub fn derive(self, index: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// Erdős–Rényi `G(n, p)`: every pair linked independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: RngSeed) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(
            "p",
            format!("link probability {p} outside [0, 1]"),
        ));
    }
    let mut rng = seed.rng();
    Graph::from_pairs(n, |_, _| rng.gen_bool(p))
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a complete graph on `m0` nodes; each further node links to `m`
/// distinct existing nodes drawn with probability proportional to degree,
/// without replacement. While all candidate degrees are zero (only possible
/// for `m0 = 1`) the draw is uniform.
pub fn barabasi_albert(n: usize, m0: usize, m: usize, seed: RngSeed) -> Result<Graph> {
    if m < 1 || m > m0 || m0 > n {
        return Err(Error::param(
            "m",
            format!("need 1 <= m <= m0 <= n, got m = {m}, m0 = {m0}, n = {n}"),
        ));
    }
    let mut rng = seed.rng();
    let mut edges = Vec::with_capacity(m0 * (m0 - 1) / 2 + (n - m0) * m);
    let mut degree = vec![0usize; n];
    for i in 0..m0 {
        for j in i + 1..m0 {
            edges.push((i, j));
        }
        degree[i] = m0 - 1;
    }
    let mut chosen = vec![false; n];
    let mut targets = Vec::with_capacity(m);
    for v in m0..n {
        targets.clear();
        for _ in 0..m {
            let total: usize = (0..v).filter(|&u| !chosen[u]).map(|u| degree[u]).sum();
            let pick = if total == 0 {
                let free: Vec<usize> = (0..v).filter(|&u| !chosen[u]).collect();
                *free.choose(&mut rng).expect("m <= v leaves a free node")
            } else {
                let mut ticket = rng.gen_range(0..total);
                (0..v)
                    .filter(|&u| !chosen[u])
                    .find(|&u| {
                        if ticket < degree[u] {
                            true
                        } else {
                            ticket -= degree[u];
                            false
                        }
                    })
                    .expect("ticket below total weight")
            };
            chosen[pick] = true;
            targets.push(pick);
        }
        for &u in &targets {
            chosen[u] = false;
            degree[u] += 1;
            edges.push((u, v));
        }
        degree[v] = m;
    }
    Graph::from_edges(n, edges)
}

/// Watts–Strogatz small world: ring lattice where each node links to its `k`
/// nearest neighbours on either side, then every lattice link `(u, u+j)` is
/// rewired with probability `beta_ws` to a uniform node that is neither `u`
/// nor already adjacent to it. A link with no admissible target is kept.
pub fn watts_strogatz(n: usize, k: usize, beta_ws: f64, seed: RngSeed) -> Result<Graph> {
    if k < 1 || k > n.saturating_sub(1) / 2 {
        return Err(Error::param(
            "K",
            format!("need 1 <= K <= floor((n-1)/2), got K = {k}, n = {n}"),
        ));
    }
    if !(0.0..=1.0).contains(&beta_ws) {
        return Err(Error::param("beta_ws", format!("{beta_ws} outside [0, 1]")));
    }
    let mut adj = vec![false; n * n];
    for u in 0..n {
        for j in 1..=k {
            let w = (u + j) % n;
            adj[u * n + w] = true;
            adj[w * n + u] = true;
        }
    }
    let mut rng = seed.rng();
    let mut candidates = Vec::with_capacity(n);
    for j in 1..=k {
        for u in 0..n {
            let v = (u + j) % n;
            if !rng.gen_bool(beta_ws) || !adj[u * n + v] {
                continue;
            }
            candidates.clear();
            candidates.extend((0..n).filter(|&w| w != u && !adj[u * n + w]));
            if let Some(&w) = candidates.choose(&mut rng) {
                adj[u * n + v] = false;
                adj[v * n + u] = false;
                adj[u * n + w] = true;
                adj[w * n + u] = true;
            }
        }
    }
    Graph::from_pairs(n, |i, j| adj[i * n + j])
}

/// Deterministic reference topologies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedGraph {
    Complete,
    /// Parts `0..a` and `a..a+b`.
    CompleteBipartite {
        a: usize,
        b: usize,
    },
    /// Node 0 is the hub.
    Star,
    Path,
    Cycle,
    Empty,
}

pub fn named_graph(kind: NamedGraph, n: usize) -> Result<Graph> {
    match kind {
        NamedGraph::Complete => Graph::from_pairs(n, |_, _| true),
        NamedGraph::CompleteBipartite { a, b } => {
            if a + b != n || a == 0 || b == 0 {
                return Err(Error::param(
                    "n",
                    format!("complete bipartite needs a, b >= 1 and a + b = n (a = {a}, b = {b}, n = {n})"),
                ));
            }
            Graph::from_pairs(n, |i, j| i < a && j >= a)
        }
        NamedGraph::Star => Graph::from_pairs(n, |i, _| i == 0),
        NamedGraph::Path => Graph::from_pairs(n, |i, j| j == i + 1),
        NamedGraph::Cycle => {
            if n < 3 {
                return Err(Error::param("n", format!("a cycle needs n >= 3, got {n}")));
            }
            Graph::from_pairs(n, |i, j| j == i + 1 || (i == 0 && j == n - 1))
        }
        NamedGraph::Empty => Graph::empty(n),
    }
}

/// JSON description of a graph, e.g. `{"kind":"er","n":50,"p":0.5,"seed":42}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Er {
        n: usize,
        p: f64,
        #[serde(default)]
        seed: RngSeed,
    },
    Ba {
        n: usize,
        m0: usize,
        m: usize,
        #[serde(default)]
        seed: RngSeed,
    },
    Ws {
        n: usize,
        #[serde(alias = "K")]
        k: usize,
        beta_ws: f64,
        #[serde(default)]
        seed: RngSeed,
    },
    Complete {
        n: usize,
    },
    CompleteBipartite {
        a: usize,
        b: usize,
    },
    Star {
        n: usize,
    },
    Path {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    Empty {
        n: usize,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match *self {
            GraphSpec::Er { n, p, seed } => erdos_renyi(n, p, seed),
            GraphSpec::Ba { n, m0, m, seed } => barabasi_albert(n, m0, m, seed),
            GraphSpec::Ws {
                n,
                k,
                beta_ws,
                seed,
            } => watts_strogatz(n, k, beta_ws, seed),
            GraphSpec::Complete { n } => named_graph(NamedGraph::Complete, n),
            GraphSpec::CompleteBipartite { a, b } => {
                named_graph(NamedGraph::CompleteBipartite { a, b }, a + b)
            }
            GraphSpec::Star { n } => named_graph(NamedGraph::Star, n),
            GraphSpec::Path { n } => named_graph(NamedGraph::Path, n),
            GraphSpec::Cycle { n } => named_graph(NamedGraph::Cycle, n),
            GraphSpec::Empty { n } => named_graph(NamedGraph::Empty, n),
        }
    }

    /// Seed of a random model, `None` for deterministic topologies.
    pub fn seed(&self) -> Option<RngSeed> {
        match *self {
            GraphSpec::Er { seed, .. }
            | GraphSpec::Ba { seed, .. }
            | GraphSpec::Ws { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

/// Random graph family with randomly drawn parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    /// `p ~ Unif(0, 1)`.
    Er,
    /// `m0 ~ Unif{1..n}`, `m ~ Unif{1..m0}`.
    Ba,
    /// `K ~ Unif{1..floor((n-1)/2)}`, `beta_ws ~ Unif(0, 1)`.
    Ws,
}

impl GraphModel {
    /// Draws model parameters and a graph seed from `seed`.
    pub fn sample(self, n: usize, seed: RngSeed) -> Result<GraphSpec> {
        let mut rng = seed.rng();
        let spec = match self {
            GraphModel::Er => GraphSpec::Er {
                n,
                p: rng.gen::<f64>(),
                seed: RngSeed(rng.gen()),
            },
            GraphModel::Ba => {
                if n == 0 {
                    return Err(Error::param("n", "BA ensemble needs n >= 1"));
                }
                let m0 = rng.gen_range(1..=n);
                GraphSpec::Ba {
                    n,
                    m0,
                    m: rng.gen_range(1..=m0),
                    seed: RngSeed(rng.gen()),
                }
            }
            GraphModel::Ws => {
                let k_max = n.saturating_sub(1) / 2;
                if k_max == 0 {
                    return Err(Error::param("n", "WS ensemble needs n >= 3"));
                }
                GraphSpec::Ws {
                    n,
                    k: rng.gen_range(1..=k_max),
                    beta_ws: rng.gen::<f64>(),
                    seed: RngSeed(rng.gen()),
                }
            }
        };
        Ok(spec)
    }
}
