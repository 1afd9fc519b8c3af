use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Undirected simple graph over `n` agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct Topology {
    n: usize,
    /// Normalized `(i, l)` with `i < l`, sorted.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = Error;

    fn try_from(r: TopologyRepr) -> Result<Self> {
        Topology::new(r.n, &r.edges)
    }
}

impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        TopologyRepr {
            n: t.n,
            edges: t.edges,
        }
    }
}

impl Topology {
    /// Rejects self-loops, duplicate edges and out-of-range endpoints.
    /// Connectivity is not required here; see [`Topology::is_connected`].
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("topology.n", "must be at least 1"));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(
                    "topology.edges",
                    format!("edge ({a}, {b}) out of range for {n} agents"),
                ));
            }
            if a == b {
                return Err(Error::invalid("topology.edges", format!("self-loop at {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "topology.edges",
                format!("duplicate edge ({}, {})", w[0].0, w[0].1),
            ));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self {
            n,
            edges: norm,
            neighbors,
        })
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("topology.n", "a ring needs at least 3 agents"));
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        Self::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for l in (i + 1)..n {
                edges.push((i, l));
            }
        }
        Self::new(n, &edges)
    }

    /// Every agent proposes between `k_lo` and `k_hi` distinct partners;
    /// proposals are merged (an edge proposed twice is kept once). Redrawn
    /// until the graph is connected, up to `max_attempts`.
    pub fn random(
        n: usize,
        k_lo: usize,
        k_hi: usize,
        rng: &mut RngStream,
        max_attempts: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("topology.n", "random graphs need at least 2 agents"));
        }
        if k_lo == 0 || k_lo > k_hi || k_hi > n - 1 {
            return Err(Error::invalid(
                "topology.k",
                format!("need 1 <= k_lo <= k_hi <= n - 1, got [{k_lo}, {k_hi}] with n = {n}"),
            ));
        }
        for _ in 0..max_attempts {
            let mut edges = Vec::new();
            for i in 0..n {
                let k = k_lo + rng.below(k_hi - k_lo + 1);
                let mut others: Vec<usize> = (0..n).filter(|&l| l != i).collect();
                // partial Fisher-Yates
                for j in 0..k {
                    let r = j + rng.below(others.len() - j);
                    others.swap(j, r);
                }
                for &l in &others[..k] {
                    edges.push((i.min(l), i.max(l)));
                }
            }
            edges.sort_unstable();
            edges.dedup();
            let topo = Self::new(n, &edges)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(Error::Disconnected)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbour set of agent `i`, sorted.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Sum of all degrees, i.e. twice the edge count.
    pub fn total_degree(&self) -> usize {
        2 * self.edges.len()
    }

    /// `max_i |neighbors(i)| + 1`. Gossip needs `0 < eps < 1 / delta`.
    pub fn delta(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0) + 1
    }

    /// Union-find over the edge list.
    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = self.n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components == 1
    }
}
