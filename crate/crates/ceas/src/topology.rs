//! Network topology: random regular graphs with an edge list usable as
//! link-inventory indices.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CeasError, Result};

/// Undirected simple graph with a stable edge ordering.
#[derive(Debug, Clone)]
pub struct Topology {
    n: usize,
    /// Sorted neighbour lists; `adj[k]` holds `(neighbour, edge id)`.
    adj: Vec<Vec<(usize, usize)>>,
    /// Edges as `(lo, hi)` pairs, sorted; the index is the link id.
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        for e in &mut edges {
            if e.0 == e.1 || e.0 >= n || e.1 >= n {
                return Err(CeasError::Topology(format!("invalid edge {e:?}")));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adj = vec![Vec::new(); n];
        for (id, &(a, b)) in edges.iter().enumerate() {
            adj[a].push((b, id));
            adj[b].push((a, id));
        }
        Ok(Topology { n, adj, edges })
    }

    /// Random `degree`-regular simple graph, resampled until connected.
    pub fn random_regular<R: Rng>(n: usize, degree: usize, rng: &mut R) -> Result<Self> {
        if n * degree % 2 != 0 {
            return Err(CeasError::Topology(format!(
                "n * degree must be even (n={n}, degree={degree})"
            )));
        }
        if degree >= n {
            return Err(CeasError::Topology(format!(
                "degree {degree} must be below node count {n}"
            )));
        }
        // Pairing model with defect repair: match stubs, then swap endpoints
        // out of self-loops and duplicate edges until the graph is simple.
        const MAX_GRAPHS: usize = 200;
        const MAX_REPAIRS: usize = 100_000;
        for _ in 0..MAX_GRAPHS {
            let mut stubs: Vec<usize> =
                (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
            stubs.shuffle(rng);
            let mut pairs: Vec<(usize, usize)> = stubs
                .chunks_exact(2)
                .map(|c| (c[0], c[1]))
                .collect();
            let mut repairs = 0usize;
            let simple = loop {
                let mut seen = std::collections::BTreeSet::new();
                let defects: Vec<usize> = (0..pairs.len())
                    .filter(|&i| {
                        let (a, b) = pairs[i];
                        a == b || !seen.insert((a.min(b), a.max(b)))
                    })
                    .collect();
                if defects.is_empty() {
                    break true;
                }
                repairs += defects.len();
                if repairs > MAX_REPAIRS {
                    break false;
                }
                for &i in &defects {
                    let j = rng.random_range(0..pairs.len());
                    if i != j {
                        let (bi, bj) = (pairs[i].1, pairs[j].1);
                        pairs[i].1 = bj;
                        pairs[j].1 = bi;
                    }
                }
            };
            if !simple {
                continue;
            }
            let topo = Topology::from_edges(n, pairs)?;
            if topo.n_edges() == n * degree / 2 && topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(CeasError::Topology(format!(
            "no connected {degree}-regular graph found for n={n}"
        )))
    }

    pub fn complete<R: Rng>(n: usize, _rng: &mut R) -> Result<Self> {
        let edges = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();
        Topology::from_edges(n, edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let edges = (0..n).map(|a| (a, (a + 1) % n)).collect();
        Topology::from_edges(n, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, k: usize) -> &[(usize, usize)] {
        &self.adj[k]
    }

    pub fn degree(&self, k: usize) -> usize {
        self.adj[k].len()
    }

    pub fn is_connected(&self) -> bool {
        self.is_connected_over(&vec![true; self.n])
    }

    /// Connectivity of the subgraph induced on `active` nodes.
    pub fn is_connected_over(&self, active: &[bool]) -> bool {
        let start = match (0..self.n).find(|&k| active[k]) {
            Some(k) => k,
            None => return true,
        };
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            for &(j, _) in &self.adj[k] {
                if active[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..self.n).all(|k| !active[k] || seen[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_regular_has_uniform_degree() {
        let mut rng = crate::rng::stream(11);
        let t = Topology::random_regular(50, 6, &mut rng).unwrap();
        assert_eq!(t.n_edges(), 150);
        for k in 0..50 {
            assert_eq!(t.degree(k), 6);
        }
        assert!(t.is_connected());
    }

    #[test]
    fn regular_graph_is_deterministic_per_seed() {
        let a = Topology::random_regular(30, 4, &mut crate::rng::stream(3)).unwrap();
        let b = Topology::random_regular(30, 4, &mut crate::rng::stream(3)).unwrap();
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn odd_stub_count_is_rejected() {
        let mut rng = crate::rng::stream(1);
        assert!(Topology::random_regular(5, 3, &mut rng).is_err());
    }

    #[test]
    fn subgraph_connectivity() {
        let t = Topology::cycle(6).unwrap();
        assert!(t.is_connected());
        let mut active = vec![true; 6];
        active[0] = false;
        assert!(t.is_connected_over(&active)); // path remains
        active[3] = false;
        assert!(!t.is_connected_over(&active)); // two arcs
    }
}
