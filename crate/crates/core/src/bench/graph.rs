//! Graph generation for the spanning-tree benchmark, and the spanning-tree
//! validity oracle.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::str::FromStr;

/// Adjacency-list graph (CSR layout).
#[derive(Debug, Clone)]
pub struct Graph {
    pub vertices: usize,
    pub directed: bool,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Graph {
    /// Builds from an edge list; undirected graphs store both directions.
    pub fn from_edges(vertices: usize, directed: bool, edges: &[(u32, u32)]) -> Self {
        let mut degree = vec![0usize; vertices];
        for &(u, v) in edges {
            degree[u as usize] += 1;
            if !directed {
                degree[v as usize] += 1;
            }
        }
        let mut offsets = vec![0usize; vertices + 1];
        for i in 0..vertices {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut targets = vec![0u32; offsets[vertices]];
        let mut cursor = offsets.clone();
        for &(u, v) in edges {
            targets[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            if !directed {
                targets[cursor[v as usize]] = u;
                cursor[v as usize] += 1;
            }
        }
        Graph {
            vertices,
            directed,
            offsets,
            targets,
        }
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Number of stored edges (undirected edges counted once).
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.targets.len()
        } else {
            self.targets.len() / 2
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).contains(&(v as u32))
    }

    /// Vertices reachable from `root`, by breadth-first search.
    pub fn reachable_from(&self, root: usize) -> Vec<bool> {
        let mut seen = vec![false; self.vertices];
        let mut queue = std::collections::VecDeque::new();
        seen[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    queue.push_back(v as usize);
                }
            }
        }
        seen
    }
}

/// The five graph families of the benchmark suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Torus2d,
    Torus2d60,
    Torus3d,
    Torus3d40,
    Random,
}

impl GraphKind {
    pub const ALL: [GraphKind; 5] = [
        GraphKind::Torus2d,
        GraphKind::Torus2d60,
        GraphKind::Torus3d,
        GraphKind::Torus3d40,
        GraphKind::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Torus2d => "torus2d",
            GraphKind::Torus2d60 => "torus2d60",
            GraphKind::Torus3d => "torus3d",
            GraphKind::Torus3d40 => "torus3d40",
            GraphKind::Random => "random",
        }
    }
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "torus2d" => Ok(GraphKind::Torus2d),
            "torus2d60" => Ok(GraphKind::Torus2d60),
            "torus3d" => Ok(GraphKind::Torus3d),
            "torus3d40" => Ok(GraphKind::Torus3d40),
            "random" => Ok(GraphKind::Random),
            other => Err(format!("unknown graph kind `{other}`")),
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("torus side must be at least 3, got {side}")]
    TorusTooSmall { side: usize },
    #[error("requested {requested} edges but at most {max} unique edges exist")]
    TooManyEdges { requested: usize, max: usize },
}

fn torus_edges(side: usize, dims: usize, directed: bool) -> Vec<(u32, u32)> {
    let v = side.pow(dims as u32);
    let mut edges = Vec::with_capacity(v * dims * if directed { 2 } else { 1 });
    let coord = |idx: usize, d: usize| -> usize { (idx / side.pow(d as u32)) % side };
    let with_coord = |idx: usize, d: usize, c: usize| -> usize {
        let stride = side.pow(d as u32);
        idx - coord(idx, d) * stride + c * stride
    };
    for u in 0..v {
        for d in 0..dims {
            let c = coord(u, d);
            let up = with_coord(u, d, (c + 1) % side);
            let down = with_coord(u, d, (c + side - 1) % side);
            if directed {
                // Each vertex keeps all wraparound neighbors as out-edges.
                edges.push((u as u32, up as u32));
                edges.push((u as u32, down as u32));
            } else {
                // Undirected: add each edge once (from its lower endpoint in
                // the +1 direction).
                edges.push((u as u32, up as u32));
            }
        }
    }
    edges
}

fn percolate(edges: Vec<(u32, u32)>, keep_prob: f64, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    edges
        .into_iter()
        .filter(|_| rng.gen_bool(keep_prob))
        .collect()
}

/// Generates one of the benchmark graphs, deterministically for a given
/// seed. Tori are built over the side closest to the requested vertex count
/// (so the actual vertex count is `side^2` or `side^3`); `edges` applies to
/// the random family only.
pub fn gen_graph(
    kind: GraphKind,
    vertices: usize,
    edges: Option<usize>,
    directed: bool,
    seed: u64,
) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        GraphKind::Torus2d | GraphKind::Torus2d60 => {
            let side = (vertices as f64).sqrt().round().max(1.0) as usize;
            if side < 3 {
                return Err(GraphError::TorusTooSmall { side });
            }
            let mut e = torus_edges(side, 2, directed);
            if kind == GraphKind::Torus2d60 {
                e = percolate(e, 0.60, &mut rng);
            }
            Ok(Graph::from_edges(side * side, directed, &e))
        }
        GraphKind::Torus3d | GraphKind::Torus3d40 => {
            let side = (vertices as f64).cbrt().round().max(1.0) as usize;
            if side < 3 {
                return Err(GraphError::TorusTooSmall { side });
            }
            let mut e = torus_edges(side, 3, directed);
            if kind == GraphKind::Torus3d40 {
                e = percolate(e, 0.40, &mut rng);
            }
            Ok(Graph::from_edges(side * side * side, directed, &e))
        }
        GraphKind::Random => {
            let m = edges.unwrap_or(vertices.saturating_mul(4));
            let max = if directed {
                vertices * (vertices - 1)
            } else {
                vertices * (vertices - 1) / 2
            };
            if m > max {
                return Err(GraphError::TooManyEdges { requested: m, max });
            }
            let mut set: HashSet<(u32, u32)> = HashSet::with_capacity(m);
            while set.len() < m {
                let u = rng.gen_range(0..vertices) as u32;
                let v = rng.gen_range(0..vertices) as u32;
                if u == v {
                    continue;
                }
                let key = if directed || u < v { (u, v) } else { (v, u) };
                set.insert(key);
            }
            let e: Vec<_> = {
                let mut v: Vec<_> = set.into_iter().collect();
                v.sort_unstable();
                v
            };
            Ok(Graph::from_edges(vertices, directed, &e))
        }
    }
}

/// Sentinel for an unclaimed vertex in a parent array.
pub const UNCLAIMED: u32 = u32::MAX;

/// Validates a spanning tree: the root is its own parent, every parent edge
/// exists in the graph, the structure is acyclic, and the claimed set equals
/// the set reachable from the root.
pub fn verify_spanning_tree(g: &Graph, parents: &[u32], root: usize) -> bool {
    if parents.len() != g.vertices || parents[root] as usize != root {
        return false;
    }
    let reachable = g.reachable_from(root);
    // Every claimed vertex must chain back to the root without revisiting.
    let mut state = vec![0u8; g.vertices]; // 0 unknown, 1 on-path, 2 ok
    state[root] = 2;
    for v in 0..g.vertices {
        if parents[v] == UNCLAIMED {
            if reachable[v] {
                return false;
            }
            continue;
        }
        if !reachable[v] {
            return false;
        }
        // Walk up to something already validated.
        let mut path = Vec::new();
        let mut cur = v;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            let p = parents[cur] as usize;
            if p >= g.vertices || parents[cur] == UNCLAIMED {
                return false;
            }
            // The parent edge must exist in the graph, directed parent->child.
            if !g.has_edge(p, cur) {
                return false;
            }
            cur = p;
            if state[cur] == 1 {
                return false; // cycle
            }
        }
        if state[cur] != 2 {
            return false;
        }
        for n in path {
            state[n] = 2;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus2d_counts() {
        let g = gen_graph(GraphKind::Torus2d, 16, None, false, 1).unwrap();
        assert_eq!(g.vertices, 16);
        assert_eq!(g.edge_count(), 32);
        for v in 0..16 {
            assert_eq!(g.neighbors(v).len(), 4);
        }
    }

    #[test]
    fn torus3d_counts() {
        let g = gen_graph(GraphKind::Torus3d, 27, None, false, 1).unwrap();
        assert_eq!(g.vertices, 27);
        assert_eq!(g.edge_count(), 81);
        for v in 0..27 {
            assert_eq!(g.neighbors(v).len(), 6);
        }
    }

    #[test]
    fn directed_torus_has_out_degree_2d() {
        let g = gen_graph(GraphKind::Torus2d, 25, None, true, 1).unwrap();
        for v in 0..25 {
            assert_eq!(g.neighbors(v).len(), 4);
        }
    }

    #[test]
    fn random_graph_exact_edge_count() {
        let g = gen_graph(GraphKind::Random, 10, Some(20), false, 7).unwrap();
        assert_eq!(g.vertices, 10);
        assert_eq!(g.edge_count(), 20);
    }

    #[test]
    fn random_graph_rejects_impossible_edge_counts() {
        assert_eq!(
            gen_graph(GraphKind::Random, 5, Some(11), false, 1).err(),
            Some(GraphError::TooManyEdges {
                requested: 11,
                max: 10
            })
        );
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in GraphKind::ALL {
            let a = gen_graph(kind, 100, Some(150), false, 42).unwrap();
            let b = gen_graph(kind, 100, Some(150), false, 42).unwrap();
            assert_eq!(a.offsets, b.offsets, "{kind}");
            assert_eq!(a.targets, b.targets, "{kind}");
        }
    }

    #[test]
    fn small_torus_is_rejected() {
        assert!(matches!(
            gen_graph(GraphKind::Torus2d, 4, None, false, 1),
            Err(GraphError::TorusTooSmall { .. })
        ));
    }

    fn bfs_tree(g: &Graph, root: usize) -> Vec<u32> {
        let mut parents = vec![UNCLAIMED; g.vertices];
        parents[root] = root as u32;
        let mut q = std::collections::VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            for &v in g.neighbors(u) {
                if parents[v as usize] == UNCLAIMED {
                    parents[v as usize] = u as u32;
                    q.push_back(v as usize);
                }
            }
        }
        parents
    }

    #[test]
    fn verify_accepts_bfs_tree() {
        let g = gen_graph(GraphKind::Torus2d, 36, None, false, 3).unwrap();
        let parents = bfs_tree(&g, 0);
        assert!(verify_spanning_tree(&g, &parents, 0));
    }

    #[test]
    fn verify_rejects_non_edges_and_missing_vertices() {
        let g = gen_graph(GraphKind::Torus2d, 36, None, false, 3).unwrap();
        let mut parents = bfs_tree(&g, 0);
        let good = parents.clone();

        // A parent edge not in the graph.
        parents[7] = 20; // vertex 20 is not adjacent to 7 in a 6x6 torus
        if !g.has_edge(20, 7) {
            assert!(!verify_spanning_tree(&g, &parents, 0));
        }

        // A reachable vertex left unclaimed.
        parents = good.clone();
        parents[5] = UNCLAIMED;
        assert!(!verify_spanning_tree(&g, &parents, 0));

        // A cycle.
        parents = good;
        let mut cur = 35usize;
        let mut chain = vec![35];
        while parents[cur] as usize != 0 && chain.len() < 3 {
            cur = parents[cur] as usize;
            chain.push(cur);
        }
        if chain.len() >= 2 {
            let a = chain[0];
            let b = chain[1];
            // Introduce a 2-cycle when the edge exists both ways.
            if g.has_edge(a, b) && g.has_edge(b, a) {
                let mut bad = vec![UNCLAIMED; g.vertices];
                bad[0] = 0;
                bad[a] = b as u32;
                bad[b] = a as u32;
                assert!(!verify_spanning_tree(&g, &bad, 0));
            }
        }
    }

    #[test]
    fn percolated_families_reduce_edges() {
        let full = gen_graph(GraphKind::Torus2d, 400, None, false, 9).unwrap();
        let thin = gen_graph(GraphKind::Torus2d60, 400, None, false, 9).unwrap();
        assert!(thin.edge_count() < full.edge_count());
        let full3 = gen_graph(GraphKind::Torus3d, 512, None, false, 9).unwrap();
        let thin3 = gen_graph(GraphKind::Torus3d40, 512, None, false, 9).unwrap();
        assert!((thin3.edge_count() as f64) < 0.6 * full3.edge_count() as f64);
    }
}
