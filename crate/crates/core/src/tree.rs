//! Unordered, unlabeled dependency trees and pairwise distance matrices.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Why a head array does not describe a single rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeadError {
    NoRoot,
    MultipleRoots(Vec<usize>),
    HeadOutOfRange { word: usize, head: usize },
    SelfLoop(usize),
    Cycle(Vec<usize>),
}

impl std::fmt::Display for HeadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HeadError::NoRoot => write!(f, "no word has head 0"),
            HeadError::MultipleRoots(r) => write!(f, "multiple roots at words {r:?}"),
            HeadError::HeadOutOfRange { word, head } => {
                write!(f, "word {word} has out-of-range head {head}")
            }
            HeadError::SelfLoop(w) => write!(f, "word {w} is its own head"),
            HeadError::Cycle(c) => write!(f, "cycle through words {c:?}"),
        }
    }
}

/// Checks a CoNLL-U style head array: `heads[i]` is the 1-based head of word
/// `i + 1`, with 0 marking the root. Returns the 1-based index of the root.
pub fn validate_heads(heads: &[usize]) -> std::result::Result<usize, HeadError> {
    let n = heads.len();
    let roots: Vec<usize> = (0..n).filter(|&i| heads[i] == 0).map(|i| i + 1).collect();
    match roots.len() {
        0 => return Err(HeadError::NoRoot),
        1 => {}
        _ => return Err(HeadError::MultipleRoots(roots)),
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(HeadError::HeadOutOfRange { word: i + 1, head: h });
        }
        if h == i + 1 {
            return Err(HeadError::SelfLoop(i + 1));
        }
    }
    // 0 = unvisited, 1 = on current walk, 2 = known to reach the root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            cur = heads[cur - 1];
        }
        if state[cur] == 1 {
            let pos = path.iter().position(|&w| w == cur).unwrap_or(0);
            return Err(HeadError::Cycle(path[pos..].to_vec()));
        }
        for w in path {
            state[w] = 2;
        }
    }
    Ok(roots[0])
}

/// An unordered tree over `n` words, stored as normalized `(min, max)` edges
/// between 0-based word indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepTree {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DepTree {
    /// Builds a tree from an edge list, checking that it spans all `n` nodes
    /// with exactly `n - 1` distinct edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("a tree needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-loop on node {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!("duplicate edge ({a}, {b})")));
            }
        }
        if set.len() != n - 1 {
            return Err(Error::Validation(format!(
                "{} edges given, a tree on {n} nodes has {}",
                set.len(),
                n - 1
            )));
        }
        let tree = DepTree { n, edges: set };
        let reached = tree.bfs(0).iter().filter(|d| d.is_some()).count();
        if reached != n {
            return Err(Error::Validation("edges do not connect all nodes".into()));
        }
        Ok(tree)
    }

    /// Builds the undirected tree from 1-based heads (0 = root).
    pub fn from_heads(heads: &[usize]) -> Result<Self> {
        validate_heads(heads).map_err(|e| Error::Validation(e.to_string()))?;
        let edges = heads
            .iter()
            .enumerate()
            .filter(|(_, &h)| h != 0)
            .map(|(i, &h)| (i, h - 1));
        DepTree::from_edges(heads.len(), edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Path lengths between every pair of nodes.
    pub fn distances(&self) -> DistanceMatrix {
        let adj = self.adjacency();
        let n = self.n;
        let mut m = DistanceMatrix::zeros(n);
        // Root the tree at 0 and fill distances incrementally: a newly
        // discovered node sits one edge further from every known node than
        // its parent does, except from itself.
        let mut order = Vec::with_capacity(n);
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        for (k, &v) in order.iter().enumerate().skip(1) {
            let p = parent[v];
            for &u in &order[..k] {
                let d = if u == p { 1.0 } else { m.get(u, p) + 1.0 };
                m.set(u, v, d);
            }
        }
        m
    }
}

/// Symmetric `n x n` matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        DistanceMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from a full row-major matrix, checking symmetry and the zero
    /// diagonal exactly.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = DistanceMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::Validation(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    /// Entries above the diagonal in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Keeps only the listed rows/columns, in the given order.
    pub fn select(&self, keep: &[usize]) -> DistanceMatrix {
        let mut m = DistanceMatrix::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m.data[a * keep.len() + b] = self.get(i, j);
            }
        }
        m
    }
}
