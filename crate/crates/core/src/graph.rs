//! Directed-graph primitives: adjacency matrices with an acyclicity
//! invariant, topological orders, the structural Hamming distance, and
//! exhaustive DAG enumeration for the exact oracle.
//!
//! Nodes are 0-indexed internally and 1-indexed in all user-facing I/O
//! (JSON, DOT, error messages).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap for exhaustive enumeration; there are 29,281 labeled DAGs on
/// five nodes, which keeps oracle runs tractable.
pub const MAX_ENUMERATION_NODES: usize = 5;

/// A directed acyclic graph over `p` nodes.
///
/// `adj[k * p + j] == true` iff the edge `k -> j` is present. Construction
/// validates both invariants (zero diagonal, no directed cycle), so a `Dag`
/// value is always acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    p: usize,
    adj: Vec<bool>,
}

/// An arbitrary set of directed edges over `p` nodes, self-loops excluded.
///
/// Unlike [`Dag`], two-cycles are allowed: super-structures interpret an
/// undirected edge as the bidirected pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// JSON form of a graph or edge set: 1-indexed `[from, to]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Dag {
    /// The empty graph on `p` nodes.
    pub fn empty(p: usize) -> Self {
        Dag {
            p,
            adj: vec![false; p * p],
        }
    }

    /// Build from 0-indexed edges, validating acyclicity.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; p * p];
        for &(k, j) in edges {
            if k >= p || j >= p {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) out of range for p = {}",
                    k + 1,
                    j + 1,
                    p
                )));
            }
            if k == j {
                return Err(Error::InvalidInput(format!("self-loop at node {}", k + 1)));
            }
            adj[k * p + j] = true;
        }
        Dag::from_adjacency(p, adj)
    }

    /// Build from a row-major adjacency matrix, validating both invariants.
    pub fn from_adjacency(p: usize, adj: Vec<bool>) -> Result<Self> {
        if adj.len() != p * p {
            return Err(Error::InvalidInput(format!(
                "adjacency length {} does not match p = {}",
                adj.len(),
                p
            )));
        }
        if !is_acyclic(p, &adj)? {
            let cycle = find_cycle(p, &adj).unwrap_or_default();
            return Err(Error::Cycle(cycle));
        }
        Ok(Dag { p, adj })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adj[from * self.p + to]
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adj
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.p {
            for j in 0..self.p {
                if self.adj[k * self.p + j] {
                    out.push((k, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    /// Parents of `j` in ascending order.
    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&k| self.adj[k * self.p + j]).collect()
    }

    /// A topological order with deterministic tie-break by smallest node
    /// index: whenever the edge `order[k] -> order[j]` exists, `k < j`.
    pub fn topological_order(&self) -> Vec<usize> {
        // invariant guarantees success
        topological_order(self.p, &self.adj).expect("Dag invariant violated")
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p,
            edges: self
                .edges()
                .iter()
                .map(|&(k, j)| [k + 1, j + 1])
                .collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let edges = decode_edges(json)?;
        Dag::from_edges(json.p, &edges)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: GraphJson = serde_json::from_str(s)?;
        Dag::from_json(&json)
    }

    /// DOT export; node labels default to `X1..Xp`.
    pub fn to_dot(&self, names: Option<&[String]>) -> String {
        let name = |i: usize| -> String {
            match names {
                Some(ns) if i < ns.len() => ns[i].clone(),
                _ => format!("X{}", i + 1),
            }
        };
        let mut s = String::from("digraph G {\n");
        for i in 0..self.p {
            s.push_str(&format!("  \"{}\";\n", name(i)));
        }
        for (k, j) in self.edges() {
            s.push_str(&format!("  \"{}\" -> \"{}\";\n", name(k), name(j)));
        }
        s.push_str("}\n");
        s
    }
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        EdgeSet {
            p,
            edges: BTreeSet::new(),
        }
    }

    /// All p(p-1) ordered pairs.
    pub fn complete(p: usize) -> Self {
        let mut set = EdgeSet::new(p);
        for k in 0..p {
            for j in 0..p {
                if k != j {
                    set.edges.insert((k, j));
                }
            }
        }
        set
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = EdgeSet::new(p);
        for &(k, j) in edges {
            set.insert(k, j)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, from: usize, to: usize) -> Result<()> {
        if from >= self.p || to >= self.p {
            return Err(Error::InvalidInput(format!(
                "edge ({}, {}) out of range for p = {}",
                from + 1,
                to + 1,
                self.p
            )));
        }
        if from == to {
            return Err(Error::InvalidInput(format!(
                "self-loop at node {}",
                from + 1
            )));
        }
        self.edges.insert((from, to));
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset_of(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Insert both orientations of every edge (moral-graph style coverage).
    pub fn symmetrize(&mut self) {
        let pairs: Vec<_> = self.edges.iter().copied().collect();
        for (k, j) in pairs {
            self.edges.insert((j, k));
        }
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let mut out = self.clone();
        out.edges.extend(other.edges.iter().copied());
        out
    }

    /// True iff the edges, viewed as a directed graph, contain no cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut adj = vec![false; self.p * self.p];
        for &(k, j) in &self.edges {
            adj[k * self.p + j] = true;
        }
        is_acyclic(self.p, &adj).expect("EdgeSet invariant: zero diagonal")
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p,
            edges: self.iter().map(|(k, j)| [k + 1, j + 1]).collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let edges = decode_edges(json)?;
        EdgeSet::from_edges(json.p, &edges)
    }
}

fn decode_edges(json: &GraphJson) -> Result<Vec<(usize, usize)>> {
    json.edges
        .iter()
        .map(|&[k, j]| {
            if k == 0 || j == 0 {
                Err(Error::InvalidInput(
                    "graph JSON uses 1-indexed nodes; found index 0".into(),
                ))
            } else {
                Ok((k - 1, j - 1))
            }
        })
        .collect()
}

/// Kahn-style acyclicity check on a row-major binary matrix.
///
/// Errors on a nonzero diagonal; returns `true` iff a topological sort
/// consumes all `p` nodes.
pub fn is_acyclic(p: usize, adj: &[bool]) -> Result<bool> {
    if adj.len() != p * p {
        return Err(Error::InvalidInput(format!(
            "adjacency length {} does not match p = {}",
            adj.len(),
            p
        )));
    }
    for j in 0..p {
        if adj[j * p + j] {
            return Err(Error::InvalidInput(format!(
                "nonzero diagonal at node {}",
                j + 1
            )));
        }
    }
    let mut indeg = vec![0usize; p];
    for k in 0..p {
        for j in 0..p {
            if adj[k * p + j] {
                indeg[j] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..p).filter(|&j| indeg[j] == 0).collect();
    let mut seen = 0;
    while let Some(k) = stack.pop() {
        seen += 1;
        for j in 0..p {
            if adj[k * p + j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    stack.push(j);
                }
            }
        }
    }
    Ok(seen == p)
}

/// Topological order of a row-major adjacency matrix with smallest-index
/// tie-break; errors with one explicit cycle if the graph is cyclic.
pub fn topological_order(p: usize, adj: &[bool]) -> Result<Vec<usize>> {
    if !is_acyclic(p, adj)? {
        return Err(Error::Cycle(find_cycle(p, adj).unwrap_or_default()));
    }
    let mut indeg = vec![0usize; p];
    for k in 0..p {
        for j in 0..p {
            if adj[k * p + j] {
                indeg[j] += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..p).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(&k) = ready.iter().next() {
        ready.remove(&k);
        order.push(k);
        for j in 0..p {
            if adj[k * p + j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
    }
    Ok(order)
}

/// One directed cycle, if any, as a node list (without repeating the start).
fn find_cycle(p: usize, adj: &[bool]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Gray,
        Black,
    }
    let mut mark = vec![Mark::White; p];
    let mut parent = vec![usize::MAX; p];

    fn dfs(
        v: usize,
        p: usize,
        adj: &[bool],
        mark: &mut [Mark],
        parent: &mut [usize],
    ) -> Option<(usize, usize)> {
        mark[v] = Mark::Gray;
        for w in 0..p {
            if adj[v * p + w] {
                match mark[w] {
                    Mark::Gray => return Some((v, w)),
                    Mark::White => {
                        parent[w] = v;
                        if let Some(e) = dfs(w, p, adj, mark, parent) {
                            return Some(e);
                        }
                    }
                    Mark::Black => {}
                }
            }
        }
        mark[v] = Mark::Black;
        None
    }

    for s in 0..p {
        if mark[s] == Mark::White {
            if let Some((back_from, back_to)) = dfs(s, p, adj, &mut mark, &mut parent) {
                let mut cycle = vec![back_from];
                let mut v = back_from;
                while v != back_to {
                    v = parent[v];
                    cycle.push(v);
                }
                cycle.reverse();
                return Some(cycle);
            }
        }
    }
    None
}

/// Structural Hamming distance between two row-major binary matrices:
/// the entrywise absolute-difference sum.
pub fn shd(p: usize, a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != p * p || b.len() != p * p {
        return Err(Error::InvalidInput("dimension mismatch in shd".into()));
    }
    for j in 0..p {
        if a[j * p + j] || b[j * p + j] {
            return Err(Error::InvalidInput("nonzero diagonal in shd".into()));
        }
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// SHD between two DAGs of equal size.
pub fn shd_dags(a: &Dag, b: &Dag) -> Result<usize> {
    if a.p != b.p {
        return Err(Error::InvalidInput("dimension mismatch in shd".into()));
    }
    shd(a.p, &a.adj, &b.adj)
}

/// SHD decomposition of an estimate against the truth.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ShdBreakdown {
    pub shd: usize,
    /// Estimated edges whose pair is absent from the truth in both directions.
    pub extra: usize,
    /// True edges absent from the estimate in both directions.
    pub missing: usize,
    /// Unordered pairs present in both graphs with opposite orientation.
    pub reversed: usize,
    pub exact: bool,
}

/// Decompose the SHD into extra / missing / reversed counts;
/// `shd = extra + missing + 2 * reversed`.
pub fn shd_breakdown(estimated: &Dag, truth: &Dag) -> Result<ShdBreakdown> {
    let d = shd_dags(estimated, truth)?;
    let p = truth.p;
    let mut extra = 0;
    let mut missing = 0;
    let mut reversed = 0;
    for k in 0..p {
        for j in (k + 1)..p {
            let e_kj = estimated.has_edge(k, j);
            let e_jk = estimated.has_edge(j, k);
            let t_kj = truth.has_edge(k, j);
            let t_jk = truth.has_edge(j, k);
            // a Dag cannot hold both orientations of a pair
            let est = e_kj || e_jk;
            let tru = t_kj || t_jk;
            match (est, tru) {
                (true, false) => extra += 1,
                (false, true) => missing += 1,
                (true, true) => {
                    if e_kj != t_kj {
                        reversed += 1;
                    }
                }
                (false, false) => {}
            }
        }
    }
    Ok(ShdBreakdown {
        shd: d,
        extra,
        missing,
        reversed,
        exact: d == 0,
    })
}

/// Iterator over every labeled DAG on `p <= 5` nodes, exactly once.
///
/// Walks all `2^(p(p-1))` off-diagonal patterns and keeps the acyclic ones.
pub struct DagEnumerator {
    p: usize,
    positions: Vec<(usize, usize)>,
    next_mask: u64,
    end: u64,
}

/// Stream of all labeled DAGs on `p` nodes (`1 <= p <= 5`).
pub fn enumerate_dags(p: usize) -> Result<DagEnumerator> {
    if p == 0 || p > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidInput(format!(
            "enumeration supports 1 <= p <= {}, got {}",
            MAX_ENUMERATION_NODES, p
        )));
    }
    let mut positions = Vec::with_capacity(p * (p - 1));
    for k in 0..p {
        for j in 0..p {
            if k != j {
                positions.push((k, j));
            }
        }
    }
    let end = 1u64 << positions.len();
    Ok(DagEnumerator {
        p,
        positions,
        next_mask: 0,
        end,
    })
}

impl DagEnumerator {
    /// Materialize the adjacency for a bitmask over the off-diagonal slots.
    pub fn adjacency_of_mask(&self, mask: u64) -> Vec<bool> {
        let mut adj = vec![false; self.p * self.p];
        for (bit, &(k, j)) in self.positions.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                adj[k * self.p + j] = true;
            }
        }
        adj
    }
}

impl Iterator for DagEnumerator {
    type Item = Dag;

    fn next(&mut self) -> Option<Dag> {
        while self.next_mask < self.end {
            let mask = self.next_mask;
            self.next_mask += 1;
            let adj = self.adjacency_of_mask(mask);
            if is_acyclic(self.p, &adj).expect("zero diagonal by construction") {
                return Some(Dag { p: self.p, adj });
            }
        }
        None
    }
}
