//! Random regular multigraphs, their directed doubles, and the loop-exit and
//! cofinality predicates that decide pure infiniteness and simplicity of the
//! graph algebra.

use std::collections::VecDeque;
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Undirected multigraph without self-loops. Edges are stored as `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multigraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Multigraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut normalised = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            normalised.push((a.min(b), a.max(b)));
        }
        Ok(Self { n, edges: normalised })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// One edge per line, `i j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# vertices {}\n", self.n);
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# vertices") {
                n = Some(rest.trim().parse().map_err(|_| invalid(format!("line {}: bad vertex count", lineno + 1)))?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| s.parse::<usize>().map_err(|_| invalid(format!("line {}: bad vertex `{s}`", lineno + 1)));
            match parts.as_slice() {
                [a, b] => edges.push((parse(a)?, parse(b)?)),
                _ => return Err(invalid(format!("line {}: expected two vertices", lineno + 1))),
            }
        }
        let n = match n {
            Some(n) => n,
            None => edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0),
        };
        Self::new(n, edges)
    }
}

/// Union of `r` independent uniform perfect matchings on `n` vertices.
pub fn sample_regular_multigraph<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Multigraph> {
    if n < 2 || n % 2 == 1 {
        return Err(invalid(format!("vertex count must be even and at least 2, got {n}")));
    }
    if r == 0 {
        return Err(invalid("degree must be at least 1"));
    }
    let mut vertices: Vec<usize> = (0..n).collect();
    let mut edges = Vec::with_capacity(n / 2 * r);
    for _ in 0..r {
        vertices.shuffle(rng);
        for pair in vertices.chunks_exact(2) {
            edges.push((pair[0].min(pair[1]), pair[0].max(pair[1])));
        }
    }
    Ok(Multigraph { n, edges })
}

/// Finite directed graph given by edge multiplicities `adjacency[i][j]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digraph {
    adjacency: Vec<Vec<u64>>,
}

impl Digraph {
    pub fn from_adjacency(adjacency: Vec<Vec<u64>>) -> Result<Self> {
        let n = adjacency.len();
        if let Some(i) = adjacency.iter().position(|row| row.len() != n) {
            return Err(invalid(format!("adjacency row {i} has length {}, expected {n}", adjacency[i].len())));
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<u64>] {
        &self.adjacency
    }

    pub fn out_degree(&self, v: usize) -> u64 {
        self.adjacency[v].iter().sum()
    }

    pub fn in_degree(&self, v: usize) -> u64 {
        self.adjacency.iter().map(|row| row[v]).sum()
    }

    /// Whitespace-separated rows of the adjacency matrix.
    pub fn to_dense_text(&self) -> String {
        let mut out = String::new();
        for row in &self.adjacency {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_dense_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                line.split_whitespace()
                    .map(|c| c.parse::<u64>().map_err(|_| invalid(format!("row {i}: bad entry `{c}`"))))
                    .collect::<Result<Vec<u64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_adjacency(rows)
    }

    fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().enumerate().filter(|(_, &m)| m > 0).map(|(j, _)| j)
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for w in self.successors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Strongly connected components that contain a cycle.
    fn cyclic_components(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.n(), 0);
        let nodes: Vec<_> = (0..self.n()).map(|_| g.add_node(())).collect();
        for v in 0..self.n() {
            for w in self.successors(v) {
                g.add_edge(nodes[v], nodes[w], ());
            }
        }
        tarjan_scc(&g)
            .into_iter()
            .map(|c| c.into_iter().map(|x| x.index()).collect::<Vec<_>>())
            .filter(|c| c.len() > 1 || self.adjacency[c[0]][c[0]] > 0)
            .collect()
    }
}

/// Each undirected edge becomes a pair of opposite directed edges.
pub fn double_to_digraph(g: &Multigraph) -> Digraph {
    let mut adjacency = vec![vec![0u64; g.n]; g.n];
    for &(a, b) in &g.edges {
        adjacency[a][b] += 1;
        adjacency[b][a] += 1;
    }
    Digraph { adjacency }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KirchbergPredicates {
    pub has_sink: bool,
    pub has_source: bool,
    pub every_loop_has_exit: bool,
    pub cofinal: bool,
    pub purely_infinite: bool,
    /// `None` when the graph has sinks.
    pub simple: Option<bool>,
}

pub fn kirchberg_predicates(d: &Digraph) -> KirchbergPredicates {
    let n = d.n();
    let out: Vec<u64> = (0..n).map(|v| d.out_degree(v)).collect();
    let has_sink = out.contains(&0);
    let has_source = (0..n).any(|v| d.in_degree(v) == 0);

    // A loop without exit is a cycle on which every vertex emits exactly one edge.
    let mut every_loop_has_exit = true;
    let mut state = vec![0u8; n];
    'outer: for start in 0..n {
        if out[start] != 1 || state[start] != 0 {
            continue;
        }
        let mut trail = Vec::new();
        let mut v = start;
        while out[v] == 1 && state[v] == 0 {
            state[v] = 1;
            trail.push(v);
            v = d.successors(v).next().expect("out-degree one");
        }
        if out[v] == 1 && state[v] == 1 {
            every_loop_has_exit = false;
            break 'outer;
        }
        for t in trail {
            state[t] = 2;
        }
    }

    let cyclic = d.cyclic_components();
    let reach: Vec<Vec<bool>> = (0..n).map(|v| d.reachable_from(v)).collect();
    let cofinal = (0..n).all(|v| cyclic.iter().all(|c| reach[v][c[0]]));
    let reaches_loop = (0..n).all(|v| cyclic.iter().any(|c| reach[v][c[0]]));
    let purely_infinite = n > 0 && reaches_loop && every_loop_has_exit;
    let simple = (!has_sink).then_some(cofinal && every_loop_has_exit);

    KirchbergPredicates {
        has_sink,
        has_source,
        every_loop_has_exit,
        cofinal,
        purely_infinite,
        simple,
    }
}
