use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, YearSpan};

/// Weighted co-authorship graph of one window.
///
/// `n[k]` counts the window publications listing `k`; `g[i][k]` counts those
/// listing both `i` and `k`. Adjacency is stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoPubGraph {
    span: YearSpan,
    n: BTreeMap<String, u32>,
    adj: BTreeMap<String, BTreeMap<String, u32>>,
}

impl CoPubGraph {
    pub fn empty(span: YearSpan) -> Self {
        CoPubGraph {
            span,
            n: BTreeMap::new(),
            adj: BTreeMap::new(),
        }
    }

    pub fn span(&self) -> YearSpan {
        self.span
    }

    /// Records one publication authored by `authors` (duplicates ignored).
    pub fn add_publication<'a, I: IntoIterator<Item = &'a str>>(&mut self, authors: I) {
        let mut keys: Vec<&str> = authors.into_iter().collect();
        keys.sort_unstable();
        keys.dedup();
        for (x, &a) in keys.iter().enumerate() {
            *self.n.entry(a.to_string()).or_default() += 1;
            for &b in &keys[x + 1..] {
                *self
                    .adj
                    .entry(a.to_string())
                    .or_default()
                    .entry(b.to_string())
                    .or_default() += 1;
                *self
                    .adj
                    .entry(b.to_string())
                    .or_default()
                    .entry(a.to_string())
                    .or_default() += 1;
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.n.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, u32)> {
        self.n.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.n.contains_key(key)
    }

    /// Publications by `k` in the window (0 when absent).
    pub fn n(&self, k: &str) -> u32 {
        self.n.get(k).copied().unwrap_or(0)
    }

    /// Co-publications of `i` and `k` in the window (0 when absent).
    pub fn g(&self, i: &str, k: &str) -> u32 {
        self.adj.get(i).and_then(|m| m.get(k)).copied().unwrap_or(0)
    }

    pub fn neighbors(&self, i: &str) -> impl Iterator<Item = (&str, u32)> {
        self.adj
            .get(i)
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, &g)| (k.as_str(), g)))
    }

    /// Edges with `i < k`, in key order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.adj.iter().flat_map(|(i, m)| {
            m.iter()
                .filter(move |(k, _)| i < *k)
                .map(move |(k, &g)| (i.as_str(), k.as_str(), g))
        })
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            window: self.span,
            nodes: self.n.clone(),
            edges: self
                .edges()
                .map(|(i, k, g)| (i.to_string(), k.to_string(), g))
                .collect(),
        }
    }
}

/// Debug dump: `{window, nodes: {key: n_k}, edges: [[i, k, g]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub window: YearSpan,
    pub nodes: BTreeMap<String, u32>,
    pub edges: Vec<(String, String, u32)>,
}

pub fn build_graph(corpus: &Corpus, span: YearSpan) -> CoPubGraph {
    let mut graph = CoPubGraph::empty(span);
    for rec in corpus.in_span(span) {
        graph.add_publication(rec.author_keys());
    }
    graph
}

/// Total expected number of bridging paths between `i` and `j`:
/// the sum over third authors `k` of `g(i,k) * g(j,k) / n(k)`.
pub fn tenb(graph: &CoPubGraph, i: &str, j: &str) -> f64 {
    debug_assert_ne!(i, j, "tenb of an author with themself");
    let (Some(ni), Some(nj)) = (graph.adj.get(i), graph.adj.get(j)) else {
        return 0.0;
    };
    // walk the smaller neighbourhood; both walks visit common k in key order
    let (small, large) = if ni.len() <= nj.len() { (ni, nj) } else { (nj, ni) };
    let mut total = 0.0;
    for (k, &g_small) in small {
        if k == i || k == j {
            continue;
        }
        if let Some(&g_large) = large.get(k) {
            total += g_small as f64 * g_large as f64 / graph.n[k] as f64;
        }
    }
    total
}
