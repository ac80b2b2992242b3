//! Concrete hypergraphs of type n and their algebra.
//!
//! Vertices are the dense range `0..n_vertices`; edges are indexed by their
//! position in `edges`. Identifiers in text formats are mapped onto these
//! indices by the parsers in [`crate::io`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use crate::canon::{canonical_code, CanonicalCode};

/// Edge label (terminal or nonterminal name).
pub type Label = Arc<str>;

/// Finite ranked alphabet.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    pub labels: BTreeMap<String, usize>,
}

impl Alphabet {
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Alphabet {
            labels: pairs.into_iter().map(|(s, k)| (s.into(), k)).collect(),
        }
    }

    pub fn arity(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains_key(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn max_arity(&self) -> usize {
        self.labels.values().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub label: Label,
    pub att: Vec<u32>,
}

impl Edge {
    pub fn new(label: &str, att: Vec<u32>) -> Self {
        Edge {
            label: Arc::from(label),
            att,
        }
    }

    pub fn arity(&self) -> usize {
        self.att.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    pub n_vertices: u32,
    pub edges: Vec<Edge>,
    pub sources: Vec<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge {0} not present")]
    NoSuchEdge(usize),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: usize, found: usize },
}

/// One failed clause of the graph invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub clause: &'static str,
    pub subject: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.clause, self.subject)
    }
}

impl Graph {
    /// The unit graph 1̄_n: n vertices, all sources, no edges.
    pub fn unit(n: usize) -> Self {
        Graph {
            n_vertices: n as u32,
            edges: Vec::new(),
            sources: (0..n as u32).collect(),
        }
    }

    /// A single edge attached to `arity` fresh vertices, all of them sources.
    pub fn single_edge(label: &str, arity: usize) -> Self {
        let mut g = Graph::unit(arity);
        g.edges.push(Edge::new(label, (0..arity as u32).collect()));
        g
    }

    pub fn with_vertices(n_vertices: u32) -> Self {
        Graph {
            n_vertices,
            edges: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn type_n(&self) -> usize {
        self.sources.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Size measure |V|+|E| used for all enumeration bounds.
    pub fn size(&self) -> usize {
        self.n_vertices as usize + self.edges.len()
    }

    pub fn add_vertex(&mut self) -> u32 {
        self.n_vertices += 1;
        self.n_vertices - 1
    }

    pub fn add_edge(&mut self, label: &str, att: Vec<u32>) -> usize {
        self.edges.push(Edge::new(label, att));
        self.edges.len() - 1
    }

    pub fn source(&self, i: usize) -> u32 {
        self.sources[i - 1]
    }

    pub fn source_index(&self, v: u32) -> Option<usize> {
        self.sources.iter().position(|&s| s == v).map(|p| p + 1)
    }

    pub fn is_source(&self, v: u32) -> bool {
        self.sources.contains(&v)
    }

    /// Int(G): vertices that are not sources.
    pub fn internal_vertices(&self) -> Vec<u32> {
        let mut is_src = vec![false; self.n_vertices as usize];
        for &s in &self.sources {
            if let Some(b) = is_src.get_mut(s as usize) {
                *b = true;
            }
        }
        (0..self.n_vertices)
            .filter(|&v| !is_src[v as usize])
            .collect()
    }

    /// Incident edge indices for every vertex (each edge listed once per vertex).
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_vertices as usize];
        for (i, e) in self.edges.iter().enumerate() {
            for &v in &e.att {
                let list = &mut inc[v as usize];
                if list.last() != Some(&i) && !list.contains(&i) {
                    list.push(i);
                }
            }
        }
        inc
    }

    /// Check the graph invariants; `arity` resolves declared label arities.
    pub fn validate(&self, arity: &dyn Fn(&str) -> Option<usize>) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.att.is_empty() {
                out.push(Violation {
                    clause: "empty attachment",
                    subject: format!("e{i}"),
                });
            }
            match arity(&e.label) {
                None => out.push(Violation {
                    clause: "unknown label",
                    subject: format!("e{i} ({})", e.label),
                }),
                Some(k) if k != e.att.len() => out.push(Violation {
                    clause: "arity mismatch",
                    subject: format!(
                        "e{i} ({} has arity {k}, {} attachments)",
                        e.label,
                        e.att.len()
                    ),
                }),
                _ => {}
            }
            for &v in &e.att {
                if v >= self.n_vertices {
                    out.push(Violation {
                        clause: "undeclared vertex",
                        subject: format!("e{i} attaches v{v}"),
                    });
                }
            }
        }
        for (i, &s) in self.sources.iter().enumerate() {
            if s >= self.n_vertices {
                out.push(Violation {
                    clause: "undeclared vertex",
                    subject: format!("source {} is v{s}", i + 1),
                });
            }
            if self.sources[..i].contains(&s) {
                out.push(Violation {
                    clause: "source map not injective",
                    subject: format!("v{s}"),
                });
            }
        }
        out
    }

    /// G[e/H] together with the embedding of H's vertices into the result.
    ///
    /// Edges of the result: edges of G before `e`, then H's edges, then the
    /// remaining edges of G.
    pub fn substitute_with_map(
        &self,
        e: usize,
        h: &Graph,
    ) -> Result<(Graph, Vec<u32>), GraphError> {
        let edge = self.edges.get(e).ok_or(GraphError::NoSuchEdge(e))?;
        if edge.att.len() != h.type_n() {
            return Err(GraphError::TypeMismatch {
                expected: edge.att.len(),
                found: h.type_n(),
            });
        }
        let mut vmap = vec![u32::MAX; h.n_vertices as usize];
        for (i, &s) in h.sources.iter().enumerate() {
            vmap[s as usize] = edge.att[i];
        }
        let mut next = self.n_vertices;
        for m in vmap.iter_mut() {
            if *m == u32::MAX {
                *m = next;
                next += 1;
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len() + h.edges.len() - 1);
        edges.extend_from_slice(&self.edges[..e]);
        for he in &h.edges {
            edges.push(Edge {
                label: he.label.clone(),
                att: he.att.iter().map(|&v| vmap[v as usize]).collect(),
            });
        }
        edges.extend_from_slice(&self.edges[e + 1..]);
        Ok((
            Graph {
                n_vertices: next,
                edges,
                sources: self.sources.clone(),
            },
            vmap,
        ))
    }

    pub fn substitute(&self, e: usize, h: &Graph) -> Result<Graph, GraphError> {
        self.substitute_with_map(e, h).map(|(g, _)| g)
    }

    /// Substitute several distinct edges at once. `subs` maps edge index to
    /// replacement; the remaining edges keep their relative order.
    pub fn substitute_many(&self, subs: &[(usize, &Graph)]) -> Result<Graph, GraphError> {
        let mut replace: Vec<Option<&Graph>> = vec![None; self.edges.len()];
        for &(e, h) in subs {
            let edge = self.edges.get(e).ok_or(GraphError::NoSuchEdge(e))?;
            if edge.att.len() != h.type_n() {
                return Err(GraphError::TypeMismatch {
                    expected: edge.att.len(),
                    found: h.type_n(),
                });
            }
            replace[e] = Some(h);
        }
        let mut out = Graph {
            n_vertices: self.n_vertices,
            edges: Vec::new(),
            sources: self.sources.clone(),
        };
        let mut vmap = Vec::new();
        for (i, edge) in self.edges.iter().enumerate() {
            match replace[i] {
                None => out.edges.push(edge.clone()),
                Some(h) => {
                    vmap.clear();
                    vmap.resize(h.n_vertices as usize, u32::MAX);
                    for (k, &s) in h.sources.iter().enumerate() {
                        vmap[s as usize] = edge.att[k];
                    }
                    for m in vmap.iter_mut() {
                        if *m == u32::MAX {
                            *m = out.n_vertices;
                            out.n_vertices += 1;
                        }
                    }
                    for he in &h.edges {
                        out.edges.push(Edge {
                            label: he.label.clone(),
                            att: he.att.iter().map(|&v| vmap[v as usize]).collect(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// g1 ∥_n g2, with the embedding of g2's vertices into the result.
    pub fn parallel_with_map(&self, other: &Graph) -> Result<(Graph, Vec<u32>), GraphError> {
        if self.type_n() != other.type_n() {
            return Err(GraphError::TypeMismatch {
                expected: self.type_n(),
                found: other.type_n(),
            });
        }
        let mut vmap = vec![u32::MAX; other.n_vertices as usize];
        for (i, &s) in other.sources.iter().enumerate() {
            vmap[s as usize] = self.sources[i];
        }
        let mut next = self.n_vertices;
        for m in vmap.iter_mut() {
            if *m == u32::MAX {
                *m = next;
                next += 1;
            }
        }
        let mut edges = self.edges.clone();
        for e in &other.edges {
            edges.push(Edge {
                label: e.label.clone(),
                att: e.att.iter().map(|&v| vmap[v as usize]).collect(),
            });
        }
        Ok((
            Graph {
                n_vertices: next,
                edges,
                sources: self.sources.clone(),
            },
            vmap,
        ))
    }

    pub fn parallel(&self, other: &Graph) -> Result<Graph, GraphError> {
        self.parallel_with_map(other).map(|(g, _)| g)
    }

    /// ⌊G⌋: forget the sources.
    pub fn strip_sources(&self) -> Graph {
        Graph {
            n_vertices: self.n_vertices,
            edges: self.edges.clone(),
            sources: Vec::new(),
        }
    }

    /// Connected components of the vertex set (any two attachments of an
    /// edge are adjacent). Components are listed by least vertex.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.n_vertices as usize;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for e in &self.edges {
            if let Some((&a, rest)) = e.att.split_first() {
                for &b in rest {
                    let ra = find(&mut parent, a as usize);
                    let rb = find(&mut parent, b as usize);
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v as u32);
        }
        groups.into_values().collect()
    }

    /// True iff the vertex set is connected. The empty graph counts as connected.
    pub fn is_connected(&self) -> bool {
        self.n_vertices <= 1 || self.components().len() == 1
    }

    /// Rename vertices by `perm` (old index -> new index).
    pub fn permute_vertices(&self, perm: &[u32]) -> Graph {
        Graph {
            n_vertices: self.n_vertices,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    label: e.label.clone(),
                    att: e.att.iter().map(|&v| perm[v as usize]).collect(),
                })
                .collect(),
            sources: self.sources.iter().map(|&v| perm[v as usize]).collect(),
        }
    }

    /// Graph induced by keeping only `keep` vertices (and edges entirely inside them).
    pub fn induced(&self, keep: &[bool]) -> Graph {
        let mut map = vec![u32::MAX; self.n_vertices as usize];
        let mut n = 0;
        for v in 0..self.n_vertices as usize {
            if keep[v] {
                map[v] = n;
                n += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| e.att.iter().all(|&v| keep[v as usize]))
            .map(|e| Edge {
                label: e.label.clone(),
                att: e.att.iter().map(|&v| map[v as usize]).collect(),
            })
            .collect();
        let sources = self
            .sources
            .iter()
            .filter(|&&s| keep[s as usize])
            .map(|&s| map[s as usize])
            .collect();
        Graph {
            n_vertices: n,
            edges,
            sources,
        }
    }
}

/// Every label occurring in `g` with its attachment length.
pub fn used_labels(g: &Graph) -> BTreeMap<String, usize> {
    g.edges
        .iter()
        .map(|e| (e.label.to_string(), e.att.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arity_of(a: &Alphabet) -> impl Fn(&str) -> Option<usize> + '_ {
        move |l| a.arity(l)
    }

    #[test]
    fn unit_graph_is_valid() {
        let a = Alphabet::default();
        let g = Graph::unit(1);
        assert!(g.validate(&arity_of(&a)).is_empty());
    }

    #[test]
    fn arity_mismatch_reported() {
        let a = Alphabet::new([("a", 3)]);
        let mut g = Graph::with_vertices(2);
        g.add_edge("a", vec![0, 1]);
        let v = g.validate(&arity_of(&a));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].clause, "arity mismatch");
    }

    #[test]
    fn non_injective_sources_reported() {
        let a = Alphabet::default();
        let g = Graph {
            n_vertices: 1,
            edges: vec![],
            sources: vec![0, 0],
        };
        assert_eq!(
            g.validate(&arity_of(&a))[0].clause,
            "source map not injective"
        );
    }

    #[test]
    fn substitute_unit_deletes_edge() {
        let mut g = Graph::with_vertices(3);
        g.add_edge("a", vec![0, 1]);
        g.add_edge("b", vec![1, 2]);
        let r = g.substitute(0, &Graph::unit(2)).unwrap();
        assert_eq!(r.n_vertices, 3);
        assert_eq!(r.edges, vec![Edge::new("b", vec![1, 2])]);
    }

    #[test]
    fn substitute_single_edge_relabels() {
        let mut g = Graph::with_vertices(2);
        g.add_edge("u", vec![1, 0]);
        let r = g.substitute(0, &Graph::single_edge("a", 2)).unwrap();
        assert_eq!(r.edges, vec![Edge::new("a", vec![1, 0])]);
        assert_eq!(r.n_vertices, 2);
    }

    #[test]
    fn substitute_path_size_law() {
        let mut g = Graph::with_vertices(2);
        g.add_edge("a", vec![0, 1]);
        g.add_edge("b", vec![0, 1]);
        let mut h = Graph::with_vertices(3);
        h.sources = vec![0, 2];
        h.add_edge("a", vec![0, 1]);
        h.add_edge("a", vec![1, 2]);
        let r = g.substitute(0, &h).unwrap();
        assert_eq!(r.n_vertices, 2 + 3 - 2);
        assert_eq!(r.n_edges(), 2 - 1 + 2);
    }

    #[test]
    fn substitute_type_mismatch() {
        let g = Graph::single_edge("a", 2);
        assert_eq!(
            g.substitute(0, &Graph::unit(3)),
            Err(GraphError::TypeMismatch {
                expected: 2,
                found: 3
            })
        );
        assert_eq!(
            g.substitute(4, &Graph::unit(2)),
            Err(GraphError::NoSuchEdge(4))
        );
    }

    #[test]
    fn parallel_glues_sources() {
        let g = Graph::single_edge("a", 2)
            .parallel(&Graph::single_edge("b", 2))
            .unwrap();
        assert_eq!(g.n_vertices, 2);
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|e| e.att == vec![0, 1]));
    }

    #[test]
    fn strip_unit() {
        let g = Graph::unit(3).strip_sources();
        assert_eq!(g.type_n(), 0);
        assert_eq!(g.n_vertices, 3);
    }

    #[test]
    fn connectivity() {
        assert!(Graph::with_vertices(1).is_connected());
        assert!(!Graph::with_vertices(2).is_connected());
        assert!(Graph::single_edge("a", 3).is_connected());
    }

    #[test]
    fn internal_vertices() {
        let mut g = Graph::with_vertices(3);
        g.sources = vec![2];
        assert_eq!(g.internal_vertices(), vec![0, 1]);
    }
}
