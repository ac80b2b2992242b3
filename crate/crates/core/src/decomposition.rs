//! Tree decompositions and embeddable tree decompositions: validation,
//! exact solvers, extraction from derivations and connected cuts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::classify::check_tree_verifiable;
use crate::grammar::{derivation_child_heads, DerivationTree, Grammar, Rule};
use crate::hypergraph::{Edge, Graph};

/// Reserved label of backbone edges.
pub const TREE_LABEL: &str = "__tree";
pub const TREEWIDTH_VERTEX_CAP: usize = 10;
pub const ETW_SIZE_CAP: usize = 12;
pub const CUT_VERTEX_CAP: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecompError {
    #[error("bag of node {node} references unknown vertex {vertex}")]
    UnknownVertex { node: usize, vertex: u32 },
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DecompViolation {
    pub clause: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<DecompViolation>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, clause: &'static str, message: impl Into<String>) {
        self.violations.push(DecompViolation {
            clause,
            message: message.into(),
        });
    }

    pub fn has_clause(&self, clause: &str) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid: {}", self.is_valid())?;
        for v in &self.violations {
            writeln!(f, "violation: {}: {}", v.clause, v.message)?;
        }
        Ok(())
    }
}

/// Rooted backbone with bags. Node `i` has parent `parent[i]`; the root has none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub parent: Vec<Option<usize>>,
    pub bags: Vec<BTreeSet<u32>>,
}

impl TreeDecomposition {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.parent.iter().position(|p| p.is_none())
    }

    pub fn children(&self, u: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.parent[c] == Some(u))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.bags
            .iter()
            .map(|b| b.len())
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// The backbone as a graph over [`TREE_LABEL`], edges parent to child.
    pub fn backbone(&self) -> Graph {
        let mut g = Graph::with_vertices(self.len() as u32);
        for (c, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                g.add_edge(TREE_LABEL, vec![*p as u32, c as u32]);
            }
        }
        g
    }

    /// Structural problems: not exactly one root, or a parent cycle.
    fn tree_violations(&self, out: &mut Verdict) {
        let roots = self.parent.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            out.push("backbone is a tree", format!("{roots} roots"));
        }
        for (i, p) in self.parent.iter().enumerate() {
            if p.is_some_and(|p| p >= self.len()) {
                out.push("backbone is a tree", format!("node {i} has unknown parent"));
                return;
            }
        }
        for i in 0..self.len() {
            let mut cur = i;
            for _ in 0..=self.len() {
                match self.parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            if self.parent[cur].is_some() {
                out.push(
                    "backbone is a tree",
                    format!("node {i} lies on a parent cycle"),
                );
                return;
            }
        }
    }
}

/// Check both tree-decomposition clauses; returns the verdict and width.
pub fn validate_td(g: &Graph, td: &TreeDecomposition) -> Result<(Verdict, usize), DecompError> {
    for (node, b) in td.bags.iter().enumerate() {
        if let Some(&vertex) = b.iter().find(|&&v| v >= g.n_vertices) {
            return Err(DecompError::UnknownVertex { node, vertex });
        }
    }
    let mut out = Verdict::default();
    if td.bags.len() != td.parent.len() {
        out.push("backbone is a tree", "bag count differs from node count");
        return Ok((out, td.width()));
    }
    td.tree_violations(&mut out);
    if !out.is_valid() {
        return Ok((out, td.width()));
    }
    for (i, e) in g.edges.iter().enumerate() {
        if !td.bags.iter().any(|b| e.att.iter().all(|v| b.contains(v))) {
            out.push("edge attachments inside some bag", format!("e{i}"));
        }
    }
    for v in 0..g.n_vertices {
        let occ: Vec<usize> = (0..td.len()).filter(|&n| td.bags[n].contains(&v)).collect();
        if occ.is_empty() {
            out.push("nonempty and connected", format!("v{v} occurs in no bag"));
            continue;
        }
        // Connected iff exactly one occurrence has its parent outside the set.
        let tops = occ
            .iter()
            .filter(|&&n| td.parent[n].is_none_or(|p| !td.bags[p].contains(&v)))
            .count();
        if tops != 1 {
            out.push(
                "nonempty and connected",
                format!("occurrences of v{v} are disconnected"),
            );
        }
    }
    Ok((out, td.width()))
}

/// Primal adjacency: attachments of an edge are pairwise adjacent.
fn primal(g: &Graph) -> Vec<u32> {
    let mut adj = vec![0u32; g.n_vertices as usize];
    for e in &g.edges {
        for &a in &e.att {
            for &b in &e.att {
                if a != b {
                    adj[a as usize] |= 1 << b;
                }
            }
        }
    }
    adj
}

/// Vertices outside `s ∪ {v}` reachable from `v` through `s`.
fn q_set(adj: &[u32], s: u32, v: usize) -> u32 {
    let mut seen = 1u32 << v;
    let mut stack = vec![v];
    let mut out = 0u32;
    while let Some(x) = stack.pop() {
        let mut nb = adj[x] & !seen;
        while nb != 0 {
            let y = nb.trailing_zeros() as usize;
            nb &= nb - 1;
            seen |= 1 << y;
            if s >> y & 1 == 1 {
                stack.push(y);
            } else {
                out |= 1 << y;
            }
        }
    }
    out
}

/// Exact treewidth by dynamic programming over elimination prefixes,
/// with a certificate built from an optimal elimination order.
pub fn treewidth_exact(g: &Graph) -> Result<(usize, TreeDecomposition), DecompError> {
    let n = g.n_vertices as usize;
    if n > TREEWIDTH_VERTEX_CAP {
        return Err(DecompError::CapExceeded(format!(
            "{n} vertices, cap {TREEWIDTH_VERTEX_CAP}"
        )));
    }
    if n == 0 {
        return Ok((
            0,
            TreeDecomposition {
                parent: vec![None],
                bags: vec![BTreeSet::new()],
            },
        ));
    }
    let adj = primal(g);
    let full = (1u32 << n) - 1;
    let mut best = vec![usize::MAX; 1 << n];
    let mut choice = vec![0usize; 1 << n];
    best[0] = 0;
    for s in 1..=full {
        let mut rest = s;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let prev = s & !(1 << v);
            let cost = best[prev as usize].max(q_set(&adj, prev, v).count_ones() as usize);
            if cost < best[s as usize] {
                best[s as usize] = cost;
                choice[s as usize] = v;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        order.push(choice[s as usize]);
        s &= !(1 << choice[s as usize]);
    }
    order.reverse();
    let td = td_from_order(&adj, &order);
    Ok((best[full as usize], td))
}

fn td_from_order(adj: &[u32], order: &[usize]) -> TreeDecomposition {
    let n = order.len();
    let mut a = adj.to_vec();
    let mut rank = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    let mut later = vec![0u32; n];
    for &v in order {
        let nb = a[v] & !order[..rank[v]].iter().fold(0u32, |m, &u| m | 1 << u);
        later[v] = nb;
        let mut x = nb;
        while x != 0 {
            let y = x.trailing_zeros() as usize;
            x &= x - 1;
            a[y] |= nb & !(1 << y);
        }
    }
    // Node i holds the bag of order[i].
    let mut parent = vec![None; n];
    let mut bags = vec![BTreeSet::new(); n];
    for (i, &v) in order.iter().enumerate() {
        let mut bag: BTreeSet<u32> = [v as u32].into();
        let mut x = later[v];
        let mut next = None;
        while x != 0 {
            let y = x.trailing_zeros() as usize;
            x &= x - 1;
            bag.insert(y as u32);
            if next.is_none_or(|r: usize| rank[y] < r) {
                next = Some(rank[y]);
            }
        }
        bags[i] = bag;
        if i + 1 < n {
            parent[i] = Some(next.unwrap_or(n - 1));
        }
    }
    TreeDecomposition { parent, bags }
}

/// Node kind of an embeddable decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Not in W; γ maps it to this vertex.
    Vertex(u32),
    /// In W; δ maps it to this edge.
    Edge(usize),
}

/// (z, π)-mode data; `pointed` iff the root is in W.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtdMode {
    pub z: usize,
    pub pi: BTreeSet<usize>,
    pub pointed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddableTD {
    pub base: TreeDecomposition,
    pub kinds: Vec<NodeKind>,
    pub mode: Option<EtdMode>,
}

impl EmbeddableTD {
    pub fn w_nodes(&self) -> BTreeSet<usize> {
        (0..self.kinds.len())
            .filter(|&i| matches!(self.kinds[i], NodeKind::Edge(_)))
            .collect()
    }

    pub fn gamma(&self) -> BTreeMap<usize, u32> {
        self.kinds
            .iter()
            .enumerate()
            .filter_map(|(i, k)| match k {
                NodeKind::Vertex(v) => Some((i, *v)),
                NodeKind::Edge(_) => None,
            })
            .collect()
    }

    pub fn delta(&self) -> BTreeMap<usize, usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter_map(|(i, k)| match k {
                NodeKind::Edge(e) => Some((i, *e)),
                NodeKind::Vertex(_) => None,
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.base.width()
    }

    pub fn len_nodes(&self) -> usize {
        self.kinds.len()
    }
}

/// Check every embeddable-decomposition condition, in the (z, π) variant
/// when mode data is present.
pub fn validate_etd(g: &Graph, etd: &EmbeddableTD) -> Verdict {
    let td = &etd.base;
    let mut out = match validate_td(g, td) {
        Ok((v, _)) => v,
        Err(e) => {
            let mut v = Verdict::default();
            v.push("bag vertices exist", e.to_string());
            return v;
        }
    };
    if etd.kinds.len() != td.len() {
        out.push("node kinds", "kind count differs from node count");
        return out;
    }
    if td.root().is_none() || out.has_clause("backbone is a tree") {
        return out;
    }
    let root = td.root().unwrap();
    let in_w = |i: usize| matches!(etd.kinds[i], NodeKind::Edge(_));
    for c in 0..td.len() {
        if let Some(p) = td.parent[c] {
            if in_w(c) == in_w(p) {
                out.push("membership in W alternates", format!("nodes {p} and {c}"));
            }
        }
    }
    // δ is a bijection onto the edges.
    let mut edge_hits = vec![0usize; g.edges.len()];
    for (_, e) in etd.delta() {
        match edge_hits.get_mut(e) {
            Some(h) => *h += 1,
            None => out.push("delta bijective", format!("unknown edge e{e}")),
        }
    }
    for (e, &h) in edge_hits.iter().enumerate() {
        if h != 1 {
            out.push("delta bijective", format!("e{e} is the image of {h} nodes"));
        }
    }
    // γ is a bijection onto V, or onto Int(G) ∪ A in mode.
    let target: BTreeSet<u32> = match &etd.mode {
        None => (0..g.n_vertices).collect(),
        Some(m) => {
            let mut t: BTreeSet<u32> = g.internal_vertices().into_iter().collect();
            let bad = m.z == 0
                || m.z > g.type_n()
                || m.pi.iter().any(|&i| i == 0 || i > g.type_n() || i == m.z);
            if bad {
                out.push("mode indices", format!("z {} or pi outside the type", m.z));
                return out;
            }
            t.extend(m.pi.iter().map(|&i| g.source(i)));
            if !m.pointed {
                t.insert(g.source(m.z));
            }
            t
        }
    };
    let mut image = BTreeSet::new();
    for (node, v) in etd.gamma() {
        if !image.insert(v) {
            out.push(
                "gamma bijective",
                format!("v{v} is the image of several nodes"),
            );
        }
        if !target.contains(&v) {
            out.push(
                "gamma bijective",
                format!("node {node} maps to v{v} outside the codomain"),
            );
        }
        if !td.bags[node].contains(&v) {
            out.push("gamma(u) in beta(u)", format!("node {node}"));
        }
    }
    for v in target.difference(&image) {
        out.push("gamma bijective", format!("v{v} has no preimage"));
    }
    for (node, e) in etd.delta() {
        let Some(edge) = g.edges.get(e) else { continue };
        if let Some(p) = td.parent[node] {
            if let NodeKind::Vertex(pv) = etd.kinds[p] {
                if !edge.att.contains(&pv) {
                    out.push(
                        "parent attached to the edge",
                        format!("node {node}: e{e} misses v{pv}"),
                    );
                }
            }
        }
        let parent_v = td.parent[node].and_then(|p| match etd.kinds[p] {
            NodeKind::Vertex(v) => Some(v),
            _ => None,
        });
        for c in td.children(node) {
            if let NodeKind::Vertex(cv) = etd.kinds[c] {
                if !edge.att.contains(&cv) || Some(cv) == parent_v {
                    out.push(
                        "children attached at distinct positions",
                        format!("node {node}: child v{cv}"),
                    );
                }
            }
        }
        if !edge.att.iter().all(|v| td.bags[node].contains(v)) {
            out.push("attachments inside beta(w)", format!("node {node}"));
        }
    }
    match &etd.mode {
        None => {
            if in_w(root) {
                out.push("root not in W", format!("root {root}"));
            }
        }
        Some(m) => {
            for (i, s) in g.sources.iter().enumerate() {
                if !td.bags[root].contains(s) {
                    out.push("sources in the root bag", format!("source {}", i + 1));
                }
            }
            if m.pointed != in_w(root) {
                out.push(
                    "pointed iff root in W",
                    format!("pointed {} but root in W is {}", m.pointed, in_w(root)),
                );
            }
            let sz = g.source(m.z);
            match etd.kinds[root] {
                NodeKind::Edge(e) => {
                    if g.edges.get(e).is_some_and(|x| !x.att.contains(&sz)) {
                        out.push("pointed root edge holds src(z)", format!("e{e}"));
                    }
                    for c in td.children(root) {
                        if etd.kinds[c] == NodeKind::Vertex(sz) {
                            out.push(
                                "pointed root edge holds src(z)",
                                format!("child {c} maps to src(z)"),
                            );
                        }
                    }
                }
                NodeKind::Vertex(v) => {
                    if v != sz {
                        out.push("non-pointed root is src(z)", format!("root maps to v{v}"));
                    }
                }
            }
        }
    }
    out.violations.sort();
    out.violations.dedup();
    out
}

/// Minimal bags for a fixed backbone: forced content closed under
/// occurrence connectivity.
fn minimal_bags(g: &Graph, parent: &[Option<usize>], kinds: &[NodeKind]) -> Vec<BTreeSet<u32>> {
    let n = parent.len();
    let mut depth = vec![0usize; n];
    for i in 0..n {
        let mut d = 0;
        let mut c = i;
        while let Some(p) = parent[c] {
            d += 1;
            c = p;
        }
        depth[i] = d;
    }
    let mut forced: Vec<Vec<usize>> = vec![Vec::new(); g.n_vertices as usize];
    for (i, k) in kinds.iter().enumerate() {
        match k {
            NodeKind::Vertex(v) => forced[*v as usize].push(i),
            NodeKind::Edge(e) => {
                for &v in &g.edges[*e].att {
                    forced[v as usize].push(i);
                }
            }
        }
    }
    let mut bags = vec![BTreeSet::new(); n];
    for (v, nodes) in forced.iter().enumerate() {
        let Some(&first) = nodes.first() else {
            continue;
        };
        // Union of paths from each forced node to the common ancestor.
        let mut lca = first;
        for &x in &nodes[1..] {
            let (mut a, mut b) = (lca, x);
            while depth[a] > depth[b] {
                a = parent[a].unwrap();
            }
            while depth[b] > depth[a] {
                b = parent[b].unwrap();
            }
            while a != b {
                a = parent[a].unwrap();
                b = parent[b].unwrap();
            }
            lca = a;
        }
        for &x in nodes {
            let mut c = x;
            loop {
                bags[c].insert(v as u32);
                if c == lca {
                    break;
                }
                c = parent[c].unwrap();
            }
        }
    }
    bags
}

/// Exact embeddable tree-width with a certificate; `None` when no
/// embeddable decomposition exists (disconnected or empty graphs).
pub fn etw_exact(g: &Graph) -> Result<Option<(usize, EmbeddableTD)>, DecompError> {
    if g.size() > ETW_SIZE_CAP {
        return Err(DecompError::CapExceeded(format!(
            "size {}, cap {ETW_SIZE_CAP}",
            g.size()
        )));
    }
    let nv = g.n_vertices as usize;
    let ne = g.edges.len();
    if nv == 0 || !g.is_connected() {
        return Ok(None);
    }
    // Nodes 0..nv are vertices, nv.. are edges.
    let mut kinds: Vec<NodeKind> = (0..nv as u32).map(NodeKind::Vertex).collect();
    kinds.extend((0..ne).map(NodeKind::Edge));
    let edge_opts: Vec<Vec<u32>> = g
        .edges
        .iter()
        .map(|e| {
            let mut a = e.att.clone();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    let inc = g.incidence();
    let vertex_opts: Vec<Vec<usize>> = inc
        .iter()
        .map(|es| {
            let mut a = es.clone();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    let mut best: Option<(usize, Vec<Option<usize>>, Vec<BTreeSet<u32>>)> = None;
    let mut parent = vec![None; nv + ne];
    for root in 0..nv {
        search_parents(
            g,
            root,
            0,
            &edge_opts,
            &vertex_opts,
            &kinds,
            &mut parent,
            &mut best,
        );
    }
    Ok(best.map(|(w, parent, bags)| {
        (
            w,
            EmbeddableTD {
                base: TreeDecomposition { parent, bags },
                kinds,
                mode: None,
            },
        )
    }))
}

#[allow(clippy::too_many_arguments)]
fn search_parents(
    g: &Graph,
    root: usize,
    i: usize,
    edge_opts: &[Vec<u32>],
    vertex_opts: &[Vec<usize>],
    kinds: &[NodeKind],
    parent: &mut Vec<Option<usize>>,
    best: &mut Option<(usize, Vec<Option<usize>>, Vec<BTreeSet<u32>>)>,
) {
    let nv = vertex_opts.len();
    let total = nv + edge_opts.len();
    if i == total {
        if !acyclic(parent) {
            return;
        }
        let bags = minimal_bags(g, parent, kinds);
        let w = bags.iter().map(|b| b.len()).max().unwrap_or(1) - 1;
        if best.as_ref().is_none_or(|b| w < b.0) {
            *best = Some((w, parent.clone(), bags));
        }
        return;
    }
    if i < nv {
        if i == root {
            parent[i] = None;
            search_parents(g, root, i + 1, edge_opts, vertex_opts, kinds, parent, best);
            return;
        }
        for &e in &vertex_opts[i] {
            parent[i] = Some(nv + e);
            search_parents(g, root, i + 1, edge_opts, vertex_opts, kinds, parent, best);
        }
    } else {
        for &v in &edge_opts[i - nv] {
            // A vertex and its parent edge cannot parent each other.
            if parent[v as usize] == Some(i) {
                continue;
            }
            parent[i] = Some(v as usize);
            search_parents(g, root, i + 1, edge_opts, vertex_opts, kinds, parent, best);
        }
    }
    parent[i] = None;
}

fn acyclic(parent: &[Option<usize>]) -> bool {
    let n = parent.len();
    // 0 unknown, 1 on stack, 2 reaches the root.
    let mut state = vec![0u8; n];
    for i in 0..n {
        let mut path = Vec::new();
        let mut c = i;
        loop {
            match state[c] {
                2 => break,
                1 => return false,
                _ => {}
            }
            state[c] = 1;
            path.push(c);
            match parent[c] {
                Some(p) => c = p,
                None => break,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    true
}

/// The decomposition that a derivation induces, together with the derived
/// graph (identical to `apply_derivation`). Mode data follows the head's
/// annotation; pointed iff the head is in W.
pub fn etd_from_derivation(
    g: &Grammar,
    t: &DerivationTree,
) -> Result<(Graph, EmbeddableTD), DecompError> {
    let v = check_tree_verifiable(g).map_err(|e| DecompError::Precondition(e.to_string()))?;
    if !v.accepted {
        let first = v
            .violations
            .first()
            .map(|f| f.to_string())
            .unwrap_or_default();
        return Err(DecompError::Precondition(format!(
            "not tree-verifiable: {first}"
        )));
    }
    let (graph, nodes) = build(g, t)?;
    let head = g.rules[t.rule].head();
    let nt = g.nt(head).unwrap();
    let mode = EtdMode {
        z: nt.root.unwrap(),
        pi: nt.fut.clone(),
        pointed: nt.in_w(),
    };
    let parent = nodes.iter().map(|n| n.parent).collect();
    let bags = nodes.iter().map(|n| n.bag.clone()).collect();
    let kinds = nodes.iter().map(|n| n.kind).collect();
    Ok((
        graph,
        EmbeddableTD {
            base: TreeDecomposition { parent, bags },
            kinds,
            mode: Some(mode),
        },
    ))
}

#[derive(Clone)]
struct Node {
    parent: Option<usize>,
    bag: BTreeSet<u32>,
    kind: NodeKind,
}

/// Append `child` nodes (root first) under `at`, renaming vertices by
/// `vmap` and shifting edges by `eoff`.
fn graft(
    nodes: &mut Vec<Node>,
    child: &[Node],
    at: Option<usize>,
    vmap: &[u32],
    eoff: usize,
) -> usize {
    let base = nodes.len();
    for n in child {
        nodes.push(Node {
            parent: match n.parent {
                Some(p) => Some(p + base),
                None => at,
            },
            bag: n.bag.iter().map(|&v| vmap[v as usize]).collect(),
            kind: match n.kind {
                NodeKind::Vertex(v) => NodeKind::Vertex(vmap[v as usize]),
                NodeKind::Edge(e) => NodeKind::Edge(e + eoff),
            },
        });
    }
    base
}

fn build(g: &Grammar, t: &DerivationTree) -> Result<(Graph, Vec<Node>), DecompError> {
    let bad = |m: String| DecompError::Precondition(format!("derivation: {m}"));
    let rule = g
        .rules
        .get(t.rule)
        .ok_or_else(|| bad(format!("no rule {}", t.rule)))?;
    let heads = derivation_child_heads(g, t.rule);
    if heads.len() != t.children.len() {
        return Err(bad(format!(
            "rule {} expects {} children",
            t.rule + 1,
            heads.len()
        )));
    }
    for (c, h) in t.children.iter().zip(&heads) {
        if g.rules.get(c.rule).map(|r| r.head()) != Some(h.as_str()) {
            return Err(bad(format!(
                "child of rule {} does not derive {h}",
                t.rule + 1
            )));
        }
    }
    let kids: Vec<(Graph, Vec<Node>)> = t
        .children
        .iter()
        .map(|c| build(g, c))
        .collect::<Result<_, _>>()?;
    let nt = g.nt(rule.head()).unwrap();
    let arity = nt.arity;
    match rule {
        Rule::A { body, .. } => {
            let slots = g.slots(body);
            let term = g.terminal_edges(body)[0];
            let mut out = Graph {
                n_vertices: body.n_vertices,
                edges: Vec::new(),
                sources: body.sources.clone(),
            };
            let mut nodes = vec![Node {
                parent: None,
                bag: (0..body.n_vertices).collect(),
                kind: NodeKind::Edge(0),
            }];
            let mut k = 0;
            for (i, edge) in body.edges.iter().enumerate() {
                if i == term {
                    nodes[0].kind = NodeKind::Edge(out.edges.len());
                }
                if !slots.contains(&i) {
                    out.edges.push(edge.clone());
                    continue;
                }
                let (h, hn) = &kids[k];
                k += 1;
                let mut vmap = vec![u32::MAX; h.n_vertices as usize];
                for (j, &s) in h.sources.iter().enumerate() {
                    vmap[s as usize] = edge.att[j];
                }
                for m in vmap.iter_mut() {
                    if *m == u32::MAX {
                        *m = out.n_vertices;
                        out.n_vertices += 1;
                    }
                }
                let eoff = out.edges.len();
                for he in &h.edges {
                    out.edges.push(Edge {
                        label: he.label.clone(),
                        att: he.att.iter().map(|&v| vmap[v as usize]).collect(),
                    });
                }
                graft(&mut nodes, hn, Some(0), &vmap, eoff);
            }
            Ok((out, nodes))
        }
        Rule::B { .. } | Rule::C { .. } => {
            let root = nt.root.unwrap();
            let mut acc = Graph::unit(arity);
            let mut nodes = vec![Node {
                parent: None,
                bag: (0..arity as u32).collect(),
                kind: NodeKind::Vertex(root as u32 - 1),
            }];
            for (idx, (h, hn)) in kids.iter().enumerate() {
                let eoff = acc.edges.len();
                let (next, vmap) = acc.parallel_with_map(h).map_err(|e| bad(e.to_string()))?;
                acc = next;
                if idx == 0 && matches!(rule, Rule::B { .. }) {
                    // The head part is itself a u-node: merge its root into ours.
                    let base = graft(&mut nodes, hn, Some(0), &vmap, eoff);
                    for n in nodes.iter_mut().skip(base + 1) {
                        if n.parent == Some(base) {
                            n.parent = Some(0);
                        }
                    }
                    nodes.remove(base);
                    for n in nodes.iter_mut().skip(base) {
                        if let Some(p) = n.parent.as_mut() {
                            if *p > base {
                                *p -= 1;
                            }
                        }
                    }
                } else {
                    graft(&mut nodes, hn, Some(0), &vmap, eoff);
                }
            }
            Ok((acc, nodes))
        }
    }
}

/// A connected vertex set whose removal disconnects the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutWitness {
    pub cut: Vec<u32>,
    pub components: (Vec<u32>, Vec<u32>),
}

/// Brute force over vertex subsets in increasing bitmask order. Graphs that
/// are already disconnected have no cut by definition and return `None`.
pub fn has_connected_cut(g: &Graph) -> Result<Option<CutWitness>, DecompError> {
    let n = g.n_vertices as usize;
    if n > CUT_VERTEX_CAP {
        return Err(DecompError::CapExceeded(format!(
            "{n} vertices, cap {CUT_VERTEX_CAP}"
        )));
    }
    if !g.is_connected() {
        return Ok(None);
    }
    for mask in 1u32..(1u32 << n).wrapping_sub(1) {
        let keep: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        if !g.induced(&keep).is_connected() {
            continue;
        }
        let rest: Vec<bool> = keep.iter().map(|k| !k).collect();
        let comps = g.induced(&rest).components();
        if comps.len() >= 2 {
            let back: Vec<u32> = (0..n as u32).filter(|&v| rest[v as usize]).collect();
            let lift = |c: &Vec<u32>| c.iter().map(|&v| back[v as usize]).collect::<Vec<u32>>();
            return Ok(Some(CutWitness {
                cut: (0..n as u32).filter(|&v| keep[v as usize]).collect(),
                components: (lift(&comps[0]), lift(&comps[1])),
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::enumerate::{enumerate_language, Root};
    use crate::grammar::apply_derivation;

    fn cycle(n: u32) -> Graph {
        let mut g = Graph::with_vertices(n);
        for i in 0..n {
            g.add_edge("a", vec![i, (i + 1) % n]);
        }
        g
    }

    fn path(n: u32) -> Graph {
        let mut g = Graph::with_vertices(n);
        for i in 1..n {
            g.add_edge("a", vec![i - 1, i]);
        }
        g
    }

    fn td(parent: Vec<Option<usize>>, bags: Vec<Vec<u32>>) -> TreeDecomposition {
        TreeDecomposition {
            parent,
            bags: bags.into_iter().map(|b| b.into_iter().collect()).collect(),
        }
    }

    /// Width of the best elimination order, by trying all of them.
    fn tw_by_orders(g: &Graph) -> usize {
        fn perms(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == v.len() {
                out.push(v.clone());
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                perms(v, k + 1, out);
                v.swap(k, i);
            }
        }
        let n = g.n_vertices as usize;
        let mut all = Vec::new();
        perms(&mut (0..n).collect(), 0, &mut all);
        all.iter()
            .map(|ord| {
                let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
                for e in &g.edges {
                    for &a in &e.att {
                        for &b in &e.att {
                            if a != b {
                                adj[a as usize].insert(b as usize);
                            }
                        }
                    }
                }
                let mut gone = vec![false; n];
                let mut w = 0;
                for &v in ord {
                    let nb: Vec<usize> = adj[v].iter().copied().filter(|&u| !gone[u]).collect();
                    w = w.max(nb.len());
                    for &a in &nb {
                        for &b in &nb {
                            if a != b {
                                adj[a].insert(b);
                            }
                        }
                    }
                    gone[v] = true;
                }
                w
            })
            .min()
            .unwrap_or(0)
    }

    #[test]
    fn one_bag_ternary_edge() {
        let g = Graph::single_edge("a", 3);
        let (v, w) = validate_td(&g, &td(vec![None], vec![vec![0, 1, 2]])).unwrap();
        assert!(v.is_valid());
        assert_eq!(w, 2);
    }

    #[test]
    fn disconnected_occurrences_rejected() {
        let g = path(3);
        let bad = td(
            vec![None, Some(0), Some(1)],
            vec![vec![0, 1], vec![1, 2], vec![0]],
        );
        let (v, _) = validate_td(&g, &bad).unwrap();
        assert!(v.has_clause("nonempty and connected"));
        let bad = td(vec![None], vec![vec![0, 1]]);
        let (v, _) = validate_td(&g, &bad).unwrap();
        assert!(v.has_clause("edge attachments inside some bag"));
        assert!(v.has_clause("nonempty and connected"));
    }

    #[test]
    fn two_edge_path_width_1() {
        let (v, w) = validate_td(
            &path(3),
            &td(vec![None, Some(0)], vec![vec![0, 1], vec![1, 2]]),
        )
        .unwrap();
        assert!(v.is_valid());
        assert_eq!(w, 1);
    }

    #[test]
    fn unknown_vertex_is_error() {
        let e = validate_td(&path(2), &td(vec![None], vec![vec![0, 7]])).unwrap_err();
        assert_eq!(e, DecompError::UnknownVertex { node: 0, vertex: 7 });
    }

    #[test]
    fn treewidth_examples() {
        for k in 1..=5 {
            assert_eq!(
                treewidth_exact(&Graph::single_edge("a", k)).unwrap().0,
                k - 1
            );
        }
        assert_eq!(treewidth_exact(&cycle(4)).unwrap().0, 2);
        assert_eq!(treewidth_exact(&path(4)).unwrap().0, 1);
        let mut k4 = Graph::with_vertices(4);
        for a in 0..4 {
            for b in a + 1..4 {
                k4.add_edge("a", vec![a, b]);
            }
        }
        assert_eq!(treewidth_exact(&k4).unwrap().0, 3);
        assert!(matches!(
            treewidth_exact(&Graph::with_vertices(11)),
            Err(DecompError::CapExceeded(_))
        ));
    }

    #[test]
    fn treewidth_matches_order_oracle() {
        let mut grid = Graph::with_vertices(9);
        for r in 0..3 {
            for c in 0..3 {
                let v = r * 3 + c;
                if c < 2 {
                    grid.add_edge("a", vec![v, v + 1]);
                }
                if r < 2 {
                    grid.add_edge("a", vec![v, v + 3]);
                }
            }
        }
        let mut mixed = Graph::with_vertices(6);
        mixed.add_edge("c", vec![0, 1, 2]);
        mixed.add_edge("c", vec![2, 3, 4]);
        mixed.add_edge("a", vec![4, 5]);
        mixed.add_edge("a", vec![5, 0]);
        for g in [grid, mixed, cycle(6), path(5), Graph::with_vertices(3)] {
            let (w, cert) = treewidth_exact(&g).unwrap();
            assert_eq!(w, tw_by_orders(&g));
            let (v, cw) = validate_td(&g, &cert).unwrap();
            assert!(v.is_valid(), "{v}");
            assert_eq!(cw, w);
        }
    }

    #[test]
    fn etw_examples() {
        for k in 1..=4 {
            let g = Graph::single_edge("a", k);
            let (w, cert) = etw_exact(&g).unwrap().unwrap();
            assert_eq!(w, k - 1);
            assert!(validate_etd(&g, &cert).is_valid());
            assert_eq!(cert.len_nodes(), k + 1);
        }
        assert_eq!(etw_exact(&Graph::with_vertices(2)).unwrap(), None);
        assert_eq!(etw_exact(&Graph::with_vertices(0)).unwrap(), None);
        assert_eq!(etw_exact(&Graph::with_vertices(1)).unwrap().unwrap().0, 0);
        for n in 2..=6 {
            let g = cycle(n);
            let (w, cert) = etw_exact(&g).unwrap().unwrap();
            assert!(w <= 3);
            assert!(w >= treewidth_exact(&g).unwrap().0);
            let v = validate_etd(&g, &cert);
            assert!(v.is_valid(), "{v}");
            assert_eq!(cert.width(), w);
        }
    }

    fn chain_etd() -> (Graph, EmbeddableTD) {
        // v0 -e0- v1 -e1- v2, rooted at v0.
        let g = path(3);
        let base = td(
            vec![None, Some(0), Some(1), Some(2), Some(3)],
            vec![vec![0], vec![0, 1], vec![1], vec![1, 2], vec![2]],
        );
        let kinds = vec![
            NodeKind::Vertex(0),
            NodeKind::Edge(0),
            NodeKind::Vertex(1),
            NodeKind::Edge(1),
            NodeKind::Vertex(2),
        ];
        (
            g,
            EmbeddableTD {
                base,
                kinds,
                mode: None,
            },
        )
    }

    #[test]
    fn etd_clauses() {
        let (g, etd) = chain_etd();
        assert!(validate_etd(&g, &etd).is_valid());
        let mut bad = etd.clone();
        bad.kinds[2] = NodeKind::Edge(1);
        bad.kinds[3] = NodeKind::Vertex(1);
        let v = validate_etd(&g, &bad);
        assert!(v.has_clause("membership in W alternates"));
        let mut bad = etd.clone();
        bad.base.bags[1].remove(&1);
        assert!(validate_etd(&g, &bad).has_clause("attachments inside beta(w)"));
    }

    #[test]
    fn pointed_mode_clause() {
        // Type-1 path rooted at edge e0 with src(1) = v0.
        let mut g = path(3);
        g.sources = vec![0];
        let base = td(
            vec![None, Some(0), Some(1), Some(2)],
            vec![vec![0, 1], vec![1], vec![1, 2], vec![2]],
        );
        let kinds = vec![
            NodeKind::Edge(0),
            NodeKind::Vertex(1),
            NodeKind::Edge(1),
            NodeKind::Vertex(2),
        ];
        let mode = EtdMode {
            z: 1,
            pi: BTreeSet::new(),
            pointed: true,
        };
        let ok = EmbeddableTD {
            base,
            kinds,
            mode: Some(mode),
        };
        assert!(
            validate_etd(&g, &ok).is_valid(),
            "{}",
            validate_etd(&g, &ok)
        );
        // Child of the root mapped to src(z).
        let mut bad = ok.clone();
        bad.kinds[1] = NodeKind::Vertex(0);
        bad.base.bags[1] = [0, 1].into();
        assert!(validate_etd(&g, &bad).has_clause("pointed root edge holds src(z)"));
        let mut flip = ok.clone();
        flip.mode.as_mut().unwrap().pointed = false;
        assert!(validate_etd(&g, &flip).has_clause("pointed iff root in W"));
    }

    #[test]
    fn single_a_rule_derivation_shape() {
        let g = assets::grammar("tv-tll").unwrap();
        let l = enumerate_language(&g, &Root::Axioms, 8).unwrap();
        let m = l
            .members
            .values()
            .min_by_key(|m| m.derivation.node_count())
            .unwrap();
        let (h, etd) = etd_from_derivation(&g, &m.derivation).unwrap();
        assert_eq!(h, apply_derivation(&g, &m.derivation).unwrap());
        assert!(validate_etd(&h, &etd).is_valid());
    }

    fn k_of(g: &Grammar) -> usize {
        let body = g.max_body_vertices();
        body.max(g.max_arity())
    }

    #[test]
    fn derivation_etds_validate() {
        for (name, bound) in [("tv-tll", 12), ("cycles", 12)] {
            let g = assets::grammar(name).unwrap();
            let k = k_of(&g);
            let l = enumerate_language(&g, &Root::Axioms, bound).unwrap();
            assert!(!l.is_empty());
            for m in l.members.values() {
                let (h, etd) = etd_from_derivation(&g, &m.derivation).unwrap();
                assert_eq!(h, apply_derivation(&g, &m.derivation).unwrap());
                let v = validate_etd(&h, &etd);
                assert!(v.is_valid(), "{name}: {v}");
                assert!(etd.width() <= k, "{name}: width {} > {k}", etd.width());
                // The underlying type-0 graph admits a plain embeddable decomposition too.
                let plain = h.strip_sources();
                if plain.size() <= ETW_SIZE_CAP {
                    let (w, _) = etw_exact(&plain).unwrap().expect("connected member");
                    assert!(w <= etd.width());
                }
            }
        }
    }

    #[test]
    fn non_tree_verifiable_rejected() {
        let g = assets::grammar("tll").unwrap();
        let l = enumerate_language(&g, &Root::Axioms, 6).unwrap();
        let m = l.members.values().next().unwrap();
        assert!(matches!(
            etd_from_derivation(&g, &m.derivation),
            Err(DecompError::Precondition(_))
        ));
    }

    #[test]
    fn connected_cuts() {
        let w = has_connected_cut(&path(3)).unwrap().unwrap();
        assert_eq!(w.cut, vec![1]);
        assert_eq!(w.components, (vec![0], vec![2]));
        for n in 2..=7 {
            assert_eq!(has_connected_cut(&cycle(n)).unwrap(), None, "cycle {n}");
        }
        assert_eq!(has_connected_cut(&Graph::with_vertices(2)).unwrap(), None);
    }
}
