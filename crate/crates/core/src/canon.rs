//! Canonical codes for typed hypergraphs.
//!
//! Sources keep their positions; internal vertices are relabelled. Graphs
//! with `|V|+|E| <= 8` take the minimum encoding over all permutations of the
//! non-isolated internal vertices; larger graphs use colour refinement with
//! individualisation and transposition pruning.

use std::fmt;

use crate::hypergraph::Graph;

/// Opaque byte string; equal codes iff isomorphic graphs.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(pub Vec<u8>);

impl CanonicalCode {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalCode({})", self.to_hex())
    }
}

/// Exhaustive threshold on `|V|+|E|`.
pub const EXHAUSTIVE_LIMIT: usize = 8;

pub fn canonical_code(g: &Graph) -> CanonicalCode {
    let mut labels: Vec<&str> = g.edges.iter().map(|e| &*e.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let edges: Vec<(u32, &[u32])> = g
        .edges
        .iter()
        .map(|e| {
            (
                labels.binary_search(&&*e.label).unwrap() as u32,
                e.att.as_slice(),
            )
        })
        .collect();
    let ctx = Ctx {
        n: g.n_vertices as usize,
        edges,
        n_src: g.sources.len(),
    };
    let body = if g.size() <= EXHAUSTIVE_LIMIT {
        exhaustive(&ctx, g)
    } else {
        refine_search(&ctx, g)
    };

    let mut out = Vec::with_capacity(16 + body.len() * 4);
    for x in [
        g.sources.len() as u32,
        g.n_vertices,
        g.edges.len() as u32,
        labels.len() as u32,
    ] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for l in &labels {
        out.extend_from_slice(&(l.len() as u32).to_le_bytes());
        out.extend_from_slice(l.as_bytes());
    }
    for x in body {
        out.extend_from_slice(&x.to_le_bytes());
    }
    CanonicalCode(out)
}

struct Ctx<'a> {
    n: usize,
    edges: Vec<(u32, &'a [u32])>,
    n_src: usize,
}

impl Ctx<'_> {
    /// Sorted edge list under `perm` (old vertex -> new id), flattened.
    fn encode(&self, perm: &[u32], buf: &mut Vec<Vec<u32>>) -> Vec<u32> {
        buf.clear();
        for &(l, att) in &self.edges {
            let mut t = Vec::with_capacity(att.len() + 2);
            t.push(l);
            t.push(att.len() as u32);
            t.extend(att.iter().map(|&v| perm[v as usize]));
            buf.push(t);
        }
        buf.sort_unstable();
        buf.iter().flatten().copied().collect()
    }
}

fn exhaustive(ctx: &Ctx, g: &Graph) -> Vec<u32> {
    let mut touched = vec![false; ctx.n];
    for &(_, att) in &ctx.edges {
        for &v in att {
            touched[v as usize] = true;
        }
    }
    let mut perm = vec![u32::MAX; ctx.n];
    for (i, &s) in g.sources.iter().enumerate() {
        perm[s as usize] = i as u32;
    }
    let mut active: Vec<u32> = Vec::new();
    let mut idle: Vec<u32> = Vec::new();
    for v in 0..ctx.n as u32 {
        if perm[v as usize] == u32::MAX {
            if touched[v as usize] {
                active.push(v);
            } else {
                idle.push(v);
            }
        }
    }
    let base = ctx.n_src as u32;
    for (k, &v) in idle.iter().enumerate() {
        perm[v as usize] = base + active.len() as u32 + k as u32;
    }
    let mut best: Option<Vec<u32>> = None;
    let mut buf = Vec::new();
    let mut order: Vec<usize> = (0..active.len()).collect();
    // Heap's algorithm over the active internal vertices.
    let mut c = vec![0usize; order.len()];
    let visit = |order: &[usize],
                 perm: &mut Vec<u32>,
                 best: &mut Option<Vec<u32>>,
                 buf: &mut Vec<Vec<u32>>| {
        for (slot, &ai) in order.iter().enumerate() {
            perm[active[ai] as usize] = base + slot as u32;
        }
        let code = ctx.encode(perm, buf);
        if best.as_ref().is_none_or(|b| code < *b) {
            *best = Some(code);
        }
    };
    visit(&order, &mut perm, &mut best, &mut buf);
    let mut i = 0;
    while i < order.len() {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order, &mut perm, &mut best, &mut buf);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best.unwrap_or_default()
}

/// Refine `colors` until stable. Colours are ranks of signatures, so the
/// result is invariant under renaming.
fn refine(ctx: &Ctx, colors: &mut Vec<u32>, inc: &[Vec<(usize, u32)>]) {
    let mut n_colors = count_distinct(colors);
    loop {
        let mut sigs: Vec<(Vec<u32>, usize)> = Vec::with_capacity(ctx.n);
        for v in 0..ctx.n {
            let mut parts: Vec<Vec<u32>> = inc[v]
                .iter()
                .map(|&(ei, pos)| {
                    let (l, att) = ctx.edges[ei];
                    let mut p = Vec::with_capacity(att.len() + 2);
                    p.push(l);
                    p.push(pos);
                    p.extend(att.iter().map(|&w| colors[w as usize]));
                    p
                })
                .collect();
            parts.sort_unstable();
            let mut sig = vec![colors[v]];
            for p in parts {
                sig.push(p.len() as u32);
                sig.extend(p);
            }
            sigs.push((sig, v));
        }
        sigs.sort_unstable();
        let mut rank = 0u32;
        for i in 0..sigs.len() {
            if i > 0 && sigs[i].0 != sigs[i - 1].0 {
                rank += 1;
            }
            colors[sigs[i].1] = rank;
        }
        let m = rank as usize + usize::from(!sigs.is_empty());
        if m == n_colors {
            return;
        }
        n_colors = m;
    }
}

fn count_distinct(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn refine_search(ctx: &Ctx, g: &Graph) -> Vec<u32> {
    let mut inc: Vec<Vec<(usize, u32)>> = vec![Vec::new(); ctx.n];
    for (ei, &(_, att)) in ctx.edges.iter().enumerate() {
        for (pos, &v) in att.iter().enumerate() {
            inc[v as usize].push((ei, pos as u32));
        }
    }
    let n_src = ctx.n_src as u32;
    let mut colors = vec![n_src; ctx.n];
    for (i, &s) in g.sources.iter().enumerate() {
        colors[s as usize] = i as u32;
    }
    refine(ctx, &mut colors, &inc);
    let canon_edges: Vec<Vec<u32>> = {
        let mut v: Vec<Vec<u32>> = ctx
            .edges
            .iter()
            .map(|&(l, att)| {
                let mut t = vec![l];
                t.extend_from_slice(att);
                t
            })
            .collect();
        v.sort_unstable();
        v
    };
    let mut best: Option<Vec<u32>> = None;
    let mut buf = Vec::new();
    search(ctx, &inc, &canon_edges, colors, &mut best, &mut buf);
    best.unwrap_or_default()
}

fn search(
    ctx: &Ctx,
    inc: &[Vec<(usize, u32)>],
    canon_edges: &[Vec<u32>],
    colors: Vec<u32>,
    best: &mut Option<Vec<u32>>,
    buf: &mut Vec<Vec<u32>>,
) {
    // Find the first non-singleton cell by colour.
    let mut count = vec![0u32; ctx.n + 1];
    for &c in &colors {
        count[c as usize] += 1;
    }
    let target = (0..count.len()).find(|&c| count[c] > 1);
    let Some(target) = target else {
        let code = ctx.encode(&colors, buf);
        if best.as_ref().is_none_or(|b| code < *b) {
            *best = Some(code);
        }
        return;
    };
    let cell: Vec<u32> = (0..ctx.n as u32)
        .filter(|&v| colors[v as usize] == target as u32)
        .collect();
    let mut explored: Vec<u32> = Vec::new();
    for &v in &cell {
        if explored
            .iter()
            .any(|&u| swap_is_automorphism(ctx, canon_edges, u, v))
        {
            continue;
        }
        explored.push(v);
        // Individualise v: it keeps colour `target`, the rest of the cell moves up.
        let mut next = colors.clone();
        for c in next.iter_mut() {
            if *c > target as u32 {
                *c += 1;
            }
        }
        for &w in &cell {
            if w != v {
                next[w as usize] = target as u32 + 1;
            }
        }
        refine(ctx, &mut next, inc);
        search(ctx, inc, canon_edges, next, best, buf);
    }
}

fn swap_is_automorphism(ctx: &Ctx, canon_edges: &[Vec<u32>], a: u32, b: u32) -> bool {
    let sw = |v: u32| {
        if v == a {
            b
        } else if v == b {
            a
        } else {
            v
        }
    };
    let mut v: Vec<Vec<u32>> = ctx
        .edges
        .iter()
        .map(|&(l, att)| {
            let mut t = vec![l];
            t.extend(att.iter().map(|&x| sw(x)));
            t
        })
        .collect();
    v.sort_unstable();
    v == canon_edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Graph;

    #[test]
    fn renaming_invariance() {
        let mut g = Graph::with_vertices(3);
        g.add_edge("a", vec![0, 1]);
        g.add_edge("b", vec![1, 2]);
        let h = g.permute_vertices(&[2, 0, 1]);
        assert_eq!(canonical_code(&g), canonical_code(&h));
    }

    #[test]
    fn reversed_edge_is_isomorphic() {
        let mut g = Graph::with_vertices(2);
        g.add_edge("a", vec![0, 1]);
        let mut h = Graph::with_vertices(2);
        h.add_edge("a", vec![1, 0]);
        assert_eq!(canonical_code(&g), canonical_code(&h));
    }

    #[test]
    fn reversed_edge_between_sources_differs() {
        let mut g = Graph::with_vertices(2);
        g.sources = vec![0, 1];
        g.add_edge("a", vec![0, 1]);
        let mut h = g.clone();
        h.edges[0].att = vec![1, 0];
        assert_ne!(canonical_code(&g), canonical_code(&h));
    }

    #[test]
    fn label_change_differs() {
        let g = Graph::single_edge("a", 2);
        let h = Graph::single_edge("b", 2);
        assert_ne!(canonical_code(&g), canonical_code(&h));
    }

    #[test]
    fn large_cycles_distinguish_lengths() {
        let cycle = |n: u32, extra: u32| {
            let mut g = Graph::with_vertices(n + extra);
            for i in 0..n {
                g.add_edge("a", vec![i, (i + 1) % n]);
            }
            g
        };
        // 10-cycle versus two 5-cycles: same degree everywhere.
        let c10 = cycle(10, 0);
        let mut two = cycle(5, 5);
        for i in 0..5 {
            two.add_edge("a", vec![5 + i, 5 + (i + 1) % 5]);
        }
        assert_ne!(canonical_code(&c10), canonical_code(&two));
        let rot = c10.permute_vertices(&[3, 4, 5, 6, 7, 8, 9, 0, 1, 2]);
        assert_eq!(canonical_code(&c10), canonical_code(&rot));
    }

    #[test]
    fn large_star_is_fast() {
        let mut g = Graph::with_vertices(13);
        for i in 1..13 {
            g.add_edge("a", vec![0, i]);
        }
        let h = g.permute_vertices(&[12, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]);
        assert_eq!(canonical_code(&g), canonical_code(&h));
    }
}
