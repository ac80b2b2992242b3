//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hrg_core::hypergraph::Graph;

pub fn permute(g: &Graph, perm: &[u32], edge_order: &[usize]) -> Graph {
    let mut h = Graph::with_vertices(g.n_vertices);
    for &i in edge_order {
        let e = &g.edges[i];
        h.add_edge(&e.label, e.att.iter().map(|&v| perm[v as usize]).collect());
    }
    h.sources = g.sources.iter().map(|&v| perm[v as usize]).collect();
    h
}

fn edge_multiset(g: &Graph) -> BTreeMap<(String, Vec<u32>), usize> {
    let mut m = BTreeMap::new();
    for e in &g.edges {
        *m.entry((e.label.to_string(), e.att.clone())).or_insert(0) += 1;
    }
    m
}

/// Isomorphism by trying every vertex bijection.
pub fn brute_iso(g: &Graph, h: &Graph) -> bool {
    if g.n_vertices != h.n_vertices || g.edges.len() != h.edges.len() || g.type_n() != h.type_n() {
        return false;
    }
    let target = edge_multiset(h);
    let order: Vec<usize> = (0..g.edges.len()).collect();
    let mut perm: Vec<u32> = (0..g.n_vertices).collect();
    fn rec(
        k: usize,
        perm: &mut Vec<u32>,
        g: &Graph,
        h: &Graph,
        order: &[usize],
        target: &BTreeMap<(String, Vec<u32>), usize>,
    ) -> bool {
        if k == perm.len() {
            let p = permute(g, perm, order);
            return p.sources == h.sources && edge_multiset(&p) == *target;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            let hit = rec(k + 1, perm, g, h, order, target);
            perm.swap(k, i);
            if hit {
                return true;
            }
        }
        false
    }
    rec(0, &mut perm, g, h, &order, &target)
}
