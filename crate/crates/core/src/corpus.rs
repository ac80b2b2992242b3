//! Exhaustive small-graph corpora, one representative per isomorphism class.

use std::collections::HashSet;

use crate::canon::canonical_code;
use crate::hypergraph::{Alphabet, Graph};

/// Every graph of type `type_n` over `alphabet` with `|V| + |E| <= max_size`,
/// up to isomorphism, in order of (size, vertex count, generation order).
pub fn all_graphs(alphabet: &Alphabet, type_n: usize, max_size: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    for size in type_n..=max_size {
        for nv in type_n..=size {
            let ne = size - nv;
            let opts = edge_options(alphabet, nv as u32);
            if ne > 0 && opts.is_empty() {
                continue;
            }
            let mut seen = HashSet::new();
            let mut pick = vec![0usize; ne];
            loop {
                let mut g = Graph::with_vertices(nv as u32);
                g.sources = (0..type_n as u32).collect();
                for &i in &pick {
                    g.add_edge(&opts[i].0, opts[i].1.clone());
                }
                if seen.insert(canonical_code(&g)) {
                    out.push(g);
                }
                if !next_multiset(&mut pick, opts.len()) {
                    break;
                }
            }
        }
    }
    out
}

/// Connected members of [`all_graphs`].
pub fn connected_graphs(alphabet: &Alphabet, type_n: usize, max_size: usize) -> Vec<Graph> {
    all_graphs(alphabet, type_n, max_size)
        .into_iter()
        .filter(|g| g.is_connected())
        .collect()
}

fn edge_options(alphabet: &Alphabet, nv: u32) -> Vec<(String, Vec<u32>)> {
    let mut out = Vec::new();
    for (label, ar) in alphabet.iter() {
        let mut att = vec![0u32; ar];
        if nv == 0 && ar > 0 {
            continue;
        }
        loop {
            out.push((label.to_string(), att.clone()));
            let mut i = ar;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                att[i] += 1;
                if att[i] < nv {
                    break;
                }
                att[i] = 0;
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX || ar == 0 {
                break;
            }
        }
    }
    out
}

/// Advance a nondecreasing sequence over `0..k`; false when exhausted.
fn next_multiset(pick: &mut [usize], k: usize) -> bool {
    let n = pick.len();
    for i in (0..n).rev() {
        if pick[i] + 1 < k {
            let v = pick[i] + 1;
            for p in pick[i..].iter_mut() {
                *p = v;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_counts() {
        let a = Alphabet::new([("a", 2)]);
        // Size 2: two isolated vertices, or one vertex with a loop.
        let by_size = |s: usize| {
            all_graphs(&a, 0, s)
                .iter()
                .filter(|g| g.size() == s)
                .count()
        };
        assert_eq!(by_size(0), 1);
        assert_eq!(by_size(1), 1);
        assert_eq!(by_size(2), 2);
        // Size 3: three vertices; two vertices + a-edge (loop or not, 2 shapes);
        // one vertex + two loops.
        assert_eq!(by_size(3), 4);
    }

    #[test]
    fn types_are_respected() {
        let a = Alphabet::new([("a", 1)]);
        for g in all_graphs(&a, 1, 4) {
            assert_eq!(g.type_n(), 1);
        }
    }

    #[test]
    #[ignore]
    fn report_sizes() {
        for (al, s) in [
            (Alphabet::new([("a", 3), ("b", 2)]), 8),
            (Alphabet::new([("a", 2)]), 8),
        ] {
            let t = std::time::Instant::now();
            let all = all_graphs(&al, 0, s);
            let conn = all.iter().filter(|g| g.is_connected()).count();
            eprintln!(
                "{} graphs, {} connected, {:?}",
                all.len(),
                conn,
                t.elapsed()
            );
        }
    }
}
