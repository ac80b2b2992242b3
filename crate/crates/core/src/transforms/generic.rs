//! The generic tree-verifiable grammar of all type-0 graphs of bounded
//! embeddable tree-width.

use std::collections::{BTreeMap, BTreeSet};

use super::TransformError;
use crate::canon::canonical_code;
use crate::grammar::{Grammar, Kind, Nonterminal, Rule};
use crate::hypergraph::{Alphabet, Graph};

/// Upper bound on the number of generated rules.
pub const GENERIC_RULE_CAP: usize = 50_000;
/// Largest accepted label arity.
pub const GENERIC_ARITY_CAP: usize = 4;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Sig {
    m: usize,
    z: usize,
    /// Bitmask over positions 1..=m (bit i-1).
    pi: u32,
}

fn name(prefix: char, s: Sig) -> String {
    let pi: Vec<String> = (1..=s.m)
        .filter(|i| s.pi >> (i - 1) & 1 == 1)
        .map(|i| i.to_string())
        .collect();
    let pi = if pi.is_empty() {
        "-".to_string()
    } else {
        pi.join(".")
    };
    format!("{prefix}_m{}_z{}_p{pi}", s.m, s.z)
}

fn sigs(cap: usize) -> Vec<Sig> {
    let mut out = Vec::new();
    for m in 1..=cap {
        for z in 1..=m {
            for pi in 0u32..1 << m {
                if pi >> (z - 1) & 1 == 0 {
                    out.push(Sig { m, z, pi });
                }
            }
        }
    }
    out
}

/// Set partitions of the bits of `mask` into nonempty blocks.
fn partitions(mask: u32) -> Vec<Vec<u32>> {
    if mask == 0 {
        return vec![vec![]];
    }
    let low = mask & mask.wrapping_neg();
    let rest = mask & !low;
    let mut out = Vec::new();
    // The block containing the lowest bit, then partition what remains.
    let mut sub = rest;
    loop {
        let block = low | sub;
        for mut p in partitions(rest & !sub) {
            p.insert(0, block);
            out.push(p);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & rest;
    }
    out
}

/// Injective tuples of length `len` over `0..nv` with `fixed` positions preset.
fn tuples(
    nv: u32,
    len: usize,
    fixed: &BTreeMap<usize, u32>,
    avoid: &BTreeSet<u32>,
) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![u32::MAX; len];
    fn rec(
        p: usize,
        nv: u32,
        fixed: &BTreeMap<usize, u32>,
        avoid: &BTreeSet<u32>,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if p == cur.len() {
            out.push(cur.clone());
            return;
        }
        if let Some(&v) = fixed.get(&p) {
            cur[p] = v;
            rec(p + 1, nv, fixed, avoid, cur, out);
            return;
        }
        for v in 0..nv {
            if avoid.contains(&v) || cur[..p].contains(&v) || fixed.values().any(|&f| f == v) {
                continue;
            }
            cur[p] = v;
            rec(p + 1, nv, fixed, avoid, cur, out);
        }
        cur[p] = u32::MAX;
    }
    rec(0, nv, fixed, avoid, &mut cur, &mut out);
    out
}

/// All ways of choosing a nonterminal edge for one block (root first).
fn slot_options(nv: u32, cap: usize, block: &[u32]) -> Vec<(Sig, Vec<u32>)> {
    let mut out = Vec::new();
    let in_block: BTreeSet<u32> = block.iter().copied().collect();
    for m in block.len()..=cap.min(nv as usize) {
        // Positions of the block vertices: every injective placement.
        let placements = tuples(m as u32, block.len(), &BTreeMap::new(), &BTreeSet::new());
        for pl in placements {
            let fixed: BTreeMap<usize, u32> = pl
                .iter()
                .zip(block)
                .map(|(&p, &v)| (p as usize, v))
                .collect();
            let z = pl[0] as usize + 1;
            let pi = pl[1..].iter().fold(0u32, |acc, &p| acc | 1 << p);
            for att in tuples(nv, m, &fixed, &in_block) {
                out.push((Sig { m, z, pi }, att));
            }
        }
    }
    out
}

/// Tree-verifiable grammar generating exactly the type-0 graphs over
/// `alphabet` with embeddable tree-width at most `n` (bags of `n+1`).
pub fn generic_etw_grammar(alphabet: &Alphabet, n: usize) -> Result<Grammar, TransformError> {
    if n == 0 {
        return Err(TransformError::Precondition("n must be at least 1".into()));
    }
    if alphabet.max_arity() > GENERIC_ARITY_CAP {
        return Err(TransformError::Precondition(format!(
            "label arity above {GENERIC_ARITY_CAP}"
        )));
    }
    let cap = n + 1;
    let all = sigs(cap);
    let mut g = Grammar {
        alphabet: alphabet.clone(),
        ..Default::default()
    };
    for &s in &all {
        let fut: Vec<usize> = (1..=s.m).filter(|i| s.pi >> (i - 1) & 1 == 1).collect();
        g.nonterminals.push(
            Nonterminal::new(name('u', s), s.m)
                .kind(Kind::N)
                .annotate(s.z, fut.clone()),
        );
        g.nonterminals.push(
            Nonterminal::new(name('w', s), s.m)
                .kind(Kind::W)
                .annotate(s.z, fut),
        );
    }
    let push = |g: &mut Grammar, r: Rule| -> Result<(), TransformError> {
        if g.rules.len() >= GENERIC_RULE_CAP {
            return Err(TransformError::ResourceCap(format!(
                "more than {GENERIC_RULE_CAP} rules"
            )));
        }
        g.rules.push(r);
        Ok(())
    };
    for &s in &all {
        let u = name('u', s);
        push(
            &mut g,
            Rule::B {
                head: u.clone(),
                w: name(
                    'w',
                    Sig {
                        m: s.m,
                        z: s.z,
                        pi: 0,
                    },
                ),
                q: 1,
            },
        )?;
        let mut c_rules: BTreeSet<Vec<String>> = BTreeSet::new();
        for p in partitions(s.pi) {
            let parts: Vec<String> = p.iter().map(|&b| name('w', Sig { pi: b, ..s })).collect();
            if s.pi == 0 {
                c_rules.insert(vec![]);
            }
            let mut with_empty = vec![name('w', Sig { pi: 0, ..s })];
            with_empty.extend(parts.iter().cloned());
            c_rules.insert(parts);
            c_rules.insert(with_empty);
        }
        for parts in c_rules {
            push(
                &mut g,
                Rule::C {
                    head: u.clone(),
                    parts,
                },
            )?;
        }
    }
    for &s in &all {
        let head = name('w', s);
        let mut seen = BTreeSet::new();
        for extra in 0..=cap - s.m {
            let nv = (s.m + extra) as u32;
            let src_z = (s.z - 1) as u32;
            // Vertices to cover: internal ones plus future-root sources.
            let cover: Vec<u32> = (0..nv)
                .filter(|&v| v as usize >= s.m || s.pi >> v & 1 == 1)
                .collect();
            for (label, ar) in alphabet.iter() {
                for att in tuples_any(nv, ar) {
                    if !att.contains(&src_z) {
                        continue;
                    }
                    let roots: BTreeSet<u32> = att
                        .iter()
                        .copied()
                        .filter(|&v| v != src_z && cover.contains(&v))
                        .collect();
                    let mut bodies = Vec::new();
                    assign(&cover, &roots, &mut bodies);
                    for blocks in bodies {
                        let per_block: Vec<Vec<(Sig, Vec<u32>)>> =
                            blocks.iter().map(|b| slot_options(nv, cap, b)).collect();
                        let mut combos: Vec<Vec<(Sig, Vec<u32>)>> = vec![vec![]];
                        for opts in &per_block {
                            combos = combos
                                .into_iter()
                                .flat_map(|c| {
                                    opts.iter()
                                        .map(move |o| [c.clone(), vec![o.clone()]].concat())
                                })
                                .collect();
                        }
                        for combo in combos {
                            let mut body = Graph::with_vertices(nv);
                            body.sources = (0..s.m as u32).collect();
                            body.add_edge(label, att.clone());
                            for (sig, a) in combo {
                                body.add_edge(&name('u', sig), a);
                            }
                            if seen.insert(canonical_code(&body)) {
                                push(
                                    &mut g,
                                    Rule::A {
                                        head: head.clone(),
                                        body,
                                    },
                                )?;
                            }
                        }
                    }
                }
            }
        }
    }
    g.axioms = all
        .iter()
        .filter(|s| s.pi == ((1u32 << s.m) - 1) & !(1 << (s.z - 1)))
        .map(|&s| name('u', s))
        .collect();
    Ok(g)
}

/// All tuples of length `len` over `0..nv`, repetitions allowed.
fn tuples_any(nv: u32, len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t: Vec<u32>| (0..nv).map(move |v| [t.clone(), vec![v]].concat()))
            .collect();
    }
    out
}

/// Partitions of `cover` into blocks, each led by a distinct vertex of
/// `roots`; every block lists its root first.
fn assign(cover: &[u32], roots: &BTreeSet<u32>, out: &mut Vec<Vec<Vec<u32>>>) {
    let cand: Vec<u32> = roots.iter().copied().collect();
    for mask in 0u32..1 << cand.len() {
        let mut blocks: Vec<Vec<u32>> = (0..cand.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| vec![cand[i]])
            .collect();
        let rest: Vec<u32> = cover
            .iter()
            .copied()
            .filter(|v| !blocks.iter().any(|b| b[0] == *v))
            .collect();
        if blocks.is_empty() && !rest.is_empty() {
            continue;
        }
        distribute(&rest, 0, &mut blocks, out);
    }
}

fn distribute(rest: &[u32], i: usize, blocks: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
    if i == rest.len() {
        out.push(blocks.clone());
        return;
    }
    for b in 0..blocks.len() {
        blocks[b].push(rest[i]);
        distribute(rest, i + 1, blocks, out);
        blocks[b].pop();
    }
}
