//! Property tests over randomly generated graphs, exponent sets and formulas.

use std::sync::Arc;

mod common;

use common::{brute_iso, permute};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

use hrg_core::canon::canonical_code;
use hrg_core::cmso::formula::{card, edg, eq, exists, exists_so, mem, not};
use hrg_core::cmso::{to_mso, Checker, Formula, Valuation, F};
use hrg_core::decomposition::{etw_exact, treewidth_exact, validate_etd, validate_td};
use hrg_core::hypergraph::Graph;
use hrg_core::io::{parse_graph_file, print_graph};
use hrg_core::transforms::schur_data;

const LABELS: [(&str, usize); 3] = [("a", 1), ("b", 2), ("c", 3)];

fn config(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Graphs of type `n` with `|V| + |E| <= max`.
fn arb_graph(n: usize, max: usize) -> impl Strategy<Value = Graph> {
    (n.max(1)..=max.max(n.max(1)))
        .prop_flat_map(move |nv| {
            let budget = max.saturating_sub(nv);
            let edge = (0..LABELS.len(), prop::collection::vec(0..nv as u32, 3));
            (
                Just(nv),
                prop::collection::vec(edge, 0..=budget),
                Just(()).prop_perturb(move |_, mut rng| {
                    let mut vs: Vec<u32> = (0..nv as u32).collect();
                    for i in (1..vs.len()).rev() {
                        vs.swap(i, rng.random_range(0..=i));
                    }
                    vs.truncate(n);
                    vs
                }),
            )
        })
        .prop_map(|(nv, es, sources)| {
            let mut g = Graph::with_vertices(nv as u32);
            for (l, att) in es {
                let (name, k) = LABELS[l];
                g.add_edge(name, att[..k].to_vec());
            }
            g.sources = sources;
            g
        })
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<u32>> {
    Just((0..n as u32).collect::<Vec<u32>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(config(200, 11))]

    #[test]
    fn parallel_is_commutative_and_associative(
        (a, b, c) in (0usize..3).prop_flat_map(|n| (arb_graph(n, 6), arb_graph(n, 6), arb_graph(n, 6)))
    ) {
        let ab = a.parallel(&b).unwrap();
        let ba = b.parallel(&a).unwrap();
        prop_assert_eq!(canonical_code(&ab), canonical_code(&ba));
        let left = ab.parallel(&c).unwrap();
        let right = a.parallel(&b.parallel(&c).unwrap()).unwrap();
        prop_assert_eq!(canonical_code(&left), canonical_code(&right));
    }

    #[test]
    fn substitution_size_law((g, k, h) in (1usize..4).prop_flat_map(|k| (arb_graph(0, 6), Just(k), arb_graph(k, 6)))) {
        prop_assume!(g.edges.iter().any(|e| e.arity() == k));
        let e = g.edges.iter().position(|e| e.arity() == k).unwrap();
        let r = g.substitute(e, &h).unwrap();
        prop_assert_eq!(r.n_vertices as usize, g.n_vertices as usize + h.n_vertices as usize - k);
        prop_assert_eq!(r.edges.len(), g.edges.len() - 1 + h.edges.len());
        prop_assert_eq!(r.type_n(), g.type_n());
    }

    #[test]
    fn substitution_order_is_irrelevant(
        base in arb_graph(1, 4),
        ends in prop::collection::vec(0u32..4, 4),
        h1 in arb_graph(2, 5),
        h2 in arb_graph(2, 5),
    ) {
        let mut g = base;
        let nv = g.n_vertices;
        let e1 = g.add_edge("b", vec![ends[0] % nv, ends[1] % nv]);
        let e2 = g.add_edge("b", vec![ends[2] % nv, ends[3] % nv]);
        let both = g.substitute_many(&[(e1, &h1), (e2, &h2)]).unwrap();
        let swapped = g.substitute_many(&[(e2, &h2), (e1, &h1)]).unwrap();
        prop_assert_eq!(canonical_code(&both), canonical_code(&swapped));
    }

    #[test]
    fn canonical_code_matches_brute_isomorphism(
        g in arb_graph(0, 6),
        other in arb_graph(0, 6),
        perm in arb_perm(6),
        flip in any::<bool>(),
    ) {
        let n = g.n_vertices as usize;
        let p: Vec<u32> = {
            let mut small: Vec<u32> = perm.iter().copied().filter(|&v| (v as usize) < n).collect();
            small.truncate(n);
            small
        };
        let order: Vec<usize> = (0..g.edges.len()).rev().collect();
        let h = if flip { permute(&g, &p, &order) } else { other };
        prop_assert_eq!(canonical_code(&g) == canonical_code(&h), brute_iso(&g, &h));
    }

    #[test]
    fn graph_text_round_trip(g in (0usize..3).prop_flat_map(|n| arb_graph(n, 7))) {
        let text = print_graph("g", &g);
        let back = parse_graph_file(&text, None).unwrap();
        prop_assert_eq!(&back.graph, &g);
        prop_assert_eq!(print_graph("g", &back.graph), text);
    }
}

proptest! {
    #![proptest_config(config(120, 23))]

    #[test]
    fn schur_data_invariants(qs in prop::collection::vec(1usize..12, 1..4)) {
        let s = schur_data(&qs).unwrap();
        let limit = s.d * (s.n + 20) + 1;
        let mut rep = vec![false; limit + 1];
        rep[0] = true;
        for x in 1..=limit {
            rep[x] = qs.iter().any(|&q| q <= x && rep[x - q]);
        }
        prop_assert_eq!(s.d, qs.iter().fold(0, |a, &b| num_gcd(a, b)));
        for x in s.n..=s.n + 20 {
            prop_assert!(rep[s.d * x], "d*{} not representable", x);
        }
        if s.n > 0 {
            prop_assert!(!rep[s.d * (s.n - 1)] || s.n == 1, "threshold not least");
        }
        for &m in &s.m {
            prop_assert!(rep[m] && m < s.d * s.n);
        }
        for m in 1..s.d * s.n {
            prop_assert_eq!(s.m.contains(&m), rep[m]);
        }
    }
}

fn num_gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

proptest! {
    #![proptest_config(config(150, 37))]

    #[test]
    fn etw_bounds_tw_and_certificates_validate(g in arb_graph(0, 7)) {
        let (tw, td) = treewidth_exact(&g).unwrap();
        let (verdict, width) = validate_td(&g, &td).unwrap();
        prop_assert!(verdict.is_valid(), "{:?}", verdict);
        prop_assert_eq!(width, tw);
        if let Some((etw, etd)) = etw_exact(&g).unwrap() {
            prop_assert!(validate_etd(&g, &etd).is_valid());
            prop_assert_eq!(etd.width(), etw);
            prop_assert!(etw >= tw);
        } else {
            prop_assert!(!g.is_connected() || g.n_vertices == 0);
        }
    }
}

fn arb_formula(depth: u32) -> BoxedStrategy<F> {
    let fo = prop::sample::select(vec!["x", "y"]);
    let so = prop::sample::select(vec!["X", "Y"]);
    let leaf = prop_oneof![
        (fo.clone(), fo.clone()).prop_map(|(a, b)| eq(a, b)),
        (fo.clone(), fo.clone(), fo.clone()).prop_map(|(e, a, b)| edg("b", &[e, a, b])),
        (so.clone(), fo.clone()).prop_map(|(s, x)| mem(s, x)),
        (so.clone(), 0usize..2, 0usize..4).prop_map(|(s, q, p)| card(s, q, p)),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let sub = arb_formula(depth - 1);
    prop_oneof![
        1 => leaf,
        2 => sub.clone().prop_map(not),
        2 => (sub.clone(), sub.clone()).prop_map(|(a, b)| Arc::new(Formula::And(a, b))),
        2 => (fo, sub.clone()).prop_map(|(x, b)| exists(x, b)),
        1 => (so, sub).prop_map(|(x, b)| exists_so(x, b)),
    ]
    .boxed()
}

fn close(f: F) -> F {
    let f = ["x", "y"].iter().fold(f, |f, x| exists(x, f));
    ["X", "Y"].iter().fold(f, |f, x| exists_so(x, f))
}

fn binary_graph() -> impl Strategy<Value = Graph> {
    (1u32..4, prop::collection::vec((0u32..3, 0u32..3), 0..3)).prop_map(|(nv, es)| {
        let mut g = Graph::with_vertices(nv);
        for (a, b) in es {
            g.add_edge("b", vec![a % nv, b % nv]);
        }
        g
    })
}

proptest! {
    #![proptest_config(config(200, 41))]

    #[test]
    fn mso_rewriting_preserves_truth(f in arb_formula(3), g in binary_graph()) {
        let f = close(f);
        let m = to_mso(&f).unwrap();
        let v = Valuation::new();
        prop_assert_eq!(Checker::new(&f).eval(&g, &v).unwrap(), Checker::new(&m).eval(&g, &v).unwrap());
    }
}
