//! Grammar-to-grammar constructions: B-rule merging, single-root axioms,
//! regular to tree-verifiable translation and the generic bounded-etw
//! grammar.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::classify::{
    check_regular_graph, check_regular_tree, check_tree_verifiable, find_w, ClassVerdict,
};
use crate::grammar::{Grammar, Kind, Nonterminal, Rule};
use crate::hypergraph::Graph;

mod generic;

pub use generic::{generic_etw_grammar, GENERIC_RULE_CAP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("empty exponent list")]
    EmptyInput,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
}

fn precondition(v: &ClassVerdict) -> TransformError {
    let first = v
        .violations
        .first()
        .map(|f| f.to_string())
        .unwrap_or_default();
    TransformError::Precondition(format!("not {}: {first}", v.class))
}

/// Normalisation data for a set of B-exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchurData {
    pub d: usize,
    pub n: usize,
    pub m: BTreeSet<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Representable sums `Σ q_i x_i` up to `limit` (inclusive).
fn representable(qs: &[usize], limit: usize) -> Vec<bool> {
    let mut r = vec![false; limit + 1];
    r[0] = true;
    for s in 1..=limit {
        r[s] = qs.iter().any(|&q| q <= s && r[s - q]);
    }
    r
}

/// `d = gcd`, the least `n` with `d*x` representable for all `x >= n`, and
/// the representable values in `[1, d*n-1]`.
pub fn schur_data(exponents: &[usize]) -> Result<SchurData, TransformError> {
    if exponents.is_empty() {
        return Err(TransformError::EmptyInput);
    }
    if exponents.contains(&0) {
        return Err(TransformError::Precondition(
            "exponents must be positive".into(),
        ));
    }
    let d = exponents.iter().copied().fold(0, gcd);
    let reduced: Vec<usize> = exponents.iter().map(|q| q / d).collect();
    let qmax = *reduced.iter().max().unwrap();
    // Frobenius number of the reduced set is below qmax^2.
    let limit = qmax * qmax + qmax + 1;
    let r = representable(&reduced, limit);
    let n = (1..=limit).rev().find(|&x| !r[x]).map_or(1, |x| x + 1);
    let full = representable(exponents, d * n);
    let m = (1..d * n).filter(|&s| full[s]).collect();
    Ok(SchurData { d, n, m })
}

fn w_of(
    g: &Grammar,
    check: impl Fn(&Grammar, &BTreeSet<String>) -> ClassVerdict,
) -> Result<BTreeSet<String>, TransformError> {
    if g.nonterminals.iter().all(|n| n.kind.is_some()) {
        let w = g.w_set();
        let v = check(g, &w);
        return if v.accepted {
            Ok(w)
        } else {
            Err(precondition(&v))
        };
    }
    find_w(g, &check).ok_or_else(|| {
        let v = check(g, &BTreeSet::new());
        precondition(&v)
    })
}

fn fresh_nt(g: &mut Grammar, base: &str, template: &Nonterminal) -> String {
    let name = g.fresh_name(base);
    let mut nt = template.clone();
    nt.name = name.clone();
    g.nonterminals.push(nt);
    name
}

/// Every way of replacing each occurrence of `u` by one of `subs`.
fn expand_refs(r: &Rule, u: &str, subs: &[&str]) -> Vec<Rule> {
    fn choices<'a>(n: usize, subs: &[&'a str]) -> Vec<Vec<&'a str>> {
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|c| subs.iter().map(move |s| [c.clone(), vec![*s]].concat()))
                .collect();
        }
        out
    }
    match r {
        Rule::A { head, body } => {
            let at: Vec<usize> = (0..body.edges.len())
                .filter(|&i| &*body.edges[i].label == u)
                .collect();
            choices(at.len(), subs)
                .into_iter()
                .map(|c| {
                    let mut b = body.clone();
                    for (&i, s) in at.iter().zip(c) {
                        b.edges[i].label = s.into();
                    }
                    Rule::A {
                        head: head.clone(),
                        body: b,
                    }
                })
                .collect()
        }
        Rule::C { head, parts } => {
            let at: Vec<usize> = (0..parts.len()).filter(|&i| parts[i] == u).collect();
            choices(at.len(), subs)
                .into_iter()
                .map(|c| {
                    let mut p = parts.clone();
                    for (&i, s) in at.iter().zip(c) {
                        p[i] = s.to_string();
                    }
                    Rule::C {
                        head: head.clone(),
                        parts: p,
                    }
                })
                .collect()
        }
        Rule::B { .. } => vec![r.clone()],
    }
}

fn mentions(r: &Rule, u: &str) -> bool {
    match r {
        Rule::A { body, .. } => body.edges.iter().any(|e| &*e.label == u),
        Rule::B { w, .. } => w == u,
        Rule::C { parts, .. } => parts.iter().any(|p| p == u),
    }
}

/// Merge the B-rules of one `(u, w)` pair.
fn merge_pair(g: &Grammar, u: &str, w: &str, qs: &[usize]) -> Result<Grammar, TransformError> {
    let sd = schur_data(qs)?;
    let mut out = g.clone();
    let template = g.nt(u).unwrap().clone();
    let up = fresh_nt(&mut out, &format!("{u}.prime"), &template);
    let upp = fresh_nt(&mut out, &format!("{u}.dprime"), &template);
    out.nonterminals.retain(|n| n.name != u);
    let mut rules = Vec::new();
    let pow = |k: usize| std::iter::repeat_n(w.to_string(), k);
    for r in &g.rules {
        match r {
            Rule::B { head, w: x, .. } if head == u && x == w => {}
            Rule::B { head, w: x, q } if head == u => {
                for h in [&up, &upp] {
                    rules.push(Rule::B {
                        head: h.clone(),
                        w: x.clone(),
                        q: *q,
                    });
                }
            }
            Rule::C { head, parts } if head == u => {
                for m in std::iter::once(0).chain(sd.m.iter().copied()) {
                    rules.push(Rule::C {
                        head: up.clone(),
                        parts: parts.iter().cloned().chain(pow(m)).collect(),
                    });
                }
                rules.push(Rule::C {
                    head: upp.clone(),
                    parts: parts.iter().cloned().chain(pow(sd.d * sd.n)).collect(),
                });
            }
            Rule::A { head, .. } if head == u => {
                return Err(TransformError::Precondition(format!(
                    "{u} has B-rules and an A-rule"
                )));
            }
            r if mentions(r, u) => rules.extend(expand_refs(r, u, &[&up, &upp])),
            r => rules.push(r.clone()),
        }
    }
    rules.push(Rule::B {
        head: upp.clone(),
        w: w.to_string(),
        q: sd.d,
    });
    out.rules = rules;
    out.axioms = g
        .axioms
        .iter()
        .flat_map(|a| {
            if a == u {
                vec![up.clone(), upp.clone()]
            } else {
                vec![a.clone()]
            }
        })
        .collect();
    Ok(out)
}

/// Rewrite until every `(u, w)` has at most one B-rule. Exponent-0 B-rules
/// are identities and are dropped.
pub fn merge_b_rules(g: &Grammar) -> Result<Grammar, TransformError> {
    if g.is_annotated() {
        let v =
            check_tree_verifiable(g).map_err(|e| TransformError::Precondition(e.to_string()))?;
        if !v.accepted {
            return Err(precondition(&v));
        }
    } else {
        w_of(g, check_regular_tree)?;
    }
    let mut cur = g.clone();
    cur.rules.retain(|r| !matches!(r, Rule::B { q: 0, .. }));
    loop {
        let mut pairs: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
        for (i, r) in cur.rules.iter().enumerate() {
            if let Rule::B { head, w, .. } = r {
                pairs.entry((head, w)).or_default().push(i);
            }
        }
        let Some(((u, w), idx)) = pairs.into_iter().find(|(_, v)| v.len() > 1) else {
            return Ok(cur);
        };
        let qs: Vec<usize> = idx
            .iter()
            .map(|&i| match cur.rules[i] {
                Rule::B { q, .. } => q,
                _ => unreachable!(),
            })
            .collect();
        let (u, w) = (u.to_string(), w.to_string());
        cur = merge_pair(&cur, &u, &w, &qs)?;
    }
}

fn kinds_from(g: &mut Grammar, w: &BTreeSet<String>) {
    for n in &mut g.nonterminals {
        if n.kind.is_none() {
            n.kind = Some(if w.contains(&n.name) {
                Kind::W
            } else {
                Kind::N
            });
        }
    }
}

/// Equivalent regular grammar whose axioms all have arity 1.
pub fn regular_single_root(g: &Grammar) -> Result<Grammar, TransformError> {
    let w = w_of(g, check_regular_graph)?;
    let mut out = g.clone();
    kinds_from(&mut out, &w);
    let unit_c = |g: &Grammar, u: &str| {
        g.rules
            .iter()
            .any(|r| matches!(r, Rule::C { head, parts } if head == u && parts.is_empty()))
    };
    let b_rules = |g: &Grammar, u: &str| -> Vec<(String, usize)> {
        g.rules
            .iter()
            .filter_map(|r| match r {
                Rule::B { head, w, q } if head == u && *q > 0 => Some((w.clone(), *q)),
                _ => None,
            })
            .collect()
    };
    let wrap = |n: &str, arity, kind| Nonterminal::new(n, arity).kind(kind);

    // Unary axioms that derive a lone vertex.
    let lone: Vec<String> = out
        .axioms
        .iter()
        .filter(|a| out.arity_of(a) == Some(1) && unit_c(&out, a))
        .cloned()
        .collect();
    let mut axioms: Vec<String> = out
        .axioms
        .iter()
        .filter(|a| !lone.contains(a))
        .cloned()
        .collect();
    if let Some(first) = lone.first() {
        let circ = fresh_nt(&mut out, &format!("{first}.circ"), &wrap("", 1, Kind::N));
        out.rules.push(Rule::C {
            head: circ.clone(),
            parts: vec![],
        });
        axioms.insert(0, circ);
    }
    for u in &lone {
        let star = fresh_nt(&mut out, &format!("{u}.star"), &wrap("", 1, Kind::N));
        let mut new = Vec::new();
        for r in out.rules.iter().filter(|r| r.head() == u) {
            if let Rule::C { parts, .. } = r {
                if !parts.is_empty() {
                    new.push(Rule::C {
                        head: star.clone(),
                        parts: parts.clone(),
                    });
                }
            }
        }
        for (x, q) in b_rules(&out, u) {
            new.push(Rule::B {
                head: star.clone(),
                w: x.clone(),
                q,
            });
            new.push(Rule::C {
                head: star.clone(),
                parts: vec![x; q],
            });
        }
        out.rules.extend(new);
        axioms.push(star);
    }

    let mut final_axioms = Vec::new();
    for u in axioms {
        let n = out.arity_of(&u).unwrap_or(0);
        if n == 1 {
            final_axioms.push(u);
            continue;
        }
        if n == 0 {
            return Err(TransformError::Precondition(format!(
                "axiom {u} has arity 0"
            )));
        }
        let prime = fresh_nt(&mut out, &format!("{u}.prime"), &wrap("", 1, Kind::N));
        final_axioms.push(prime.clone());
        let bs = b_rules(&out, &u);
        let cs: Vec<Vec<String>> = out
            .rules
            .iter()
            .filter_map(|r| match r {
                Rule::C { head, parts } if *head == u => Some(parts.clone()),
                _ => None,
            })
            .collect();
        let mut new = Vec::new();
        for parts in cs {
            let Some((w1, rest)) = parts.split_first() else {
                return Err(TransformError::Precondition(format!(
                    "axiom {u} of arity {n} derives the unit graph"
                )));
            };
            let minus = fresh_nt(&mut out, &format!("{u}.minus"), &wrap("", n, Kind::N));
            new.push(Rule::C {
                head: minus.clone(),
                parts: rest.to_vec(),
            });
            for (x, q) in &bs {
                new.push(Rule::B {
                    head: minus.clone(),
                    w: x.clone(),
                    q: *q,
                });
            }
            let bodies: Vec<Graph> = out
                .rules
                .iter()
                .filter_map(|r| match r {
                    Rule::A { head, body } if head == w1 => Some(body.clone()),
                    _ => None,
                })
                .collect();
            for body in bodies {
                let w1p = fresh_nt(&mut out, &format!("{w1}.prime"), &wrap("", 1, Kind::W));
                new.push(Rule::C {
                    head: prime.clone(),
                    parts: vec![w1p.clone()],
                });
                let mut gp = body.clone();
                let src = std::mem::take(&mut gp.sources);
                gp.add_edge(&minus, src.clone());
                gp.sources = vec![src[0]];
                new.push(Rule::A {
                    head: w1p,
                    body: gp,
                });
            }
        }
        out.rules.extend(new);
    }
    out.axioms = final_axioms;
    out.prune_unreachable();
    let wset = out.w_set();
    let v = check_regular_graph(&out, &wset);
    if !v.accepted {
        return Err(precondition(&v));
    }
    Ok(out)
}

/// Graph search over one regular-operation body from a start edge.
#[derive(Clone, Debug)]
pub struct SimulationSearchTree {
    pub e0: usize,
    /// Parent edge of each internal vertex (`None` for sources).
    pub vertex_parent: Vec<Option<usize>>,
    /// Parent vertex of each edge (`None` for `e0`).
    pub edge_parent: Vec<Option<u32>>,
    /// `pos[v]` is 1-based; sources first by index, then internal by id.
    pub pos: Vec<usize>,
    pub sigma: Vec<u32>,
}

impl SimulationSearchTree {
    pub fn build(g: &Grammar, body: &Graph, e0: usize) -> Result<Self, TransformError> {
        let nv = body.n_vertices as usize;
        let inc = body.incidence();
        let mut vertex_parent = vec![None; nv];
        let mut edge_parent = vec![None; body.edges.len()];
        let mut seen_v = vec![false; nv];
        let mut seen_e = vec![false; body.edges.len()];
        enum Item {
            V(u32),
            E(usize),
        }
        let mut work = VecDeque::from([Item::E(e0)]);
        seen_e[e0] = true;
        while let Some(it) = work.pop_front() {
            match it {
                Item::E(e) => {
                    for &v in &body.edges[e].att {
                        if !body.is_source(v) && !seen_v[v as usize] {
                            seen_v[v as usize] = true;
                            vertex_parent[v as usize] = Some(e);
                            work.push_back(Item::V(v));
                        }
                    }
                }
                Item::V(v) => {
                    let mut es = inc[v as usize].clone();
                    es.sort_unstable();
                    es.dedup();
                    for e in es {
                        if seen_e[e] {
                            continue;
                        }
                        seen_e[e] = true;
                        edge_parent[e] = Some(v);
                        if !g.is_nonterminal(&body.edges[e].label) {
                            work.push_back(Item::E(e));
                        }
                    }
                }
            }
        }
        if let Some(e) = seen_e.iter().position(|s| !s) {
            return Err(TransformError::Precondition(format!(
                "edge e{e} not reached by the graph search"
            )));
        }
        if let Some(v) = (0..nv).find(|&v| !body.is_source(v as u32) && !seen_v[v]) {
            return Err(TransformError::Precondition(format!(
                "vertex v{v} not reached by the graph search"
            )));
        }
        let mut sigma: Vec<u32> = body.sources.clone();
        sigma.extend(body.internal_vertices());
        let mut pos = vec![0; nv];
        for (i, &v) in sigma.iter().enumerate() {
            pos[v as usize] = i + 1;
        }
        Ok(SimulationSearchTree {
            e0,
            vertex_parent,
            edge_parent,
            pos,
            sigma,
        })
    }

    pub fn vertex_children(&self, e: usize) -> Vec<u32> {
        (0..self.vertex_parent.len() as u32)
            .filter(|&v| self.vertex_parent[v as usize] == Some(e))
            .collect()
    }

    pub fn edge_children(&self, v: u32) -> Vec<usize> {
        (0..self.edge_parent.len())
            .filter(|&e| self.edge_parent[e] == Some(v))
            .collect()
    }

    /// Positions of the internal vertices below edge `e`.
    pub fn edge_fut(&self, e: usize) -> BTreeSet<usize> {
        self.vertex_children(e)
            .into_iter()
            .flat_map(|v| self.vertex_fut(v).into_iter().chain([self.pos[v as usize]]))
            .collect()
    }

    /// Positions of the internal vertices strictly below vertex `v`.
    pub fn vertex_fut(&self, v: u32) -> BTreeSet<usize> {
        self.edge_children(v)
            .into_iter()
            .flat_map(|e| self.edge_fut(e))
            .collect()
    }
}

fn single_edge_on_sources(g: &Grammar, body: &Graph) -> bool {
    body.edges.len() == 1
        && !g.is_nonterminal(&body.edges[0].label)
        && body.edges[0].att.iter().all(|&v| body.is_source(v))
}

/// Re-type `body` (of type `att.len()`) to type `n`: source `p` becomes the
/// body source glued to `sigma[p]` through `att`, or a fresh vertex.
fn retype(body: &Graph, att: &[u32], sigma: &[u32]) -> Graph {
    let mut out = body.clone();
    out.sources = sigma
        .iter()
        .map(|v| match att.iter().position(|a| a == v) {
            Some(k) => body.sources[k],
            None => out.add_vertex(),
        })
        .collect();
    out
}

/// Equivalent tree-verifiable grammar for a regular graph grammar.
pub fn regular_to_tree_verifiable(g: &Grammar) -> Result<Grammar, TransformError> {
    let g = regular_single_root(g)?;
    let pair = |u: &str, i: usize| format!("{u}@i{i}");
    let mut out = Grammar {
        alphabet: g.alphabet.clone(),
        ..Default::default()
    };
    for n in &g.nonterminals {
        for i in 1..=n.arity {
            out.nonterminals.push(
                Nonterminal::new(pair(&n.name, i), n.arity)
                    .kind(n.kind.unwrap())
                    .annotate(i, []),
            );
        }
    }
    out.axioms = g.axioms.iter().map(|a| pair(a, 1)).collect();
    let mut names: BTreeSet<String> = out.nonterminals.iter().map(|n| n.name.clone()).collect();
    names.extend(g.nonterminals.iter().map(|n| n.name.clone()));
    let mut fresh = |base: String| {
        let name = if names.contains(&base) {
            (2..)
                .map(|k| format!("{base}.{k}"))
                .find(|n| !names.contains(n))
                .unwrap()
        } else {
            base
        };
        names.insert(name.clone());
        name
    };
    // Rules whose heads are (u, i), plus slot work deferred until all of them exist.
    struct Slot {
        label: String,
        jj: usize,
        att: Vec<u32>,
        sigma: Vec<u32>,
        root: usize,
        tag: String,
    }
    let mut slot_groups: Vec<(String, Vec<String>, Vec<Slot>)> = Vec::new();
    let mut local = Vec::new();
    for (ai, r) in g.rules.iter().enumerate() {
        match r {
            Rule::B { head, w, q } => {
                for i in 1..=g.arity_of(head).unwrap() {
                    out.rules.push(Rule::B {
                        head: pair(head, i),
                        w: pair(w, i),
                        q: *q,
                    });
                }
            }
            Rule::C { head, parts } => {
                for i in 1..=g.arity_of(head).unwrap() {
                    out.rules.push(Rule::C {
                        head: pair(head, i),
                        parts: parts.iter().map(|p| pair(p, i)).collect(),
                    });
                }
            }
            Rule::A { head, body } if single_edge_on_sources(&g, body) => {
                for i in 1..=body.type_n() {
                    out.rules.push(Rule::A {
                        head: pair(head, i),
                        body: body.clone(),
                    });
                }
            }
            Rule::A { head, body } => {
                let n = body.n_vertices as usize;
                for i in 1..=body.type_n() {
                    let src = body.source(i);
                    let e0 = g
                        .terminal_edges(body)
                        .into_iter()
                        .find(|&e| body.edges[e].att.contains(&src))
                        .ok_or_else(|| {
                            TransformError::Precondition(format!(
                                "rule {}: source {i} on no terminal edge",
                                ai + 1
                            ))
                        })?;
                    let st = SimulationSearchTree::build(&g, body, e0)?;
                    let tag = format!("{head}@A{}.i{i}", ai + 1);
                    let ename: BTreeMap<usize, String> = g
                        .terminal_edges(body)
                        .into_iter()
                        .filter(|&e| e != e0)
                        .map(|e| (e, fresh(format!("{tag}.e{e}"))))
                        .collect();
                    let vname: BTreeMap<u32, String> = body
                        .internal_vertices()
                        .into_iter()
                        .map(|v| (v, fresh(format!("{tag}.v{v}"))))
                        .collect();
                    let with_children = |mut h: Graph, e: usize| {
                        h.edges.push(body.edges[e].clone());
                        for c in st.vertex_children(e) {
                            h.add_edge(&vname[&c], st.sigma.clone());
                        }
                        h
                    };
                    let mut h0 = Graph::with_vertices(body.n_vertices);
                    h0.sources = body.sources.clone();
                    local.push(Rule::A {
                        head: pair(head, i),
                        body: with_children(h0, e0),
                    });
                    for (&e, name) in &ename {
                        let parent = st.edge_parent[e].unwrap();
                        out.nonterminals.push(
                            Nonterminal::new(name, n)
                                .kind(Kind::W)
                                .annotate(st.pos[parent as usize], st.edge_fut(e)),
                        );
                        let mut h = Graph::with_vertices(body.n_vertices);
                        h.sources = st.sigma.clone();
                        local.push(Rule::A {
                            head: name.clone(),
                            body: with_children(h, e),
                        });
                    }
                    for (&v, name) in &vname {
                        out.nonterminals.push(
                            Nonterminal::new(name, n)
                                .kind(Kind::N)
                                .annotate(st.pos[v as usize], st.vertex_fut(v)),
                        );
                        let children = st.edge_children(v);
                        let terminal_parts: Vec<String> = children
                            .iter()
                            .filter_map(|e| ename.get(e).cloned())
                            .collect();
                        let mut slots = Vec::new();
                        for &s in children.iter().filter(|e| !ename.contains_key(e)) {
                            let att = body.edges[s].att.clone();
                            if att.iter().collect::<BTreeSet<_>>().len() != att.len() {
                                return Err(TransformError::Precondition(format!(
                                    "rule {}: slot e{s} repeats a vertex",
                                    ai + 1
                                )));
                            }
                            let jj = att.iter().position(|&x| x == v).unwrap() + 1;
                            slots.push(Slot {
                                label: body.edges[s].label.to_string(),
                                jj,
                                att,
                                sigma: st.sigma.clone(),
                                root: st.pos[v as usize],
                                tag: format!("{tag}.s{s}"),
                            });
                        }
                        slot_groups.push((name.clone(), terminal_parts, slots));
                    }
                }
            }
        }
    }
    out.rules.extend(local);

    // Slot nonterminals are inlined into their parent vertex's rules through
    // wrappers: retyped copies of the (w, j) rules of the slot's language.
    let pair_rules = out.rules.clone();
    let mut wrappers: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut new_rules = Vec::new();
    for (v_head, terminal_parts, slots) in slot_groups {
        let mut combos: Vec<Vec<String>> = vec![terminal_parts];
        for slot in &slots {
            let mut wrapper = |w: &str, out: &mut Grammar, new_rules: &mut Vec<Rule>| -> String {
                let key = (slot.tag.clone(), w.to_string());
                if let Some(n) = wrappers.get(&key) {
                    return n.clone();
                }
                let name = fresh(format!("{}>{}", pair(w, slot.jj), slot.tag));
                out.nonterminals.push(
                    Nonterminal::new(&name, slot.sigma.len())
                        .kind(Kind::W)
                        .annotate(slot.root, []),
                );
                let src = pair(w, slot.jj);
                for r in &pair_rules {
                    if let Rule::A { head, body } = r {
                        if *head == src {
                            new_rules.push(Rule::A {
                                head: name.clone(),
                                body: retype(body, &slot.att, &slot.sigma),
                            });
                        }
                    }
                }
                wrappers.insert(key, name.clone());
                name
            };
            let mut options = Vec::new();
            for r in &g.rules {
                match r {
                    Rule::C { head, parts } if *head == slot.label => {
                        options.push(
                            parts
                                .iter()
                                .map(|p| wrapper(p, &mut out, &mut new_rules))
                                .collect::<Vec<_>>(),
                        );
                    }
                    Rule::B { head, w, q } if *head == slot.label => {
                        let x = wrapper(w, &mut out, &mut new_rules);
                        new_rules.push(Rule::B {
                            head: v_head.clone(),
                            w: x,
                            q: *q,
                        });
                    }
                    _ => {}
                }
            }
            combos = combos
                .into_iter()
                .flat_map(|c| options.iter().map(move |o| [c.clone(), o.clone()].concat()))
                .collect();
        }
        for parts in combos {
            new_rules.push(Rule::C {
                head: v_head.clone(),
                parts,
            });
        }
    }
    out.rules.extend(new_rules);
    out.prune_unreachable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::enumerate::{enumerate_language, Root};
    use crate::hypergraph::Alphabet;

    fn same_language(a: &Grammar, b: &Grammar, bound: usize) {
        let la = enumerate_language(a, &Root::Axioms, bound).unwrap();
        let lb = enumerate_language(b, &Root::Axioms, bound).unwrap();
        let ca: BTreeSet<_> = la.codes().collect();
        let cb: BTreeSet<_> = lb.codes().collect();
        assert_eq!(ca, cb);
        assert!(!ca.is_empty());
    }

    #[test]
    fn schur_examples() {
        assert_eq!(
            schur_data(&[1]).unwrap(),
            SchurData {
                d: 1,
                n: 1,
                m: BTreeSet::new()
            }
        );
        assert_eq!(
            schur_data(&[4, 6]).unwrap(),
            SchurData {
                d: 2,
                n: 2,
                m: BTreeSet::new()
            }
        );
        assert_eq!(
            schur_data(&[3, 5]).unwrap(),
            SchurData {
                d: 1,
                n: 8,
                m: [3, 5, 6].into()
            }
        );
        assert_eq!(schur_data(&[]), Err(TransformError::EmptyInput));
    }

    #[test]
    fn merge_multi_b() {
        for name in ["multi-b-46", "multi-b-35"] {
            let g = assets::grammar(name).unwrap();
            let m = merge_b_rules(&g).unwrap();
            let mut pairs = BTreeMap::new();
            for r in &m.rules {
                if let Rule::B { head, w, .. } = r {
                    *pairs.entry((head.clone(), w.clone())).or_insert(0) += 1;
                }
            }
            assert!(pairs.values().all(|&c| c == 1), "{name}");
            same_language(&g, &m, 10);
        }
    }

    #[test]
    fn merge_46_uses_dn_4() {
        let g = assets::grammar("multi-b-46").unwrap();
        let m = merge_b_rules(&g).unwrap();
        let dp = m
            .rules
            .iter()
            .find_map(|r| match r {
                Rule::C { head, parts } if head == "u.dprime" => Some(parts.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(dp, vec!["wa"; 4]);
        assert_eq!(
            m.rules_with_head("u.prime")
                .filter(|(_, r)| r.form() == 'C')
                .count(),
            1
        );
    }

    #[test]
    fn merge_keeps_single_b() {
        let g = assets::grammar("rtree-ab").unwrap();
        assert_eq!(merge_b_rules(&g).unwrap(), g);
    }

    #[test]
    fn single_root_series_chain() {
        let g = assets::grammar("series-chain").unwrap();
        let s = regular_single_root(&g).unwrap();
        assert!(s.axioms.iter().all(|a| s.arity_of(a) == Some(1)));
        same_language(&g, &s, 10);
    }

    #[test]
    fn single_root_lone_vertex_split() {
        let g = crate::io::parse_grammar_file(
            "alphabet a:1\nnonterminal u arity 1\nnonterminal w arity 1\naxiom u\n\
             rule C u ->\nrule C u -> w\nrule B u -> u w^2\nrule A w -> { vertex x; source 1 x; edge e a x }\n",
        )
        .unwrap();
        let s = regular_single_root(&g).unwrap();
        assert!(s.is_nonterminal("u.circ") && s.is_nonterminal("u.star"));
        assert_eq!(s.rules_with_head("u.circ").count(), 1);
        same_language(&g, &s, 9);
    }

    #[test]
    fn tree_verifiable_series_chain() {
        let g = assets::grammar("series-chain").unwrap();
        let t = regular_to_tree_verifiable(&g).unwrap();
        let v = check_tree_verifiable(&t).unwrap();
        assert!(v.accepted, "{v}\n{}", crate::io::print_grammar(&t));
        same_language(&g, &t, 10);
    }

    #[test]
    fn tree_verifiable_single_edge_base_case() {
        let g = crate::io::parse_grammar_file(
            "alphabet a:2\nnonterminal u arity 1\nnonterminal w arity 1\naxiom u\n\
             rule C u -> w\nrule A w -> { vertex x y; source 1 x; edge e a x y }\n",
        )
        .unwrap();
        let t = regular_to_tree_verifiable(&g).unwrap();
        assert!(check_tree_verifiable(&t).unwrap().accepted);
        same_language(&g, &t, 8);
    }

    #[test]
    fn generic_small_accepted() {
        let g = generic_etw_grammar(&Alphabet::new([("a", 1)]), 1).unwrap();
        assert!(check_tree_verifiable(&g).unwrap().accepted);
        let g = generic_etw_grammar(&Alphabet::new([("a", 2)]), 2).unwrap();
        let v = check_tree_verifiable(&g).unwrap();
        assert!(v.accepted, "{v}");
    }
}
