//! Syntactic grammar classes: regular tree grammars, tree-verifiable
//! grammars and regular graph grammars.

use std::collections::BTreeSet;
use std::fmt;

use crate::grammar::{Finding, Grammar, GrammarError, Location, Rule};
use crate::hypergraph::Graph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassVerdict {
    pub class: &'static str,
    pub accepted: bool,
    pub violations: Vec<Finding>,
}

impl ClassVerdict {
    fn from(class: &'static str, mut violations: Vec<Finding>) -> Self {
        violations.sort();
        violations.dedup();
        ClassVerdict {
            class,
            accepted: violations.is_empty(),
            violations,
        }
    }

    pub fn has_clause(&self, clause: &str) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

impl fmt::Display for ClassVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "class: {}", self.class)?;
        writeln!(f, "accepted: {}", self.accepted)?;
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

/// Shape of a tree-operation body `tedge_{a,i}(u_1, ..)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tedge {
    pub label: String,
    /// Attachment position (1-based) of the source.
    pub root_pos: usize,
    /// For every other position j (1-based, increasing): the slot nonterminal.
    pub children: Vec<(usize, String)>,
}

/// Recognise `tedge_{a,i}(u_1..u_{ar(a)-1})`: one terminal edge on distinct
/// vertices, the source at position i, every other vertex carrying exactly
/// one unary slot. Slot order in the body is irrelevant.
pub fn recognize_tedge(g: &Grammar, body: &Graph) -> Result<Tedge, String> {
    if body.type_n() != 1 {
        return Err(format!("body has type {}, expected 1", body.type_n()));
    }
    let terms = g.terminal_edges(body);
    if terms.len() != 1 {
        return Err(format!("{} terminal edges, expected 1", terms.len()));
    }
    let e = &body.edges[terms[0]];
    let distinct: BTreeSet<u32> = e.att.iter().copied().collect();
    if distinct.len() != e.att.len() {
        return Err("terminal edge attachments are not distinct".into());
    }
    if body.n_vertices as usize != e.att.len() {
        return Err("body has vertices outside the terminal edge".into());
    }
    let src = body.sources[0];
    let root_pos = e
        .att
        .iter()
        .position(|&v| v == src)
        .ok_or("source not attached to the terminal edge")?
        + 1;
    let mut children = Vec::new();
    let slots = g.slots(body);
    if slots.len() != e.att.len() - 1 {
        return Err(format!(
            "{} slots, expected {}",
            slots.len(),
            e.att.len() - 1
        ));
    }
    for (j, &v) in e.att.iter().enumerate() {
        if j + 1 == root_pos {
            continue;
        }
        let on_v: Vec<usize> = slots
            .iter()
            .copied()
            .filter(|&s| body.edges[s].att.contains(&v))
            .collect();
        if on_v.len() != 1 || body.edges[on_v[0]].att != vec![v] {
            return Err(format!(
                "position {} does not carry exactly one unary slot",
                j + 1
            ));
        }
        children.push((j + 1, body.edges[on_v[0]].label.to_string()));
    }
    Ok(Tedge {
        label: e.label.to_string(),
        root_pos,
        children,
    })
}

pub fn check_regular_tree(g: &Grammar, w: &BTreeSet<String>) -> ClassVerdict {
    let mut out = Vec::new();
    let arity = |n: &str| g.nt(n).map_or(0, |x| x.arity);
    for (i, r) in g.rules.iter().enumerate() {
        let loc = || Location::Rule(i);
        match r {
            Rule::A { head, body } => {
                if !w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "A-rule head in W",
                        format!("{head} not in W"),
                    ));
                }
                if let Err(m) = recognize_tedge(g, body) {
                    out.push(Finding::new(loc(), "A-rule is a tree edge", m));
                }
            }
            Rule::B { head, w: p, .. } => {
                if w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "B-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                if !w.contains(p) {
                    out.push(Finding::new(
                        loc(),
                        "B-rule part in W",
                        format!("{p} not in W"),
                    ));
                }
                if arity(head) != 1 {
                    out.push(Finding::new(
                        loc(),
                        "tree arity",
                        format!("{head} has arity {}", arity(head)),
                    ));
                }
            }
            Rule::C { head, parts } => {
                if w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "C-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                if parts.iter().any(|p| p == head) {
                    out.push(Finding::new(
                        loc(),
                        "B-rule form u -> u || w^q",
                        format!(
                            "{head} occurs on the right next to {} other parts",
                            parts.len() - 1
                        ),
                    ));
                }
                for p in parts.iter().filter(|p| *p != head && !w.contains(*p)) {
                    out.push(Finding::new(
                        loc(),
                        "C-rule parts in W",
                        format!("{p} not in W"),
                    ));
                }
                if arity(head) != 1 {
                    out.push(Finding::new(
                        loc(),
                        "tree arity",
                        format!("{head} has arity {}", arity(head)),
                    ));
                }
            }
        }
    }
    for a in &g.axioms {
        if w.contains(a) {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "axioms are of the form -> u with u not in W",
                "",
            ));
        }
        if arity(a) != 1 {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "tree arity",
                format!("axiom arity {}", arity(a)),
            ));
        }
    }
    ClassVerdict::from("regular-tree", out)
}

pub fn check_tree_verifiable(g: &Grammar) -> Result<ClassVerdict, GrammarError> {
    if !g.is_annotated() {
        return Err(GrammarError::Precondition(
            "tree-verifiable check needs root/kind annotation on every nonterminal".into(),
        ));
    }
    let mut out = Vec::new();
    let nt = |n: &str| g.nt(n).expect("validated");
    for (i, r) in g.rules.iter().enumerate() {
        let loc = || Location::Rule(i);
        match r {
            Rule::A { head, body } => {
                let h = nt(head);
                if !h.in_w() {
                    out.push(Finding::new(
                        loc(),
                        "A-rule head in W",
                        format!("{head} not in W"),
                    ));
                }
                let slots = g.slots(body);
                for &s in &slots {
                    if nt(&body.edges[s].label).in_w() {
                        out.push(Finding::new(
                            loc(),
                            "A-rule slots not in W",
                            format!("{} in W", body.edges[s].label),
                        ));
                    }
                }
                let terms = g.terminal_edges(body);
                if terms.len() != 1 {
                    out.push(Finding::new(
                        loc(),
                        "exactly one terminal edge",
                        format!("{} terminal edges", terms.len()),
                    ));
                    continue;
                }
                let e = &body.edges[terms[0]];
                let mut roots = vec![body.source(h.root.unwrap())];
                for &s in &slots {
                    let u = nt(&body.edges[s].label);
                    roots.push(body.edges[s].att[u.root.unwrap() - 1]);
                }
                let distinct: BTreeSet<u32> = roots.iter().copied().collect();
                if distinct.len() != roots.len() {
                    out.push(Finding::new(
                        loc(),
                        "roots pairwise distinct",
                        format!("roots {roots:?}"),
                    ));
                }
                if let Some(v) = roots.iter().find(|v| !e.att.contains(v)) {
                    out.push(Finding::new(
                        loc(),
                        "roots attached to the terminal edge",
                        format!("v{v}"),
                    ));
                }
                let mut lhs: BTreeSet<u32> = body.internal_vertices().into_iter().collect();
                for &f in &h.fut {
                    lhs.insert(body.source(f));
                }
                let mut rhs = Vec::new();
                for &s in &slots {
                    let u = nt(&body.edges[s].label);
                    let att = &body.edges[s].att;
                    rhs.push(att[u.root.unwrap() - 1]);
                    rhs.extend(u.fut.iter().map(|&j| att[j - 1]));
                }
                let rhs_set: BTreeSet<u32> = rhs.iter().copied().collect();
                if rhs_set.len() != rhs.len() {
                    out.push(Finding::new(
                        loc(),
                        "be partitioned into the roots",
                        "slot roots and future roots overlap",
                    ));
                }
                if lhs != rhs_set {
                    out.push(Finding::new(
                        loc(),
                        "be partitioned into the roots",
                        format!("internal+future {lhs:?} vs slot roots {rhs_set:?}"),
                    ));
                }
            }
            Rule::B { head, w, .. } => {
                let (u, wn) = (nt(head), nt(w));
                if u.in_w() {
                    out.push(Finding::new(
                        loc(),
                        "B-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                if !wn.in_w() {
                    out.push(Finding::new(
                        loc(),
                        "B-rule part in W",
                        format!("{w} not in W"),
                    ));
                }
                if u.root != wn.root {
                    out.push(Finding::new(
                        loc(),
                        "B-rule roots agree",
                        format!("rt({head}) != rt({w})"),
                    ));
                }
                if !wn.fut.is_empty() {
                    out.push(Finding::new(
                        loc(),
                        "B-rule part has no future roots",
                        format!("fut({w}) nonempty"),
                    ));
                }
            }
            Rule::C { head, parts } => {
                let u = nt(head);
                if u.in_w() {
                    out.push(Finding::new(
                        loc(),
                        "C-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                let mut union = Vec::new();
                for p in parts {
                    let pn = nt(p);
                    if !pn.in_w() {
                        out.push(Finding::new(
                            loc(),
                            "C-rule parts in W",
                            format!("{p} not in W"),
                        ));
                    }
                    if pn.root != u.root {
                        out.push(Finding::new(
                            loc(),
                            "C-rule roots agree",
                            format!("rt({head}) != rt({p})"),
                        ));
                    }
                    union.extend(pn.fut.iter().copied());
                }
                let set: BTreeSet<usize> = union.iter().copied().collect();
                if set.len() != union.len() || set != u.fut {
                    out.push(Finding::new(
                        loc(),
                        "future roots partitioned",
                        format!("fut({head}) = {:?}", u.fut),
                    ));
                }
            }
        }
    }
    for a in &g.axioms {
        let u = nt(a);
        if u.in_w() {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "axioms are of the form -> u with u not in W",
                "",
            ));
        }
        let mut cover: BTreeSet<usize> = u.fut.clone();
        cover.insert(u.root.unwrap());
        if cover != (1..=u.arity).collect() {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "every source must be a root",
                format!("{cover:?}"),
            ));
        }
    }
    Ok(ClassVerdict::from("tree-verifiable", out))
}

/// True iff some path from `x` to `y` uses only terminal edges and passes
/// through internal vertices only.
fn internal_path(g: &Grammar, body: &Graph, x: u32, y: u32) -> bool {
    if x == y {
        return true;
    }
    let terminal: Vec<bool> = body
        .edges
        .iter()
        .map(|e| !g.is_nonterminal(&e.label))
        .collect();
    let inc = body.incidence();
    let mut seen = vec![false; body.n_vertices as usize];
    let mut stack = vec![x];
    seen[x as usize] = true;
    while let Some(v) = stack.pop() {
        for &ei in &inc[v as usize] {
            if !terminal[ei] {
                continue;
            }
            for &z in &body.edges[ei].att {
                if z == y {
                    return true;
                }
                if !seen[z as usize] && !body.is_source(z) {
                    seen[z as usize] = true;
                    stack.push(z);
                }
            }
        }
    }
    false
}

/// Violations of the regular-operation conditions for one body.
pub fn regular_operation_violations(g: &Grammar, body: &Graph) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if body.edges.is_empty() {
        out.push(("has at least one edge", "body has no edges".to_string()));
        return out;
    }
    let single_a = body.edges.len() == 1
        && !g.is_nonterminal(&body.edges[0].label)
        && body.edges[0].att.iter().all(|&v| body.is_source(v));
    if !single_a {
        for (i, e) in body.edges.iter().enumerate() {
            if e.att.iter().all(|&v| body.is_source(v)) {
                out.push((
                    "attached to sources only",
                    format!("e{i} ({}) touches no internal vertex", e.label),
                ));
            }
        }
    }
    for x in 0..body.n_vertices {
        for y in x + 1..body.n_vertices {
            if !internal_path(g, body, x, y) {
                out.push((
                    "traverses only internal vertices",
                    format!("no internal terminal path between v{x} and v{y}"),
                ));
            }
        }
    }
    out
}

pub fn check_regular_graph(g: &Grammar, w: &BTreeSet<String>) -> ClassVerdict {
    let mut out = Vec::new();
    let arity = |n: &str| g.nt(n).map_or(0, |x| x.arity);
    for (i, r) in g.rules.iter().enumerate() {
        let loc = || Location::Rule(i);
        match r {
            Rule::A { head, body } => {
                if !w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "A-rule head in W",
                        format!("{head} not in W"),
                    ));
                }
                for s in g.slots(body) {
                    if w.contains(&*body.edges[s].label) {
                        out.push(Finding::new(
                            loc(),
                            "A-rule slots not in W",
                            format!("{} in W", body.edges[s].label),
                        ));
                    }
                }
                for (clause, m) in regular_operation_violations(g, body) {
                    out.push(Finding::new(loc(), clause, m));
                }
            }
            Rule::B { head, w: p, .. } => {
                if w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "B-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                if !w.contains(p) {
                    out.push(Finding::new(
                        loc(),
                        "B-rule part in W",
                        format!("{p} not in W"),
                    ));
                }
            }
            Rule::C { head, parts } => {
                if w.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "C-rule head not in W",
                        format!("{head} in W"),
                    ));
                }
                for p in parts.iter().filter(|p| !w.contains(*p)) {
                    out.push(Finding::new(
                        loc(),
                        "C-rule parts in W",
                        format!("{p} not in W"),
                    ));
                }
                if parts.is_empty() && arity(head) > 1 && g.axioms.contains(head) {
                    out.push(Finding::new(
                        loc(),
                        "ar(u) > 1 implies k >= 1",
                        format!("axiom {head} derives the unit graph"),
                    ));
                }
            }
        }
    }
    for a in &g.axioms {
        if w.contains(a) {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "axioms are of the form -> u with u not in W",
                "",
            ));
        }
    }
    ClassVerdict::from("regular-graph", out)
}

/// Search all subsets W of the nonterminals (at most 12) for one accepted
/// by `check`; returns the first in subset order.
pub fn find_w(
    g: &Grammar,
    check: impl Fn(&Grammar, &BTreeSet<String>) -> ClassVerdict,
) -> Option<BTreeSet<String>> {
    let names: Vec<&String> = g.nonterminals.iter().map(|n| &n.name).collect();
    if names.len() > 12 {
        return None;
    }
    (0u32..1 << names.len()).find_map(|mask| {
        let w: BTreeSet<String> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, n)| (*n).clone())
            .collect();
        check(g, &w).accepted.then_some(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn tv_assets_accepted() {
        for name in ["tv-tll", "cycles"] {
            let g = assets::grammar(name).unwrap();
            let v = check_tree_verifiable(&g).unwrap();
            assert!(v.accepted, "{name}: {v}");
        }
    }

    #[test]
    fn ab_equal_rejected() {
        let g = assets::grammar("ab-equal").unwrap();
        let v = check_regular_tree(&g, &g.w_set());
        assert!(!v.accepted);
        assert!(v.has_clause("B-rule form u -> u || w^q"));
    }

    #[test]
    fn regular_tree_assets_accepted() {
        for name in ["rtree-ab", "rtree-ternary", "multi-b-46", "multi-b-35"] {
            let g = assets::grammar(name).unwrap();
            let v = check_regular_tree(&g, &g.w_set());
            assert!(v.accepted, "{name}: {v}");
        }
    }

    #[test]
    fn axiom_in_w_rejected() {
        let mut g = assets::grammar("rtree-ab").unwrap();
        g.axioms = vec!["wa".into()];
        let v = check_regular_tree(&g, &g.w_set());
        assert!(v.has_clause("axioms are of the form -> u with u not in W"));
    }

    #[test]
    fn series_chain_regular_tll_not() {
        let g = assets::grammar("series-chain").unwrap();
        assert!(check_regular_graph(&g, &g.w_set()).accepted);
        let t = assets::grammar("tll").unwrap();
        let v = check_regular_graph(&t, &BTreeSet::from(["u".to_string()]));
        assert!(!v.accepted);
        assert!(v.has_clause("traverses only internal vertices"));
        assert!(find_w(&t, check_regular_graph).is_none());
    }

    #[test]
    fn two_terminal_edges_rejected() {
        let mut g = assets::grammar("cycles").unwrap();
        if let Rule::A { body, .. } = &mut g.rules[4] {
            body.add_edge("a", vec![0, 1]);
        }
        let v = check_tree_verifiable(&g).unwrap();
        assert!(v.has_clause("exactly one terminal edge"));
    }

    #[test]
    fn empty_body_rejected() {
        let mut g = assets::grammar("series-chain").unwrap();
        g.rules.push(Rule::A {
            head: "x".into(),
            body: Graph::unit(2),
        });
        assert!(check_regular_graph(&g, &g.w_set()).has_clause("has at least one edge"));
    }

    #[test]
    fn verdicts_stable() {
        let g = assets::grammar("tll").unwrap();
        let w = BTreeSet::from(["u".to_string()]);
        assert_eq!(check_regular_graph(&g, &w), check_regular_graph(&g, &w));
    }
}
