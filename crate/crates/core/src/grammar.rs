//! HR grammars with rules of forms A (substitution), B (parallel power) and
//! C (parallel list), plus the optional tree-verifiable annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::hypergraph::{Alphabet, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    W,
    N,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nonterminal {
    pub name: String,
    pub arity: usize,
    pub kind: Option<Kind>,
    pub root: Option<usize>,
    pub fut: BTreeSet<usize>,
}

impl Nonterminal {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Nonterminal {
            name: name.into(),
            arity,
            kind: None,
            root: None,
            fut: BTreeSet::new(),
        }
    }

    pub fn kind(mut self, k: Kind) -> Self {
        self.kind = Some(k);
        self
    }

    pub fn annotate(mut self, root: usize, fut: impl IntoIterator<Item = usize>) -> Self {
        self.root = Some(root);
        self.fut = fut.into_iter().collect();
        self
    }

    pub fn in_w(&self) -> bool {
        self.kind == Some(Kind::W)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// `head -> body`; nonterminal-labelled edges of `body` are slots.
    A { head: String, body: Graph },
    /// `head -> head || w^q`.
    B { head: String, w: String, q: usize },
    /// `head -> w1 || ... || wk`; k = 0 is the unit graph.
    C { head: String, parts: Vec<String> },
}

impl Rule {
    pub fn head(&self) -> &str {
        match self {
            Rule::A { head, .. } | Rule::B { head, .. } | Rule::C { head, .. } => head,
        }
    }

    pub fn form(&self) -> char {
        match self {
            Rule::A { .. } => 'A',
            Rule::B { .. } => 'B',
            Rule::C { .. } => 'C',
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grammar {
    pub alphabet: Alphabet,
    pub nonterminals: Vec<Nonterminal>,
    pub rules: Vec<Rule>,
    pub axioms: Vec<String>,
}

/// Where a finding is located.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Location {
    Grammar,
    Nonterminal(String),
    Rule(usize),
    Axiom(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Grammar => write!(f, "grammar"),
            Location::Nonterminal(n) => write!(f, "nonterminal {n}"),
            Location::Rule(i) => write!(f, "rule {}", i + 1),
            Location::Axiom(a) => write!(f, "axiom {a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Finding {
    pub location: Location,
    pub clause: &'static str,
    pub message: String,
}

impl Finding {
    pub fn new(location: Location, clause: &'static str, message: impl Into<String>) -> Self {
        Finding {
            location,
            clause,
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.location, self.clause, self.message)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("invalid grammar: {0}")]
    Invalid(String),
    #[error("unknown nonterminal {0}")]
    UnknownNonterminal(String),
    #[error("derivation does not match rule {rule}: {reason}")]
    BadDerivation { rule: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Witness of membership: the rule applied and one child per slot (A),
/// per parallel part (C), or the head part followed by the q copies (B).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DerivationTree {
    pub rule: usize,
    pub children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn leaf(rule: usize) -> Self {
        DerivationTree {
            rule,
            children: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

impl Grammar {
    pub fn nt(&self, name: &str) -> Option<&Nonterminal> {
        self.nonterminals.iter().find(|n| n.name == name)
    }

    pub fn nt_mut(&mut self, name: &str) -> Option<&mut Nonterminal> {
        self.nonterminals.iter_mut().find(|n| n.name == name)
    }

    pub fn nt_index(&self, name: &str) -> Option<usize> {
        self.nonterminals.iter().position(|n| n.name == name)
    }

    pub fn is_nonterminal(&self, label: &str) -> bool {
        self.nt(label).is_some()
    }

    pub fn arity_of(&self, label: &str) -> Option<usize> {
        self.alphabet
            .arity(label)
            .or_else(|| self.nt(label).map(|n| n.arity))
    }

    pub fn in_w(&self, name: &str) -> bool {
        self.nt(name).is_some_and(|n| n.in_w())
    }

    /// The set W of nonterminals marked `kind W`.
    pub fn w_set(&self) -> BTreeSet<String> {
        self.nonterminals
            .iter()
            .filter(|n| n.in_w())
            .map(|n| n.name.clone())
            .collect()
    }

    pub fn set_w(&mut self, w: &BTreeSet<String>) {
        for n in &mut self.nonterminals {
            n.kind = Some(if w.contains(&n.name) {
                Kind::W
            } else {
                Kind::N
            });
        }
    }

    pub fn is_annotated(&self) -> bool {
        !self.nonterminals.is_empty()
            && self
                .nonterminals
                .iter()
                .all(|n| n.root.is_some() && n.kind.is_some())
    }

    pub fn root_of(&self, name: &str) -> usize {
        self.nt(name).and_then(|n| n.root).unwrap_or(1)
    }

    pub fn fut_of(&self, name: &str) -> BTreeSet<usize> {
        self.nt(name).map(|n| n.fut.clone()).unwrap_or_default()
    }

    /// Indices of nonterminal-labelled edges in an A-rule body.
    pub fn slots(&self, body: &Graph) -> Vec<usize> {
        (0..body.edges.len())
            .filter(|&i| self.is_nonterminal(&body.edges[i].label))
            .collect()
    }

    /// Indices of terminal edges in an A-rule body.
    pub fn terminal_edges(&self, body: &Graph) -> Vec<usize> {
        (0..body.edges.len())
            .filter(|&i| !self.is_nonterminal(&body.edges[i].label))
            .collect()
    }

    pub fn rules_with_head<'a>(
        &'a self,
        head: &'a str,
    ) -> impl Iterator<Item = (usize, &'a Rule)> + 'a {
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.head() == head)
    }

    /// B-rules with exponent 0 (identity, ignored by enumeration).
    pub fn noop_rules(&self) -> Vec<usize> {
        (0..self.rules.len())
            .filter(|&i| matches!(self.rules[i], Rule::B { q: 0, .. }))
            .collect()
    }

    /// Largest vertex count of an A-rule body.
    pub fn max_body_vertices(&self) -> usize {
        self.rules
            .iter()
            .filter_map(|r| match r {
                Rule::A { body, .. } => Some(body.n_vertices as usize),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn max_arity(&self) -> usize {
        self.nonterminals.iter().map(|n| n.arity).max().unwrap_or(0)
    }

    /// A fresh nonterminal name starting with `base`.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.is_nonterminal(base) && !self.alphabet.contains(base) {
            return base.to_string();
        }
        (2..)
            .map(|i| format!("{base}.{i}"))
            .find(|n| !self.is_nonterminal(n) && !self.alphabet.contains(n))
            .unwrap()
    }

    /// Remove nonterminals not reachable from the axioms, and their rules.
    pub fn prune_unreachable(&mut self) {
        let mut seen: BTreeSet<String> = self.axioms.iter().cloned().collect();
        let mut stack: Vec<String> = self.axioms.clone();
        while let Some(u) = stack.pop() {
            for r in self.rules.iter().filter(|r| r.head() == u) {
                let refs: Vec<String> = match r {
                    Rule::A { body, .. } => body
                        .edges
                        .iter()
                        .filter(|e| self.is_nonterminal(&e.label))
                        .map(|e| e.label.to_string())
                        .collect(),
                    Rule::B { w, .. } => vec![w.clone()],
                    Rule::C { parts, .. } => parts.clone(),
                };
                for x in refs {
                    if seen.insert(x.clone()) {
                        stack.push(x);
                    }
                }
            }
        }
        self.rules.retain(|r| seen.contains(r.head()));
        self.nonterminals.retain(|n| seen.contains(&n.name));
    }
}

/// Check all grammar and rule invariants.
pub fn validate_grammar(g: &Grammar) -> Vec<Finding> {
    let mut out = Vec::new();
    for (a, &k) in &g.alphabet.labels {
        if k == 0 {
            out.push(Finding::new(
                Location::Grammar,
                "arity",
                format!("label {a} has arity 0"),
            ));
        }
    }
    let mut names = BTreeMap::new();
    for n in &g.nonterminals {
        let loc = Location::Nonterminal(n.name.clone());
        if g.alphabet.contains(&n.name) {
            out.push(Finding::new(
                loc.clone(),
                "names",
                "nonterminal name clashes with a terminal label",
            ));
        }
        if names.insert(n.name.clone(), ()).is_some() {
            out.push(Finding::new(loc.clone(), "names", "declared twice"));
        }
        if let Some(rt) = n.root {
            if rt < 1 || rt > n.arity {
                out.push(Finding::new(
                    loc.clone(),
                    "root",
                    format!("rt {rt} outside [1,{}]", n.arity),
                ));
            }
            for &f in &n.fut {
                if f < 1 || f > n.arity || f == rt {
                    out.push(Finding::new(
                        loc.clone(),
                        "fut",
                        format!("future root {f} not in [1,{}] minus rt", n.arity),
                    ));
                }
            }
        } else if !n.fut.is_empty() {
            out.push(Finding::new(
                loc,
                "fut",
                "future roots given without a root",
            ));
        }
    }
    for (i, r) in g.rules.iter().enumerate() {
        let loc = Location::Rule(i);
        let Some(head) = g.nt(r.head()) else {
            out.push(Finding::new(
                loc,
                "undeclared",
                format!("head {} is not a nonterminal", r.head()),
            ));
            continue;
        };
        match r {
            Rule::A { body, .. } => {
                if body.type_n() != head.arity {
                    out.push(Finding::new(
                        loc.clone(),
                        "body type",
                        format!("body has type {}, head arity {}", body.type_n(), head.arity),
                    ));
                }
                for v in body.validate(&|l| g.arity_of(l)) {
                    out.push(Finding::new(loc.clone(), "body graph", v.to_string()));
                }
            }
            Rule::B { w, .. } => match g.nt(w) {
                None => out.push(Finding::new(loc, "undeclared", format!("nonterminal {w}"))),
                Some(wn) if wn.arity != head.arity => out.push(Finding::new(
                    loc,
                    "arity",
                    format!(
                        "B-rule part {w} has arity {}, head {}",
                        wn.arity, head.arity
                    ),
                )),
                _ => {}
            },
            Rule::C { parts, .. } => {
                for w in parts {
                    match g.nt(w) {
                        None => out.push(Finding::new(
                            loc.clone(),
                            "undeclared",
                            format!("nonterminal {w}"),
                        )),
                        Some(wn) if wn.arity != head.arity => out.push(Finding::new(
                            loc.clone(),
                            "arity",
                            format!(
                                "C-rule part {w} has arity {}, head {}",
                                wn.arity, head.arity
                            ),
                        )),
                        _ => {}
                    }
                }
            }
        }
    }
    for a in &g.axioms {
        if g.nt(a).is_none() {
            out.push(Finding::new(
                Location::Axiom(a.clone()),
                "undeclared",
                "axiom is not a nonterminal",
            ));
        }
    }
    out
}

/// Evaluate a derivation tree bottom-up.
pub fn apply_derivation(g: &Grammar, t: &DerivationTree) -> Result<Graph, GrammarError> {
    let rule = g.rules.get(t.rule).ok_or(GrammarError::BadDerivation {
        rule: t.rule,
        reason: "no such rule".into(),
    })?;
    let bad = |reason: String| GrammarError::BadDerivation {
        rule: t.rule,
        reason,
    };
    let child_heads = derivation_child_heads(g, t.rule);
    if child_heads.len() != t.children.len() {
        return Err(bad(format!(
            "expected {} children, found {}",
            child_heads.len(),
            t.children.len()
        )));
    }
    let mut kids = Vec::with_capacity(t.children.len());
    for (c, want) in t.children.iter().zip(&child_heads) {
        let have = g
            .rules
            .get(c.rule)
            .map(|r| r.head().to_string())
            .unwrap_or_default();
        if &have != want {
            return Err(bad(format!("child derives {have}, slot needs {want}")));
        }
        kids.push(apply_derivation(g, c)?);
    }
    let arity = g
        .nt(rule.head())
        .map(|n| n.arity)
        .ok_or_else(|| bad("undeclared head".into()))?;
    match rule {
        Rule::A { body, .. } => {
            let slots = g.slots(body);
            let subs: Vec<(usize, &Graph)> = slots.iter().copied().zip(kids.iter()).collect();
            body.substitute_many(&subs).map_err(|e| bad(e.to_string()))
        }
        Rule::B { .. } | Rule::C { .. } => {
            let mut acc = Graph::unit(arity);
            for k in &kids {
                acc = acc.parallel(k).map_err(|e| bad(e.to_string()))?;
            }
            Ok(acc)
        }
    }
}

/// Heads required for the children of a node applying rule `r`.
pub fn derivation_child_heads(g: &Grammar, r: usize) -> Vec<String> {
    match &g.rules[r] {
        Rule::A { body, .. } => g
            .slots(body)
            .into_iter()
            .map(|i| body.edges[i].label.to_string())
            .collect(),
        Rule::B { head, w, q } => std::iter::once(head.clone())
            .chain(std::iter::repeat_n(w.clone(), *q))
            .collect(),
        Rule::C { parts, .. } => parts.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grammar() -> Grammar {
        Grammar {
            alphabet: Alphabet::default(),
            nonterminals: vec![Nonterminal::new("u", 1)],
            rules: vec![Rule::C {
                head: "u".into(),
                parts: vec![],
            }],
            axioms: vec!["u".into()],
        }
    }

    #[test]
    fn valid_unit_grammar() {
        assert!(validate_grammar(&unit_grammar()).is_empty());
    }

    #[test]
    fn undeclared_nonterminal() {
        let mut g = unit_grammar();
        g.rules.push(Rule::C {
            head: "u".into(),
            parts: vec!["x".into()],
        });
        let f = validate_grammar(&g);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].location, Location::Rule(1));
    }

    #[test]
    fn b_rule_arity_mismatch() {
        let mut g = unit_grammar();
        g.nonterminals.push(Nonterminal::new("w", 2));
        g.rules.push(Rule::B {
            head: "u".into(),
            w: "w".into(),
            q: 1,
        });
        assert_eq!(validate_grammar(&g)[0].clause, "arity");
    }

    #[test]
    fn c_rule_zero_parts_is_unit() {
        let g = unit_grammar();
        let h = apply_derivation(&g, &DerivationTree::leaf(0)).unwrap();
        assert_eq!(h, Graph::unit(1));
    }

    #[test]
    fn a_leaf_is_body() {
        let mut g = unit_grammar();
        g.alphabet = Alphabet::new([("a", 1)]);
        let mut body = Graph::unit(1);
        body.add_edge("a", vec![0]);
        g.rules.push(Rule::A {
            head: "u".into(),
            body: body.clone(),
        });
        assert_eq!(
            apply_derivation(&g, &DerivationTree::leaf(1)).unwrap(),
            body
        );
    }
}
