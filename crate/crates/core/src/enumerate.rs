//! Bounded least-fixpoint enumeration of grammar languages.
//!
//! Semi-naive Kleene iteration: each round combines at least one graph found
//! in the previous round. Sizes never shrink under substitution or parallel
//! composition, so anything above the bound can be dropped.

use std::collections::{BTreeMap, HashMap};

use crate::grammar::{validate_grammar, DerivationTree, Grammar, GrammarError, Rule};
use crate::hypergraph::{canonical_code, CanonicalCode, Graph};

/// What to enumerate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Root {
    /// ⌊L(Γ,u)⌋ unioned over the axioms u.
    Axioms,
    Nonterminal(String),
}

#[derive(Clone, Debug)]
pub struct Member {
    pub graph: Graph,
    pub derivation: DerivationTree,
    /// Nonterminal whose language produced this member.
    pub origin: String,
}

/// Enumerated members keyed (and ordered) by canonical code.
#[derive(Clone, Debug, Default)]
pub struct Language {
    pub members: BTreeMap<CanonicalCode, Member>,
}

impl Language {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, g: &Graph) -> bool {
        self.members.contains_key(&canonical_code(g))
    }

    pub fn codes(&self) -> impl Iterator<Item = &CanonicalCode> {
        self.members.keys()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.members.values().map(|m| &m.graph)
    }
}

struct Entry {
    graph: Graph,
    size: usize,
    rule: usize,
    kids: Vec<(usize, usize)>,
}

enum Combine {
    A {
        body: Graph,
        slots: Vec<usize>,
        base: usize,
        arities: Vec<usize>,
    },
    Par {
        arity: usize,
    },
}

struct RuleSpec {
    head: usize,
    comps: Vec<usize>,
    combine: Combine,
}

/// Per-nonterminal languages up to a size bound.
pub struct Enumeration {
    names: Vec<String>,
    entries: Vec<Vec<Entry>>,
    index: Vec<HashMap<CanonicalCode, usize>>,
    pub rounds: usize,
}

impl Enumeration {
    pub fn run(g: &Grammar, bound: usize) -> Result<Self, GrammarError> {
        Self::run_rounds(g, bound, usize::MAX)
    }

    /// Run at most `max_rounds` Kleene rounds (for fixpoint checks).
    pub fn run_rounds(g: &Grammar, bound: usize, max_rounds: usize) -> Result<Self, GrammarError> {
        let findings = validate_grammar(g);
        if let Some(f) = findings.first() {
            return Err(GrammarError::Invalid(f.to_string()));
        }
        let names: Vec<String> = g.nonterminals.iter().map(|n| n.name.clone()).collect();
        let idx: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut specs = Vec::new();
        for (ri, r) in g.rules.iter().enumerate() {
            let head = idx[r.head()];
            let arity = g.nonterminals[head].arity;
            let spec = match r {
                Rule::A { body, .. } => {
                    let slots = g.slots(body);
                    let comps: Vec<usize> =
                        slots.iter().map(|&s| idx[&*body.edges[s].label]).collect();
                    let arities = comps.iter().map(|&c| g.nonterminals[c].arity).collect();
                    RuleSpec {
                        head,
                        comps,
                        combine: Combine::A {
                            base: body.size() - slots.len(),
                            body: body.clone(),
                            slots,
                            arities,
                        },
                    }
                }
                Rule::B { q: 0, .. } => continue,
                Rule::B { w, q, .. } => {
                    let mut comps = vec![head];
                    comps.extend(std::iter::repeat_n(idx[w.as_str()], *q));
                    RuleSpec {
                        head,
                        comps,
                        combine: Combine::Par { arity },
                    }
                }
                Rule::C { parts, .. } => RuleSpec {
                    head,
                    comps: parts.iter().map(|p| idx[p.as_str()]).collect(),
                    combine: Combine::Par { arity },
                },
            };
            specs.push((ri, spec));
        }
        let n = names.len();
        let mut en = Enumeration {
            names,
            entries: (0..n).map(|_| Vec::new()).collect(),
            index: (0..n).map(|_| HashMap::new()).collect(),
            rounds: 0,
        };
        let mut old = vec![0usize; n];
        let mut first = true;
        while en.rounds < max_rounds {
            let full: Vec<usize> = en.entries.iter().map(|e| e.len()).collect();
            let mut found = Vec::new();
            for (ri, spec) in &specs {
                if first {
                    if spec.comps.is_empty() {
                        en.emit(*ri, spec, &[], bound, &mut found);
                    }
                    continue;
                }
                for j in 0..spec.comps.len() {
                    let ranges: Vec<(usize, usize)> = spec
                        .comps
                        .iter()
                        .enumerate()
                        .map(|(p, &c)| match p.cmp(&j) {
                            std::cmp::Ordering::Less => (0, old[c]),
                            std::cmp::Ordering::Equal => (old[c], full[c]),
                            std::cmp::Ordering::Greater => (0, full[c]),
                        })
                        .collect();
                    if ranges.iter().any(|&(a, b)| a >= b) {
                        continue;
                    }
                    en.combos(*ri, spec, &ranges, bound, &mut found);
                }
            }
            first = false;
            old = full;
            let mut added = false;
            for (head, graph, size, rule, kids) in found {
                let code = canonical_code(&graph);
                if let std::collections::hash_map::Entry::Vacant(v) = en.index[head].entry(code) {
                    v.insert(en.entries[head].len());
                    en.entries[head].push(Entry {
                        graph,
                        size,
                        rule,
                        kids,
                    });
                    added = true;
                }
            }
            en.rounds += 1;
            if !added && en.entries.iter().zip(&old).all(|(e, &o)| e.len() == o) {
                break;
            }
        }
        Ok(en)
    }

    #[allow(clippy::type_complexity)]
    fn combos(
        &self,
        ri: usize,
        spec: &RuleSpec,
        ranges: &[(usize, usize)],
        bound: usize,
        found: &mut Vec<(usize, Graph, usize, usize, Vec<(usize, usize)>)>,
    ) {
        let m = spec.comps.len();
        let mut pick = vec![0usize; m];
        let base = match &spec.combine {
            Combine::A { base, .. } => *base,
            Combine::Par { arity } => *arity,
        };
        self.combos_rec(ri, spec, ranges, bound, 0, base, &mut pick, found);
    }

    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    fn combos_rec(
        &self,
        ri: usize,
        spec: &RuleSpec,
        ranges: &[(usize, usize)],
        bound: usize,
        p: usize,
        size: usize,
        pick: &mut Vec<usize>,
        found: &mut Vec<(usize, Graph, usize, usize, Vec<(usize, usize)>)>,
    ) {
        if size > bound {
            return;
        }
        if p == spec.comps.len() {
            self.emit(ri, spec, pick, bound, found);
            return;
        }
        let c = spec.comps[p];
        let sub = match &spec.combine {
            Combine::A { arities, .. } => arities[p],
            Combine::Par { arity } => *arity,
        };
        for i in ranges[p].0..ranges[p].1 {
            let s = self.entries[c][i].size;
            pick[p] = i;
            self.combos_rec(ri, spec, ranges, bound, p + 1, size + s - sub, pick, found);
        }
    }

    #[allow(clippy::type_complexity)]
    fn emit(
        &self,
        ri: usize,
        spec: &RuleSpec,
        pick: &[usize],
        bound: usize,
        found: &mut Vec<(usize, Graph, usize, usize, Vec<(usize, usize)>)>,
    ) {
        let kids: Vec<(usize, usize)> =
            spec.comps.iter().zip(pick).map(|(&c, &i)| (c, i)).collect();
        let graph = match &spec.combine {
            Combine::A { body, slots, .. } => {
                let subs: Vec<(usize, &Graph)> = slots
                    .iter()
                    .zip(&kids)
                    .map(|(&s, &(c, i))| (s, &self.entries[c][i].graph))
                    .collect();
                body.substitute_many(&subs).expect("validated grammar")
            }
            Combine::Par { arity } => {
                let mut it = kids.iter();
                match it.next() {
                    None => Graph::unit(*arity),
                    Some(&(c, i)) => {
                        let mut acc = self.entries[c][i].graph.clone();
                        for &(c, i) in it {
                            acc = acc
                                .parallel(&self.entries[c][i].graph)
                                .expect("validated grammar");
                        }
                        acc
                    }
                }
            }
        };
        let size = graph.size();
        if size <= bound {
            found.push((spec.head, graph, size, ri, kids));
        }
    }

    fn derivation(&self, nt: usize, i: usize) -> DerivationTree {
        let e = &self.entries[nt][i];
        DerivationTree {
            rule: e.rule,
            children: e.kids.iter().map(|&(c, j)| self.derivation(c, j)).collect(),
        }
    }

    /// L(Γ,u) up to the bound.
    pub fn language_of(&self, name: &str) -> Result<Language, GrammarError> {
        let nt = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| GrammarError::UnknownNonterminal(name.to_string()))?;
        let mut out = Language::default();
        for (code, &i) in &self.index[nt] {
            let e = &self.entries[nt][i];
            out.members.insert(
                code.clone(),
                Member {
                    graph: e.graph.clone(),
                    derivation: self.derivation(nt, i),
                    origin: name.to_string(),
                },
            );
        }
        Ok(out)
    }

    /// ⌊L(Γ,u)⌋ unioned over `axioms`; the first axiom (in order) that
    /// produces a graph supplies its witness.
    pub fn stripped_union(&self, axioms: &[String]) -> Result<Language, GrammarError> {
        let mut out = Language::default();
        for a in axioms {
            let lang = self.language_of(a)?;
            let mut batch: Vec<(CanonicalCode, Member)> = lang
                .members
                .into_values()
                .map(|mut m| {
                    m.graph = m.graph.strip_sources();
                    (canonical_code(&m.graph), m)
                })
                .collect();
            batch.sort_by(|x, y| x.0.cmp(&y.0));
            for (c, m) in batch {
                out.members.entry(c).or_insert(m);
            }
        }
        Ok(out)
    }

    pub fn count(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .map_or(0, |i| self.entries[i].len())
    }
}

pub fn enumerate_language(
    g: &Grammar,
    root: &Root,
    bound: usize,
) -> Result<Language, GrammarError> {
    let en = Enumeration::run(g, bound)?;
    match root {
        Root::Axioms => en.stripped_union(&g.axioms),
        Root::Nonterminal(u) => en.language_of(u),
    }
}

/// Decide `g ∈ L(Γ)` for a type-0 graph, with a witness derivation.
pub fn membership(gr: &Grammar, g: &Graph) -> Result<Option<DerivationTree>, GrammarError> {
    let lang = enumerate_language(gr, &Root::Axioms, g.size())?;
    Ok(lang
        .members
        .get(&canonical_code(&g.strip_sources()))
        .map(|m| m.derivation.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::grammar::{apply_derivation, Nonterminal};
    use crate::hypergraph::Alphabet;

    fn cycle(n: u32) -> Graph {
        let mut g = Graph::with_vertices(n);
        for i in 0..n {
            g.add_edge("a", vec![i, (i + 1) % n]);
        }
        g
    }

    #[test]
    fn tll_bound_4_is_single_edge() {
        let g = assets::grammar("tll").unwrap();
        let l = enumerate_language(&g, &Root::Axioms, 4).unwrap();
        assert_eq!(l.len(), 1);
        let m = l.members.values().next().unwrap();
        assert_eq!(m.graph.n_vertices, 3);
        assert_eq!(m.graph.edges.len(), 1);
        assert_eq!(m.derivation.node_count(), 1);
    }

    #[test]
    fn unit_only_grammar() {
        let g = Grammar {
            alphabet: Alphabet::default(),
            nonterminals: vec![Nonterminal::new("u", 1)],
            rules: vec![Rule::C {
                head: "u".into(),
                parts: vec![],
            }],
            axioms: vec!["u".into()],
        };
        let l = enumerate_language(&g, &Root::Axioms, 5).unwrap();
        assert_eq!(l.len(), 1);
        assert!(l.contains(&Graph::with_vertices(1)));
    }

    #[test]
    fn cycles_bound_8() {
        let g = assets::grammar("cycles").unwrap();
        let l = enumerate_language(&g, &Root::Axioms, 8).unwrap();
        let want: std::collections::BTreeSet<_> =
            (2..=4).map(|n| canonical_code(&cycle(n))).collect();
        assert_eq!(
            l.codes()
                .cloned()
                .collect::<std::collections::BTreeSet<_>>(),
            want
        );
    }

    #[test]
    fn tll_smallest_member_and_non_member() {
        let g = assets::grammar("tll").unwrap();
        let t = membership(&g, &Graph::single_edge("a", 3).strip_sources())
            .unwrap()
            .unwrap();
        assert_eq!(t.node_count(), 1);
        assert!(membership(&g, &Graph::with_vertices(1)).unwrap().is_none());
    }

    #[test]
    fn witnesses_replay() {
        for name in ["tv-tll", "cycles", "series-chain", "rtree-ab"] {
            let g = assets::grammar(name).unwrap();
            let l = enumerate_language(&g, &Root::Axioms, 10).unwrap();
            for (code, m) in &l.members {
                let h = apply_derivation(&g, &m.derivation).unwrap().strip_sources();
                assert_eq!(&canonical_code(&h), code, "{name}");
                assert!(h.validate(&|x| g.arity_of(x)).is_empty());
            }
        }
    }

    #[test]
    fn extra_round_adds_nothing() {
        for name in ["series-chain", "multi-b-35", "tv-tll"] {
            let g = assets::grammar(name).unwrap();
            let en = Enumeration::run(&g, 10).unwrap();
            let more = Enumeration::run_rounds(&g, 10, en.rounds + 1).unwrap();
            for n in &g.nonterminals {
                assert_eq!(en.count(&n.name), more.count(&n.name));
            }
        }
    }

    #[test]
    fn monotone_in_bound() {
        let g = assets::grammar("series-chain").unwrap();
        let small = enumerate_language(&g, &Root::Axioms, 7).unwrap();
        let big = enumerate_language(&g, &Root::Axioms, 9).unwrap();
        assert!(small.codes().all(|c| big.members.contains_key(c)));
        assert!(big.len() > small.len());
    }

    #[test]
    fn types_match_root() {
        let g = assets::grammar("tv-tll").unwrap();
        let l = enumerate_language(&g, &Root::Nonterminal("u".into()), 12).unwrap();
        assert!(l.graphs().all(|h| h.type_n() == 3));
    }
}
