//! Text formats: `.hg` graphs, `.hrg` grammars and `.etd` decompositions.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::decomposition::{EmbeddableTD, EtdMode, NodeKind, TreeDecomposition, TREE_LABEL};
use crate::grammar::{validate_grammar, Grammar, Kind, Nonterminal, Rule};
use crate::hypergraph::{Alphabet, Graph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn perr(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// A parsed `.hg` graph with its identifiers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedGraph {
    pub name: String,
    pub graph: Graph,
    pub vertex_ids: Vec<String>,
    pub edge_ids: Vec<String>,
}

impl NamedGraph {
    pub fn vertex(&self, id: &str) -> Option<u32> {
        self.vertex_ids
            .iter()
            .position(|v| v == id)
            .map(|i| i as u32)
    }

    pub fn edge(&self, id: &str) -> Option<usize> {
        self.edge_ids.iter().position(|v| v == id)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Incremental builder shared by `.hg` files, A-rule bodies and `.etd` backbones.
#[derive(Default)]
struct GraphBuilder {
    graph: Graph,
    vertex_ids: Vec<String>,
    edge_ids: Vec<String>,
    vmap: HashMap<String, u32>,
    used: BTreeSet<String>,
    sources: Vec<Option<u32>>,
}

impl GraphBuilder {
    fn new(type_n: usize) -> Self {
        GraphBuilder {
            sources: vec![None; type_n],
            ..Default::default()
        }
    }

    fn statement(&mut self, line: usize, toks: &[&str]) -> Result<(), ParseError> {
        match toks[0] {
            "vertex" => {
                if toks.len() < 2 {
                    return Err(perr(line, "vertex needs at least one id"));
                }
                for &t in &toks[1..] {
                    if !self.used.insert(t.to_string()) {
                        return Err(perr(line, format!("duplicate id {t}")));
                    }
                    let v = self.graph.add_vertex();
                    self.vmap.insert(t.to_string(), v);
                    self.vertex_ids.push(t.to_string());
                }
            }
            "source" => {
                if toks.len() != 3 {
                    return Err(perr(line, "expected: source <index> <vertex>"));
                }
                let i: usize = toks[1]
                    .parse()
                    .map_err(|_| perr(line, format!("bad source index {}", toks[1])))?;
                if i < 1 || i > self.sources.len() {
                    return Err(perr(
                        line,
                        format!("source index {i} outside [1,{}]", self.sources.len()),
                    ));
                }
                let v = *self
                    .vmap
                    .get(toks[2])
                    .ok_or_else(|| perr(line, format!("unknown vertex {}", toks[2])))?;
                if self.sources[i - 1].is_some() {
                    return Err(perr(line, format!("source {i} given twice")));
                }
                if self.sources.contains(&Some(v)) {
                    return Err(perr(line, "source map not injective"));
                }
                self.sources[i - 1] = Some(v);
            }
            "edge" => {
                if toks.len() < 4 {
                    return Err(perr(line, "expected: edge <id> <label> <vertex>..."));
                }
                if !self.used.insert(toks[1].to_string()) {
                    return Err(perr(line, format!("duplicate id {}", toks[1])));
                }
                let mut att = Vec::new();
                for &t in &toks[3..] {
                    att.push(
                        *self
                            .vmap
                            .get(t)
                            .ok_or_else(|| perr(line, format!("unknown vertex {t}")))?,
                    );
                }
                self.graph.add_edge(toks[2], att);
                self.edge_ids.push(toks[1].to_string());
            }
            other => return Err(perr(line, format!("unknown statement {other}"))),
        }
        Ok(())
    }

    fn finish(mut self, line: usize, name: String) -> Result<NamedGraph, ParseError> {
        let mut srcs = Vec::new();
        for (i, s) in self.sources.iter().enumerate() {
            srcs.push(s.ok_or_else(|| perr(line, format!("source {} missing", i + 1)))?);
        }
        self.graph.sources = srcs;
        Ok(NamedGraph {
            name,
            graph: self.graph,
            vertex_ids: self.vertex_ids,
            edge_ids: self.edge_ids,
        })
    }
}

/// Parse a `.hg` file. Labels are checked for consistent arity, and against
/// `alphabet` when given.
pub fn parse_graph_file(text: &str, alphabet: Option<&Alphabet>) -> Result<NamedGraph, ParseError> {
    let mut builder: Option<(GraphBuilder, String)> = None;
    let mut last = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        last = line;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0] == "graph" {
            if builder.is_some() {
                return Err(perr(line, "second graph header"));
            }
            if toks.len() != 4 || toks[2] != "type" {
                return Err(perr(line, "expected: graph <name> type <n>"));
            }
            let n: usize = toks[3].parse().map_err(|_| perr(line, "bad type"))?;
            builder = Some((GraphBuilder::new(n), toks[1].to_string()));
            continue;
        }
        let Some((b, _)) = builder.as_mut() else {
            return Err(perr(line, "missing graph header"));
        };
        b.statement(line, &toks)?;
    }
    let (b, name) = builder.ok_or_else(|| perr(last.max(1), "missing graph header"))?;
    let ng = b.finish(last, name)?;
    check_labels(&ng.graph, alphabet).map_err(|m| perr(last, m))?;
    Ok(ng)
}

fn check_labels(g: &Graph, alphabet: Option<&Alphabet>) -> Result<(), String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for e in &g.edges {
        if let Some(&k) = seen.get(&*e.label) {
            if k != e.att.len() {
                return Err(format!("arity mismatch for label {}", e.label));
            }
        }
        seen.insert(&e.label, e.att.len());
        if let Some(a) = alphabet {
            match a.arity(&e.label) {
                None => return Err(format!("unknown label {}", e.label)),
                Some(k) if k != e.att.len() => {
                    return Err(format!("arity mismatch for label {}", e.label))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn print_graph(name: &str, g: &Graph) -> String {
    let mut s = String::new();
    writeln!(s, "graph {name} type {}", g.type_n()).unwrap();
    if g.n_vertices > 0 {
        let vs: Vec<String> = (0..g.n_vertices).map(|v| format!("v{v}")).collect();
        writeln!(s, "vertex {}", vs.join(" ")).unwrap();
    }
    for (i, &v) in g.sources.iter().enumerate() {
        writeln!(s, "source {} v{v}", i + 1).unwrap();
    }
    for (i, e) in g.edges.iter().enumerate() {
        let att: Vec<String> = e.att.iter().map(|v| format!("v{v}")).collect();
        writeln!(s, "edge e{i} {} {}", e.label, att.join(" ")).unwrap();
    }
    s
}

/// Parse a `.hrg` grammar file; the result passes `validate_grammar`.
pub fn parse_grammar_file(text: &str) -> Result<Grammar, ParseError> {
    let mut g = Grammar::default();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = i + 1;
        let content = strip_comment(lines[i]).trim().to_string();
        i += 1;
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "alphabet" => {
                for t in &toks[1..] {
                    let (name, k) = t
                        .split_once(':')
                        .ok_or_else(|| perr(line, format!("expected label:arity, got {t}")))?;
                    let k: usize = k
                        .parse()
                        .map_err(|_| perr(line, format!("bad arity in {t}")))?;
                    if g.alphabet.labels.insert(name.to_string(), k).is_some() {
                        return Err(perr(line, format!("label {name} declared twice")));
                    }
                }
            }
            "nonterminal" => g.nonterminals.push(parse_nonterminal(line, &toks)?),
            "axiom" => {
                if toks.len() < 2 {
                    return Err(perr(line, "axiom needs a nonterminal"));
                }
                g.axioms.extend(toks[1..].iter().map(|s| s.to_string()));
            }
            "rule" => {
                if toks.len() < 4 || toks[3] != "->" {
                    return Err(perr(line, "expected: rule <A|B|C> <head> -> ..."));
                }
                let head = toks[2].to_string();
                match toks[1] {
                    "C" => g.rules.push(Rule::C {
                        head,
                        parts: toks[4..].iter().map(|s| s.to_string()).collect(),
                    }),
                    "B" => {
                        if toks.len() != 6 || toks[4] != head {
                            return Err(perr(line, "expected: rule B u -> u w^q"));
                        }
                        let (w, q) = toks[5].split_once('^').unwrap_or((toks[5], "1"));
                        let q: usize = q
                            .parse()
                            .map_err(|_| perr(line, format!("bad exponent in {}", toks[5])))?;
                        g.rules.push(Rule::B {
                            head,
                            w: w.to_string(),
                            q,
                        });
                    }
                    "A" => {
                        // Body may span several lines up to the closing brace.
                        let mut body = content
                            .split_once("->")
                            .map(|x| x.1)
                            .unwrap_or("")
                            .trim()
                            .to_string();
                        while !body.contains('}') {
                            if i >= lines.len() {
                                return Err(perr(line, "unterminated rule body"));
                            }
                            body.push(';');
                            body.push_str(strip_comment(lines[i]));
                            i += 1;
                        }
                        let arity = g.nt(&head).map(|n| n.arity).ok_or_else(|| {
                            perr(line, format!("rule head {head} must be declared first"))
                        })?;
                        let graph = parse_body(line, &body, arity)?;
                        g.rules.push(Rule::A { head, body: graph });
                    }
                    f => return Err(perr(line, format!("unknown rule form {f}"))),
                }
            }
            other => return Err(perr(line, format!("unknown statement {other}"))),
        }
    }
    if let Some(f) = validate_grammar(&g).first() {
        return Err(perr(lines.len().max(1), f.to_string()));
    }
    Ok(g)
}

fn parse_nonterminal(line: usize, toks: &[&str]) -> Result<Nonterminal, ParseError> {
    if toks.len() < 4 || toks[2] != "arity" {
        return Err(perr(
            line,
            "expected: nonterminal <name> arity <k> [kind W|N] [root i] [fut i,j]",
        ));
    }
    let arity: usize = toks[3].parse().map_err(|_| perr(line, "bad arity"))?;
    let mut nt = Nonterminal::new(toks[1], arity);
    let mut k = 4;
    while k < toks.len() {
        let val = toks
            .get(k + 1)
            .ok_or_else(|| perr(line, format!("{} needs a value", toks[k])))?;
        match toks[k] {
            "kind" => {
                nt.kind = Some(match *val {
                    "W" => Kind::W,
                    "N" => Kind::N,
                    v => return Err(perr(line, format!("kind must be W or N, got {v}"))),
                })
            }
            "root" => nt.root = Some(val.parse().map_err(|_| perr(line, "bad root"))?),
            "fut" => {
                if *val != "-" {
                    for f in val.split(',') {
                        nt.fut.insert(
                            f.parse()
                                .map_err(|_| perr(line, format!("bad fut entry {f}")))?,
                        );
                    }
                }
            }
            o => return Err(perr(line, format!("unknown nonterminal attribute {o}"))),
        }
        k += 2;
    }
    Ok(nt)
}

fn parse_body(line: usize, text: &str, arity: usize) -> Result<Graph, ParseError> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.trim_end().strip_suffix('}'))
        .ok_or_else(|| perr(line, "rule body must be enclosed in { }"))?;
    let mut b = GraphBuilder::new(arity);
    for stmt in inner.split([';', '\n']) {
        let toks: Vec<&str> = stmt.split_whitespace().collect();
        if !toks.is_empty() {
            b.statement(line, &toks)?;
        }
    }
    Ok(b.finish(line, String::new())?.graph)
}

fn body_text(g: &Graph) -> String {
    let mut parts = Vec::new();
    if g.n_vertices > 0 {
        let vs: Vec<String> = (0..g.n_vertices).map(|v| format!("v{v}")).collect();
        parts.push(format!("vertex {}", vs.join(" ")));
    }
    for (i, &v) in g.sources.iter().enumerate() {
        parts.push(format!("source {} v{v}", i + 1));
    }
    for (i, e) in g.edges.iter().enumerate() {
        let att: Vec<String> = e.att.iter().map(|v| format!("v{v}")).collect();
        parts.push(format!("edge e{i} {} {}", e.label, att.join(" ")));
    }
    format!("{{ {} }}", parts.join("; "))
}

pub fn print_grammar(g: &Grammar) -> String {
    let mut s = String::new();
    if !g.alphabet.labels.is_empty() {
        let a: Vec<String> = g.alphabet.iter().map(|(l, k)| format!("{l}:{k}")).collect();
        writeln!(s, "alphabet {}", a.join(" ")).unwrap();
    }
    for n in &g.nonterminals {
        write!(s, "nonterminal {} arity {}", n.name, n.arity).unwrap();
        if let Some(k) = n.kind {
            write!(s, " kind {}", if k == Kind::W { "W" } else { "N" }).unwrap();
        }
        if let Some(r) = n.root {
            write!(s, " root {r}").unwrap();
        }
        if !n.fut.is_empty() {
            let f: Vec<String> = n.fut.iter().map(|x| x.to_string()).collect();
            write!(s, " fut {}", f.join(",")).unwrap();
        }
        s.push('\n');
    }
    for a in &g.axioms {
        writeln!(s, "axiom {a}").unwrap();
    }
    for r in &g.rules {
        match r {
            Rule::A { head, body } => writeln!(s, "rule A {head} -> {}", body_text(body)).unwrap(),
            Rule::B { head, w, q } => writeln!(s, "rule B {head} -> {head} {w}^{q}").unwrap(),
            Rule::C { head, parts } => {
                if parts.is_empty() {
                    writeln!(s, "rule C {head} ->").unwrap()
                } else {
                    writeln!(s, "rule C {head} -> {}", parts.join(" ")).unwrap()
                }
            }
        }
    }
    s
}

/// A parsed `.etd` file. `kinds` is `None` for plain tree decompositions
/// (no `gamma`/`delta`/`wnode` lines at all).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedDecomposition {
    pub name: String,
    pub td: TreeDecomposition,
    pub kinds: Option<Vec<NodeKind>>,
    pub mode: Option<EtdMode>,
}

impl ParsedDecomposition {
    pub fn embeddable(&self) -> Option<EmbeddableTD> {
        let kinds = self.kinds.clone()?;
        Some(EmbeddableTD {
            base: self.td.clone(),
            kinds,
            mode: self.mode.clone(),
        })
    }
}

/// Parse a `.etd` file. Vertex and edge ids refer to `subject`.
pub fn parse_etd(text: &str, subject: &NamedGraph) -> Result<ParsedDecomposition, ParseError> {
    let mut backbone: Option<(GraphBuilder, String)> = None;
    let mut extra: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut last = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        last = line;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            "graph" => {
                if backbone.is_some() {
                    return Err(perr(line, "second graph header"));
                }
                if toks.len() != 4 || toks[2] != "type" || toks[3] != "0" {
                    return Err(perr(line, "expected: graph <name> type 0"));
                }
                backbone = Some((GraphBuilder::new(0), toks[1].to_string()));
            }
            "vertex" | "edge" | "source" => {
                let Some((b, _)) = backbone.as_mut() else {
                    return Err(perr(line, "missing graph header"));
                };
                b.statement(line, &toks)?;
            }
            "wnode" | "bag" | "gamma" | "delta" | "mode" => extra.push((line, toks)),
            other => return Err(perr(line, format!("unknown statement {other}"))),
        }
    }
    let (b, name) = backbone.ok_or_else(|| perr(last.max(1), "missing graph header"))?;
    let nb = b.finish(last, name)?;
    let n = nb.graph.n_vertices as usize;
    let mut parent = vec![None; n];
    for (i, e) in nb.graph.edges.iter().enumerate() {
        if &*e.label != TREE_LABEL || e.att.len() != 2 {
            return Err(perr(
                last,
                format!(
                    "backbone edge {} must be `{TREE_LABEL} parent child`",
                    nb.edge_ids[i]
                ),
            ));
        }
        let c = e.att[1] as usize;
        if parent[c].is_some() {
            return Err(perr(
                last,
                format!("node {} has two parents", nb.vertex_ids[c]),
            ));
        }
        parent[c] = Some(e.att[0] as usize);
    }
    let node = |line: usize, t: &str| {
        nb.vertex(t)
            .map(|v| v as usize)
            .ok_or_else(|| perr(line, format!("unknown node {t}")))
    };
    let vertex = |line: usize, t: &str| {
        subject
            .vertex(t)
            .ok_or_else(|| perr(line, format!("unknown vertex {t}")))
    };
    let mut bags = vec![BTreeSet::new(); n];
    let mut w = vec![false; n];
    let mut gamma: Vec<Option<u32>> = vec![None; n];
    let mut delta: Vec<Option<usize>> = vec![None; n];
    let mut mode = None;
    let mut any_kind = false;
    for (line, toks) in extra {
        let arity = |k: usize| {
            if toks.len() == k {
                Ok(())
            } else {
                Err(perr(line, format!("malformed {} line", toks[0])))
            }
        };
        match toks[0] {
            "wnode" => {
                if toks.len() < 2 {
                    return Err(perr(line, "wnode needs at least one node"));
                }
                for &t in &toks[1..] {
                    w[node(line, t)?] = true;
                }
                any_kind = true;
            }
            "bag" => {
                if toks.len() < 2 {
                    return Err(perr(line, "expected: bag <node> <vertex>..."));
                }
                let u = node(line, toks[1])?;
                for &t in &toks[2..] {
                    bags[u].insert(vertex(line, t)?);
                }
            }
            "gamma" => {
                arity(3)?;
                let u = node(line, toks[1])?;
                if gamma[u].replace(vertex(line, toks[2])?).is_some() {
                    return Err(perr(line, format!("gamma of {} given twice", toks[1])));
                }
                any_kind = true;
            }
            "delta" => {
                arity(3)?;
                let u = node(line, toks[1])?;
                let e = subject
                    .edge(toks[2])
                    .ok_or_else(|| perr(line, format!("unknown edge {}", toks[2])))?;
                if delta[u].replace(e).is_some() {
                    return Err(perr(line, format!("delta of {} given twice", toks[1])));
                }
                any_kind = true;
            }
            _ => {
                if mode.is_some() {
                    return Err(perr(line, "mode given twice"));
                }
                mode = Some(parse_mode(line, &toks)?);
            }
        }
    }
    let kinds = if any_kind {
        let mut ks = Vec::with_capacity(n);
        for u in 0..n {
            let id = &nb.vertex_ids[u];
            ks.push(match (w[u], gamma[u], delta[u]) {
                (true, None, Some(e)) => NodeKind::Edge(e),
                (false, Some(v), None) => NodeKind::Vertex(v),
                (true, _, _) => {
                    return Err(perr(
                        last,
                        format!("W-node {id} needs exactly a delta line"),
                    ))
                }
                (false, _, _) => {
                    return Err(perr(last, format!("node {id} needs exactly a gamma line")))
                }
            });
        }
        Some(ks)
    } else {
        None
    };
    if mode.is_some() && kinds.is_none() {
        return Err(perr(last, "mode data without node kinds"));
    }
    Ok(ParsedDecomposition {
        name: nb.name,
        td: TreeDecomposition { parent, bags },
        kinds,
        mode,
    })
}

fn parse_mode(line: usize, toks: &[&str]) -> Result<EtdMode, ParseError> {
    if toks.len() != 7 || toks[1] != "z" || toks[3] != "pi" || toks[5] != "pointed" {
        return Err(perr(
            line,
            "expected: mode z <i> pi <i,...|-> pointed <bool>",
        ));
    }
    let idx = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| perr(line, format!("bad index {t}")))
    };
    let z = idx(toks[2])?;
    let pi = if toks[4] == "-" {
        BTreeSet::new()
    } else {
        toks[4].split(',').map(idx).collect::<Result<_, _>>()?
    };
    let pointed = toks[6]
        .parse()
        .map_err(|_| perr(line, format!("bad bool {}", toks[6])))?;
    Ok(EtdMode { z, pi, pointed })
}

/// Print a decomposition; subject vertices and edges are named `v<i>`/`e<i>`
/// as in [`print_graph`], backbone nodes `n<i>`.
pub fn print_etd(
    name: &str,
    td: &TreeDecomposition,
    kinds: Option<&[NodeKind]>,
    mode: Option<&EtdMode>,
) -> String {
    write_etd(name, td, kinds, mode, &|v| format!("v{v}"), &|e| {
        format!("e{e}")
    })
}

/// Print a decomposition of `subject` using its own vertex and edge ids.
pub fn print_etd_for(
    subject: &NamedGraph,
    td: &TreeDecomposition,
    kinds: Option<&[NodeKind]>,
    mode: Option<&EtdMode>,
) -> String {
    let v = |i: u32| subject.vertex_ids[i as usize].clone();
    let e = |i: usize| subject.edge_ids[i].clone();
    write_etd(&subject.name, td, kinds, mode, &v, &e)
}

fn write_etd(
    name: &str,
    td: &TreeDecomposition,
    kinds: Option<&[NodeKind]>,
    mode: Option<&EtdMode>,
    vname: &dyn Fn(u32) -> String,
    ename: &dyn Fn(usize) -> String,
) -> String {
    let mut s = String::new();
    writeln!(s, "graph {name} type 0").unwrap();
    if !td.is_empty() {
        let ns: Vec<String> = (0..td.len()).map(|i| format!("n{i}")).collect();
        writeln!(s, "vertex {}", ns.join(" ")).unwrap();
    }
    let mut t = 0;
    for (c, p) in td.parent.iter().enumerate() {
        if let Some(p) = p {
            writeln!(s, "edge t{t} {TREE_LABEL} n{p} n{c}").unwrap();
            t += 1;
        }
    }
    if let Some(ks) = kinds {
        let ws: Vec<String> = (0..ks.len())
            .filter(|&i| matches!(ks[i], NodeKind::Edge(_)))
            .map(|i| format!("n{i}"))
            .collect();
        if !ws.is_empty() {
            writeln!(s, "wnode {}", ws.join(" ")).unwrap();
        }
    }
    for (i, b) in td.bags.iter().enumerate() {
        let vs: Vec<String> = b.iter().map(|&v| format!(" {}", vname(v))).collect();
        writeln!(s, "bag n{i}{}", vs.concat()).unwrap();
    }
    if let Some(ks) = kinds {
        for (i, k) in ks.iter().enumerate() {
            match k {
                NodeKind::Vertex(v) => writeln!(s, "gamma n{i} {}", vname(*v)).unwrap(),
                NodeKind::Edge(e) => writeln!(s, "delta n{i} {}", ename(*e)).unwrap(),
            }
        }
    }
    if let Some(m) = mode {
        let pi: Vec<String> = m.pi.iter().map(|i| i.to_string()).collect();
        let pi = if pi.is_empty() {
            "-".to_string()
        } else {
            pi.join(",")
        };
        writeln!(s, "mode z {} pi {pi} pointed {}", m.z, m.pointed).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::canonical_code;

    #[test]
    fn single_edge_file() {
        let g = parse_graph_file("graph t type 0\nvertex a b c\nedge e x a b c\n", None).unwrap();
        assert_eq!(g.graph.n_vertices, 3);
        assert_eq!(g.graph.edges.len(), 1);
        assert_eq!(g.graph.edges[0].att, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_vertex_reports_line() {
        let e = parse_graph_file("graph t type 0\nvertex a b\nvertex a\n", None).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn graph_round_trip() {
        let text =
            "graph t type 1\nvertex x y z # three\nsource 1 y\nedge f a x y\nedge g b y z x\n";
        let g = parse_graph_file(text, None).unwrap();
        let back = parse_graph_file(&print_graph("t", &g.graph), None).unwrap();
        assert_eq!(canonical_code(&g.graph), canonical_code(&back.graph));
    }

    #[test]
    fn grammar_b_exponent() {
        let g = parse_grammar_file(
            "alphabet a:1\nnonterminal u arity 1\nnonterminal w arity 1\nrule B u -> u w^3\nrule A w -> { vertex x; source 1 x; edge e a x }\n",
        )
        .unwrap();
        assert_eq!(
            g.rules[0],
            Rule::B {
                head: "u".into(),
                w: "w".into(),
                q: 3
            }
        );
    }

    #[test]
    fn multiline_body() {
        let g = parse_grammar_file(
            "alphabet a:2\nnonterminal u arity 1\naxiom u\nrule A u -> {\n  vertex x y\n  source 1 x\n  edge e a x y\n}\nrule C u ->\n",
        )
        .unwrap();
        assert_eq!(g.rules.len(), 2);
        let again = parse_grammar_file(&print_grammar(&g)).unwrap();
        assert_eq!(print_grammar(&again), print_grammar(&g));
    }

    #[test]
    fn etd_round_trip() {
        use crate::decomposition::{etw_exact, validate_etd};
        let subject = parse_graph_file(
            "graph p type 0\nvertex v0 v1 v2\nedge e0 a v0 v1\nedge e1 a v1 v2\n",
            None,
        )
        .unwrap();
        let (_, etd) = etw_exact(&subject.graph).unwrap().unwrap();
        let text = print_etd("d", &etd.base, Some(&etd.kinds), None);
        let back = parse_etd(&text, &subject).unwrap();
        assert_eq!(back.embeddable().unwrap(), etd);
        assert!(validate_etd(&subject.graph, &back.embeddable().unwrap()).is_valid());
        assert_eq!(print_etd("d", &back.td, back.kinds.as_deref(), None), text);
        let mode = EtdMode {
            z: 1,
            pi: [2, 3].into(),
            pointed: true,
        };
        let text = print_etd("d", &etd.base, Some(&etd.kinds), Some(&mode));
        assert_eq!(parse_etd(&text, &subject).unwrap().mode, Some(mode));
    }

    #[test]
    fn etd_errors() {
        let subject =
            parse_graph_file("graph p type 0\nvertex v0 v1\nedge e0 a v0 v1\n", None).unwrap();
        let base = "graph d type 0\nvertex n0 n1\nedge t0 __tree n0 n1\n";
        assert!(parse_etd(&format!("{base}bag n0 v9\n"), &subject)
            .unwrap_err()
            .message
            .contains("unknown vertex"));
        assert!(parse_etd(&format!("{base}wnode n1\ngamma n0 v0\n"), &subject).is_err());
        let plain = parse_etd(&format!("{base}bag n0 v0 v1\nbag n1 v1\n"), &subject).unwrap();
        assert!(plain.kinds.is_none());
        assert_eq!(plain.td.parent, vec![None, Some(0)]);
        assert!(parse_etd("graph d type 0\nvertex n0\nedge t0 x n0 n0\n", &subject).is_err());
    }
}
