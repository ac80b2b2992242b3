//! Finite-model evaluation of CMSO formulas over type-0 graphs.
//!
//! Formulas are compiled once into an arena. Elements are numbered with the
//! vertices first (`0..|V|`) and the edges after them, so every set is a
//! 64-bit mask. Second-order blocks are decided by a backtracking search over
//! partial set assignments evaluated in three-valued logic; nested blocks are
//! memoised on the values of their free variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use super::formula::Formula;
use crate::hypergraph::Graph;

/// Largest supported |V|+|E|.
pub const DOMAIN_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0} is free in the formula but not assigned")]
    UnboundVariable(String),
    #[error("label {label} has arity {graph} in the graph but is used with {formula} attachments")]
    UnknownLabel {
        label: String,
        graph: usize,
        formula: usize,
    },
    #[error("graph has type {0}, expected 0")]
    NotTypeZero(usize),
    #[error("|V|+|E| = {0} exceeds the evaluator cap of {DOMAIN_CAP}")]
    DomainTooLarge(usize),
    #[error("valuation element {0} is not in the graph")]
    NoSuchElement(String),
}

/// A vertex or an edge of the subject graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Elem {
    V(u32),
    E(usize),
}

/// Assignment of the free variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    pub fo: BTreeMap<String, Elem>,
    pub so: BTreeMap<String, BTreeSet<Elem>>,
}

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fo(mut self, x: &str, e: Elem) -> Self {
        self.fo.insert(x.into(), e);
        self
    }

    pub fn with_so(mut self, x: &str, s: impl IntoIterator<Item = Elem>) -> Self {
        self.so.insert(x.into(), s.into_iter().collect());
        self
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tv {
    F,
    U,
    T,
}

impl Tv {
    fn of(b: bool) -> Tv {
        if b {
            Tv::T
        } else {
            Tv::F
        }
    }

    fn neg(self) -> Tv {
        match self {
            Tv::F => Tv::T,
            Tv::U => Tv::U,
            Tv::T => Tv::F,
        }
    }
}

type Id = usize;
type Slot = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum GAtom {
    /// Elements at the positions `xpos` of label edges whose `bound`
    /// positions carry the given variables.
    Edg {
        label: u32,
        xpos: Vec<usize>,
        bound: Vec<(usize, Slot)>,
    },
    Eq(Slot),
    In(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Guard {
    Atom(GAtom),
    Inter(Vec<Guard>),
    Union(Vec<Guard>),
    Compl(Box<Guard>),
    /// A guard that depends on the graph only, computed once per graph.
    Fixed(u32),
}

impl Guard {
    fn is_fixed(&self) -> bool {
        match self {
            Guard::Atom(GAtom::Edg { bound, .. }) => bound.is_empty(),
            Guard::Atom(_) => false,
            Guard::Inter(gs) | Guard::Union(gs) => gs.iter().all(Guard::is_fixed),
            Guard::Compl(g) => g.is_fixed(),
            Guard::Fixed(_) => true,
        }
    }
}

#[derive(Debug, Clone)]
struct Preset {
    set: Slot,
    var: Slot,
    /// Value forced on the elements where every `rest` conjunct holds.
    value: bool,
    rest: Vec<Id>,
}

#[derive(Debug, Clone)]
enum Node {
    Const(bool),
    Eq(Slot, Slot),
    Edg {
        label: u32,
        args: Vec<Slot>,
    },
    Card {
        set: Slot,
        q: usize,
        p: usize,
    },
    In {
        set: Slot,
        var: Slot,
    },
    Not(Id),
    And(Vec<Id>),
    Or(Vec<Id>),
    ExistsFo {
        var: Slot,
        body: Id,
        guard: Option<Guard>,
    },
    ExistsSo {
        vars: Vec<Slot>,
        body: Id,
        presets: Vec<Preset>,
        excl: Vec<(Slot, Slot)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Memo {
    No,
    /// First-order only, at most two free variables: per-graph table.
    Table,
    Hash,
}

/// A compiled formula, reusable across graphs and threads.
#[derive(Debug, Clone)]
pub struct Checker {
    nodes: Vec<Node>,
    free_fo: Vec<Vec<Slot>>,
    free_so: Vec<Vec<Slot>>,
    memo: Vec<Memo>,
    fixed: Vec<Guard>,
    root: Id,
    fo_names: Vec<String>,
    so_names: Vec<String>,
    labels: Vec<(String, usize)>,
}

struct Compiler {
    nodes: Vec<Node>,
    free_fo: Vec<Vec<Slot>>,
    free_so: Vec<Vec<Slot>>,
    seen: HashMap<(*const Formula, bool), Id>,
    fo: HashMap<String, Slot>,
    so: HashMap<String, Slot>,
    labels: HashMap<(String, usize), u32>,
    fixed: HashMap<Guard, u32>,
    // Keeps the source DAG alive so pointer keys stay unique.
    _hold: Vec<Arc<Formula>>,
}

fn union(a: &[Slot], b: &[Slot]) -> Vec<Slot> {
    let mut v: Vec<Slot> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl Compiler {
    fn fo_slot(&mut self, x: &str) -> Slot {
        let n = self.fo.len() as Slot;
        *self.fo.entry(x.to_string()).or_insert(n)
    }

    fn so_slot(&mut self, x: &str) -> Slot {
        let n = self.so.len() as Slot;
        *self.so.entry(x.to_string()).or_insert(n)
    }

    fn push(&mut self, n: Node) -> Id {
        let (fo, so) = match &n {
            Node::Const(_) => (vec![], vec![]),
            Node::Eq(a, b) => (union(&[*a], &[*b]), vec![]),
            Node::Edg { args, .. } => (union(args, &[]), vec![]),
            Node::Card { set, .. } => (vec![], vec![*set]),
            Node::In { set, var } => (vec![*var], vec![*set]),
            Node::Not(c) => (self.free_fo[*c].clone(), self.free_so[*c].clone()),
            Node::And(cs) | Node::Or(cs) => {
                let mut fo = vec![];
                let mut so = vec![];
                for &c in cs {
                    fo = union(&fo, &self.free_fo[c]);
                    so = union(&so, &self.free_so[c]);
                }
                (fo, so)
            }
            Node::ExistsFo { var, body, .. } => {
                let fo = self.free_fo[*body]
                    .iter()
                    .copied()
                    .filter(|v| v != var)
                    .collect();
                (fo, self.free_so[*body].clone())
            }
            Node::ExistsSo { vars, body, .. } => {
                let so = self.free_so[*body]
                    .iter()
                    .copied()
                    .filter(|v| !vars.contains(v))
                    .collect();
                (self.free_fo[*body].clone(), so)
            }
        };
        self.nodes.push(n);
        self.free_fo.push(fo);
        self.free_so.push(so);
        self.nodes.len() - 1
    }

    /// Compile `f`, negated when `neg` holds.
    fn compile(&mut self, f: &Arc<Formula>, neg: bool) -> Id {
        let key = (Arc::as_ptr(f), neg);
        if let Some(&id) = self.seen.get(&key) {
            return id;
        }
        self._hold.push(f.clone());
        let id = match (&**f, neg) {
            (Formula::Not(g), _) => self.compile(g, !neg),
            (Formula::And(..), _) => {
                let mut parts = Vec::new();
                let mut stack = vec![f.clone()];
                while let Some(h) = stack.pop() {
                    match &*h {
                        Formula::And(a, b) => {
                            stack.push(b.clone());
                            stack.push(a.clone());
                        }
                        _ => parts.push(h),
                    }
                }
                let ids: Vec<Id> = parts.iter().map(|p| self.compile(p, neg)).collect();
                if neg {
                    self.push(Node::Or(ids))
                } else {
                    self.push(Node::And(ids))
                }
            }
            (_, true) => {
                let c = self.compile(f, false);
                if let Node::Or(cs) = &self.nodes[c] {
                    // ¬(a ∨ b) is compiled as a conjunction of negations.
                    let cs = cs.clone();
                    let ids: Vec<Id> = cs.iter().map(|&c| self.negate(c)).collect();
                    self.push(Node::And(ids))
                } else {
                    self.push(Node::Not(c))
                }
            }
            (Formula::Eq(x, y), false) => {
                let (a, b) = (self.fo_slot(x), self.fo_slot(y));
                if a == b {
                    self.push(Node::Const(true))
                } else {
                    self.push(Node::Eq(a, b))
                }
            }
            (Formula::Edg { label, args }, false) => {
                let n = self.labels.len() as u32;
                let l = *self
                    .labels
                    .entry((label.clone(), args.len() - 1))
                    .or_insert(n);
                let args = args.iter().map(|a| self.fo_slot(a)).collect();
                self.push(Node::Edg { label: l, args })
            }
            (Formula::Card { set, q, p }, false) => {
                let set = self.so_slot(set);
                self.push(Node::Card { set, q: *q, p: *p })
            }
            (Formula::In { set, var }, false) => {
                let (set, var) = (self.so_slot(set), self.fo_slot(var));
                self.push(Node::In { set, var })
            }
            (Formula::ExistsFo(x, body), false) => {
                let var = self.fo_slot(x);
                let body = self.compile(body, false);
                let guard = guard_of(&self.nodes, body, var, &mut vec![], &mut vec![])
                    .map(|g| self.fix(g.0));
                self.push(Node::ExistsFo { var, body, guard })
            }
            (Formula::ExistsSo(..), false) => {
                let mut vars = Vec::new();
                let mut cur = f.clone();
                while let Formula::ExistsSo(x, b) = &*cur {
                    let s = self.so_slot(x);
                    if vars.contains(&s) {
                        break;
                    }
                    vars.push(s);
                    let next = b.clone();
                    cur = next;
                }
                let body = self.compile(&cur, false);
                let (presets, excl) = self.block_patterns(&vars, body);
                self.push(Node::ExistsSo {
                    vars,
                    body,
                    presets,
                    excl,
                })
            }
        };
        self.seen.insert(key, id);
        id
    }

    /// Replace graph-only subguards by table lookups.
    fn fix(&mut self, g: Guard) -> Guard {
        if g.is_fixed() {
            let n = self.fixed.len() as u32;
            return Guard::Fixed(*self.fixed.entry(g).or_insert(n));
        }
        match g {
            Guard::Inter(gs) => Guard::Inter(gs.into_iter().map(|g| self.fix(g)).collect()),
            Guard::Union(gs) => Guard::Union(gs.into_iter().map(|g| self.fix(g)).collect()),
            Guard::Compl(g) => Guard::Compl(Box::new(self.fix(*g))),
            g => g,
        }
    }

    fn negate(&mut self, c: Id) -> Id {
        match &self.nodes[c] {
            Node::Not(d) => *d,
            Node::Const(b) => {
                let b = !*b;
                self.push(Node::Const(b))
            }
            _ => self.push(Node::Not(c)),
        }
    }

    /// Top-level conjuncts `∀x. X(x) → Φ(x)` with Φ free of block variables,
    /// and pairwise exclusions `∀x. ¬(X(x) ∧ Y(x))`.
    fn block_patterns(&self, vars: &[Slot], body: Id) -> (Vec<Preset>, Vec<(Slot, Slot)>) {
        let conj: Vec<Id> = match &self.nodes[body] {
            Node::And(cs) => cs.clone(),
            _ => vec![body],
        };
        let mut presets = Vec::new();
        let mut excl = Vec::new();
        for c in conj {
            let Node::Not(inner) = &self.nodes[c] else {
                continue;
            };
            let Node::ExistsFo { var, body: b, .. } = &self.nodes[*inner] else {
                continue;
            };
            let parts: Vec<Id> = match &self.nodes[*b] {
                Node::And(cs) => cs.clone(),
                _ => vec![*b],
            };
            let lit = |p: Id| -> Option<(Slot, bool)> {
                match &self.nodes[p] {
                    Node::In { set, var: v } if v == var && vars.contains(set) => {
                        Some((*set, true))
                    }
                    Node::Not(q) => match &self.nodes[*q] {
                        Node::In { set, var: v } if v == var && vars.contains(set) => {
                            Some((*set, false))
                        }
                        _ => None,
                    },
                    _ => None,
                }
            };
            let ins: Vec<(usize, Slot, bool)> = parts
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| lit(p).map(|(s, b)| (i, s, b)))
                .collect();
            if ins.len() == 2 && parts.len() == 2 && ins[0].2 && ins[1].2 {
                excl.push((ins[0].1, ins[1].1));
                continue;
            }
            if ins.len() != 1 {
                continue;
            }
            let (i, set, positive) = ins[0];
            let rest: Vec<Id> = parts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| p)
                .collect();
            if rest
                .iter()
                .any(|&r| self.free_so[r].iter().any(|s| vars.contains(s)))
            {
                continue;
            }
            presets.push(Preset {
                set,
                var: *var,
                value: !positive,
                rest,
            });
        }
        (presets, excl)
    }
}

/// Candidate values for `x` that can make `n` true; `bool` marks an exact
/// characterisation.
fn guard_of(
    nodes: &[Node],
    n: Id,
    x: Slot,
    wild: &mut Vec<Slot>,
    wild_so: &mut Vec<Slot>,
) -> Option<(Guard, bool)> {
    match &nodes[n] {
        Node::Const(false) => Some((Guard::Union(vec![]), true)),
        Node::Const(true) | Node::Card { .. } => None,
        Node::Eq(a, b) => {
            let other = if *a == x {
                *b
            } else if *b == x {
                *a
            } else {
                return None;
            };
            if wild.contains(&other) {
                return None;
            }
            Some((Guard::Atom(GAtom::Eq(other)), true))
        }
        Node::Edg { label, args } => {
            let xpos: Vec<usize> = (0..args.len()).filter(|&i| args[i] == x).collect();
            if xpos.is_empty() {
                return None;
            }
            let bound: Vec<(usize, Slot)> = (0..args.len())
                .filter(|&i| args[i] != x && !wild.contains(&args[i]))
                .map(|i| (i, args[i]))
                .collect();
            let mut others: Vec<Slot> = args.iter().copied().filter(|&a| a != x).collect();
            let n_others = others.len();
            others.sort_unstable();
            others.dedup();
            let exact = xpos.len() == 1 && bound.is_empty() && others.len() == n_others;
            Some((
                Guard::Atom(GAtom::Edg {
                    label: *label,
                    xpos,
                    bound,
                }),
                exact,
            ))
        }
        Node::In { set, var } => {
            if *var != x || wild_so.contains(set) {
                return None;
            }
            Some((Guard::Atom(GAtom::In(*set)), false))
        }
        Node::Not(c) => match guard_of(nodes, *c, x, wild, wild_so) {
            Some((g, true)) => Some((Guard::Compl(Box::new(g)), true)),
            _ => None,
        },
        Node::And(cs) => {
            let mut gs = Vec::new();
            let mut exact = true;
            for &c in cs {
                match guard_of(nodes, c, x, wild, wild_so) {
                    Some((g, e)) => {
                        exact &= e;
                        gs.push(g);
                    }
                    None => exact = false,
                }
            }
            if gs.is_empty() {
                None
            } else if gs.len() == 1 {
                Some((gs.pop().unwrap(), exact))
            } else {
                Some((Guard::Inter(gs), exact))
            }
        }
        Node::Or(cs) => {
            let mut gs = Vec::new();
            let mut exact = true;
            for &c in cs {
                let (g, e) = guard_of(nodes, c, x, wild, wild_so)?;
                exact &= e;
                gs.push(g);
            }
            Some((Guard::Union(gs), exact))
        }
        Node::ExistsFo { var, body, .. } => {
            if *var == x {
                return None;
            }
            wild.push(*var);
            let r = guard_of(nodes, *body, x, wild, wild_so);
            wild.pop();
            r
        }
        Node::ExistsSo { vars, body, .. } => {
            let k = wild_so.len();
            wild_so.extend(vars);
            let r = guard_of(nodes, *body, x, wild, wild_so);
            wild_so.truncate(k);
            r
        }
    }
}

impl Checker {
    pub fn new(f: &Arc<Formula>) -> Checker {
        let mut c = Compiler {
            nodes: vec![],
            free_fo: vec![],
            free_so: vec![],
            seen: HashMap::new(),
            fo: HashMap::new(),
            so: HashMap::new(),
            labels: HashMap::new(),
            fixed: HashMap::new(),
            _hold: vec![],
        };
        let root = c.compile(f, false);
        let memo = c
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let pure = c.free_so[i].is_empty();
                let small = (1..=2).contains(&c.free_fo[i].len());
                match n {
                    Node::ExistsSo { .. } => Memo::Hash,
                    Node::ExistsFo { .. } | Node::Or(_) | Node::And(_) if pure && small => {
                        Memo::Table
                    }
                    Node::ExistsFo { .. } if pure => Memo::Hash,
                    _ => Memo::No,
                }
            })
            .collect();
        let mut fixed = vec![Guard::Union(vec![]); c.fixed.len()];
        for (g, i) in c.fixed {
            fixed[i as usize] = g;
        }
        let mut fo_names = vec![String::new(); c.fo.len()];
        for (k, v) in c.fo {
            fo_names[v as usize] = k;
        }
        let mut so_names = vec![String::new(); c.so.len()];
        for (k, v) in c.so {
            so_names[v as usize] = k;
        }
        let mut labels = vec![(String::new(), 0); c.labels.len()];
        for (k, v) in c.labels {
            labels[v as usize] = k;
        }
        Checker {
            nodes: c.nodes,
            free_fo: c.free_fo,
            free_so: c.free_so,
            memo,
            fixed,
            root,
            fo_names,
            so_names,
            labels,
        }
    }

    /// Number of compiled nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, g: &Graph, v: &Valuation) -> Result<bool, EvalError> {
        let mut st = State::new(self, g)?;
        for &s in &self.free_fo[self.root] {
            let name = &self.fo_names[s as usize];
            let e =
                v.fo.get(name)
                    .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            st.fo[s as usize] = st.elem_id(*e)?;
        }
        for &s in &self.free_so[self.root] {
            let name = &self.so_names[s as usize];
            let set =
                v.so.get(name)
                    .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            let mut m = 0u64;
            for e in set {
                m |= 1 << st.elem_id(*e)?;
            }
            st.known[s as usize] = st.all;
            st.val[s as usize] = m;
        }
        Ok(match st.eval(self.root) {
            Tv::T => true,
            Tv::F => false,
            Tv::U => unreachable!("all free variables are assigned"),
        })
    }
}

/// Evaluate `f` on `g` under `v`.
pub fn eval(g: &Graph, f: &Arc<Formula>, v: &Valuation) -> Result<bool, EvalError> {
    Checker::new(f).eval(g, v)
}

const NONE: u32 = u32::MAX;

#[derive(Clone)]
struct Item {
    node: Id,
    var: Slot,
    value: u32,
    neg: bool,
}

struct Search {
    rank: Vec<u32>,
    hint: Option<(u32, Slot, u32)>,
}

struct State<'a> {
    c: &'a Checker,
    nv: u32,
    all: u64,
    /// Per edge: formula label index (or NONE) and attachments.
    edges: Vec<(u32, &'a [u32])>,
    /// Per element: adjacent elements in the incidence graph.
    adj: Vec<u64>,
    fo: Vec<u32>,
    known: Vec<u64>,
    val: Vec<u64>,
    size: u32,
    memo: HashMap<Vec<u64>, bool>,
    /// Per node: offset into `pool` (or NONE) for `Memo::Table` nodes.
    table: Vec<u32>,
    /// 0 unknown, 1 false, 2 true.
    pool: Vec<u8>,
    fixed: Vec<u64>,
    search: Option<Search>,
}

impl<'a> State<'a> {
    fn new(c: &'a Checker, g: &'a Graph) -> Result<State<'a>, EvalError> {
        if g.type_n() != 0 {
            return Err(EvalError::NotTypeZero(g.type_n()));
        }
        let n = g.size();
        if n > DOMAIN_CAP {
            return Err(EvalError::DomainTooLarge(n));
        }
        let nv = g.n_vertices;
        let mut edges = Vec::with_capacity(g.edges.len());
        let mut adj = vec![0u64; n];
        for (i, e) in g.edges.iter().enumerate() {
            let mut l = NONE;
            for (j, (name, k)) in c.labels.iter().enumerate() {
                if **name == *e.label {
                    if *k != e.att.len() {
                        return Err(EvalError::UnknownLabel {
                            label: name.clone(),
                            graph: e.att.len(),
                            formula: *k,
                        });
                    }
                    l = j as u32;
                }
            }
            edges.push((l, e.att.as_slice()));
            let id = nv as usize + i;
            for &v in &e.att {
                adj[id] |= 1 << v;
                adj[v as usize] |= 1 << id;
            }
        }
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut st = State {
            c,
            nv,
            all,
            edges,
            adj,
            fo: vec![NONE; c.fo_names.len()],
            known: vec![0; c.so_names.len()],
            val: vec![0; c.so_names.len()],
            size: n as u32,
            memo: HashMap::new(),
            table: vec![NONE; c.nodes.len()],
            pool: Vec::new(),
            fixed: Vec::with_capacity(c.fixed.len()),
            search: None,
        };
        for g in &c.fixed {
            let m = st.guard(g);
            st.fixed.push(m);
        }
        Ok(st)
    }

    fn elem_id(&self, e: Elem) -> Result<u32, EvalError> {
        match e {
            Elem::V(v) if v < self.nv => Ok(v),
            Elem::E(i) if i < self.edges.len() => Ok(self.nv + i as u32),
            _ => Err(EvalError::NoSuchElement(format!("{e:?}"))),
        }
    }

    fn note(&mut self, set: Slot, elem: u32) {
        if let Some(s) = &mut self.search {
            let key = (s.rank[elem as usize], set, elem);
            if s.hint.is_none_or(|h| key < h) {
                s.hint = Some(key);
            }
        }
    }

    fn guard(&self, g: &Guard) -> u64 {
        match g {
            Guard::Atom(GAtom::Eq(s)) => 1 << self.fo[*s as usize],
            Guard::Atom(GAtom::In(s)) => {
                let s = *s as usize;
                (self.known[s] & self.val[s]) | (!self.known[s] & self.all)
            }
            Guard::Atom(GAtom::Edg { label, xpos, bound }) => {
                let mut out = 0u64;
                for (i, &(l, att)) in self.edges.iter().enumerate() {
                    if l != *label {
                        continue;
                    }
                    let at = |p: usize| {
                        if p == 0 {
                            self.nv + i as u32
                        } else {
                            att[p - 1]
                        }
                    };
                    if bound.iter().any(|&(p, s)| at(p) != self.fo[s as usize]) {
                        continue;
                    }
                    let x = at(xpos[0]);
                    if xpos[1..].iter().all(|&p| at(p) == x) {
                        out |= 1 << x;
                    }
                }
                out
            }
            Guard::Inter(gs) => gs.iter().fold(self.all, |m, g| m & self.guard(g)),
            Guard::Union(gs) => gs.iter().fold(0, |m, g| m | self.guard(g)),
            Guard::Compl(g) => self.all & !self.guard(g),
            Guard::Fixed(i) => self.fixed[*i as usize],
        }
    }

    fn memo_key(&self, n: Id) -> Vec<u64> {
        let mut k = Vec::with_capacity(1 + self.c.free_fo[n].len() + self.c.free_so[n].len());
        k.push(n as u64);
        k.extend(
            self.c.free_fo[n]
                .iter()
                .map(|&s| self.fo[s as usize] as u64),
        );
        k.extend(self.c.free_so[n].iter().map(|&s| self.val[s as usize]));
        k
    }

    fn eval(&mut self, n: Id) -> Tv {
        if self.c.memo[n] != Memo::Table {
            return self.eval_node(n);
        }
        let vars = &self.c.free_fo[n];
        let mut idx = self.fo[vars[0] as usize];
        if vars.len() == 2 {
            idx = idx * self.size + self.fo[vars[1] as usize];
        }
        let mut base = self.table[n];
        if base == NONE {
            base = self.pool.len() as u32;
            let len = self.size.pow(vars.len() as u32) as usize;
            self.pool.resize(self.pool.len() + len, 0);
            self.table[n] = base;
        }
        let at = (base + idx) as usize;
        match self.pool[at] {
            1 => Tv::F,
            2 => Tv::T,
            _ => {
                let r = self.eval_node(n);
                if r != Tv::U {
                    self.pool[at] = if r == Tv::T { 2 } else { 1 };
                }
                r
            }
        }
    }

    fn eval_node(&mut self, n: Id) -> Tv {
        let c = self.c;
        match &c.nodes[n] {
            Node::Const(b) => Tv::of(*b),
            Node::Eq(a, b) => Tv::of(self.fo[*a as usize] == self.fo[*b as usize]),
            Node::Edg { label, args } => {
                let e = self.fo[args[0] as usize];
                if e < self.nv {
                    return Tv::F;
                }
                let (l, att) = self.edges[(e - self.nv) as usize];
                Tv::of(
                    l == *label
                        && att
                            .iter()
                            .zip(&args[1..])
                            .all(|(&v, &s)| self.fo[s as usize] == v),
                )
            }
            Node::In { set, var } => {
                let (s, x) = (*set as usize, self.fo[*var as usize]);
                if self.known[s] >> x & 1 == 1 {
                    Tv::of(self.val[s] >> x & 1 == 1)
                } else {
                    self.note(*set, x);
                    Tv::U
                }
            }
            Node::Card { set, q, p } => {
                let s = *set as usize;
                let lo = (self.known[s] & self.val[s]).count_ones() as usize;
                let unk = self.all & !self.known[s];
                let hi = lo + unk.count_ones() as usize;
                let ok = |m: usize| {
                    if *q == 0 {
                        m == *p
                    } else {
                        m >= *p && (m - *p).is_multiple_of(*q)
                    }
                };
                let any = (lo..=hi).any(ok);
                let every = (lo..=hi).all(ok);
                if !any {
                    Tv::F
                } else if every {
                    Tv::T
                } else {
                    if let Some(srch) = &self.search {
                        let best = (0..64)
                            .filter(|&i| unk >> i & 1 == 1)
                            .min_by_key(|&i| srch.rank[i]);
                        if let Some(b) = best {
                            self.note(*set, b as u32);
                        }
                    }
                    Tv::U
                }
            }
            Node::Not(c) => self.eval(*c).neg(),
            Node::And(cs) => {
                let mut r = Tv::T;
                for &ch in cs {
                    match self.eval(ch) {
                        Tv::F => return Tv::F,
                        Tv::U => r = Tv::U,
                        Tv::T => {}
                    }
                }
                r
            }
            Node::Or(cs) => {
                let mut r = Tv::F;
                for &ch in cs {
                    match self.eval(ch) {
                        Tv::T => return Tv::T,
                        Tv::U => r = Tv::U,
                        Tv::F => {}
                    }
                }
                r
            }
            Node::ExistsFo { var, body, guard } => {
                let key = if c.memo[n] == Memo::Hash {
                    let k = self.memo_key(n);
                    if let Some(&b) = self.memo.get(&k) {
                        return Tv::of(b);
                    }
                    Some(k)
                } else {
                    None
                };
                let cands = guard.as_ref().map_or(self.all, |g| self.guard(g)) & self.all;
                let slot = *var as usize;
                let saved = self.fo[slot];
                let mut r = Tv::F;
                let mut m = cands;
                while m != 0 {
                    let d = m.trailing_zeros();
                    m &= m - 1;
                    self.fo[slot] = d;
                    match self.eval(*body) {
                        Tv::T => {
                            r = Tv::T;
                            break;
                        }
                        Tv::U => r = Tv::U,
                        Tv::F => {}
                    }
                }
                self.fo[slot] = saved;
                if let Some(k) = key {
                    if r != Tv::U {
                        self.memo.insert(k, r == Tv::T);
                    }
                }
                r
            }
            Node::ExistsSo {
                vars,
                body,
                presets,
                excl,
            } => {
                if c.free_so[n]
                    .iter()
                    .any(|&s| self.known[s as usize] != self.all)
                {
                    return Tv::U;
                }
                let key = self.memo_key(n);
                if let Some(&b) = self.memo.get(&key) {
                    return Tv::of(b);
                }
                let r = self.block(n, vars, *body, presets, excl);
                self.memo.insert(key, r);
                Tv::of(r)
            }
        }
    }

    fn block(
        &mut self,
        n: Id,
        vars: &[Slot],
        body: Id,
        presets: &[Preset],
        excl: &[(Slot, Slot)],
    ) -> bool {
        let saved: Vec<(u64, u64)> = vars
            .iter()
            .map(|&s| (self.known[s as usize], self.val[s as usize]))
            .collect();
        for &s in vars {
            self.known[s as usize] = 0;
            self.val[s as usize] = 0;
        }
        let mut ok = true;
        for p in presets {
            let slot = p.var as usize;
            let keep = self.fo[slot];
            let mut forbid = 0u64;
            for d in 0..(self.all.count_ones()) {
                self.fo[slot] = d;
                if p.rest.iter().all(|&r| self.eval(r) == Tv::T) {
                    forbid |= 1 << d;
                }
            }
            self.fo[slot] = keep;
            let s = p.set as usize;
            let clash = if p.value { !self.val[s] } else { self.val[s] };
            if self.known[s] & clash & forbid != 0 {
                ok = false;
            }
            self.known[s] |= forbid;
            if p.value {
                self.val[s] |= forbid;
            }
        }
        let res = ok && {
            let rank = self.ranks(n);
            let outer = self.search.replace(Search { rank, hint: None });
            let items = self.items(body);
            let r = self.dfs(vars, &items, excl);
            self.search = outer;
            r
        };
        for (&s, &(k, v)) in vars.iter().zip(&saved) {
            self.known[s as usize] = k;
            self.val[s as usize] = v;
        }
        res
    }

    /// Breadth-first ranks over the incidence graph from the free first-order values.
    fn ranks(&self, n: Id) -> Vec<u32> {
        let size = self.all.count_ones() as usize;
        let mut rank = vec![u32::MAX; 64];
        let mut frontier = 0u64;
        for &s in &self.c.free_fo[n] {
            let v = self.fo[s as usize];
            if v != NONE {
                frontier |= 1 << v;
            }
        }
        let mut next = 0u32;
        let mut seen = 0u64;
        loop {
            if frontier == 0 {
                let rest = self.all & !seen;
                if rest == 0 {
                    break;
                }
                frontier = 1 << rest.trailing_zeros();
            }
            seen |= frontier;
            let mut grow = 0u64;
            let mut m = frontier;
            while m != 0 {
                let d = m.trailing_zeros() as usize;
                m &= m - 1;
                rank[d] = next;
                next += 1;
                grow |= self.adj[d];
            }
            frontier = grow & !seen & self.all;
        }
        debug_assert!(rank[..size].iter().all(|&r| r != u32::MAX));
        rank
    }

    /// Top-level conjuncts of a block body; universally quantified conjuncts
    /// are instantiated per candidate element.
    fn items(&mut self, body: Id) -> Vec<Item> {
        let c = self.c;
        let conj: &[Id] = match &c.nodes[body] {
            Node::And(cs) => cs,
            _ => std::slice::from_ref(&body),
        };
        let mut out = Vec::new();
        for &ch in conj {
            if let Node::Not(inner) = &c.nodes[ch] {
                if let Node::ExistsFo {
                    var,
                    body: b,
                    guard,
                } = &c.nodes[*inner]
                {
                    let mut m = guard.as_ref().map_or(self.all, |g| self.guard(g)) & self.all;
                    while m != 0 {
                        let d = m.trailing_zeros();
                        m &= m - 1;
                        out.push(Item {
                            node: *b,
                            var: *var,
                            value: d,
                            neg: true,
                        });
                    }
                    continue;
                }
            }
            out.push(Item {
                node: ch,
                var: NONE,
                value: 0,
                neg: false,
            });
        }
        out
    }

    fn eval_item(&mut self, it: &Item) -> Tv {
        if it.var == NONE {
            return self.eval(it.node);
        }
        let slot = it.var as usize;
        let saved = self.fo[slot];
        self.fo[slot] = it.value;
        let r = self.eval(it.node);
        self.fo[slot] = saved;
        if it.neg {
            r.neg()
        } else {
            r
        }
    }

    fn dfs(&mut self, vars: &[Slot], items: &[Item], excl: &[(Slot, Slot)]) -> bool {
        if let Some(s) = &mut self.search {
            s.hint = None;
        }
        let mut open = Vec::with_capacity(items.len());
        for it in items {
            match self.eval_item(it) {
                Tv::F => return false,
                Tv::U => open.push(it.clone()),
                Tv::T => {}
            }
        }
        if open.is_empty() {
            return true;
        }
        let hint = self.search.as_ref().and_then(|s| s.hint);
        let (set, elem) = match hint {
            Some((_, s, e)) if vars.contains(&s) && self.known[s as usize] >> e & 1 == 0 => (s, e),
            _ => match self.first_unknown(vars) {
                Some(p) => p,
                None => return false,
            },
        };
        let s = set as usize;
        let bit = 1u64 << elem;
        let (k0, v0) = (self.known[s], self.val[s]);
        // True branch, with exclusive partners forced false.
        let mut partners: Vec<(usize, u64, u64)> = Vec::new();
        let mut clash = false;
        for &(a, b) in excl {
            let other = if a == set {
                b
            } else if b == set {
                a
            } else {
                continue;
            } as usize;
            if other == s {
                continue;
            }
            partners.push((other, self.known[other], self.val[other]));
            if self.known[other] & self.val[other] & bit != 0 {
                clash = true;
            }
            self.known[other] |= bit;
            self.val[other] &= !bit;
        }
        self.known[s] |= bit;
        self.val[s] |= bit;
        let found = !clash && self.dfs(vars, &open, excl);
        for (o, k, v) in partners.into_iter().rev() {
            self.known[o] = k;
            self.val[o] = v;
        }
        if found {
            self.known[s] = k0;
            self.val[s] = v0;
            return true;
        }
        self.val[s] = v0;
        let r = self.dfs(vars, &open, excl);
        self.known[s] = k0;
        self.val[s] = v0;
        r
    }

    fn first_unknown(&self, vars: &[Slot]) -> Option<(Slot, u32)> {
        let rank = &self.search.as_ref()?.rank;
        let mut best: Option<(u32, Slot, u32)> = None;
        for &s in vars {
            let mut m = self.all & !self.known[s as usize];
            while m != 0 {
                let d = m.trailing_zeros();
                m &= m - 1;
                let key = (rank[d as usize], s, d);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, s, d)| (s, d))
    }
}

#[cfg(test)]
mod tests {
    use super::super::formula::*;
    use super::*;
    use crate::hypergraph::Alphabet;

    fn brute(
        g: &Graph,
        f: &Formula,
        fo: &mut HashMap<String, u32>,
        so: &mut HashMap<String, u64>,
    ) -> bool {
        let nv = g.n_vertices;
        let n = g.size() as u32;
        match f {
            Formula::Eq(x, y) => fo[x] == fo[y],
            Formula::Edg { label, args } => {
                let e = fo[&args[0]];
                if e < nv {
                    return false;
                }
                let ed = &g.edges[(e - nv) as usize];
                *ed.label == **label
                    && ed.att.len() + 1 == args.len()
                    && ed.att.iter().zip(&args[1..]).all(|(v, a)| fo[a] == *v)
            }
            Formula::Card { set, q, p } => {
                let m = so[set].count_ones() as usize;
                if *q == 0 {
                    m == *p
                } else {
                    m >= *p && (m - p).is_multiple_of(*q)
                }
            }
            Formula::In { set, var } => so[set] >> fo[var] & 1 == 1,
            Formula::Not(h) => !brute(g, h, fo, so),
            Formula::And(a, b) => brute(g, a, fo, so) && brute(g, b, fo, so),
            Formula::ExistsFo(x, b) => {
                let old = fo.get(x).copied();
                let r = (0..n).any(|d| {
                    fo.insert(x.clone(), d);
                    brute(g, b, fo, so)
                });
                match old {
                    Some(o) => fo.insert(x.clone(), o),
                    None => fo.remove(x),
                };
                r
            }
            Formula::ExistsSo(x, b) => {
                let old = so.get(x).copied();
                let r = (0..1u64 << n).any(|m| {
                    so.insert(x.clone(), m);
                    brute(g, b, fo, so)
                });
                match old {
                    Some(o) => so.insert(x.clone(), o),
                    None => so.remove(x),
                };
                r
            }
        }
    }

    fn two_edges() -> Graph {
        let mut g = Graph::with_vertices(3);
        g.add_edge("a", vec![0, 1]);
        g.add_edge("a", vec![2, 2]);
        g
    }

    #[test]
    fn exists_vertex_on_single_vertex() {
        let al = Alphabet::new([("a", 2)]);
        let f = exists_in("x", Dom::V, &al, tt());
        assert!(eval(&Graph::with_vertices(1), &f, &Valuation::new()).unwrap());
        assert!(!eval(&Graph::with_vertices(0), &f, &Valuation::new()).unwrap());
    }

    #[test]
    fn card_mod_counts() {
        let g = Graph::with_vertices(4);
        let f = card("X", 2, 1);
        let three = Valuation::new().with_so("X", (0..3).map(Elem::V));
        let four = Valuation::new().with_so("X", (0..4).map(Elem::V));
        assert!(eval(&g, &f, &three).unwrap());
        assert!(!eval(&g, &f, &four).unwrap());
        assert!(eval(&g, &card("X", 0, 4), &four).unwrap());
        assert!(!eval(&g, &card("X", 3, 5), &three).unwrap());
    }

    #[test]
    fn edge_atom_truth_table() {
        let g = two_edges();
        let f = edg("a", &["e", "x", "y"]);
        let ch = Checker::new(&f);
        let elems: Vec<Elem> = (0..3).map(Elem::V).chain((0..2).map(Elem::E)).collect();
        for &e in &elems {
            for &x in &elems {
                for &y in &elems {
                    let v = Valuation::new()
                        .with_fo("e", e)
                        .with_fo("x", x)
                        .with_fo("y", y);
                    let direct = match (e, x, y) {
                        (Elem::E(i), Elem::V(a), Elem::V(b)) => g.edges[i].att == vec![a, b],
                        _ => false,
                    };
                    assert_eq!(ch.eval(&g, &v).unwrap(), direct, "{e:?} {x:?} {y:?}");
                }
            }
        }
    }

    #[test]
    fn errors() {
        let g = two_edges();
        assert!(matches!(
            eval(&g, &eq("x", "y"), &Valuation::new()),
            Err(EvalError::UnboundVariable(_))
        ));
        assert!(matches!(
            eval(
                &g,
                &exists("e", edg("a", &["e", "x"])),
                &Valuation::new().with_fo("x", Elem::V(0))
            ),
            Err(EvalError::UnknownLabel { .. })
        ));
        assert!(matches!(
            eval(&Graph::unit(1), &tt(), &Valuation::new()),
            Err(EvalError::NotTypeZero(1))
        ));
        assert!(eval(
            &g,
            &eq("x", "y"),
            &Valuation::new()
                .with_fo("x", Elem::V(9))
                .with_fo("y", Elem::V(0))
        )
        .is_err());
    }

    #[test]
    fn second_order_examples() {
        let al = Alphabet::new([("a", 2)]);
        let g = two_edges();
        // An even number of vertices exists as a subset of V.
        let f = exists_subset("X", Dom::V, &al, card("X", 0, 2));
        assert!(eval(&g, &f, &Valuation::new()).unwrap());
        let f = exists_subset("X", Dom::E, &al, card("X", 0, 3));
        assert!(!eval(&g, &f, &Valuation::new()).unwrap());
        // Some set containing vertex 0 and closed under a-edges, missing vertex 2.
        let closed = forall(
            "e",
            forall(
                "x",
                forall(
                    "y",
                    implies(
                        and(edg("a", &["e", "x", "y"]), mem("R", "x")),
                        mem("R", "y"),
                    ),
                ),
            ),
        );
        let f = exists_so("R", and_all([mem("R", "v"), closed, not(mem("R", "w"))]));
        let v = Valuation::new()
            .with_fo("v", Elem::V(0))
            .with_fo("w", Elem::V(2));
        assert!(eval(&g, &f, &v).unwrap());
        let v = Valuation::new()
            .with_fo("v", Elem::V(0))
            .with_fo("w", Elem::V(1));
        assert!(!eval(&g, &f, &v).unwrap());
    }

    use proptest::prelude::*;

    fn arb_formula(depth: u32) -> BoxedStrategy<F> {
        let fo = prop::sample::select(vec!["x", "y", "z"]);
        let so = prop::sample::select(vec!["X", "Y"]);
        let leaf = prop_oneof![
            (fo.clone(), fo.clone()).prop_map(|(a, b)| eq(a, b)),
            (fo.clone(), fo.clone(), fo.clone()).prop_map(|(e, a, b)| edg("a", &[e, a, b])),
            (so.clone(), fo.clone()).prop_map(|(s, x)| mem(s, x)),
            (so.clone(), 0usize..3, 0usize..3).prop_map(|(s, q, p)| card(s, q, p)),
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

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1u32..4, prop::collection::vec((0u32..3, 0u32..3), 0..3)).prop_map(|(nv, es)| {
            let mut g = Graph::with_vertices(nv);
            for (a, b) in es {
                g.add_edge("a", vec![a % nv, b % nv]);
            }
            g
        })
    }

    fn close(f: F) -> F {
        let f = ["x", "y", "z"].iter().fold(f, |f, x| exists(x, f));
        ["X", "Y"].iter().fold(f, |f, x| exists_so(x, f))
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 300,
            rng_seed: proptest::test_runner::RngSeed::Fixed(7),
            failure_persistence: None,
            ..ProptestConfig::default()
        })]

        #[test]
        fn matches_naive_semantics(f in arb_formula(3), g in arb_graph()) {
            let f = close(f);
            let want = brute(&g, &f, &mut HashMap::new(), &mut HashMap::new());
            prop_assert_eq!(eval(&g, &f, &Valuation::new()).unwrap(), want);
        }

        #[test]
        fn negation_and_conjunction_laws(a in arb_formula(2), b in arb_formula(2), g in arb_graph()) {
            let (a, b) = (close(a), close(b));
            let v = Valuation::new();
            let ea = eval(&g, &a, &v).unwrap();
            let eb = eval(&g, &b, &v).unwrap();
            prop_assert_eq!(eval(&g, &Arc::new(Formula::Not(a.clone())), &v).unwrap(), !ea);
            prop_assert_eq!(eval(&g, &Arc::new(Formula::And(a, b)), &v).unwrap(), ea && eb);
        }
    }
}
