//! Compilation of regular tree grammars and tree-verifiable grammars into
//! defining CMSO sentences.
//!
//! Set variables are named after 1-based rule indices: `A3.set` labels the
//! edges derived by rule 3, `C2.set` the vertices whose C-rule is rule 2.
//! The propagation machinery uses `K.A<r>.<z>` (body vertex `z` of rule `r`),
//! `L<i>`, `M` and `N`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::formula::*;
use crate::classify::{check_regular_tree, check_tree_verifiable, recognize_tedge};
use crate::grammar::{Grammar, Rule};
use crate::hypergraph::Alphabet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn pre(m: impl Into<String>) -> BuildError {
    BuildError::Precondition(m.into())
}

fn xs(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn edge_atom(label: &str, e: &str, xs: &[String]) -> F {
    let mut args = vec![e.to_string()];
    args.extend(xs.iter().cloned());
    edg(label, &args)
}

/// `∀x1..xk ∈ V. edg_a(e, x1..xk) → body`.
fn forall_att(al: &Alphabet, label: &str, e: &str, xs: &[String], body: F) -> F {
    forall_all_in(xs, Dom::V, al, implies(edge_atom(label, e, xs), body))
}

/// `∃x1..xk ∈ V. edg_a(e, x1..xk) ∧ body`.
fn exists_att(al: &Alphabet, label: &str, e: &str, xs: &[String], body: F) -> F {
    exists_all_in(xs, Dom::V, al, and(edge_atom(label, e, xs), body))
}

/// `at_t(e, v)`: `v` is the `t`-th attachment (1-based) of `e`.
fn at(al: &Alphabet, t: usize, e: &str, v: &str) -> F {
    or_all(al.iter().filter(|&(_, k)| k >= t).map(|(a, k)| {
        let others: Vec<String> = (1..=k)
            .filter(|&j| j != t)
            .map(|j| format!("{e}.{v}.{j}"))
            .collect();
        let mut args: Vec<String> = others.clone();
        args.insert(t - 1, v.to_string());
        exists_all_in(&others, Dom::V, al, edge_atom(a, e, &args))
    }))
}

/// Every element of `d` satisfying `cond` lies in exactly one of `sets`;
/// elements outside `cond` lie in none. The sets are restricted to `d`.
fn partition(al: &Alphabet, sets: &[String], d: Dom, x: &str, cond: impl Fn(&str) -> F) -> F {
    let mut parts = Vec::new();
    for s in sets {
        parts.push(forall(
            x,
            implies(mem(s, x), and(in_dom(x, d, al), cond(x))),
        ));
    }
    for (i, s) in sets.iter().enumerate() {
        for t in &sets[i + 1..] {
            parts.push(forall(x, not(and(mem(s, x), mem(t, x)))));
        }
    }
    parts.push(forall_in(
        x,
        d,
        al,
        implies(cond(x), or_all(sets.iter().map(|s| mem(s, x)))),
    ));
    and_all(parts)
}

fn pairwise_distinct(vars: &[String]) -> F {
    let mut out = Vec::new();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            out.push(neq(&vars[i], &vars[j]));
        }
    }
    and_all(out)
}

fn exponents(g: &Grammar) -> Result<BTreeMap<(String, String), usize>, BuildError> {
    let mut q = BTreeMap::new();
    for r in &g.rules {
        if let Rule::B { head, w, q: e } = r {
            if *e == 0 {
                continue;
            }
            if q.insert((head.clone(), w.clone()), *e).is_some() {
                return Err(pre(format!(
                    "several B-rules for ({head}, {w}); apply merge_b_rules first"
                )));
            }
        }
    }
    Ok(q)
}

fn set_name(kind: char, rule: usize) -> String {
    format!("{kind}{}.set", rule + 1)
}

struct CRule {
    set: String,
    head: String,
    parts: Vec<String>,
}

fn c_rules(g: &Grammar) -> Vec<CRule> {
    g.rules
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Rule::C { head, parts } => Some(CRule {
                set: set_name('C', i),
                head: head.clone(),
                parts: parts.clone(),
            }),
            _ => None,
        })
        .collect()
}

/// `ψ^C_w(v)`: the number of `w`-edges rooted at `v` is `kq + p`.
fn counting(al: &Alphabet, v: &str, q: usize, p: usize, rooted: &[(String, usize)]) -> F {
    let x = format!("X.{v}");
    let e = format!("{x}.e");
    let hit = |e: &str| {
        or_all(
            rooted
                .iter()
                .map(|(s, pos)| and(mem(s, e), at(al, *pos, e, v))),
        )
    };
    exists_subset(
        &x,
        Dom::E,
        al,
        and_all([
            card(&x, q, p),
            forall(&e, implies(mem(&x, &e), hit(&e))),
            forall(&e, implies(hit(&e), mem(&x, &e))),
        ]),
    )
}

/// The sentence defining the language of a regular tree grammar, in which
/// `w` is the set of W-nonterminals.
pub fn build_from_regular_tree(g: &Grammar, w: &BTreeSet<String>) -> Result<F, BuildError> {
    let v = check_regular_tree(g, w);
    if !v.accepted {
        let first = v
            .violations
            .first()
            .map(|f| f.to_string())
            .unwrap_or_default();
        return Err(pre(format!("not a regular tree grammar: {first}")));
    }
    let qs = exponents(g)?;
    let al = &g.alphabet;
    struct ARule {
        set: String,
        head: String,
        label: String,
        ar: usize,
        root: usize,
        kids: Vec<(usize, String)>,
    }
    let mut arules = Vec::new();
    for (i, r) in g.rules.iter().enumerate() {
        if let Rule::A { head, body } = r {
            let t = recognize_tedge(g, body).map_err(pre)?;
            let ar = al
                .arity(&t.label)
                .ok_or_else(|| pre(format!("label {} not in the alphabet", t.label)))?;
            arules.push(ARule {
                set: set_name('A', i),
                head: head.clone(),
                label: t.label,
                ar,
                root: t.root_pos,
                kids: t.children,
            });
        }
    }
    let crules = c_rules(g);
    let a_sets: Vec<String> = arules.iter().map(|a| a.set.clone()).collect();
    let c_sets: Vec<String> = crules.iter().map(|c| c.set.clone()).collect();
    let (r, e, vv) = ("r", "e", "v");
    let per_a = |f: &dyn Fn(&ARule) -> F| {
        forall_in(
            e,
            Dom::E,
            al,
            and_all(arules.iter().map(|a| implies(mem(&a.set, e), f(a)))),
        )
    };

    let phi1 = partition(al, &a_sets, Dom::E, e, |_| tt());
    let phi2 = partition(al, &c_sets, Dom::V, vv, |_| tt());
    let phi3a = and_all(al.iter().map(|(a, k)| {
        let x = xs("x", k);
        forall_in(
            e,
            Dom::E,
            al,
            forall_att(al, a, e, &x, pairwise_distinct(&x)),
        )
    }));
    let phi3b = per_a(&|a| {
        let x = xs("x", a.ar);
        let body = and_all(
            (1..=a.ar)
                .filter(|&t| t != a.root)
                .map(|t| neq(&x[t - 1], r)),
        );
        forall_att(al, &a.label, e, &x, body)
    });
    let parent = |e: &str| {
        or_all(arules.iter().map(|a| {
            let x = xs("x", a.ar);
            let hit = or_all(
                (1..=a.ar)
                    .filter(|&t| t != a.root)
                    .map(|t| eq(&x[t - 1], vv)),
            );
            and(mem(&a.set, e), exists_att(al, &a.label, e, &x, hit))
        }))
    };
    let phi3c = forall_in(
        vv,
        Dom::V,
        al,
        implies(neq(vv, r), exists_unique_in(e, Dom::E, al, parent)),
    );
    let closed = per_a(&|a| {
        let x = xs("x", a.ar);
        let body = implies(
            mem("R", &x[a.root - 1]),
            and_all(
                (1..=a.ar)
                    .filter(|&t| t != a.root)
                    .map(|t| mem("R", &x[t - 1])),
            ),
        );
        forall_att(al, &a.label, e, &x, body)
    });
    let phi3d = not(exists_subset(
        "R",
        Dom::V,
        al,
        and_all([
            mem("R", r),
            closed,
            exists_in(vv, Dom::V, al, not(mem("R", vv))),
        ]),
    ));
    let phi4 = per_a(&|a| {
        forall_in(
            vv,
            Dom::V,
            al,
            and_all(a.kids.iter().map(|(t, u)| {
                implies(
                    at(al, *t, e, vv),
                    or_all(
                        crules
                            .iter()
                            .filter(|c| &c.head == u)
                            .map(|c| mem(&c.set, vv)),
                    ),
                )
            })),
        )
    });
    let w_list: Vec<&String> = w.iter().collect();
    let phi5 = forall_in(
        vv,
        Dom::V,
        al,
        and_all(crules.iter().map(|c| {
            let checks = w_list.iter().map(|wn| {
                let p = c.parts.iter().filter(|x| x == wn).count();
                let q = qs
                    .get(&(c.head.clone(), (*wn).clone()))
                    .copied()
                    .unwrap_or(0);
                let rooted: Vec<(String, usize)> = arules
                    .iter()
                    .filter(|a| &a.head == *wn)
                    .map(|a| (a.set.clone(), a.root))
                    .collect();
                counting(al, vv, q, p, &rooted)
            });
            implies(mem(&c.set, vv), and_all(checks))
        })),
    );
    let phi6 = per_a(&|a| exists_att(al, &a.label, e, &xs("x", a.ar), tt()));
    let psi = and_all([phi1, phi2, phi3a, phi3b, phi3c, phi3d, phi4, phi5, phi6]);
    let start = or_all(
        crules
            .iter()
            .filter(|c| g.axioms.contains(&c.head))
            .map(|c| mem(&c.set, r)),
    );
    let body = and(psi, start);
    let body = a_sets
        .iter()
        .chain(&c_sets)
        .rev()
        .fold(body, |f, s| exists_so(s, f));
    Ok(exists_in(r, Dom::V, al, body))
}

/// Positional data of one A-rule of a tree-verifiable grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ARuleData {
    /// 0-based index in the grammar's rule list.
    pub rule: usize,
    pub set: String,
    pub head: String,
    /// Label of the terminal edge.
    pub lambda: String,
    /// Attachments of the terminal edge (body vertex ids).
    pub vertedge: Vec<u32>,
    /// Position (1-based) of the head's root source.
    pub rpos: usize,
    /// Per slot in body order: its nonterminal and the position of its root.
    pub cpos: Vec<(String, usize)>,
    /// Source vertices of the body, in order.
    pub sources: Vec<u32>,
    /// Per slot: its attachments.
    pub slot_att: Vec<Vec<u32>>,
    pub n_vertices: u32,
}

impl ARuleData {
    pub fn k_name(&self, z: u32) -> String {
        format!("K.A{}.{}", self.rule + 1, z)
    }

    fn tree_positions(&self) -> Vec<usize> {
        let mut p = vec![self.rpos];
        p.extend(self.cpos.iter().map(|c| c.1));
        p
    }
}

/// Names and positional data used by the tree-verifiable compiler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildContext {
    pub arules: Vec<ARuleData>,
    pub c_sets: Vec<(String, String)>,
    pub l_names: Vec<String>,
    pub k_names: Vec<String>,
}

/// Collect the per-rule data and variable names of a tree-verifiable grammar.
pub fn build_context(g: &Grammar) -> Result<BuildContext, BuildError> {
    let mut arules = Vec::new();
    for (i, r) in g.rules.iter().enumerate() {
        let Rule::A { head, body } = r else { continue };
        let terms = g.terminal_edges(body);
        if terms.len() != 1 {
            return Err(pre(format!(
                "rule {} has {} terminal edges",
                i + 1,
                terms.len()
            )));
        }
        let te = &body.edges[terms[0]];
        let pos_of = |v: u32| te.att.iter().position(|&x| x == v).map(|p| p + 1);
        let rpos = pos_of(body.source(g.root_of(head)))
            .ok_or_else(|| pre(format!("rule {}: root off the terminal edge", i + 1)))?;
        let mut cpos = Vec::new();
        let mut slot_att = Vec::new();
        for s in g.slots(body) {
            let u = body.edges[s].label.to_string();
            let root = body.edges[s].att[g.root_of(&u) - 1];
            let p = pos_of(root)
                .ok_or_else(|| pre(format!("rule {}: slot root off the terminal edge", i + 1)))?;
            cpos.push((u, p));
            slot_att.push(body.edges[s].att.clone());
        }
        arules.push(ARuleData {
            rule: i,
            set: set_name('A', i),
            head: head.clone(),
            lambda: te.label.to_string(),
            vertedge: te.att.clone(),
            rpos,
            cpos,
            sources: body.sources.clone(),
            slot_att,
            n_vertices: body.n_vertices,
        });
    }
    let c_sets = c_rules(g)
        .into_iter()
        .map(|c| (c.set, c.head))
        .collect::<Vec<_>>();
    let max_c = c_sets
        .iter()
        .map(|(_, h)| g.arity_of(h).unwrap_or(0))
        .max()
        .unwrap_or(0);
    let l_names = (1..=max_c).map(|i| format!("L{i}")).collect();
    let k_names = arules
        .iter()
        .flat_map(|a| (0..a.n_vertices).map(move |z| a.k_name(z)))
        .collect();
    Ok(BuildContext {
        arules,
        c_sets,
        l_names,
        k_names,
    })
}

struct TvBuild<'a> {
    g: &'a Grammar,
    al: &'a Alphabet,
    cx: BuildContext,
    qs: BTreeMap<(String, String), usize>,
}

/// A seed of the propagation: `L_i(v)` or `K_z(e)`.
#[derive(Clone)]
enum Seed {
    L(usize, String),
    K(String, String),
}

impl TvBuild<'_> {
    fn arity(&self, u: &str) -> usize {
        self.g.arity_of(u).unwrap_or(0)
    }

    fn per_a(&self, e: &str, f: impl Fn(&ARuleData) -> F) -> F {
        forall_in(
            e,
            Dom::E,
            self.al,
            and_all(self.cx.arules.iter().map(|a| implies(mem(&a.set, e), f(a)))),
        )
    }

    fn per_a_att(&self, e: &str, x: &str, f: impl Fn(&ARuleData, &[String]) -> F) -> F {
        self.per_a(e, |a| {
            let xv = xs(x, a.vertedge.len());
            forall_att(self.al, &a.lambda, e, &xv, f(a, &xv))
        })
    }

    /// Propagation of source identities along the spanning tree.
    fn rho(&self, y: &[String], nroots: &[usize]) -> F {
        let al = self.al;
        let cx = &self.cx;
        let (e, v) = ("rho.e", "rho.v");
        let not_nroot = |v: &str| and_all(nroots.iter().map(|&j| neq(&y[j - 1], v)));
        let mut p_edges: Vec<String> = cx.k_names.clone();
        p_edges.push("M".into());
        let mut p_verts: Vec<String> = cx.l_names.clone();
        p_verts.push("N".into());
        let rho1 = partition(al, &p_edges, Dom::E, e, |_| tt());
        let rho2 = self.per_a(e, |a| {
            or_all(
                (0..a.n_vertices)
                    .map(|z| mem(&a.k_name(z), e))
                    .chain([mem("M", e)]),
            )
        });
        let rho3 = partition(al, &p_verts, Dom::V, v, not_nroot);
        let rho4 = forall_in(
            v,
            Dom::V,
            al,
            and_all(cx.c_sets.iter().map(|(s, h)| {
                let ls = (1..=self.arity(h))
                    .map(|i| mem(&cx.l_names[i - 1], v))
                    .chain([mem("N", v)]);
                implies(mem(s, v), or_all(ls))
            })),
        );
        let rho5 = self.per_a_att(e, "rho.x", |a, x| {
            let head_ar = self.arity(&a.head);
            let mut parts = Vec::new();
            for i in 1..=head_ar {
                parts.push(iff(
                    mem(&cx.l_names[i - 1], &x[a.rpos - 1]),
                    mem(&a.k_name(a.sources[i - 1]), e),
                ));
            }
            for (j, (u, cp)) in a.cpos.iter().enumerate() {
                for i in 1..=self.arity(u) {
                    parts.push(iff(
                        mem(&cx.l_names[i - 1], &x[cp - 1]),
                        mem(&a.k_name(a.slot_att[j][i - 1]), e),
                    ));
                }
            }
            and_all(parts)
        });
        // Tracked elements are connected along root and child positions.
        let tracked = |x: &str| {
            or_all(
                p_edges[..p_edges.len() - 1]
                    .iter()
                    .chain(&p_verts[..p_verts.len() - 1])
                    .map(|s| mem(s, x)),
            )
        };
        let z = "Z";
        let closed = self.per_a_att("rho6.e", "rho6.x", |a, x| {
            and_all(a.tree_positions().into_iter().map(|t| {
                let xt = &x[t - 1];
                and(
                    implies(and(mem(z, "rho6.e"), tracked(xt)), mem(z, xt)),
                    implies(and(mem(z, xt), tracked("rho6.e")), mem(z, "rho6.e")),
                )
            }))
        });
        let rho6 = not(exists_so(
            z,
            and_all([
                forall("rho6.a", implies(mem(z, "rho6.a"), tracked("rho6.a"))),
                exists("rho6.a", mem(z, "rho6.a")),
                closed,
                exists("rho6.a", and(tracked("rho6.a"), not(mem(z, "rho6.a")))),
            ]),
        ));
        // Implied by the partitions; keeps the search off impossible labels.
        let mut hints = Vec::new();
        for a in &cx.arules {
            for zv in 0..a.n_vertices {
                let k = a.k_name(zv);
                hints.push(forall(
                    "rho.k",
                    implies(mem(&k, "rho.k"), mem(&a.set, "rho.k")),
                ));
            }
        }
        for (i, l) in cx.l_names.iter().enumerate() {
            let ok = |x: &str| {
                or_all(
                    cx.c_sets
                        .iter()
                        .filter(|(_, h)| self.arity(h) > i)
                        .map(|(s, _)| mem(s, x)),
                )
            };
            hints.push(forall("rho.l", implies(mem(l, "rho.l"), ok("rho.l"))));
        }
        and_all([and_all(hints), rho1, rho2, rho3, rho4, rho5, rho6])
    }

    fn eq(&self, rho: &F, a: Seed, b: Seed) -> F {
        let lit = |s: &Seed| match s {
            Seed::L(i, v) => mem(&self.cx.l_names[i - 1], v),
            Seed::K(k, e) => mem(k, e),
        };
        let body = and_all([lit(&a), lit(&b), rho.clone()]);
        let mut sets: Vec<String> = self.cx.k_names.clone();
        sets.extend(self.cx.l_names.iter().cloned());
        sets.push("M".into());
        sets.push("N".into());
        sets.iter().rev().fold(body, |f, s| exists_so(s, f))
    }

    fn psi(&self, u0: &str, y: &[String]) -> F {
        let al = self.al;
        let cx = &self.cx;
        let g = self.g;
        let ar0 = self.arity(u0);
        let rt0 = g.root_of(u0);
        let fut0 = g.fut_of(u0);
        let nroots: Vec<usize> = (1..=ar0)
            .filter(|i| *i != rt0 && !fut0.contains(i))
            .collect();
        let yr = y[rt0 - 1].as_str();
        let (e, v) = ("e", "v");
        let rho = self.rho(y, &nroots);
        let not_nroot = |v: &str| and_all(nroots.iter().map(|&j| neq(&y[j - 1], v)));
        let a_sets: Vec<String> = cx.arules.iter().map(|a| a.set.clone()).collect();
        let c_names: Vec<String> = cx.c_sets.iter().map(|c| c.0.clone()).collect();
        let c_with_head = |u: &str| {
            cx.c_sets
                .iter()
                .filter(|c| c.1 == u)
                .map(|c| mem(&c.0, v))
                .collect::<Vec<_>>()
        };

        let phi0 = pairwise_distinct(y);
        let start = or_all(
            cx.c_sets
                .iter()
                .filter(|c| c.1 == u0)
                .map(|c| mem(&c.0, yr)),
        );
        let phi1 = partition(al, &a_sets, Dom::E, e, |_| tt());
        let phi2 = partition(al, &c_names, Dom::V, v, not_nroot);
        let phi3a = self.per_a_att(e, "x", |a, x| {
            let ps: Vec<String> = a
                .tree_positions()
                .into_iter()
                .map(|t| x[t - 1].clone())
                .collect();
            pairwise_distinct(&ps)
        });
        let phi3b = self.per_a_att(e, "x", |a, x| {
            and_all(a.cpos.iter().map(|c| neq(&x[c.1 - 1], yr)))
        });
        let parent = |e: &str| {
            or_all(cx.arules.iter().map(|a| {
                let x = xs("x", a.vertedge.len());
                let hit = or_all(a.cpos.iter().map(|c| eq(&x[c.1 - 1], v)));
                and(mem(&a.set, e), exists_att(al, &a.lambda, e, &x, hit))
            }))
        };
        let phi3c = forall_in(
            v,
            Dom::V,
            al,
            implies(neq(v, yr), exists_unique_in(e, Dom::E, al, parent)),
        );
        let closed = self.per_a_att(e, "x", |a, x| {
            implies(
                mem("R", &x[a.rpos - 1]),
                and_all(a.cpos.iter().map(|c| mem("R", &x[c.1 - 1]))),
            )
        });
        let phi3d = not(exists_subset(
            "R",
            Dom::V,
            al,
            and_all([
                mem("R", yr),
                closed,
                exists_in(v, Dom::V, al, and(not_nroot(v), not(mem("R", v)))),
            ]),
        ));
        let phi4 = self.per_a(e, |a| {
            forall_in(
                v,
                Dom::V,
                al,
                and_all(
                    a.cpos
                        .iter()
                        .map(|(u, p)| implies(at(al, *p, e, v), or_all(c_with_head(u)))),
                ),
            )
        });
        let w_list: Vec<String> = g.w_set().into_iter().collect();
        let phi5 = forall_in(
            v,
            Dom::V,
            al,
            and_all(c_rules(g).iter().map(|c| {
                let checks = w_list.iter().map(|wn| {
                    let p = c.parts.iter().filter(|x| *x == wn).count();
                    let q = self
                        .qs
                        .get(&(c.head.clone(), wn.clone()))
                        .copied()
                        .unwrap_or(0);
                    let rooted: Vec<(String, usize)> = cx
                        .arules
                        .iter()
                        .filter(|a| &a.head == wn)
                        .map(|a| (a.set.clone(), a.rpos))
                        .collect();
                    counting(al, v, q, p, &rooted)
                });
                implies(mem(&c.set, v), and_all(checks))
            })),
        );
        let phi6 = self.per_a(e, |a| {
            exists_att(al, &a.lambda, e, &xs("x", a.vertedge.len()), tt())
        });
        let phi7 = self.per_a_att(e, "x", |a, x| {
            and_all((1..=a.vertedge.len()).map(|i| {
                let z = a.k_name(a.vertedge[i - 1]);
                let outer = nroots.iter().map(|&j| {
                    and(
                        eq(&x[i - 1], &y[j - 1]),
                        self.eq(&rho, Seed::L(j, yr.into()), Seed::K(z.clone(), e.into())),
                    )
                });
                let inner = cx.c_sets.iter().map(|(s, h)| {
                    let rt = g.root_of(h);
                    and(
                        mem(s, &x[i - 1]),
                        self.eq(
                            &rho,
                            Seed::L(rt, x[i - 1].clone()),
                            Seed::K(z.clone(), e.into()),
                        ),
                    )
                });
                or_all(outer.chain(inner))
            }))
        });
        let phi8 = forall_in(
            v,
            Dom::V,
            al,
            and_all(cx.c_sets.iter().map(|(s, h)| {
                let checks = (1..=self.arity(h)).map(|i| {
                    let outer = nroots
                        .iter()
                        .map(|&j| self.eq(&rho, Seed::L(j, yr.into()), Seed::L(i, v.into())));
                    let tree = exists_in(
                        "x",
                        Dom::V,
                        al,
                        or_all(cx.c_sets.iter().map(|(s2, h2)| {
                            and(
                                mem(s2, "x"),
                                self.eq(
                                    &rho,
                                    Seed::L(g.root_of(h2), "x".into()),
                                    Seed::L(i, v.into()),
                                ),
                            )
                        })),
                    );
                    or_all(outer.chain([tree]))
                });
                implies(mem(s, v), and_all(checks))
            })),
        );
        and_all([
            phi0, start, phi1, phi2, phi3a, phi3b, phi3c, phi3d, phi4, phi5, phi6, phi7, phi8,
        ])
    }
}

/// The sentence defining the language of a tree-verifiable grammar.
pub fn build_from_tree_verifiable(g: &Grammar) -> Result<F, BuildError> {
    let v = check_tree_verifiable(g).map_err(|e| pre(e.to_string()))?;
    if !v.accepted {
        let first = v
            .violations
            .first()
            .map(|f| f.to_string())
            .unwrap_or_default();
        return Err(pre(format!("not tree-verifiable: {first}")));
    }
    let qs = exponents(g)?;
    let cx = build_context(g)?;
    let tv = TvBuild {
        g,
        al: &g.alphabet,
        cx,
        qs,
    };
    let mut disj = Vec::new();
    for u0 in &g.axioms {
        let y = xs("y", tv.arity(u0));
        let body = tv.psi(u0, &y);
        let sets: Vec<String> = tv
            .cx
            .arules
            .iter()
            .map(|a| a.set.clone())
            .chain(tv.cx.c_sets.iter().map(|c| c.0.clone()))
            .collect();
        let body = sets.iter().rev().fold(body, |f, s| exists_so(s, f));
        disj.push(exists_all_in(&y, Dom::V, &g.alphabet, body));
    }
    Ok(or_all(disj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::cmso::eval::{Checker, Valuation};
    use crate::hypergraph::Graph;
    use crate::io::parse_grammar_file;

    fn holds(f: &F, g: &Graph) -> bool {
        Checker::new(f).eval(g, &Valuation::new()).unwrap()
    }

    fn cycle(n: u32, closed: bool) -> Graph {
        let mut g = Graph::with_vertices(n);
        let k = if closed { n } else { n - 1 };
        for i in 0..k {
            g.add_edge("a", vec![i, (i + 1) % n]);
        }
        g
    }

    #[test]
    fn single_unary_edge() {
        let g = parse_grammar_file(
            "alphabet a:1\n\
             nonterminal u arity 1 kind N\n\
             nonterminal w arity 1 kind W\n\
             axiom u\n\
             rule C u -> w\n\
             rule A w -> { vertex x; source 1 x; edge e0 a x }\n",
        )
        .unwrap();
        let f = build_from_regular_tree(&g, &g.w_set()).unwrap();
        assert!(f.is_sentence());
        let mut one = Graph::with_vertices(1);
        one.add_edge("a", vec![0]);
        assert!(holds(&f, &one));
        let mut two = one.clone();
        two.add_edge("a", vec![0]);
        assert!(!holds(&f, &two));
        assert!(!holds(&f, &Graph::with_vertices(1)));
    }

    #[test]
    fn regular_tree_asset() {
        let g = assets::grammar("rtree-ab").unwrap();
        let f = build_from_regular_tree(&g, &g.w_set()).unwrap();
        // Root with an a-child and a b-child.
        let mut t = Graph::with_vertices(3);
        t.add_edge("a", vec![0, 1]);
        t.add_edge("b", vec![0, 2]);
        assert!(holds(&f, &t));
        // A lone b-child is not allowed.
        let mut s = Graph::with_vertices(2);
        s.add_edge("b", vec![0, 1]);
        assert!(!holds(&f, &s));
    }

    #[test]
    fn cycles_asset() {
        let g = assets::grammar("cycles").unwrap();
        let f = build_from_tree_verifiable(&g).unwrap();
        assert!(holds(&f, &cycle(3, true)));
        assert!(!holds(&f, &cycle(3, false)));
    }

    #[test]
    fn tv_tll_smallest_member() {
        let g = assets::grammar("tv-tll").unwrap();
        let f = build_from_tree_verifiable(&g).unwrap();
        // Root r with a leaf l and a back edge from the leaf side.
        let mut m = Graph::with_vertices(3);
        m.add_edge("a", vec![0, 1, 2]);
        m.add_edge("b", vec![2, 0]);
        assert!(holds(&f, &m));
        assert!(!holds(&f, &Graph::with_vertices(1)));
    }

    #[test]
    fn preconditions() {
        let g = assets::grammar("multi-b-35").unwrap();
        assert!(build_from_regular_tree(&g, &g.w_set()).is_err());
    }
}
