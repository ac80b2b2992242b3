//! Formula syntax, smart constructors and the s-expression text format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::hypergraph::Alphabet;

/// Shared formula handle; identical subformulas may be shared.
pub type F = Arc<Formula>;

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Eq(String, String),
    /// `edg_a(e, x1, .., xk)`: `args[0]` is the edge.
    Edg {
        label: String,
        args: Vec<String>,
    },
    /// `|X| = kq + p` for some k.
    Card {
        set: String,
        q: usize,
        p: usize,
    },
    In {
        set: String,
        var: String,
    },
    Not(F),
    And(F, F),
    ExistsFo(String, F),
    ExistsSo(String, F),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("label {0} is not in the alphabet")]
    UnknownLabel(String),
    #[error("label {label} used with {found} attachments, arity is {expected}")]
    ArityMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
}

pub fn eq(x: &str, y: &str) -> F {
    Arc::new(Formula::Eq(x.into(), y.into()))
}

pub fn neq(x: &str, y: &str) -> F {
    not(eq(x, y))
}

pub fn edg<S: AsRef<str>>(label: &str, args: &[S]) -> F {
    Arc::new(Formula::Edg {
        label: label.into(),
        args: args.iter().map(|a| a.as_ref().to_string()).collect(),
    })
}

pub fn card(set: &str, q: usize, p: usize) -> F {
    Arc::new(Formula::Card {
        set: set.into(),
        q,
        p,
    })
}

pub fn mem(set: &str, var: &str) -> F {
    Arc::new(Formula::In {
        set: set.into(),
        var: var.into(),
    })
}

/// A closed tautology; there are no constants in the syntax.
pub fn tt() -> F {
    not(ff())
}

/// A closed contradiction.
pub fn ff() -> F {
    Arc::new(Formula::ExistsFo("_".into(), not(eq("_", "_"))))
}

pub fn is_true(f: &F) -> bool {
    matches!(&**f, Formula::Not(g) if is_false(g))
}

pub fn is_false(f: &F) -> bool {
    match &**f {
        Formula::ExistsFo(x, b) if x == "_" => {
            matches!(&**b, Formula::Not(e) if matches!(&**e, Formula::Eq(a, c) if a == "_" && c == "_"))
        }
        _ => false,
    }
}

pub fn not(f: F) -> F {
    if let Formula::Not(g) = &*f {
        return g.clone();
    }
    Arc::new(Formula::Not(f))
}

pub fn and(f: F, g: F) -> F {
    if is_true(&f) || is_false(&g) {
        return g;
    }
    if is_true(&g) || is_false(&f) {
        return f;
    }
    Arc::new(Formula::And(f, g))
}

pub fn and_all(fs: impl IntoIterator<Item = F>) -> F {
    let fs: Vec<F> = fs.into_iter().collect();
    let mut it = fs.into_iter().rev();
    match it.next() {
        None => tt(),
        Some(last) => it.fold(last, |acc, f| and(f, acc)),
    }
}

pub fn or(f: F, g: F) -> F {
    not(and(not(f), not(g)))
}

pub fn or_all(fs: impl IntoIterator<Item = F>) -> F {
    not(and_all(fs.into_iter().map(not)))
}

pub fn implies(f: F, g: F) -> F {
    or(not(f), g)
}

pub fn iff(f: F, g: F) -> F {
    and(implies(f.clone(), g.clone()), implies(g, f))
}

pub fn exists(x: &str, f: F) -> F {
    Arc::new(Formula::ExistsFo(x.into(), f))
}

pub fn forall(x: &str, f: F) -> F {
    not(exists(x, not(f)))
}

pub fn exists_so(x: &str, f: F) -> F {
    Arc::new(Formula::ExistsSo(x.into(), f))
}

pub fn forall_so(x: &str, f: F) -> F {
    not(exists_so(x, not(f)))
}

/// Domain of a bounded quantifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dom {
    V,
    E,
}

/// `x ∈ E`: some edge atom has `x` as its edge.
pub fn is_edge(x: &str, alphabet: &Alphabet) -> F {
    or_all(alphabet.iter().map(|(a, k)| {
        let vars: Vec<String> = (1..=k).map(|i| format!("{x}.{i}")).collect();
        let mut args = vec![x.to_string()];
        args.extend(vars.iter().cloned());
        vars.iter().rev().fold(edg(a, &args), |f, v| exists(v, f))
    }))
}

/// `x ∈ V`, read as "not an edge" so that isolated vertices count.
pub fn is_vertex(x: &str, alphabet: &Alphabet) -> F {
    not(is_edge(x, alphabet))
}

pub fn in_dom(x: &str, d: Dom, alphabet: &Alphabet) -> F {
    match d {
        Dom::V => is_vertex(x, alphabet),
        Dom::E => is_edge(x, alphabet),
    }
}

pub fn forall_in(x: &str, d: Dom, alphabet: &Alphabet, f: F) -> F {
    forall(x, implies(in_dom(x, d, alphabet), f))
}

pub fn exists_in(x: &str, d: Dom, alphabet: &Alphabet, f: F) -> F {
    exists(x, and(in_dom(x, d, alphabet), f))
}

/// `∀x1..xk ∈ V` over several variables.
pub fn forall_all_in<S: AsRef<str>>(xs: &[S], d: Dom, alphabet: &Alphabet, f: F) -> F {
    xs.iter()
        .rev()
        .fold(f, |acc, x| forall_in(x.as_ref(), d, alphabet, acc))
}

pub fn exists_all_in<S: AsRef<str>>(xs: &[S], d: Dom, alphabet: &Alphabet, f: F) -> F {
    xs.iter()
        .rev()
        .fold(f, |acc, x| exists_in(x.as_ref(), d, alphabet, acc))
}

/// `∃!x ∈ Δ. ψ(x)`; `body` builds ψ for a given variable name.
pub fn exists_unique_in(x: &str, d: Dom, alphabet: &Alphabet, body: impl Fn(&str) -> F) -> F {
    let y = format!("{x}'");
    exists_in(
        x,
        d,
        alphabet,
        and(
            body(x),
            forall_in(&y, d, alphabet, implies(body(&y), eq(&y, x))),
        ),
    )
}

/// `∀x. X(x) → x ∈ Δ`, the restriction used by `∃X ⊆ Δ`.
pub fn subset_of(set: &str, d: Dom, alphabet: &Alphabet) -> F {
    let x = format!("{set}.el");
    forall(&x, implies(mem(set, &x), in_dom(&x, d, alphabet)))
}

pub fn exists_subset(set: &str, d: Dom, alphabet: &Alphabet, f: F) -> F {
    exists_so(set, and(subset_of(set, d, alphabet), f))
}

impl Formula {
    /// Free first-order and second-order variables.
    pub fn free_vars(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut memo: HashMap<*const Formula, (BTreeSet<String>, BTreeSet<String>)> =
            HashMap::new();
        free_rec(self, &mut memo)
    }

    pub fn is_sentence(&self) -> bool {
        let (a, b) = self.free_vars();
        a.is_empty() && b.is_empty()
    }

    /// Number of distinct nodes (shared nodes counted once).
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        fn rec(f: &Formula, seen: &mut std::collections::HashSet<*const Formula>) {
            if !seen.insert(f as *const Formula) {
                return;
            }
            match f {
                Formula::Not(g) | Formula::ExistsFo(_, g) | Formula::ExistsSo(_, g) => rec(g, seen),
                Formula::And(g, h) => {
                    rec(g, seen);
                    rec(h, seen);
                }
                _ => {}
            }
        }
        rec(self, &mut seen);
        seen.len()
    }

    /// Edge labels with the attachment counts they are used with.
    pub fn labels(&self) -> BTreeSet<(String, usize)> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        fn rec(
            f: &Formula,
            seen: &mut std::collections::HashSet<*const Formula>,
            out: &mut BTreeSet<(String, usize)>,
        ) {
            if !seen.insert(f as *const Formula) {
                return;
            }
            match f {
                Formula::Edg { label, args } => {
                    out.insert((label.clone(), args.len() - 1));
                }
                Formula::Not(g) | Formula::ExistsFo(_, g) | Formula::ExistsSo(_, g) => {
                    rec(g, seen, out)
                }
                Formula::And(g, h) => {
                    rec(g, seen, out);
                    rec(h, seen, out);
                }
                _ => {}
            }
        }
        rec(self, &mut seen, &mut out);
        out
    }

    /// Edge atoms must agree with the alphabet.
    pub fn check_alphabet(&self, alphabet: &Alphabet) -> Result<(), FormulaError> {
        for (label, k) in self.labels() {
            match alphabet.arity(&label) {
                None => return Err(FormulaError::UnknownLabel(label)),
                Some(a) if a != k => {
                    return Err(FormulaError::ArityMismatch {
                        label,
                        expected: a,
                        found: k,
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

type Vars = (BTreeSet<String>, BTreeSet<String>);

fn free_rec(f: &Formula, memo: &mut HashMap<*const Formula, Vars>) -> Vars {
    if let Some(v) = memo.get(&(f as *const Formula)) {
        return v.clone();
    }
    let out = match f {
        Formula::Eq(x, y) => ([x.clone(), y.clone()].into(), BTreeSet::new()),
        Formula::Edg { args, .. } => (args.iter().cloned().collect(), BTreeSet::new()),
        Formula::Card { set, .. } => (BTreeSet::new(), [set.clone()].into()),
        Formula::In { set, var } => ([var.clone()].into(), [set.clone()].into()),
        Formula::Not(g) => free_rec(g, memo),
        Formula::And(g, h) => {
            let (mut a, mut b) = free_rec(g, memo);
            let (c, d) = free_rec(h, memo);
            a.extend(c);
            b.extend(d);
            (a, b)
        }
        Formula::ExistsFo(x, g) => {
            let (mut a, b) = free_rec(g, memo);
            a.remove(x);
            (a, b)
        }
        Formula::ExistsSo(x, g) => {
            let (a, mut b) = free_rec(g, memo);
            b.remove(x);
            (a, b)
        }
    };
    memo.insert(f as *const Formula, out.clone());
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_sexpr(self, &mut s);
        f.write_str(&s)
    }
}

/// Print as a single-line s-expression; shared subformulas are written out.
pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    write_sexpr(f, &mut s);
    s
}

fn write_sexpr(f: &Formula, s: &mut String) {
    // Iterative on the spine of `and` to keep recursion shallow on long conjunctions.
    match f {
        Formula::Eq(x, y) => {
            s.push_str("(= ");
            s.push_str(x);
            s.push(' ');
            s.push_str(y);
            s.push(')');
        }
        Formula::Edg { label, args } => {
            s.push_str("(edg ");
            s.push_str(label);
            for a in args {
                s.push(' ');
                s.push_str(a);
            }
            s.push(')');
        }
        Formula::Card { set, q, p } => {
            s.push_str(&format!("(card {set} {q} {p})"));
        }
        Formula::In { set, var } => {
            s.push_str("(in ");
            s.push_str(set);
            s.push(' ');
            s.push_str(var);
            s.push(')');
        }
        Formula::Not(g) => {
            s.push_str("(not ");
            write_sexpr(g, s);
            s.push(')');
        }
        Formula::And(g, h) => {
            s.push_str("(and ");
            write_sexpr(g, s);
            s.push(' ');
            write_sexpr(h, s);
            s.push(')');
        }
        Formula::ExistsFo(x, g) => {
            s.push_str("(exists-fo ");
            s.push_str(x);
            s.push(' ');
            write_sexpr(g, s);
            s.push(')');
        }
        Formula::ExistsSo(x, g) => {
            s.push_str("(exists-so ");
            s.push_str(x);
            s.push(' ');
            write_sexpr(g, s);
            s.push(')');
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            b';' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < b.len()
                    && !b[i].is_ascii_whitespace()
                    && !matches!(b[i], b'(' | b')' | b';')
                {
                    i += 1;
                }
                out.push((start, Tok::Atom(&text[start..i])));
            }
        }
    }
    out
}

/// Parse the s-expression format. Identical subterms are shared.
pub fn parse_formula(text: &str) -> Result<F, FormulaError> {
    let toks = tokenize(text);
    let mut p = Parser {
        toks,
        i: 0,
        end: text.len(),
        intern: HashMap::new(),
    };
    let f = p.formula()?;
    if p.i != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    i: usize,
    end: usize,
    intern: HashMap<String, F>,
}

impl<'a> Parser<'a> {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.0)
    }

    fn err(&self, m: &str) -> FormulaError {
        FormulaError::Parse {
            pos: self.pos(),
            message: m.into(),
        }
    }

    fn atom(&mut self, what: &str) -> Result<&'a str, FormulaError> {
        match self.toks.get(self.i) {
            Some((_, Tok::Atom(a))) => {
                self.i += 1;
                Ok(a)
            }
            _ => Err(self.err(&format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, FormulaError> {
        let save = self.i;
        let a = self.atom(what)?;
        a.parse().map_err(|_| {
            self.i = save;
            self.err(&format!("expected {what}"))
        })
    }

    fn close(&mut self) -> Result<(), FormulaError> {
        match self.toks.get(self.i) {
            Some((_, Tok::Close)) => {
                self.i += 1;
                Ok(())
            }
            _ => Err(self.err("expected )")),
        }
    }

    fn share(&mut self, f: Formula) -> F {
        let key = print_formula(&f);
        self.intern
            .entry(key)
            .or_insert_with(|| Arc::new(f))
            .clone()
    }

    fn formula(&mut self) -> Result<F, FormulaError> {
        match self.toks.get(self.i) {
            Some((_, Tok::Open)) => self.i += 1,
            _ => return Err(self.err("expected (")),
        }
        let head = self.atom("an operator")?;
        let f = match head {
            "=" => {
                let x = self.atom("a variable")?.to_string();
                let y = self.atom("a variable")?.to_string();
                Formula::Eq(x, y)
            }
            "edg" => {
                let label = self.atom("a label")?.to_string();
                let mut args = vec![self.atom("an edge variable")?.to_string()];
                while let Some((_, Tok::Atom(a))) = self.toks.get(self.i) {
                    args.push(a.to_string());
                    self.i += 1;
                }
                Formula::Edg { label, args }
            }
            "card" => {
                let set = self.atom("a set variable")?.to_string();
                let q = self.number("q")?;
                let p = self.number("p")?;
                Formula::Card { set, q, p }
            }
            "in" => {
                let set = self.atom("a set variable")?.to_string();
                let var = self.atom("a variable")?.to_string();
                Formula::In { set, var }
            }
            "not" => Formula::Not(self.formula()?),
            "and" => {
                let g = self.formula()?;
                let h = self.formula()?;
                Formula::And(g, h)
            }
            "exists-fo" => {
                let x = self.atom("a variable")?.to_string();
                Formula::ExistsFo(x, self.formula()?)
            }
            "exists-so" => {
                let x = self.atom("a set variable")?.to_string();
                Formula::ExistsSo(x, self.formula()?)
            }
            other => {
                self.i -= 1;
                return Err(self.err(&format!("unknown operator {other}")));
            }
        };
        self.close()?;
        Ok(self.share(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let texts = [
            "(exists-fo x (= x x))",
            "(exists-so X (and (card X 2 1) (not (in X y))))",
            "(edg a e x1 x2)",
            "(and (not (exists-fo _ (not (= _ _)))) (exists-so Y (in Y z)))",
        ];
        for t in texts {
            let f = parse_formula(t).unwrap();
            assert_eq!(print_formula(&f), t);
        }
    }

    #[test]
    fn whitespace_and_comments() {
        let f = parse_formula("( exists-fo  x ; binder\n (= x\tx) )").unwrap();
        assert_eq!(print_formula(&f), "(exists-fo x (= x x))");
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            "(= x)",
            "(and (= x x))",
            "(card X a 1)",
            "(foo x)",
            "(= x y) extra",
            "(edg)",
        ] {
            assert!(parse_formula(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn free_variables() {
        let f = exists("x", and(eq("x", "y"), mem("X", "x")));
        let (fo, so) = f.free_vars();
        assert_eq!(fo, ["y".to_string()].into());
        assert_eq!(so, ["X".to_string()].into());
        assert!(tt().is_sentence());
    }

    #[test]
    fn constants_simplify() {
        let a = eq("x", "y");
        assert_eq!(and(tt(), a.clone()), a);
        assert_eq!(and_all(vec![]), tt());
        assert!(is_false(&or_all(vec![])));
        assert_eq!(not(not(a.clone())), a);
    }

    #[test]
    fn alphabet_check() {
        let al = Alphabet::new([("a", 2)]);
        assert!(edg("a", &["e", "x", "y"]).check_alphabet(&al).is_ok());
        assert!(edg("a", &["e", "x"]).check_alphabet(&al).is_err());
        assert!(edg("b", &["e", "x"]).check_alphabet(&al).is_err());
    }
}
