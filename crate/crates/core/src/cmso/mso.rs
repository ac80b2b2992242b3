//! Rewriting of counting atoms with modulus 0 or 1 into plain MSO.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use super::formula::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MsoError {
    #[error("counting atom {atom} at {path} has modulus {q} >= 2")]
    Modulus {
        atom: String,
        path: String,
        q: usize,
    },
}

/// `|X| >= k` as `k` pairwise distinct members.
pub fn at_least(set: &str, k: usize, fresh: &str) -> F {
    let vars: Vec<String> = (1..=k).map(|i| format!("{fresh}{i}")).collect();
    let mut body: Vec<F> = vars.iter().map(|x| mem(set, x)).collect();
    for i in 0..k {
        for j in i + 1..k {
            body.push(neq(&vars[i], &vars[j]));
        }
    }
    vars.iter().rev().fold(and_all(body), |f, x| exists(x, f))
}

/// Replace every `card(X,1,p)` by `|X| >= p` and every `card(X,0,p)` by
/// `|X| >= p ∧ ¬|X| >= p+1`. Shared subformulas stay shared.
pub fn to_mso(f: &F) -> Result<F, MsoError> {
    let mut names = BTreeSet::new();
    collect_fo(f, &mut names, &mut BTreeSet::new());
    let mut fresh = "c".to_string();
    while names.iter().any(|n| n.starts_with(&fresh)) {
        fresh.insert(0, '_');
    }
    let mut memo = HashMap::new();
    rewrite(f, &fresh, &mut memo, &mut vec![])
}

fn collect_fo(f: &F, out: &mut BTreeSet<String>, seen: &mut BTreeSet<*const Formula>) {
    if !seen.insert(Arc::as_ptr(f)) {
        return;
    }
    match &**f {
        Formula::Eq(x, y) => {
            out.insert(x.clone());
            out.insert(y.clone());
        }
        Formula::Edg { args, .. } => out.extend(args.iter().cloned()),
        Formula::In { var, .. } => {
            out.insert(var.clone());
        }
        Formula::Card { .. } => {}
        Formula::Not(g) | Formula::ExistsSo(_, g) => collect_fo(g, out, seen),
        Formula::ExistsFo(x, g) => {
            out.insert(x.clone());
            collect_fo(g, out, seen);
        }
        Formula::And(a, b) => {
            collect_fo(a, out, seen);
            collect_fo(b, out, seen);
        }
    }
}

fn rewrite(
    f: &F,
    fresh: &str,
    memo: &mut HashMap<*const Formula, F>,
    path: &mut Vec<String>,
) -> Result<F, MsoError> {
    if let Some(r) = memo.get(&Arc::as_ptr(f)) {
        return Ok(r.clone());
    }
    let out = match &**f {
        Formula::Card { set, q: 1, p } => at_least(set, *p, fresh),
        Formula::Card { set, q: 0, p } => {
            and(at_least(set, *p, fresh), not(at_least(set, p + 1, fresh)))
        }
        Formula::Card { q, .. } => {
            let p = if path.is_empty() {
                "the root".to_string()
            } else {
                path.join("/")
            };
            return Err(MsoError::Modulus {
                atom: print_formula(f),
                path: p,
                q: *q,
            });
        }
        Formula::Eq(..) | Formula::Edg { .. } | Formula::In { .. } => f.clone(),
        Formula::Not(g) => {
            path.push("not".into());
            let r = rewrite(g, fresh, memo, path)?;
            path.pop();
            if Arc::ptr_eq(&r, g) {
                f.clone()
            } else {
                Arc::new(Formula::Not(r))
            }
        }
        Formula::And(a, b) => {
            path.push("and.1".into());
            let ra = rewrite(a, fresh, memo, path)?;
            path.pop();
            path.push("and.2".into());
            let rb = rewrite(b, fresh, memo, path)?;
            path.pop();
            if Arc::ptr_eq(&ra, a) && Arc::ptr_eq(&rb, b) {
                f.clone()
            } else {
                Arc::new(Formula::And(ra, rb))
            }
        }
        Formula::ExistsFo(x, g) | Formula::ExistsSo(x, g) => {
            let so = matches!(&**f, Formula::ExistsSo(..));
            path.push(format!(
                "{} {x}",
                if so { "exists-so" } else { "exists-fo" }
            ));
            let r = rewrite(g, fresh, memo, path)?;
            path.pop();
            if Arc::ptr_eq(&r, g) {
                f.clone()
            } else if so {
                Arc::new(Formula::ExistsSo(x.clone(), r))
            } else {
                Arc::new(Formula::ExistsFo(x.clone(), r))
            }
        }
    };
    memo.insert(Arc::as_ptr(f), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn card_one_two() {
        let f = to_mso(&card("X", 1, 2)).unwrap();
        assert_eq!(
            print_formula(&f),
            "(exists-fo c1 (exists-fo c2 (and (in X c1) (and (in X c2) (not (= c1 c2))))))"
        );
    }

    #[test]
    fn card_free_formula_unchanged() {
        let f = parse_formula("(exists-fo x (and (= x y) (in X x)))").unwrap();
        let g = to_mso(&f).unwrap();
        assert!(Arc::ptr_eq(&f, &g));
    }

    #[test]
    fn modulus_two_is_reported() {
        let f = parse_formula("(exists-so X (and (in X x) (card X 2 1)))").unwrap();
        let err = to_mso(&f).unwrap_err();
        assert_eq!(
            err,
            MsoError::Modulus {
                atom: "(card X 2 1)".into(),
                path: "exists-so X/and.2".into(),
                q: 2
            }
        );
    }

    #[test]
    fn fresh_names_avoid_capture() {
        let f = exists("c1", and(mem("X", "c1"), card("X", 1, 1)));
        let g = to_mso(&f).unwrap();
        assert!(print_formula(&g).contains("_c1"));
    }
}
