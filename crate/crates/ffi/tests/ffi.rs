use std::ffi::{CStr, CString};
use std::ptr;

use hrg_ffi::*;

const TRI: &str = "graph tri type 0\nvertex a b c\nedge e0 a a b\nedge e1 a b c\nedge e2 a c a\n";
const PATH3: &str = "graph p type 0\nvertex a b c\nedge e0 a a b\nedge e1 a b c\n";

fn graph(src: &str) -> *mut HrgGraph {
    let s = CString::new(src).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { hrg_graph_parse(s.as_ptr(), &mut g) },
        HrgStatus::Ok
    );
    g
}

fn asset(name: &str) -> *mut HrgGrammar {
    let s = CString::new(name).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { hrg_grammar_asset(s.as_ptr(), &mut g) },
        HrgStatus::Ok
    );
    g
}

fn last_error() -> String {
    let p = hrg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn graph_handles() {
    let g = graph(TRI);
    unsafe {
        assert_eq!(hrg_graph_vertex_count(g), 3);
        assert_eq!(hrg_graph_edge_count(g), 3);
        let mut w = 0usize;
        assert_eq!(hrg_treewidth(g, &mut w), HrgStatus::Ok);
        assert_eq!(w, 2);
        let mut present = false;
        assert_eq!(hrg_etw(g, &mut w, &mut present), HrgStatus::Ok);
        assert!(present);
        assert_eq!(w, 2);
        let mut cut = true;
        assert_eq!(hrg_has_connected_cut(g, &mut cut), HrgStatus::Ok);
        assert!(!cut);
        hrg_graph_free(g);
        hrg_graph_free(ptr::null_mut());
    }
}

#[test]
fn parse_errors_are_reported() {
    let s = CString::new("graph g type 0\nvertex a a\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { hrg_graph_parse(s.as_ptr(), &mut g) },
        HrgStatus::Parse
    );
    assert!(g.is_null());
    assert!(last_error().contains("line"));
    assert_eq!(
        unsafe { hrg_graph_parse(ptr::null(), &mut g) },
        HrgStatus::NullArgument
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { hrg_graph_parse(bad.as_ptr().cast(), &mut g) },
        HrgStatus::InvalidUtf8
    );
    let name = CString::new("no-such-asset").unwrap();
    let mut gr = ptr::null_mut();
    assert_eq!(
        unsafe { hrg_grammar_asset(name.as_ptr(), &mut gr) },
        HrgStatus::Parse
    );
}

#[test]
fn success_clears_last_error() {
    let mut g = ptr::null_mut();
    unsafe { hrg_graph_parse(ptr::null(), &mut g) };
    assert!(!hrg_last_error().is_null());
    let g = graph(PATH3);
    assert!(hrg_last_error().is_null());
    unsafe { hrg_graph_free(g) };
}

#[test]
fn classes_and_membership() {
    let tv = asset("tv-tll");
    let cycles = asset("cycles");
    let ab = asset("ab-equal");
    let tri = graph(TRI);
    let path = graph(PATH3);
    unsafe {
        let mut ok = false;
        assert_eq!(
            hrg_grammar_class(tv, HrgClass::TreeVerifiable, &mut ok),
            HrgStatus::Ok
        );
        assert!(ok);
        assert_eq!(
            hrg_grammar_class(ab, HrgClass::RegularTree, &mut ok),
            HrgStatus::Ok
        );
        assert!(!ok);
        assert_eq!(hrg_member(cycles, tri, &mut ok), HrgStatus::Ok);
        assert!(ok);
        assert_eq!(hrg_member(cycles, path, &mut ok), HrgStatus::Ok);
        assert!(!ok);
        assert_eq!(
            hrg_member(cycles, ptr::null(), &mut ok),
            HrgStatus::NullArgument
        );
        for h in [tv, cycles, ab] {
            hrg_grammar_free(h);
        }
        hrg_graph_free(tri);
        hrg_graph_free(path);
    }
}

#[test]
fn formulas() {
    let cycles = asset("cycles");
    let tri = graph(TRI);
    let path = graph(PATH3);
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(hrg_formula_from_grammar(cycles, &mut f), HrgStatus::Ok);
        let mut r = false;
        assert_eq!(hrg_formula_eval(f, tri, &mut r), HrgStatus::Ok);
        assert!(r);
        assert_eq!(hrg_formula_eval(f, path, &mut r), HrgStatus::Ok);
        assert!(!r);
        hrg_formula_free(f);

        let src = CString::new("(exists-fo x (exists-fo y (edg a x y y)))").unwrap();
        assert_eq!(hrg_formula_parse(src.as_ptr(), &mut f), HrgStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(hrg_formula_print(f, &mut s), HrgStatus::Ok);
        assert_eq!(
            CStr::from_ptr(s).to_str().unwrap(),
            "(exists-fo x (exists-fo y (edg a x y y)))"
        );
        hrg_string_free(s);
        assert_eq!(hrg_formula_eval(f, tri, &mut r), HrgStatus::Ok);
        assert!(!r);
        let free = CString::new("(in X x)").unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(hrg_formula_parse(free.as_ptr(), &mut g), HrgStatus::Ok);
        assert_eq!(hrg_formula_eval(g, tri, &mut r), HrgStatus::Eval);
        assert!(last_error().contains("not assigned"));
        hrg_formula_free(f);
        hrg_formula_free(g);
        hrg_grammar_free(cycles);
        hrg_graph_free(tri);
        hrg_graph_free(path);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/hrg.h");
    let src = include_str!("../src/lib.rs");
    let mut n = 0;
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else {
            continue;
        };
        let name = rest.split('(').next().unwrap();
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
        n += 1;
    }
    assert!(n >= 15);
}
