//! C ABI for the HR grammar workbench.
//!
//! Objects cross the boundary as opaque handles created by `*_parse` or
//! `*_asset` functions and released with the matching `*_free`. Every
//! fallible call returns an [`HrgStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`hrg_last_error`]. Strings returned
//! to the caller are owned by it and released with [`hrg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hrg_core::classify::{check_regular_graph, check_regular_tree, check_tree_verifiable, find_w};
use hrg_core::cmso::{
    build_from_regular_tree, build_from_tree_verifiable, parse_formula, print_formula, Checker,
    Valuation, F,
};
use hrg_core::decomposition::{etw_exact, has_connected_cut, treewidth_exact};
use hrg_core::enumerate::membership;
use hrg_core::grammar::Grammar;
use hrg_core::hypergraph::Graph;
use hrg_core::io::{parse_grammar_file, parse_graph_file};
use hrg_core::transforms::merge_b_rules;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Precondition = 4,
    Eval = 5,
    Cap = 6,
    Panic = 7,
}

/// Grammar class selector for [`hrg_grammar_class`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrgClass {
    RegularTree = 0,
    TreeVerifiable = 1,
    RegularGraph = 2,
}

/// A concrete hypergraph.
pub struct HrgGraph {
    graph: Graph,
}

/// An HR grammar.
pub struct HrgGrammar {
    grammar: Grammar,
}

/// A compiled CMSO formula.
pub struct HrgFormula {
    formula: F,
    checker: Checker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Fallible<T> = Result<T, (HrgStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible<()>) -> HrgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HrgStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            HrgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Fallible<&'a str> {
    if p.is_null() {
        return Err((HrgStatus::NullArgument, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (HrgStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T) -> Fallible<&'a T> {
    p.as_ref()
        .ok_or_else(|| (HrgStatus::NullArgument, "null handle".into()))
}

unsafe fn put<T>(out: *mut T, v: T) -> Fallible<()> {
    if out.is_null() {
        return Err((HrgStatus::NullArgument, "null output pointer".into()));
    }
    out.write(v);
    Ok(())
}

fn parse_err(e: impl ToString) -> (HrgStatus, String) {
    (HrgStatus::Parse, e.to_string())
}

fn pre_err(e: impl ToString) -> (HrgStatus, String) {
    (HrgStatus::Precondition, e.to_string())
}

fn cap_err(e: impl ToString) -> (HrgStatus, String) {
    (HrgStatus::Cap, e.to_string())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hrg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` is null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hrg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse `.hg` text.
///
/// # Safety
/// `src` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_graph_parse(src: *const c_char, out: *mut *mut HrgGraph) -> HrgStatus {
    guard(|| {
        let g = parse_graph_file(text(src)?, None).map_err(parse_err)?;
        put(out, Box::into_raw(Box::new(HrgGraph { graph: g.graph })))
    })
}

/// # Safety
/// `g` is null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn hrg_graph_free(g: *mut HrgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Vertex count, or 0 for a null handle.
///
/// # Safety
/// `g` is null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn hrg_graph_vertex_count(g: *const HrgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.n_vertices as usize)
}

/// Edge count, or 0 for a null handle.
///
/// # Safety
/// `g` is null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn hrg_graph_edge_count(g: *const HrgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.n_edges())
}

/// Parse `.hrg` text.
///
/// # Safety
/// `src` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_grammar_parse(
    src: *const c_char,
    out: *mut *mut HrgGrammar,
) -> HrgStatus {
    guard(|| {
        let g = parse_grammar_file(text(src)?).map_err(parse_err)?;
        put(out, Box::into_raw(Box::new(HrgGrammar { grammar: g })))
    })
}

/// Load a bundled grammar by name (for example `"tv-tll"`).
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_grammar_asset(
    name: *const c_char,
    out: *mut *mut HrgGrammar,
) -> HrgStatus {
    guard(|| {
        let g = hrg_core::assets::grammar(text(name)?).map_err(parse_err)?;
        put(out, Box::into_raw(Box::new(HrgGrammar { grammar: g })))
    })
}

/// # Safety
/// `g` is null or a live grammar handle.
#[no_mangle]
pub unsafe extern "C" fn hrg_grammar_free(g: *mut HrgGrammar) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Class check. For the regular classes W is taken from the declared kinds,
/// or searched when no kinds are declared.
///
/// # Safety
/// `g` is a live grammar handle; `accepted` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_grammar_class(
    g: *const HrgGrammar,
    class: HrgClass,
    accepted: *mut bool,
) -> HrgStatus {
    guard(|| {
        let g = &handle(g)?.grammar;
        let declared = g.nonterminals.iter().any(|n| n.kind.is_some());
        let ok = match class {
            HrgClass::TreeVerifiable => check_tree_verifiable(g).map_err(pre_err)?.accepted,
            HrgClass::RegularTree if declared => check_regular_tree(g, &g.w_set()).accepted,
            HrgClass::RegularTree => find_w(g, check_regular_tree).is_some(),
            HrgClass::RegularGraph if declared => check_regular_graph(g, &g.w_set()).accepted,
            HrgClass::RegularGraph => find_w(g, check_regular_graph).is_some(),
        };
        put(accepted, ok)
    })
}

/// Membership of a type-0 graph in the grammar's language.
///
/// # Safety
/// `gr` and `g` are live handles; `member` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_member(
    gr: *const HrgGrammar,
    g: *const HrgGraph,
    member: *mut bool,
) -> HrgStatus {
    guard(|| {
        let m = membership(&handle(gr)?.grammar, &handle(g)?.graph).map_err(pre_err)?;
        put(member, m.is_some())
    })
}

/// Exact tree-width.
///
/// # Safety
/// `g` is a live graph handle; `width` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_treewidth(g: *const HrgGraph, width: *mut usize) -> HrgStatus {
    guard(|| {
        let (w, _) = treewidth_exact(&handle(g)?.graph).map_err(cap_err)?;
        put(width, w)
    })
}

/// Exact embeddable tree-width; `present` is false for the empty graph.
///
/// # Safety
/// `g` is a live graph handle; `width` and `present` are writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_etw(
    g: *const HrgGraph,
    width: *mut usize,
    present: *mut bool,
) -> HrgStatus {
    guard(|| {
        let r = etw_exact(&handle(g)?.graph).map_err(cap_err)?;
        put(present, r.is_some())?;
        put(width, r.map_or(0, |(w, _)| w))
    })
}

/// Whether the graph has a connected cut.
///
/// # Safety
/// `g` is a live graph handle; `found` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_has_connected_cut(g: *const HrgGraph, found: *mut bool) -> HrgStatus {
    guard(|| {
        let r = has_connected_cut(&handle(g)?.graph).map_err(cap_err)?;
        put(found, r.is_some())
    })
}

fn formula_handle(f: F) -> *mut HrgFormula {
    let checker = Checker::new(&f);
    Box::into_raw(Box::new(HrgFormula {
        formula: f,
        checker,
    }))
}

/// Parse an s-expression formula.
///
/// # Safety
/// `src` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_formula_parse(
    src: *const c_char,
    out: *mut *mut HrgFormula,
) -> HrgStatus {
    guard(|| {
        let f = parse_formula(text(src)?).map_err(parse_err)?;
        put(out, formula_handle(f))
    })
}

/// Compile a regular tree or tree-verifiable grammar to a CMSO sentence.
///
/// # Safety
/// `g` is a live grammar handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_formula_from_grammar(
    g: *const HrgGrammar,
    out: *mut *mut HrgFormula,
) -> HrgStatus {
    guard(|| {
        let g = &handle(g)?.grammar;
        let w = g.w_set();
        let m = merge_b_rules(g).map_err(pre_err)?;
        let f = if check_regular_tree(g, &w).accepted {
            build_from_regular_tree(&m, &w).map_err(pre_err)?
        } else {
            build_from_tree_verifiable(&m).map_err(pre_err)?
        };
        put(out, formula_handle(f))
    })
}

/// Evaluate a closed formula on a type-0 graph.
///
/// # Safety
/// `f` and `g` are live handles; `result` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_formula_eval(
    f: *const HrgFormula,
    g: *const HrgGraph,
    result: *mut bool,
) -> HrgStatus {
    guard(|| {
        let r = handle(f)?
            .checker
            .eval(&handle(g)?.graph, &Valuation::new())
            .map_err(|e| (HrgStatus::Eval, e.to_string()))?;
        put(result, r)
    })
}

/// Print a formula; release the result with [`hrg_string_free`].
///
/// # Safety
/// `f` is a live formula handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hrg_formula_print(
    f: *const HrgFormula,
    out: *mut *mut c_char,
) -> HrgStatus {
    guard(|| {
        let s = CString::new(print_formula(&handle(f)?.formula)).map_err(parse_err)?;
        put(out, s.into_raw())
    })
}

/// # Safety
/// `f` is null or a live formula handle.
#[no_mangle]
pub unsafe extern "C" fn hrg_formula_free(f: *mut HrgFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}
