use std::path::{Path, PathBuf};
use std::process::Command;

use hrg_core::cmso::parse_formula;
use hrg_core::io::{parse_etd, parse_grammar_file, parse_graph_file};

fn hrg(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hrg"))
        .args(args)
        .output()
        .expect("run hrg");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hrg-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const PATH3: &str = "graph path3 type 0\nvertex a b c\nedge e0 a a b\nedge e1 a b c\n";
const TRI: &str = "graph tri type 0\nvertex a b c\nedge e0 a a b\nedge e1 a b c\nedge e2 a c a\n";

#[test]
fn class_tv_accepts_asset() {
    let (code, out) = hrg(&["class", "tv", "tv-tll.hrg"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("accepted: true"));
}

#[test]
fn class_rejections_exit_one() {
    assert_eq!(hrg(&["class", "regular-tree", "ab-equal"]).0, 1);
    assert_eq!(hrg(&["class", "regular-graph", "tll"]).0, 1);
    assert_eq!(hrg(&["class", "rg", "series-chain"]).0, 0);
}

#[test]
fn member_verdicts() {
    let d = scratch("member");
    let p = write(&d, "path3.hg", PATH3);
    let t = write(&d, "tri.hg", TRI);
    assert_eq!(hrg(&["member", "cycles.hrg", &p]).0, 1);
    let (code, out) = hrg(&["member", "cycles", &t]);
    assert_eq!(code, 0);
    assert!(out.contains("derivation: r"));
}

#[test]
fn eval_exit_codes() {
    let d = scratch("eval");
    let t = write(&d, "tri.hg", TRI);
    let yes = write(
        &d,
        "yes.cmso",
        "(exists-fo x (exists-fo y (edg a x y y)))\n",
    );
    let no = write(&d, "no.cmso", "(exists-fo x (not (= x x)))\n");
    assert_eq!(hrg(&["eval", &t, &yes]).0, 1);
    let loop_ = write(&d, "loop.hg", "graph l type 0\nvertex a\nedge e0 a a a\n");
    assert_eq!(hrg(&["eval", &loop_, &yes]).0, 0);
    assert_eq!(hrg(&["eval", &t, &no]).0, 1);
    assert_eq!(hrg(&["eval", &t, "missing.cmso"]).0, 2);
}

#[test]
fn errors_exit_two() {
    let d = scratch("err");
    let bad = write(&d, "bad.hg", "graph g type 0\nvertex a a\n");
    let (code, out) = hrg(&["validate", &bad]);
    assert_eq!(code, 2);
    assert!(out.starts_with("error: "));
    assert_eq!(hrg(&["class", "tv", "no-such-grammar"]).0, 2);
    assert_eq!(hrg(&["frobnicate"]).0, 2);
}

#[test]
fn kv_format() {
    let d = scratch("kv");
    let t = write(&d, "tri.hg", TRI);
    let (code, out) = hrg(&["--format", "kv", "tw", &t, "--out", d.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "tw=2"), "{out}");
    assert!(out.lines().all(|l| l.contains('=')));
}

#[test]
fn widths_and_cuts() {
    let d = scratch("widths");
    let t = write(&d, "tri.hg", TRI);
    let p = write(&d, "path3.hg", PATH3);
    assert!(hrg(&["etw", &t]).1.contains("etw: 2"));
    assert!(hrg(&["tw", &p]).1.contains("tw: 1"));
    assert_eq!(hrg(&["cut", &t]).0, 1);
    assert_eq!(hrg(&["cut", &p]).0, 0);
}

#[test]
fn artifacts_round_trip() {
    let d = scratch("art");
    let out = d.to_str().unwrap();
    let t = write(&d, "tri.hg", TRI);
    let subject = parse_graph_file(TRI, None).unwrap();

    assert_eq!(hrg(&["etw", &t, "--out", out]).0, 0);
    let etd = std::fs::read_to_string(d.join("etw.etd")).unwrap();
    assert!(parse_etd(&etd, &subject).unwrap().embeddable().is_some());
    let (code, report) = hrg(&["etd-check", &t, d.join("etw.etd").to_str().unwrap()]);
    assert_eq!(code, 0, "{report}");

    assert_eq!(hrg(&["tw", &t, "--out", out]).0, 0);
    assert_eq!(
        hrg(&["etd-check", &t, d.join("tw.etd").to_str().unwrap()]).0,
        0
    );

    assert_eq!(
        hrg(&["transform", "merge-b", "multi-b-46", "--out", out]).0,
        0
    );
    parse_grammar_file(&std::fs::read_to_string(d.join("grammar.hrg")).unwrap()).unwrap();

    assert_eq!(hrg(&["generic", "a:2", "1", "--out", out]).0, 0);
    parse_grammar_file(&std::fs::read_to_string(d.join("generic.hrg")).unwrap()).unwrap();

    assert_eq!(hrg(&["to-cmso", "rtree-ab", "--out", out]).0, 0);
    parse_formula(&std::fs::read_to_string(d.join("formula.cmso")).unwrap()).unwrap();

    let (code, _) = hrg(&["enumerate", "cycles", "--bound", "8", "--out", out]);
    assert_eq!(code, 0);
    parse_graph_file(&std::fs::read_to_string(d.join("m0.hg")).unwrap(), None).unwrap();
}

#[test]
fn compiled_formula_evaluates() {
    let d = scratch("compiled");
    let out = d.to_str().unwrap();
    assert_eq!(hrg(&["to-cmso", "cycles", "--out", out]).0, 0);
    let f = d.join("formula.cmso");
    let t = write(&d, "tri.hg", TRI);
    let p = write(&d, "path3.hg", PATH3);
    assert_eq!(hrg(&["eval", &t, f.to_str().unwrap()]).0, 0);
    assert_eq!(hrg(&["eval", &p, f.to_str().unwrap()]).0, 1);
}

#[test]
fn reports_are_deterministic() {
    for args in [
        &["enumerate", "tv-tll", "--bound", "9"][..],
        &["class", "rt", "rtree-ternary"],
        &["to-cmso", "tv-tll"],
    ] {
        assert_eq!(hrg(args), hrg(args));
    }
}
