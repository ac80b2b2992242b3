//! The `hrg` command line: argument model, command execution and reports.
//!
//! Exit status is 0 for affirmative results, 1 for negative verdicts and 2
//! for errors. Reports are line-oriented `key: value` (or `key=value` with
//! `--format kv`); artifacts go to `--out` or, without it, after the report.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::assets;
use crate::classify::{
    check_regular_graph, check_regular_tree, check_tree_verifiable, find_w, ClassVerdict,
};
use crate::cmso::{
    build_from_regular_tree, build_from_tree_verifiable, parse_formula, print_formula, to_mso,
    Checker, Valuation, F,
};
use crate::decomposition::{
    etw_exact, has_connected_cut, treewidth_exact, validate_etd, validate_td, Verdict,
};
use crate::enumerate::{enumerate_language, membership, Root};
use crate::grammar::{validate_grammar, DerivationTree, Grammar};
use crate::hypergraph::Alphabet;
use crate::io::{
    parse_etd, parse_grammar_file, parse_graph_file, print_etd_for, print_grammar, print_graph,
    NamedGraph,
};
use crate::transforms::{
    generic_etw_grammar, merge_b_rules, regular_single_root, regular_to_tree_verifiable,
};

#[derive(Parser, Debug)]
#[command(
    name = "hrg",
    version,
    about = "Hyperedge-replacement grammar workbench"
)]
pub struct Cli {
    /// Report style.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Directory for artifact files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Kv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassKind {
    #[value(alias = "rt")]
    RegularTree,
    #[value(alias = "tree-verifiable")]
    Tv,
    #[value(alias = "rg")]
    RegularGraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    /// Merge B-rules so each (u, w) pair has at most one.
    MergeB,
    /// Single-root normal form of a regular graph grammar.
    SingleRoot,
    /// Regular graph grammar to tree-verifiable grammar.
    ToTv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a `.hg` graph or `.hrg` grammar.
    Validate { file: String },
    /// Decide a grammar class.
    Class {
        kind: ClassKind,
        grammar: String,
        /// Comma-separated W set; defaults to the declared kinds, else searched.
        #[arg(long)]
        w: Option<String>,
    },
    /// Enumerate the language up to a size bound.
    Enumerate {
        grammar: String,
        #[arg(long, default_value_t = 12)]
        bound: usize,
    },
    /// Decide membership of a type-0 graph.
    Member { grammar: String, graph: String },
    /// Exact tree-width.
    Tw { graph: String },
    /// Exact embeddable tree-width.
    Etw { graph: String },
    /// Validate a decomposition file against a graph.
    EtdCheck { graph: String, etd: String },
    /// Compile a grammar to a CMSO sentence.
    ToCmso {
        grammar: String,
        /// Rewrite cardinality atoms away (exponents 1 only).
        #[arg(long)]
        mso: bool,
    },
    /// Evaluate a closed formula on a type-0 graph.
    Eval { graph: String, formula: String },
    /// Apply a grammar transformation.
    Transform {
        kind: TransformKind,
        grammar: String,
    },
    /// Generic grammar for embeddable tree-width at most n.
    Generic {
        /// Alphabet as `label:arity,...`.
        alphabet: String,
        n: usize,
    },
    /// Search for a connected cut.
    Cut { graph: String },
}

/// Result of one command.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub status: i32,
    pub lines: Vec<(String, String)>,
    pub artifacts: Vec<(String, String)>,
}

impl Report {
    fn new(status: i32) -> Self {
        Report {
            status,
            ..Default::default()
        }
    }

    fn kv(mut self, k: &str, v: impl ToString) -> Self {
        self.lines.push((k.to_string(), v.to_string()));
        self
    }

    fn push(&mut self, k: &str, v: impl ToString) {
        self.lines.push((k.to_string(), v.to_string()));
    }

    fn artifact(mut self, name: impl Into<String>, body: String) -> Self {
        self.artifacts.push((name.into(), body));
        self
    }

    fn error(msg: impl ToString) -> Self {
        Report::new(2).kv("error", msg)
    }

    pub fn render(&self, format: Format, inline_artifacts: bool) -> String {
        let mut s = String::new();
        let sep = if format == Format::Kv { "=" } else { ": " };
        for (k, v) in &self.lines {
            writeln!(s, "{k}{sep}{v}").unwrap();
        }
        if inline_artifacts {
            for (_, body) in &self.artifacts {
                s.push_str(body);
                if !body.ends_with('\n') {
                    s.push('\n');
                }
            }
        }
        s
    }
}

type Res<T> = Result<T, String>;

fn read(path: &str) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))
}

/// A grammar file, or a bundled asset name when no such file exists.
fn load_grammar(arg: &str) -> Res<Grammar> {
    let text = if Path::new(arg).exists() {
        read(arg)?
    } else {
        assets::text(arg)
            .ok_or_else(|| format!("{arg}: no such file or asset"))?
            .into_owned()
    };
    parse_grammar_file(&text).map_err(|e| format!("{arg}: {e}"))
}

fn load_graph(arg: &str) -> Res<NamedGraph> {
    parse_graph_file(&read(arg)?, None).map_err(|e| format!("{arg}: {e}"))
}

fn load_formula(arg: &str) -> Res<F> {
    parse_formula(&read(arg)?).map_err(|e| format!("{arg}: {e}"))
}

fn parse_alphabet(s: &str) -> Res<Alphabet> {
    let mut pairs = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (l, k) = part
            .split_once(':')
            .ok_or_else(|| format!("bad alphabet entry {part}"))?;
        let k: usize = k.parse().map_err(|_| format!("bad arity in {part}"))?;
        pairs.push((l.to_string(), k));
    }
    Ok(Alphabet::new(pairs))
}

fn fmt_derivation(t: &DerivationTree) -> String {
    if t.children.is_empty() {
        return format!("r{}", t.rule + 1);
    }
    let kids: Vec<String> = t.children.iter().map(fmt_derivation).collect();
    format!("r{}({})", t.rule + 1, kids.join(" "))
}

fn fmt_set<T: ToString>(it: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = it.into_iter().map(|x| x.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(",")
    }
}

fn verdict_report(v: &ClassVerdict, w: Option<&BTreeSet<String>>) -> Report {
    let mut r = Report::new(if v.accepted { 0 } else { 1 })
        .kv("class", v.class)
        .kv("accepted", v.accepted);
    if let Some(w) = w {
        r.push("w", fmt_set(w));
    }
    r.push("violations", v.violations.len());
    for f in &v.violations {
        r.push("violation", f);
    }
    r
}

fn decomp_verdict(v: &Verdict, width: usize) -> Report {
    let mut r = Report::new(if v.is_valid() { 0 } else { 1 })
        .kv("valid", v.is_valid())
        .kv("width", width);
    for x in &v.violations {
        r.push("violation", format!("{}: {}", x.clause, x.message));
    }
    r
}

fn resolve_w(
    g: &Grammar,
    w: &Option<String>,
    check: fn(&Grammar, &BTreeSet<String>) -> ClassVerdict,
) -> BTreeSet<String> {
    match w {
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(String::from)
            .collect(),
        None if g.nonterminals.iter().any(|n| n.kind.is_some()) => g.w_set(),
        None => find_w(g, check).unwrap_or_default(),
    }
}

fn class(kind: ClassKind, g: &Grammar, w: &Option<String>) -> Res<Report> {
    Ok(match kind {
        ClassKind::Tv => {
            verdict_report(&check_tree_verifiable(g).map_err(|e| e.to_string())?, None)
        }
        ClassKind::RegularTree => {
            let w = resolve_w(g, w, check_regular_tree);
            verdict_report(&check_regular_tree(g, &w), Some(&w))
        }
        ClassKind::RegularGraph => {
            let w = resolve_w(g, w, check_regular_graph);
            verdict_report(&check_regular_graph(g, &w), Some(&w))
        }
    })
}

fn to_cmso(g: &Grammar, mso: bool) -> Res<Report> {
    let w = resolve_w(g, &None, check_regular_tree);
    let (construction, f) = if check_regular_tree(g, &w).accepted {
        let mut m = merge_b_rules(g).map_err(|e| e.to_string())?;
        m.set_w(&w);
        (
            "regular-tree",
            build_from_regular_tree(&m, &w).map_err(|e| e.to_string())?,
        )
    } else if check_tree_verifiable(g)
        .map_err(|e| e.to_string())?
        .accepted
    {
        let m = merge_b_rules(g).map_err(|e| e.to_string())?;
        (
            "tree-verifiable",
            build_from_tree_verifiable(&m).map_err(|e| e.to_string())?,
        )
    } else {
        return Err("grammar is neither regular tree nor tree-verifiable".into());
    };
    let f = if mso {
        to_mso(&f).map_err(|e| e.to_string())?
    } else {
        f
    };
    let text = print_formula(&f) + "\n";
    Ok(Report::new(0)
        .kv("construction", construction)
        .kv("dag-size", f.dag_size())
        .kv("sentence", f.is_sentence())
        .artifact("formula.cmso", text))
}

fn transform(kind: TransformKind, g: &Grammar) -> Res<Report> {
    let out = match kind {
        TransformKind::MergeB => merge_b_rules(g),
        TransformKind::SingleRoot => regular_single_root(g),
        TransformKind::ToTv => regular_to_tree_verifiable(g),
    }
    .map_err(|e| e.to_string())?;
    Ok(Report::new(0)
        .kv("nonterminals", out.nonterminals.len())
        .kv("rules", out.rules.len())
        .kv("axioms", out.axioms.len())
        .artifact("grammar.hrg", print_grammar(&out)))
}

fn run_inner(cmd: &Command) -> Res<Report> {
    match cmd {
        Command::Validate { file } => {
            let text = read(file)?;
            if text.lines().any(|l| l.trim_start().starts_with("graph ")) {
                let g = parse_graph_file(&text, None).map_err(|e| format!("{file}: {e}"))?;
                Ok(Report::new(0)
                    .kv("kind", "graph")
                    .kv("type", g.graph.type_n())
                    .kv("vertices", g.graph.n_vertices)
                    .kv("edges", g.graph.n_edges())
                    .kv("valid", true))
            } else {
                // Parsing already runs the grammar checks; report them explicitly.
                let g = parse_grammar_file(&text).map_err(|e| format!("{file}: {e}"))?;
                let fs = validate_grammar(&g);
                let mut r = Report::new(if fs.is_empty() { 0 } else { 1 })
                    .kv("kind", "grammar")
                    .kv("nonterminals", g.nonterminals.len())
                    .kv("rules", g.rules.len())
                    .kv("valid", fs.is_empty());
                for f in fs {
                    r.push("violation", f);
                }
                Ok(r)
            }
        }
        Command::Class { kind, grammar, w } => class(*kind, &load_grammar(grammar)?, w),
        Command::Enumerate { grammar, bound } => {
            let g = load_grammar(grammar)?;
            let lang = enumerate_language(&g, &Root::Axioms, *bound).map_err(|e| e.to_string())?;
            let mut r = Report::new(0).kv("bound", bound).kv("members", lang.len());
            for (i, m) in lang.members.values().enumerate() {
                let name = format!("m{i}");
                r.push(
                    "member",
                    format!(
                        "{name} size={} derivation={}",
                        m.graph.size(),
                        fmt_derivation(&m.derivation)
                    ),
                );
                r.artifacts
                    .push((format!("{name}.hg"), print_graph(&name, &m.graph)));
            }
            Ok(r)
        }
        Command::Member { grammar, graph } => {
            let g = load_grammar(grammar)?;
            let h = load_graph(graph)?;
            Ok(match membership(&g, &h.graph).map_err(|e| e.to_string())? {
                Some(t) => Report::new(0)
                    .kv("member", true)
                    .kv("derivation", fmt_derivation(&t)),
                None => Report::new(1).kv("member", false),
            })
        }
        Command::Tw { graph } => {
            let h = load_graph(graph)?;
            let (w, td) = treewidth_exact(&h.graph).map_err(|e| e.to_string())?;
            Ok(Report::new(0)
                .kv("tw", w)
                .kv("nodes", td.len())
                .artifact("tw.etd", print_etd_for(&h, &td, None, None)))
        }
        Command::Etw { graph } => {
            let h = load_graph(graph)?;
            Ok(match etw_exact(&h.graph).map_err(|e| e.to_string())? {
                Some((w, etd)) => Report::new(0)
                    .kv("etw", w)
                    .kv("nodes", etd.len_nodes())
                    .artifact(
                        "etw.etd",
                        print_etd_for(&h, &etd.base, Some(&etd.kinds), etd.mode.as_ref()),
                    ),
                None => Report::new(1).kv("etw", "absent"),
            })
        }
        Command::EtdCheck { graph, etd } => {
            let h = load_graph(graph)?;
            let d = parse_etd(&read(etd)?, &h).map_err(|e| format!("{etd}: {e}"))?;
            Ok(match d.embeddable() {
                Some(e) => {
                    decomp_verdict(&validate_etd(&h.graph, &e), e.width()).kv("embeddable", true)
                }
                None => {
                    let (v, w) = validate_td(&h.graph, &d.td).map_err(|e| e.to_string())?;
                    decomp_verdict(&v, w).kv("embeddable", false)
                }
            })
        }
        Command::ToCmso { grammar, mso } => to_cmso(&load_grammar(grammar)?, *mso),
        Command::Eval { graph, formula } => {
            let h = load_graph(graph)?;
            let f = load_formula(formula)?;
            let b = Checker::new(&f)
                .eval(&h.graph, &Valuation::new())
                .map_err(|e| e.to_string())?;
            Ok(Report::new(if b { 0 } else { 1 }).kv("satisfied", b))
        }
        Command::Transform { kind, grammar } => transform(*kind, &load_grammar(grammar)?),
        Command::Generic { alphabet, n } => {
            let al = parse_alphabet(alphabet)?;
            let g = generic_etw_grammar(&al, *n).map_err(|e| e.to_string())?;
            Ok(Report::new(0)
                .kv("nonterminals", g.nonterminals.len())
                .kv("rules", g.rules.len())
                .artifact("generic.hrg", print_grammar(&g)))
        }
        Command::Cut { graph } => {
            let h = load_graph(graph)?;
            Ok(
                match has_connected_cut(&h.graph).map_err(|e| e.to_string())? {
                    Some(c) => Report::new(0)
                        .kv(
                            "cut",
                            fmt_set(c.cut.iter().map(|v| &h.vertex_ids[*v as usize])),
                        )
                        .kv(
                            "left",
                            fmt_set(c.components.0.iter().map(|v| &h.vertex_ids[*v as usize])),
                        )
                        .kv(
                            "right",
                            fmt_set(c.components.1.iter().map(|v| &h.vertex_ids[*v as usize])),
                        ),
                    None => Report::new(1).kv("cut", "absent"),
                },
            )
        }
    }
}

/// Execute a command and write its artifacts to `cli.out` when given.
pub fn run(cli: &Cli) -> Report {
    let mut r = run_inner(&cli.command).unwrap_or_else(Report::error);
    if let Some(dir) = &cli.out {
        let written = std::fs::create_dir_all(dir).and_then(|_| {
            r.artifacts
                .iter()
                .try_for_each(|(name, body)| std::fs::write(dir.join(name), body))
        });
        match written {
            Ok(()) => {
                let names: Vec<String> = r.artifacts.iter().map(|(n, _)| n.clone()).collect();
                if !names.is_empty() {
                    r.push("written", names.join(","));
                }
            }
            Err(e) => return Report::error(format!("{}: {e}", dir.display())),
        }
    }
    r
}

/// Parse `args`, run, and return the exit status and the rendered output.
pub fn main_with<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => {
            let r = run(&cli);
            (r.status, r.render(cli.format, cli.out.is_none()))
        }
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            (code, e.to_string())
        }
    }
}
