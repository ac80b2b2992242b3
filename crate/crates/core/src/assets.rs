//! Bundled grammar assets. `HRG_ASSET_DIR` overrides the bundled copies.

use std::borrow::Cow;
use std::path::PathBuf;

use crate::grammar::Grammar;
use crate::io::{parse_grammar_file, ParseError};

const BUNDLED: &[(&str, &str)] = &[
    ("tll", include_str!("../assets/tll.hrg")),
    ("tv-tll", include_str!("../assets/tv-tll.hrg")),
    ("cycles", include_str!("../assets/cycles.hrg")),
    ("ab-equal", include_str!("../assets/ab-equal.hrg")),
    ("series-chain", include_str!("../assets/series-chain.hrg")),
    ("rtree-ab", include_str!("../assets/rtree-ab.hrg")),
    ("rtree-ternary", include_str!("../assets/rtree-ternary.hrg")),
    ("multi-b-46", include_str!("../assets/multi-b-46.hrg")),
    ("multi-b-35", include_str!("../assets/multi-b-35.hrg")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Asset text by name (with or without the `.hrg` suffix).
pub fn text(name: &str) -> Option<Cow<'static, str>> {
    let stem = name.strip_suffix(".hrg").unwrap_or(name);
    if let Ok(dir) = std::env::var("HRG_ASSET_DIR") {
        let p = PathBuf::from(dir).join(format!("{stem}.hrg"));
        if let Ok(s) = std::fs::read_to_string(p) {
            return Some(Cow::Owned(s));
        }
    }
    BUNDLED
        .iter()
        .find(|(n, _)| *n == stem)
        .map(|(_, t)| Cow::Borrowed(*t))
}

pub fn grammar(name: &str) -> Result<Grammar, ParseError> {
    let t = text(name).ok_or_else(|| ParseError {
        line: 0,
        message: format!("no asset named {name}"),
    })?;
    parse_grammar_file(&t)
}
