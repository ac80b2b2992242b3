//! Hyperedge-replacement grammar workbench: graph algebra, grammar classes,
//! grammar transformations, CMSO compilation and evaluation, and exact
//! (embeddable) tree-width tools.

pub mod assets;
pub mod canon;
pub mod classify;
pub mod cli;
pub mod cmso;
pub mod corpus;
pub mod decomposition;
pub mod enumerate;
pub mod grammar;
pub mod hypergraph;
pub mod io;
pub mod transforms;
