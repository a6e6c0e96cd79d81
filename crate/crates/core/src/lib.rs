//! Locate the source of a Maven artifact, infer how it was built from its
//! CI workflows and emit a rebuild recipe.

pub mod buildspec;
pub mod command;
pub mod coordinates;
pub mod discovery;
pub mod pipeline;
pub mod rebuild;
pub mod shell;
pub mod tags;
pub mod workflow;
