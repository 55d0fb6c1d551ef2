pub mod augment;
pub mod classify;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gat;
pub mod graph;
pub mod katz;
pub mod lp2;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result, Stage};

/// The guide's chapters, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/katz.md")]
    mod katz {}
    #[doc = include_str!("../../../book/src/gat.md")]
    mod gat {}
    #[doc = include_str!("../../../book/src/second-step.md")]
    mod second_step {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/final-classifier.md")]
    mod final_classifier {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
