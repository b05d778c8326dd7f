//! Style-based date prediction for handwritten manuscripts.
//!
//! The crate turns binarized manuscript images into handwriting-style
//! vectors (an allographic fraglet-codebook histogram adjoined with a hinge
//! angle co-occurrence histogram), and regresses those vectors onto
//! radiocarbon calendar-probability curves with a per-bin Bayesian ridge
//! model. Around that core it provides elastic "rubber-sheet" augmentation,
//! prior balancing, leave-one-out validation and a synthetic corpus with a
//! known ground truth.
//!
//! The guide in `book/` walks through each stage; its code listings are
//! compiled and run as doctests of this crate.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod chrono;
pub mod error;
pub mod eval;
pub mod ink;
pub mod model;
pub mod morph;
pub mod pipeline;
pub mod plot;
pub mod regress;
pub mod seeds;
pub mod stylefeat;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ink.md")]
    mod ink {}
    #[doc = include_str!("../../../book/src/style.md")]
    mod style {}
    #[doc = include_str!("../../../book/src/morph.md")]
    mod morph {}
    #[doc = include_str!("../../../book/src/radiocarbon.md")]
    mod radiocarbon {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/balancing.md")]
    mod balancing {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
