//! Condition numbers for generalized saddle point systems
//! `[A Bᵀ; C D][x1; x2] = [f; g]` under structured and unstructured
//! perturbations, least-squares specializations, and a Monte-Carlo audit of
//! the resulting first-order bounds.

#![allow(clippy::needless_range_loop)]

pub mod condnum;
pub mod error;
pub mod gsp;
pub mod lsq;
pub mod matkit;
pub mod random;
pub mod structure;
pub mod verify;

pub use condnum::{Case, CnReport, CnTriple, DataMask, Target, Variant};
pub use error::{Error, Result};
pub use gsp::{GspSystem, InverseBlocks};
pub use lsq::WlsProblem;
pub use matkit::DenseMatrix;
pub use structure::{LinearStructure, StructureKind};
