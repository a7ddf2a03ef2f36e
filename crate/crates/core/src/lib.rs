//! Molecular graphs, SMILES, mutation-based dataset generation, a small
//! transformer autoencoder and latent-space evaluation.

pub mod descriptors;
pub mod error;
pub mod eval;
pub mod model;
pub mod molgraph;
pub mod mutation;
pub mod pipeline;
pub mod smiles;

pub use error::{Error, Result};
pub use molgraph::{ged_exact, is_isomorphic, Atom, BondOrder, Element, GedOutcome, MolGraph};
pub use mutation::{AtomDistribution, MutantRecord, MutationKind, MutationOp, Verdict};
