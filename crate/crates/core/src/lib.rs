//! Toolkit for grading chemistry-assistant outputs and curating their
//! training data: SMILES parsing and canonicalization, staged validity
//! checking, reaction and route feasibility rules, structured-output
//! linting, scaffold-aware dataset splitting, evaluation statistics, and a
//! toy-scale LoRA trainer.

pub mod curation;
pub mod element;
pub mod lora;
pub mod molgraph;
pub mod protocol;
pub mod routes;
pub mod stats;
pub mod synth;
pub mod validity;

pub use curation::{DatasetRecord, Split, SplitAssignment, TaskCategory};
pub use element::Element;
pub use molgraph::{
    parse_smiles, Atom, Bond, BondOrder, Chirality, GeometryMark, MoleculeGraph, Scaffold,
    SyntaxError, SyntaxErrorKind,
};
pub use protocol::{FormatProfile, FormatReport, ReasoningTrace, StructuredDoc};
pub use routes::{FeasibilityReport, Reaction, Route};
pub use stats::{ComparisonResult, RateEstimate, StatsError};
pub use validity::{TaxonomyCode, ValidityReport, ValidityStage};
