//! Fuzzy first-order logic grounded in tensor networks.
//!
//! Two predicate grounders are provided: a fully trained logic tensor network
//! (LTN) and a randomly weighted tensor network (RWTN) whose bilinear encoder
//! is a frozen reservoir and whose small decoder is trained. Both are fitted
//! by maximizing the satisfiability of a Lukasiewicz theory.

pub mod checkpoint;
pub mod error;
pub mod evalkit;
pub mod fol;
pub mod grounders;
pub mod linalg;
pub mod reservoir;
pub mod rng;
pub mod scenes;
pub mod semantics;
pub mod sii;
pub mod training;

pub use error::{Error, Result};
pub use fol::{Formula, Signature, Term};
pub use linalg::{Matrix, Tensor3};
pub use checkpoint::ModelDocument;
pub use evalkit::{ComparisonReport, PrCurve};
pub use grounders::{Grounder, PartWholeTable};
pub use reservoir::ReservoirConfig;
pub use scenes::{BoxRecord, Dataset, DatasetSpec, Scene};
pub use semantics::{Domain, GroundedTheory, Grounding, Mode};
pub use sii::{ModelConfig, ModelKind};
pub use training::{TrainConfig, TrainOutcome};
