//! Semantic image interpretation on generated scenes: the type and part-of
//! predicates, the grounded theory built from labelled boxes, and the three
//! model variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fol::{Formula, Signature, Term};
use crate::grounders::{Grounder, LtnPredicateParams, PartWholeTable, RwtnDecoderParams, RwtnEncoderParams, INIT_STD};
use crate::reservoir::ReservoirConfig;
use crate::rng;
use crate::checkpoint::ModelDocument;
use crate::scenes::{Dataset, Scene};
use crate::training::{self, TrainConfig};
use crate::semantics::{mereology_constraints, Domain, GroundedTheory, Grounding};

pub const PART_OF: &str = "partOf";
/// Encoder name used by every unary predicate of an `rwtn-shared` model.
pub const SHARED_ENCODER: &str = "shared-unary";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ltn")]
    Ltn,
    #[serde(rename = "rwtn")]
    Rwtn,
    #[serde(rename = "rwtn-shared")]
    RwtnShared,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ltn, ModelKind::Rwtn, ModelKind::RwtnShared];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ltn => "ltn",
            ModelKind::Rwtn => "rwtn",
            ModelKind::RwtnShared => "rwtn-shared",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected ltn, rwtn or rwtn-shared)")))
    }
}

/// Architecture hyperparameters of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// LTN tensor slices.
    pub k: usize,
    /// RWTN decoder hidden width.
    pub t: usize,
    pub reservoir: ReservoirConfig,
    /// Seeds the initial trainable weights.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            k: 6,
            t: 20,
            reservoir: ReservoirConfig {
                seed,
                ..ReservoirConfig::default()
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.t == 0 {
            return Err(Error::Config("k and t must be >= 1".into()));
        }
        self.reservoir.validate()
    }
}

/// Type predicates in class order, then `partOf`.
pub fn signature(class_names: &[String]) -> Result<Signature> {
    let mut sig = Signature::new();
    for c in class_names {
        sig.add_predicate(c.clone(), 1)?;
    }
    sig.add_predicate(PART_OF, 2)?;
    Ok(sig)
}

fn box_constant(id: usize) -> String {
    format!("b{id}")
}

/// Fresh trainable predicates for every class plus `partOf`.
pub fn init_predicates(config: &ModelConfig, class_names: &[String]) -> Result<Grounding> {
    config.validate()?;
    let unary = class_names.len() + 4;
    let mut g = Grounding::new();
    let names = class_names.iter().map(String::as_str).chain([PART_OF]);
    let shared = match config.kind {
        ModelKind::RwtnShared => Some(Arc::new(RwtnEncoderParams::generate(
            &config.reservoir,
            unary,
            SHARED_ENCODER,
        )?)),
        _ => None,
    };
    for name in names {
        let dim = if name == PART_OF { 2 * unary } else { unary };
        let mut init = rng::named_stream(config.seed, "init", name, &[]);
        let grounder = match config.kind {
            ModelKind::Ltn => Grounder::Ltn(LtnPredicateParams::random(&mut init, dim, config.k, INIT_STD)),
            ModelKind::Rwtn | ModelKind::RwtnShared => {
                let encoder = match (&shared, name == PART_OF) {
                    (Some(e), false) => Arc::clone(e),
                    _ => Arc::new(RwtnEncoderParams::generate(&config.reservoir, dim, name)?),
                };
                let decoder = RwtnDecoderParams::random(&mut init, config.reservoir.units, config.t, INIT_STD);
                Grounder::Rwtn { encoder, decoder }
            }
        };
        g.predicates.insert(name.to_string(), grounder);
    }
    Ok(g)
}

/// Ground literals and part-whole axioms for the labelled `scenes`, with
/// each scene a separate quantifier group.
///
/// Every box `b` of class `C` contributes `C(b)` and `~C'(b)` for the other
/// classes; every ordered pair of distinct boxes in a scene contributes
/// `partOf(b, b')` or its negation.
pub fn build_theory(
    scenes: &[Scene],
    class_names: &[String],
    table: &PartWholeTable,
    predicates: &Grounding,
) -> Result<(GroundedTheory, Domain)> {
    if table.n_classes() != class_names.len() {
        return Err(Error::Data(format!(
            "{} class names for a table over {} classes",
            class_names.len(),
            table.n_classes()
        )));
    }
    let mut sig = signature(class_names)?;
    let mut g = predicates.clone();
    g.constants.clear();
    let mut clauses = Vec::new();
    let mut groups = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let mut group = Vec::with_capacity(scene.boxes.len());
        for b in &scene.boxes {
            if b.class >= class_names.len() {
                return Err(Error::Data(format!("box {} has class {} out of range", b.id, b.class)));
            }
            let name = box_constant(b.id);
            group.push(sig.add_constant(name.clone())?);
            g.constants.insert(name, b.grounding_vector());
        }
        groups.push(group);
        for b in &scene.boxes {
            let c = || vec![Term::constant(box_constant(b.id))];
            for (j, cls) in class_names.iter().enumerate() {
                let atom = Formula::atom(cls.clone(), c());
                clauses.push(if j == b.class { atom } else { atom.not() });
            }
            for other in &scene.boxes {
                if other.id == b.id {
                    continue;
                }
                let args = vec![Term::constant(box_constant(b.id)), Term::constant(box_constant(other.id))];
                let atom = Formula::atom(PART_OF, args);
                clauses.push(if b.parent == Some(other.id) { atom } else { atom.not() });
            }
        }
    }
    clauses.extend(mereology_constraints(table, &sig)?);
    Ok((GroundedTheory::new(sig, clauses, g)?, Domain::new(groups)))
}

/// Initializes `model`, trains it on the training scenes of `ds` and packs
/// the result with its trace and optimizer state.
pub fn fit(ds: &Dataset, model: &ModelConfig, train: &TrainConfig) -> Result<ModelDocument> {
    let init = init_predicates(model, &ds.class_names)?;
    let (theory, domain) = build_theory(&ds.train, &ds.class_names, &ds.spec.table, &init)?;
    let out = training::train(&theory, &domain, train)?;
    let mut doc = ModelDocument::new(model.clone(), ds.class_names.clone(), Some(ds.spec.table.clone()), &out.grounding)?;
    doc.train = Some(train.clone());
    doc.optimizer = Some(out.optimizer);
    doc.trace = out.trace;
    Ok(doc)
}
