//! Model files: one JSON document holding the configuration, the frozen
//! encoders (each stored once, however many predicates read it), the
//! trainable weights, the optimizer state and the training trace.

use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounders::{Grounder, LtnPredicateParams, PartWholeTable, RwtnDecoderParams, RwtnEncoderParams};
use crate::semantics::Grounding;
use crate::sii::{ModelConfig, SHARED_ENCODER};
use crate::training::{OptimizerState, TraceEntry, TrainConfig};

pub const FORMAT: &str = "rwtn-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredicateDoc {
    Ltn(LtnPredicateParams),
    Rwtn {
        /// Key into [`ModelDocument::encoders`].
        encoder: String,
        decoder: RwtnDecoderParams,
    },
    CrispType {
        class: usize,
        n_classes: usize,
    },
    CrispPartOf {
        table: PartWholeTable,
        th_ir: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub class_names: Vec<String>,
    pub table: Option<PartWholeTable>,
    pub encoders: IndexMap<String, RwtnEncoderParams>,
    pub predicates: IndexMap<String, PredicateDoc>,
    pub optimizer: Option<OptimizerState>,
    pub trace: Vec<TraceEntry>,
}

impl ModelDocument {
    /// Packs the predicates of `g`. An encoder read by one predicate is
    /// stored under that predicate's name; one shared through an `Arc` by
    /// several is stored once under `shared-unary` (numbered if there are more).
    pub fn new(model: ModelConfig, class_names: Vec<String>, table: Option<PartWholeTable>, g: &Grounding) -> Result<Self> {
        let users = |ptr: *const RwtnEncoderParams| {
            g.predicates
                .values()
                .filter(|p| matches!(p, Grounder::Rwtn { encoder, .. } if Arc::as_ptr(encoder) == ptr))
                .count()
        };
        let mut n_shared = 0;
        let mut encoders = IndexMap::new();
        let mut seen: Vec<(*const RwtnEncoderParams, String)> = Vec::new();
        let mut predicates = IndexMap::new();
        for (name, p) in &g.predicates {
            let doc = match p {
                Grounder::Ltn(params) => PredicateDoc::Ltn(params.clone()),
                Grounder::Rwtn { encoder, decoder } => {
                    let ptr = Arc::as_ptr(encoder);
                    let key = match seen.iter().find(|(q, _)| *q == ptr) {
                        Some((_, k)) => k.clone(),
                        None => {
                            let key = if users(ptr) > 1 {
                                n_shared += 1;
                                match n_shared {
                                    1 => SHARED_ENCODER.to_string(),
                                    n => format!("{SHARED_ENCODER}-{n}"),
                                }
                            } else {
                                name.clone()
                            };
                            seen.push((ptr, key.clone()));
                            encoders.insert(key.clone(), (**encoder).clone());
                            key
                        }
                    };
                    PredicateDoc::Rwtn {
                        encoder: key,
                        decoder: decoder.clone(),
                    }
                }
                Grounder::CrispType { class, n_classes } => PredicateDoc::CrispType {
                    class: *class,
                    n_classes: *n_classes,
                },
                Grounder::CrispPartOf { table, th_ir } => PredicateDoc::CrispPartOf {
                    table: table.clone(),
                    th_ir: *th_ir,
                },
                Grounder::Custom(c) => {
                    return Err(Error::Config(format!("custom grounder `{}` cannot be saved", c.name)));
                }
            };
            predicates.insert(name.clone(), doc);
        }
        Ok(Self {
            format: FORMAT.to_string(),
            model,
            train: None,
            class_names,
            table,
            encoders,
            predicates,
            optimizer: None,
            trace: Vec::new(),
        })
    }

    /// Rebuilds the predicates; predicates naming the same encoder share one `Arc`.
    pub fn grounding(&self) -> Result<Grounding> {
        let shared: IndexMap<&str, Arc<RwtnEncoderParams>> = self
            .encoders
            .iter()
            .map(|(k, e)| (k.as_str(), Arc::new(e.clone())))
            .collect();
        let mut g = Grounding::new();
        for (name, doc) in &self.predicates {
            let p = match doc {
                PredicateDoc::Ltn(params) => Grounder::Ltn(params.clone()),
                PredicateDoc::Rwtn { encoder, decoder } => {
                    let e = shared
                        .get(encoder.as_str())
                        .ok_or_else(|| Error::Data(format!("predicate `{name}` names missing encoder `{encoder}`")))?;
                    if e.units() != decoder.units() {
                        return Err(Error::Data(format!("decoder of `{name}` does not match its encoder")));
                    }
                    Grounder::Rwtn {
                        encoder: Arc::clone(e),
                        decoder: decoder.clone(),
                    }
                }
                PredicateDoc::CrispType { class, n_classes } => Grounder::CrispType {
                    class: *class,
                    n_classes: *n_classes,
                },
                PredicateDoc::CrispPartOf { table, th_ir } => Grounder::CrispPartOf {
                    table: table.clone(),
                    th_ir: *th_ir,
                },
            };
            g.predicates.insert(name.clone(), p);
        }
        Ok(g)
    }

    /// Number of stored weights: encoder entries once each, plus every
    /// trainable weight.
    pub fn stored_weights(&self) -> usize {
        let enc: usize = self.encoders.values().map(RwtnEncoderParams::stored_count).sum();
        let own: usize = self
            .predicates
            .values()
            .map(|p| match p {
                PredicateDoc::Ltn(l) => l.param_count(),
                PredicateDoc::Rwtn { decoder, .. } => decoder.param_count(),
                _ => 0,
            })
            .sum();
        enc + own
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != FORMAT {
            return Err(Error::Data(format!("unsupported model format `{}`", doc.format)));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
