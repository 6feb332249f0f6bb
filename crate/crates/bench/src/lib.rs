//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwtn_core::grounders::{LtnPredicateParams, RwtnDecoderParams, RwtnEncoderParams, INIT_STD};
use rwtn_core::scenes::{generate, DatasetSpec};
use rwtn_core::sii::{build_theory, init_predicates};
use rwtn_core::{Domain, GroundedTheory, Grounder, ModelConfig, ModelKind, ReservoirConfig};

pub fn input(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn ltn(dim: usize, k: usize) -> Grounder {
    Grounder::Ltn(LtnPredicateParams::random(&mut ChaCha8Rng::seed_from_u64(1), dim, k, INIT_STD))
}

pub fn rwtn(dim: usize, units: usize, t: usize) -> Grounder {
    let cfg = ReservoirConfig {
        units,
        ..ReservoirConfig::default()
    };
    Grounder::Rwtn {
        encoder: Arc::new(RwtnEncoderParams::generate(&cfg, dim, "bench").expect("valid config")),
        decoder: RwtnDecoderParams::random(&mut ChaCha8Rng::seed_from_u64(1), units, t, INIT_STD),
    }
}

/// Training theory of a generated dataset with `scenes` scenes.
pub fn theory(kind: ModelKind, wholes: usize, parts: usize, scenes: usize) -> (GroundedTheory, Domain) {
    let ds = generate(&DatasetSpec::new(wholes, parts, scenes, 1)).expect("valid spec");
    let init = init_predicates(&ModelConfig::new(kind, 1), &ds.class_names).expect("valid model");
    build_theory(&ds.train, &ds.class_names, &ds.spec.table, &init).expect("theory builds")
}
