//! Best-satisfiability training.
//!
//! The loss is `1 - sat + λ‖θ‖²`, where `sat` is the harmonic mean of the
//! clause truths and `θ` collects every trainable weight (LTN predicates and
//! RWTN decoders; RWTN encoders stay frozen). Gradients are derived by hand
//! for the two architectures and pushed through the compiled theory by its
//! reverse sweep. Updates are full-batch RMSProp.

mod heads;

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::grounders::{Grounder, RwtnEncoderParams};
use crate::linalg::{cholesky_solve, Matrix};
use crate::semantics::{harmonic_mean_weight, satisfiability, Domain, GroundedTheory, Grounding, Mode, Program};

use heads::{EncoderCache, Head};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// How RWTN decoders are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderFit {
    /// Same RMSProp loop as every other weight.
    RmsProp,
    /// Hidden weights stay at their initial values; output weights come from
    /// a closed-form ridge fit to the theory's ground literals.
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// L2 coefficient on the trainable weights.
    pub lambda: f64,
    pub rmsprop: RmsPropConfig,
    /// Seeds the training noise of RWTN predicates.
    pub seed: u64,
    pub decoder_fit: DecoderFit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lambda: 1e-10,
            rmsprop: RmsPropConfig::default(),
            seed: 0,
            decoder_fit: DecoderFit::RmsProp,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        let r = &self.rmsprop;
        if !(r.learning_rate >= 0.0) || !(0.0..1.0).contains(&r.decay) || !(r.epsilon > 0.0) {
            return Err(Error::Config(
                "rmsprop needs learning_rate >= 0, decay in [0, 1) and epsilon > 0".into(),
            ));
        }
        Ok(())
    }
}

/// RMSProp running averages of squared gradients, per trainable predicate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub mean_square: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub loss: f64,
    pub satisfiability: f64,
}

/// Renders a trace as `epoch,loss,satisfiability` lines with a header.
pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("epoch,loss,satisfiability\n");
    for e in trace {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.satisfiability));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub grounding: Grounding,
    /// Entry `e` is measured in eval mode after `e` updates.
    pub trace: Vec<TraceEntry>,
    pub optimizer: OptimizerState,
}

impl TrainOutcome {
    pub fn final_satisfiability(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |e| e.satisfiability)
    }
}

fn penalty(g: &Grounding) -> f64 {
    g.predicates
        .values()
        .map(|p| p.params_flat().iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// `1 - sat + λ‖θ‖²` evaluated through the compiled theory.
pub fn loss(theory: &GroundedTheory, domain: &Domain, lambda: f64, mode: Mode) -> Result<f64> {
    let prog = Program::compile(&theory.clauses, &theory.grounding, domain)?;
    let atoms = prog.atom_values(&theory.grounding, mode)?;
    let truths = prog.forward(&atoms, &mut Vec::new());
    Ok(1.0 - satisfiability(&truths)? + lambda * penalty(&theory.grounding))
}

struct Trainer {
    program: Program,
    heads: Vec<Head>,
    atoms: Vec<f64>,
    vals: Vec<f64>,
    adj: Vec<f64>,
    atom_adj: Vec<f64>,
}

impl Trainer {
    fn new(theory: &GroundedTheory, domain: &Domain) -> Result<Self> {
        let g = &theory.grounding;
        let program = Program::compile(&theory.clauses, g, domain)?;
        // Fixed grounders are evaluated once; trainable slots are overwritten every pass.
        let mut atoms = vec![0.0; program.slots().len()];
        let mut cache = EncoderCache::default();
        let mut heads = Vec::new();
        for (p, (name, grounder)) in g.predicates.iter().enumerate() {
            let slots = program.slots_of(p).to_vec();
            if grounder.is_learnable() {
                if slots.is_empty() {
                    continue;
                }
                heads.push(Head::new(name, grounder, slots, program.inputs_of(p), &mut cache)?);
            } else {
                for &s in &slots {
                    let slot = &program.slots()[s as usize];
                    atoms[s as usize] = grounder.truth(&slot.input, None)?.clamp(0.0, 1.0);
                }
            }
        }
        let n_atoms = atoms.len();
        Ok(Self {
            program,
            heads,
            atoms,
            vals: Vec::new(),
            adj: Vec::new(),
            atom_adj: vec![0.0; n_atoms],
        })
    }

    fn penalty(&self) -> f64 {
        self.heads.iter().map(Head::penalty).sum()
    }

    /// Clause truths for the current weights.
    fn forward(&mut self, mode: Mode) -> Vec<f64> {
        for h in &mut self.heads {
            h.forward(mode, &mut self.atoms);
        }
        self.program.forward(&self.atoms, &mut self.vals)
    }

    /// Loss gradient per head (flat layout), given the truths of the last forward.
    fn backward(&mut self, truths: &[f64], lambda: f64) -> Result<Vec<Vec<f64>>> {
        let sat = satisfiability(truths)?;
        let root_adj: Vec<f64> = truths
            .iter()
            .map(|&t| -harmonic_mean_weight(t, sat, truths.len()))
            .collect();
        self.program
            .backward(&self.vals, &root_adj, &mut self.adj, &mut self.atom_adj);
        Ok(self
            .heads
            .iter()
            .map(|h| {
                let mut g = h.backward(&self.atom_adj);
                for (gi, th) in g.iter_mut().zip(h.params()) {
                    *gi += 2.0 * lambda * th;
                }
                g
            })
            .collect())
    }

    fn write_back(&self, g: &mut Grounding) -> Result<()> {
        for h in &self.heads {
            g.predicates
                .get_mut(h.name())
                .expect("head comes from this grounding")
                .set_params_flat(h.params())?;
        }
        Ok(())
    }
}

/// Loss and its gradient with respect to every trainable predicate, keyed by
/// predicate name, in the layout of [`Grounder::params_flat`].
pub fn loss_and_gradients(
    theory: &GroundedTheory,
    domain: &Domain,
    lambda: f64,
    mode: Mode,
) -> Result<(f64, IndexMap<String, Vec<f64>>)> {
    let mut t = Trainer::new(theory, domain)?;
    let truths = t.forward(mode);
    let loss = 1.0 - satisfiability(&truths)? + lambda * t.penalty();
    let grads = t.backward(&truths, lambda)?;
    let names = t.heads.iter().map(|h| h.name().to_string());
    Ok((loss, names.zip(grads).collect()))
}

const RIDGE_TARGET: f64 = 0.95;

/// Ground literals `P(..)` / `~P(..)` of the theory as `(slot, target)` pairs.
fn literal_targets(theory: &GroundedTheory, domain: &Domain, program: &Program) -> Result<Vec<(u32, f64)>> {
    use crate::fol::Formula;
    let mut out = Vec::new();
    for c in &theory.clauses {
        let (atom, target) = match c {
            Formula::Atom(..) => (c, 1.0),
            Formula::Not(inner) if matches!(**inner, Formula::Atom(..)) => (&**inner, 0.0),
            _ => continue,
        };
        let single = Program::compile(std::slice::from_ref(atom), &theory.grounding, domain)?;
        let slot = &single.slots()[0];
        let idx = program
            .slots()
            .iter()
            .position(|s| s.predicate == slot.predicate && s.args == slot.args)
            .expect("literal atoms are slots of the full program");
        out.push((idx as u32, target));
    }
    Ok(out)
}

fn ridge_fit_decoders(t: &mut Trainer, theory: &GroundedTheory, domain: &Domain, lambda: f64) -> Result<()> {
    let targets = literal_targets(theory, domain, &t.program)?;
    let logit = (RIDGE_TARGET / (1.0 - RIDGE_TARGET)).ln();
    for h in &mut t.heads {
        let Head::Rwtn(r) = h else { continue };
        let rows: Vec<(usize, f64)> = targets
            .iter()
            .filter_map(|&(s, y)| r.row_of(s).map(|row| (row, if y > 0.5 { logit } else { -logit })))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let hidden = r.eval_hidden();
        let tdim = hidden.cols();
        let mut gram = Matrix::zeros(tdim, tdim);
        let mut rhs = Matrix::zeros(tdim, 1);
        for &(row, y) in &rows {
            let hrow = hidden.row(row);
            for i in 0..tdim {
                for j in 0..tdim {
                    gram.set(i, j, gram.get(i, j) + hrow[i] * hrow[j]);
                }
                rhs.set(i, 0, rhs.get(i, 0) + hrow[i] * y);
            }
        }
        for i in 0..tdim {
            gram.set(i, i, gram.get(i, i) + 2.0 * lambda.max(1e-12));
        }
        let k = cholesky_solve(&gram, &rhs)?;
        r.set_output(k.as_slice());
    }
    Ok(())
}

/// Trains every learnable predicate of `theory` for `config.epochs` epochs.
///
/// Trace entry `e` holds the eval-mode loss and satisfiability after `e`
/// updates, so the trace has `epochs + 1` entries.
pub fn train(theory: &GroundedTheory, domain: &Domain, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut t = Trainer::new(theory, domain)?;
    if config.decoder_fit == DecoderFit::Ridge {
        ridge_fit_decoders(&mut t, theory, domain, config.lambda)?;
    }
    let frozen: Vec<bool> = t
        .heads
        .iter()
        .map(|h| config.decoder_fit == DecoderFit::Ridge && matches!(h, Head::Rwtn(_)))
        .collect();
    let mut opt = OptimizerState {
        step: 0,
        mean_square: t
            .heads
            .iter()
            .map(|h| (h.name().to_string(), vec![0.0; h.params().len()]))
            .collect(),
    };
    let noisy = t.heads.iter().any(Head::is_noisy);
    let rms = config.rmsprop;
    let mut trace = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..=config.epochs {
        let truths = t.forward(Mode::Eval);
        let sat = satisfiability(&truths)?;
        let loss = 1.0 - sat + config.lambda * t.penalty();
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        trace.push(TraceEntry {
            epoch,
            loss,
            satisfiability: sat,
        });
        if epoch == config.epochs {
            break;
        }
        let truths = if noisy {
            t.forward(Mode::Train {
                seed: config.seed,
                epoch: epoch as u64,
            })
        } else {
            truths
        };
        let grads = t.backward(&truths, config.lambda)?;
        opt.step += 1;
        for (i, (h, g)) in t.heads.iter_mut().zip(grads).enumerate() {
            if frozen[i] {
                continue;
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { epoch, loss: f64::NAN });
            }
            let ms = &mut opt.mean_square[i];
            let theta = h.params_mut();
            for ((th, gi), m) in theta.iter_mut().zip(&g).zip(ms.iter_mut()) {
                *m = rms.decay * *m + (1.0 - rms.decay) * gi * gi;
                *th -= rms.learning_rate * gi / (m.sqrt() + rms.epsilon);
            }
            h.params_changed();
        }
    }
    let mut grounding = theory.grounding.clone();
    t.write_back(&mut grounding)?;
    Ok(TrainOutcome {
        grounding,
        trace,
        optimizer: opt,
    })
}

/// Trains one theory per classifier, all RWTN predicates reading from the
/// same frozen `encoder`. Each run is independent of the others, so the
/// result for a class equals training it alone against a copy of the encoder.
pub fn train_shared(
    theories: &[GroundedTheory],
    domain: &Domain,
    encoder: Arc<RwtnEncoderParams>,
    config: &TrainConfig,
) -> Result<Vec<TrainOutcome>> {
    let mut out = Vec::with_capacity(theories.len());
    for theory in theories {
        let mut th = theory.clone();
        for g in th.grounding.predicates.values_mut() {
            if let Grounder::Rwtn { encoder: e, .. } = g {
                check_dim("train_shared encoder input", encoder.dim(), e.dim())?;
                check_dim("train_shared encoder units", encoder.units(), e.units())?;
                *e = Arc::clone(&encoder);
            }
        }
        out.push(train(&th, domain, config)?);
    }
    Ok(out)
}
