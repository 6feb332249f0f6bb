//! Acceptance criteria 1 to 9. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr (not captured by the harness) and then asserts.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwtn_core::checkpoint::ModelDocument;
use rwtn_core::evalkit;
use rwtn_core::fol::parse_formula;
use rwtn_core::grounders::{
    ltn_param_count, rwtn_param_count, LtnPredicateParams, RwtnDecoderParams, RwtnEncoderParams, INIT_STD,
};
use rwtn_core::reservoir::{gen_sparse_matrix, ridge_objective, ridge_readout, scale_to_spectral_radius};
use rwtn_core::semantics::{self, mereology_constraints, theory_satisfiability};
use rwtn_core::sii::{self, PART_OF};
use rwtn_core::training::{loss, loss_and_gradients};
use rwtn_core::{
    DatasetSpec, Domain, GroundedTheory, Grounder, Grounding, Matrix, Mode, ModelConfig, ModelKind, ReservoirConfig,
    Signature, TrainConfig,
};

fn report(n: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "criterion {n}: {verdict} {detail}");
}

fn check(n: u32, ok: bool, detail: String) {
    report(n, ok, &detail);
    assert!(ok, "criterion {n}: {detail}");
}

#[test]
fn criterion_1_parameter_accounting() {
    let ltn = ltn_param_count(64, 1, 6);
    let rwtn = rwtn_param_count(200, 20);
    // (n^2 + n + 2) k and (R + 1) t written out
    let ltn_oracle = (64 * 64 + 64 + 2) * 6;
    let rwtn_oracle = 201 * 20;
    let from_params = LtnPredicateParams::random(&mut ChaCha8Rng::seed_from_u64(0), 64, 6, 0.1).param_count();
    let ok = ltn == 24972 && ltn == ltn_oracle && from_params == ltn && rwtn == 4020 && rwtn == rwtn_oracle;
    check(1, ok, format!("ltn(n=64,m=1,k=6)={ltn} (want 24972), rwtn(R=200,t=20)={rwtn} (want 4020)"));
}

/// Numbers held in arrays anywhere below `v`; shape scalars are not counted.
fn array_numbers(v: &serde_json::Value) -> usize {
    match v {
        serde_json::Value::Array(items) => items
            .iter()
            .map(|x| if x.is_number() { 1 } else { array_numbers(x) })
            .sum(),
        serde_json::Value::Object(map) => map.values().map(array_numbers).sum(),
        _ => 0,
    }
}

#[test]
fn criterion_2_weight_sharing_space() {
    let (i, n, r, t) = (11usize, 64usize, 200usize, 20usize);
    let cfg = ReservoirConfig {
        units: r,
        seed: 2,
        ..ReservoirConfig::default()
    };
    let names: Vec<String> = (0..i).map(|c| format!("C{c}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let decoders: Vec<RwtnDecoderParams> = (0..i).map(|_| RwtnDecoderParams::random(&mut rng, r, t, INIT_STD)).collect();
    let shared = Arc::new(RwtnEncoderParams::generate(&cfg, n, "shared").unwrap());
    let mut g_shared = Grounding::new();
    let mut g_own = Grounding::new();
    for (c, dec) in names.iter().zip(&decoders) {
        g_shared.predicates.insert(
            c.clone(),
            Grounder::Rwtn {
                encoder: Arc::clone(&shared),
                decoder: dec.clone(),
            },
        );
        g_own.predicates.insert(
            c.clone(),
            Grounder::Rwtn {
                encoder: Arc::new(RwtnEncoderParams::generate(&cfg, n, c).unwrap()),
                decoder: dec.clone(),
            },
        );
    }
    let count = |kind: ModelKind, g: &Grounding| {
        let mut m = ModelConfig::new(kind, 2);
        m.reservoir = cfg.clone();
        let doc = ModelDocument::new(m, names.clone(), None, g).unwrap();
        let text = doc.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let serialized = array_numbers(&v["encoders"]) + array_numbers(&v["predicates"]);
        (serialized, doc.stored_weights(), doc.encoders.len())
    };
    let (shared_json, shared_api, shared_files) = count(ModelKind::RwtnShared, &g_shared);
    drop(g_shared);
    let (own_json, own_api, own_files) = count(ModelKind::Rwtn, &g_own);
    let want_shared = (n * n + n) * r + (r + 1) * t * i;
    let want_own = i * ((n * n + n) * r + (r + 1) * t);
    let ok = shared_json == want_shared
        && shared_api == want_shared
        && own_json == want_own
        && own_api == want_own
        && shared_files == 1
        && own_files == i;
    check(
        2,
        ok,
        format!(
            "shared {shared_json} serialized / {shared_api} counted (want {want_shared}), \
             per-class {own_json} / {own_api} (want {want_own})"
        ),
    );
}

#[test]
fn criterion_3_fuzzy_semantics_grid() {
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut max_err = 0.0f64;
    let mut violations = 0usize;
    for &a in &grid {
        let not_a = 1.0 - a;
        max_err = max_err.max((semantics::not(a) - not_a).abs());
        max_err = max_err.max((semantics::not(semantics::not(a)) - a).abs());
        for &b in &grid {
            let want_and = (a + b - 1.0).max(0.0);
            let want_or = (a + b).min(1.0);
            let want_imp = (1.0 - a + b).min(1.0);
            max_err = max_err
                .max((semantics::and(a, b) - want_and).abs())
                .max((semantics::or(a, b) - want_or).abs())
                .max((semantics::implies(a, b) - want_imp).abs());
            if semantics::and(a, b) != semantics::and(b, a) || semantics::or(a, b) != semantics::or(b, a) {
                violations += 1;
            }
            // monotone in each argument (implication antitone in the first)
            if let Some(&a2) = grid.iter().find(|&&x| x > a) {
                if semantics::and(a2, b) < semantics::and(a, b)
                    || semantics::or(a2, b) < semantics::or(a, b)
                    || semantics::implies(a2, b) > semantics::implies(a, b)
                    || semantics::implies(b, a2) < semantics::implies(b, a)
                {
                    violations += 1;
                }
            }
        }
    }
    let ok = max_err <= 1e-15 && violations == 0;
    check(3, ok, format!("101x101 grid: max formula error {max_err:e} (tol 1e-15), {violations} property violations"));
}

#[derive(Clone, Copy, Debug)]
enum Arch {
    Ltn,
    Rwtn,
}

/// A random small theory: 3 to 5 constants of size `n`, a unary `P`, a
/// binary `R` (so `mn <= 6`), literals and quantified clauses.
fn random_instance(arch: Arch, rng: &mut ChaCha8Rng, case: u64) -> (GroundedTheory, Domain, f64, Mode) {
    let n = rng.gen_range(1..=3);
    let consts = rng.gen_range(3..=5);
    let mut sig = Signature::new();
    let mut g = Grounding::new();
    for c in 0..consts {
        sig.add_constant(format!("c{c}")).unwrap();
        g.constants
            .insert(format!("c{c}"), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    sig.add_predicate("P", 1).unwrap();
    sig.add_predicate("R", 2).unwrap();
    let (k, units, t) = (rng.gen_range(1..=3), rng.gen_range(2..=8), rng.gen_range(1..=3));
    let mut mode = Mode::Eval;
    for (name, dim) in [("P", n), ("R", 2 * n)] {
        let p = match arch {
            Arch::Ltn => Grounder::Ltn(LtnPredicateParams::random(rng, dim, k, 0.5)),
            Arch::Rwtn => {
                let xi = if case % 2 == 0 { 0.0 } else { 0.02 };
                if xi > 0.0 {
                    mode = Mode::Train { seed: case, epoch: 3 };
                }
                let cfg = ReservoirConfig {
                    units,
                    xi,
                    omega: 1.0,
                    seed: case,
                    ..ReservoirConfig::default()
                };
                Grounder::Rwtn {
                    encoder: Arc::new(RwtnEncoderParams::generate(&cfg, dim, name).unwrap()),
                    decoder: RwtnDecoderParams::random(rng, units, t, 0.5),
                }
            }
        };
        g.predicates.insert(name.into(), p);
    }
    let c = |rng: &mut ChaCha8Rng| format!("c{}", rng.gen_range(0..consts));
    let mut clauses = vec![
        format!("P({})", c(rng)),
        format!("~P({})", c(rng)),
        format!("R({}, {})", c(rng), c(rng)),
        format!("~R({}, {})", c(rng), c(rng)),
        format!("P({}) & R({}, {}) -> P({})", c(rng), c(rng), c(rng), c(rng)),
        format!("P({}) | ~R({}, {})", c(rng), c(rng), c(rng)),
    ];
    let quantified = [
        "forall x: P(x) -> exists y: R(x, y)",
        "forall x, y: R(x, y) -> ~R(y, x)",
        "forall x: ~P(x) | R(x, x)",
        "exists x: P(x) & ~R(x, x)",
    ];
    clauses.extend(quantified.iter().filter(|_| rng.gen_bool(0.6)).map(|s| s.to_string()));
    let clauses = clauses.iter().map(|s| parse_formula(s, &sig).unwrap()).collect();
    let lambda = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.01..0.5) };
    (GroundedTheory::new(sig, clauses, g).unwrap(), Domain::single(consts), lambda, mode)
}

struct FdStats {
    checked: usize,
    kinks: usize,
    max_rel: f64,
}

fn fd_instance(theory: &GroundedTheory, domain: &Domain, lambda: f64, mode: Mode, stats: &mut FdStats) {
    let (_, grads) = loss_and_gradients(theory, domain, lambda, mode).unwrap();
    let h = 1e-5;
    for (name, grad) in &grads {
        let base = theory.grounding.predicates[name].params_flat();
        for i in 0..base.len() {
            let at = |delta: f64| {
                let mut t = theory.clone();
                let mut theta = base.clone();
                theta[i] += delta;
                t.grounding.predicates.get_mut(name).unwrap().set_params_flat(&theta).unwrap();
                loss(&t, domain, lambda, mode).unwrap()
            };
            let (up, mid, down) = (at(h), at(0.0), at(-h));
            let fwd = (up - mid) / h;
            let bwd = (mid - down) / h;
            // one-sided slopes that disagree mean a min/max kink lies inside the stencil
            if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()) + 1e-6 {
                stats.kinks += 1;
                continue;
            }
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            stats.max_rel = stats.max_rel.max(rel);
            stats.checked += 1;
        }
    }
}

#[test]
fn criterion_4_gradient_fidelity() {
    let mut lines = Vec::new();
    let mut ok = true;
    for arch in [Arch::Ltn, Arch::Rwtn] {
        let mut rng = ChaCha8Rng::seed_from_u64(4 + arch as u64);
        let mut stats = FdStats {
            checked: 0,
            kinks: 0,
            max_rel: 0.0,
        };
        for case in 0..100 {
            let (t, d, lambda, mode) = random_instance(arch, &mut rng, case);
            fd_instance(&t, &d, lambda, mode, &mut stats);
        }
        ok &= stats.max_rel <= 1e-4 && stats.checked > 100 * stats.kinks;
        lines.push(format!(
            "{arch:?}: 100 instances, {} coordinates, max rel err {:.2e}, {} skipped at kinks",
            stats.checked, stats.max_rel, stats.kinks
        ));
    }
    check(4, ok, format!("{} (tol 1e-4)", lines.join("; ")));
}

/// Largest eigenvalue modulus through a dense eigen-solver.
fn oracle_radius(m: &Matrix) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    d.complex_eigenvalues().iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max)
}

#[test]
fn criterion_5_spectral_and_sparsity() {
    let (rho, beta) = (0.6, 0.25);
    let mut worst_rho = 0.0f64;
    let mut band_misses = 0usize;
    let mut slices = 0usize;
    let (mut nonzero, mut entries) = (0usize, 0usize);
    for (dim, units) in [(6usize, 200usize), (22, 200), (64, 40)] {
        let cfg = ReservoirConfig {
            units,
            rho,
            beta,
            seed: dim as u64,
            ..ReservoirConfig::default()
        };
        let enc = RwtnEncoderParams::generate(&cfg, dim, "c5").unwrap();
        for s in 0..units {
            let m = enc.tensor.slice_matrix(s);
            worst_rho = worst_rho.max((oracle_radius(&m) - rho).abs());
            let nz = m.nonzero_count();
            let cells = dim * dim;
            let sigma = (beta * (1.0 - beta) / cells as f64).sqrt();
            if (nz as f64 / cells as f64 - beta).abs() > 5.0 * sigma {
                band_misses += 1;
            }
            nonzero += nz;
            entries += cells;
            slices += 1;
        }
    }
    for seed in 0..20 {
        let m = scale_to_spectral_radius(&gen_sparse_matrix(100, 100, beta, seed), rho).unwrap();
        worst_rho = worst_rho.max((oracle_radius(&m) - rho).abs());
        slices += 1;
    }
    let frac = nonzero as f64 / entries as f64;
    let pooled_ok = (frac - beta).abs() <= 5.0 * (beta * (1.0 - beta) / entries as f64).sqrt();
    let ok = worst_rho <= 1e-6 && band_misses == 0 && pooled_ok;
    check(
        5,
        ok,
        format!(
            "{slices} slices: max |rho - 0.6| {worst_rho:.1e} (tol 1e-6), {band_misses} slices outside 5 sigma, \
             pooled nonzero fraction {frac:.4}"
        ),
    );
}

#[test]
fn criterion_6_ridge_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (rows, cols) = (50, 10);
        let d_out = rng.gen_range(1..=3);
        let x = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = Matrix::from_vec(rows, d_out, (0..rows * d_out).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let lambda = rng.gen_range(0.05..2.0);
        let (w, b) = ridge_readout(&x, &y, lambda).unwrap();
        let closed = ridge_objective(&x, &y, &w, &b, lambda);

        // plain gradient descent on the same objective, step 1/L
        let xa = DMatrix::from_fn(rows, cols + 1, |i, j| if j < cols { x.get(i, j) } else { 1.0 });
        let ya = DMatrix::from_row_slice(rows, d_out, y.as_slice());
        let mut pen = DMatrix::<f64>::identity(cols + 1, cols + 1) * (2.0 * lambda);
        pen[(cols, cols)] = 0.0;
        let hess = xa.transpose() * &xa + &pen;
        let l = hess.symmetric_eigenvalues().max();
        let mut theta = DMatrix::<f64>::zeros(cols + 1, d_out);
        for _ in 0..5000 {
            let grad = xa.transpose() * (&xa * &theta - &ya) + &pen * &theta;
            theta -= grad / l;
        }
        let gd_w = Matrix::from_rows(
            &(0..d_out)
                .map(|o| (0..cols).map(|i| theta[(i, o)]).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let gd_b: Vec<f64> = (0..d_out).map(|o| theta[(cols, o)]).collect();
        let gd = ridge_objective(&x, &y, &gd_w, &gd_b, lambda);
        worst = worst.max((closed - gd).abs());
        assert!(closed <= gd + 1e-12, "closed form above descent: {closed} vs {gd}");
    }
    check(6, worst <= 1e-9, format!("20 random 50x10 problems: max |closed - descent| {worst:.1e} (tol 1e-9)"));
}

fn desk_spec(seed: u64) -> DatasetSpec {
    let mut spec = DatasetSpec::new(8, 8, 200, seed);
    spec.noise = 0.15;
    spec
}

#[test]
fn criterion_7_desk_scale_comparison() {
    let seeds = [1u64, 2, 3, 4, 5];
    let train = TrainConfig::default();
    let mut t1 = [Vec::new(), Vec::new()];
    let mut t2 = [Vec::new(), Vec::new()];
    let mut worst_gap = 0.0f64;
    let mut gap_at = String::from("every class");
    for &seed in &seeds {
        let ds = rwtn_core::scenes::generate(&desk_spec(seed)).unwrap();
        let mut per_class: Vec<Vec<Option<f64>>> = Vec::new();
        for (slot, kind) in [ModelKind::Ltn, ModelKind::Rwtn, ModelKind::RwtnShared].into_iter().enumerate() {
            let doc = sii::fit(&ds, &ModelConfig::new(kind, seed), &TrainConfig { seed, ..train.clone() }).unwrap();
            let g = doc.grounding().unwrap();
            let e = evalkit::eval_model(kind.as_str(), seed, &g, &ds.class_names, &ds.test, 0.7).unwrap();
            let _ = writeln!(
                std::io::stderr().lock(),
                "  seed {seed} {kind}: T1 macro AUC {:.4}, T2 AUC {:.4}",
                e.t1.macro_auc,
                e.t2.curve.auc
            );
            if slot < 2 {
                t1[slot].push(e.t1.macro_auc);
                t2[slot].push(e.t2.curve.auc);
            }
            if slot > 0 {
                per_class.push(e.t1.classes.iter().map(|c| c.curve.as_ref().map(|k| k.auc)).collect());
            }
        }
        for (c, (a, b)) in per_class[0].iter().zip(&per_class[1]).enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                if (a - b).abs() > worst_gap {
                    worst_gap = (a - b).abs();
                    gap_at = format!("{} seed {seed}", ds.class_names[c]);
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ltn_t1, rwtn_t1) = (mean(&t1[0]), mean(&t1[1]));
    let (ltn_t2, rwtn_t2) = (mean(&t2[0]), mean(&t2[1]));
    let a = ltn_t1 >= 0.90 && rwtn_t1 >= 0.90;
    let b = rwtn_t2 >= ltn_t2 - 0.05;
    let c = worst_gap <= 0.02;
    check(
        7,
        a && b && c,
        format!(
            "(a) mean T1 macro AUC ltn {ltn_t1:.4}, rwtn {rwtn_t1:.4} (want >= 0.90) {}; \
             (b) mean T2 AUC rwtn {rwtn_t2:.4} vs ltn {ltn_t2:.4} (want >= ltn - 0.05) {}; \
             (c) max per-class T1 gap shared vs own {worst_gap:.4} at {gap_at} (want <= 0.02) {}",
            ok_word(a),
            ok_word(b),
            ok_word(c)
        ),
    );
}

fn ok_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "missed"
    }
}

fn run_cli(out: &Path, args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_rwtn"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_8_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let models = ["ltn", "rwtn", "rwtn-shared"];
    for d in &dirs {
        run_cli(d.path(), &["gen-data", "--seed", "8"]);
        for m in models {
            run_cli(d.path(), &["train", "--model", m, "--seed", "8", "--epochs", "60"]);
            run_cli(d.path(), &["eval", "--model", m, "--seed", "8"]);
        }
    }
    let a = files_under(dirs[0].path());
    let b = files_under(dirs[1].path());
    let same_names = a.iter().map(|x| &x.0).eq(b.iter().map(|x| &x.0));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();

    let ds = rwtn_core::scenes::read_dataset(&dirs[0].path().join("data/seed-8")).unwrap();
    let mut hash_changes = 0;
    let mut hashes = 0;
    for kind in [ModelKind::Rwtn, ModelKind::RwtnShared] {
        let before = sii::init_predicates(&ModelConfig::new(kind, 8), &ds.class_names).unwrap();
        let path = dirs[0].path().join(format!("models/seed-8/{kind}/model.json"));
        let after = ModelDocument::load(&path).unwrap().grounding().unwrap();
        for (name, p) in &before.predicates {
            let (Grounder::Rwtn { encoder: e0, .. }, Grounder::Rwtn { encoder: e1, .. }) = (p, &after.predicates[name])
            else {
                panic!("{name} is not an rwtn predicate");
            };
            hashes += 1;
            if e0.fingerprint() != e1.fingerprint() {
                hash_changes += 1;
            }
        }
    }
    let ok = same_names && differing.is_empty() && hash_changes == 0 && a.len() > 20;
    check(
        8,
        ok,
        format!(
            "{} files compared across two runs, {} differ {:?}; {hashes} encoder hashes, {hash_changes} changed by training",
            a.len(),
            differing.len(),
            differing
        ),
    );
}

#[test]
fn criterion_9_constraint_consistency() {
    let mut evaluated = Vec::new();
    let mut ok = true;
    for (wholes, parts, scenes, seed) in [(8, 8, 200, 9), (3, 5, 60, 10), (6, 2, 80, 11), (1, 1, 20, 12)] {
        let mut spec = DatasetSpec::new(wholes, parts, scenes, seed);
        spec.noise = 0.0;
        spec.jitter = 0.0;
        let ds = rwtn_core::scenes::generate(&spec).unwrap();
        let n = ds.class_names.len();
        let mut g = Grounding::new();
        for (i, c) in ds.class_names.iter().enumerate() {
            g.predicates.insert(c.clone(), Grounder::CrispType { class: i, n_classes: n });
        }
        g.predicates.insert(
            PART_OF.into(),
            Grounder::CrispPartOf {
                table: ds.spec.table.clone(),
                th_ir: 0.7,
            },
        );
        let all: Vec<_> = ds.train.iter().chain(&ds.test).cloned().collect();
        let (full, domain) = sii::build_theory(&all, &ds.class_names, &ds.spec.table, &g).unwrap();
        let axioms = mereology_constraints(&ds.spec.table, &full.signature).unwrap();
        let n_axioms = axioms.len();
        let only = GroundedTheory::new(full.signature.clone(), axioms, full.grounding.clone()).unwrap();
        let sat = theory_satisfiability(&only, &domain, Mode::Eval).unwrap();
        ok &= sat == 1.0;
        evaluated.push(format!("{wholes}/{parts}/{scenes}: {n_axioms} constraints, sat {sat}"));
    }
    check(9, ok, format!("crisp noiseless ({}) (want exactly 1.0)", evaluated.join("; ")));
}
