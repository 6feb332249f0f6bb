use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rwtn_core::checkpoint::{ModelDocument, PredicateDoc};
use rwtn_core::evalkit::{self, ComparisonReport, ModelEval, PrCurve};
use rwtn_core::grounders::{ltn_param_count, rwtn_param_count, shared_space, Grounder};
use rwtn_core::scenes::{self, DatasetSpec};
use rwtn_core::sii::{self, ModelConfig, ModelKind, PART_OF};
use rwtn_core::training::{trace_csv, DecoderFit, RmsPropConfig, TrainConfig};
use rwtn_core::{Dataset, Grounding, ReservoirConfig};

use crate::config::CliError;
use crate::{Cli, Command, CompareArgs, DecoderFitArg, EvalArgs, GenDataArgs, ParamCountArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::ParamCount(a) => param_count(a),
    }
}

fn data_dir(cli: &Cli, seed: u64) -> PathBuf {
    cli.out.join("data").join(format!("seed-{seed}"))
}

fn model_dir(cli: &Cli, seed: u64, model: &str) -> PathBuf {
    cli.out.join("models").join(format!("seed-{seed}")).join(model)
}

fn report_dir(cli: &Cli, seed: u64, model: &str) -> PathBuf {
    cli.out.join("reports").join(format!("seed-{seed}")).join(model)
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    s.parse::<ModelKind>().map_err(|e| CliError::usage(e.to_string()))
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.join(scenes::HEADER_FILE).is_file() {
        return Err(CliError::data(format!(
            "no dataset at {} (run gen-data first)",
            dir.display()
        )));
    }
    Ok(scenes::read_dataset(dir)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<()> {
    let mut spec = DatasetSpec::new(a.wholes, a.parts, a.scenes, cli.seed);
    spec.noise = a.noise;
    spec.jitter = a.jitter;
    spec.train_fraction = a.train_fraction;
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let ds = scenes::generate(&spec)?;
    let dir = a.data.clone().unwrap_or_else(|| data_dir(cli, cli.seed));
    fs::create_dir_all(&dir)?;
    scenes::write_dataset(&ds, &dir)?;
    let count = |s: &[rwtn_core::Scene]| s.iter().map(|x| x.boxes.len()).sum::<usize>();
    println!(
        "wrote {} scenes ({} train / {} test), {} train boxes, {} test boxes, {} classes to {}",
        ds.train.len() + ds.test.len(),
        ds.train.len(),
        ds.test.len(),
        count(&ds.train),
        count(&ds.test),
        ds.class_names.len(),
        dir.display()
    );
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let kind = parse_kind(&a.model)?;
    let ds = load_dataset(&a.data.clone().unwrap_or_else(|| data_dir(cli, cli.seed)))?;
    let export: Vec<String> = if a.classes == "all" {
        ds.class_names.clone()
    } else {
        let wanted: Vec<String> = a.classes.split(',').map(|s| s.trim().to_string()).collect();
        if let Some(bad) = wanted.iter().find(|c| !ds.class_names.contains(c)) {
            return Err(CliError::usage(format!("unknown class `{bad}`")));
        }
        wanted
    };
    let model = ModelConfig {
        kind,
        k: a.k,
        t: a.t,
        reservoir: ReservoirConfig {
            rho: a.rho,
            beta: a.beta,
            units: a.units,
            omega: a.omega,
            xi: a.xi,
            seed: cli.seed,
        },
        seed: cli.seed,
    };
    let config = TrainConfig {
        epochs: a.epochs,
        lambda: a.lambda,
        rmsprop: RmsPropConfig {
            learning_rate: a.learning_rate,
            decay: a.decay,
            epsilon: a.epsilon,
        },
        seed: cli.seed,
        decoder_fit: match a.decoder_fit {
            DecoderFitArg::Rmsprop => DecoderFit::RmsProp,
            DecoderFitArg::Ridge => DecoderFit::Ridge,
        },
    };
    config.validate()?;
    model.validate()?;
    let doc = sii::fit(&ds, &model, &config)?;

    let dir = model_dir(cli, cli.seed, kind.as_str());
    fs::create_dir_all(&dir)?;
    doc.save(&dir.join("model.json"))?;
    fs::write(dir.join("trace.csv"), trace_csv(&doc.trace))?;
    if kind != ModelKind::Ltn {
        export_parts(&dir, &doc, &export)?;
    }
    let last = doc.trace.last().expect("trace has the initial entry");
    println!(
        "{kind}: final satisfiability {:.6} after {} epochs ({} stored weights) -> {}",
        last.satisfiability,
        last.epoch,
        doc.stored_weights(),
        dir.display()
    );
    Ok(())
}

/// One file per distinct encoder and one per exported decoder.
fn export_parts(dir: &Path, doc: &ModelDocument, classes: &[String]) -> Result<()> {
    let enc_dir = dir.join("encoders");
    let dec_dir = dir.join("decoders");
    for d in [&enc_dir, &dec_dir] {
        if d.exists() {
            fs::remove_dir_all(d)?;
        }
        fs::create_dir_all(d)?;
    }
    for (key, enc) in &doc.encoders {
        write_json(&enc_dir.join(format!("{key}.json")), enc)?;
    }
    for (name, p) in &doc.predicates {
        if name != PART_OF && !classes.contains(name) {
            continue;
        }
        if let PredicateDoc::Rwtn { .. } = p {
            write_json(&dec_dir.join(format!("{name}.json")), p)?;
        }
    }
    Ok(())
}

/// Raw detector scores through the argmax rule, as a T1 reference.
fn score_baseline(n_classes: usize, class_names: &[String]) -> Grounding {
    let mut g = Grounding::new();
    for (i, c) in class_names.iter().enumerate() {
        g.predicates.insert(c.clone(), Grounder::CrispType { class: i, n_classes });
    }
    g
}

#[derive(Serialize)]
struct ClassLine {
    name: String,
    auc: Option<f64>,
    positives: usize,
    precision_at_th: f64,
    recall_at_th: f64,
}

#[derive(Serialize)]
struct EvalReport {
    model: String,
    seed: u64,
    th: f64,
    t1_macro_auc: f64,
    t1_classes: Vec<ClassLine>,
    t2_auc: f64,
    t2_precision_at_th: f64,
    t2_recall_at_th: f64,
    baseline_scores_t1_macro_auc: f64,
    baseline_ir_t2_auc: f64,
}

fn evaluate(doc: &ModelDocument, ds: &Dataset, model: &str, seed: u64, th: f64) -> Result<(ModelEval, f64, evalkit::T2Eval)> {
    let g = doc.grounding()?;
    if doc.class_names != ds.class_names {
        return Err(CliError::data("checkpoint and dataset disagree on the class list"));
    }
    let e = evalkit::eval_model(model, seed, &g, &ds.class_names, &ds.test, th)?;
    let base = evalkit::eval_t1(&score_baseline(ds.class_names.len(), &ds.class_names), &ds.class_names, &ds.test, th)?;
    let ir = evalkit::ir_baseline(&ds.test, th)?;
    Ok((e, base.macro_auc, ir))
}

fn load_checkpoint(path: &Path) -> Result<ModelDocument> {
    if !path.is_file() {
        return Err(CliError::data(format!("no checkpoint at {} (run train first)", path.display())));
    }
    Ok(ModelDocument::load(path)?)
}

fn write_curve(path: &Path, c: &PrCurve) -> Result<()> {
    fs::write(path, c.to_csv())?;
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let kind = parse_kind(&a.model)?;
    let ckpt = a
        .checkpoint
        .clone()
        .unwrap_or_else(|| model_dir(cli, cli.seed, kind.as_str()).join("model.json"));
    let doc = load_checkpoint(&ckpt)?;
    let ds = load_dataset(&a.data.clone().unwrap_or_else(|| data_dir(cli, cli.seed)))?;
    let (e, base_t1, ir) = evaluate(&doc, &ds, kind.as_str(), cli.seed, a.th)?;

    let dir = report_dir(cli, cli.seed, kind.as_str());
    let curves = dir.join("curves");
    fs::create_dir_all(&curves)?;
    for c in &e.t1.classes {
        if let Some(curve) = &c.curve {
            write_curve(&curves.join(format!("t1-{}.csv", c.name)), curve)?;
        }
    }
    write_curve(&curves.join("t2.csv"), &e.t2.curve)?;
    write_curve(&curves.join("t2-ir.csv"), &ir.curve)?;
    let report = EvalReport {
        model: e.model.clone(),
        seed: e.seed,
        th: a.th,
        t1_macro_auc: e.t1.macro_auc,
        t1_classes: e
            .t1
            .classes
            .iter()
            .map(|c| ClassLine {
                name: c.name.clone(),
                auc: c.curve.as_ref().map(|k| k.auc),
                positives: c.curve.as_ref().map_or(0, |k| k.positives),
                precision_at_th: c.precision_at_th,
                recall_at_th: c.recall_at_th,
            })
            .collect(),
        t2_auc: e.t2.curve.auc,
        t2_precision_at_th: e.t2.precision_at_th,
        t2_recall_at_th: e.t2.recall_at_th,
        baseline_scores_t1_macro_auc: base_t1,
        baseline_ir_t2_auc: ir.curve.auc,
    };
    write_json(&dir.join("report.json"), &report)?;
    println!(
        "{kind} seed {}: T1 macro AUC {:.4} (scores baseline {:.4}), T2 AUC {:.4} (ir baseline {:.4}) -> {}",
        cli.seed,
        e.t1.macro_auc,
        base_t1,
        e.t2.curve.auc,
        ir.curve.auc,
        dir.display()
    );
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    if a.seeds == 0 {
        return Err(CliError::usage("--seeds must be >= 1"));
    }
    let kinds = a
        .models
        .split(',')
        .map(|m| parse_kind(m.trim()))
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (cli.seed..cli.seed + a.seeds).collect();
    let mut runs = Vec::new();
    let mut irs = Vec::new();
    let mut n_wholes = 0;
    for &s in &seeds {
        let ds = load_dataset(&data_dir(cli, s))?;
        n_wholes = ds.spec.n_wholes;
        irs.push(evalkit::ir_baseline(&ds.test, a.th)?);
        for k in &kinds {
            let doc = load_checkpoint(&model_dir(cli, s, k.as_str()).join("model.json"))?;
            runs.push(evaluate(&doc, &ds, k.as_str(), s, a.th)?.0);
        }
    }
    let report = ComparisonReport::build(&runs, n_wholes, &[("ir".to_string(), irs)])?;
    let names: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
    let dir = cli
        .out
        .join("reports")
        .join(format!("compare-{}-seeds-{}-{}", names.join("+"), seeds[0], seeds[seeds.len() - 1]));
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("report.json"), &report)?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    println!("{:<8} {:<5} {:<12} {:>8}  95% CI", "group", "task", "model", "mean");
    for r in report.rows.iter().filter(|r| ["all", "wholes", "parts"].contains(&r.group.as_str())) {
        println!(
            "{:<8} {:<5} {:<12} {:>8.4}  [{:.4}, {:.4}]",
            r.group, r.task, r.model, r.auc.mean, r.auc.ci_low, r.auc.ci_high
        );
    }
    println!("-> {}", dir.display());
    Ok(())
}

fn param_count(a: &ParamCountArgs) -> Result<()> {
    if [a.n, a.m, a.k, a.units, a.t, a.i].contains(&0) {
        return Err(CliError::usage("all sizes must be >= 1"));
    }
    let mn = a.n * a.m;
    match parse_kind(&a.model)? {
        ModelKind::Ltn => {
            println!("model=ltn n={} m={} k={}", a.n, a.m, a.k);
            println!("learnable_per_predicate={}", ltn_param_count(a.n, a.m, a.k));
        }
        ModelKind::Rwtn => {
            println!("model=rwtn n={} m={} R={} t={}", a.n, a.m, a.units, a.t);
            println!("learnable_per_predicate={}", rwtn_param_count(a.units, a.t));
            println!("frozen_per_predicate={}", (mn * mn + mn) * a.units);
        }
        ModelKind::RwtnShared => {
            let (unshared, shared) = shared_space(a.n, a.m, a.units, a.t, a.i);
            println!("model=rwtn-shared n={} m={} R={} t={} i={}", a.n, a.m, a.units, a.t, a.i);
            println!("learnable_per_predicate={}", rwtn_param_count(a.units, a.t));
            println!("stored_unshared={unshared}");
            println!("stored_shared={shared}");
        }
    }
    Ok(())
}
