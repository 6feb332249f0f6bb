//! Precision-recall evaluation of the type (T1) and part-of (T2) tasks, the
//! inclusion-ratio baseline, and multi-seed comparison reports.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::grounders::Grounder;
use crate::scenes::{inclusion_ratio, pair_vector, Scene};
use crate::semantics::Grounding;
use crate::sii::PART_OF;

/// Default decision threshold on grounder outputs.
pub const DEFAULT_TH: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, highest threshold first.
    pub points: Vec<PrPoint>,
    pub auc: f64,
    pub positives: usize,
    pub total: usize,
}

impl PrCurve {
    pub fn prevalence(&self) -> f64 {
        self.positives as f64 / self.total as f64
    }

    /// `threshold,precision,recall` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
        }
        out
    }
}

/// PR curve over `(score, is_positive)` pairs. A point is emitted at every
/// distinct score `s`, predicting positive when `score >= s`. The area is the
/// trapezoid rule over recall, starting from `(0, precision of the first point)`.
pub fn pr_curve(scored: &[(f64, bool)]) -> Result<PrCurve> {
    let positives = scored.iter().filter(|(_, y)| *y).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Data("NaN score".into()));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: s,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    let mut auc = 0.0;
    let (mut r0, mut p0) = (0.0, points[0].precision);
    for p in &points {
        auc += (p.recall - r0) * (p.precision + p0) / 2.0;
        r0 = p.recall;
        p0 = p.precision;
    }
    Ok(PrCurve {
        points,
        auc: auc.clamp(0.0, 1.0),
        positives,
        total: scored.len(),
    })
}

/// Precision and recall of the rule `score > th`; precision is 0 when
/// nothing clears the threshold.
pub fn at_threshold(scored: &[(f64, bool)], th: f64) -> (f64, f64) {
    let positives = scored.iter().filter(|(_, y)| *y).count();
    let (tp, fp) = scored.iter().filter(|(s, _)| *s > th).fold((0, 0), |(tp, fp), (_, y)| {
        if *y {
            (tp + 1, fp)
        } else {
            (tp, fp + 1)
        }
    });
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
    (precision, recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub class: usize,
    pub name: String,
    /// `None` when the class has no test boxes.
    pub curve: Option<PrCurve>,
    pub precision_at_th: f64,
    pub recall_at_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Eval {
    pub th: f64,
    pub classes: Vec<ClassEval>,
    /// Mean AUC over classes present in the test set.
    pub macro_auc: f64,
}

impl T1Eval {
    /// Mean AUC over the present classes among `indices`.
    pub fn macro_over(&self, indices: impl IntoIterator<Item = usize>) -> Option<f64> {
        let aucs: Vec<f64> = indices
            .into_iter()
            .filter_map(|i| self.classes.get(i)?.curve.as_ref().map(|c| c.auc))
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

/// Scores every test box with every class predicate of `model`.
pub fn eval_t1(model: &Grounding, class_names: &[String], scenes: &[Scene], th: f64) -> Result<T1Eval> {
    let boxes: Vec<_> = scenes.iter().flat_map(|s| &s.boxes).collect();
    let inputs: Vec<Vec<f64>> = boxes.iter().map(|b| b.grounding_vector()).collect();
    let mut classes = Vec::with_capacity(class_names.len());
    for (c, name) in class_names.iter().enumerate() {
        let p = model.predicate(name)?;
        let scored = boxes
            .iter()
            .zip(&inputs)
            .map(|(b, v)| Ok((p.truth(v, None)?, b.class == c)))
            .collect::<Result<Vec<_>>>()?;
        let curve = match pr_curve(&scored) {
            Ok(curve) => Some(curve),
            Err(Error::NoPositives) => None,
            Err(e) => return Err(e),
        };
        let (precision_at_th, recall_at_th) = at_threshold(&scored, th);
        classes.push(ClassEval {
            class: c,
            name: name.clone(),
            curve,
            precision_at_th,
            recall_at_th,
        });
    }
    let present: Vec<f64> = classes.iter().filter_map(|c| c.curve.as_ref().map(|k| k.auc)).collect();
    if present.is_empty() {
        return Err(Error::NoPositives);
    }
    let macro_auc = present.iter().sum::<f64>() / present.len() as f64;
    Ok(T1Eval { th, classes, macro_auc })
}

/// `(score, label)` over every ordered pair of distinct boxes in a scene.
fn scored_pairs(scenes: &[Scene], mut score: impl FnMut(&crate::scenes::BoxRecord, &crate::scenes::BoxRecord) -> Result<f64>) -> Result<Vec<(f64, bool)>> {
    let mut out = Vec::new();
    for s in scenes {
        for a in &s.boxes {
            for b in &s.boxes {
                if a.id != b.id {
                    out.push((score(a, b)?, a.parent == Some(b.id)));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Eval {
    pub th: f64,
    pub curve: PrCurve,
    pub precision_at_th: f64,
    pub recall_at_th: f64,
}

fn t2_from(scored: &[(f64, bool)], th: f64) -> Result<T2Eval> {
    let curve = pr_curve(scored)?;
    let (precision_at_th, recall_at_th) = at_threshold(scored, th);
    Ok(T2Eval {
        th,
        curve,
        precision_at_th,
        recall_at_th,
    })
}

/// Part-of detection with `part_of` scoring `(child, parent)` pair vectors.
pub fn eval_t2(part_of: &Grounder, scenes: &[Scene], th: f64) -> Result<T2Eval> {
    let scored = scored_pairs(scenes, |a, b| part_of.truth(&pair_vector(a, b), None))?;
    t2_from(&scored, th)
}

/// Part-of detection scored by the inclusion ratio of child in parent.
pub fn ir_baseline(scenes: &[Scene], th: f64) -> Result<T2Eval> {
    let scored = scored_pairs(scenes, |a, b| inclusion_ratio(&a.geom, &b.geom))?;
    t2_from(&scored, th)
}

/// T1 and T2 of one trained model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    pub seed: u64,
    pub t1: T1Eval,
    pub t2: T2Eval,
}

pub fn eval_model(model_name: &str, seed: u64, model: &Grounding, class_names: &[String], scenes: &[Scene], th: f64) -> Result<ModelEval> {
    Ok(ModelEval {
        model: model_name.to_string(),
        seed,
        t1: eval_t1(model, class_names, scenes, th)?,
        t2: eval_t2(model.predicate(PART_OF)?, scenes, th)?,
    })
}

/// Sample mean with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A single sample gets a zero-width interval.
pub fn summarize(samples: &[f64]) -> Result<Summary> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Data("no samples to summarize".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let half = if n < 2 {
        0.0
    } else {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        t * (var / n as f64).sqrt()
    };
    Ok(Summary {
        n,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `all`, `wholes`, `parts` or a class name.
    pub group: String,
    pub task: String,
    pub model: String,
    pub auc: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    /// Aggregates per-seed evaluations. `n_wholes` splits the classes into
    /// the whole and part groups; T2 rows come from each run's part-of curve
    /// and from `baselines` (name, per-seed T2) when given.
    pub fn build(runs: &[ModelEval], n_wholes: usize, baselines: &[(String, Vec<T2Eval>)]) -> Result<Self> {
        let mut models: Vec<&str> = Vec::new();
        let mut seeds: Vec<u64> = Vec::new();
        for r in runs {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
            if !seeds.contains(&r.seed) {
                seeds.push(r.seed);
            }
        }
        let mut rows = Vec::new();
        for m in models {
            let mine: Vec<&ModelEval> = runs.iter().filter(|r| r.model == m).collect();
            let n_classes = mine[0].t1.classes.len();
            let groups: [(&str, Vec<usize>); 3] = [
                ("all", (0..n_classes).collect()),
                ("wholes", (0..n_wholes.min(n_classes)).collect()),
                ("parts", (n_wholes.min(n_classes)..n_classes).collect()),
            ];
            for (group, idx) in groups {
                let samples: Vec<f64> = mine.iter().filter_map(|r| r.t1.macro_over(idx.iter().copied())).collect();
                if !samples.is_empty() {
                    rows.push(row(group, "T1", m, &samples)?);
                }
            }
            for c in 0..n_classes {
                let samples: Vec<f64> = mine
                    .iter()
                    .filter_map(|r| r.t1.classes[c].curve.as_ref().map(|k| k.auc))
                    .collect();
                if !samples.is_empty() {
                    rows.push(row(&mine[0].t1.classes[c].name, "T1", m, &samples)?);
                }
            }
            let t2: Vec<f64> = mine.iter().map(|r| r.t2.curve.auc).collect();
            rows.push(row("all", "T2", m, &t2)?);
        }
        for (name, evals) in baselines {
            let t2: Vec<f64> = evals.iter().map(|e| e.curve.auc).collect();
            rows.push(row("all", "T2", name, &t2)?);
        }
        Ok(Self { seeds, rows })
    }

    pub fn find(&self, group: &str, task: &str, model: &str) -> Option<&Summary> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.task == task && r.model == model)
            .map(|r| &r.auc)
    }

    /// `group,task,model,n,mean,ci_low,ci_high` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,task,model,n,mean,ci_low,ci_high\n");
        for r in &self.rows {
            let s = &r.auc;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.group, r.task, r.model, s.n, s.mean, s.ci_low, s.ci_high
            ));
        }
        out
    }
}

fn row(group: &str, task: &str, model: &str, samples: &[f64]) -> Result<ReportRow> {
    Ok(ReportRow {
        group: group.to_string(),
        task: task.to_string(),
        model: model.to_string(),
        auc: summarize(samples)?,
    })
}
