//! Synthetic scenes of whole and part bounding boxes.
//!
//! Coordinates live in the unit square. Wholes never overlap each other and
//! every part sits inside its parent whole (inclusion ratio at least 0.9).
//! Detector scores are the one-hot class vector plus clipped Gaussian noise.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounders::PartWholeTable;
use crate::rng;

/// Minimum inclusion ratio of a part inside its parent.
pub const MIN_PART_IR: f64 = 0.9;

/// Axis-aligned box `(x0, y0)`–`(x1, y1)` with `x0 < x1`, `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BoxGeom {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoxGeom {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateBox);
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [x0, y0, x1, y1] => Self::new(*x0, *y0, *x1, *y1),
            _ => Err(Error::DimensionMismatch {
                context: "box corners",
                expected: 4,
                actual: v.len(),
            }),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BoxGeom) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl From<BoxGeom> for [f64; 4] {
    fn from(b: BoxGeom) -> Self {
        b.corners()
    }
}

impl TryFrom<[f64; 4]> for BoxGeom {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoxGeom::new(v[0], v[1], v[2], v[3])
    }
}

/// `area(b ∩ b') / area(b)`.
pub fn inclusion_ratio(b: &BoxGeom, b2: &BoxGeom) -> Result<f64> {
    let a = b.area();
    if !(a > 0.0) {
        return Err(Error::DegenerateBox);
    }
    Ok((b.intersection_area(b2) / a).clamp(0.0, 1.0))
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub scene: usize,
    pub id: usize,
    pub class: usize,
    pub parent: Option<usize>,
    pub scores: Vec<f64>,
    #[serde(rename = "box")]
    pub geom: BoxGeom,
}

impl BoxRecord {
    /// Scores in class order, then `x0, y0, x1, y1`.
    pub fn grounding_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.scores.len() + 4);
        v.extend_from_slice(&self.scores);
        v.extend_from_slice(&self.geom.corners());
        v
    }
}

/// Child grounding vector followed by the parent's.
pub fn pair_vector(child: &BoxRecord, parent: &BoxRecord) -> Vec<f64> {
    let mut v = child.grounding_vector();
    v.extend(parent.grounding_vector());
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: usize,
    pub boxes: Vec<BoxRecord>,
}

impl Scene {
    /// `(child id, parent id)` for every ground-truth part-of link.
    pub fn part_of_pairs(&self) -> Vec<(usize, usize)> {
        self.boxes
            .iter()
            .filter_map(|b| b.parent.map(|p| (b.id, p)))
            .collect()
    }

    pub fn get(&self, id: usize) -> Option<&BoxRecord> {
        self.boxes.iter().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_wholes: usize,
    pub n_parts: usize,
    pub table: PartWholeTable,
    pub scenes: usize,
    /// Inclusive range of whole boxes per scene.
    pub wholes_per_scene: (usize, usize),
    /// Inclusive range of part boxes per whole.
    pub parts_per_whole: (usize, usize),
    /// Standard deviation of the additive score noise.
    pub noise: f64,
    /// Standard deviation of the part placement jitter, relative to part size.
    pub jitter: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl DatasetSpec {
    /// `n_wholes` wholes, `n_parts` parts, cyclic compatibility table.
    pub fn new(n_wholes: usize, n_parts: usize, scenes: usize, seed: u64) -> Self {
        Self {
            n_wholes,
            n_parts,
            table: PartWholeTable::cyclic(n_wholes, n_parts),
            scenes,
            wholes_per_scene: (1, 2),
            parts_per_whole: (1, 2),
            noise: 0.15,
            jitter: 0.05,
            train_fraction: 0.8,
            seed,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_wholes + self.n_parts
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.scenes == 0 {
            return bad("scenes must be >= 1");
        }
        if self.n_wholes == 0 {
            return bad("at least one whole class is required");
        }
        if self.table.n_wholes() != self.n_wholes || self.table.n_parts() != self.n_parts {
            return bad("part-whole table does not match the class counts");
        }
        let (a, b) = self.wholes_per_scene;
        if a == 0 || a > b {
            return bad("wholes per scene must be a range with 1 <= min <= max");
        }
        let (a, b) = self.parts_per_whole;
        if a > b {
            return bad("parts per whole must be a range with min <= max");
        }
        if !(self.noise >= 0.0) || !(self.jitter >= 0.0) {
            return bad("noise and jitter must be >= 0");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (1..=self.n_wholes)
            .map(|i| format!("Whole{i}"))
            .chain((1..=self.n_parts).map(|i| format!("Part{i}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub class_names: Vec<String>,
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

const PLACEMENT_TRIES: usize = 1000;

fn sample_scene<R: Rng>(rng: &mut R, spec: &DatasetSpec, scene: usize, next_id: &mut usize) -> Result<Scene> {
    let n_classes = spec.n_classes();
    let score_noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let jitter = Normal::new(0.0, spec.jitter).map_err(|e| Error::Config(e.to_string()))?;
    let scores_for = |rng: &mut R, class: usize| -> Vec<f64> {
        (0..n_classes)
            .map(|c| {
                let base = if c == class { 1.0 } else { 0.0 };
                let e = if spec.noise > 0.0 { score_noise.sample(rng) } else { 0.0 };
                (base + e).clamp(0.0, 1.0)
            })
            .collect()
    };

    let n_w = rng.gen_range(spec.wholes_per_scene.0..=spec.wholes_per_scene.1);
    let mut wholes: Vec<BoxGeom> = Vec::with_capacity(n_w);
    for _ in 0..n_w {
        let mut placed = None;
        for _ in 0..PLACEMENT_TRIES {
            let w = rng.gen_range(0.25..0.45);
            let h = rng.gen_range(0.25..0.45);
            let x0 = rng.gen_range(0.0..1.0 - w);
            let y0 = rng.gen_range(0.0..1.0 - h);
            let cand = BoxGeom::new(x0, y0, x0 + w, y0 + h)?;
            if wholes.iter().all(|o| o.intersection_area(&cand) == 0.0) {
                placed = Some(cand);
                break;
            }
        }
        match placed {
            Some(b) => wholes.push(b),
            None => {
                return Err(Error::Infeasible(format!(
                    "could not place {n_w} non-overlapping wholes in scene {scene}"
                )))
            }
        }
    }

    let mut boxes = Vec::new();
    for geom in wholes {
        let class = rng.gen_range(0..spec.n_wholes);
        let whole_id = *next_id;
        *next_id += 1;
        boxes.push(BoxRecord {
            scene,
            id: whole_id,
            class,
            parent: None,
            scores: scores_for(rng, class),
            geom,
        });
        let candidates: Vec<usize> = (0..spec.n_parts)
            .filter(|&p| spec.table.compatible(p, class))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let n_p = rng.gen_range(spec.parts_per_whole.0..=spec.parts_per_whole.1);
        for _ in 0..n_p {
            let part = *candidates.choose(rng).expect("nonempty");
            let pw = geom.width() * rng.gen_range(0.2..0.5);
            let ph = geom.height() * rng.gen_range(0.2..0.5);
            let x0 = rng.gen_range(geom.x0..geom.x1 - pw);
            let y0 = rng.gen_range(geom.y0..geom.y1 - ph);
            let exact = BoxGeom::new(x0, y0, x0 + pw, y0 + ph)?;
            let mut pg = exact;
            if spec.jitter > 0.0 {
                let dx = jitter.sample(rng) * pw;
                let dy = jitter.sample(rng) * ph;
                let moved = BoxGeom::new(x0 + dx, y0 + dy, x0 + dx + pw, y0 + dy + ph)?;
                if inclusion_ratio(&moved, &geom)? >= MIN_PART_IR {
                    pg = moved;
                }
            }
            let class = spec.table.part_class(part);
            boxes.push(BoxRecord {
                scene,
                id: *next_id,
                class,
                parent: Some(whole_id),
                scores: scores_for(rng, class),
                geom: pg,
            });
            *next_id += 1;
        }
    }
    Ok(Scene { id: scene, boxes })
}

fn class_counts(scene: &Scene, n_classes: usize) -> Vec<i64> {
    let mut c = vec![0; n_classes];
    for b in &scene.boxes {
        c[b.class] += 1;
    }
    c
}

/// Chooses `n_train` scenes so each class's train share stays close to
/// `fraction`. Greedy start from a seeded shuffle, then pairwise swaps that
/// lower the squared deviation.
fn stratified_split(counts: &[Vec<i64>], n_classes: usize, fraction: f64, n_train: usize, seed: u64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.shuffle(&mut rng::stream(seed, "split", &[]));
    let mut in_train = vec![false; counts.len()];
    for &s in order.iter().take(n_train) {
        in_train[s] = true;
    }
    let totals: Vec<f64> = (0..n_classes)
        .map(|c| counts.iter().map(|k| k[c]).sum::<i64>() as f64)
        .collect();
    let mut train: Vec<f64> = (0..n_classes)
        .map(|c| {
            counts
                .iter()
                .zip(&in_train)
                .filter(|(_, &t)| t)
                .map(|(k, _)| k[c])
                .sum::<i64>() as f64
        })
        .collect();
    let dev = |train: &[f64]| -> f64 {
        (0..n_classes)
            .filter(|&c| totals[c] > 0.0)
            .map(|c| {
                let d = train[c] / totals[c] - fraction;
                d * d
            })
            .sum()
    };
    let mut current = dev(&train);
    for _ in 0..50 {
        let mut improved = false;
        for &a in &order {
            if !in_train[a] {
                continue;
            }
            for &b in &order {
                if in_train[b] {
                    continue;
                }
                let mut cand = train.clone();
                for c in 0..n_classes {
                    cand[c] += (counts[b][c] - counts[a][c]) as f64;
                }
                let d = dev(&cand);
                if d + 1e-15 < current {
                    current = d;
                    train = cand;
                    in_train[a] = false;
                    in_train[b] = true;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    in_train
}

/// Draws every scene and splits them into train and test sets.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut next_id = 0;
    let mut scenes = Vec::with_capacity(spec.scenes);
    for s in 0..spec.scenes {
        let mut r = rng::stream(spec.seed, "scene", &[s as u64]);
        scenes.push(sample_scene(&mut r, spec, s, &mut next_id)?);
    }
    let n_classes = spec.n_classes();
    let counts: Vec<Vec<i64>> = scenes.iter().map(|s| class_counts(s, n_classes)).collect();
    let n_train = ((spec.scenes as f64) * spec.train_fraction).round() as usize;
    let n_train = n_train.clamp(1.min(spec.scenes), spec.scenes);
    let in_train = stratified_split(&counts, n_classes, spec.train_fraction, n_train, spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (scene, t) in scenes.into_iter().zip(in_train) {
        if t {
            train.push(scene);
        } else {
            test.push(scene);
        }
    }
    Ok(Dataset {
        spec: spec.clone(),
        class_names: spec.class_names(),
        train,
        test,
    })
}

/// Per-class share of boxes that landed in the training split.
pub fn train_share(ds: &Dataset) -> Vec<Option<f64>> {
    let n = ds.n_classes();
    let count = |scenes: &[Scene]| {
        let mut c = vec![0usize; n];
        for s in scenes {
            for b in &s.boxes {
                c[b.class] += 1;
            }
        }
        c
    };
    let tr = count(&ds.train);
    let te = count(&ds.test);
    (0..n)
        .map(|c| {
            let total = tr[c] + te[c];
            (total > 0).then(|| tr[c] as f64 / total as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: DatasetSpec,
    class_names: Vec<String>,
    train_scenes: Vec<usize>,
    test_scenes: Vec<usize>,
}

pub const HEADER_FILE: &str = "dataset.json";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";

fn write_jsonl(path: &Path, scenes: &[Scene]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for s in scenes {
        for b in &s.boxes {
            serde_json::to_writer(&mut w, b)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the header sidecar plus one JSON Lines file per split.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header = Header {
        spec: ds.spec.clone(),
        class_names: ds.class_names.clone(),
        train_scenes: ds.train.iter().map(|s| s.id).collect(),
        test_scenes: ds.test.iter().map(|s| s.id).collect(),
    };
    fs::write(dir.join(HEADER_FILE), serde_json::to_string_pretty(&header)? + "\n")?;
    write_jsonl(&dir.join(TRAIN_FILE), &ds.train)?;
    write_jsonl(&dir.join(TEST_FILE), &ds.test)?;
    Ok(())
}

fn read_jsonl(path: &Path, ids: &[usize], n_classes: usize) -> Result<Vec<Scene>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut scenes: Vec<Scene> = ids
        .iter()
        .map(|&id| Scene {
            id,
            boxes: Vec::new(),
        })
        .collect();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BoxRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if rec.scores.len() != n_classes || rec.class >= n_classes {
            return Err(Error::Data(format!(
                "{}:{}: record does not match the {n_classes} declared classes",
                path.display(),
                i + 1
            )));
        }
        let slot = ids
            .iter()
            .position(|&s| s == rec.scene)
            .ok_or_else(|| Error::Data(format!("{}:{}: unknown scene {}", path.display(), i + 1, rec.scene)))?;
        scenes[slot].boxes.push(rec);
    }
    Ok(scenes)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(dir.join(HEADER_FILE))?;
    let header: Header = serde_json::from_str(&text)?;
    let n = header.class_names.len();
    let train = read_jsonl(&dir.join(TRAIN_FILE), &header.train_scenes, n)?;
    let test = read_jsonl(&dir.join(TEST_FILE), &header.test_scenes, n)?;
    Ok(Dataset {
        spec: header.spec,
        class_names: header.class_names,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(v: [f64; 4]) -> BoxGeom {
        BoxGeom::try_from(v).unwrap()
    }

    #[test]
    fn inclusion_ratio_cases() {
        let unit = geom([0.0, 0.0, 1.0, 1.0]);
        assert_eq!(inclusion_ratio(&geom([0.2, 0.2, 0.3, 0.3]), &unit).unwrap(), 1.0);
        assert_eq!(inclusion_ratio(&geom([2.0, 2.0, 3.0, 3.0]), &unit).unwrap(), 0.0);
        assert_eq!(inclusion_ratio(&unit, &geom([0.5, 0.0, 1.5, 1.0])).unwrap(), 0.5);
        assert!(BoxGeom::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn grounding_and_pair_vectors() {
        let b = BoxRecord {
            scene: 0,
            id: 0,
            class: 0,
            parent: None,
            scores: vec![0.9, 0.1],
            geom: geom([0.0, 0.0, 0.5, 0.5]),
        };
        assert_eq!(b.grounding_vector(), vec![0.9, 0.1, 0.0, 0.0, 0.5, 0.5]);
        let z = BoxRecord {
            scores: vec![0.0, 0.0],
            ..b.clone()
        };
        assert_eq!(z.grounding_vector(), vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
        assert_eq!(
            pair_vector(&b, &z),
            vec![0.9, 0.1, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]
        );
    }

    #[test]
    fn json_line_layout() {
        let b = BoxRecord {
            scene: 3,
            id: 7,
            class: 1,
            parent: Some(5),
            scores: vec![0.25, 1.0],
            geom: geom([0.0, 0.125, 0.5, 0.75]),
        };
        let line = serde_json::to_string(&b).unwrap();
        assert_eq!(
            line,
            r#"{"scene":3,"id":7,"class":1,"parent":5,"scores":[0.25,1.0],"box":[0.0,0.125,0.5,0.75]}"#
        );
        let back: BoxRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<BoxRecord>(&line.replace("0.75", "0.1")).is_err());
    }

    #[test]
    fn noiseless_single_pair_scenes() {
        let mut spec = DatasetSpec::new(1, 1, 30, 4);
        spec.wholes_per_scene = (1, 1);
        spec.parts_per_whole = (1, 1);
        spec.noise = 0.0;
        let ds = generate(&spec).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            assert_eq!(s.boxes.len(), 2);
            for b in &s.boxes {
                assert_eq!(b.scores.iter().filter(|&&x| x == 1.0).count(), 1);
                assert_eq!(b.scores[b.class], 1.0);
                assert_eq!(b.scores.iter().sum::<f64>(), 1.0);
            }
            for (c, p) in s.part_of_pairs() {
                let ir = inclusion_ratio(&s.get(c).unwrap().geom, &s.get(p).unwrap().geom).unwrap();
                assert!(ir >= MIN_PART_IR);
            }
        }
    }

    #[test]
    fn default_scenes_structure() {
        let spec = DatasetSpec::new(8, 8, 200, 7);
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.train.len() + ds.test.len(), 200);
        assert_eq!(ds.train.len(), 160);
        for s in ds.train.iter().chain(&ds.test) {
            let wholes: Vec<&BoxRecord> = s.boxes.iter().filter(|b| b.parent.is_none()).collect();
            for (i, a) in wholes.iter().enumerate() {
                assert!(a.class < 8);
                for b in &wholes[i + 1..] {
                    assert_eq!(a.geom.intersection_area(&b.geom), 0.0);
                }
            }
            for b in &s.boxes {
                assert!(b.scores.iter().all(|x| (0.0..=1.0).contains(x)));
                if let Some(p) = b.parent {
                    let parent = s.get(p).unwrap();
                    assert!(parent.parent.is_none());
                    assert!(spec.table.is_part_of(b.class, parent.class));
                    assert!(inclusion_ratio(&b.geom, &parent.geom).unwrap() >= MIN_PART_IR);
                }
            }
        }
    }

    #[test]
    fn split_keeps_class_proportions() {
        let ds = generate(&DatasetSpec::new(8, 8, 200, 7)).unwrap();
        // counting oracle over the emitted records
        let mut tr = [0usize; 16];
        let mut all = [0usize; 16];
        for (scenes, is_train) in [(&ds.train, true), (&ds.test, false)] {
            for s in scenes {
                for b in &s.boxes {
                    all[b.class] += 1;
                    if is_train {
                        tr[b.class] += 1;
                    }
                }
            }
        }
        for c in 0..16 {
            let share = tr[c] as f64 / all[c] as f64;
            assert!((share - 0.8).abs() <= 0.02, "class {c}: {share}");
        }
    }

    #[test]
    fn invalid_and_infeasible_specs() {
        assert!(matches!(generate(&DatasetSpec::new(8, 8, 0, 1)), Err(Error::Config(_))));
        let mut spec = DatasetSpec::new(2, 2, 5, 1);
        spec.wholes_per_scene = (30, 30);
        assert!(matches!(generate(&spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn files_round_trip_and_are_reproducible() {
        let ds = generate(&DatasetSpec::new(3, 3, 20, 11)).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_dataset(&ds, a.path()).unwrap();
        write_dataset(&generate(&DatasetSpec::new(3, 3, 20, 11)).unwrap(), b.path()).unwrap();
        for f in [HEADER_FILE, TRAIN_FILE, TEST_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let back = read_dataset(a.path()).unwrap();
        assert_eq!(back, ds);
        let v1: Vec<Vec<f64>> = ds.train[0].boxes.iter().map(BoxRecord::grounding_vector).collect();
        let v2: Vec<Vec<f64>> = back.train[0].boxes.iter().map(BoxRecord::grounding_vector).collect();
        assert_eq!(v1, v2);
    }
}
