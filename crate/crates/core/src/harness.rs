//! Dataset records, subject-independent cross-validation and reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{pca_fit, DEFAULT_TARGET_VARIANCE};
use crate::svm::{svm_train_multiclass, KernelParams, Standardizer};

pub const NUM_EXPRESSIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expression {
    Angry,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
    Neutral,
}

impl Expression {
    /// The six classified expressions, in class-index order.
    pub const BASIC: [Expression; 6] = [
        Expression::Angry,
        Expression::Disgust,
        Expression::Fear,
        Expression::Happy,
        Expression::Sad,
        Expression::Surprise,
    ];

    pub fn class_index(self) -> Option<usize> {
        Expression::BASIC.iter().position(|&e| e == self)
    }

    pub fn from_class(index: usize) -> Option<Expression> {
        Expression::BASIC.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Expression::Angry => "angry",
            Expression::Disgust => "disgust",
            Expression::Fear => "fear",
            Expression::Happy => "happy",
            Expression::Sad => "sad",
            Expression::Surprise => "surprise",
            Expression::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Expression::BASIC
            .iter()
            .chain(&[Expression::Neutral])
            .find(|e| e.name() == lower || (lower.len() == 2 && e.name()[..2].eq_ignore_ascii_case(&lower)))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown expression {s:?}")))
    }
}

/// One row of the dataset manifest. Paths are absolute after loading.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub subject_id: String,
    pub expression: Expression,
    /// 1..=4 for the six expressions, 0 for neutral.
    pub intensity: u8,
    pub texture_path: PathBuf,
    pub depth_path: PathBuf,
    pub landmarks_path: PathBuf,
    /// Optional precomputed conv features keyed by column name, e.g.
    /// `feat_tex_mouth`.
    pub features: BTreeMap<String, PathBuf>,
}

impl SampleRecord {
    pub fn sample_id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.expression, self.intensity)
    }

    pub fn label(&self) -> Option<usize> {
        self.expression.class_index()
    }
}

pub const MANIFEST_COLUMNS: [&str; 6] = ["subject_id", "expression", "intensity", "texture_path", "depth_path", "landmarks_path"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = crate::io_util::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base: &Path, source: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            what: "manifest",
            location: format!("{source}:{line}"),
            message,
        };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        let header: Vec<&str> = headers.iter().collect();
        if header.len() < MANIFEST_COLUMNS.len() || header[..MANIFEST_COLUMNS.len()] != MANIFEST_COLUMNS {
            return Err(bad(1, format!("header must start with {}", MANIFEST_COLUMNS.join(","))));
        }
        if let Some(extra) = header[MANIFEST_COLUMNS.len()..].iter().find(|h| !h.starts_with("feat_")) {
            return Err(bad(1, format!("unknown column {extra:?}")));
        }
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| bad(line, e.to_string()))?;
            let expression: Expression = row[1].parse().map_err(|e: Error| bad(line, e.to_string()))?;
            let intensity: u8 = row[2].parse().map_err(|_| bad(line, format!("bad intensity {:?}", &row[2])))?;
            let valid = if expression == Expression::Neutral { intensity <= 4 } else { (1..=4).contains(&intensity) };
            if !valid {
                return Err(bad(line, format!("intensity {intensity} invalid for {expression}")));
            }
            if row[0].is_empty() {
                return Err(bad(line, "empty subject id".into()));
            }
            let mut features = BTreeMap::new();
            for (col, value) in header[MANIFEST_COLUMNS.len()..].iter().zip(row.iter().skip(MANIFEST_COLUMNS.len())) {
                if !value.is_empty() {
                    features.insert(col.to_string(), resolve(value));
                }
            }
            records.push(SampleRecord {
                subject_id: row[0].to_string(),
                expression,
                intensity,
                texture_path: resolve(&row[3]),
                depth_path: resolve(&row[4]),
                landmarks_path: resolve(&row[5]),
                features,
            });
        }
        Ok(Manifest { records })
    }

    /// Serializes with paths made relative to `base` where possible.
    pub fn to_csv(&self, base: &Path) -> String {
        let feature_cols: BTreeSet<&String> = self.records.iter().flat_map(|r| r.features.keys()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = MANIFEST_COLUMNS.to_vec();
        header.extend(feature_cols.iter().map(|s| s.as_str()));
        w.write_record(&header).expect("in-memory write");
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        for r in &self.records {
            let mut row = vec![
                r.subject_id.clone(),
                r.expression.to_string(),
                r.intensity.to_string(),
                rel(&r.texture_path),
                rel(&r.depth_path),
                rel(&r.landmarks_path),
            ];
            row.extend(feature_cols.iter().map(|c| r.features.get(*c).map(|p| rel(p)).unwrap_or_default()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        crate::io_util::write_atomic(path, self.to_csv(base).as_bytes())
    }

    /// Distinct subject ids in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.records.iter().map(|r| &r.subject_id).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Evaluation subjects per test on a 100-subject dataset; smaller
    /// datasets keep the same proportion.
    pub n_subjects_eval: usize,
    pub intensities: Vec<u8>,
    pub n_tests: usize,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_subjects_eval: 60,
            intensities: vec![3, 4],
            n_tests: 100,
            n_folds: 10,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    /// Number of evaluation subjects for a dataset of `total` subjects:
    /// `n_subjects_eval` per hundred, capped at `n_subjects_eval`.
    pub fn eval_count(&self, total: usize) -> usize {
        let scaled = (total as f64 * self.n_subjects_eval as f64 / 100.0).round() as usize;
        scaled.min(self.n_subjects_eval)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tests == 0 || self.n_folds < 2 || self.n_subjects_eval == 0 || self.intensities.is_empty() {
            return Err(Error::Config(format!("invalid protocol {self:?}")));
        }
        if self.intensities.iter().any(|i| !(1..=4).contains(i)) {
            return Err(Error::Config("protocol intensities must lie in 1..=4".into()));
        }
        Ok(())
    }
}

/// Mixes a master seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded partition of `subjects` into `n_eval` evaluation subjects and the
/// remaining fine-tuning subjects, both returned sorted.
pub fn split_subjects(subjects: &[String], n_eval: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let mut all: Vec<String> = subjects.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if n_eval == 0 || n_eval >= all.len() {
        return Err(Error::TooFewSubjects {
            needed: n_eval.max(1) + 1,
            found: all.len(),
        });
    }
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut finetune = all.split_off(n_eval);
    all.sort();
    finetune.sort();
    Ok((all, finetune))
}

/// Deals shuffled subjects round-robin into `n_folds` groups whose sizes
/// differ by at most one.
pub fn make_folds(subjects: &[String], n_folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if n_folds == 0 || n_folds > subjects.len() {
        return Err(Error::BadFoldCount {
            folds: n_folds,
            subjects: subjects.len(),
        });
    }
    let mut order = subjects.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); n_folds];
    for (i, s) in order.into_iter().enumerate() {
        folds[i % n_folds].push(s);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

/// Row-normalized confusion matrix: entry `[i][j]` is the fraction of class-`i`
/// samples predicted as `j`. Rows of absent classes are all zero.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize]) -> Result<Vec<Vec<f64>>> {
    let counts = confusion_counts(truth, predicted)?;
    Ok(normalize_rows(&counts))
}

fn confusion_counts(truth: &[usize], predicted: &[usize]) -> Result<Vec<Vec<u64>>> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut m = vec![vec![0u64; NUM_EXPRESSIONS]; NUM_EXPRESSIONS];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= NUM_EXPRESSIONS || p >= NUM_EXPRESSIONS {
            return Err(Error::Config(format!("class index out of range: {t} -> {p}")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn normalize_rows(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
        })
        .collect()
}

/// One labelled feature vector taking part in the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub sample_id: String,
    pub subject: String,
    pub label: usize,
    pub intensity: u8,
    pub features: Vec<f64>,
}

/// Fits on the training fold and labels the test fold. Implementations only
/// ever see test features after fitting.
pub trait FoldClassifier: Sync {
    fn fit_predict(&self, train_x: &[Vec<f64>], train_y: &[usize], test_x: &[Vec<f64>], seed: u64) -> Result<Vec<usize>>;
}

/// PCA, then standardization of the reduced coordinates, then a one-vs-one
/// polynomial SVM, all fitted on the training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaSvmClassifier {
    pub target_variance: f64,
    pub kernel: KernelParams,
}

impl Default for PcaSvmClassifier {
    fn default() -> Self {
        PcaSvmClassifier {
            target_variance: DEFAULT_TARGET_VARIANCE,
            kernel: KernelParams::default(),
        }
    }
}

impl FoldClassifier for PcaSvmClassifier {
    fn fit_predict(&self, train_x: &[Vec<f64>], train_y: &[usize], test_x: &[Vec<f64>], _seed: u64) -> Result<Vec<usize>> {
        let pca = pca_fit(train_x, self.target_variance)?;
        let reduced: Vec<Vec<f64>> = train_x.iter().map(|x| pca.transform(x)).collect::<Result<_>>()?;
        let scaler = Standardizer::fit(&reduced)?;
        let train: Vec<Vec<f64>> = reduced.iter().map(|x| scaler.apply(x)).collect();
        let model = svm_train_multiclass(&train, train_y, &self.kernel)?;
        test_x
            .iter()
            .map(|x| Ok(model.predict(&scaler.apply(&pca.transform(x)?))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub n_tests: usize,
    pub n_folds: usize,
    pub test_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Pooled over all tests, row-normalized.
    pub confusion: Vec<Vec<f64>>,
    pub samples_per_test: Vec<usize>,
    /// `[test][fold]` -> sorted subject ids.
    pub fold_subjects: Vec<Vec<Vec<String>>>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "mean accuracy over {} tests ({} folds each): {:.2}% (std {:.2}%)",
            self.n_tests,
            self.n_folds,
            100.0 * self.mean_accuracy,
            100.0 * self.std_accuracy
        )
        .unwrap();
        writeln!(s).unwrap();
        write!(s, "{:>10}", "").unwrap();
        for c in &self.classes {
            write!(s, "{c:>10}").unwrap();
        }
        writeln!(s).unwrap();
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            write!(s, "{c:>10}").unwrap();
            for v in row {
                write!(s, "{:>9.2}%", 100.0 * v).unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

struct TestOutcome {
    accuracy: f64,
    samples: usize,
    counts: Vec<Vec<u64>>,
    folds: Vec<Vec<String>>,
}

/// Runs `cfg.n_tests` repetitions of subject-independent k-fold
/// cross-validation. Each test draws its evaluation subjects from `pool`
/// (all of them when the pool is no larger than the evaluation count) and
/// re-deals them into folds; randomness flows from `cfg.seed` only.
pub fn run_protocol(samples: &[EvalSample], pool: &[String], cfg: &ProtocolConfig, classifier: &dyn FoldClassifier) -> Result<EvalReport> {
    cfg.validate()?;
    let usable: Vec<&EvalSample> = samples.iter().filter(|s| cfg.intensities.contains(&s.intensity)).collect();
    let pool: Vec<String> = pool.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n_eval = cfg.n_subjects_eval.min(pool.len());
    if n_eval < cfg.n_folds {
        return Err(Error::BadFoldCount {
            folds: cfg.n_folds,
            subjects: n_eval,
        });
    }

    let outcomes: Vec<TestOutcome> = (0..cfg.n_tests)
        .into_par_iter()
        .map(|t| run_test(&usable, &pool, n_eval, cfg, derive_seed(cfg.seed, t as u64), classifier))
        .collect::<Result<_>>()?;

    let mut counts = vec![vec![0u64; NUM_EXPRESSIONS]; NUM_EXPRESSIONS];
    for o in &outcomes {
        for (row, orow) in counts.iter_mut().zip(&o.counts) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
    }
    let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
    Ok(EvalReport {
        classes: Expression::BASIC.iter().map(|e| e.to_string()).collect(),
        n_tests: cfg.n_tests,
        n_folds: cfg.n_folds,
        test_accuracies: accs,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        confusion: normalize_rows(&counts),
        samples_per_test: outcomes.iter().map(|o| o.samples).collect(),
        fold_subjects: outcomes.into_iter().map(|o| o.folds).collect(),
    })
}

fn run_test(
    samples: &[&EvalSample],
    pool: &[String],
    n_eval: usize,
    cfg: &ProtocolConfig,
    seed: u64,
    classifier: &dyn FoldClassifier,
) -> Result<TestOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = pool.to_vec();
    chosen.shuffle(&mut rng);
    chosen.truncate(n_eval);
    let folds = make_folds(&chosen, cfg.n_folds, derive_seed(seed, 1))?;

    let mut counts = vec![vec![0u64; NUM_EXPRESSIONS]; NUM_EXPRESSIONS];
    let (mut correct, mut total) = (0usize, 0usize);
    for (k, fold) in folds.iter().enumerate() {
        let test_subjects: BTreeSet<&str> = fold.iter().map(String::as_str).collect();
        let train_subjects: BTreeSet<&str> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().map(String::as_str))
            .collect();
        if let Some(s) = test_subjects.intersection(&train_subjects).next() {
            return Err(Error::SubjectLeak(s.to_string()));
        }
        let train: Vec<&EvalSample> = samples.iter().copied().filter(|s| train_subjects.contains(s.subject.as_str())).collect();
        let test: Vec<&EvalSample> = samples.iter().copied().filter(|s| test_subjects.contains(s.subject.as_str())).collect();
        if test.is_empty() {
            continue;
        }
        if train.is_empty() {
            return Err(Error::EmptySet("training fold"));
        }
        let train_x: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
        let train_y: Vec<usize> = train.iter().map(|s| s.label).collect();
        let test_x: Vec<Vec<f64>> = test.iter().map(|s| s.features.clone()).collect();
        let predicted = classifier.fit_predict(&train_x, &train_y, &test_x, derive_seed(seed, 2 + k as u64))?;
        if predicted.len() != test.len() {
            return Err(Error::LengthMismatch(predicted.len(), test.len()));
        }
        for (s, &p) in test.iter().zip(&predicted) {
            if p >= NUM_EXPRESSIONS {
                return Err(Error::Config(format!("classifier predicted class {p}")));
            }
            counts[s.label][p] += 1;
            correct += usize::from(p == s.label);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptySet("evaluation"));
    }
    Ok(TestOutcome {
        accuracy: correct as f64 / total as f64,
        samples: total,
        counts,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i:03}")).collect()
    }

    #[test]
    fn subject_split_is_disjoint_and_complete() {
        let all = names(100);
        let (eval, tune) = split_subjects(&all, 60, 7).unwrap();
        assert_eq!((eval.len(), tune.len()), (60, 40));
        let mut union: Vec<String> = eval.iter().chain(&tune).cloned().collect();
        union.sort();
        assert_eq!(union, all);
        assert_eq!(split_subjects(&all, 60, 7).unwrap(), (eval, tune));
        let cfg = ProtocolConfig::default();
        assert_eq!(cfg.eval_count(100), 60);
        assert_eq!(cfg.eval_count(10), 6);
        let (e, t) = split_subjects(&names(10), cfg.eval_count(10), 1).unwrap();
        assert_eq!((e.len(), t.len()), (6, 4));
        assert!(matches!(split_subjects(&names(1), 1, 0), Err(Error::TooFewSubjects { .. })));
    }

    #[test]
    fn folds_partition_subjects() {
        let folds = make_folds(&names(60), 10, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 6));
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    assert!(folds[i].iter().all(|s| !folds[j].contains(s)));
                }
            }
        }
        let mut sizes: Vec<usize> = make_folds(&names(7), 3, 0).unwrap().iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 3]);
        assert!(matches!(make_folds(&names(5), 6, 0), Err(Error::BadFoldCount { .. })));
    }

    #[test]
    fn confusion_examples() {
        let truth: Vec<usize> = (0..6).flat_map(|c| [c, c]).collect();
        let m = confusion_matrix(&truth, &truth).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(m[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = confusion_matrix(&truth, &vec![0; truth.len()]).unwrap();
        assert!(m.iter().all(|row| row[0] == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred: Vec<usize> = truth.iter().map(|_| rng.random_range(0..6)).collect();
        for row in confusion_matrix(&truth, &pred).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(matches!(confusion_matrix(&[0], &[]), Err(Error::LengthMismatch(1, 0))));
    }

    #[test]
    fn expression_names_round_trip() {
        for e in Expression::BASIC.iter().chain(&[Expression::Neutral]) {
            assert_eq!(e.name().parse::<Expression>().unwrap(), *e);
        }
        assert_eq!("HA".parse::<Expression>().unwrap(), Expression::Happy);
        assert!("bored".parse::<Expression>().is_err());
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let text = "subject_id,expression,intensity,texture_path,depth_path,landmarks_path,feat_tex_mouth\n\
                    F0001,happy,4,t.ppm,d.pgm,l.txt,m.fpt\n\
                    F0001,neutral,0,t0.ppm,d0.pgm,l0.txt,\n";
        let m = Manifest::parse(text, Path::new("/data"), "m.csv").unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].texture_path, Path::new("/data/t.ppm"));
        assert_eq!(m.records[0].features["feat_tex_mouth"], Path::new("/data/m.fpt"));
        assert!(m.records[1].features.is_empty());
        assert_eq!(m.records[0].sample_id(), "F0001_happy_4");
        let again = Manifest::parse(&m.to_csv(Path::new("/data")), Path::new("/data"), "again").unwrap();
        assert_eq!(again, m);

        let bad_intensity = "subject_id,expression,intensity,texture_path,depth_path,landmarks_path\nF1,sad,5,a,b,c\n";
        assert!(Manifest::parse(bad_intensity, Path::new("."), "x").is_err());
        let bad_column = "subject_id,expression,intensity,texture_path,depth_path,landmarks_path,extra\n";
        assert!(Manifest::parse(bad_column, Path::new("."), "x").is_err());
    }
}
