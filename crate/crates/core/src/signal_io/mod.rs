//! Dataset ingestion: WAV recordings, reference labels, the dataset
//! manifest, and patient-disjoint train/test folds.

pub mod labels;
pub mod wav;

pub use labels::read_labels;
pub use wav::{read_wav, write_wav, WavAudio};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Binary ground truth of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "normal" => Some(Label::Normal),
            "abnormal" => Some(Label::Abnormal),
            _ => None,
        }
    }

    /// Training target: Abnormal is the positive class.
    pub fn target(self) -> f32 {
        match self {
            Label::Normal => 0.0,
            Label::Abnormal => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled audio record held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub patient_id: String,
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub label: Label,
}

/// Manifest row: where a recording lives and what it is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub patient_id: String,
    pub label: Label,
}

/// The corpus as a list of entries plus per-class counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_counts: BTreeMap<Label, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestError {
    Io(String),
    /// A WAV file without a reference label.
    MissingLabel(String),
    /// Two entries share a record id.
    DuplicateRecord(String),
    /// A manifest file line that does not parse.
    Malformed { line: usize, reason: String },
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestError::Io(msg) => write!(f, "manifest i/o error: {msg}"),
            ManifestError::MissingLabel(id) => write!(f, "recording {id} has no reference label"),
            ManifestError::DuplicateRecord(id) => write!(f, "duplicate record id {id}"),
            ManifestError::Malformed { line, reason } => {
                write!(f, "manifest line {line}: {reason}")
            }
        }
    }
}

impl std::error::Error for ManifestError {}

/// Record ids with a `_take` suffix belong to the same patient; otherwise
/// one recording is its own patient.
pub fn derive_patient_id(record_id: &str) -> String {
    record_id.split('_').next().unwrap_or(record_id).to_string()
}

impl DatasetManifest {
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        let mut class_counts = BTreeMap::new();
        for e in &entries {
            if !seen.insert(e.id.clone()) {
                return Err(ManifestError::DuplicateRecord(e.id.clone()));
            }
            *class_counts.entry(e.label).or_insert(0) += 1;
        }
        Ok(DatasetManifest { entries, class_counts })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn patients(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.patient_id.clone()).collect()
    }

    /// Scans `root` recursively for `.wav` files, joins them with the
    /// label map, and sorts entries by record id. The record id is the
    /// file stem; the patient id is derived from it.
    pub fn scan(root: &Path, labels: &BTreeMap<String, Label>) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            let read = std::fs::read_dir(&dir).map_err(|e| ManifestError::Io(format!("{}: {e}", dir.display())))?;
            for item in read {
                let item = item.map_err(|e| ManifestError::Io(e.to_string()))?;
                let path = item.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                if path.extension().and_then(|e| e.to_str()) != Some("wav") {
                    continue;
                }
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| ManifestError::Io(format!("unreadable file name: {}", path.display())))?
                    .to_string();
                let label = *labels.get(&id).ok_or_else(|| ManifestError::MissingLabel(id.clone()))?;
                entries.push(ManifestEntry {
                    patient_id: derive_patient_id(&id),
                    id,
                    path,
                    label,
                });
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Self::from_entries(entries)
    }

    /// Line-oriented text form: a header, then `id,patient,label,path`
    /// per row. The path comes last so commas elsewhere cannot occur.
    pub fn to_text(&self) -> String {
        let mut out = String::from("id,patient,label,path\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.id, e.patient_id, e.label, e.path.display()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line == "id,patient,label,path") {
                continue;
            }
            let mut parts = line.splitn(4, ',');
            let id = parts.next().unwrap_or_default().to_string();
            let patient = parts.next().map(str::to_string);
            let label = parts.next().and_then(Label::parse);
            let path = parts.next().map(PathBuf::from);
            match (patient, label, path) {
                (Some(patient_id), Some(label), Some(path)) if !id.is_empty() => {
                    entries.push(ManifestEntry { id, path, patient_id, label });
                }
                _ => {
                    return Err(ManifestError::Malformed {
                        line: i + 1,
                        reason: "expected id,patient,label,path".into(),
                    })
                }
            }
        }
        Self::from_entries(entries)
    }
}

/// One patient-disjoint train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_patients: BTreeSet<String>,
    pub test_patients: BTreeSet<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitError {
    /// Fewer than two patients cannot be split.
    InsufficientData(usize),
    InvalidFraction(String),
}

impl fmt::Display for SplitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitError::InsufficientData(n) => write!(f, "cannot split {n} patient(s)"),
            SplitError::InvalidFraction(msg) => write!(f, "invalid train fraction: {msg}"),
        }
    }
}

impl std::error::Error for SplitError {}

/// Independent seeded shuffles of the patient list, split so the test
/// side holds `round((1 - train_frac) * patients)` of them (clamped to
/// keep both sides non-empty). Pure in `(manifest, n_folds, train_frac,
/// seed)`.
pub fn make_folds(
    manifest: &DatasetManifest,
    n_folds: usize,
    train_frac: f64,
    seed: u64,
) -> Result<Vec<FoldSplit>, SplitError> {
    assert!(n_folds >= 1, "n_folds must be at least 1");
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(SplitError::InvalidFraction(format!("{train_frac} is outside (0, 1)")));
    }
    let patients: Vec<String> = manifest.patients().into_iter().collect();
    if patients.len() < 2 {
        return Err(SplitError::InsufficientData(patients.len()));
    }
    let n_test = (((1.0 - train_frac) * patients.len() as f64).round() as usize)
        .clamp(1, patients.len() - 1);

    let mut folds = Vec::with_capacity(n_folds);
    for fold_index in 0..n_folds {
        let mut shuffled = patients.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(fold_index as u64));
        shuffled.shuffle(&mut rng);
        let test_patients: BTreeSet<String> = shuffled[..n_test].iter().cloned().collect();
        let train_patients: BTreeSet<String> = shuffled[n_test..].iter().cloned().collect();
        folds.push(FoldSplit {
            fold_index,
            train_patients,
            test_patients,
            seed,
        });
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_of(n_patients: usize) -> DatasetManifest {
        let entries = (0..n_patients)
            .map(|i| ManifestEntry {
                id: format!("r{i:04}"),
                path: PathBuf::from(format!("r{i:04}.wav")),
                patient_id: format!("p{i:04}"),
                label: if i % 4 == 0 { Label::Abnormal } else { Label::Normal },
            })
            .collect();
        DatasetManifest::from_entries(entries).unwrap()
    }

    #[test]
    fn class_counts_sum_to_total() {
        let m = manifest_of(10);
        assert_eq!(m.class_counts.values().sum::<usize>(), m.len());
        assert_eq!(m.class_counts[&Label::Abnormal], 3);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let e = ManifestEntry {
            id: "same".into(),
            path: PathBuf::from("same.wav"),
            patient_id: "same".into(),
            label: Label::Normal,
        };
        assert_eq!(
            DatasetManifest::from_entries(vec![e.clone(), e]),
            Err(ManifestError::DuplicateRecord("same".into()))
        );
    }

    #[test]
    fn manifest_text_round_trips() {
        let m = manifest_of(5);
        let parsed = DatasetManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(parsed, m);
    }

    #[test]
    fn patient_id_strips_take_suffix() {
        assert_eq!(derive_patient_id("a0007_2"), "a0007");
        assert_eq!(derive_patient_id("a0007"), "a0007");
    }

    #[test]
    fn ten_patients_split_nine_to_one() {
        let folds = make_folds(&manifest_of(10), 1, 0.9, 3).unwrap();
        assert_eq!(folds[0].train_patients.len(), 9);
        assert_eq!(folds[0].test_patients.len(), 1);
    }

    #[test]
    fn folds_are_deterministic_and_disjoint() {
        let m = manifest_of(40);
        let a = make_folds(&m, 4, 0.9, 17).unwrap();
        let b = make_folds(&m, 4, 0.9, 17).unwrap();
        assert_eq!(a, b);
        for fold in &a {
            assert!(fold.train_patients.is_disjoint(&fold.test_patients));
            let union: BTreeSet<_> = fold.train_patients.union(&fold.test_patients).cloned().collect();
            assert_eq!(union, m.patients());
        }
        // Different folds shuffle independently.
        assert_ne!(a[0].test_patients, a[1].test_patients);
    }

    #[test]
    fn corpus_sized_split_yields_seventy_six_test_patients() {
        let folds = make_folds(&manifest_of(764), 4, 0.9, 1).unwrap();
        for fold in folds {
            let n = fold.test_patients.len();
            assert!((76..=77).contains(&n), "test patients {n}");
        }
    }

    #[test]
    fn single_patient_cannot_be_split() {
        assert_eq!(make_folds(&manifest_of(1), 1, 0.9, 0), Err(SplitError::InsufficientData(1)));
    }
}
