//! Corpus ingestion, the seven-emotion label space, standardization and the
//! seeded train/test split.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unrecognized file name pattern: {0}")]
    UnrecognizedPattern(String),
    #[error("unknown emotion code {code:?} in {name}")]
    UnknownCode { code: String, name: String },
    #[error("unknown emotion {0:?}")]
    UnknownEmotion(String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        DatasetError::MalformedCsv(e.to_string())
    }
}

/// The unified label space, coded alphabetically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Neutral = 4,
    Sad = 5,
    Surprise = 6,
}

pub const NUM_EMOTIONS: usize = 7;

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Neutral,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "angry",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = DatasetError;

    /// Accepts the canonical names and common corpus spellings
    /// (`anger`, `fearful`, `happiness`, `sadness`, `surprised`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_ascii_lowercase().as_str() {
            "angry" | "anger" => EmotionLabel::Angry,
            "disgust" | "disgusted" => EmotionLabel::Disgust,
            "fear" | "fearful" => EmotionLabel::Fear,
            "happy" | "happiness" => EmotionLabel::Happy,
            "neutral" | "calm" => EmotionLabel::Neutral,
            "sad" | "sadness" => EmotionLabel::Sad,
            "surprise" | "surprised" | "pleasant_surprise" | "pleasant_surprised" | "ps" => EmotionLabel::Surprise,
            _ => return Err(DatasetError::UnknownEmotion(s.to_string())),
        };
        Ok(label)
    }
}

pub fn one_hot(label: EmotionLabel) -> [f64; NUM_EMOTIONS] {
    let mut v = [0.0; NUM_EMOTIONS];
    v[label.code()] = 1.0;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corpus {
    Ravdess,
    Cremad,
    Tess,
    Savee,
    Movieclips,
}

impl Corpus {
    pub const ALL: [Corpus; 5] = [Corpus::Ravdess, Corpus::Cremad, Corpus::Tess, Corpus::Savee, Corpus::Movieclips];

    pub fn name(self) -> &'static str {
        match self {
            Corpus::Ravdess => "ravdess",
            Corpus::Cremad => "cremad",
            Corpus::Tess => "tess",
            Corpus::Savee => "savee",
            Corpus::Movieclips => "movieclips",
        }
    }

    /// Clip count of the complete corpus (speech-only for RAVDESS).
    pub fn expected_count(self) -> usize {
        match self {
            Corpus::Ravdess => 1440,
            Corpus::Cremad => 7442,
            Corpus::Tess => 2800,
            Corpus::Savee => 480,
            Corpus::Movieclips => 166,
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Corpus {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Corpus::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| DatasetError::MalformedCsv(format!("unknown corpus {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Original,
    Noise,
    Pitch,
}

impl SourceTag {
    /// Order of the variants produced by the augmentation expansion.
    pub const EXPANSION: [SourceTag; 3] = [SourceTag::Original, SourceTag::Noise, SourceTag::Pitch];

    pub fn name(self) -> &'static str {
        match self {
            SourceTag::Original => "original",
            SourceTag::Noise => "noise",
            SourceTag::Pitch => "pitch",
        }
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceTag {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::EXPANSION
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DatasetError::UnrecognizedPattern(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub corpus: Corpus,
    #[serde(rename = "emotion")]
    pub label: EmotionLabel,
    pub source_tag: SourceTag,
}

fn file_stem(name: &str) -> &str {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    base.strip_suffix(".wav").or_else(|| base.strip_suffix(".WAV")).unwrap_or(base)
}

fn unrecognized(name: &str) -> DatasetError {
    DatasetError::UnrecognizedPattern(name.to_string())
}

fn unknown_code(code: &str, name: &str) -> DatasetError {
    DatasetError::UnknownCode { code: code.to_string(), name: name.to_string() }
}

fn ravdess_fields(filename: &str) -> Result<Vec<&str>, DatasetError> {
    let fields: Vec<&str> = file_stem(filename).split('-').collect();
    let well_formed = fields.len() == 7 && fields.iter().all(|f| f.len() == 2 && f.bytes().all(|b| b.is_ascii_digit()));
    if well_formed {
        Ok(fields)
    } else {
        Err(unrecognized(filename))
    }
}

/// RAVDESS `MM-VV-EE-II-SS-RR-AA.wav`: the third field is the emotion.
/// Calm (02) folds into neutral.
pub fn parse_ravdess(filename: &str) -> Result<EmotionLabel, DatasetError> {
    let fields = ravdess_fields(filename)?;
    Ok(match fields[2] {
        "01" | "02" => EmotionLabel::Neutral,
        "03" => EmotionLabel::Happy,
        "04" => EmotionLabel::Sad,
        "05" => EmotionLabel::Angry,
        "06" => EmotionLabel::Fear,
        "07" => EmotionLabel::Disgust,
        "08" => EmotionLabel::Surprise,
        code => return Err(unknown_code(code, filename)),
    })
}

/// True for audio-only (modality 03) speech (vocal channel 01) files.
pub fn ravdess_is_speech(filename: &str) -> bool {
    ravdess_fields(filename).is_ok_and(|f| f[0] == "03" && f[1] == "01")
}

/// CREMA-D `ActorID_Sentence_EMO_Level.wav`.
pub fn parse_cremad(filename: &str) -> Result<EmotionLabel, DatasetError> {
    let tokens: Vec<&str> = file_stem(filename).split('_').collect();
    if tokens.len() != 4 {
        return Err(unrecognized(filename));
    }
    Ok(match tokens[2] {
        "ANG" => EmotionLabel::Angry,
        "DIS" => EmotionLabel::Disgust,
        "FEA" => EmotionLabel::Fear,
        "HAP" => EmotionLabel::Happy,
        "NEU" => EmotionLabel::Neutral,
        "SAD" => EmotionLabel::Sad,
        code => return Err(unknown_code(code, filename)),
    })
}

fn tess_code(token: &str, name: &str) -> Result<EmotionLabel, DatasetError> {
    match token.to_ascii_lowercase().as_str() {
        "angry" => Ok(EmotionLabel::Angry),
        "disgust" => Ok(EmotionLabel::Disgust),
        "fear" => Ok(EmotionLabel::Fear),
        "happy" => Ok(EmotionLabel::Happy),
        "neutral" => Ok(EmotionLabel::Neutral),
        "sad" => Ok(EmotionLabel::Sad),
        "ps" | "surprise" | "surprised" | "pleasant_surprise" | "pleasant_surprised" => Ok(EmotionLabel::Surprise),
        _ => Err(unknown_code(token, name)),
    }
}

/// TESS: the parent directory (`OAF_Fear`, `YAF_pleasant_surprised`)
/// names the emotion after its speaker prefix; without a directory the
/// last underscore token of the file name is used.
pub fn parse_tess(path: &str) -> Result<EmotionLabel, DatasetError> {
    let parts: Vec<&str> = path.split(['/', '\\']).filter(|p| !p.is_empty()).collect();
    if let [.., dir, _file] = parts.as_slice() {
        if let Some((prefix, emotion)) = dir.split_once('_') {
            if prefix.len() == 3 && prefix.chars().all(|c| c.is_ascii_alphabetic()) {
                return tess_code(emotion, path);
            }
        }
    }
    let stem = file_stem(path);
    let tokens: Vec<&str> = stem.split('_').collect();
    if tokens.len() < 3 {
        return Err(unrecognized(path));
    }
    tess_code(tokens[tokens.len() - 1], path)
}

/// SAVEE `[SPK_]<code><nn>.wav` with codes a, d, f, h, n, sa, su.
pub fn parse_savee(filename: &str) -> Result<EmotionLabel, DatasetError> {
    let stem = file_stem(filename);
    let body = match stem.split_once('_') {
        Some((speaker, rest)) if !speaker.is_empty() => rest,
        Some(_) => return Err(unrecognized(filename)),
        None => stem,
    };
    let letters: String = body.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let digits = &body[letters.len()..];
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(unrecognized(filename));
    }
    Ok(match letters.as_str() {
        "a" => EmotionLabel::Angry,
        "d" => EmotionLabel::Disgust,
        "f" => EmotionLabel::Fear,
        "h" => EmotionLabel::Happy,
        "n" => EmotionLabel::Neutral,
        "sa" => EmotionLabel::Sad,
        "su" => EmotionLabel::Surprise,
        code => return Err(unknown_code(code, filename)),
    })
}

#[derive(Debug, Deserialize)]
struct MovieclipRow {
    path: String,
    emotion: String,
}

/// Reads a `path,emotion` manifest. Relative paths resolve against the
/// manifest's directory and must exist.
pub fn load_movieclips(manifest_csv: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    if !manifest_csv.is_file() {
        return Err(DatasetError::MissingFile(manifest_csv.to_path_buf()));
    }
    let base = manifest_csv.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(manifest_csv)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "emotion"] {
        return Err(DatasetError::MalformedCsv(format!(
            "expected header `path,emotion`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let row: MovieclipRow = row?;
        let label: EmotionLabel = row.emotion.parse()?;
        let path = base.join(&row.path);
        if !path.is_file() {
            return Err(DatasetError::MissingFile(path));
        }
        entries.push(ManifestEntry { path, corpus: Corpus::Movieclips, label, source_tag: SourceTag::Original });
    }
    Ok(entries)
}

fn wav_files(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::MissingFile(root.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| DatasetError::Io(e.into()))?;
        let is_wav = entry
            .path()
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
        if entry.file_type().is_file() && is_wav {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

/// Scans a corpus directory tree. Files whose names do not follow the
/// corpus convention are returned separately so callers can report them.
pub fn scan_corpus(corpus: Corpus, root: &Path) -> Result<(Vec<ManifestEntry>, Vec<PathBuf>), DatasetError> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for path in wav_files(root)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let parsed = match corpus {
            Corpus::Ravdess => {
                if !ravdess_is_speech(name) {
                    skipped.push(path);
                    continue;
                }
                parse_ravdess(name)
            }
            Corpus::Cremad => parse_cremad(name),
            Corpus::Tess => {
                let rel = path.strip_prefix(root).unwrap_or(&path);
                parse_tess(&rel.to_string_lossy())
            }
            Corpus::Savee => parse_savee(name),
            Corpus::Movieclips => {
                return Err(DatasetError::MalformedCsv("movie clips are loaded from a manifest".into()))
            }
        };
        match parsed {
            Ok(label) => entries.push(ManifestEntry { path, corpus, label, source_tag: SourceTag::Original }),
            Err(_) => skipped.push(path),
        }
    }
    Ok((entries, skipped))
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_path(path)?;
    for entry in entries {
        writer.serialize(entry)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(DatasetError::from)).collect()
}

/// Per-label counts in code order.
pub fn label_counts<'a>(labels: impl IntoIterator<Item = &'a EmotionLabel>) -> [usize; NUM_EMOTIONS] {
    let mut counts = [0; NUM_EMOTIONS];
    for l in labels {
        counts[l.code()] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn test_count(n: usize, test_fraction: f64) -> usize {
    ((test_fraction * n as f64).round() as usize).min(n)
}

/// Fisher-Yates shuffle of `0..n` under `SplitMix64(seed)`; the last
/// `round(test_fraction * n)` shuffled indices form the test set.
pub fn split(n_rows: usize, test_fraction: f64, seed: u64, shuffle: bool) -> Result<SplitResult, DatasetError> {
    if n_rows < 2 {
        return Err(DatasetError::TooFewRows(n_rows));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    if shuffle {
        SplitMix64::new(seed).shuffle(&mut order);
    }
    let cut = n_rows - test_count(n_rows, test_fraction);
    let test_indices = order.split_off(cut);
    Ok(SplitResult { train_indices: order, test_indices })
}

/// Splits whole groups (e.g. all variants of one clip) so no group
/// straddles train and test. `groups[i]` is the group id of row `i`.
pub fn split_by_group(groups: &[usize], test_fraction: f64, seed: u64) -> Result<SplitResult, DatasetError> {
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(DatasetError::TooFewRows(ids.len()));
    }
    let group_split = split(ids.len(), test_fraction, seed, true)?;
    let mut in_test = std::collections::HashSet::new();
    for &g in &group_split.test_indices {
        in_test.insert(ids[g]);
    }
    let (test_indices, train_indices) = (0..groups.len()).partition(|&i| in_test.contains(&groups[i]));
    Ok(SplitResult { train_indices, test_indices })
}

const STD_FLOOR: f64 = 1e-8;

/// Column means and standard deviations of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(train_rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let first = train_rows.first().ok_or(DatasetError::EmptyTrainSet)?;
        let dim = first.len();
        let n = train_rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in train_rows {
            if row.len() != dim {
                return Err(DatasetError::MalformedCsv(format!("row of {} values, expected {dim}", row.len())));
            }
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in train_rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }
}

/// Fits on `train_rows` and standardizes every row of `all_rows` with the
/// training constants.
pub fn standardize(
    train_rows: &[Vec<f64>],
    all_rows: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Standardization), DatasetError> {
    let stats = Standardization::fit(train_rows)?;
    let out = all_rows.iter().map(|r| stats.apply(r)).collect();
    Ok((out, stats))
}
