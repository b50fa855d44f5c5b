use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, SplitRatio, TrainError};
use crate::audio::{read_wav_file, write_wav_file, AudioClip, CorpusSpec};
use crate::dsp::FrontEnd;
use crate::nn::Tensor;

/// Canonical class order for the recorded-corpus label sets.
pub const CANONICAL_CLASSES: [&str; 6] = ["hand", "forearm", "upper_arm", "sword", "silence", "other"];
const BACKGROUND: [&str; 2] = ["silence", "other"];

/// Ordered class names plus the subset that never counts as a hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    classes: Vec<String>,
    background: Vec<String>,
}

impl LabelSet {
    pub fn new(classes: Vec<String>, background: Vec<String>) -> Result<Self, TrainError> {
        let bad = |m: String| Err(TrainError::InvalidLabels(m));
        if classes.len() < 2 {
            return bad(format!("need at least two classes, got {}", classes.len()));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return bad(format!("duplicate class '{c}'"));
            }
        }
        for b in &background {
            if !classes.contains(b) {
                return bad(format!("background class '{b}' is not a class"));
            }
        }
        for b in BACKGROUND {
            if classes.iter().any(|c| c == b) && !background.iter().any(|x| x == b) {
                return bad(format!("'{b}' must be a background class"));
            }
        }
        Ok(Self {
            classes,
            background,
        })
    }

    /// hand, forearm, upper_arm, sword, silence, other.
    pub fn six_class() -> Self {
        Self::from_names(CANONICAL_CLASSES)
    }

    /// The six-class set without sword.
    pub fn five_class() -> Self {
        Self::from_names(CANONICAL_CLASSES.into_iter().filter(|&c| c != "sword"))
    }

    fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let classes: Vec<String> = names.into_iter().map(String::from).collect();
        let background = BACKGROUND
            .iter()
            .filter(|b| classes.iter().any(|c| c == *b))
            .map(|b| b.to_string())
            .collect();
        Self {
            classes,
            background,
        }
    }

    /// Label set for an arbitrary collection of names: canonical names in
    /// canonical order, then any others alphabetically.
    pub fn infer<I, S>(labels: I) -> Result<Self, TrainError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen: Vec<String> = Vec::new();
        for l in labels {
            let l = l.as_ref();
            if !seen.iter().any(|s| s == l) {
                seen.push(l.to_string());
            }
        }
        let mut classes: Vec<String> = CANONICAL_CLASSES
            .iter()
            .filter(|c| seen.iter().any(|s| s == *c))
            .map(|c| c.to_string())
            .collect();
        let mut rest: Vec<String> = seen
            .into_iter()
            .filter(|s| !CANONICAL_CLASSES.contains(&s.as_str()))
            .collect();
        rest.sort();
        classes.extend(rest);
        let set = Self::from_names(classes.iter().map(String::as_str));
        Self::new(set.classes, set.background)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn background(&self) -> &[String] {
        &self.background
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn is_background(&self, index: usize) -> bool {
        self.background.contains(&self.classes[index])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    #[default]
    Lab,
    Outdoor,
    JudoHall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clothing {
    #[default]
    Plain,
    Tshirt,
    Hoodie,
}

impl Location {
    pub const ALL: [Location; 3] = [Location::Lab, Location::Outdoor, Location::JudoHall];
}

impl Clothing {
    pub const ALL: [Clothing; 3] = [Clothing::Plain, Clothing::Tshirt, Clothing::Hoodie];
}

/// One line of a JSON Lines manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
    #[serde(default)]
    pub location: Location,
    #[serde(default)]
    pub clothing: Clothing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub label_set: LabelSet,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, label_set: LabelSet) -> Result<Self, TrainError> {
        for (i, e) in entries.iter().enumerate() {
            if label_set.index_of(&e.label).is_none() {
                return Err(TrainError::Manifest {
                    line: i + 1,
                    message: format!("label '{}' is not in the label set", e.label),
                });
            }
        }
        Ok(Self { entries, label_set })
    }

    /// Parse JSON Lines. Blank lines are skipped. Without an explicit label
    /// set one is inferred from the labels present.
    pub fn parse_jsonl(text: &str, label_set: Option<LabelSet>) -> Result<Self, TrainError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(line).map_err(|e| TrainError::Manifest {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            entries.push(entry);
        }
        let label_set = match label_set {
            Some(l) => l,
            None => LabelSet::infer(entries.iter().map(|e| e.label.as_str()))?,
        };
        Self::new(entries, label_set)
    }

    /// Load a manifest file; relative entry paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>, label_set: Option<LabelSet>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut m = Self::parse_jsonl(&text, label_set)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        Ok(m)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Examples per class, in label-set order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        self.label_set
            .classes()
            .iter()
            .map(|c| (c.clone(), self.entries.iter().filter(|e| &e.label == c).count()))
            .collect()
    }

    fn subset(&self, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self {
            entries: indices.into_iter().map(|i| self.entries[i].clone()).collect(),
            label_set: self.label_set.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
}

fn class_seed(seed: u64, class: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(class.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Stratified split. Per class of size n: ⌊n·a/s⌋ train, ⌊n·b/s⌋ val, the rest
/// test, after a shuffle keyed by `(seed, class name)`. Each part keeps
/// manifest order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratio: SplitRatio,
    seed: u64,
) -> Result<Split, TrainError> {
    let labels: Vec<&str> = manifest.entries.iter().map(|e| e.label.as_str()).collect();
    let [train, val, test] = split_indices(&labels, manifest.label_set.classes(), ratio, seed)?;
    Ok(Split {
        train: manifest.subset(train),
        val: manifest.subset(val),
        test: manifest.subset(test),
    })
}

/// [`split_dataset`] for in-memory features; identical membership rule.
pub fn split_features(
    set: &FeatureSet,
    ratio: SplitRatio,
    seed: u64,
) -> Result<[FeatureSet; 3], TrainError> {
    let labels: Vec<&str> = set.labels.iter().map(|&l| set.label_set.name(l)).collect();
    let parts = split_indices(&labels, set.label_set.classes(), ratio, seed)?;
    Ok(parts.map(|idx| FeatureSet {
        inputs: idx.iter().map(|&i| set.inputs[i].clone()).collect(),
        labels: idx.iter().map(|&i| set.labels[i]).collect(),
        label_set: set.label_set.clone(),
    }))
}

fn split_indices(
    labels: &[&str],
    classes: &[String],
    ratio: SplitRatio,
    seed: u64,
) -> Result<[Vec<usize>; 3], TrainError> {
    let parts = ratio.total() as usize;
    if ratio.train == 0 || ratio.val == 0 || ratio.test == 0 {
        return Err(TrainError::InvalidConfig("split parts must be positive".into()));
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class.as_str())
            .map(|(i, _)| i)
            .collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < parts {
            return Err(TrainError::ClassTooSmall {
                class: class.clone(),
                count: n,
                min: parts,
            });
        }
        members.shuffle(&mut ChaCha8Rng::seed_from_u64(class_seed(seed, class)));
        let n_train = n * ratio.train as usize / parts;
        let n_val = n * ratio.val as usize / parts;
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok([train, val, test])
}

/// Model-ready examples: one `T×F×1` tensor and class index per clip.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub label_set: LabelSet,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Crop or zero-pad to exactly one classification window.
pub fn fit_window(clip: AudioClip, samples: usize) -> AudioClip {
    if clip.len() == samples {
        return clip;
    }
    let rate = clip.sample_rate();
    let channels = clip
        .into_channels()
        .into_iter()
        .map(|mut ch| {
            ch.resize(samples, 0.0);
            ch
        })
        .collect();
    AudioClip::new(rate, channels).expect("resized channels stay valid")
}

fn features_of(clip: AudioClip, frontend: &FrontEnd) -> Result<Tensor, TrainError> {
    let clip = fit_window(clip, frontend.clip_samples());
    Ok(Tensor::from(frontend.features(&clip)?))
}

/// Featurize in-memory labelled clips (in parallel, order preserved).
pub fn featurize_clips(
    clips: Vec<(AudioClip, String)>,
    frontend: &FrontEnd,
    label_set: &LabelSet,
) -> Result<FeatureSet, TrainError> {
    let labels = clips
        .iter()
        .map(|(_, l)| {
            label_set.index_of(l).ok_or_else(|| {
                TrainError::InvalidLabels(format!("label '{l}' is not in the label set"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let inputs = clips
        .into_par_iter()
        .map(|(clip, _)| features_of(clip, frontend))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureSet {
        inputs,
        labels,
        label_set: label_set.clone(),
    })
}

/// Read and featurize every file in a manifest.
pub fn featurize_manifest(
    manifest: &DatasetManifest,
    frontend: &FrontEnd,
) -> Result<FeatureSet, TrainError> {
    let inputs = manifest
        .entries
        .par_iter()
        .map(|e| {
            let clip = read_wav_file(&e.path).map_err(|source| TrainError::Clip {
                path: e.path.display().to_string(),
                source,
            })?;
            features_of(clip, frontend)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = manifest
        .entries
        .iter()
        .map(|e| manifest.label_set.index_of(&e.label).expect("validated label"))
        .collect();
    Ok(FeatureSet {
        inputs,
        labels,
        label_set: manifest.label_set.clone(),
    })
}

/// Render a synthetic corpus straight to features, skipping the filesystem.
/// Returns features in [`CorpusSpec::coordinates`] order.
pub fn synthesize_features(
    spec: &CorpusSpec,
    frontend: &FrontEnd,
) -> Result<FeatureSet, TrainError> {
    let label_set = LabelSet::infer(spec.class_names())?;
    let coords = spec.coordinates();
    let rendered = coords
        .par_iter()
        .map(|&(k, i)| {
            let g = spec.render(k, i)?;
            Ok((g.label.clone(), features_of(g.clip, frontend)?))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut inputs = Vec::with_capacity(rendered.len());
    let mut labels = Vec::with_capacity(rendered.len());
    for (label, x) in rendered {
        labels.push(label_set.index_of(&label).expect("inferred from these names"));
        inputs.push(x);
    }
    Ok(FeatureSet {
        inputs,
        labels,
        label_set,
    })
}

/// Write every clip of a synthetic corpus as `<dir>/<label>/<label>_NNNNN.wav`
/// plus `<dir>/manifest.jsonl`. Recording conditions cycle through the
/// location × clothing grid.
pub fn materialize_corpus(
    spec: &CorpusSpec,
    dir: impl AsRef<Path>,
) -> Result<DatasetManifest, TrainError> {
    let dir = dir.as_ref();
    let label_set = LabelSet::infer(spec.class_names())?;
    for name in spec.class_names() {
        let sub = dir.join(&name);
        std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
    }
    let entries = spec
        .coordinates()
        .par_iter()
        .map(|&(k, i)| {
            let g = spec.render(k, i)?;
            let rel = PathBuf::from(&g.label).join(format!("{}_{:05}.wav", g.label, i));
            let full = dir.join(&rel);
            write_wav_file(&full, &g.clip)?;
            Ok(ManifestEntry {
                path: rel,
                label: g.label,
                location: Location::ALL[i % 3],
                clothing: Clothing::ALL[(i / 3) % 3],
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let manifest = DatasetManifest::new(entries, label_set)?;
    manifest.save(dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
