//! Confusion matrices, per-class and macro accuracy, merged-class metrics and
//! JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{preds} predictions but {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("class '{0}' has no examples")]
    EmptyRow(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("mapping does not cover class '{0}'")]
    IncompleteMapping(String),
    #[error("invalid merge spec '{0}'")]
    BadMergeSpec(String),
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

pub fn confusion(
    preds: &[usize],
    labels: &[usize],
    classes: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    let c = classes.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&p, &t) in preds.iter().zip(labels) {
        for index in [p, t] {
            if index >= c {
                return Err(EvalError::IndexOutOfRange { index, classes: c });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert_eq!(counts.len(), classes.len());
        assert!(counts.iter().all(|r| r.len() == classes.len()));
        Self { classes, counts }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Recall per class, `counts[c][c] / rowsum[c]`.
    pub fn per_class_accuracy(&self) -> Result<Vec<f64>, EvalError> {
        (0..self.classes.len())
            .map(|c| {
                let n = self.row_sum(c);
                if n == 0 {
                    Err(EvalError::EmptyRow(self.classes[c].clone()))
                } else {
                    Ok(self.counts[c][c] as f64 / n as f64)
                }
            })
            .collect()
    }

    /// Macro accuracy: the unweighted mean of per-class recalls.
    pub fn overall_accuracy(&self) -> Result<f64, EvalError> {
        if self.total() == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let per = self.per_class_accuracy()?;
        Ok(per.iter().sum::<f64>() / per.len() as f64)
    }

    /// Sample-weighted accuracy: trace over total.
    pub fn micro_accuracy(&self) -> Result<f64, EvalError> {
        let total = self.total();
        if total == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let trace: u64 = (0..self.classes.len()).map(|c| self.counts[c][c]).sum();
        Ok(trace as f64 / total as f64)
    }

    /// Header row of predicted class names, then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Old class name → new class name. Must cover every class of the matrix.
pub type ClassMapping = BTreeMap<String, String>;

/// Sum rows and columns through `mapping`. New classes appear in order of
/// their first source class.
pub fn merge_classes(
    cm: &ConfusionMatrix,
    mapping: &ClassMapping,
) -> Result<ConfusionMatrix, EvalError> {
    let mut merged: Vec<String> = Vec::new();
    let mut target = Vec::with_capacity(cm.classes.len());
    for c in &cm.classes {
        let new = mapping
            .get(c)
            .ok_or_else(|| EvalError::IncompleteMapping(c.clone()))?;
        let idx = match merged.iter().position(|m| m == new) {
            Some(i) => i,
            None => {
                merged.push(new.clone());
                merged.len() - 1
            }
        };
        target.push(idx);
    }
    let mut counts = vec![vec![0u64; merged.len()]; merged.len()];
    for (t, row) in cm.counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            counts[target[t]][target[p]] += n;
        }
    }
    Ok(ConfusionMatrix {
        classes: merged,
        counts,
    })
}

/// Groups like `hand,forearm,upper_arm=body`, several joined by `;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeSpec {
    pub groups: Vec<(Vec<String>, String)>,
}

impl std::str::FromStr for MergeSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::BadMergeSpec(s.to_string());
        let mut groups = Vec::new();
        for part in s.split(';').filter(|p| !p.trim().is_empty()) {
            let (sources, target) = part.split_once('=').ok_or_else(bad)?;
            let target = target.trim();
            let sources: Vec<String> = sources
                .split(',')
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect();
            if target.is_empty() || sources.is_empty() {
                return Err(bad());
            }
            groups.push((sources, target.to_string()));
        }
        if groups.is_empty() {
            return Err(bad());
        }
        Ok(Self { groups })
    }
}

impl MergeSpec {
    /// The standard hit-location merge: hand, forearm and upper arm → body.
    pub fn body() -> Self {
        Self {
            groups: vec![(
                vec!["hand".into(), "forearm".into(), "upper_arm".into()],
                "body".into(),
            )],
        }
    }

    /// Total mapping over `classes`; unlisted classes map to themselves.
    pub fn mapping_for(&self, classes: &[String]) -> Result<ClassMapping, EvalError> {
        let mut mapping: ClassMapping = classes.iter().map(|c| (c.clone(), c.clone())).collect();
        for (sources, target) in &self.groups {
            for s in sources {
                if !classes.contains(s) {
                    return Err(EvalError::BadMergeSpec(format!("unknown class '{s}'")));
                }
                mapping.insert(s.clone(), target.clone());
            }
        }
        Ok(mapping)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetrics {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
    /// `null` for classes without examples.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub macro_accuracy: Option<f64>,
    pub micro_accuracy: Option<f64>,
}

impl From<&ConfusionMatrix> for MatrixMetrics {
    fn from(cm: &ConfusionMatrix) -> Self {
        let per_class_accuracy = (0..cm.classes.len())
            .map(|c| {
                let n = cm.row_sum(c);
                (n > 0).then(|| cm.counts[c][c] as f64 / n as f64)
            })
            .collect();
        Self {
            classes: cm.classes.clone(),
            counts: cm.counts.clone(),
            total: cm.total(),
            per_class_accuracy,
            macro_accuracy: cm.overall_accuracy().ok(),
            micro_accuracy: cm.micro_accuracy().ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedMetrics {
    pub mapping: ClassMapping,
    #[serde(flatten)]
    pub metrics: MatrixMetrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Which data the matrix was computed on, e.g. `test`.
    pub split: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: RunMetadata,
    #[serde(flatten)]
    pub raw: MatrixMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged: Option<MergedMetrics>,
    pub generated_at_unix: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn report(
    cm: &ConfusionMatrix,
    metadata: RunMetadata,
    mapping: Option<&ClassMapping>,
) -> Result<Report, EvalError> {
    let merged = mapping
        .map(|m| {
            Ok::<_, EvalError>(MergedMetrics {
                mapping: m.clone(),
                metrics: MatrixMetrics::from(&merge_classes(cm, m)?),
            })
        })
        .transpose()?;
    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(Report {
        metadata,
        raw: MatrixMetrics::from(cm),
        merged,
        generated_at_unix,
    })
}
