use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MetricsError;

/// CheXbert output classes in labeler order.
pub const CHEXBERT14: [&str; 14] = [
    "enlarged cardiomediastinum",
    "cardiomegaly",
    "lung opacity",
    "lung lesion",
    "edema",
    "consolidation",
    "pneumonia",
    "atelectasis",
    "pneumothorax",
    "pleural effusion",
    "pleural other",
    "fracture",
    "support devices",
    "no finding",
];

/// The five-finding subset, in reporting order.
pub const TOP5: [&str; 5] = [
    "atelectasis",
    "cardiomegaly",
    "consolidation",
    "edema",
    "pleural effusion",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelSet {
    Chexbert14,
    Top5,
}

impl LabelSet {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            LabelSet::Chexbert14 => &CHEXBERT14,
            LabelSet::Top5 => &TOP5,
        }
    }

    pub fn arity(self) -> usize {
        self.names().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSet::Chexbert14 => "chexbert14",
            LabelSet::Top5 => "top5",
        }
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSet {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chexbert14" => Ok(LabelSet::Chexbert14),
            "top5" => Ok(LabelSet::Top5),
            other => Err(MetricsError::UnknownLabelSet(other.to_string())),
        }
    }
}

impl Serialize for LabelSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    pub id: String,
    pub labels: Vec<bool>,
    pub label_set: LabelSet,
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    id: String,
    labels: Vec<i64>,
    label_set: LabelSet,
}

impl Serialize for LabelVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LabelLine {
            id: self.id.clone(),
            labels: self.labels.iter().map(|&b| b as i64).collect(),
            label_set: self.label_set,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let line = LabelLine::deserialize(d)?;
        LabelVector::from_ints(line.id, &line.labels, line.label_set).map_err(serde::de::Error::custom)
    }
}

impl LabelVector {
    pub fn new(id: impl Into<String>, labels: Vec<bool>, label_set: LabelSet) -> Result<Self, MetricsError> {
        let v = Self {
            id: id.into(),
            labels,
            label_set,
        };
        v.check_arity()?;
        Ok(v)
    }

    pub fn from_ints(id: impl Into<String>, labels: &[i64], label_set: LabelSet) -> Result<Self, MetricsError> {
        let id = id.into();
        let labels = labels
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                value => Err(MetricsError::LabelValue { id: id.clone(), value }),
            })
            .collect::<Result<_, _>>()?;
        Self::new(id, labels, label_set)
    }

    fn check_arity(&self) -> Result<(), MetricsError> {
        if self.labels.len() != self.label_set.arity() {
            return Err(MetricsError::Arity {
                id: self.id.clone(),
                set: self.label_set,
                expected: self.label_set.arity(),
                found: self.labels.len(),
            });
        }
        Ok(())
    }

    /// Restricts a 14-class vector to the five-finding subset.
    pub fn to_top5(&self) -> Self {
        match self.label_set {
            LabelSet::Top5 => self.clone(),
            LabelSet::Chexbert14 => Self {
                id: self.id.clone(),
                labels: TOP5
                    .iter()
                    .map(|name| {
                        let i = CHEXBERT14.iter().position(|n| n == name).expect("subset of chexbert14");
                        self.labels[i]
                    })
                    .collect(),
                label_set: LabelSet::Top5,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F1Mode {
    Micro,
    Macro,
}

#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Confusion {
    // 0 when the class never occurs in either batch
    fn f1(self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Micro (pooled counts) or macro (unweighted per-class mean) F1.
/// Predictions are paired with references by id.
pub fn f1_labels(predictions: &[LabelVector], references: &[LabelVector], mode: F1Mode) -> Result<f64, MetricsError> {
    if predictions.is_empty() || references.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let set = references[0].label_set;
    let mut by_id: HashMap<&str, &LabelVector> = HashMap::new();
    for r in references {
        check(r, set)?;
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(MetricsError::DuplicateId(r.id.clone()));
        }
    }
    if predictions.len() != references.len() {
        let missing = predictions
            .iter()
            .find(|p| !by_id.contains_key(p.id.as_str()))
            .map(|p| p.id.clone())
            .or_else(|| {
                let pred_ids: std::collections::HashSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
                references
                    .iter()
                    .find(|r| !pred_ids.contains(r.id.as_str()))
                    .map(|r| r.id.clone())
            })
            .unwrap_or_default();
        return Err(MetricsError::IdMismatch(missing));
    }

    let mut seen = std::collections::HashSet::new();
    let mut pred_rows = Vec::with_capacity(predictions.len());
    let mut ref_rows = Vec::with_capacity(predictions.len());
    for p in predictions {
        check(p, set)?;
        if !seen.insert(p.id.as_str()) {
            return Err(MetricsError::DuplicateId(p.id.clone()));
        }
        let r = by_id
            .get(p.id.as_str())
            .ok_or_else(|| MetricsError::IdMismatch(p.id.clone()))?;
        pred_rows.push(p.labels.as_slice());
        ref_rows.push(r.labels.as_slice());
    }
    f1_matrix(&pred_rows, &ref_rows, mode)
}

/// F1 over row-aligned binary label matrices of any arity.
pub fn f1_matrix<R: AsRef<[bool]>>(predictions: &[R], references: &[R], mode: F1Mode) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    if predictions.len() != references.len() {
        return Err(MetricsError::IdMismatch(format!(
            "row {}",
            predictions.len().min(references.len())
        )));
    }
    let arity = predictions[0].as_ref().len();
    let mut per_class = vec![Confusion::default(); arity];
    for (i, (p, r)) in predictions.iter().zip(references).enumerate() {
        let (p, r) = (p.as_ref(), r.as_ref());
        if p.len() != arity || r.len() != arity {
            return Err(MetricsError::Arity {
                id: format!("row {i}"),
                set: LabelSet::Chexbert14,
                expected: arity,
                found: if p.len() != arity { p.len() } else { r.len() },
            });
        }
        for (c, (&pl, &rl)) in per_class.iter_mut().zip(p.iter().zip(r)) {
            match (pl, rl) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }

    Ok(match mode {
        F1Mode::Micro => {
            let pooled = per_class.iter().fold(Confusion::default(), |acc, c| Confusion {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            });
            pooled.f1()
        }
        F1Mode::Macro => per_class.iter().map(|c| c.f1()).sum::<f64>() / per_class.len().max(1) as f64,
    })
}

fn check(v: &LabelVector, set: LabelSet) -> Result<(), MetricsError> {
    if v.label_set != set {
        return Err(MetricsError::LabelSetMismatch {
            id: v.id.clone(),
            expected: set,
            found: v.label_set,
        });
    }
    v.check_arity()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Two-class fixtures use the arity check bypass below.
    fn lv(id: &str, labels: &[bool]) -> LabelVector {
        LabelVector {
            id: id.into(),
            labels: labels.to_vec(),
            label_set: LabelSet::Top5,
        }
    }

    fn pad(labels: &[bool]) -> Vec<bool> {
        let mut v = labels.to_vec();
        v.resize(5, false);
        v
    }

    #[test]
    fn two_class_hand_fixture() {
        // class 1: TP=1 FP=1 FN=0 -> 2/3; class 2: TP=1 FP=0 FN=1 -> 2/3
        let preds = [vec![true, false], vec![true, true]];
        let refs = [vec![true, true], vec![false, true]];
        let micro = f1_matrix(&preds, &refs, F1Mode::Micro).unwrap();
        let macro_ = f1_matrix(&preds, &refs, F1Mode::Macro).unwrap();
        assert!((micro - 2.0 / 3.0).abs() < 1e-12);
        assert!((macro_ - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_micro_equals_class_f1() {
        let preds = [vec![true], vec![true], vec![false]];
        let refs = [vec![true], vec![false], vec![true]];
        let micro = f1_matrix(&preds, &refs, F1Mode::Micro).unwrap();
        let macro_ = f1_matrix(&preds, &refs, F1Mode::Macro).unwrap();
        assert_eq!(micro, macro_);
        assert_eq!(micro, 0.5);
    }

    #[test]
    fn padded_hand_fixture() {
        // class 1: TP=1 FP=1 FN=0; class 2: TP=1 FP=0 FN=1; classes 3-5 empty.
        // Only the first two classes are occupied, so compare macro over them.
        let preds = [lv("a", &pad(&[true, false])), lv("b", &pad(&[true, true]))];
        let refs = [lv("a", &pad(&[true, true])), lv("b", &pad(&[false, true]))];
        let micro = f1_labels(&preds, &refs, F1Mode::Micro).unwrap();
        assert!((micro - 2.0 / 3.0).abs() < 1e-12);
        let macro_ = f1_labels(&preds, &refs, F1Mode::Macro).unwrap();
        // (2/3 + 2/3 + 0 + 0 + 0) / 5 under the zero-support convention
        assert!((macro_ - (4.0 / 3.0) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_one() {
        let rows = [
            lv("a", &[true, false, true, false, true]),
            lv("b", &[false, true, false, true, false]),
        ];
        assert_eq!(f1_labels(&rows, &rows, F1Mode::Micro).unwrap(), 1.0);
        assert_eq!(f1_labels(&rows, &rows, F1Mode::Macro).unwrap(), 1.0);
    }

    #[test]
    fn pairing_is_by_id() {
        let preds = [lv("b", &pad(&[true])), lv("a", &pad(&[false]))];
        let refs = [lv("a", &pad(&[false])), lv("b", &pad(&[true]))];
        assert_eq!(f1_labels(&preds, &refs, F1Mode::Micro).unwrap(), 1.0);
    }

    #[test]
    fn error_cases() {
        let a = lv("a", &pad(&[true]));
        assert_eq!(f1_labels(&[], &[], F1Mode::Micro), Err(MetricsError::EmptyBatch));
        assert_eq!(
            f1_labels(&[lv("x", &pad(&[true]))], std::slice::from_ref(&a), F1Mode::Micro),
            Err(MetricsError::IdMismatch("x".into()))
        );
        let short = lv("a", &[true]);
        assert!(matches!(
            f1_labels(&[short], std::slice::from_ref(&a), F1Mode::Micro),
            Err(MetricsError::Arity { .. })
        ));
        let other = LabelVector {
            id: "a".into(),
            labels: vec![false; 14],
            label_set: LabelSet::Chexbert14,
        };
        assert!(matches!(
            f1_labels(&[other], &[a], F1Mode::Micro),
            Err(MetricsError::LabelSetMismatch { .. })
        ));
    }

    #[test]
    fn jsonl_line_parsing() {
        let v: LabelVector = serde_json::from_str(r#"{"id":"x","labels":[1,0,0,1,0],"label_set":"top5"}"#).unwrap();
        assert_eq!(v.labels, [true, false, false, true, false]);
        assert!(serde_json::from_str::<LabelVector>(r#"{"id":"x","labels":[2,0,0,1,0],"label_set":"top5"}"#).is_err());
        assert!(serde_json::from_str::<LabelVector>(r#"{"id":"x","labels":[1],"label_set":"chexbert14"}"#).is_err());
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"id":"x","labels":[1,0,0,1,0],"label_set":"top5"}"#
        );
    }

    #[test]
    fn projection_to_top5() {
        let mut labels = vec![false; 14];
        labels[1] = true; // cardiomegaly
        labels[9] = true; // pleural effusion
        labels[6] = true; // pneumonia, dropped
        let v = LabelVector::new("a", labels, LabelSet::Chexbert14).unwrap();
        assert_eq!(v.to_top5().labels, [false, true, false, false, true]);
    }
}
