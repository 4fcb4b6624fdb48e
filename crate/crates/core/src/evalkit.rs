//! Challenge scoring: weighted piece-wise accuracy, score ensembling,
//! submission files, and validation reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{Label, PairManifest, Split, Subtask};
use crate::error::{Error, Result};

pub const SCORE_COLUMNS: &str = "pair_id,model_id,score";
pub const REPORT_COLUMNS: &str = "model_id,subtask,split,count,accuracy,loss";
/// Probability clamp used by the cross-entropy loss.
pub const LOSS_EPS: f64 = 1e-7;

/// Subtask weights of the challenge metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    w: [f64; 3],
}

impl Default for Weights {
    fn default() -> Self {
        Self { w: [0.1, 0.3, 0.6] }
    }
}

impl Weights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let w = [w1, w2, w3];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("weights must be finite and non-negative, got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self { w })
    }

    pub fn values(&self) -> [f64; 3] {
        self.w
    }
}

/// `w1 * acc1 + w2 * acc2 + w3 * acc3`.
pub fn weighted_accuracy(acc: [f64; 3], weights: &Weights) -> Result<f64> {
    if let Some(a) = acc.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidParameter(format!("accuracy {a} outside [0, 1]")));
    }
    let w = weights.w;
    Ok((w[0] * acc[0] + w[1] * acc[1] + w[2] * acc[2]).clamp(0.0, 1.0))
}

/// How an averaged score of exactly 0.5 is rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    HalfUp,
    HalfDown,
}

impl std::str::FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-up" => Ok(TieRule::HalfUp),
            "half-down" => Ok(TieRule::HalfDown),
            _ => Err(Error::InvalidParameter(format!("tie rule must be half-up or half-down, got `{s}`"))),
        }
    }
}

impl TieRule {
    pub fn decide(self, score: f64) -> u8 {
        match self {
            TieRule::HalfUp => u8::from(score >= 0.5),
            TieRule::HalfDown => u8::from(score > 0.5),
        }
    }
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub pair_id: u64,
    pub model_id: String,
    pub score: f64,
}

fn check_score(score: f64) -> Result<f64> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::InvalidParameter(format!("score {score} outside [0, 1]")))
    }
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == SCORE_COLUMNS => {}
        _ => {
            return Err(Error::Submission {
                line: 1,
                reason: format!("score file must start with `{SCORE_COLUMNS}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |reason: String| Error::Submission { line: i + 1, reason };
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            let [id, model, score] = fields[..] else {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            };
            if model.is_empty() {
                return Err(bad("empty model id".into()));
            }
            let score: f64 = score.parse().map_err(|_| bad(format!("`{score}` is not a number")))?;
            Ok(ScoreRow {
                pair_id: id.parse().map_err(|_| bad(format!("`{id}` is not a pair id")))?,
                model_id: model.to_string(),
                score: check_score(score).map_err(|e| bad(e.to_string()))?,
            })
        })
        .collect()
}

pub fn scores_to_csv(rows: &[ScoreRow]) -> String {
    let mut out = format!("{SCORE_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.pair_id, r.model_id, r.score);
    }
    out
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    parse_scores(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Pairs by models. Rows are sorted by pair id, columns keep first-seen
/// model order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pair_ids: Vec<u64>,
    models: Vec<String>,
    scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(pair_ids: Vec<u64>, models: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.len() != pair_ids.len() {
            return Err(Error::DimensionMismatch(format!("{} score rows for {} pairs", scores.len(), pair_ids.len())));
        }
        if pair_ids.iter().collect::<BTreeSet<_>>().len() != pair_ids.len() {
            return Err(Error::InvalidParameter("duplicate pair id".into()));
        }
        if models.iter().collect::<BTreeSet<_>>().len() != models.len() {
            return Err(Error::InvalidParameter("duplicate model id".into()));
        }
        for row in &scores {
            if row.len() != models.len() {
                return Err(Error::DimensionMismatch(format!("score row has {} entries for {} models", row.len(), models.len())));
            }
            for &s in row {
                check_score(s)?;
            }
        }
        let mut order: Vec<usize> = (0..pair_ids.len()).collect();
        order.sort_by_key(|&i| pair_ids[i]);
        Ok(Self {
            pair_ids: order.iter().map(|&i| pair_ids[i]).collect(),
            scores: order.iter().map(|&i| scores[i].clone()).collect(),
            models,
        })
    }

    /// Every model must score every pair exactly once.
    pub fn from_rows(rows: &[ScoreRow]) -> Result<Self> {
        let mut models: Vec<String> = Vec::new();
        let mut cells: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
        for r in rows {
            let m = match models.iter().position(|m| *m == r.model_id) {
                Some(m) => m,
                None => {
                    models.push(r.model_id.clone());
                    models.len() - 1
                }
            };
            if cells.entry(r.pair_id).or_default().insert(m, check_score(r.score)?).is_some() {
                return Err(Error::InvalidParameter(format!("model `{}` scores pair {} twice", r.model_id, r.pair_id)));
            }
        }
        let mut pair_ids = Vec::with_capacity(cells.len());
        let mut scores = Vec::with_capacity(cells.len());
        for (id, row) in cells {
            if row.len() != models.len() {
                let missing = (0..models.len()).find(|m| !row.contains_key(m)).unwrap();
                return Err(Error::InvalidParameter(format!("model `{}` has no score for pair {id}", models[missing])));
            }
            pair_ids.push(id);
            scores.push(row.into_values().collect());
        }
        Self::new(pair_ids, models, scores)
    }

    pub fn pair_ids(&self) -> &[u64] {
        &self.pair_ids
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i]
    }

    pub fn column(&self, model: &str) -> Option<Vec<f64>> {
        let m = self.models.iter().position(|x| x == model)?;
        Some(self.scores.iter().map(|r| r[m]).collect())
    }

    /// Copy with the model columns in `order` (indices into `models()`).
    pub fn permute_models(&self, order: &[usize]) -> Result<Self> {
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != (0..self.models.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter("not a permutation of the model columns".into()));
        }
        Ok(Self {
            pair_ids: self.pair_ids.clone(),
            models: order.iter().map(|&i| self.models[i].clone()).collect(),
            scores: self.scores.iter().map(|r| order.iter().map(|&i| r[i]).collect()).collect(),
        })
    }
}

/// Average each pair's scores and threshold at 0.5. Values are summed in
/// sorted order so the result does not depend on column order.
pub fn ensemble(scores: &ScoreMatrix, tie: TieRule) -> Result<SubmissionFile> {
    if scores.models.is_empty() {
        return Err(Error::InvalidParameter("ensemble needs at least one model".into()));
    }
    let values = scores
        .scores
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            tie.decide(sorted.iter().sum::<f64>() / sorted.len() as f64)
        })
        .collect();
    Ok(SubmissionFile { values })
}

/// Ordered 0/1 predictions, one per test pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubmissionFile {
    values: Vec<u8>,
}

impl SubmissionFile {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v > 1) {
            return Err(Error::InvalidParameter(format!("submission value {v} is not 0 or 1")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Strict parse: one `0` or `1` per line, no blank lines, no BOM, no
    /// surrounding whitespace. The final newline is optional.
    pub fn parse(text: &str, expected_lines: Option<usize>) -> Result<Self> {
        if text.starts_with('\u{feff}') {
            return Err(Error::Submission {
                line: 1,
                reason: "byte order mark".into(),
            });
        }
        let body = text.strip_suffix('\n').unwrap_or(text);
        let values = if body.is_empty() && !text.is_empty() {
            return Err(Error::Submission {
                line: 1,
                reason: "blank line".into(),
            });
        } else if body.is_empty() {
            Vec::new()
        } else {
            body.split('\n')
                .enumerate()
                .map(|(i, token)| match token {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    "" => Err(Error::Submission {
                        line: i + 1,
                        reason: "blank line".into(),
                    }),
                    other => Err(Error::Submission {
                        line: i + 1,
                        reason: format!("expected 0 or 1, found `{}`", other.escape_debug()),
                    }),
                })
                .collect::<Result<Vec<u8>>>()?
        };
        if let Some(n) = expected_lines {
            if values.len() != n {
                return Err(Error::Submission {
                    line: values.len(),
                    reason: format!("expected {n} lines, found {}", values.len()),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn emit(&self) -> String {
        let mut out = String::with_capacity(2 * self.values.len());
        for v in &self.values {
            out.push(if *v == 1 { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path, expected_lines: Option<usize>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?, expected_lines)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.emit()).map_err(|e| Error::io(path, e))
    }
}

/// Fraction of positions where the two files agree.
pub fn accuracy(pred: &SubmissionFile, truth: &SubmissionFile) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction has {} lines, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty submission".into()));
    }
    let hits = pred.values.iter().zip(&truth.values).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Labels of the manifest records in `split`, ordered by pair id, with
/// those ids.
pub fn truth_for(manifest: &PairManifest, split: Option<Split>) -> (Vec<u64>, SubmissionFile) {
    let mut rows: Vec<(u64, u8)> = manifest
        .records
        .iter()
        .filter(|r| split.is_none() || r.split == split)
        .map(|r| (r.pair_id, r.label.value()))
        .collect();
    rows.sort_unstable();
    let (ids, values) = rows.into_iter().unzip();
    (ids, SubmissionFile { values })
}

/// Binary cross-entropy of probabilistic scores, probabilities clamped to
/// `[LOSS_EPS, 1 - LOSS_EPS]`.
pub fn bce_loss(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = check_score(s)?.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            Ok(match y {
                Label::Match => -p.ln(),
                Label::NonMatch => -(1.0 - p).ln(),
            })
        })
        .sum::<Result<f64>>()?;
    Ok(total / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model_id: String,
    pub subtask: Subtask,
    pub split: Split,
    pub count: usize,
    pub accuracy: f64,
    pub loss: f64,
}

/// Per-model accuracy and loss over the manifest's `split` records.
pub fn report_validation(scores: &ScoreMatrix, manifest: &PairManifest, split: Split, tie: TieRule) -> Result<Vec<ReportRow>> {
    let records: Vec<_> = manifest.records_in(split).collect();
    if records.is_empty() {
        return Err(Error::InvalidParameter(format!("manifest has no {split} records")));
    }
    let index: BTreeMap<u64, usize> = scores.pair_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let rows: Vec<usize> = records
        .iter()
        .map(|r| {
            index
                .get(&r.pair_id)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("no score for {split} pair {}", r.pair_id)))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    scores
        .models
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let s: Vec<f64> = rows.iter().map(|&i| scores.scores[i][m]).collect();
            let hits = s
                .iter()
                .zip(&labels)
                .filter(|(p, y)| tie.decide(**p) == y.value())
                .count();
            Ok(ReportRow {
                model_id: model.clone(),
                subtask: manifest.subtask,
                split,
                count: s.len(),
                accuracy: hits as f64 / s.len() as f64,
                loss: bce_loss(&s, &labels)?,
            })
        })
        .collect()
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            r.model_id,
            r.subtask.number(),
            r.split,
            r.count,
            r.accuracy,
            r.loss
        );
    }
    out
}

/// Deterministic subset of `fraction` of `0..n` (at least one index when
/// `n > 0`), mimicking a preliminary leaderboard that scores only part of
/// the test set.
pub fn preliminary_subset(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(n.min(1), n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::seed::rng(crate::seed::derive(seed, "preliminary-subset", &[])));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}
