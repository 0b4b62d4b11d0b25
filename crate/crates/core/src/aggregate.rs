//! Aggregation of per-annotator events into one necessity label per clip.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Interval};

/// Annotators needed before a clip can be aggregated (one dropped at each tail).
pub const MIN_ANNOTATIONS: usize = 3;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("need at least {MIN_ANNOTATIONS} values, got {0}")]
    Arity(usize),
    #[error("no events")]
    Empty,
    #[error("events mix clips {0} and {1}")]
    MixedVids(String, String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("duplicate annotation by {annotator} on {vid}")]
    Duplicate { vid: String, annotator: String },
    #[error("csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub vid: String,
    pub annotator_id: String,
    /// Seconds into the clip.
    pub moment: f64,
    /// Necessity in [0, 1].
    pub score: f64,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLabel {
    pub necessity_score: f64,
    pub interval: Interval,
    pub contributing_ids: Vec<String>,
    /// Explanation of the annotator whose score is nearest the aggregate.
    pub message: String,
}

/// Mean after dropping exactly one maximum and one minimum.
///
/// The kept values are summed in ascending order, which makes the result
/// exactly permutation invariant.
pub fn truncated_mean(scores: &[f64]) -> Result<f64, AggregateError> {
    if scores.len() < MIN_ANNOTATIONS {
        return Err(AggregateError::Arity(scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(AggregateError::NonFinite("score"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[1..sorted.len() - 1];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

fn common_vid(events: &[AnnotationEvent]) -> Result<&str, AggregateError> {
    let first = events.first().ok_or(AggregateError::Empty)?;
    if let Some(other) = events.iter().find(|e| e.vid != first.vid) {
        return Err(AggregateError::MixedVids(first.vid.clone(), other.vid.clone()));
    }
    Ok(&first.vid)
}

/// Span of the annotated moments: (earliest, latest).
pub fn build_interval(events: &[AnnotationEvent]) -> Result<Interval, AggregateError> {
    common_vid(events)?;
    if events.iter().any(|e| !e.moment.is_finite()) {
        return Err(AggregateError::NonFinite("moment"));
    }
    let start = events.iter().map(|e| e.moment).fold(f64::INFINITY, f64::min);
    let end = events.iter().map(|e| e.moment).fold(f64::NEG_INFINITY, f64::max);
    Ok(Interval::new(start, end))
}

pub fn aggregate_clip(events: &[AnnotationEvent]) -> Result<AggregatedLabel, AggregateError> {
    let vid = common_vid(events)?;
    if events.len() < MIN_ANNOTATIONS {
        return Err(AggregateError::Arity(events.len()));
    }
    let mut ids: Vec<&str> = events.iter().map(|e| e.annotator_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(AggregateError::Duplicate { vid: vid.to_string(), annotator: w[0].to_string() });
    }
    let scores: Vec<f64> = events.iter().map(|e| e.score).collect();
    let necessity_score = truncated_mean(&scores)?;
    let interval = build_interval(events)?;
    let nearest = events
        .iter()
        .min_by(|a, b| {
            let da = (a.score - necessity_score).abs();
            let db = (b.score - necessity_score).abs();
            da.total_cmp(&db).then_with(|| a.annotator_id.cmp(&b.annotator_id))
        })
        .expect("non-empty");
    Ok(AggregatedLabel {
        necessity_score,
        interval,
        contributing_ids: ids.into_iter().map(String::from).collect(),
        message: nearest.explanation.clone(),
    })
}

/// Maps a 1..=10 Likert rating onto [0, 1].
pub fn likert_to_unit(rating: f64) -> f64 {
    (rating - 1.0) / 9.0
}

pub fn group_by_vid(events: &[AnnotationEvent]) -> BTreeMap<String, Vec<AnnotationEvent>> {
    let mut out: BTreeMap<String, Vec<AnnotationEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.vid.clone()).or_default().push(e.clone());
    }
    out
}

/// Outcome of aggregating a whole export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregationSummary {
    pub labels: BTreeMap<String, AggregatedLabel>,
    /// Clips that were seen with fewer than [`MIN_ANNOTATIONS`] events.
    pub incomplete: Vec<String>,
}

pub fn aggregate_all(events: &[AnnotationEvent]) -> Result<AggregationSummary, AggregateError> {
    let mut summary = AggregationSummary::default();
    for (vid, group) in group_by_vid(events) {
        if group.len() < MIN_ANNOTATIONS {
            summary.incomplete.push(vid);
            continue;
        }
        summary.labels.insert(vid, aggregate_clip(&group)?);
    }
    Ok(summary)
}

/// Writes labels into the corpus; clips without a label are left untouched.
pub fn apply_labels(corpus: &mut Corpus, labels: &BTreeMap<String, AggregatedLabel>) {
    for clip in &mut corpus.clips {
        if let Some(label) = labels.get(&clip.vid) {
            clip.necessity_score = Some(label.necessity_score);
            clip.explanation_interval = Some(label.interval);
            clip.message = Some(label.message.clone());
        }
    }
}

pub fn read_annotations_csv(path: impl AsRef<Path>) -> Result<Vec<AnnotationEvent>, AggregateError> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|source| AggregateError::Csv { path: path.into(), source })?;
    rdr.deserialize()
        .collect::<Result<Vec<AnnotationEvent>, _>>()
        .map_err(|source| AggregateError::Csv { path: path.into(), source })
}

pub fn write_annotations_csv<W: std::io::Write>(
    out: W,
    events: &[AnnotationEvent],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    if events.is_empty() {
        w.write_record(["vid", "annotator_id", "moment", "score", "explanation"])?;
    }
    w.flush()?;
    Ok(())
}
