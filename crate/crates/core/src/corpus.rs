//! Necessity-annotated clip corpus: ingest, assumption filtering and the
//! versioned JSON manifest.
//!
//! Every clip is normalized to [`FRAME_RATE_HZ`] at ingest, so downstream code
//! addresses time purely by frame index: frame `i` sits at `i / 10` seconds.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{MediaError, Video};

pub const FRAME_RATE_HZ: f64 = 10.0;
/// Largest tolerated spacing between consecutive source frames.
pub const MAX_FRAME_GAP_S: f64 = 0.5;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corrupt video {path}: {reason}")]
    CorruptVideo { path: PathBuf, reason: String },
    #[error("media error for {path}: {source}")]
    Media {
        path: PathBuf,
        #[source]
        source: MediaError,
    },
    #[error("telemetry is empty")]
    EmptyTelemetry,
    #[error("telemetry: {0}")]
    Telemetry(String),
    #[error("gaze map {gaze} is not aligned with video ({detail})")]
    MisalignedGaze { gaze: PathBuf, detail: String },
    #[error("assumption flags reference unknown clips: {0:?}")]
    UnknownVids(Vec<String>),
    #[error("unknown assumption code `{0}`")]
    UnknownViolation(String),
    #[error("manifest schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("clip {vid}: {reason}")]
    Invalid { vid: String, reason: String },
    #[error("duplicate vid {0} in corpus")]
    DuplicateVid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - TIME_EPS && t <= self.end + TIME_EPS
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

impl From<(f64, f64)> for Interval {
    fn from((start, end): (f64, f64)) -> Self {
        Self { start, end }
    }
}

impl From<Interval> for (f64, f64) {
    fn from(i: Interval) -> Self {
        (i.start, i.end)
    }
}

/// Seconds at which frame `index` is shown.
pub fn frame_time(index: usize) -> f64 {
    index as f64 / FRAME_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub vid: String,
    /// Relative to the manifest directory.
    pub video_path: PathBuf,
    /// Relative to the manifest directory. `None` means no recorded gaze;
    /// consumers fall back to a uniform gaze map.
    #[serde(default)]
    pub gazemap_path: Option<PathBuf>,
    /// Per-frame speed in m/s.
    pub speed: Vec<f64>,
    /// Per-frame heading in degrees, [0, 360).
    pub course: Vec<f64>,
    #[serde(default)]
    pub message: Option<String>,
    #[serde(default)]
    pub necessity_score: Option<f64>,
    #[serde(default)]
    pub explanation_interval: Option<Interval>,
}

impl ClipRecord {
    pub fn frame_count(&self) -> usize {
        self.speed.len()
    }

    pub fn duration(&self) -> f64 {
        self.frame_count() as f64 / FRAME_RATE_HZ
    }

    pub fn is_labeled(&self) -> bool {
        self.necessity_score.is_some()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |reason: String| CorpusError::Invalid { vid: self.vid.clone(), reason };
        if self.vid.is_empty() {
            return Err(bad("empty vid".into()));
        }
        if self.speed.len() != self.course.len() {
            return Err(bad(format!(
                "speed has {} samples but course has {}",
                self.speed.len(),
                self.course.len()
            )));
        }
        if self.speed.iter().chain(&self.course).any(|v| !v.is_finite()) {
            return Err(bad("non-finite telemetry".into()));
        }
        if let Some(s) = self.necessity_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(bad(format!("necessity_score {s} outside [0, 1]")));
            }
            if self.explanation_interval.is_none() {
                return Err(bad("labeled clip is missing explanation_interval".into()));
            }
        }
        if let Some(iv) = self.explanation_interval {
            if !(iv.start >= 0.0 && iv.start <= iv.end && iv.end <= self.duration() + TIME_EPS) {
                return Err(bad(format!(
                    "explanation_interval ({}, {}) not within [0, {}]",
                    iv.start,
                    iv.end,
                    self.duration()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub schema_version: u32,
    pub clips: Vec<ClipRecord>,
    /// Directory that relative media paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version && self.clips == other.clips
    }
}

impl Corpus {
    pub fn new(clips: Vec<ClipRecord>, root: impl Into<PathBuf>) -> Self {
        Self { schema_version: MANIFEST_SCHEMA_VERSION, clips, root: root.into() }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for c in &self.clips {
            c.validate()?;
            if !seen.insert(c.vid.as_str()) {
                return Err(CorpusError::DuplicateVid(c.vid.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, vid: &str) -> Option<&ClipRecord> {
        self.clips.iter().find(|c| c.vid == vid)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.root.join(rel)
        }
    }
}

pub fn save_manifest(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    corpus.validate()?;
    let text = serde_json::to_string_pretty(corpus)
        .map_err(|source| CorpusError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(|source| CorpusError::Io { path: path.into(), source })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.into(), source })?;
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|source| CorpusError::Json { path: path.into(), source })?;
    if probe.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(CorpusError::SchemaVersion {
            found: probe.schema_version,
            expected: MANIFEST_SCHEMA_VERSION,
        });
    }
    let mut corpus: Corpus = serde_json::from_str(&text)
        .map_err(|source| CorpusError::Json { path: path.into(), source })?;
    corpus.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    corpus.validate()?;
    Ok(corpus)
}

// --- ingest -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub timestamp: f64,
    pub speed: f64,
    pub course: f64,
}

pub fn read_telemetry_csv(path: impl AsRef<Path>) -> Result<Vec<TelemetryRow>, CorpusError> {
    let path = path.as_ref();
    let mut rdr =
        csv::Reader::from_path(path).map_err(|source| CorpusError::Csv { path: path.into(), source })?;
    let rows = rdr
        .deserialize()
        .collect::<Result<Vec<TelemetryRow>, _>>()
        .map_err(|source| CorpusError::Csv { path: path.into(), source })?;
    Ok(rows)
}

/// Verifies timestamps are increasing with no gap above [`MAX_FRAME_GAP_S`].
pub fn check_frame_timing(video: &Video, path: &Path) -> Result<(), CorpusError> {
    let corrupt = |reason: String| CorpusError::CorruptVideo { path: path.into(), reason };
    if video.is_empty() {
        return Err(corrupt("no frames".into()));
    }
    for (i, pair) in video.frames.windows(2).enumerate() {
        let gap = pair[1].timestamp - pair[0].timestamp;
        if !gap.is_finite() || gap <= 0.0 {
            return Err(corrupt(format!("non-increasing timestamp at frame {}", i + 1)));
        }
        if gap > MAX_FRAME_GAP_S {
            return Err(corrupt(format!("{gap:.3} s gap after frame {i}")));
        }
    }
    Ok(())
}

fn nominal_duration(video: &Video) -> f64 {
    let n = video.len();
    if n < 2 {
        return 1.0 / FRAME_RATE_HZ;
    }
    let mut gaps: Vec<f64> =
        video.frames.windows(2).map(|p| p[1].timestamp - p[0].timestamp).collect();
    gaps.sort_by(f64::total_cmp);
    let period = gaps[gaps.len() / 2];
    video.frames[n - 1].timestamp - video.frames[0].timestamp + period
}

/// Sample-and-hold resampling onto a 10 Hz grid starting at the first frame.
///
/// Output frame `i` is the latest source frame not after `t0 + i/10`, and is
/// stamped with exactly that grid time, so a clip already on the grid is
/// returned unchanged.
pub fn resample(video: &Video, frame_count: usize) -> Video {
    let mut out = Video::new(video.geometry);
    if video.is_empty() {
        return out;
    }
    let t0 = video.frames[0].timestamp;
    let mut src = 0usize;
    for i in 0..frame_count {
        let t = t0 + frame_time(i);
        while src + 1 < video.len() && video.frames[src + 1].timestamp <= t + TIME_EPS {
            src += 1;
        }
        out.frames.push(crate::media::Frame { timestamp: t, pixels: video.frames[src].pixels.clone() });
    }
    out
}

pub fn resampled_frame_count(video: &Video) -> usize {
    (nominal_duration(video) * FRAME_RATE_HZ + TIME_EPS).round() as usize
}

/// Linear interpolation of speed, shortest-arc interpolation of heading.
/// Values outside the telemetry span are clamped to the end samples.
pub fn interpolate_telemetry(
    rows: &[TelemetryRow],
    times: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), CorpusError> {
    if rows.is_empty() {
        return Err(CorpusError::EmptyTelemetry);
    }
    let mut rows = rows.to_vec();
    if rows.iter().any(|r| !(r.timestamp.is_finite() && r.speed.is_finite() && r.course.is_finite())) {
        return Err(CorpusError::Telemetry("non-finite value".into()));
    }
    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    if rows.windows(2).any(|p| p[0].timestamp == p[1].timestamp) {
        return Err(CorpusError::Telemetry("duplicate timestamp".into()));
    }
    let mut speed = Vec::with_capacity(times.len());
    let mut course = Vec::with_capacity(times.len());
    let mut j = 0usize;
    for &t in times {
        while j + 1 < rows.len() && rows[j + 1].timestamp <= t {
            j += 1;
        }
        let a = rows[j];
        if t <= a.timestamp || j + 1 == rows.len() {
            speed.push(a.speed);
            course.push(a.course.rem_euclid(360.0));
            continue;
        }
        let b = rows[j + 1];
        let w = (t - a.timestamp) / (b.timestamp - a.timestamp);
        speed.push(a.speed + w * (b.speed - a.speed));
        let delta = (b.course - a.course + 180.0).rem_euclid(360.0) - 180.0;
        course.push((a.course + w * delta).rem_euclid(360.0));
    }
    Ok((speed, course))
}

/// Paths are given relative to `out_dir`, where the resampled media is written.
pub struct IngestRequest<'a> {
    pub vid: &'a str,
    pub video: &'a Path,
    pub gaze: Option<&'a Path>,
    pub telemetry: &'a [TelemetryRow],
    pub out_dir: &'a Path,
}

/// Materializes an unlabeled [`ClipRecord`] from raw media and telemetry.
pub fn ingest_clip(req: &IngestRequest<'_>) -> Result<ClipRecord, CorpusError> {
    if req.telemetry.is_empty() {
        return Err(CorpusError::EmptyTelemetry);
    }
    let video = read_video(req.video)?;
    check_frame_timing(&video, req.video)?;
    let n = resampled_frame_count(&video);
    let resampled = resample(&video, n);
    let times: Vec<f64> = resampled.frames.iter().map(|f| f.timestamp).collect();
    let (speed, course) = interpolate_telemetry(req.telemetry, &times)?;

    fs::create_dir_all(req.out_dir)
        .map_err(|source| CorpusError::Io { path: req.out_dir.into(), source })?;
    let video_rel = PathBuf::from(format!("{}.xnv", req.vid));
    write_video(&resampled, &req.out_dir.join(&video_rel))?;

    let gazemap_path = match req.gaze {
        None => None,
        Some(gaze_path) => {
            let gaze = read_video(gaze_path)?;
            check_frame_timing(&gaze, gaze_path)?;
            let misaligned = |detail: String| CorpusError::MisalignedGaze { gaze: gaze_path.into(), detail };
            if gaze.geometry.channels != 1 {
                return Err(misaligned(format!("{} channels, expected 1", gaze.geometry.channels)));
            }
            if (gaze.frames[0].timestamp - video.frames[0].timestamp).abs() > MAX_FRAME_GAP_S {
                return Err(misaligned("start times differ".into()));
            }
            let gn = resampled_frame_count(&gaze);
            if gn.abs_diff(n) > 1 {
                return Err(misaligned(format!("{gn} frames vs {n}")));
            }
            let g = resample(&gaze, n);
            let rel = PathBuf::from(format!("{}.gaze.xnv", req.vid));
            write_video(&g, &req.out_dir.join(&rel))?;
            Some(rel)
        }
    };

    let clip = ClipRecord {
        vid: req.vid.to_string(),
        video_path: video_rel,
        gazemap_path,
        speed,
        course,
        message: None,
        necessity_score: None,
        explanation_interval: None,
    };
    clip.validate()?;
    Ok(clip)
}

fn read_video(path: &Path) -> Result<Video, CorpusError> {
    Video::read(path).map_err(|e| match e {
        MediaError::Io(source) => CorpusError::Io { path: path.into(), source },
        other => CorpusError::CorruptVideo { path: path.into(), reason: other.to_string() },
    })
}

fn write_video(video: &Video, path: &Path) -> Result<(), CorpusError> {
    video.write(path).map_err(|source| CorpusError::Media { path: path.into(), source })
}

// --- assumption filtering --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    TrafficLawViolation,
    UnsafeAction,
    NoExplanationMoment,
    CorruptVideo,
}

impl Violation {
    pub const ALL: [Violation; 4] = [
        Violation::TrafficLawViolation,
        Violation::UnsafeAction,
        Violation::NoExplanationMoment,
        Violation::CorruptVideo,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Violation::TrafficLawViolation => "traffic-law-violation",
            Violation::UnsafeAction => "unsafe-action",
            Violation::NoExplanationMoment => "no-explanation-moment",
            Violation::CorruptVideo => "corrupt-video",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Violation {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Violation::ALL
            .into_iter()
            .find(|v| v.code() == s.trim())
            .ok_or_else(|| CorpusError::UnknownViolation(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionFlag {
    pub vid: String,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssumptionReport {
    pub vid: String,
    pub passed: bool,
    pub violated_assumptions: Vec<Violation>,
}

pub fn read_flags_csv(path: impl AsRef<Path>) -> Result<Vec<AssumptionFlag>, CorpusError> {
    let path = path.as_ref();
    let mut rdr =
        csv::Reader::from_path(path).map_err(|source| CorpusError::Csv { path: path.into(), source })?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|source| CorpusError::Csv { path: path.into(), source })?;
        let vid = row.get(0).unwrap_or_default().trim().to_string();
        let violation = row.get(1).unwrap_or_default().parse()?;
        out.push(AssumptionFlag { vid, violation });
    }
    Ok(out)
}

/// Splits clips by the human review flags. Clip contents are never touched.
pub fn filter_corpus(
    clips: &[ClipRecord],
    flags: &[AssumptionFlag],
) -> Result<(Vec<ClipRecord>, Vec<AssumptionReport>), CorpusError> {
    let known: HashSet<&str> = clips.iter().map(|c| c.vid.as_str()).collect();
    let unknown: BTreeSet<String> =
        flags.iter().filter(|f| !known.contains(f.vid.as_str())).map(|f| f.vid.clone()).collect();
    if !unknown.is_empty() {
        return Err(CorpusError::UnknownVids(unknown.into_iter().collect()));
    }
    let mut by_vid: BTreeMap<&str, BTreeSet<Violation>> = BTreeMap::new();
    for f in flags {
        by_vid.entry(f.vid.as_str()).or_default().insert(f.violation);
    }
    let mut kept = Vec::new();
    let mut reports = Vec::with_capacity(clips.len());
    for clip in clips {
        let violated: Vec<Violation> =
            by_vid.get(clip.vid.as_str()).map(|s| s.iter().copied().collect()).unwrap_or_default();
        let passed = violated.is_empty();
        if passed {
            kept.push(clip.clone());
        }
        reports.push(AssumptionReport { vid: clip.vid.clone(), passed, violated_assumptions: violated });
    }
    Ok((kept, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Geometry;

    fn clip(vid: &str, frames: usize) -> ClipRecord {
        ClipRecord {
            vid: vid.into(),
            video_path: format!("{vid}.xnv").into(),
            gazemap_path: None,
            speed: vec![5.0; frames],
            course: vec![90.0; frames],
            message: None,
            necessity_score: None,
            explanation_interval: None,
        }
    }

    fn video_at(fps: f64, seconds: f64) -> Video {
        let mut v = Video::new(Geometry { width: 2, height: 1, channels: 3 });
        let n = (fps * seconds).round() as usize;
        for i in 0..n {
            v.push(i as f64 / fps, vec![(i % 256) as u8; 6]).unwrap();
        }
        v
    }

    #[test]
    fn thirty_fps_ten_seconds_gives_hundred_frames() {
        let v = video_at(30.0, 10.0);
        let n = resampled_frame_count(&v);
        assert_eq!(n, 100);
        let r = resample(&v, n);
        assert_eq!(r.len(), 100);
        // 10 Hz grid picks every third source frame.
        assert_eq!(r.frames[7].pixels, v.frames[21].pixels);
    }

    #[test]
    fn resampling_is_idempotent() {
        let v = video_at(30.0, 10.0);
        let once = resample(&v, resampled_frame_count(&v));
        let twice = resample(&once, resampled_frame_count(&once));
        assert_eq!(once, twice);
    }

    #[test]
    fn telemetry_endpoints_match_samples() {
        let rows: Vec<TelemetryRow> = (0..11)
            .map(|i| TelemetryRow { timestamp: i as f64, speed: (i * i) as f64, course: 10.0 })
            .collect();
        let times: Vec<f64> = (0..100).map(frame_time).collect();
        let (speed, course) = interpolate_telemetry(&rows, &times).unwrap();
        assert_eq!(speed.len(), 100);
        assert_eq!(speed[0], 0.0);
        assert_eq!(speed[10], 1.0);
        assert!((speed[15] - 2.5).abs() < 1e-12);
        assert!(course.iter().all(|&c| c == 10.0));
    }

    #[test]
    fn heading_interpolates_across_north() {
        let rows = [
            TelemetryRow { timestamp: 0.0, speed: 0.0, course: 350.0 },
            TelemetryRow { timestamp: 1.0, speed: 0.0, course: 10.0 },
        ];
        let (_, course) = interpolate_telemetry(&rows, &[0.5, 0.75]).unwrap();
        assert!(course[0].abs() < 1e-9 || (course[0] - 360.0).abs() < 1e-9);
        assert!((course[1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn empty_telemetry_is_rejected() {
        assert!(matches!(interpolate_telemetry(&[], &[0.0]), Err(CorpusError::EmptyTelemetry)));
    }

    #[test]
    fn dropped_segment_is_corrupt() {
        let mut v = video_at(30.0, 10.0);
        // Oracle: count gaps above the limit directly from container timestamps.
        v.frames.drain(100..120);
        let gaps = v
            .frames
            .windows(2)
            .filter(|p| p[1].timestamp - p[0].timestamp > MAX_FRAME_GAP_S)
            .count();
        assert_eq!(gaps, 1);
        assert!(matches!(
            check_frame_timing(&v, Path::new("x")),
            Err(CorpusError::CorruptVideo { .. })
        ));
    }

    #[test]
    fn filter_counts_are_conserved() {
        let clips: Vec<ClipRecord> = (0..1232).map(|i| clip(&format!("v{i:04}"), 100)).collect();
        let flags: Vec<AssumptionFlag> = (0..129)
            .map(|i| AssumptionFlag {
                vid: format!("v{:04}", i * 9),
                violation: Violation::ALL[i % 4],
            })
            .collect();
        let (kept, reports) = filter_corpus(&clips, &flags).unwrap();
        assert_eq!(kept.len(), 1103);
        assert_eq!(reports.len(), 1232);
        assert_eq!(reports.iter().filter(|r| !r.passed).count(), 129);
        assert!(reports.iter().all(|r| r.passed == r.violated_assumptions.is_empty()));

        let (kept, _) = filter_corpus(&clips, &[]).unwrap();
        assert_eq!(kept, clips);

        let all: Vec<AssumptionFlag> = clips
            .iter()
            .map(|c| AssumptionFlag { vid: c.vid.clone(), violation: Violation::UnsafeAction })
            .collect();
        let (kept, reports) = filter_corpus(&clips, &all).unwrap();
        assert!(kept.is_empty());
        assert!(reports.iter().all(|r| !r.passed));
    }

    #[test]
    fn unknown_flag_vids_are_listed() {
        let clips = vec![clip("a", 10)];
        let flags = vec![
            AssumptionFlag { vid: "zz".into(), violation: Violation::CorruptVideo },
            AssumptionFlag { vid: "b".into(), violation: Violation::CorruptVideo },
        ];
        match filter_corpus(&clips, &flags) {
            Err(CorpusError::UnknownVids(ids)) => assert_eq!(ids, vec!["b", "zz"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut a = clip("a", 100);
        a.necessity_score = Some(0.1 + 0.2);
        a.explanation_interval = Some(Interval::new(3.8, 4.5));
        a.message = Some("I'm slowing down.".into());
        a.speed[3] = 1.0 / 3.0;
        let corpus = Corpus::new(vec![a, clip("b", 40), clip("c", 70)], dir.path());
        save_manifest(&corpus, &path).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), corpus);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("0.30000000000000004", "1.2")).unwrap();
        assert!(matches!(load_manifest(&path), Err(CorpusError::Invalid { .. })));

        let mut missing = clip("m", 100);
        missing.necessity_score = Some(0.5);
        let bad = Corpus::new(vec![missing], dir.path());
        std::fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("explanation_interval"), "{err}");

        std::fs::write(&path, r#"{"schema_version": 9, "clips": []}"#).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(CorpusError::SchemaVersion { found: 9, .. })
        ));
    }

    #[test]
    fn violation_codes_parse() {
        for v in Violation::ALL {
            assert_eq!(v.code().parse::<Violation>().unwrap(), v);
        }
        assert!("speeding".parse::<Violation>().is_err());
    }
}
