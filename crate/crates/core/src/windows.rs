//! Fixed-length training windows cut from labeled clips.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{frame_time, ClipRecord, FRAME_RATE_HZ, TIME_EPS};

/// Frames per window: four seconds at 10 Hz.
pub const WINDOW_LEN: usize = 40;
/// Smallest end frame with a full window of history behind it.
pub const MIN_END_FRAME: usize = WINDOW_LEN - 1;

#[derive(Debug, thiserror::Error)]
pub enum WindowError {
    #[error("clip {0} has no necessity label")]
    Unlabeled(String),
    #[error("clip {vid} has {frames} frames; a window needs {WINDOW_LEN}")]
    TooShort { vid: String, frames: usize },
    #[error("windows contain only label {0}; both classes are required")]
    SingleClass(u8),
    #[error("no windows")]
    Empty,
    #[error("invalid labeling policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingPolicy {
    pub p0: f64,
    pub negatives_per_clip: usize,
    pub seed: u64,
}

impl LabelingPolicy {
    pub fn new(p0: f64, seed: u64) -> Self {
        Self { p0, negatives_per_clip: 1, seed }
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(WindowError::Policy(format!("p0 {} outside [0, 1]", self.p0)));
        }
        Ok(())
    }
}

/// One row of the window index. Media is resolved from the corpus by `vid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub vid: String,
    /// Zero-based index of the last frame; the window covers
    /// `end_frame - 39 ..= end_frame`.
    pub end_frame: usize,
    pub label: u8,
    pub weight: f64,
    /// Necessity score of the source clip.
    pub score: f64,
    #[serde(skip)]
    pub acceleration: f64,
}

impl FrameWindow {
    pub fn start_frame(&self) -> usize {
        self.end_frame + 1 - WINDOW_LEN
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start_frame()..=self.end_frame
    }

    pub fn end_time(&self) -> f64 {
        frame_time(self.end_frame)
    }
}

/// Terminal acceleration in m/s^2 by backward difference of speed.
pub fn acceleration(speed: &[f64], end: usize) -> f64 {
    if end == 0 || end >= speed.len() {
        return 0.0;
    }
    (speed[end] - speed[end - 1]) * FRAME_RATE_HZ
}

fn window(clip: &ClipRecord, end: usize, label: u8, score: f64) -> FrameWindow {
    FrameWindow {
        vid: clip.vid.clone(),
        end_frame: end,
        label,
        weight: 0.0,
        score,
        acceleration: acceleration(&clip.speed, end),
    }
}

/// One positive window per frame whose time lies in the clip's explanation
/// interval, provided the clip clears `p0`.
pub fn positive_windows(clip: &ClipRecord, policy: &LabelingPolicy) -> Result<Vec<FrameWindow>, WindowError> {
    let (score, interval) = match (clip.necessity_score, clip.explanation_interval) {
        (Some(s), Some(i)) => (s, i),
        _ => return Err(WindowError::Unlabeled(clip.vid.clone())),
    };
    if score < policy.p0 {
        return Ok(Vec::new());
    }
    let out: Vec<FrameWindow> = (MIN_END_FRAME..clip.frame_count())
        .filter(|&e| interval.contains(frame_time(e)))
        .map(|e| window(clip, e, 1, score))
        .collect();
    if out.is_empty() {
        log::warn!(
            "clip {}: interval ({}, {}) leaves no end frame with {} frames of history",
            clip.vid,
            interval.start,
            interval.end,
            WINDOW_LEN
        );
    }
    Ok(out)
}

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-clip RNG stream so results do not depend on iteration order.
pub fn clip_rng(seed: u64, vid: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stable_hash(vid))
}

/// `policy.negatives_per_clip` windows with end frames drawn uniformly from
/// the valid range. Draws are with replacement.
pub fn negative_windows(clip: &ClipRecord, policy: &LabelingPolicy) -> Result<Vec<FrameWindow>, WindowError> {
    let n = clip.frame_count();
    if n < WINDOW_LEN {
        return Err(WindowError::TooShort { vid: clip.vid.clone(), frames: n });
    }
    let score = clip.necessity_score.unwrap_or(0.0);
    let mut rng = clip_rng(policy.seed, &clip.vid);
    Ok((0..policy.negatives_per_clip)
        .map(|_| window(clip, rng.gen_range(MIN_END_FRAME..n), 0, score))
        .collect())
}

pub fn negative_window(clip: &ClipRecord, policy: &LabelingPolicy) -> Result<FrameWindow, WindowError> {
    let one = LabelingPolicy { negatives_per_clip: 1, ..*policy };
    Ok(negative_windows(clip, &one)?.remove(0))
}

/// Inverse class frequency, normalized to sum to one.
pub fn class_weights(windows: &[FrameWindow]) -> Result<Vec<f64>, WindowError> {
    let pos = windows.iter().filter(|w| w.label == 1).count();
    let neg = windows.len() - pos;
    match (pos, neg) {
        (0, 0) => return Err(WindowError::Empty),
        (0, _) => return Err(WindowError::SingleClass(0)),
        (_, 0) => return Err(WindowError::SingleClass(1)),
        _ => {}
    }
    // Each class carries half the total mass.
    Ok(windows
        .iter()
        .map(|w| if w.label == 1 { 0.5 / pos as f64 } else { 0.5 / neg as f64 })
        .collect())
}

/// Windows for every labeled clip: positives from clips at or above `p0`,
/// negatives from the rest. Unlabeled clips are skipped. Weights are filled
/// in when both classes are present.
pub fn build_windows(clips: &[ClipRecord], policy: &LabelingPolicy) -> Result<Vec<FrameWindow>, WindowError> {
    policy.validate()?;
    let per_clip: Vec<Result<Vec<FrameWindow>, WindowError>> = clips
        .par_iter()
        .filter(|c| c.is_labeled())
        .map(|c| {
            if c.necessity_score.unwrap_or(0.0) >= policy.p0 {
                positive_windows(c, policy)
            } else {
                negative_windows(c, policy)
            }
        })
        .collect();
    let mut out = Vec::new();
    for r in per_clip {
        out.extend(r?);
    }
    if let Ok(w) = class_weights(&out) {
        out.iter_mut().zip(w).for_each(|(win, w)| win.weight = w);
    }
    Ok(out)
}

/// Re-checks a positive label from the manifest record alone.
pub fn label_is_consistent(window: &FrameWindow, clip: &ClipRecord, p0: f64) -> bool {
    let in_bounds = window.end_frame >= MIN_END_FRAME && window.end_frame < clip.frame_count();
    if window.label == 0 {
        return in_bounds;
    }
    let score_ok = clip.necessity_score.is_some_and(|s| s >= p0);
    let time_ok = clip.explanation_interval.is_some_and(|iv| {
        let t = window.end_time();
        t >= iv.start - TIME_EPS && t <= iv.end + TIME_EPS
    });
    in_bounds && score_ok && time_ok
}

/// Draws `n` indices with probability proportional to `weights`.
pub fn weighted_resample(weights: &[f64], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let dist = WeightedIndex::new(weights).expect("weights must be positive and finite");
    (0..n).map(|_| dist.sample(rng)).collect()
}

pub fn write_index_csv(windows: &[FrameWindow], path: impl AsRef<Path>) -> Result<(), WindowError> {
    let mut w = csv::Writer::from_path(path)?;
    for win in windows {
        w.serialize(win)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an index written by [`write_index_csv`]. Acceleration is not stored
/// and is restored from `clips` when the vid is known.
pub fn read_index_csv(path: impl AsRef<Path>, clips: &[ClipRecord]) -> Result<Vec<FrameWindow>, WindowError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let mut win: FrameWindow = row?;
        if let Some(c) = clips.iter().find(|c| c.vid == win.vid) {
            win.acceleration = acceleration(&c.speed, win.end_frame);
        }
        out.push(win);
    }
    Ok(out)
}
