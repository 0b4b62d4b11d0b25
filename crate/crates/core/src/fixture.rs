//! Procedural stand-in for a driving corpus.
//!
//! Every clip shows a road scene in which a red object appears at some onset
//! time. In hazard clips the recorded gaze moves onto the object and
//! annotators rate the moment as needing an explanation; in distractor clips
//! the same kind of object appears but the gaze stays on the road ahead and
//! ratings are low. Every clip brakes once at a random time unrelated to the
//! object, so speed alone carries no label signal.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::aggregate::{aggregate_all, apply_labels, write_annotations_csv, AnnotationEvent};
use crate::corpus::{
    filter_corpus, ingest_clip, read_flags_csv, save_manifest, AssumptionFlag, Corpus, IngestRequest, TelemetryRow,
    Violation,
};
use crate::media::{Frame, Geometry, Video};
use crate::studystats::{CONTENT_FORMATS, SPEEDING_MPH};
use crate::windows::clip_rng;

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture needs at least {0} clips")]
    TooSmall(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Aggregate(#[from] crate::aggregate::AggregateError),
    #[error(transparent)]
    Media(#[from] crate::media::MediaError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    /// Clips that pass review; half of them contain a hazard.
    pub clips: usize,
    /// Extra clips that carry an assumption flag and are filtered out.
    pub flagged: usize,
    pub seed: u64,
    /// Square frame edge in pixels.
    pub size: usize,
    /// Frames per clip after resampling to 10 Hz.
    pub frames: usize,
    /// Rate at which raw media is rendered before ingest.
    pub raw_fps: f64,
    pub annotators: usize,
    pub participants: usize,
    /// Clips shown to every study participant.
    pub study_clips: usize,
}

impl FixtureSpec {
    /// The small corpus used for command-line walkthroughs.
    pub fn small(seed: u64) -> Self {
        Self { clips: 12, flagged: 2, seed, size: 32, frames: 100, raw_fps: 20.0, annotators: 5, participants: 12, study_clips: 8 }
    }

    /// Large enough for a 38-way clustering and a meaningful test split.
    pub fn large(seed: u64) -> Self {
        Self { clips: 60, ..Self::small(seed) }
    }
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub root: PathBuf,
    pub raw: PathBuf,
    /// Unlabeled manifest of every ingested clip, flagged ones included.
    pub manifest: PathBuf,
    pub flags: PathBuf,
    pub annotations: PathBuf,
    pub participants: PathBuf,
    pub responses: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipKind {
    Hazard,
    Distractor,
}

/// Ground truth behind one rendered clip.
#[derive(Debug, Clone)]
pub struct Scene {
    pub vid: String,
    pub kind: ClipKind,
    pub onset: f64,
    pub object: (f64, f64),
    pub radius: f64,
    pub brake_at: f64,
    pub cruise: f64,
    pub heading: f64,
    pub base_score: f64,
    pub family: usize,
    pub left: bool,
}

const HAZARD_TEXT: [[&str; 2]; 3] = [
    ["Pedestrian crossing from the {side}, so the car brakes", "Braking because a pedestrian is crossing on the {side}"],
    ["A vehicle is cutting in from the {side}, slowing down", "Slowing down for a car cutting in on the {side}"],
    ["Cyclist entering the lane on the {side}, reducing speed", "Reducing speed for a cyclist on the {side}"],
];
const DISTRACTOR_TEXT: [[&str; 2]; 2] = [
    ["Parked car on the {side} shoulder, keeping the lane", "Keeping the lane past a parked car on the {side}"],
    ["Red sign on the {side}, no action needed", "Sign on the {side} side, continuing normally"],
];

impl Scene {
    fn sample(vid: String, kind: ClipKind, size: usize, duration: f64, rng: &mut ChaCha8Rng) -> Self {
        let s = size as f64;
        let left = rng.gen_bool(0.5);
        // Objects keep off the central columns where the road-ahead gaze sits.
        let x = if left { rng.gen_range(0.06..0.19) * s } else { rng.gen_range(0.81..0.94) * s };
        let y = rng.gen_range(0.45..0.8) * s;
        let onset = rng.gen_range(4.6..(duration - 3.0).max(4.7));
        let family = match kind {
            ClipKind::Hazard => rng.gen_range(0..HAZARD_TEXT.len()),
            ClipKind::Distractor => rng.gen_range(0..DISTRACTOR_TEXT.len()),
        };
        let base_score = match kind {
            ClipKind::Hazard => rng.gen_range(0.55..0.95),
            ClipKind::Distractor => rng.gen_range(0.05..0.45),
        };
        Self {
            vid,
            kind,
            onset,
            object: (x, y),
            radius: rng.gen_range(0.07..0.1) * s,
            brake_at: rng.gen_range(2.0..(duration - 2.0).max(2.1)),
            cruise: rng.gen_range(10.0..14.0),
            heading: rng.gen_range(0.0..360.0),
            base_score,
            family,
            left,
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        let braking = (t - self.brake_at).clamp(0.0, 1.5);
        self.cruise - 4.0 * braking
    }

    pub fn course(&self, t: f64) -> f64 {
        (self.heading + 3.0 * t).rem_euclid(360.0)
    }

    fn distance(&self, t: f64) -> f64 {
        // Integral of `speed` from 0 to t.
        let b = (t - self.brake_at).clamp(0.0, 1.5);
        let after = (t - self.brake_at - 1.5).max(0.0);
        self.cruise * t.min(self.brake_at) + self.cruise * b - 2.0 * b * b + (self.cruise - 6.0) * after
    }

    fn object_at(&self, t: f64) -> Option<(f64, f64, f64)> {
        if t < self.onset {
            return None;
        }
        let dt = t - self.onset;
        let inward = if self.left { 0.6 } else { -0.6 } * dt;
        Some((self.object.0 + inward, self.object.1 + 0.3 * dt, self.radius + 0.25 * dt))
    }

    fn gaze_at(&self, t: f64, size: usize) -> (f64, f64) {
        let c = size as f64 / 2.0;
        match (self.kind, self.object_at(t - 0.1)) {
            (ClipKind::Hazard, Some(_)) => {
                let (x, y, _) = self.object_at(t).expect("object present");
                (x, y)
            }
            _ => (c + 0.6 * (1.3 * t).sin(), c + 0.4 * (0.9 * t).cos()),
        }
    }

    /// RGB frame and single-channel gaze map at time `t`.
    pub fn render(&self, t: f64, size: usize, noise: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>) {
        let horizon = (size as f64 * 0.38) as usize;
        let phase = self.distance(t) * 0.8;
        let obj = self.object_at(t);
        let mut rgb = Vec::with_capacity(size * size * 3);
        for y in 0..size {
            for x in 0..size {
                let mut px = if y < horizon {
                    let k = y as f64 / horizon as f64;
                    [120.0 + 30.0 * k, 170.0 + 20.0 * k, 225.0]
                } else {
                    [92.0, 92.0, 96.0]
                };
                if y >= horizon {
                    let mid = size / 2;
                    let dash = ((y as f64 * 1.5 + phase).rem_euclid(8.0)) < 4.0;
                    if (x == mid || x + 1 == mid) && dash {
                        px = [230.0, 230.0, 230.0];
                    }
                }
                if let Some((ox, oy, r)) = obj {
                    let (dx, dy) = (x as f64 + 0.5 - ox, y as f64 + 0.5 - oy);
                    if dx * dx + dy * dy <= r * r {
                        px = [215.0, 35.0, 30.0];
                    }
                }
                for v in px {
                    let n: f64 = noise.gen_range(-5.0..5.0);
                    rgb.push((v + n).clamp(0.0, 255.0) as u8);
                }
            }
        }
        let (gx, gy) = self.gaze_at(t, size);
        let sigma2 = 2.0 * (0.08 * size as f64).powi(2);
        let mut gaze = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let (dx, dy) = (x as f64 + 0.5 - gx, y as f64 + 0.5 - gy);
                gaze.push((255.0 * (-(dx * dx + dy * dy) / sigma2).exp()).round() as u8);
            }
        }
        (rgb, gaze)
    }

    pub fn explanation(&self, variant: usize) -> String {
        let side = if self.left { "left" } else { "right" };
        let t = match self.kind {
            ClipKind::Hazard => HAZARD_TEXT[self.family][variant % 2],
            ClipKind::Distractor => DISTRACTOR_TEXT[self.family][variant % 2],
        };
        t.replace("{side}", side)
    }
}

pub fn vid_name(i: usize) -> String {
    format!("clip{i:04}")
}

/// Scenes in vid order; hazards and distractors alternate.
pub fn scenes(spec: &FixtureSpec) -> Vec<Scene> {
    let duration = spec.frames as f64 / crate::corpus::FRAME_RATE_HZ;
    (0..spec.clips + spec.flagged)
        .map(|i| {
            let vid = vid_name(i);
            let mut rng = clip_rng(spec.seed, &vid);
            let kind = if i % 2 == 0 { ClipKind::Hazard } else { ClipKind::Distractor };
            Scene::sample(vid, kind, spec.size, duration, &mut rng)
        })
        .collect()
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, FixtureError> {
    r.map_err(|source| FixtureError::Io { path: path.into(), source })
}

fn render_raw(scene: &Scene, spec: &FixtureSpec) -> (Video, Video, Vec<TelemetryRow>) {
    let size = spec.size as u16;
    let mut video = Video::new(Geometry { width: size, height: size, channels: 3 });
    let mut gaze = Video::new(Geometry { width: size, height: size, channels: 1 });
    let duration = spec.frames as f64 / crate::corpus::FRAME_RATE_HZ;
    let n = (duration * spec.raw_fps).round() as usize;
    let mut noise = clip_rng(spec.seed ^ 0x6e6f_6973_65, &scene.vid);
    for j in 0..n {
        let t = j as f64 / spec.raw_fps;
        let (rgb, g) = scene.render(t, spec.size, &mut noise);
        video.frames.push(Frame { timestamp: t, pixels: rgb });
        gaze.frames.push(Frame { timestamp: t, pixels: g });
    }
    // Telemetry at 5 Hz; ingest interpolates onto the frame grid.
    let rows = (0..=(duration * 5.0) as usize)
        .map(|k| {
            let t = k as f64 / 5.0;
            TelemetryRow { timestamp: t, speed: scene.speed(t), course: scene.course(t) }
        })
        .collect();
    (video, gaze, rows)
}

fn annotations(scene: &Scene, spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<AnnotationEvent> {
    let jitter = Normal::new(0.0, 0.04).expect("valid sd");
    (0..spec.annotators)
        .map(|a| AnnotationEvent {
            vid: scene.vid.clone(),
            annotator_id: format!("A{}", a + 1),
            moment: ((scene.onset + rng.gen_range(0.2..1.0)) * 100.0).round() / 100.0,
            score: ((scene.base_score + jitter.sample(rng)).clamp(0.0, 1.0) * 1000.0).round() / 1000.0,
            explanation: scene.explanation(a),
        })
        .collect()
}

#[derive(Serialize)]
struct ParticipantRow {
    participant_id: String,
    usual_speed_mph: f64,
    self_described_aggressive: u8,
    frequent_lane_change: u8,
    motion_sickness: u8,
    seat_ordinary: &'static str,
    seat_av: &'static str,
    seat_av_explained: &'static str,
    reason_av: String,
    reason_av_explained: String,
    reason_ordinary_av_explained: String,
}

fn write_study(scenes: &[Scene], spec: &FixtureSpec, paths: &FixturePaths, rng: &mut ChaCha8Rng) -> Result<(), FixtureError> {
    let seats = ["A", "B", "C", "D"];
    let reasons = ["comfort", "control", "safety"];
    let mut prow = csv::Writer::from_path(&paths.participants)?;
    let mut aggressive = Vec::new();
    for p in 0..spec.participants {
        let speed = rng.gen_range(25.0..45.0_f64).round();
        let selfd = rng.gen_bool(0.25);
        let lane = rng.gen_bool(0.2);
        aggressive.push(speed > SPEEDING_MPH || selfd || lane);
        let ordinary = *seats.choose(rng).unwrap();
        let av = if rng.gen_bool(0.5) { ordinary } else { *seats.choose(rng).unwrap() };
        let explained = if rng.gen_bool(0.6) { av } else { *seats.choose(rng).unwrap() };
        let reason = |from: &str, to: &str, rng: &mut ChaCha8Rng| {
            if from != to && rng.gen_bool(0.8) {
                reasons.choose(rng).unwrap().to_string()
            } else {
                String::new()
            }
        };
        let row = ParticipantRow {
            participant_id: format!("P{:02}", p + 1),
            usual_speed_mph: speed,
            self_described_aggressive: selfd as u8,
            frequent_lane_change: lane as u8,
            motion_sickness: rng.gen_bool(0.3) as u8,
            seat_ordinary: ordinary,
            seat_av: av,
            seat_av_explained: explained,
            reason_av: reason(ordinary, av, rng),
            reason_av_explained: reason(av, explained, rng),
            reason_ordinary_av_explained: reason(ordinary, explained, rng),
        };
        prow.serialize(row)?;
    }
    prow.flush().map_err(|e| FixtureError::Io { path: paths.participants.clone(), source: e })?;

    let mut w = csv::Writer::from_path(&paths.responses)?;
    let mut header = vec!["participant_id".to_string(), "vid".into(), "necessity".into(), "attention".into()];
    header.extend(CONTENT_FORMATS.iter().map(|f| format!("rank_{f}")));
    header.extend(["flag_near_crash".to_string(), "flag_pedestrian".into()]);
    w.write_record(&header)?;
    let noise = Normal::new(0.0, 1.0).expect("valid sd");
    let study: Vec<&Scene> = scenes.iter().take(spec.study_clips).collect();
    for (p, &aggr) in aggressive.iter().enumerate() {
        for s in &study {
            let base = 1.0 + 9.0 * s.base_score - if aggr { 1.0 } else { 0.0 };
            let necessity = (base + noise.sample(rng)).round().clamp(1.0, 10.0);
            let attention = (necessity + 1.2 * noise.sample(rng)).round().clamp(1.0, 10.0);
            // Reason-bearing formats are preferred on average.
            let pref = [3.0, 2.0, 1.0, 0.5];
            let mut order: Vec<(f64, usize)> = pref.iter().enumerate().map(|(i, b)| (b + 1.5 * noise.sample(rng), i)).collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut ranks = [0usize; 4];
            for (r, (_, i)) in order.iter().enumerate() {
                ranks[*i] = r + 1;
            }
            let mut rec = vec![format!("P{:02}", p + 1), s.vid.clone(), necessity.to_string(), attention.to_string()];
            rec.extend(ranks.iter().map(|r| r.to_string()));
            rec.push(((s.kind == ClipKind::Hazard) as u8).to_string());
            rec.push(((s.kind == ClipKind::Hazard && s.family == 0) as u8).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| FixtureError::Io { path: paths.responses.clone(), source: e })?;
    Ok(())
}

/// Writes raw media, the ingested corpus, review flags, annotations and study
/// tables under `root`.
pub fn generate(spec: &FixtureSpec, root: impl AsRef<Path>) -> Result<FixturePaths, FixtureError> {
    if spec.clips < 10 {
        return Err(FixtureError::TooSmall(10));
    }
    let root = root.as_ref().to_path_buf();
    let paths = FixturePaths {
        raw: root.join("raw"),
        manifest: root.join("corpus").join("manifest.json"),
        flags: root.join("flags.csv"),
        annotations: root.join("annotations.csv"),
        participants: root.join("participants.csv"),
        responses: root.join("responses.csv"),
        root: root.clone(),
    };
    io(&paths.raw, fs::create_dir_all(&paths.raw))?;
    let corpus_dir = root.join("corpus");
    let scenes = scenes(spec);
    let mut clips = Vec::with_capacity(scenes.len());
    for scene in &scenes {
        let (video, gaze, rows) = render_raw(scene, spec);
        let vpath = paths.raw.join(format!("{}.xnv", scene.vid));
        let gpath = paths.raw.join(format!("{}.gaze.xnv", scene.vid));
        let tpath = paths.raw.join(format!("{}.telemetry.csv", scene.vid));
        video.write(&vpath)?;
        gaze.write(&gpath)?;
        let mut tw = csv::Writer::from_path(&tpath)?;
        for r in &rows {
            tw.serialize(r)?;
        }
        io(&tpath, tw.flush())?;
        clips.push(ingest_clip(&IngestRequest {
            vid: &scene.vid,
            video: &vpath,
            gaze: Some(&gpath),
            telemetry: &rows,
            out_dir: &corpus_dir,
        })?);
    }
    save_manifest(&Corpus::new(clips, &corpus_dir), &paths.manifest)?;

    let mut rng = clip_rng(spec.seed, "fixture-tables");
    let mut fw = csv::Writer::from_path(&paths.flags)?;
    fw.write_record(["vid", "violation"])?;
    for (k, scene) in scenes.iter().skip(spec.clips).enumerate() {
        let v = Violation::ALL[k % Violation::ALL.len()];
        fw.write_record([scene.vid.as_str(), v.code()])?;
    }
    io(&paths.flags, fw.flush())?;

    let events: Vec<AnnotationEvent> = scenes.iter().flat_map(|s| annotations(s, spec, &mut rng)).collect();
    let f = io(&paths.annotations, fs::File::create(&paths.annotations))?;
    write_annotations_csv(f, &events)?;

    write_study(&scenes, spec, &paths, &mut rng)?;
    Ok(paths)
}

/// Runs review filtering and annotation aggregation over a generated fixture
/// and returns the labeled corpus rooted at the fixture's corpus directory.
pub fn labeled_corpus(paths: &FixturePaths) -> Result<Corpus, FixtureError> {
    let mut corpus = crate::corpus::load_manifest(&paths.manifest)?;
    let flags: Vec<AssumptionFlag> = read_flags_csv(&paths.flags)?;
    let (kept, _) = filter_corpus(&corpus.clips, &flags)?;
    corpus.clips = kept;
    let events = crate::aggregate::read_annotations_csv(&paths.annotations)?;
    let summary = aggregate_all(&events)?;
    apply_labels(&mut corpus, &summary.labels);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaze_follows_hazards_only() {
        let spec = FixtureSpec::small(1);
        let sc = scenes(&spec);
        let mut noise = clip_rng(0, "n");
        for s in &sc[..4] {
            let t = s.onset + 0.5;
            let (_, gaze) = s.render(t, spec.size, &mut noise);
            let (ox, oy, _) = s.object_at(t).unwrap();
            let at_obj = gaze[(oy as usize).min(31) * 32 + (ox as usize).min(31)];
            match s.kind {
                ClipKind::Hazard => assert!(at_obj > 200, "{}", s.vid),
                ClipKind::Distractor => assert!(at_obj < 5, "{}", s.vid),
            }
        }
    }

    #[test]
    fn distance_integrates_speed() {
        let s = &scenes(&FixtureSpec::small(2))[0];
        let dt = 1e-3;
        let numeric: f64 = (0..10_000).map(|k| s.speed((k as f64 + 0.5) * dt) * dt).sum();
        assert!((numeric - s.distance(10.0)).abs() < 1e-6);
    }
}
