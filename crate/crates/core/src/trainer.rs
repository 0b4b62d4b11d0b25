//! Clip-level splitting, full-batch Adam training, ROC-AUC evaluation and the
//! label-threshold sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClipRecord, Corpus, CorpusError};
use crate::media::Video;
use crate::model::{ClipFrames, ModelConfig, ModelError, NecessityModel};
use crate::windows::{build_windows, class_weights, weighted_resample, FrameWindow, LabelingPolicy, WindowError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("need at least {min} labeled clips to split, found {found}")]
    TooFewClips { min: usize, found: usize },
    #[error("stratum {stratum} has {count} clips; at least 2 are needed to split")]
    Stratum { stratum: &'static str, count: usize },
    #[error("{0} windows contain a single class")]
    SingleClass(&'static str),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("AUC needs both classes; got {positives} positives and {negatives} negatives")]
    AucClasses { positives: usize, negatives: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("media for {vid}: {detail}")]
    Media { vid: String, detail: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Smallest corpus [`split_corpus`] accepts.
pub const MIN_SPLIT_CLIPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub p0: f64,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub negatives_per_clip: usize,
    /// Mini-batch size. `None` trains on the full resampled set each epoch.
    pub minibatch: Option<usize>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            p0: 0.6,
            seed: 0,
            epochs: 300,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            split: [0.7, 0.1, 0.2],
            negatives_per_clip: 1,
            minibatch: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.split.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad(format!("split fractions {:?} must be in [0, 1] and sum to 1", self.split));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return bad(format!("p0 {} outside [0, 1]", self.p0));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("learning rate must be positive and Adam decays in [0, 1)".into());
        }
        if self.minibatch == Some(0) {
            return bad("minibatch must be positive".into());
        }
        self.model.validate()?;
        Ok(())
    }

    pub fn policy(&self) -> LabelingPolicy {
        LabelingPolicy { p0: self.p0, negatives_per_clip: self.negatives_per_clip, seed: self.seed }
    }

    /// Model configuration with the run seed applied to initialization.
    pub fn seeded_model(&self) -> ModelConfig {
        ModelConfig { init_seed: self.seed, ..self.model.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn part(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Split sizes: floor for train and validation, remainder to test.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> (usize, usize, usize) {
    let train = (n as f64 * fractions[0] + 1e-9).floor() as usize;
    let val = ((n as f64 * fractions[1] + 1e-9).floor() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Stratified clip split. Each stratum (necessity at or above `p0`, below
/// `p0`) is shuffled, the strata are interleaved by fractional position so
/// every prefix keeps the class ratio, and the sequence is cut by
/// [`split_sizes`]. Unlabeled clips are ignored.
pub fn split_corpus(clips: &[ClipRecord], p0: f64, fractions: [f64; 3], seed: u64) -> Result<Split, TrainError> {
    let labeled: Vec<&ClipRecord> = clips.iter().filter(|c| c.is_labeled()).collect();
    if labeled.len() < MIN_SPLIT_CLIPS {
        return Err(TrainError::TooFewClips { min: MIN_SPLIT_CLIPS, found: labeled.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: Vec<(&'static str, Vec<String>)> = vec![("positive", vec![]), ("negative", vec![])];
    for c in &labeled {
        let s = if c.necessity_score.unwrap_or(0.0) >= p0 { 0 } else { 1 };
        strata[s].1.push(c.vid.clone());
    }
    let mut keyed: Vec<(f64, usize, String)> = Vec::with_capacity(labeled.len());
    for (tag, (name, vids)) in strata.iter_mut().enumerate() {
        if vids.len() < 2 {
            return Err(TrainError::Stratum { stratum: name, count: vids.len() });
        }
        vids.sort();
        vids.shuffle(&mut rng);
        let m = vids.len() as f64;
        for (i, v) in vids.iter().enumerate() {
            keyed.push(((i as f64 + 0.5) / m, tag, v.clone()));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (ntr, nva, _) = split_sizes(keyed.len(), fractions);
    let mut it = keyed.into_iter().map(|k| k.2);
    let train = it.by_ref().take(ntr).collect();
    let val = it.by_ref().take(nva).collect();
    let test = it.collect();
    Ok(Split { train, val, test })
}

/// Mann-Whitney AUC: P(s+ > s-) + P(s+ = s-)/2, computed by sorting.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, TrainError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(TrainError::NonFiniteScore(i));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(TrainError::AucClasses { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the U statistic, kept integral so ties are exact.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += p * (2 * neg_below + q);
        neg_below += q;
        i = j;
    }
    Ok(twice_u as f64 / (2 * positives as u128 * negatives as u128) as f64)
}

/// Seeded i.i.d. uniform scores: the random-guess baseline.
pub fn uniform_baseline(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba5e_11e5);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Every window scored 0.5; its AUC is exactly one half.
pub fn constant_baseline(n: usize) -> Vec<f64> {
    vec![0.5; n]
}

/// Decoded windows of one split.
pub struct WindowSet {
    pub clips: Vec<ClipFrames>,
    pub items: Vec<(usize, usize)>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
    pub windows: Vec<FrameWindow>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// Loads the media behind `windows` once per clip.
    pub fn load(model: &NecessityModel, corpus: &Corpus, windows: Vec<FrameWindow>) -> Result<Self, TrainError> {
        let vids: BTreeSet<&str> = windows.iter().map(|w| w.vid.as_str()).collect();
        let vids: Vec<&str> = vids.into_iter().collect();
        let clips: Vec<ClipFrames> = vids
            .par_iter()
            .map(|vid| load_clip(model, corpus, vid))
            .collect::<Result<_, _>>()?;
        let index: BTreeMap<&str, usize> = vids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let items = windows.iter().map(|w| (index[w.vid.as_str()], w.end_frame)).collect();
        let labels = windows.iter().map(|w| w.label).collect();
        let weights = class_weights(&windows).unwrap_or_else(|_| vec![1.0 / windows.len().max(1) as f64; windows.len()]);
        Ok(Self { clips, items, labels, weights, windows })
    }

    pub fn float_labels(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }
}

/// Reads a clip's video and gaze from the corpus and prepares it for `model`.
pub fn load_clip(model: &NecessityModel, corpus: &Corpus, vid: &str) -> Result<ClipFrames, TrainError> {
    let rec = corpus.get(vid).ok_or_else(|| TrainError::Media { vid: vid.into(), detail: "not in corpus".into() })?;
    let media = |e: crate::media::MediaError| TrainError::Media { vid: vid.into(), detail: e.to_string() };
    let video = Video::read(corpus.resolve(&rec.video_path)).map_err(media)?;
    let gaze = match &rec.gazemap_path {
        Some(p) => Some(Video::read(corpus.resolve(p)).map_err(media)?),
        None => None,
    };
    Ok(model.prepare_clip(vid, &video, gaze.as_ref(), &rec.speed)?)
}

/// Windows for the clips named in `vids`.
pub fn split_windows(corpus: &Corpus, vids: &[String], policy: &LabelingPolicy) -> Result<Vec<FrameWindow>, TrainError> {
    let wanted: BTreeSet<&str> = vids.iter().map(String::as_str).collect();
    let clips: Vec<ClipRecord> = corpus.clips.iter().filter(|c| wanted.contains(c.vid.as_str())).cloned().collect();
    Ok(build_windows(&clips, policy)?)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &NecessityModel) -> Self {
        let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        Self { m: shapes.iter().map(|&n| vec![0.0; n]).collect(), v: shapes.iter().map(|&n| vec![0.0; n]).collect(), t: 0 }
    }

    fn step(&mut self, model: &mut NecessityModel, grad: &NecessityModel, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let range = model.trainable_tensor_range();
        let grads = grad.tensors();
        let mut params = model.tensors_mut();
        for ti in range {
            let (p, g) = (&mut params[ti], grads[ti]);
            let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
            for k in 0..p.len() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                p[k] -= cfg.learning_rate * (m[k] / bc1) / ((v[k] / bc2).sqrt() + cfg.adam_eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    ValidationAuc,
    /// Validation windows were single-class, so AUC is undefined.
    ValidationLoss,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NecessityModel,
    pub loss_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub selection: Selection,
}

/// Mean BCE of evaluation-mode probabilities.
pub fn eval_loss(scores: &[f64], labels: &[u8]) -> f64 {
    let eps = 1e-12;
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| if y == 1 { -(s.max(eps)).ln() } else { -((1.0 - s).max(eps)).ln() })
        .sum::<f64>()
        / scores.len().max(1) as f64
}

/// Trains from `model`, resampling the training windows by class weight each
/// epoch, and returns the parameters from the epoch with the best validation
/// metric. With zero epochs the input model is returned unchanged.
pub fn train(config: &TrainConfig, mut model: NecessityModel, train: &WindowSet, val: &WindowSet) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if !train.has_both_classes() {
        return Err(TrainError::SingleClass("training"));
    }
    let selection = if val.has_both_classes() { Selection::ValidationAuc } else { Selection::ValidationLoss };
    if selection == Selection::ValidationLoss {
        log::warn!("validation windows are single-class; selecting by validation loss");
    }
    if config.minibatch.is_some() {
        log::warn!("mini-batch training deviates from the full-batch protocol");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7a1_0000);
    let mut adam = Adam::new(&model);
    let labels = train.float_labels();
    let mut best = model.clone();
    let mut best_metric = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut best_epoch = None;
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut val_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let drawn = weighted_resample(&train.weights, train.len(), &mut rng);
        let batch = config.minibatch.unwrap_or(drawn.len()).max(1);
        let mut epoch_loss = 0.0;
        for chunk in drawn.chunks(batch) {
            let items: Vec<(usize, usize)> = chunk.iter().map(|&i| train.items[i]).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let out = model.train_step(&train.clips, &items, &ys, &mut rng).map_err(|e| match e {
                ModelError::NonFinite(what) => TrainError::Diverged { epoch, detail: format!("non-finite {what}") },
                other => other.into(),
            })?;
            epoch_loss += out.loss * chunk.len() as f64;
            adam.step(&mut model, &out.grad, config);
        }
        let epoch_loss = epoch_loss / drawn.len() as f64;
        if !epoch_loss.is_finite() || model.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(TrainError::Diverged { epoch, detail: format!("loss {epoch_loss}") });
        }
        loss_curve.push(epoch_loss);
        let scores = model.score_windows(&val.clips, &val.items)?;
        let loss = eval_loss(&scores, &val.labels);
        // Equal validation AUCs are broken by the lower validation loss.
        let metric = match selection {
            Selection::ValidationAuc => (roc_auc(&scores, &val.labels)?, -loss),
            Selection::ValidationLoss => (-loss, 0.0),
        };
        val_curve.push(metric.0);
        log::debug!("epoch {epoch}: loss {epoch_loss:.5} val {:.5}", metric.0);
        if metric.0 > best_metric.0 || (metric.0 == best_metric.0 && metric.1 > best_metric.1) {
            best_metric = metric;
            best = model.clone();
            best_epoch = Some(epoch);
        }
    }
    Ok(TrainOutcome { model: best, loss_curve, val_curve, best_epoch, selection })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub p0: f64,
    pub auc_model: f64,
    pub auc_baseline: f64,
    pub n_test: usize,
    pub seed: u64,
}

/// Model and uniform-baseline AUC on the same windows.
pub fn evaluate(model: &NecessityModel, set: &WindowSet, p0: f64, seed: u64) -> Result<EvalResult, TrainError> {
    let scores = model.score_windows(&set.clips, &set.items)?;
    let auc_model = roc_auc(&scores, &set.labels)?;
    let auc_baseline = roc_auc(&uniform_baseline(set.len(), seed), &set.labels)?;
    Ok(EvalResult { p0, auc_model, auc_baseline, n_test: set.len(), seed })
}

pub fn write_eval_csv(results: &[EvalResult], path: impl AsRef<Path>) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_csv(path: impl AsRef<Path>) -> Result<Vec<EvalResult>, TrainError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Everything a single train/eval run produces.
pub struct RunOutput {
    pub split: Split,
    pub outcome: TrainOutcome,
    pub eval: EvalResult,
    /// Evaluation-mode AUC of the selected model on its own training windows.
    pub train_auc: f64,
}

/// Split, window, train and evaluate at `config.p0`.
pub fn run(corpus: &Corpus, config: &TrainConfig) -> Result<RunOutput, TrainError> {
    config.validate()?;
    let split = split_corpus(&corpus.clips, config.p0, config.split, config.seed)?;
    let policy = config.policy();
    let init = NecessityModel::new(config.seeded_model())?;
    let load = |vids: &[String]| -> Result<WindowSet, TrainError> {
        WindowSet::load(&init, corpus, split_windows(corpus, vids, &policy)?)
    };
    let train_set = load(&split.train)?;
    let val_set = load(&split.val)?;
    let test_set = load(&split.test)?;
    if !test_set.has_both_classes() {
        return Err(TrainError::SingleClass("test"));
    }
    log::info!(
        "p0 {}: {} train, {} val, {} test windows",
        config.p0,
        train_set.len(),
        val_set.len(),
        test_set.len()
    );
    let outcome = train(config, init, &train_set, &val_set)?;
    let eval = evaluate(&outcome.model, &test_set, config.p0, config.seed)?;
    let train_auc = roc_auc(&outcome.model.score_windows(&train_set.clips, &train_set.items)?, &train_set.labels)?;
    Ok(RunOutput { split, outcome, eval, train_auc })
}

/// One full run per `p0`. A threshold that leaves a split single-class is
/// skipped with a warning.
pub fn threshold_sweep(corpus: &Corpus, p0s: &[f64], config: &TrainConfig) -> Result<Vec<EvalResult>, TrainError> {
    let mut out = Vec::new();
    for &p0 in p0s {
        let cfg = TrainConfig { p0, ..config.clone() };
        match run(corpus, &cfg) {
            Ok(r) => out.push(r.eval),
            Err(e @ (TrainError::SingleClass(_) | TrainError::Stratum { .. } | TrainError::Window(WindowError::SingleClass(_)))) => {
                log::warn!("skipping p0 {p0}: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Interval;

    fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&constant_baseline(7), &[0, 1, 0, 1, 1, 0, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[0, 1]).is_err());
    }

    #[test]
    fn auc_matches_pairwise_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s: Vec<f64> = (0..30).map(|_| (rng.gen_range(0..8) as f64) / 4.0).collect();
            let mut y: Vec<u8> = (0..30).map(|_| rng.gen_range(0..2)).collect();
            y[0] = 0;
            y[1] = 1;
            assert_eq!(roc_auc(&s, &y).unwrap(), brute_auc(&s, &y));
        }
    }

    fn clip(vid: &str, score: f64) -> ClipRecord {
        ClipRecord {
            vid: vid.into(),
            video_path: format!("{vid}.xnv").into(),
            gazemap_path: None,
            speed: vec![1.0; 100],
            course: vec![0.0; 100],
            message: None,
            necessity_score: Some(score),
            explanation_interval: Some(Interval::new(5.0, 6.0)),
        }
    }

    #[test]
    fn split_sizes_follow_floor_convention() {
        assert_eq!(split_sizes(1103, [0.7, 0.1, 0.2]), (772, 110, 221));
        assert_eq!(split_sizes(10, [0.7, 0.1, 0.2]), (7, 1, 2));
    }

    #[test]
    fn split_is_a_seeded_stratified_partition() {
        let clips: Vec<ClipRecord> = (0..40).map(|i| clip(&format!("v{i:02}"), if i % 4 == 0 { 0.9 } else { 0.2 })).collect();
        let a = split_corpus(&clips, 0.6, [0.7, 0.1, 0.2], 5).unwrap();
        assert_eq!(a, split_corpus(&clips, 0.6, [0.7, 0.1, 0.2], 5).unwrap());
        let mut all: Vec<String> = a.train.iter().chain(&a.val).chain(&a.test).cloned().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 40);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (28, 4, 8));
        let pos = |v: &[String]| v.iter().filter(|x| x[1..].parse::<usize>().unwrap() % 4 == 0).count();
        assert_eq!(pos(&a.test), 2);
        assert_eq!(pos(&a.train), 7);
        assert!(matches!(split_corpus(&clips[..5], 0.6, [0.7, 0.1, 0.2], 5), Err(TrainError::TooFewClips { .. })));
        let one_pos: Vec<ClipRecord> = (0..12).map(|i| clip(&format!("w{i}"), if i == 0 { 0.9 } else { 0.1 })).collect();
        assert!(matches!(split_corpus(&one_pos, 0.6, [0.7, 0.1, 0.2], 5), Err(TrainError::Stratum { .. })));
    }

    #[test]
    fn uniform_baseline_is_reproducible() {
        assert_eq!(uniform_baseline(5, 3), uniform_baseline(5, 3));
        assert_ne!(uniform_baseline(5, 3), uniform_baseline(5, 4));
    }
}
