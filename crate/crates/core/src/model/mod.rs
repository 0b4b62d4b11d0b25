//! Window classifier: gaze-gated frame features, a convolutional GRU over the
//! window, a small convolution stack on the terminal state, and a fully
//! connected head fed with the flattened features and terminal acceleration.

pub mod backbone;
pub mod checkpoint;
pub mod head;
pub mod layers;
pub mod recurrent;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::media::Video;
use crate::windows::{acceleration, WINDOW_LEN};
use backbone::{backbone_backward, filter_bank, foveal_encode, gaze_gate, preprocess, BANK_CHANNELS};
use head::{bce_with_logits, DropoutMode, Head};
use layers::{sigmoid, Conv2d, FeatureMap, Linear};
use recurrent::{ConvGru, GruStep};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("window ending at frame {end} needs {len} frames of history")]
    Window { end: usize, len: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Backbone features weighted by the recorded gaze map.
    Foveal,
    /// Backbone features alone.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialTransform {
    Flatten,
    /// Attention-weighted sum over grid cells; loses the spatial layout.
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_size: usize,
    pub pool: usize,
    pub encoder: EncoderKind,
    pub trainable_backbone: bool,
    pub hidden_channels: usize,
    pub kernel: usize,
    pub stack_channels: Vec<usize>,
    pub spatial: SpatialTransform,
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
    pub threshold: f64,
    pub window_len: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 32,
            pool: 8,
            encoder: EncoderKind::Foveal,
            trainable_backbone: false,
            hidden_channels: 8,
            kernel: 3,
            stack_channels: vec![8],
            spatial: SpatialTransform::Flatten,
            head_hidden: vec![32, 16],
            dropout: 0.7,
            threshold: 0.5,
            window_len: WINDOW_LEN,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn grid(&self) -> usize {
        self.input_size / self.pool
    }

    fn terminal_channels(&self) -> usize {
        *self.stack_channels.last().unwrap_or(&self.hidden_channels)
    }

    /// Length of the flattened visual feature `v_N`.
    pub fn feature_len(&self) -> usize {
        match self.spatial {
            SpatialTransform::Flatten => self.terminal_channels() * self.grid() * self.grid(),
            SpatialTransform::WeightedSum => self.terminal_channels(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.pool == 0 || self.input_size == 0 || !self.input_size.is_multiple_of(self.pool) {
            return bad(format!("input_size {} must be a positive multiple of pool {}", self.input_size, self.pool));
        }
        if self.kernel.is_multiple_of(2) {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        if self.hidden_channels == 0 || self.stack_channels.contains(&0) || self.head_hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ModelError::Threshold(self.threshold));
        }
        if self.window_len == 0 {
            return bad("window_len must be positive".into());
        }
        Ok(())
    }
}

/// Decoded frames of one clip, ready for windowed scoring.
#[derive(Debug, Clone)]
pub struct ClipFrames {
    pub vid: String,
    /// Gated backbone features per frame; empty when the backbone trains.
    pub features: Vec<FeatureMap>,
    /// Preprocessed images; only kept when the backbone trains.
    pub images: Vec<FeatureMap>,
    pub gates: Vec<Vec<f64>>,
    pub speed: Vec<f64>,
}

impl ClipFrames {
    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Explain,
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NecessityDecision {
    pub score: f64,
    pub decision: Decision,
    pub threshold: f64,
}

/// Explain iff `score >= sigma`; a tie explains.
pub fn decide(score: f64, sigma: f64) -> Result<NecessityDecision, ModelError> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(ModelError::Threshold(sigma));
    }
    let decision = if score >= sigma { Decision::Explain } else { Decision::Silent };
    Ok(NecessityDecision { score, decision, threshold: sigma })
}

/// Inverse of flattening a CHW map.
pub fn unflatten(v: &[f64], channels: usize, height: usize, width: usize) -> Result<FeatureMap, ModelError> {
    if v.len() != channels * height * width {
        return Err(ModelError::Shape(format!("{} values cannot fill {channels}x{height}x{width}", v.len())));
    }
    Ok(FeatureMap::from_vec(channels, height, width, v.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityModel {
    pub config: ModelConfig,
    pub backbone: Conv2d,
    pub gru: ConvGru,
    pub stack: Vec<Conv2d>,
    /// Scores grid cells for the weighted-sum transform; unused by flatten.
    pub attention: Linear,
    pub head: Head,
}

/// Activations of one window kept for the backward pass.
pub struct WindowCache {
    steps: Vec<GruStep>,
    stack_inputs: Vec<FeatureMap>,
    stack_outputs: Vec<FeatureMap>,
    terminal: FeatureMap,
    alpha: Vec<f64>,
}

/// Loss and parameter gradient of one optimization step.
pub struct StepOutput {
    pub loss: f64,
    pub grad: NecessityModel,
}

impl NecessityModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let gru = ConvGru::init(BANK_CHANNELS, config.hidden_channels, config.kernel, &mut rng);
        let mut stack = Vec::new();
        let mut prev = config.hidden_channels;
        for &c in &config.stack_channels {
            stack.push(Conv2d::init(prev, c, config.kernel, &mut rng));
            prev = c;
        }
        let attention = Linear::init(prev, 1, &mut rng);
        let head = Head::init(config.feature_len() + 1, &config.head_hidden, config.dropout, &mut rng);
        Ok(Self { backbone: filter_bank(), gru, stack, attention, head, config })
    }

    /// Same architecture with an all-zero head, whose output is exactly 0.5.
    pub fn with_zero_head(mut self) -> Self {
        self.head = Head::zero_init(self.config.feature_len() + 1, &self.config.head_hidden, self.config.dropout);
        self
    }

    /// Gradient container with the same layout and all entries zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Every stored tensor in a fixed order: trainable parameters first,
    /// then batch-norm running statistics.
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut v = vec![&self.backbone.weight, &self.backbone.bias];
        v.extend(self.param_tail());
        for bn in &self.head.norms {
            v.push(&bn.running_mean);
            v.push(&bn.running_var);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = vec![&mut self.backbone.weight, &mut self.backbone.bias];
        v.push(&mut self.gru.gates.weight);
        v.push(&mut self.gru.gates.bias);
        v.push(&mut self.gru.candidate.weight);
        v.push(&mut self.gru.candidate.bias);
        for c in &mut self.stack {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        v.push(&mut self.attention.weight);
        v.push(&mut self.attention.bias);
        for l in &mut self.head.hidden {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        let mut running = Vec::new();
        for bn in &mut self.head.norms {
            v.push(&mut bn.gamma);
            v.push(&mut bn.beta);
            running.push(&mut bn.running_mean);
            running.push(&mut bn.running_var);
        }
        v.push(&mut self.head.output.weight);
        v.push(&mut self.head.output.bias);
        v.extend(running);
        v
    }

    fn param_tail(&self) -> Vec<&Vec<f64>> {
        let mut v = vec![&self.gru.gates.weight, &self.gru.gates.bias, &self.gru.candidate.weight, &self.gru.candidate.bias];
        for c in &self.stack {
            v.push(&c.weight);
            v.push(&c.bias);
        }
        v.push(&self.attention.weight);
        v.push(&self.attention.bias);
        for l in &self.head.hidden {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        for bn in &self.head.norms {
            v.push(&bn.gamma);
            v.push(&bn.beta);
        }
        v.push(&self.head.output.weight);
        v.push(&self.head.output.bias);
        v
    }

    /// Number of leading entries of [`Self::tensors`] that the optimizer updates.
    pub fn trainable_tensor_range(&self) -> std::ops::Range<usize> {
        let total = 2 + self.param_tail().len();
        if self.config.trainable_backbone {
            0..total
        } else {
            2..total
        }
    }

    pub fn parameter_count(&self) -> usize {
        let t = self.tensors();
        self.trainable_tensor_range().map(|i| t[i].len()).sum()
    }

    /// Adds `other`'s tensors into `self`, entry by entry.
    pub fn accumulate(&mut self, other: &NecessityModel) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Decodes a clip's frames and gaze for this model. A missing gaze video
    /// or the plain encoder uses a uniform gate.
    pub fn prepare_clip(&self, vid: &str, video: &Video, gaze: Option<&Video>, speed: &[f64]) -> Result<ClipFrames, ModelError> {
        let n = video.len();
        if n != speed.len() {
            return Err(ModelError::Shape(format!("{vid}: {n} frames but {} speed samples", speed.len())));
        }
        if let Some(g) = gaze {
            if g.len() != n {
                return Err(ModelError::Shape(format!("{vid}: {n} frames but {} gaze frames", g.len())));
            }
        }
        let cfg = &self.config;
        let grid = cfg.grid();
        let geo = video.geometry;
        let (w, h, c) = (geo.width as usize, geo.height as usize, geo.channels as usize);
        let images: Vec<FeatureMap> = video.frames.par_iter().map(|f| preprocess(f, w, h, c, cfg.input_size)).collect();
        let gates: Vec<Vec<f64>> = match (cfg.encoder, gaze) {
            (EncoderKind::Foveal, Some(g)) => {
                let gg = g.geometry;
                g.frames
                    .par_iter()
                    .map(|f| gaze_gate(f, gg.width as usize, gg.height as usize, gg.channels as usize, grid))
                    .collect()
            }
            _ => vec![vec![1.0; grid * grid]; n],
        };
        let clip = if cfg.trainable_backbone {
            ClipFrames { vid: vid.into(), features: vec![], images, gates, speed: speed.to_vec() }
        } else {
            let features = images
                .par_iter()
                .zip(&gates)
                .map(|(img, gate)| foveal_encode(&self.backbone, img, gate, cfg.pool))
                .collect();
            ClipFrames { vid: vid.into(), features, images: vec![], gates, speed: speed.to_vec() }
        };
        Ok(clip)
    }

    fn window_inputs(&self, clip: &ClipFrames, end: usize) -> Result<Vec<FeatureMap>, ModelError> {
        let len = self.config.window_len;
        if end + 1 < len || end >= clip.len() {
            return Err(ModelError::Window { end, len });
        }
        let range = end + 1 - len..=end;
        Ok(if self.config.trainable_backbone {
            range
                .map(|t| foveal_encode(&self.backbone, &clip.images[t], &clip.gates[t], self.config.pool))
                .collect()
        } else {
            clip.features[range].to_vec()
        })
    }

    /// Recurrent encoding of a window of frame features; returns the
    /// terminal spatio-temporal map `v_N^s`.
    pub fn temporal_encode(&self, frames: &[FeatureMap]) -> Result<FeatureMap, ModelError> {
        if frames.len() != self.config.window_len {
            return Err(ModelError::Shape(format!("window has {} frames, expected {}", frames.len(), self.config.window_len)));
        }
        let shape = frames[0].shape();
        let grid = self.config.grid();
        if shape != (BANK_CHANNELS, grid, grid) || frames.iter().any(|f| f.shape() != shape) {
            return Err(ModelError::Shape(format!("frame features must all be {BANK_CHANNELS}x{grid}x{grid}")));
        }
        let mut h = self.gru.run(frames);
        for conv in &self.stack {
            h = conv.forward(&h);
            h.data.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(h)
    }

    /// Spatial reduction of `v_N^s` to the head's visual input `v_N`.
    pub fn spatial(&self, vs: &FeatureMap) -> Vec<f64> {
        match self.config.spatial {
            SpatialTransform::Flatten => vs.data.clone(),
            SpatialTransform::WeightedSum => attend(&self.attention, vs).0,
        }
    }

    fn encode_cached(&self, clip: &ClipFrames, end: usize) -> Result<(Vec<f64>, WindowCache), ModelError> {
        let inputs = self.window_inputs(clip, end)?;
        let (mut h, steps) = self.gru.run_cached(&inputs);
        let mut stack_inputs = Vec::new();
        let mut stack_outputs = Vec::new();
        for conv in &self.stack {
            let mut o = conv.forward(&h);
            o.data.iter_mut().for_each(|v| *v = v.max(0.0));
            stack_inputs.push(std::mem::replace(&mut h, o.clone()));
            stack_outputs.push(o);
        }
        let (v, alpha) = match self.config.spatial {
            SpatialTransform::Flatten => (h.data.clone(), vec![]),
            SpatialTransform::WeightedSum => attend(&self.attention, &h),
        };
        Ok((v, WindowCache { steps, stack_inputs, stack_outputs, terminal: h, alpha }))
    }

    fn encode_backward(&self, clip: &ClipFrames, end: usize, cache: &WindowCache, dv: &[f64], grad: &mut NecessityModel) {
        let grid = self.config.grid();
        let mut d = match self.config.spatial {
            SpatialTransform::Flatten => FeatureMap::from_vec(self.config.terminal_channels(), grid, grid, dv.to_vec()),
            SpatialTransform::WeightedSum => attend_backward(&self.attention, &cache.terminal, &cache.alpha, dv, &mut grad.attention),
        };
        for (l, conv) in self.stack.iter().enumerate().rev() {
            for (g, o) in d.data.iter_mut().zip(&cache.stack_outputs[l].data) {
                if *o <= 0.0 {
                    *g = 0.0;
                }
            }
            d = conv.backward(&cache.stack_inputs[l], &d, &mut grad.stack[l]);
        }
        let want_inputs = self.config.trainable_backbone;
        let dxs = self.gru.backward(&cache.steps, &d, &mut grad.gru, want_inputs);
        if want_inputs {
            let start = end + 1 - self.config.window_len;
            for (k, dx) in dxs.iter().enumerate() {
                let t = start + k;
                backbone_backward(&self.backbone, &clip.images[t], &clip.gates[t], self.config.pool, dx, &mut grad.backbone);
            }
        }
    }

    /// Head input: visual features followed by terminal acceleration.
    fn head_row(v: &[f64], accel: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(v.len() + 1);
        row.extend_from_slice(v);
        row.push(accel);
        row
    }

    /// Evaluation-mode score of one window `(end - len, end]`.
    pub fn score(&self, clip: &ClipFrames, end: usize) -> Result<f64, ModelError> {
        let inputs = self.window_inputs(clip, end)?;
        let vs = self.temporal_encode(&inputs)?;
        self.head_score(&self.spatial(&vs), acceleration(&clip.speed, end))
    }

    /// Evaluation-mode head on an explicit `(v_N, a_N)` pair.
    pub fn head_score(&self, v: &[f64], accel: f64) -> Result<f64, ModelError> {
        if v.len() != self.config.feature_len() {
            return Err(ModelError::Shape(format!("v_N has {} entries, expected {}", v.len(), self.config.feature_len())));
        }
        if !accel.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("head input"));
        }
        Ok(sigmoid(self.head.forward_eval(&Self::head_row(v, accel), 1)[0]))
    }

    /// Scores `(clip index, end frame)` pairs in parallel; order is preserved.
    pub fn score_windows(&self, clips: &[ClipFrames], items: &[(usize, usize)]) -> Result<Vec<f64>, ModelError> {
        items.par_iter().map(|&(c, e)| self.score(&clips[c], e)).collect()
    }

    pub fn decide(&self, clip: &ClipFrames, end: usize, sigma: f64) -> Result<NecessityDecision, ModelError> {
        decide(self.score(clip, end)?, sigma)
    }

    /// One full-batch training step: forward in training mode, mean BCE, and
    /// gradients for every tensor. Batch-norm running statistics advance.
    pub fn train_step<R: Rng>(
        &mut self,
        clips: &[ClipFrames],
        items: &[(usize, usize)],
        labels: &[f64],
        rng: &mut R,
    ) -> Result<StepOutput, ModelError> {
        let n = items.len();
        if n == 0 || labels.len() != n {
            return Err(ModelError::Shape(format!("{n} windows but {} labels", labels.len())));
        }
        let encoded: Vec<(Vec<f64>, WindowCache)> = items
            .par_iter()
            .map(|&(c, e)| self.encode_cached(&clips[c], e))
            .collect::<Result<_, _>>()?;
        let d = self.config.feature_len() + 1;
        let mut x = Vec::with_capacity(n * d);
        for (&(c, e), (v, _)) in items.iter().zip(&encoded) {
            x.extend(Self::head_row(v, acceleration(&clips[c].speed, e)));
        }
        let (logits, head_cache) = self.head.forward_train(&x, n, DropoutMode::Sample(rng), true);
        let (loss, dlogits) = bce_with_logits(&logits, labels);
        if !loss.is_finite() {
            return Err(ModelError::NonFinite("training loss"));
        }
        let mut grad = self.zeros_like();
        let dx = self.head.backward(&head_cache, &dlogits, &mut grad.head);
        let this = &*self;
        let partial: Vec<NecessityModel> = items
            .par_iter()
            .enumerate()
            .map(|(b, &(c, e))| {
                let mut g = this.zeros_like();
                let dv = &dx[b * d..(b + 1) * d - 1];
                this.encode_backward(&clips[c], e, &encoded[b].1, dv, &mut g);
                g
            })
            .collect();
        // Summed in window order so the result does not depend on scheduling.
        for g in &partial {
            grad.accumulate(g);
        }
        Ok(StepOutput { loss, grad })
    }
}

/// Softmax attention over grid cells: returns the pooled channel vector and
/// the cell weights.
fn attend(att: &Linear, vs: &FeatureMap) -> (Vec<f64>, Vec<f64>) {
    let (c, p) = (vs.channels, vs.plane());
    let scores: Vec<f64> = (0..p)
        .map(|loc| att.bias[0] + (0..c).map(|ch| att.weight[ch] * vs.data[ch * p + loc]).sum::<f64>())
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let alpha: Vec<f64> = e.iter().map(|v| v / z).collect();
    let out = (0..c).map(|ch| (0..p).map(|loc| alpha[loc] * vs.data[ch * p + loc]).sum()).collect();
    (out, alpha)
}

fn attend_backward(att: &Linear, vs: &FeatureMap, alpha: &[f64], dout: &[f64], grad: &mut Linear) -> FeatureMap {
    let (c, p) = (vs.channels, vs.plane());
    let dalpha: Vec<f64> = (0..p).map(|loc| (0..c).map(|ch| dout[ch] * vs.data[ch * p + loc]).sum()).collect();
    let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
    let ds: Vec<f64> = alpha.iter().zip(&dalpha).map(|(a, d)| a * (d - mean)).collect();
    let mut dvs = FeatureMap::zeros(c, vs.height, vs.width);
    for ch in 0..c {
        for loc in 0..p {
            dvs.data[ch * p + loc] = alpha[loc] * dout[ch] + ds[loc] * att.weight[ch];
            grad.weight[ch] += ds[loc] * vs.data[ch * p + loc];
        }
    }
    grad.bias[0] += ds.iter().sum::<f64>();
    dvs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig { window_len: 4, hidden_channels: 3, stack_channels: vec![2], head_hidden: vec![5, 3], init_seed: 9, ..Default::default() }
    }

    fn random_clip(model: &NecessityModel, frames: usize, seed: u64) -> ClipFrames {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = model.config.grid();
        ClipFrames {
            vid: format!("c{seed}"),
            features: (0..frames)
                .map(|_| FeatureMap::from_vec(BANK_CHANNELS, g, g, (0..BANK_CHANNELS * g * g).map(|_| rng.gen_range(0.0..1.0)).collect()))
                .collect(),
            images: vec![],
            gates: vec![vec![1.0; g * g]; frames],
            speed: (0..frames).map(|_| rng.gen_range(5.0..15.0)).collect(),
        }
    }

    #[test]
    fn decisions_follow_threshold() {
        assert_eq!(decide(0.8, 0.7).unwrap().decision, Decision::Explain);
        assert_eq!(decide(0.8, 0.9).unwrap().decision, Decision::Silent);
        assert_eq!(decide(0.5, 0.5).unwrap().decision, Decision::Explain);
        assert!(decide(0.5, 1.5).is_err());
    }

    #[test]
    fn zero_head_scores_one_half() {
        let m = NecessityModel::new(small_config()).unwrap().with_zero_head();
        let clip = random_clip(&m, 6, 1);
        assert_eq!(m.score(&clip, 5).unwrap(), 0.5);
    }

    #[test]
    fn window_length_is_enforced() {
        let m = NecessityModel::new(small_config()).unwrap();
        let clip = random_clip(&m, 6, 1);
        assert!(matches!(m.score(&clip, 2), Err(ModelError::Window { .. })));
        assert!(m.temporal_encode(&clip.features[..3]).is_err());
    }

    #[test]
    fn history_changes_the_output() {
        let m = NecessityModel::new(small_config()).unwrap();
        let a = random_clip(&m, 4, 2);
        let mut b = a.clone();
        b.features[0].data.iter_mut().for_each(|v| *v += 0.5);
        assert_ne!(m.temporal_encode(&a.features).unwrap(), m.temporal_encode(&b.features).unwrap());
        let zero = vec![FeatureMap::zeros(BANK_CHANNELS, 4, 4); 4];
        assert_eq!(m.temporal_encode(&zero).unwrap(), m.temporal_encode(&zero).unwrap());
    }

    #[test]
    fn flatten_is_invertible() {
        let m = NecessityModel::new(small_config()).unwrap();
        let clip = random_clip(&m, 4, 3);
        let vs = m.temporal_encode(&clip.features).unwrap();
        let v = m.spatial(&vs);
        assert_eq!(v.len(), m.config.feature_len());
        assert_eq!(unflatten(&v, vs.channels, vs.height, vs.width).unwrap(), vs);
    }

    fn random_image_clip(model: &NecessityModel, frames: usize, seed: u64) -> ClipFrames {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, g) = (model.config.input_size, model.config.grid());
        ClipFrames {
            vid: format!("i{seed}"),
            features: vec![],
            images: (0..frames)
                .map(|_| FeatureMap::from_vec(3, s, s, (0..3 * s * s).map(|_| rng.gen_range(0.0..1.0)).collect()))
                .collect(),
            gates: (0..frames).map(|_| (0..g * g).map(|_| rng.gen_range(0.0..2.0)).collect()).collect(),
            speed: (0..frames).map(|_| rng.gen_range(5.0..15.0)).collect(),
        }
    }

    /// Full-model gradients against central differences with dropout off.
    fn check_gradients(config: ModelConfig) {
        let mut model = NecessityModel::new(ModelConfig { dropout: 0.0, ..config }).unwrap();
        let clips: Vec<ClipFrames> = (0..3)
            .map(|s| if model.config.trainable_backbone { random_image_clip(&model, 6, 10 + s) } else { random_clip(&model, 6, 10 + s) })
            .collect();
        let items = [(0, 3), (1, 5), (2, 4), (0, 5)];
        let labels = [1.0, 0.0, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let loss_at = |m: &NecessityModel| {
            let mut m = m.clone();
            m.train_step(&clips, &items, &labels, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().loss
        };
        let grad = model.clone().train_step(&clips, &items, &labels, &mut rng).unwrap().grad;
        let range = model.trainable_tensor_range();
        let eps = 1e-5;
        for ti in range {
            let len = model.tensors()[ti].len();
            for idx in (0..len).step_by(len / 6 + 1) {
                let orig = model.tensors()[ti][idx];
                model.tensors_mut()[ti][idx] = orig + eps;
                let lp = loss_at(&model);
                model.tensors_mut()[ti][idx] = orig - eps;
                let lm = loss_at(&model);
                model.tensors_mut()[ti][idx] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let an = grad.tensors()[ti][idx];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "tensor {ti}[{idx}]: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        check_gradients(small_config());
    }

    #[test]
    fn weighted_sum_gradients_match_finite_differences() {
        check_gradients(ModelConfig { spatial: SpatialTransform::WeightedSum, ..small_config() });
    }

    #[test]
    fn trainable_backbone_gradients_match_finite_differences() {
        check_gradients(ModelConfig { trainable_backbone: true, input_size: 8, pool: 2, ..small_config() });
    }
}
