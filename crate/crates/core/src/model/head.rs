//! Fully connected classifier: `[Linear, BatchNorm, ReLU, Dropout]` blocks
//! followed by a single-logit output layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm1d, BatchNormCache, Linear};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub hidden: Vec<Linear>,
    pub norms: Vec<BatchNorm1d>,
    pub output: Linear,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    n: usize,
    inputs: Vec<Vec<f64>>,
    norm: Vec<BatchNormCache>,
    normalized: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    last: Vec<f64>,
}

/// Dropout masks are either sampled from the given RNG or disabled.
pub enum DropoutMode<'a, R: Rng> {
    Sample(&'a mut R),
    Off,
}

impl Head {
    pub fn init(inputs: usize, hidden: &[usize], dropout: f64, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        let mut prev = inputs;
        for &h in hidden {
            layers.push(Linear::init(prev, h, rng));
            norms.push(BatchNorm1d::new(h));
            prev = h;
        }
        Self { hidden: layers, norms, output: Linear::init(prev, 1, rng), dropout }
    }

    /// Every weight and bias set to zero, so the output is exactly 0.5.
    pub fn zero_init(inputs: usize, hidden: &[usize], dropout: f64) -> Self {
        let mut prev = inputs;
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        for &h in hidden {
            layers.push(Linear::zeros(prev, h));
            norms.push(BatchNorm1d::new(h));
            prev = h;
        }
        Self { hidden: layers, norms, output: Linear::zeros(prev, 1), dropout }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.iter().map(|l| Linear::zeros(l.inputs, l.outputs)).collect(),
            norms: self.norms.iter().map(|b| b.zeros_like()).collect(),
            output: Linear::zeros(self.output.inputs, 1),
            dropout: self.dropout,
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.first().map_or(self.output.inputs, |l| l.inputs)
    }

    /// Logits with running statistics and no dropout; rows are independent.
    pub fn forward_eval(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut a = x.to_vec();
        for (lin, bn) in self.hidden.iter().zip(&self.norms) {
            let z = lin.forward(&a, n);
            a = bn.forward_eval(&z, n);
            a.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        self.output.forward(&a, n)
    }

    /// Logits with batch statistics. Running statistics are updated.
    pub fn forward_train<R: Rng>(&mut self, x: &[f64], n: usize, mut dropout: DropoutMode<'_, R>, update_running: bool) -> (Vec<f64>, HeadCache) {
        let p = self.dropout;
        let mut cache = HeadCache { n, inputs: vec![], norm: vec![], normalized: vec![], masks: vec![], last: vec![] };
        let mut a = x.to_vec();
        for (lin, bn) in self.hidden.iter().zip(self.norms.iter_mut()) {
            let z = lin.forward(&a, n);
            cache.inputs.push(std::mem::take(&mut a));
            let (y, c) = bn.forward_train(&z, n, update_running);
            cache.norm.push(c);
            let mask: Vec<f64> = match &mut dropout {
                DropoutMode::Sample(rng) if p > 0.0 => (0..y.len())
                    .map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect(),
                _ => vec![1.0; y.len()],
            };
            a = y.iter().zip(&mask).map(|(v, m)| v.max(0.0) * m).collect();
            cache.normalized.push(y);
            cache.masks.push(mask);
        }
        let logits = self.output.forward(&a, n);
        cache.last = a;
        (logits, cache)
    }

    pub fn backward(&self, cache: &HeadCache, dlogits: &[f64], grad: &mut Head) -> Vec<f64> {
        let n = cache.n;
        let mut d = self.output.backward(&cache.last, dlogits, n, &mut grad.output);
        for l in (0..self.hidden.len()).rev() {
            for i in 0..d.len() {
                d[i] = if cache.normalized[l][i] > 0.0 { d[i] * cache.masks[l][i] } else { 0.0 };
            }
            let dz = self.norms[l].backward(&cache.norm[l], &d, n, &mut grad.norms[l]);
            d = self.hidden[l].backward(&cache.inputs[l], &dz, n, &mut grad.hidden[l]);
        }
        d
    }
}

/// Mean binary cross-entropy on logits and its gradient.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        // softplus(z) - y z, evaluated without overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        grad.push((super::layers::sigmoid(z) - y) / n);
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bce_matches_definition() {
        let (l, g) = bce_with_logits(&[0.3, -1.2], &[1.0, 0.0]);
        let want = -(sigmoid(0.3).ln() + (1.0 - sigmoid(-1.2)).ln()) / 2.0;
        assert!((l - want).abs() < 1e-14);
        assert!((g[0] - (sigmoid(0.3) - 1.0) / 2.0).abs() < 1e-15);
        let (big, _) = bce_with_logits(&[-800.0], &[1.0]);
        assert!((big - 800.0).abs() < 1e-9);
    }

    #[test]
    fn eval_is_batch_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut head = Head::init(5, &[6, 4], 0.7, &mut rng);
        let x: Vec<f64> = (0..8 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        head.forward_train(&x, 8, DropoutMode::Sample(&mut rng), true);
        let all = head.forward_eval(&x, 8);
        for b in 0..8 {
            assert_eq!(head.forward_eval(&x[b * 5..(b + 1) * 5], 1)[0], all[b]);
        }
    }
}
