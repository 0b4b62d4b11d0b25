//! Convolutional GRU over a sequence of feature maps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, Conv2d, FeatureMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvGru {
    pub input_channels: usize,
    pub hidden_channels: usize,
    /// Update and reset gates, stacked along the output channels.
    pub gates: Conv2d,
    pub candidate: Conv2d,
}

/// Activations of one step, kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruStep {
    xh: FeatureMap,
    xrh: FeatureMap,
    h_prev: FeatureMap,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

impl ConvGru {
    pub fn init(input_channels: usize, hidden_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let cin = input_channels + hidden_channels;
        Self {
            input_channels,
            hidden_channels,
            gates: Conv2d::init(cin, 2 * hidden_channels, kernel, rng),
            candidate: Conv2d::init(cin, hidden_channels, kernel, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gates: Conv2d::zeros(self.gates.in_channels, self.gates.out_channels, self.gates.kernel),
            candidate: Conv2d::zeros(self.candidate.in_channels, self.candidate.out_channels, self.candidate.kernel),
            ..*self
        }
    }

    pub fn initial_state(&self, height: usize, width: usize) -> FeatureMap {
        FeatureMap::zeros(self.hidden_channels, height, width)
    }

    fn step_inner(&self, x: &FeatureMap, h: &FeatureMap) -> (FeatureMap, GruStep) {
        let hc = self.hidden_channels;
        let plane = h.plane();
        let xh = x.concat(h);
        let g = self.gates.forward(&xh);
        let z: Vec<f64> = g.data[..hc * plane].iter().map(|v| sigmoid(*v)).collect();
        let r: Vec<f64> = g.data[hc * plane..].iter().map(|v| sigmoid(*v)).collect();
        let rh: Vec<f64> = r.iter().zip(&h.data).map(|(a, b)| a * b).collect();
        let xrh = x.concat(&FeatureMap::from_vec(hc, h.height, h.width, rh));
        let n: Vec<f64> = self.candidate.forward(&xrh).data.iter().map(|v| v.tanh()).collect();
        let next: Vec<f64> = (0..n.len()).map(|i| (1.0 - z[i]) * h.data[i] + z[i] * n[i]).collect();
        let next = FeatureMap::from_vec(hc, h.height, h.width, next);
        (next, GruStep { xh, xrh, h_prev: h.clone(), z, r, n })
    }

    pub fn step(&self, x: &FeatureMap, h: &FeatureMap) -> FeatureMap {
        self.step_inner(x, h).0
    }

    /// Runs the sequence from a zero state and returns the terminal state.
    pub fn run(&self, xs: &[FeatureMap]) -> FeatureMap {
        let first = &xs[0];
        let mut h = self.initial_state(first.height, first.width);
        for x in xs {
            h = self.step(x, &h);
        }
        h
    }

    pub fn run_cached(&self, xs: &[FeatureMap]) -> (FeatureMap, Vec<GruStep>) {
        let first = &xs[0];
        let mut h = self.initial_state(first.height, first.width);
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (next, cache) = self.step_inner(x, &h);
            steps.push(cache);
            h = next;
        }
        (h, steps)
    }

    /// Backpropagation through time from the terminal-state gradient.
    /// Returns per-step input gradients when `want_inputs` is set.
    pub fn backward(&self, steps: &[GruStep], dh_final: &FeatureMap, grad: &mut ConvGru, want_inputs: bool) -> Vec<FeatureMap> {
        let cx = self.input_channels;
        let hc = self.hidden_channels;
        let mut dh = dh_final.clone();
        let mut dxs = Vec::new();
        for s in steps.iter().rev() {
            let plane = dh.plane();
            let (height, width) = (dh.height, dh.width);
            let len = hc * plane;
            let mut dh_prev = vec![0.0; len];
            let mut dcand = vec![0.0; len];
            let mut dz_pre = vec![0.0; len];
            for i in 0..len {
                let d = dh.data[i];
                dh_prev[i] = d * (1.0 - s.z[i]);
                let dn = d * s.z[i];
                dcand[i] = dn * (1.0 - s.n[i] * s.n[i]);
                let dz = d * (s.n[i] - s.h_prev.data[i]);
                dz_pre[i] = dz * s.z[i] * (1.0 - s.z[i]);
            }
            let dxrh = self.candidate.backward(&s.xrh, &FeatureMap::from_vec(hc, height, width, dcand), &mut grad.candidate);
            let mut dgates = Vec::with_capacity(2 * len);
            dgates.extend_from_slice(&dz_pre);
            for i in 0..len {
                let drh = dxrh.data[cx * plane + i];
                dh_prev[i] += drh * s.r[i];
                let dr = drh * s.h_prev.data[i];
                dgates.push(dr * s.r[i] * (1.0 - s.r[i]));
            }
            let dxh = self.gates.backward(&s.xh, &FeatureMap::from_vec(2 * hc, height, width, dgates), &mut grad.gates);
            for i in 0..len {
                dh_prev[i] += dxh.data[cx * plane + i];
            }
            if want_inputs {
                let dx: Vec<f64> = (0..cx * plane).map(|i| dxh.data[i] + dxrh.data[i]).collect();
                dxs.push(FeatureMap::from_vec(cx, height, width, dx));
            }
            dh = FeatureMap::from_vec(hc, height, width, dh_prev);
        }
        dxs.reverse();
        dxs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(rng: &mut ChaCha8Rng, t: usize) -> Vec<FeatureMap> {
        (0..t)
            .map(|_| FeatureMap::from_vec(2, 2, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect()
    }

    #[test]
    fn cached_and_plain_runs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gru = ConvGru::init(2, 3, 3, &mut rng);
        let xs = seq(&mut rng, 6);
        assert_eq!(gru.run(&xs), gru.run_cached(&xs).0);
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gru = ConvGru::init(2, 3, 3, &mut rng);
        let xs = seq(&mut rng, 5);
        let target: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |g: &ConvGru, xs: &[FeatureMap]| -> f64 {
            g.run(xs).data.iter().zip(&target).map(|(a, b)| a * b).sum()
        };
        let (_, steps) = gru.run_cached(&xs);
        let mut grad = gru.zeros_like();
        let dh = FeatureMap::from_vec(3, 2, 3, target.clone());
        let dxs = gru.backward(&steps, &dh, &mut grad, true);
        let eps = 1e-6;
        for idx in (0..gru.gates.weight.len()).step_by(7) {
            let mut p = gru.clone();
            p.gates.weight[idx] += eps;
            let mut m = gru.clone();
            m.gates.weight[idx] -= eps;
            let fd = (loss(&p, &xs) - loss(&m, &xs)) / (2.0 * eps);
            assert!((fd - grad.gates.weight[idx]).abs() < 1e-7, "gates[{idx}]");
        }
        for idx in (0..gru.candidate.weight.len()).step_by(5) {
            let mut p = gru.clone();
            p.candidate.weight[idx] += eps;
            let mut m = gru.clone();
            m.candidate.weight[idx] -= eps;
            let fd = (loss(&p, &xs) - loss(&m, &xs)) / (2.0 * eps);
            assert!((fd - grad.candidate.weight[idx]).abs() < 1e-7, "cand[{idx}]");
        }
        for t in [0, 2, 4] {
            for i in 0..12 {
                let mut p = xs.clone();
                p[t].data[i] += eps;
                let mut m = xs.clone();
                m[t].data[i] -= eps;
                let fd = (loss(&gru, &p) - loss(&gru, &m)) / (2.0 * eps);
                assert!((fd - dxs[t].data[i]).abs() < 1e-7);
            }
        }
    }
}
