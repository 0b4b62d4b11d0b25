//! Dense building blocks with explicit backward passes. All tensors are
//! row-major `f64` buffers; feature maps are CHW.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width, "feature map size");
        Self { channels, height, width, data }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    /// Stacks `self` and `other` along the channel axis.
    pub fn concat(&self, other: &FeatureMap) -> FeatureMap {
        assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        FeatureMap::from_vec(self.channels + other.channels, self.height, self.width, data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Odd-sized square convolution, stride 1, zero "same" padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    /// Uniform fan-in initialization.
    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let mut c = Self::zeros(in_channels, out_channels, kernel);
        let bound = 1.0 / ((in_channels * kernel * kernel) as f64).sqrt();
        c.weight.iter_mut().for_each(|w| *w = rng.gen_range(-bound..bound));
        c.bias.iter_mut().for_each(|b| *b = rng.gen_range(-bound..bound));
        c
    }

    fn w(&self, o: usize, i: usize) -> &[f64] {
        let kk = self.kernel * self.kernel;
        let start = (o * self.in_channels + i) * kk;
        &self.weight[start..start + kk]
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        assert_eq!(input.channels, self.in_channels, "conv input channels");
        let (h, w) = (input.height, input.width);
        let mut out = FeatureMap::zeros(self.out_channels, h, w);
        let plane = h * w;
        for o in 0..self.out_channels {
            let dst = &mut out.data[o * plane..(o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = input.channel(i);
                let kw = self.w(o, i);
                conv_accumulate(dst, src, kw, self.kernel, h, w);
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, input: &FeatureMap, dout: &FeatureMap, grad: &mut Conv2d) -> FeatureMap {
        let (h, w) = (input.height, input.width);
        let plane = h * w;
        let k = self.kernel;
        let p = k / 2;
        let mut din = FeatureMap::zeros(self.in_channels, h, w);
        for o in 0..self.out_channels {
            let d = &dout.data[o * plane..(o + 1) * plane];
            grad.bias[o] += d.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let src = input.channel(i);
                let base = (o * self.in_channels + i) * k * k;
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, p, h);
                    for kx in 0..k {
                        let (x0, x1) = valid_range(kx, p, w);
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let sy = y + ky - p;
                            let drow = &d[y * w + x0..y * w + x1];
                            let srow = &src[sy * w + x0 + kx - p..sy * w + x1 + kx - p];
                            acc += drow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                        }
                        grad.weight[base + ky * k + kx] += acc;
                    }
                }
                // Input gradient is the transposed convolution of `d`.
                let kw = self.w(o, i);
                let dsrc = &mut din.data[i * plane..(i + 1) * plane];
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, p, h);
                    for kx in 0..k {
                        let (x0, x1) = valid_range(kx, p, w);
                        let wv = kw[ky * k + kx];
                        for y in y0..y1 {
                            let sy = y + ky - p;
                            let drow = &d[y * w + x0..y * w + x1];
                            let srow = &mut dsrc[sy * w + x0 + kx - p..sy * w + x1 + kx - p];
                            srow.iter_mut().zip(drow).for_each(|(s, dv)| *s += wv * dv);
                        }
                    }
                }
            }
        }
        din
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Output rows/cols `[lo, hi)` for which tap `t` lands inside the input.
#[inline]
fn valid_range(t: usize, pad: usize, len: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(t);
    let hi = (len + pad).saturating_sub(t).min(len);
    (lo, hi.max(lo))
}

#[inline]
fn conv_accumulate(dst: &mut [f64], src: &[f64], kw: &[f64], k: usize, h: usize, w: usize) {
    let p = k / 2;
    for ky in 0..k {
        let (y0, y1) = valid_range(ky, p, h);
        for kx in 0..k {
            let (x0, x1) = valid_range(kx, p, w);
            let wv = kw[ky * k + kx];
            if wv == 0.0 {
                continue;
            }
            for y in y0..y1 {
                let sy = y + ky - p;
                let drow = &mut dst[y * w + x0..y * w + x1];
                let srow = &src[sy * w + x0 + kx - p..sy * w + x1 + kx - p];
                drow.iter_mut().zip(srow).for_each(|(d, s)| *d += wv * s);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut l = Self::zeros(inputs, outputs);
        let bound = 1.0 / (inputs as f64).sqrt();
        l.weight.iter_mut().for_each(|w| *w = rng.gen_range(-bound..bound));
        l.bias.iter_mut().for_each(|b| *b = rng.gen_range(-bound..bound));
        l
    }

    /// Row-major batch `[n][inputs]` to `[n][outputs]`.
    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), n * self.inputs);
        let mut out = vec![0.0; n * self.outputs];
        for b in 0..n {
            let row = &x[b * self.inputs..(b + 1) * self.inputs];
            for o in 0..self.outputs {
                let w = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                out[b * self.outputs + o] = self.bias[o] + w.iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        out
    }

    pub fn backward(&self, x: &[f64], dout: &[f64], n: usize, grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; n * self.inputs];
        for b in 0..n {
            let row = &x[b * self.inputs..(b + 1) * self.inputs];
            let drow = &mut dx[b * self.inputs..(b + 1) * self.inputs];
            for o in 0..self.outputs {
                let g = dout[b * self.outputs + o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let gw = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
                gw.iter_mut().zip(row).for_each(|(a, c)| *a += g * c);
                let w = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                drow.iter_mut().zip(w).for_each(|(a, c)| *a += g * c);
            }
        }
        dx
    }
}

/// Batch normalization over the batch axis of `[n][features]` activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm1d {
    pub features: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved batch statistics for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(features: usize) -> Self {
        Self {
            features,
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gamma: vec![0.0; self.features],
            beta: vec![0.0; self.features],
            running_mean: vec![0.0; self.features],
            running_var: vec![0.0; self.features],
            ..self.clone()
        }
    }

    /// Normalizes with running statistics; rows are independent.
    pub fn forward_eval(&self, x: &[f64], n: usize) -> Vec<f64> {
        let f = self.features;
        let mut out = vec![0.0; n * f];
        for b in 0..n {
            for j in 0..f {
                let xhat = (x[b * f + j] - self.running_mean[j]) / (self.running_var[j] + self.eps).sqrt();
                out[b * f + j] = self.gamma[j] * xhat + self.beta[j];
            }
        }
        out
    }

    /// Normalizes with batch statistics. Running statistics are only updated
    /// when `update_running` is set.
    pub fn forward_train(&mut self, x: &[f64], n: usize, update_running: bool) -> (Vec<f64>, BatchNormCache) {
        let f = self.features;
        let mut mean = vec![0.0; f];
        let mut var = vec![0.0; f];
        for b in 0..n {
            for j in 0..f {
                mean[j] += x[b * f + j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for b in 0..n {
            for j in 0..f {
                let d = x[b * f + j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = vec![0.0; n * f];
        let mut out = vec![0.0; n * f];
        for b in 0..n {
            for j in 0..f {
                let h = (x[b * f + j] - mean[j]) * inv_std[j];
                xhat[b * f + j] = h;
                out[b * f + j] = self.gamma[j] * h + self.beta[j];
            }
        }
        if update_running {
            let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
            for j in 0..f {
                self.running_mean[j] = (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                self.running_var[j] = (1.0 - self.momentum) * self.running_var[j] + self.momentum * var[j] * unbias;
            }
        }
        (out, BatchNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &BatchNormCache, dout: &[f64], n: usize, grad: &mut BatchNorm1d) -> Vec<f64> {
        let f = self.features;
        let nf = n as f64;
        let mut dx = vec![0.0; n * f];
        for j in 0..f {
            let (mut sum_d, mut sum_dx) = (0.0, 0.0);
            for b in 0..n {
                let d = dout[b * f + j];
                sum_d += d;
                sum_dx += d * cache.xhat[b * f + j];
            }
            grad.beta[j] += sum_d;
            grad.gamma[j] += sum_dx;
            let scale = self.gamma[j] * cache.inv_std[j] / nf;
            for b in 0..n {
                let d = dout[b * f + j];
                dx[b * f + j] = scale * (nf * d - sum_d - cache.xhat[b * f + j] * sum_dx);
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct definition of a padded convolution, used as an oracle.
    fn naive_conv(c: &Conv2d, x: &FeatureMap) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let k = c.kernel as isize;
        let p = k / 2;
        let mut out = FeatureMap::zeros(c.out_channels, h, w);
        for o in 0..c.out_channels {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = c.bias[o];
                    for i in 0..c.in_channels {
                        for ky in 0..k {
                            for kx in 0..k {
                                let (sy, sx) = (y + ky - p, xx + kx - p);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let wv = c.weight[((o * c.in_channels + i) * c.kernel + ky as usize) * c.kernel + kx as usize];
                                acc += wv * x.data[(i * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out.data[(o * h + y as usize) * w + xx as usize] = acc;
                }
            }
        }
        out
    }

    fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn conv_matches_naive_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (k, h, w) in [(3, 4, 5), (1, 3, 3), (5, 6, 4), (3, 1, 1)] {
            let conv = Conv2d::init(2, 3, k, &mut rng);
            let x = random_map(&mut rng, 2, h, w);
            let a = conv.forward(&x);
            let b = naive_conv(&conv, &x);
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv2d::init(2, 2, 3, &mut rng);
        let x = random_map(&mut rng, 2, 3, 4);
        let target = random_map(&mut rng, 2, 3, 4);
        // loss = sum(out * target)
        let loss = |c: &Conv2d, x: &FeatureMap| -> f64 {
            c.forward(x).data.iter().zip(&target.data).map(|(a, b)| a * b).sum()
        };
        let mut g = Conv2d::zeros(2, 2, 3);
        let dx = conv.backward(&x, &target, &mut g);
        let eps = 1e-5;
        for idx in 0..conv.weight.len() {
            let mut p = conv.clone();
            p.weight[idx] += eps;
            let mut m = conv.clone();
            m.weight[idx] -= eps;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * eps);
            assert!((fd - g.weight[idx]).abs() < 1e-7);
        }
        for idx in 0..x.data.len() {
            let mut p = x.clone();
            p.data[idx] += eps;
            let mut m = x.clone();
            m.data[idx] -= eps;
            let fd = (loss(&conv, &p) - loss(&conv, &m)) / (2.0 * eps);
            assert!((fd - dx.data[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn batchnorm_eval_is_rowwise() {
        let mut bn = BatchNorm1d::new(3);
        bn.running_mean = vec![1.0, 2.0, 3.0];
        bn.running_var = vec![4.0, 1.0, 0.25];
        let x = [1.0, 2.0, 3.0, 3.0, 3.0, 3.0];
        let both = bn.forward_eval(&x, 2);
        let second = bn.forward_eval(&x[3..], 1);
        assert_eq!(&both[3..], &second[..]);
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let mut bn = BatchNorm1d::new(2);
        bn.gamma = vec![1.3, -0.4];
        bn.beta = vec![0.2, 0.1];
        let x: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |bn: &BatchNorm1d, x: &[f64]| -> f64 {
            let mut b = bn.clone();
            let (y, _) = b.forward_train(x, n, false);
            y.iter().zip(&t).map(|(a, c)| a * c * a).sum()
        };
        let (y, cache) = bn.clone().forward_train(&x, n, false);
        let dout: Vec<f64> = y.iter().zip(&t).map(|(a, c)| 2.0 * a * c).collect();
        let mut g = bn.zeros_like();
        let dx = bn.backward(&cache, &dout, n, &mut g);
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut p = x.clone();
            p[i] += eps;
            let mut m = x.clone();
            m[i] -= eps;
            let fd = (loss(&bn, &p) - loss(&bn, &m)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-6, "{fd} vs {}", dx[i]);
        }
        for j in 0..2 {
            let mut p = bn.clone();
            p.gamma[j] += eps;
            let mut m = bn.clone();
            m.gamma[j] -= eps;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * eps);
            assert!((fd - g.gamma[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
