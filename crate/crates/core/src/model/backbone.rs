//! Frame encoder: a small filter bank, ReLU and average pooling, optionally
//! gated by a downsampled gaze map.

use super::layers::{Conv2d, FeatureMap};
use crate::media::Frame;

/// Number of channels produced by [`filter_bank`].
pub const BANK_CHANNELS: usize = 4;

/// Hand-designed 3x3 filters over RGB: brightness, red-vs-rest opponency,
/// and horizontal/vertical luminance gradients.
pub fn filter_bank() -> Conv2d {
    let mut c = Conv2d::zeros(3, BANK_CHANNELS, 3);
    let idx = |o: usize, i: usize, ky: usize, kx: usize| ((o * 3 + i) * 3 + ky) * 3 + kx;
    let sobel = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    for i in 0..3 {
        for ky in 0..3 {
            for kx in 0..3 {
                c.weight[idx(0, i, ky, kx)] = 1.0 / 27.0;
                c.weight[idx(2, i, ky, kx)] = sobel[ky][kx] / 12.0;
                c.weight[idx(3, i, ky, kx)] = sobel[kx][ky] / 12.0;
            }
        }
    }
    c.weight[idx(1, 0, 1, 1)] = 1.0;
    c.weight[idx(1, 1, 1, 1)] = -0.5;
    c.weight[idx(1, 2, 1, 1)] = -0.5;
    c
}

/// Nearest-neighbour resize of an HWC u8 frame into a `size`x`size` CHW
/// tensor scaled to [0, 1]. Grayscale input is replicated to three channels.
pub fn preprocess(frame: &Frame, width: usize, height: usize, channels: usize, size: usize) -> FeatureMap {
    let mut out = FeatureMap::zeros(3, size, size);
    let plane = size * size;
    for y in 0..size {
        let sy = ((y * height) + height / 2) / size;
        let sy = sy.min(height - 1);
        for x in 0..size {
            let sx = (((x * width) + width / 2) / size).min(width - 1);
            let base = (sy * width + sx) * channels;
            for c in 0..3 {
                let src = if channels == 1 { base } else { base + c };
                out.data[c * plane + y * size + x] = frame.pixels[src] as f64 / 255.0;
            }
        }
    }
    out
}

/// Area-averages a single-channel gaze frame onto a `grid`x`grid` lattice and
/// rescales it to unit mean. A blank map yields a uniform gate of ones.
pub fn gaze_gate(frame: &Frame, width: usize, height: usize, channels: usize, grid: usize) -> Vec<f64> {
    let mut sums = vec![0.0; grid * grid];
    let mut counts = vec![0usize; grid * grid];
    for y in 0..height {
        let gy = (y * grid / height).min(grid - 1);
        for x in 0..width {
            let gx = (x * grid / width).min(grid - 1);
            let base = (y * width + x) * channels;
            sums[gy * grid + gx] += frame.pixels[base] as f64;
            counts[gy * grid + gx] += 1;
        }
    }
    let cells: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    normalize_gate(cells)
}

pub fn normalize_gate(cells: Vec<f64>) -> Vec<f64> {
    let mean = cells.iter().sum::<f64>() / cells.len() as f64;
    if mean <= 0.0 || !mean.is_finite() {
        return vec![1.0; cells.len()];
    }
    cells.into_iter().map(|c| c / mean).collect()
}

/// Filter bank, ReLU, `pool`x`pool` average pooling.
pub fn backbone_forward(conv: &Conv2d, image: &FeatureMap, pool: usize) -> FeatureMap {
    let pre = conv.forward(image);
    avg_pool(&relu(pre), pool)
}

/// Backbone features multiplied cell-wise by the gaze gate.
pub fn foveal_encode(conv: &Conv2d, image: &FeatureMap, gate: &[f64], pool: usize) -> FeatureMap {
    let mut f = backbone_forward(conv, image, pool);
    apply_gate(&mut f, gate);
    f
}

pub fn apply_gate(f: &mut FeatureMap, gate: &[f64]) {
    let plane = f.plane();
    assert_eq!(gate.len(), plane, "gate does not match the feature grid");
    for c in 0..f.channels {
        f.data[c * plane..(c + 1) * plane].iter_mut().zip(gate).for_each(|(v, g)| *v *= g);
    }
}

/// Accumulates filter-bank gradients for one gated frame. The convolution is
/// recomputed rather than cached to keep window memory small.
pub fn backbone_backward(conv: &Conv2d, image: &FeatureMap, gate: &[f64], pool: usize, dout: &FeatureMap, grad: &mut Conv2d) {
    let pre = conv.forward(image);
    let (h, w) = (pre.height, pre.width);
    let (gh, gw) = (dout.height, dout.width);
    let scale = 1.0 / (pool * pool) as f64;
    let mut dpre = FeatureMap::zeros(pre.channels, h, w);
    for c in 0..pre.channels {
        for y in 0..h {
            for x in 0..w {
                let i = (c * h + y) * w + x;
                if pre.data[i] <= 0.0 {
                    continue;
                }
                let cell = (y / pool).min(gh - 1) * gw + (x / pool).min(gw - 1);
                dpre.data[i] = dout.data[c * gh * gw + cell] * gate[cell] * scale;
            }
        }
    }
    conv.backward(image, &dpre, grad);
}

fn relu(mut f: FeatureMap) -> FeatureMap {
    f.data.iter_mut().for_each(|v| *v = v.max(0.0));
    f
}

fn avg_pool(f: &FeatureMap, pool: usize) -> FeatureMap {
    let (gh, gw) = (f.height / pool, f.width / pool);
    let mut out = FeatureMap::zeros(f.channels, gh, gw);
    let scale = 1.0 / (pool * pool) as f64;
    for c in 0..f.channels {
        let src = f.channel(c);
        for y in 0..gh * pool {
            for x in 0..gw * pool {
                out.data[(c * gh + y / pool) * gw + x / pool] += src[y * f.width + x] * scale;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: usize, h: usize, rgb: [u8; 3]) -> Frame {
        Frame { timestamp: 0.0, pixels: (0..w * h).flat_map(|_| rgb).collect() }
    }

    #[test]
    fn uniform_gate_is_identity() {
        let gaze = Frame { timestamp: 0.0, pixels: vec![77; 32 * 32] };
        let gate = gaze_gate(&gaze, 32, 32, 1, 4);
        assert!(gate.iter().all(|g| (g - 1.0).abs() < 1e-15));
        let img = preprocess(&solid(32, 32, [200, 10, 10]), 32, 32, 3, 32);
        let conv = filter_bank();
        assert_eq!(foveal_encode(&conv, &img, &gate, 8), backbone_forward(&conv, &img, 8));
    }

    #[test]
    fn blank_gaze_is_uniform() {
        let gaze = Frame { timestamp: 0.0, pixels: vec![0; 16 * 16] };
        assert_eq!(gaze_gate(&gaze, 16, 16, 1, 4), vec![1.0; 16]);
    }

    #[test]
    fn concentrated_gaze_keeps_one_cell() {
        let mut px = vec![0u8; 32 * 32];
        for y in 0..8 {
            for x in 24..32 {
                px[y * 32 + x] = 255;
            }
        }
        let gate = gaze_gate(&Frame { timestamp: 0.0, pixels: px }, 32, 32, 1, 4);
        assert_eq!(gate[3], 16.0);
        assert_eq!(gate.iter().filter(|g| **g == 0.0).count(), 15);
    }

    #[test]
    fn red_channel_responds_to_red() {
        let conv = filter_bank();
        let red = backbone_forward(&conv, &preprocess(&solid(32, 32, [255, 0, 0]), 32, 32, 3, 32), 8);
        let grey = backbone_forward(&conv, &preprocess(&solid(32, 32, [128, 128, 128]), 32, 32, 3, 32), 8);
        assert!(red.channel(1)[5] > 0.9);
        assert!(grey.channel(1)[5].abs() < 1e-12);
        assert_eq!(red.shape(), (4, 4, 4));
    }

    #[test]
    fn preprocess_resizes_and_replicates_gray() {
        let f = Frame { timestamp: 0.0, pixels: (0..64u8).collect() };
        let t = preprocess(&f, 8, 8, 1, 4);
        assert_eq!(t.shape(), (3, 4, 4));
        assert_eq!(t.channel(0), t.channel(2));
    }
}
