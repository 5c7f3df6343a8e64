//! Forward and backward passes through the feature bank.

use rayon::prelude::*;

use super::bank::{ConvLayer, FeatureBank, INPUT_CHANNELS};
use super::PerceptionError;
use crate::image::Image;

/// Channel-major `channels x height x width` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Spatial positions per channel (`M_l`).
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let m = self.positions();
        &self.data[c * m..(c + 1) * m]
    }

    pub fn from_image(image: &Image) -> Self {
        let (h, w) = (image.height(), image.width());
        let mut map = Self::zeros(INPUT_CHANNELS, h, w);
        for (k, px) in image.as_slice().chunks_exact(3).enumerate() {
            for c in 0..3 {
                map.data[c * h * w + k] = px[c];
            }
        }
        map
    }

    /// Inverse of [`FeatureMap::from_image`] for 3-channel maps, without range checks.
    pub(crate) fn to_interleaved(&self) -> Vec<f64> {
        let m = self.positions();
        let mut out = vec![0.0; m * self.channels];
        for c in 0..self.channels {
            for k in 0..m {
                out[k * self.channels + c] = self.data[c * m + k];
            }
        }
        out
    }
}

/// One feature map per bank layer (post ReLU and pooling).
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<FeatureMap>,
}

/// Intermediates needed by [`backward`].
pub(crate) struct ForwardCache {
    pub input: FeatureMap,
    /// Pre-activation (conv output) of each layer.
    pub preact: Vec<FeatureMap>,
}

pub fn extract_features(image: &Image, bank: &FeatureBank) -> Result<FeaturePyramid, PerceptionError> {
    Ok(forward(image, bank)?.0)
}

pub(crate) fn forward(image: &Image, bank: &FeatureBank) -> Result<(FeaturePyramid, ForwardCache), PerceptionError> {
    let min = bank.min_side();
    if image.height() < min || image.width() < min {
        return Err(PerceptionError::ImageTooSmall {
            height: image.height(),
            width: image.width(),
            min,
        });
    }
    let input = FeatureMap::from_image(image);
    let mut levels = Vec::with_capacity(bank.layers().len());
    let mut preact = Vec::with_capacity(bank.layers().len());
    for layer in bank.layers() {
        let x = levels.last().unwrap_or(&input);
        let y = conv3x3(layer, x);
        levels.push(relu_pool(&y));
        preact.push(y);
    }
    Ok((FeaturePyramid { levels }, ForwardCache { input, preact }))
}

/// Given `dL/dphi_l` for every level (empty maps allowed as `None`), returns
/// `dL/dimage` in interleaved image layout.
pub(crate) fn backward(bank: &FeatureBank, cache: &ForwardCache, mut level_grads: Vec<Option<FeatureMap>>) -> Vec<f64> {
    let layers = bank.layers();
    let mut carry: Option<FeatureMap> = None;
    for l in (0..layers.len()).rev() {
        let grad_here = match (carry.take(), level_grads[l].take()) {
            (Some(mut a), Some(b)) => {
                for (x, y) in a.data.iter_mut().zip(b.data) {
                    *x += y;
                }
                Some(a)
            }
            (a, b) => a.or(b),
        };
        let Some(dphi) = grad_here else {
            continue;
        };
        let dy = relu_pool_backward(&cache.preact[l], &dphi);
        carry = Some(conv3x3_backward_input(&layers[l], &dy));
    }
    match carry {
        Some(dx) => dx.to_interleaved(),
        None => vec![0.0; cache.input.positions() * INPUT_CHANNELS],
    }
}

/// Stride-1 convolution with zero padding 1.
pub(crate) fn conv3x3(layer: &ConvLayer, x: &FeatureMap) -> FeatureMap {
    let (h, w) = (x.height, x.width);
    let mut out = FeatureMap::zeros(layer.out_channels, h, w);
    out.data.par_chunks_mut(h * w).enumerate().for_each(|(co, plane)| {
        plane.fill(layer.bias[co]);
        for ci in 0..layer.in_channels {
            let src = x.channel(ci);
            for di in 0..3 {
                for dj in 0..3 {
                    let wt = layer.weight(co, ci, di, dj);
                    if wt == 0.0 {
                        continue;
                    }
                    accumulate_shifted(plane, src, h, w, di as isize - 1, dj as isize - 1, wt);
                }
            }
        }
    });
    out
}

/// `dst[i][j] += wt * src[i + oi][j + oj]` wherever the source index is inside.
#[inline]
fn accumulate_shifted(dst: &mut [f64], src: &[f64], h: usize, w: usize, oi: isize, oj: isize, wt: f64) {
    let i_lo = (-oi).max(0) as usize;
    let i_hi = (h as isize - oi).min(h as isize).max(0) as usize;
    let j_lo = (-oj).max(0) as usize;
    let j_hi = (w as isize - oj).min(w as isize).max(0) as usize;
    if j_lo >= j_hi {
        return;
    }
    for i in i_lo..i_hi {
        let si = (i as isize + oi) as usize;
        let d = &mut dst[i * w + j_lo..i * w + j_hi];
        let s_start = (j_lo as isize + oj) as usize;
        let s = &src[si * w + s_start..si * w + s_start + (j_hi - j_lo)];
        for (a, b) in d.iter_mut().zip(s) {
            *a += wt * b;
        }
    }
}

/// Gradient with respect to the convolution input.
fn conv3x3_backward_input(layer: &ConvLayer, dy: &FeatureMap) -> FeatureMap {
    let (h, w) = (dy.height, dy.width);
    let mut dx = FeatureMap::zeros(layer.in_channels, h, w);
    dx.data.par_chunks_mut(h * w).enumerate().for_each(|(ci, plane)| {
        for co in 0..layer.out_channels {
            let g = dy.channel(co);
            for di in 0..3 {
                for dj in 0..3 {
                    let wt = layer.weight(co, ci, di, dj);
                    if wt == 0.0 {
                        continue;
                    }
                    // y[i][j] uses x[i + di - 1][j + dj - 1], so x[a][b] receives dy[a - di + 1][b - dj + 1]
                    accumulate_shifted(plane, g, h, w, 1 - di as isize, 1 - dj as isize, wt);
                }
            }
        }
    });
    dx
}

/// ReLU followed by 2x2 average pooling (odd trailing row/column dropped).
fn relu_pool(y: &FeatureMap) -> FeatureMap {
    let (h2, w2) = (y.height / 2, y.width / 2);
    let mut out = FeatureMap::zeros(y.channels, h2, w2);
    let w = y.width;
    for c in 0..y.channels {
        let src = y.channel(c);
        let dst = &mut out.data[c * h2 * w2..(c + 1) * h2 * w2];
        for a in 0..h2 {
            for b in 0..w2 {
                let k = 2 * a * w + 2 * b;
                dst[a * w2 + b] =
                    0.25 * (src[k].max(0.0) + src[k + 1].max(0.0) + src[k + w].max(0.0) + src[k + w + 1].max(0.0));
            }
        }
    }
    out
}

fn relu_pool_backward(y: &FeatureMap, dphi: &FeatureMap) -> FeatureMap {
    let (h2, w2) = (dphi.height, dphi.width);
    let w = y.width;
    let mut dy = FeatureMap::zeros(y.channels, y.height, y.width);
    let m = y.positions();
    for c in 0..y.channels {
        let pre = y.channel(c);
        let g = dphi.channel(c);
        let dst = &mut dy.data[c * m..(c + 1) * m];
        for a in 0..h2 {
            for b in 0..w2 {
                let v = 0.25 * g[a * w2 + b];
                let k = 2 * a * w + 2 * b;
                for idx in [k, k + 1, k + w, k + w + 1] {
                    if pre[idx] > 0.0 {
                        dst[idx] = v;
                    }
                }
            }
        }
    }
    dy
}
