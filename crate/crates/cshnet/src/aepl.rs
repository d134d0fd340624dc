//! Adaptive edge perception loss: grayscale, Gaussian blur, Sobel
//! magnitude, a maximum-entropy dynamic threshold per image, then the mean
//! squared difference of the masked edge maps.
//!
//! The convolutional stages run on the graph so the loss is differentiable
//! through the generated image. Thresholds and masks are computed outside
//! the graph and applied as constants; gradient flows through surviving
//! pixels only.

use ndarray::{Array2, ArrayD, Axis, Ix2};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Value};
use crate::{Error, Result};

/// Epsilon inside the Sobel magnitude square root. Keeps the gradient
/// finite where both directional derivatives vanish.
pub const SOBEL_EPS: f64 = 1e-12;

pub const GAUSSIAN_KERNEL_SIZE: usize = 5;
pub const GAUSSIAN_SIGMA: f64 = 1.0;

/// Whether the generated image is masked with its own threshold or the
/// real image's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    PerImage,
    SharedFromReal,
}

/// Edge magnitudes after thresholding, with the threshold that produced
/// them. Surviving pixels keep their continuous magnitude.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub magnitudes: Array2<f64>,
    pub threshold: u8,
}

/// Pixel counts over the 256 intensity bins of a scaled edge map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u64; 256],
}

impl Histogram256 {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Rescale from [-1, 1] to [0, 1] and reduce RGB to luma. Input
/// [B, 3, H, W], output [B, 1, H, W].
pub fn to_grayscale(g: &mut Graph, img: Value) -> Value {
    let s = g.shape(img);
    assert_eq!(s.len(), 4, "to_grayscale expects [B, 3, H, W]");
    assert_eq!(s[1], 3, "to_grayscale expects 3 channels");
    let shifted = g.add_scalar(img, 1.0);
    let unit = g.scale(shifted, 0.5);
    let w = ArrayD::from_shape_vec(vec![1, 3, 1, 1], vec![0.299, 0.587, 0.114]).unwrap();
    let w = g.input(w);
    g.conv2d(unit, w, 1)
}

fn gaussian_kernel(k: usize, sigma: f64) -> Array2<f64> {
    let c = (k / 2) as isize;
    let mut kern = Array2::zeros((k, k));
    for y in 0..k {
        for x in 0..k {
            let dy = y as isize - c;
            let dx = x as isize - c;
            kern[[y, x]] = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    let sum = kern.sum();
    kern / sum
}

/// Normalized Gaussian smoothing with symmetric reflect padding, so
/// constant images are fixed points. Single-channel [B, 1, H, W] maps.
pub fn gaussian_blur(g: &mut Graph, gray: Value, kernel_size: usize, sigma: f64) -> Result<Value> {
    if kernel_size % 2 == 0 {
        return Err(Error::Config(format!(
            "gaussian kernel size must be odd, got {kernel_size}"
        )));
    }
    let s = g.shape(gray);
    assert_eq!(s.len(), 4, "gaussian_blur expects [B, 1, H, W]");
    assert_eq!(s[1], 1, "gaussian_blur expects a single channel");
    let kern = gaussian_kernel(kernel_size, sigma)
        .into_shape_with_order(vec![1, 1, kernel_size, kernel_size])
        .unwrap();
    let w = g.input(kern.into_dyn());
    let padded = g.pad_reflect(gray, kernel_size / 2);
    Ok(g.conv2d(padded, w, 1))
}

/// Euclidean Sobel gradient magnitude with reflect padding:
/// sqrt(gx^2 + gy^2 + eps) on [B, 1, H, W] maps.
pub fn sobel_magnitude(g: &mut Graph, x: Value) -> Value {
    let s = g.shape(x);
    assert_eq!(s.len(), 4, "sobel_magnitude expects [B, 1, H, W]");
    assert_eq!(s[1], 1, "sobel_magnitude expects a single channel");
    let kx: Vec<f64> = vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
    let ky: Vec<f64> = vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
    let wx = g.input(ArrayD::from_shape_vec(vec![1, 1, 3, 3], kx).unwrap());
    let wy = g.input(ArrayD::from_shape_vec(vec![1, 1, 3, 3], ky).unwrap());
    let padded = g.pad_reflect(x, 1);
    let gx = g.conv2d(padded, wx, 1);
    let gy = g.conv2d(padded, wy, 1);
    let gx2 = g.mul(gx, gx);
    let gy2 = g.mul(gy, gy);
    let sum = g.add(gx2, gy2);
    let stable = g.add_scalar(sum, SOBEL_EPS);
    g.sqrt(stable)
}

/// Full differentiable edge-magnitude pipeline for a batch of images.
pub fn edge_magnitudes(g: &mut Graph, img: Value) -> Result<Value> {
    edge_magnitudes_with(g, img, GAUSSIAN_SIGMA)
}

/// Edge-magnitude pipeline with a caller-chosen blur width.
pub fn edge_magnitudes_with(g: &mut Graph, img: Value, sigma: f64) -> Result<Value> {
    let gray = to_grayscale(g, img);
    let blurred = gaussian_blur(g, gray, GAUSSIAN_KERNEL_SIZE, sigma)?;
    Ok(sobel_magnitude(g, blurred))
}

/// Bin index of a magnitude under per-map scaling by 255 / max.
fn bin_of(v: f64, scale: f64) -> usize {
    ((v * scale).round() as usize).min(255)
}

fn map_scale(m: &Array2<f64>) -> f64 {
    let max = m.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        255.0 / max
    } else {
        0.0
    }
}

/// Count pixels per bin after scaling the map's maximum to 255. An
/// all-zero map lands entirely in bin 0.
pub fn edge_histogram(edges: &Array2<f64>) -> Histogram256 {
    let scale = map_scale(edges);
    let mut counts = [0u64; 256];
    for &v in edges.iter() {
        counts[bin_of(v, scale)] += 1;
    }
    Histogram256 { counts }
}

/// Kapur maximum-entropy threshold: the smallest bin q maximizing the sum
/// of the entropies of the normalized low (i <= q) and high (i > q)
/// partitions. An empty partition contributes zero entropy.
pub fn max_entropy_threshold(h: &Histogram256) -> Result<u8> {
    let total = h.total();
    if total == 0 {
        return Err(Error::Data("empty histogram".into()));
    }
    let n = total as f64;
    // H_low(q) = ln(P) - S/P with P the low partition's mass and S its
    // sum of p*ln(p); same algebra on the complement for H_high.
    let mut s_all = 0.0;
    for &c in &h.counts {
        if c > 0 {
            let p = c as f64 / n;
            s_all += p * p.ln();
        }
    }
    let mut best_q = 0usize;
    let mut best_h = f64::NEG_INFINITY;
    let mut count_low = 0u64;
    let mut p_low = 0.0;
    let mut s_low = 0.0;
    for q in 0..256 {
        if h.counts[q] > 0 {
            let p = h.counts[q] as f64 / n;
            count_low += h.counts[q];
            p_low += p;
            s_low += p * p.ln();
        }
        let h1 = if count_low > 0 {
            p_low.ln() - s_low / p_low
        } else {
            0.0
        };
        let h2 = if count_low < total {
            let p_high = (total - count_low) as f64 / n;
            p_high.ln() - (s_all - s_low) / p_high
        } else {
            0.0
        };
        if h1 + h2 > best_h {
            best_h = h1 + h2;
            best_q = q;
        }
    }
    Ok(best_q as u8)
}

/// Zero every pixel whose scaled bin falls strictly below t; survivors
/// keep their continuous magnitude.
pub fn apply_threshold(edges: &Array2<f64>, t: u8) -> EdgeMap {
    let scale = map_scale(edges);
    let mut magnitudes = edges.clone();
    for v in magnitudes.iter_mut() {
        if bin_of(*v, scale) < t as usize {
            *v = 0.0;
        }
    }
    EdgeMap {
        magnitudes,
        threshold: t,
    }
}

/// Threshold of one image's edge map.
pub fn map_threshold(edges: &Array2<f64>) -> Result<u8> {
    max_entropy_threshold(&edge_histogram(edges))
}

fn slice_map(e: &ArrayD<f64>, b: usize) -> Array2<f64> {
    e.index_axis(Axis(0), b)
        .index_axis(Axis(0), 0)
        .to_owned()
        .into_dimensionality::<Ix2>()
        .unwrap()
}

/// Per-image thresholds for a [B, 1, H, W] batch of edge maps.
fn batch_thresholds(e: &ArrayD<f64>) -> Result<Vec<u8>> {
    (0..e.shape()[0])
        .map(|b| map_threshold(&slice_map(e, b)))
        .collect()
}

/// 0/1 mask keeping pixels at or above each image's threshold bin.
fn batch_mask(e: &ArrayD<f64>, ts: &[u8]) -> ArrayD<f64> {
    let mut mask = ArrayD::zeros(e.raw_dim());
    for (b, &t) in ts.iter().enumerate() {
        let m = slice_map(e, b);
        let scale = map_scale(&m);
        let mut out = mask.index_axis_mut(Axis(0), b);
        let mut out = out.index_axis_mut(Axis(0), 0);
        for (o, &v) in out.iter_mut().zip(m.iter()) {
            if bin_of(v, scale) >= t as usize {
                *o = 1.0;
            }
        }
    }
    mask
}

/// Mean squared difference between the thresholded edge maps of the real
/// and generated images. Each image gets its own threshold under
/// [`ThresholdPolicy::PerImage`]; the real image's threshold masks both
/// under [`ThresholdPolicy::SharedFromReal`].
pub fn aepl_loss(g: &mut Graph, real: Value, fake: Value, policy: ThresholdPolicy) -> Result<Value> {
    aepl_loss_with(g, real, fake, policy, GAUSSIAN_SIGMA)
}

/// Edge loss with a caller-chosen blur width.
pub fn aepl_loss_with(
    g: &mut Graph,
    real: Value,
    fake: Value,
    policy: ThresholdPolicy,
    sigma: f64,
) -> Result<Value> {
    let rs = g.shape(real).to_vec();
    let fs = g.shape(fake).to_vec();
    if rs != fs {
        return Err(Error::Data(format!(
            "edge loss shapes differ: {rs:?} vs {fs:?}"
        )));
    }
    let er = edge_magnitudes_with(g, real, sigma)?;
    let ef = edge_magnitudes_with(g, fake, sigma)?;
    let tr = batch_thresholds(g.value(er))?;
    let tf = match policy {
        ThresholdPolicy::PerImage => batch_thresholds(g.value(ef))?,
        ThresholdPolicy::SharedFromReal => tr.clone(),
    };
    let mr = batch_mask(g.value(er), &tr);
    let mf = batch_mask(g.value(ef), &tf);
    let masked_r = g.mul_const(er, mr);
    let masked_f = g.mul_const(ef, mf);
    Ok(g.mse(masked_r, masked_f))
}

/// Every stage of the pipeline for one [3, H, W] image, for export and
/// inspection.
#[derive(Debug, Clone)]
pub struct EdgeStages {
    pub gray: Array2<f64>,
    pub blurred: Array2<f64>,
    pub magnitudes: Array2<f64>,
    pub edge: EdgeMap,
}

/// Run the pipeline outside any training graph.
pub fn edge_stages(img: &ArrayD<f64>) -> Result<EdgeStages> {
    let s = img.shape().to_vec();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::Data(format!(
            "edge pipeline expects a [3, H, W] image, got {s:?}"
        )));
    }
    let mut g = Graph::new();
    let v = g.input(img.clone().insert_axis(Axis(0)));
    let gray = to_grayscale(&mut g, v);
    let blurred = gaussian_blur(&mut g, gray, GAUSSIAN_KERNEL_SIZE, GAUSSIAN_SIGMA)?;
    let mags = sobel_magnitude(&mut g, blurred);
    let magnitudes = slice_map(g.value(mags), 0);
    let t = map_threshold(&magnitudes)?;
    Ok(EdgeStages {
        gray: slice_map(g.value(gray), 0),
        blurred: slice_map(g.value(blurred), 0),
        magnitudes: magnitudes.clone(),
        edge: apply_threshold(&magnitudes, t),
    })
}

fn lift_map(m: &Array2<f64>) -> ArrayD<f64> {
    ArrayD::from_shape_vec(vec![1, 1, m.nrows(), m.ncols()], m.iter().cloned().collect()).unwrap()
}

/// Blur a bare 2-D array (test and inspection convenience).
pub fn blur_array(gray: &Array2<f64>, kernel_size: usize, sigma: f64) -> Result<Array2<f64>> {
    let mut g = Graph::new();
    let v = g.input(lift_map(gray));
    let y = gaussian_blur(&mut g, v, kernel_size, sigma)?;
    Ok(slice_map(g.value(y), 0))
}

/// Sobel magnitude of a bare 2-D array.
pub fn sobel_array(x: &Array2<f64>) -> Array2<f64> {
    let mut g = Graph::new();
    let v = g.input(lift_map(x));
    let y = sobel_magnitude(&mut g, v);
    slice_map(g.value(y), 0)
}
