//! Image quality metrics over [-1, 1] tensors: PSNR, windowed SSIM, and
//! RMSE in 8-bit gray levels, plus dataset-level evaluation with an image
//! grid export.

use std::path::Path;

use ndarray::{ArrayD, Axis};

use crate::data::{denormalize, ImagePair};
use crate::generator::Generator;
use crate::{Error, Result};

/// Dynamic range of normalized images.
pub const SIGNAL_MAX: f64 = 2.0;

/// Sentinel for identical images, where PSNR diverges.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn mean_squared_error(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "metric inputs must share a shape");
    let n = a.len() as f64;
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Peak signal-to-noise ratio in dB, capped at 100.
pub fn psnr(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    let mse = mean_squared_error(a, b);
    if mse == 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (SIGNAL_MAX * SIGNAL_MAX / mse).log10()).min(PSNR_CAP)
}

/// Root mean squared error expressed in 8-bit gray levels (the [-1, 1]
/// range maps affinely onto 0..255, so the conversion is a 127.5 factor).
pub fn rmse(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    127.5 * mean_squared_error(a, b).sqrt()
}

fn ssim_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as isize;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dy = y as isize - c;
            let dx = x as isize - c;
            w.push(
                (-((dy * dy + dx * dx) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp(),
            );
        }
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean structural similarity: 11x11 Gaussian-weighted windows at every
/// valid position, averaged over windows and channels. Inputs [C, H, W].
pub fn ssim(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "metric inputs must share a shape");
    let s = a.shape();
    assert_eq!(s.len(), 3, "ssim expects [C, H, W]");
    let (ch, h, w) = (s[0], s[1], s[2]);
    assert!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        "ssim needs at least one {SSIM_WINDOW}x{SSIM_WINDOW} window"
    );
    let c1 = (0.01 * SIGNAL_MAX) * (0.01 * SIGNAL_MAX);
    let c2 = (0.03 * SIGNAL_MAX) * (0.03 * SIGNAL_MAX);
    let win = ssim_window();

    let mut channel_sum = 0.0;
    for c in 0..ch {
        let pa = a.index_axis(Axis(0), c);
        let pb = b.index_axis(Axis(0), c);
        let mut acc = 0.0;
        let mut count = 0usize;
        for y0 in 0..=(h - SSIM_WINDOW) {
            for x0 in 0..=(w - SSIM_WINDOW) {
                let (mut ma, mut mb) = (0.0, 0.0);
                for (k, wv) in win.iter().enumerate() {
                    let (dy, dx) = (k / SSIM_WINDOW, k % SSIM_WINDOW);
                    ma += wv * pa[[y0 + dy, x0 + dx]];
                    mb += wv * pb[[y0 + dy, x0 + dx]];
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for (k, wv) in win.iter().enumerate() {
                    let (dy, dx) = (k / SSIM_WINDOW, k % SSIM_WINDOW);
                    let da = pa[[y0 + dy, x0 + dx]] - ma;
                    let db = pb[[y0 + dy, x0 + dx]] - mb;
                    va += wv * da * da;
                    vb += wv * db * db;
                    cov += wv * da * db;
                }
                let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                let cs = (2.0 * cov + c2) / (va + vb + c2);
                acc += l * cs;
                count += 1;
            }
        }
        channel_sum += acc / count as f64;
    }
    channel_sum / ch as f64
}

/// Metrics of one evaluated pair.
#[derive(Debug, Clone)]
pub struct PairMetrics {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
}

/// Dataset-level averages plus the per-pair rows behind them.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rows: Vec<PairMetrics>,
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
}

impl MetricsReport {
    /// Plain-text table, one row per pair plus the averages.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>10} {:>10} {:>10}\n",
            "pair", "psnr", "ssim", "rmse"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<20} {:>10.4} {:>10.4} {:>10.4}\n",
                r.id, r.psnr, r.ssim, r.rmse
            ));
        }
        out.push_str(&format!(
            "{:<20} {:>10.4} {:>10.4} {:>10.4}\n",
            "average", self.psnr, self.ssim, self.rmse
        ));
        out
    }

    /// Machine-readable key-value lines with fixed key names.
    pub fn key_values(&self) -> String {
        format!(
            "psnr {}\nssim {}\nrmse {}\n",
            self.psnr, self.ssim, self.rmse
        )
    }
}

/// Write a source | generated | target grid, one row per pair.
fn write_grid(
    path: &Path,
    rows: &[(ArrayD<f64>, ArrayD<f64>, ArrayD<f64>)],
) -> Result<()> {
    const PAD: usize = 2;
    let s = rows[0].0.shape();
    let (h, w) = (s[1], s[2]);
    let gw = 3 * w + 2 * PAD;
    let gh = rows.len() * h + (rows.len() - 1) * PAD;
    let mut grid = image::RgbImage::from_pixel(gw as u32, gh as u32, image::Rgb([255, 255, 255]));
    for (r, (src, generated, tgt)) in rows.iter().enumerate() {
        for (col, t) in [src, generated, tgt].into_iter().enumerate() {
            let (oy, ox) = (r * (h + PAD), col * (w + PAD));
            for y in 0..h {
                for x in 0..w {
                    let px = [
                        denormalize(t[[0, y, x]]),
                        denormalize(t[[1, y, x]]),
                        denormalize(t[[2, y, x]]),
                    ];
                    grid.put_pixel((ox + x) as u32, (oy + y) as u32, image::Rgb(px));
                }
            }
        }
    }
    grid.save(path)?;
    Ok(())
}

/// Evaluate an arbitrary translation function over a dataset. Averages
/// PSNR/SSIM/RMSE and optionally writes the comparison grid.
pub fn evaluate_with<F>(
    mut translate: F,
    pairs: &[ImagePair],
    grid_path: Option<&Path>,
) -> Result<MetricsReport>
where
    F: FnMut(&ArrayD<f64>) -> Result<ArrayD<f64>>,
{
    if pairs.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    let mut grid_rows = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let generated = translate(&pair.source)?;
        rows.push(PairMetrics {
            id: pair.id.clone(),
            psnr: psnr(&generated, &pair.target),
            ssim: ssim(&generated, &pair.target),
            rmse: rmse(&generated, &pair.target),
        });
        if grid_path.is_some() {
            grid_rows.push((pair.source.clone(), generated, pair.target.clone()));
        }
    }
    if let Some(path) = grid_path {
        write_grid(path, &grid_rows)?;
    }
    let n = rows.len() as f64;
    Ok(MetricsReport {
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        rmse: rows.iter().map(|r| r.rmse).sum::<f64>() / n,
        rows,
    })
}

/// Evaluate a generator: translate each source with a batch dimension
/// added, compare against the target.
pub fn evaluate(
    generator: &mut Generator,
    pairs: &[ImagePair],
    grid_path: Option<&Path>,
) -> Result<MetricsReport> {
    evaluate_with(
        |src| {
            let batched = src.clone().insert_axis(Axis(0));
            let out = generator.translate(&batched);
            Ok(out.index_axis(Axis(0), 0).to_owned())
        },
        pairs,
        grid_path,
    )
}
