//! Paired data: a synthetic sketch-to-texture task generated on the fly,
//! plus loading of aligned source/target image folders.
//!
//! The synthetic target is an information-rich image (colored, textured
//! regions on a gradient background); the source is an information-poor
//! binary edge sketch of it. Region placement uses a shuffled grid of
//! disjoint cells, so regions never overlap and placement depends only on
//! integer PRNG draws.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{GrayImage, RgbImage};
use ndarray::{Array2, Array3, ArrayD};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aepl;
use crate::{Error, Result};

/// One aligned pair, both tensors [3, H, W] in [-1, 1].
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub source: ArrayD<f64>,
    pub target: ArrayD<f64>,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DatasetKind {
    Synthetic,
    Folder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Square edge length in pixels.
    pub size: usize,
    /// Number of synthetic pairs; ignored for folders.
    pub count: usize,
    pub seed: u64,
    /// Folder root holding source/ and target/; FOLDER only.
    pub root: Option<PathBuf>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            size: 64,
            count: 16,
            seed: 0,
            root: None,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self, n_downsample: usize) -> Result<()> {
        if self.size < 32 {
            return Err(Error::Config("dataset size must be at least 32".into()));
        }
        let grain = 1usize << n_downsample;
        if self.size % grain != 0 {
            return Err(Error::Config(format!(
                "dataset size {} must be divisible by {grain} (2^n_downsample)",
                self.size
            )));
        }
        if self.count == 0 {
            return Err(Error::Config("dataset count must be at least 1".into()));
        }
        if self.kind == DatasetKind::Folder && self.root.is_none() {
            return Err(Error::Config("FOLDER datasets need a root path".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Rectangle,
    Ellipse,
    Polyline,
}

/// Construction record of one painted region (bounding box, inclusive).
#[derive(Debug, Clone)]
pub struct RegionInfo {
    pub kind: RegionKind,
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl RegionInfo {
    pub fn overlaps(&self, o: &RegionInfo) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }
}

fn pair_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x0000_0100_0000_01B3)
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .rotate_left(23);
    ChaCha8Rng::seed_from_u64(mixed)
}

struct Texture {
    color: [f64; 3],
    wx: f64,
    wy: f64,
    phase: f64,
}

impl Texture {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let color = [
            rng.random_range(0.25..1.0),
            rng.random_range(0.25..1.0),
            rng.random_range(0.25..1.0),
        ];
        // Integer cycle counts keep placement free of float rounding;
        // periods of 16/k pixels stay visible at desk resolution.
        let wx = rng.random_range(1..=3) as f64 * (2.0 * PI / 16.0);
        let wy = rng.random_range(1..=3) as f64 * (2.0 * PI / 16.0);
        let phase = rng.random_range(0..16) as f64 * (2.0 * PI / 16.0);
        Texture {
            color,
            wx,
            wy,
            phase,
        }
    }

    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        let s = 0.75 + 0.25 * (self.wx * x as f64 + self.wy * y as f64 + self.phase).sin();
        (self.color[c] * s).clamp(0.0, 1.0)
    }
}

fn seg_dist(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((px - a.0) * dx + (py - a.1) * dy) / len2
    }
    .clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn paint_region(
    img: &mut Array3<f64>,
    rng: &mut ChaCha8Rng,
    kind: RegionKind,
    cell: (usize, usize, usize, usize),
) -> RegionInfo {
    let (cy0, cx0, cy1, cx1) = cell;
    let tex = Texture::draw(rng);
    let ch = cy1 - cy0;
    let cw = cx1 - cx0;
    // Region box inside the cell, at least 4 pixels wide, 1 pixel margin.
    let h = rng.random_range(ch / 2..=ch - 2).max(4);
    let w = rng.random_range(cw / 2..=cw - 2).max(4);
    let y0 = cy0 + 1 + rng.random_range(0..=ch - 2 - h);
    let x0 = cx0 + 1 + rng.random_range(0..=cw - 2 - w);
    let (y1, x1) = (y0 + h - 1, x0 + w - 1);

    match kind {
        RegionKind::Rectangle => {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    for c in 0..3 {
                        img[[c, y, x]] = tex.at(c, y, x);
                    }
                }
            }
        }
        RegionKind::Ellipse => {
            let (ecy, ecx) = ((y0 + y1) as f64 / 2.0, (x0 + x1) as f64 / 2.0);
            let (ry, rx) = (h as f64 / 2.0, w as f64 / 2.0);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let dy = (y as f64 - ecy) / ry;
                    let dx = (x as f64 - ecx) / rx;
                    if dy * dy + dx * dx <= 1.0 {
                        for c in 0..3 {
                            img[[c, y, x]] = tex.at(c, y, x);
                        }
                    }
                }
            }
        }
        RegionKind::Polyline => {
            let points: Vec<(f64, f64)> = (0..rng.random_range(3..=4))
                .map(|_| {
                    (
                        rng.random_range(x0..=x1) as f64,
                        rng.random_range(y0..=y1) as f64,
                    )
                })
                .collect();
            let th = rng.random_range(1..=2) as f64;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let near = points
                        .windows(2)
                        .any(|s| seg_dist(x as f64, y as f64, s[0], s[1]) <= th);
                    if near {
                        for c in 0..3 {
                            img[[c, y, x]] = tex.at(c, y, x);
                        }
                    }
                }
            }
        }
    }
    RegionInfo {
        kind,
        y0,
        x0,
        y1,
        x1,
    }
}

/// Generate one synthetic pair plus the ledger of painted regions.
pub fn synth_pair_traced(seed: u64, index: u64, size: usize) -> (ImagePair, Vec<RegionInfo>) {
    assert!(size >= 32, "synthetic pairs need size >= 32");
    let mut rng = pair_rng(seed, index);

    // Gradient background in [0, 1].
    let mut target = Array3::<f64>::zeros((3, size, size));
    for c in 0..3 {
        let base = rng.random_range(0.15..0.45);
        let sx = rng.random_range(-0.25..0.25);
        let sy = rng.random_range(-0.25..0.25);
        for y in 0..size {
            for x in 0..size {
                target[[c, y, x]] =
                    base + sx * (x as f64 / size as f64) + sy * (y as f64 / size as f64);
            }
        }
    }

    // Disjoint 3x3 grid cells keep regions non-overlapping by construction.
    let cell = size / 3;
    let mut cells: Vec<(usize, usize)> = (0..3).flat_map(|gy| (0..3).map(move |gx| (gy, gx))).collect();
    cells.shuffle(&mut rng);
    let n = rng.random_range(3..=6);
    let kinds = [
        RegionKind::Rectangle,
        RegionKind::Ellipse,
        RegionKind::Polyline,
    ];
    let mut regions = Vec::with_capacity(n);
    for (k, &(gy, gx)) in cells.iter().take(n).enumerate() {
        let bounds = (gy * cell, gx * cell, (gy + 1) * cell, (gx + 1) * cell);
        let kind = kinds[k % 3];
        regions.push(paint_region(&mut target, &mut rng, kind, bounds));
    }

    target.mapv_inplace(|v| v.clamp(0.0, 1.0) * 2.0 - 1.0);
    let target = target.into_dyn();

    // Source: binary edge sketch, ink on paper, replicated to 3 channels.
    let stages = aepl::edge_stages(&target).expect("edge pipeline on a synthetic target");
    let mut source = Array3::<f64>::from_elem((3, size, size), 1.0);
    for y in 0..size {
        for x in 0..size {
            if stages.edge.magnitudes[[y, x]] > 0.0 {
                for c in 0..3 {
                    source[[c, y, x]] = -1.0;
                }
            }
        }
    }

    (
        ImagePair {
            source: source.into_dyn(),
            target,
            id: format!("synth-{seed}-{index}"),
        },
        regions,
    )
}

pub fn synth_pair(seed: u64, index: u64, size: usize) -> ImagePair {
    synth_pair_traced(seed, index, size).0
}

/// Map an 8-bit pixel to [-1, 1].
pub fn normalize_u8(v: u8) -> f64 {
    v as f64 / 127.5 - 1.0
}

/// Map [-1, 1] back to an 8-bit pixel, saturating outside the range.
pub fn denormalize(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Decode an RGB image into a [3, H, W] tensor in [-1, 1].
pub fn rgb_to_tensor(img: &RgbImage) -> ArrayD<f64> {
    let (w, h) = img.dimensions();
    let mut t = Array3::<f64>::zeros((3, h as usize, w as usize));
    for (x, y, p) in img.enumerate_pixels() {
        for c in 0..3 {
            t[[c, y as usize, x as usize]] = normalize_u8(p.0[c]);
        }
    }
    t.into_dyn()
}

/// Render a [3, H, W] tensor in [-1, 1] as an 8-bit RGB image.
pub fn tensor_to_rgb(t: &ArrayD<f64>) -> Result<RgbImage> {
    let s = t.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::Data(format!(
            "expected a [3, H, W] tensor, got {s:?}"
        )));
    }
    let (h, w) = (s[1], s[2]);
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                denormalize(t[[0, y, x]]),
                denormalize(t[[1, y, x]]),
                denormalize(t[[2, y, x]]),
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    Ok(img)
}

/// Render a [0, 1] map as 8-bit grayscale.
pub fn unit_map_to_gray(m: &Array2<f64>) -> GrayImage {
    GrayImage::from_fn(m.ncols() as u32, m.nrows() as u32, |x, y| {
        image::Luma([(m[[y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8])
    })
}

/// Render a non-negative map as 8-bit grayscale, scaling its maximum to
/// 255 (the edge-histogram convention).
pub fn scaled_map_to_gray(m: &Array2<f64>) -> GrayImage {
    let max = m.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    GrayImage::from_fn(m.ncols() as u32, m.nrows() as u32, |x, y| {
        image::Luma([(m[[y as usize, x as usize]] * scale).round().min(255.0) as u8])
    })
}

/// Image filenames (png, jpg, jpeg) found in a directory, sorted.
pub fn list_images(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let lower = name.to_lowercase();
        if lower.ends_with(".png") || lower.ends_with(".jpg") || lower.ends_with(".jpeg") {
            names.insert(name);
        }
    }
    Ok(names)
}

/// Load an image as a normalized [3, size, size] tensor.
pub fn load_resized(path: &Path, size: usize) -> Result<ArrayD<f64>> {
    let img = image::open(path)?;
    let img = img
        .resize_exact(size as u32, size as u32, FilterType::Triangle)
        .to_rgb8();
    Ok(rgb_to_tensor(&img))
}

/// Load an image at its native size as a normalized [3, H, W] tensor.
pub fn load_image(path: &Path) -> Result<ArrayD<f64>> {
    Ok(rgb_to_tensor(&image::open(path)?.to_rgb8()))
}

/// Load filename-matched pairs from root/source and root/target, resized
/// to size x size. Returns the pairs in lexicographic order plus a report
/// of files present on only one side.
pub fn load_paired_folder(root: &Path, size: usize) -> Result<(Vec<ImagePair>, Vec<String>)> {
    let src_dir = root.join("source");
    let tgt_dir = root.join("target");
    let src_names = list_images(&src_dir)?;
    let tgt_names = list_images(&tgt_dir)?;

    let mut skipped = Vec::new();
    for name in src_names.difference(&tgt_names) {
        skipped.push(format!("{name} (source only)"));
    }
    for name in tgt_names.difference(&src_names) {
        skipped.push(format!("{name} (target only)"));
    }
    skipped.sort();

    let matched: Vec<&String> = src_names.intersection(&tgt_names).collect();
    if matched.is_empty() {
        return Err(Error::Data(format!(
            "{}: no filename-matched source/target pairs",
            root.display()
        )));
    }
    let mut pairs = Vec::with_capacity(matched.len());
    for name in matched {
        pairs.push(ImagePair {
            source: load_resized(&src_dir.join(name), size)?,
            target: load_resized(&tgt_dir.join(name), size)?,
            id: name.clone(),
        });
    }
    Ok((pairs, skipped))
}

/// Materialize a dataset. Synthetic pairs use indices [offset, offset + count).
pub fn build_dataset(spec: &DatasetSpec, offset: u64) -> Result<(Vec<ImagePair>, Vec<String>)> {
    match spec.kind {
        DatasetKind::Synthetic => {
            let pairs = (0..spec.count as u64)
                .map(|i| synth_pair(spec.seed, offset + i, spec.size))
                .collect();
            Ok((pairs, Vec::new()))
        }
        DatasetKind::Folder => {
            let root = spec
                .root
                .as_ref()
                .ok_or_else(|| Error::Config("FOLDER datasets need a root path".into()))?;
            load_paired_folder(root, spec.size)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    #[test]
    fn synthesis_is_deterministic_in_seed_and_index() {
        let a = synth_pair(7, 3, 64);
        let b = synth_pair(7, 3, 64);
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
        assert_eq!(a.id, b.id);

        let c = synth_pair(7, 4, 64);
        assert_ne!(a.target, c.target);
        let d = synth_pair(8, 3, 64);
        assert_ne!(a.target, d.target);
    }

    #[test]
    fn source_is_a_two_level_sketch() {
        let pair = synth_pair(11, 0, 64);
        for c in 0..3 {
            let chan = pair.source.index_axis(Axis(0), c);
            let mut values: Vec<f64> = chan.iter().cloned().collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            assert_eq!(values, vec![-1.0, 1.0], "channel {c}");
        }
    }

    #[test]
    fn region_ledger_counts_and_disjointness() {
        for index in 0..8 {
            let (pair, regions) = synth_pair_traced(21, index, 64);
            assert!(
                (3..=6).contains(&regions.len()),
                "index {index}: {} regions",
                regions.len()
            );
            for (i, a) in regions.iter().enumerate() {
                assert!(a.y1 < 64 && a.x1 < 64);
                assert!(a.y0 <= a.y1 && a.x0 <= a.x1);
                for b in regions.iter().skip(i + 1) {
                    assert!(!a.overlaps(b), "regions {a:?} and {b:?} overlap");
                }
            }
            for t in pair.target.iter().chain(pair.source.iter()) {
                assert!((-1.0..=1.0).contains(t));
            }
            assert_eq!(pair.source.shape(), pair.target.shape());
        }
    }

    #[test]
    fn normalization_is_the_affine_pixel_map() {
        assert_eq!(normalize_u8(255), 1.0);
        assert_eq!(normalize_u8(0), -1.0);
        for v in 0..=255u8 {
            assert_eq!(denormalize(normalize_u8(v)), v);
        }
        assert_eq!(denormalize(2.0), 255);
        assert_eq!(denormalize(-2.0), 0);
    }

    #[test]
    fn tensor_image_round_trip() {
        let pair = synth_pair(31, 0, 64);
        let img = tensor_to_rgb(&pair.target).unwrap();
        let back = rgb_to_tensor(&img);
        for (a, b) in pair.target.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 1.0 / 127.5 + 1e-12);
        }
    }

    fn write_rgb(path: &Path, w: u32, h: u32, fill: [u8; 3]) {
        RgbImage::from_pixel(w, h, image::Rgb(fill)).save(path).unwrap();
    }

    #[test]
    fn folder_loading_matches_by_filename() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("source")).unwrap();
        std::fs::create_dir_all(root.join("target")).unwrap();
        write_rgb(&root.join("source/a.png"), 8, 8, [255, 0, 0]);
        write_rgb(&root.join("source/b.png"), 10, 6, [0, 255, 0]);
        write_rgb(&root.join("target/b.png"), 8, 8, [0, 0, 255]);
        write_rgb(&root.join("target/c.png"), 8, 8, [255, 255, 255]);

        let (pairs, skipped) = load_paired_folder(root, 32).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].id, "b.png");
        assert_eq!(pairs[0].source.shape(), &[3, 32, 32]);
        assert_eq!(pairs[0].target.shape(), &[3, 32, 32]);
        assert_eq!(
            skipped,
            vec!["a.png (source only)".to_string(), "c.png (target only)".to_string()]
        );
        // Solid green resized stays solid green.
        assert!((pairs[0].source[[1, 16, 16]] - 1.0).abs() < 1e-9);
        assert!((pairs[0].source[[0, 16, 16]] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("source")).unwrap();
        std::fs::create_dir_all(root.join("target")).unwrap();
        write_rgb(&root.join("source/a.png"), 8, 8, [1, 2, 3]);
        write_rgb(&root.join("target/b.png"), 8, 8, [4, 5, 6]);
        assert!(matches!(
            load_paired_folder(root, 32),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn dataset_spec_validation() {
        let spec = DatasetSpec::default();
        assert!(spec.validate(2).is_ok());
        let small = DatasetSpec {
            size: 16,
            ..spec.clone()
        };
        assert!(small.validate(2).unwrap_err().is_usage());
        let odd = DatasetSpec {
            size: 66,
            ..spec.clone()
        };
        assert!(odd.validate(2).unwrap_err().is_usage());
        let folder = DatasetSpec {
            kind: DatasetKind::Folder,
            root: None,
            ..spec
        };
        assert!(folder.validate(2).unwrap_err().is_usage());
    }

    #[test]
    fn build_dataset_offsets_are_disjoint_streams() {
        let spec = DatasetSpec {
            count: 2,
            ..DatasetSpec::default()
        };
        let (train, _) = build_dataset(&spec, 0).unwrap();
        let (eval, _) = build_dataset(&spec, 2).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(eval.len(), 2);
        assert_ne!(train[0].target, eval[0].target);
        assert_eq!(train[0].id, "synth-0-0");
        assert_eq!(eval[0].id, "synth-0-2");
    }
}
