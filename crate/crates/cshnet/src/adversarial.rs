//! Multi-scale patch discriminator and the adversarial loss family:
//! least-squares GAN loss, feature matching, and the content term.

use std::path::{Path, PathBuf};

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Value};
use crate::blocks::{conv, Pad, INSTANCE_NORM_EPS};
use crate::params::{ParamCtx, ParamStore};
use crate::{checkpoint, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Levels in the pixel-pyramid content loss (original plus two poolings).
pub const CONTENT_PYRAMID_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// First-layer width; doubles per layer, capped at 8x.
    pub ndf: usize,
    /// Independent patch discriminators, each on a 2x coarser input.
    pub scale_count: usize,
    /// Stride-2 conv layers per scale (the feature layers).
    pub conv_layers: usize,
    /// Channels of each conditioning image; the nets see source and
    /// candidate concatenated, so twice this many.
    pub image_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            ndf: 64,
            scale_count: 2,
            conv_layers: 4,
            image_channels: 3,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ndf == 0 {
            return Err(Error::Config("ndf must be positive".into()));
        }
        if self.scale_count == 0 {
            return Err(Error::Config("scale_count must be at least 1".into()));
        }
        if self.conv_layers == 0 {
            return Err(Error::Config("conv_layers must be at least 1".into()));
        }
        if self.image_channels != 3 {
            return Err(Error::Config("image_channels must be 3".into()));
        }
        Ok(())
    }

    fn layer_width(&self, i: usize) -> usize {
        self.ndf << i.min(3)
    }

    /// Smallest input edge the stride bookkeeping supports: the coarsest
    /// scale must still hand the final 4x4 conv a 2-pixel map.
    pub fn min_input_edge(&self) -> usize {
        2 << (self.conv_layers + self.scale_count - 1)
    }
}

/// Per-scale logits and the intermediate features behind them.
#[derive(Debug)]
pub struct DiscriminatorOutput {
    /// One patch-logit map per scale, finest first, shape [B, 1, h, w].
    pub patch_logits: Vec<Value>,
    /// Per scale, the post-activation map of every conv layer, shallow
    /// to deep.
    pub features: Vec<Vec<Value>>,
}

/// One scale's tower: stride-2 4x4 convs with instance norm (skipped on
/// the first layer) and leaky ReLU, then a stride-1 4x4 conv to one logit
/// channel.
fn scale_tower(
    ctx: &mut ParamCtx,
    cfg: &DiscriminatorConfig,
    scale: usize,
    x: Value,
) -> (Value, Vec<Value>) {
    let mut y = x;
    let mut cin = 2 * cfg.image_channels;
    let mut feats = Vec::with_capacity(cfg.conv_layers);
    for i in 0..cfg.conv_layers {
        let cout = cfg.layer_width(i);
        let p = format!("d.s{scale}.layer{i}");
        y = conv(ctx, &p, y, cin, cout, 4, 2, Pad::Zero(1));
        if i > 0 {
            y = ctx.graph.instance_norm(y, INSTANCE_NORM_EPS);
        }
        y = ctx.graph.leaky_relu(y, LEAKY_SLOPE);
        feats.push(y);
        cin = cout;
    }
    let p = format!("d.s{scale}.out");
    let logits = conv(ctx, &p, y, cin, 1, 4, 1, Pad::Zero(1));
    (logits, feats)
}

/// Run every scale on the conditional pair (source, candidate). Scale k
/// sees the input average-pooled k times.
pub fn discriminator_forward(
    ctx: &mut ParamCtx,
    cfg: &DiscriminatorConfig,
    source: Value,
    candidate: Value,
) -> Result<DiscriminatorOutput> {
    let ss = ctx.graph.shape(source).to_vec();
    let cs = ctx.graph.shape(candidate).to_vec();
    if ss != cs {
        return Err(Error::Data(format!(
            "discriminator inputs differ in shape: {ss:?} vs {cs:?}"
        )));
    }
    if ss.len() != 4 || ss[1] != cfg.image_channels {
        return Err(Error::Data(format!(
            "discriminator expects [B, {}, H, W] inputs, got {ss:?}",
            cfg.image_channels
        )));
    }
    let min = cfg.min_input_edge();
    let grain = 1 << (cfg.scale_count - 1);
    for &edge in &ss[2..] {
        if edge < min || edge % grain != 0 {
            return Err(Error::Data(format!(
                "discriminator input edge {edge} unsupported: needs at least \
                 {min} and a multiple of {grain}"
            )));
        }
    }

    let mut x = ctx.graph.concat(&[source, candidate], 1);
    let mut patch_logits = Vec::with_capacity(cfg.scale_count);
    let mut features = Vec::with_capacity(cfg.scale_count);
    for scale in 0..cfg.scale_count {
        if scale > 0 {
            x = ctx.graph.avg_pool2(x);
        }
        let (logits, feats) = scale_tower(ctx, cfg, scale, x);
        patch_logits.push(logits);
        features.push(feats);
    }
    Ok(DiscriminatorOutput {
        patch_logits,
        features,
    })
}

/// A discriminator with materialized parameters.
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub store: ParamStore,
}

impl Discriminator {
    /// Materialize all parameters with a dry forward at the smallest legal
    /// size, then quantize so checkpoints are lossless in f32.
    pub fn build(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        {
            let mut g = Graph::new();
            let edge = config.min_input_edge();
            let dummy = ArrayD::zeros(vec![1, config.image_channels, edge, edge]);
            let s = g.input(dummy.clone());
            let c = g.input(dummy);
            let mut ctx = ParamCtx::new(&mut g, &mut store, seed);
            discriminator_forward(&mut ctx, &config, s, c)?;
        }
        store.quantize_f32();
        Ok(Self { config, store })
    }

    pub fn count_parameters(&self) -> usize {
        self.store.num_scalars()
    }
}

/// Least-squares GAN loss: squared distance of every patch logit from 1
/// (real target) or 0 (fake), averaged within and then across scales.
pub fn lsgan_loss(g: &mut Graph, logits: &[Value], target_is_real: bool) -> Value {
    assert!(!logits.is_empty(), "lsgan_loss needs at least one scale");
    let target = if target_is_real { 1.0 } else { 0.0 };
    let mut acc: Option<Value> = None;
    for &l in logits {
        let term = g.mse_scalar(l, target);
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term),
        });
    }
    g.scale(acc.unwrap(), 1.0 / logits.len() as f64)
}

/// Mean absolute difference between real and fake activations, averaged
/// over layers within a scale and then over scales.
pub fn feature_matching_loss(
    g: &mut Graph,
    real: &[Vec<Value>],
    fake: &[Vec<Value>],
) -> Result<Value> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::Data(format!(
            "feature matching: {} real scales vs {} fake scales",
            real.len(),
            fake.len()
        )));
    }
    let mut scale_means = Vec::with_capacity(real.len());
    for (s, (r_feats, f_feats)) in real.iter().zip(fake).enumerate() {
        if r_feats.len() != f_feats.len() || r_feats.is_empty() {
            return Err(Error::Data(format!(
                "feature matching: scale {s} has {} real layers vs {} fake",
                r_feats.len(),
                f_feats.len()
            )));
        }
        for (l, (&r, &f)) in r_feats.iter().zip(f_feats).enumerate() {
            if g.shape(r) != g.shape(f) {
                return Err(Error::Data(format!(
                    "feature matching: scale {s} layer {l} shape mismatch"
                )));
            }
        }
        let mut acc: Option<Value> = None;
        for (&r, &f) in r_feats.iter().zip(f_feats) {
            let term = g.l1(r, f);
            acc = Some(match acc {
                None => term,
                Some(a) => g.add(a, term),
            });
        }
        scale_means.push(g.scale(acc.unwrap(), 1.0 / r_feats.len() as f64));
    }
    let mut total = scale_means[0];
    for &m in &scale_means[1..] {
        total = g.add(total, m);
    }
    Ok(g.scale(total, 1.0 / scale_means.len() as f64))
}

/// How the content term compares real and generated images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentMode {
    /// Mean absolute difference over a 3-level average-pool pyramid.
    /// Needs no pretrained weights, so the default test path is hermetic.
    Pixel,
    /// Mean absolute difference of activations from a frozen conv stack
    /// loaded from a checkpoint.
    Feature(Option<PathBuf>),
}

/// One frozen feature-extractor layer: 4x4 stride-2 conv weights.
#[derive(Debug)]
pub struct FrozenLayer {
    pub weight: ArrayD<f64>,
    pub bias: ArrayD<f64>,
}

/// Load a frozen feature extractor: tensors feat0.weight/feat0.bias,
/// feat1..., each weight [Cout, Cin, 4, 4] chaining from 3 input channels.
pub fn load_feature_extractor(path: &Path) -> Result<Vec<FrozenLayer>> {
    let (_, tensors) = checkpoint::read_container(path)?;
    let mut layers = Vec::new();
    let mut cin = 3usize;
    loop {
        let i = layers.len();
        let (Some(weight), Some(bias)) = (
            tensors.get(&format!("feat{i}.weight")),
            tensors.get(&format!("feat{i}.bias")),
        ) else {
            break;
        };
        let ws = weight.shape();
        if ws.len() != 4 || ws[1] != cin || ws[2] != 4 || ws[3] != 4 {
            return Err(Error::Checkpoint(format!(
                "feat{i}.weight: expected [C, {cin}, 4, 4], got {ws:?}"
            )));
        }
        if bias.shape() != [ws[0]] {
            return Err(Error::Checkpoint(format!(
                "feat{i}.bias: expected [{}], got {:?}",
                ws[0],
                bias.shape()
            )));
        }
        cin = ws[0];
        layers.push(FrozenLayer {
            weight: weight.clone(),
            bias: bias.clone(),
        });
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint(
            "feature extractor checkpoint has no feat0 layer".into(),
        ));
    }
    if tensors.len() != 2 * layers.len() {
        return Err(Error::Checkpoint(
            "feature extractor checkpoint has unexpected extra tensors".into(),
        ));
    }
    Ok(layers)
}

/// Content term against a preloaded frozen stack: mean absolute feature
/// difference, averaged over layers.
pub fn content_loss_frozen(g: &mut Graph, real: Value, fake: Value, layers: &[FrozenLayer]) -> Value {
    assert!(!layers.is_empty());
    let rf = frozen_features(g, layers, real);
    let ff = frozen_features(g, layers, fake);
    let mut acc: Option<Value> = None;
    for (&r, &f) in rf.iter().zip(&ff) {
        let term = g.l1(r, f);
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term),
        });
    }
    g.scale(acc.unwrap(), 1.0 / layers.len() as f64)
}

fn frozen_features(g: &mut Graph, layers: &[FrozenLayer], img: Value) -> Vec<Value> {
    let mut y = img;
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        let w = g.input(l.weight.clone());
        let b = g.input(l.bias.clone());
        let p = g.pad_zero(y, 1);
        let c = g.conv2d(p, w, 2);
        let c = g.add_bias_channel(c, b);
        y = g.leaky_relu(c, LEAKY_SLOPE);
        out.push(y);
    }
    out
}

/// Content loss between a real and a generated image.
pub fn content_loss(g: &mut Graph, real: Value, fake: Value, mode: &ContentMode) -> Result<Value> {
    let rs = g.shape(real).to_vec();
    let fs = g.shape(fake).to_vec();
    if rs != fs {
        return Err(Error::Data(format!(
            "content loss shapes differ: {rs:?} vs {fs:?}"
        )));
    }
    match mode {
        ContentMode::Pixel => {
            let grain = 1 << (CONTENT_PYRAMID_LEVELS - 1);
            if rs.len() != 4 || rs[2] % grain != 0 || rs[3] % grain != 0 {
                return Err(Error::Data(format!(
                    "pixel content loss needs [B, C, H, W] with H and W \
                     multiples of {grain}, got {rs:?}"
                )));
            }
            let mut r = real;
            let mut f = fake;
            let mut acc: Option<Value> = None;
            for level in 0..CONTENT_PYRAMID_LEVELS {
                if level > 0 {
                    r = g.avg_pool2(r);
                    f = g.avg_pool2(f);
                }
                let term = g.l1(r, f);
                acc = Some(match acc {
                    None => term,
                    Some(a) => g.add(a, term),
                });
            }
            Ok(g.scale(acc.unwrap(), 1.0 / CONTENT_PYRAMID_LEVELS as f64))
        }
        ContentMode::Feature(None) => Err(Error::Config(
            "content mode \"feature\" requires a feature-extractor checkpoint".into(),
        )),
        ContentMode::Feature(Some(path)) => {
            let layers = load_feature_extractor(path)?;
            Ok(content_loss_frozen(g, real, fake, &layers))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn rand_array(shape: &[usize], seed: u64) -> ArrayD<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        ArrayD::from_shape_vec(shape.to_vec(), data).unwrap()
    }

    fn toy_config() -> DiscriminatorConfig {
        DiscriminatorConfig {
            ndf: 2,
            scale_count: 2,
            conv_layers: 4,
            image_channels: 3,
        }
    }

    fn run_forward(
        disc: &mut Discriminator,
        src: ArrayD<f64>,
        cand: ArrayD<f64>,
    ) -> (Graph, DiscriminatorOutput) {
        let mut g = Graph::new();
        let s = g.input(src);
        let c = g.input(cand);
        let out = {
            let mut ctx = ParamCtx::new(&mut g, &mut disc.store, 0);
            discriminator_forward(&mut ctx, &disc.config, s, c).unwrap()
        };
        (g, out)
    }

    #[test]
    fn two_scales_give_shrinking_logit_maps() {
        let mut disc = Discriminator::build(toy_config(), 3).unwrap();
        let src = rand_array(&[1, 3, 64, 64], 1);
        let cand = rand_array(&[1, 3, 64, 64], 2);
        let (g, out) = run_forward(&mut disc, src, cand);
        assert_eq!(out.patch_logits.len(), 2);
        let s0 = g.shape(out.patch_logits[0]).to_vec();
        let s1 = g.shape(out.patch_logits[1]).to_vec();
        assert_eq!(s0[..2], [1, 1]);
        assert_eq!(s1[..2], [1, 1]);
        assert!(s0[2] > s1[2] && s0[3] > s1[3], "{s0:?} vs {s1:?}");
    }

    #[test]
    fn zero_weights_leave_only_the_final_bias() {
        let mut disc = Discriminator::build(toy_config(), 3).unwrap();
        disc.store.zero_prefixed("d.");
        for s in 0..2 {
            disc.store.set(
                &format!("d.s{s}.out.bias"),
                ArrayD::from_elem(vec![1], 0.7),
            );
        }
        let src = rand_array(&[1, 3, 64, 64], 4);
        let cand = rand_array(&[1, 3, 64, 64], 5);
        let (g, out) = run_forward(&mut disc, src, cand);
        for &l in &out.patch_logits {
            for &v in g.value(l).iter() {
                assert_eq!(v, 0.7);
            }
        }
    }

    #[test]
    fn feature_lists_cover_every_conv_layer() {
        let mut disc = Discriminator::build(toy_config(), 3).unwrap();
        let src = rand_array(&[1, 3, 64, 64], 6);
        let cand = rand_array(&[1, 3, 64, 64], 7);
        let (g, out) = run_forward(&mut disc, src, cand);
        assert_eq!(out.features.len(), 2);
        for feats in &out.features {
            assert_eq!(feats.len(), disc.config.conv_layers);
            for pair in feats.windows(2) {
                let a = g.shape(pair[0]);
                let b = g.shape(pair[1]);
                assert!(a[2] > b[2], "features must go shallow to deep");
            }
        }
    }

    #[test]
    fn mismatched_input_shapes_are_rejected() {
        let mut disc = Discriminator::build(toy_config(), 3).unwrap();
        let mut g = Graph::new();
        let s = g.input(rand_array(&[1, 3, 64, 64], 8));
        let c = g.input(rand_array(&[1, 3, 32, 32], 9));
        let mut ctx = ParamCtx::new(&mut g, &mut disc.store, 0);
        let err = discriminator_forward(&mut ctx, &disc.config, s, c).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn extra_scales_reuse_the_finer_towers() {
        let fine = DiscriminatorConfig {
            scale_count: 1,
            ..toy_config()
        };
        let mut d1 = Discriminator::build(fine, 11).unwrap();
        let mut d2 = Discriminator::build(toy_config(), 11).unwrap();
        let src = rand_array(&[1, 3, 64, 64], 12);
        let cand = rand_array(&[1, 3, 64, 64], 13);
        let (g1, o1) = run_forward(&mut d1, src.clone(), cand.clone());
        let (g2, o2) = run_forward(&mut d2, src, cand);
        assert_eq!(g1.value(o1.patch_logits[0]), g2.value(o2.patch_logits[0]));
    }

    #[test]
    fn lsgan_hits_the_quadratic_anchors() {
        let mut g = Graph::new();
        let ones = g.input(ArrayD::from_elem(vec![1, 1, 3, 3], 1.0));
        let zeros = g.input(ArrayD::from_elem(vec![1, 1, 3, 3], 0.0));
        let half = g.input(ArrayD::from_elem(vec![1, 1, 3, 3], 0.5));

        let l = lsgan_loss(&mut g, &[ones], true);
        assert_eq!(g.scalar(l), 0.0);
        let l = lsgan_loss(&mut g, &[zeros], true);
        assert_eq!(g.scalar(l), 1.0);
        let l = lsgan_loss(&mut g, &[half], true);
        assert!((g.scalar(l) - 0.25).abs() < 1e-12);
        let l = lsgan_loss(&mut g, &[half], false);
        assert!((g.scalar(l) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lsgan_averages_scales_independently() {
        let mut g = Graph::new();
        let a = g.input(ArrayD::from_elem(vec![1, 1, 2, 2], 0.0));
        let b = g.input(ArrayD::from_elem(vec![1, 1, 1, 1], 0.5));
        let la = lsgan_loss(&mut g, &[a], true);
        let lb = lsgan_loss(&mut g, &[b], true);
        let lab = lsgan_loss(&mut g, &[a, b], true);
        let expect = 0.5 * (g.scalar(la) + g.scalar(lb));
        assert!((g.scalar(lab) - expect).abs() < 1e-12);
    }

    #[test]
    fn feature_matching_zero_offset_and_oracle() {
        let mut g = Graph::new();
        let shapes: [&[usize]; 2] = [&[1, 2, 4, 4], &[1, 4, 2, 2]];
        let mut real = vec![Vec::new(), Vec::new()];
        let mut fake_same = vec![Vec::new(), Vec::new()];
        let mut fake_off = vec![Vec::new(), Vec::new()];
        let mut fake_rand = vec![Vec::new(), Vec::new()];
        let mut oracle = 0.0;
        for s in 0..2 {
            for l in 0..2 {
                let r = rand_array(shapes[l], (10 + 2 * s + l) as u64);
                let q = rand_array(shapes[l], (40 + 2 * s + l) as u64);
                oracle += r
                    .iter()
                    .zip(q.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / r.len() as f64;
                real[s].push(g.input(r.clone()));
                fake_same[s].push(g.input(r.clone()));
                fake_off[s].push(g.input(&r + 0.25));
                fake_rand[s].push(g.input(q));
            }
        }
        oracle /= 4.0;

        let l = feature_matching_loss(&mut g, &real, &fake_same).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        let l = feature_matching_loss(&mut g, &real, &fake_off).unwrap();
        assert!((g.scalar(l) - 0.25).abs() < 1e-12);
        let l = feature_matching_loss(&mut g, &real, &fake_rand).unwrap();
        assert!((g.scalar(l) - oracle).abs() < 1e-6);

        let err = feature_matching_loss(&mut g, &real, &real[..1].to_vec()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn pixel_content_loss_identity_offset_symmetry() {
        let mut g = Graph::new();
        let r = rand_array(&[1, 3, 16, 16], 21);
        let real = g.input(r.clone());
        let same = g.input(r.clone());
        let off = g.input(&r + 0.1);

        let l = content_loss(&mut g, real, same, &ContentMode::Pixel).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        let l = content_loss(&mut g, real, off, &ContentMode::Pixel).unwrap();
        assert!((g.scalar(l) - 0.1).abs() < 1e-12);

        let x = g.input(rand_array(&[1, 3, 8, 8], 22));
        let y = g.input(rand_array(&[1, 3, 8, 8], 23));
        let xy = content_loss(&mut g, x, y, &ContentMode::Pixel).unwrap();
        let yx = content_loss(&mut g, y, x, &ContentMode::Pixel).unwrap();
        assert_eq!(g.scalar(xy), g.scalar(yx));
    }

    #[test]
    fn feature_content_mode_needs_a_checkpoint() {
        let mut g = Graph::new();
        let x = g.input(rand_array(&[1, 3, 8, 8], 24));
        let y = g.input(rand_array(&[1, 3, 8, 8], 25));
        let err = content_loss(&mut g, x, y, &ContentMode::Feature(None)).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn feature_content_mode_runs_from_a_frozen_stack() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feat.ckpt");
        let mut tensors = std::collections::BTreeMap::new();
        tensors.insert("feat0.weight".to_string(), rand_array(&[4, 3, 4, 4], 30));
        tensors.insert("feat0.bias".to_string(), rand_array(&[4], 31));
        tensors.insert("feat1.weight".to_string(), rand_array(&[6, 4, 4, 4], 32));
        tensors.insert("feat1.bias".to_string(), rand_array(&[6], 33));
        checkpoint::write_container(
            &path,
            &serde_json::json!({"kind": "feature_extractor"}),
            &tensors,
        )
        .unwrap();

        let mode = ContentMode::Feature(Some(path));
        let mut g = Graph::new();
        let r = rand_array(&[1, 3, 16, 16], 34);
        let real = g.input(r.clone());
        let same = g.input(r.clone());
        let off = g.input(&r + 0.3);
        let l = content_loss(&mut g, real, same, &mode).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        let l = content_loss(&mut g, real, off, &mode).unwrap();
        assert!(g.scalar(l) > 0.0);
    }

    #[test]
    fn bad_feature_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();

        let empty = dir.path().join("empty.ckpt");
        checkpoint::write_container(&empty, &serde_json::json!({}), &BTreeMap::new()).unwrap();
        assert!(matches!(
            load_feature_extractor(&empty),
            Err(Error::Checkpoint(_))
        ));

        let wrong = dir.path().join("wrong.ckpt");
        let mut tensors = BTreeMap::new();
        tensors.insert("feat0.weight".to_string(), rand_array(&[4, 5, 4, 4], 35));
        tensors.insert("feat0.bias".to_string(), rand_array(&[4], 36));
        checkpoint::write_container(&wrong, &serde_json::json!({}), &tensors).unwrap();
        let err = load_feature_extractor(&wrong).unwrap_err();
        assert!(err.to_string().contains("feat0.weight"), "{err}");
    }

    #[test]
    fn config_validation_and_minimum_edge() {
        assert!(DiscriminatorConfig::default().validate().is_ok());
        assert_eq!(DiscriminatorConfig::default().min_input_edge(), 64);
        let bad = DiscriminatorConfig {
            scale_count: 0,
            ..Default::default()
        };
        assert!(bad.validate().unwrap_err().is_usage());
    }
}
