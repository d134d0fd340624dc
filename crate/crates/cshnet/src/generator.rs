//! Generator assembly: encoder, bottleneck variants, guided connection,
//! decoder, plus constructors for every ablation variant.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayD, Axis};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Value};
use crate::blocks::{
    conv, conv_transpose, default_heads, residual_module, space_former, swin_module,
    AttentionConfig, Pad, INSTANCE_NORM_EPS,
};
use crate::params::{ParamCtx, ParamStore};
use crate::{Error, Result};

/// Bottleneck composition between encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BottleneckVariant {
    /// Interleaved hybrid blocks, convolution-first: SEC, CES, SEC, CES.
    Scb,
    /// Interleaved hybrid blocks, attention-first: CES, SEC, CES, SEC.
    Csb,
    /// Four SEC blocks.
    Sec4,
    /// Four CES blocks.
    Ces4,
    /// Nine residual modules (convolutional reference).
    Globalg9,
    /// Nine Swin modules (attention reference).
    Swing9,
}

impl BottleneckVariant {
    pub const ALL: [BottleneckVariant; 6] = [
        BottleneckVariant::Scb,
        BottleneckVariant::Csb,
        BottleneckVariant::Sec4,
        BottleneckVariant::Ces4,
        BottleneckVariant::Globalg9,
        BottleneckVariant::Swing9,
    ];

    /// Whether any block in this bottleneck partitions attention windows.
    pub fn uses_attention(self) -> bool {
        !matches!(self, BottleneckVariant::Globalg9)
    }

    fn block_kinds(self) -> Vec<BlockKind> {
        use BlockKind::*;
        match self {
            BottleneckVariant::Scb => vec![Sec, Ces, Sec, Ces],
            BottleneckVariant::Csb => vec![Ces, Sec, Ces, Sec],
            BottleneckVariant::Sec4 => vec![Sec; 4],
            BottleneckVariant::Ces4 => vec![Ces; 4],
            BottleneckVariant::Globalg9 => vec![Rm; 9],
            BottleneckVariant::Swing9 => vec![Sm; 9],
        }
    }
}

impl fmt::Display for BottleneckVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BottleneckVariant::Scb => "SCB",
            BottleneckVariant::Csb => "CSB",
            BottleneckVariant::Sec4 => "SEC4",
            BottleneckVariant::Ces4 => "CES4",
            BottleneckVariant::Globalg9 => "GLOBALG9",
            BottleneckVariant::Swing9 => "SWING9",
        };
        f.write_str(s)
    }
}

impl FromStr for BottleneckVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SCB" => Ok(BottleneckVariant::Scb),
            "CSB" => Ok(BottleneckVariant::Csb),
            "SEC4" => Ok(BottleneckVariant::Sec4),
            "CES4" => Ok(BottleneckVariant::Ces4),
            "GLOBALG9" => Ok(BottleneckVariant::Globalg9),
            "SWING9" => Ok(BottleneckVariant::Swing9),
            other => Err(Error::Config(format!(
                "unknown bottleneck variant {other:?} (expected SCB, CSB, SEC4, CES4, GLOBALG9, or SWING9)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum BlockKind {
    Sec,
    Ces,
    Rm,
    Sm,
}

/// Guided-connection form: how the guidance maps modulate the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IgcForm {
    None,
    /// Multiplicative only: a * x.
    Ax,
    /// Additive only: x + b.
    Xb,
    /// Full affine: a * x + b.
    Axb,
}

impl fmt::Display for IgcForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IgcForm::None => "NONE",
            IgcForm::Ax => "AX",
            IgcForm::Xb => "XB",
            IgcForm::Axb => "AXB",
        };
        f.write_str(s)
    }
}

impl FromStr for IgcForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NONE" => Ok(IgcForm::None),
            "AX" => Ok(IgcForm::Ax),
            "XB" => Ok(IgcForm::Xb),
            "AXB" => Ok(IgcForm::Axb),
            other => Err(Error::Config(format!(
                "unknown igc form {other:?} (expected NONE, AX, XB, or AXB)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Encoder stem width; doubles at each downsampling stage.
    pub base_width: usize,
    /// Number of stride-2 stages in encoder and decoder.
    pub n_downsample: usize,
    pub bottleneck: BottleneckVariant,
    pub igc_form: IgcForm,
    pub image_channels: usize,
    /// Attention window edge, in bottleneck-resolution pixels.
    pub window_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            base_width: 16,
            n_downsample: 2,
            bottleneck: BottleneckVariant::Scb,
            igc_form: IgcForm::Axb,
            image_channels: 3,
            window_size: 4,
        }
    }
}

impl GeneratorConfig {
    pub fn bottleneck_width(&self) -> usize {
        self.base_width << self.n_downsample
    }

    pub fn attention(&self) -> AttentionConfig {
        AttentionConfig::new(self.window_size, default_heads(self.bottleneck_width()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(Error::Config("base_width must be positive".into()));
        }
        if self.n_downsample == 0 || self.n_downsample > 6 {
            return Err(Error::Config("n_downsample must be in 1..=6".into()));
        }
        if self.image_channels != 3 {
            return Err(Error::Config("image_channels must be 3".into()));
        }
        if self.window_size < 2 || self.window_size % 2 != 0 {
            return Err(Error::Config("window_size must be even and at least 2".into()));
        }
        self.attention().validate(self.bottleneck_width())
    }
}

/// Everything produced by one generator forward besides the output image;
/// used by tests and by the guided-connection plumbing.
#[derive(Debug, Default)]
pub struct ForwardTrace {
    /// Encoder output, before any guidance.
    pub encoder_out: Option<Value>,
    /// Pre-projection channel concatenation of each hybrid block.
    pub concats: Vec<Value>,
}

/// Intermediate features of one hybrid block forward.
pub struct HybridTrace {
    /// Convolutional branch features.
    pub conv_feat: Value,
    /// Attention branch features.
    pub attn_feat: Value,
    /// Gated product entering the concatenation.
    pub gated: Value,
    /// The 2C-wide concatenation fed to the output projection.
    pub concat: Value,
}

/// SEC block: convolution backbone, attention embedded through a sigmoid
/// gate of the convolutional features.
pub fn sec_forward_traced(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> (Value, HybridTrace) {
    let x_c = residual_module(ctx, &format!("{prefix}.rm"), x, channels);
    let x_s = swin_module(ctx, &format!("{prefix}.sm"), x_c, channels, cfg);
    let gate = ctx.graph.sigmoid(x_c);
    let x_se = ctx.graph.mul(x_s, gate);
    let cat = ctx.graph.concat(&[x_c, x_se], 1);
    let out = conv(
        ctx,
        &format!("{prefix}.proj"),
        cat,
        2 * channels,
        channels,
        1,
        1,
        Pad::None,
    );
    (
        out,
        HybridTrace {
            conv_feat: x_c,
            attn_feat: x_s,
            gated: x_se,
            concat: cat,
        },
    )
}

pub fn sec_forward(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> Value {
    sec_forward_traced(ctx, prefix, x, channels, cfg).0
}

/// CES block: attention backbone, convolution embedded through a sigmoid
/// gate of the attention features.
pub fn ces_forward_traced(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> (Value, HybridTrace) {
    let x_s = swin_module(ctx, &format!("{prefix}.sm"), x, channels, cfg);
    let x_c = residual_module(ctx, &format!("{prefix}.rm"), x_s, channels);
    let gate = ctx.graph.sigmoid(x_s);
    let x_ce = ctx.graph.mul(x_c, gate);
    let cat = ctx.graph.concat(&[x_s, x_ce], 1);
    let out = conv(
        ctx,
        &format!("{prefix}.proj"),
        cat,
        2 * channels,
        channels,
        1,
        1,
        Pad::None,
    );
    (
        out,
        HybridTrace {
            conv_feat: x_c,
            attn_feat: x_s,
            gated: x_ce,
            concat: cat,
        },
    )
}

pub fn ces_forward(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> Value {
    ces_forward_traced(ctx, prefix, x, channels, cfg).0
}

/// Guidance maps produced by one guided-connection instance.
pub struct IgcMaps {
    pub a: Value,
    pub b: Value,
}

/// Guided connection: downsample the source image to the feature
/// resolution, refine with a SpaceFormer, and emit per-element affine maps
/// `a` and `b` that modulate `target` as `a * target + b` (or the partial
/// forms).
pub fn igc_forward_traced(
    ctx: &mut ParamCtx,
    prefix: &str,
    source: Value,
    target: Value,
    form: IgcForm,
    n_downsample: usize,
    cfg: &AttentionConfig,
) -> (Value, IgcMaps) {
    assert!(form != IgcForm::None, "guided connection disabled");
    let ts = ctx.graph.shape(target).to_vec();
    let width = ts[1];
    let ss = ctx.graph.shape(source).to_vec();
    assert_eq!(
        (ss[2] >> n_downsample, ss[3] >> n_downsample),
        (ts[2], ts[3]),
        "stem output resolution must match the guided features"
    );

    let mut h = source;
    let mut cin = ss[1];
    for i in 0..n_downsample {
        let cout = width >> (n_downsample - 1 - i);
        h = conv(ctx, &format!("{prefix}.stem{i}"), h, cin, cout, 3, 2, Pad::Zero(1));
        h = ctx.graph.instance_norm(h, INSTANCE_NORM_EPS);
        h = ctx.graph.relu(h);
        cin = cout;
    }
    let h = space_former(ctx, &format!("{prefix}.sf"), h, width, cfg);
    let a = conv(ctx, &format!("{prefix}.head_a"), h, width, width, 1, 1, Pad::None);
    let b = conv(ctx, &format!("{prefix}.head_b"), h, width, width, 1, 1, Pad::None);

    let out = match form {
        IgcForm::Ax => ctx.graph.mul(a, target),
        IgcForm::Xb => ctx.graph.add(target, b),
        IgcForm::Axb => {
            let ax = ctx.graph.mul(a, target);
            ctx.graph.add(ax, b)
        }
        IgcForm::None => unreachable!(),
    };
    (out, IgcMaps { a, b })
}

pub fn igc_forward(
    ctx: &mut ParamCtx,
    prefix: &str,
    source: Value,
    target: Value,
    form: IgcForm,
    n_downsample: usize,
    cfg: &AttentionConfig,
) -> Value {
    igc_forward_traced(ctx, prefix, source, target, form, n_downsample, cfg).0
}

/// A generator: configuration plus its parameter store. Forward passes bind
/// the store into a caller-provided graph.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub store: ParamStore,
    seed: u64,
}

impl Generator {
    /// Validates the configuration, materializes every parameter with
    /// seed-determined initial values, and snaps them to the f32 grid.
    pub fn build(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut gen = Self {
            config,
            store: ParamStore::new(),
            seed,
        };
        // A dry forward at the smallest legal size touches every parameter.
        let size = gen.config.window_size << gen.config.n_downsample;
        let mut graph = Graph::default();
        let zero = ArrayD::zeros(ndarray::IxDyn(&[1, gen.config.image_channels, size, size]));
        let x = graph.input(zero);
        gen.forward_value(&mut graph, x);
        gen.store.quantize_f32();
        Ok(gen)
    }

    /// Wraps an existing store (checkpoint restore path).
    pub fn from_store(config: GeneratorConfig, store: ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            store,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Exact number of scalar parameters.
    pub fn count_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Builds the forward graph from an already-inserted input node.
    pub fn forward_value(&mut self, graph: &mut Graph, source: Value) -> Value {
        self.forward_traced(graph, source).0
    }

    /// Forward pass that also exposes intermediate nodes for inspection.
    pub fn forward_traced(&mut self, graph: &mut Graph, source: Value) -> (Value, ForwardTrace) {
        let cfg = self.config.clone();
        let mut ctx = ParamCtx::new(graph, &mut self.store, self.seed);
        forward_with(&mut ctx, &cfg, source)
    }

    /// Runs the generator on a batch of images, returning the translated
    /// batch. Builds and discards a private graph.
    pub fn translate(&mut self, batch: &ArrayD<f64>) -> ArrayD<f64> {
        let mut graph = Graph::default();
        let x = graph.input(batch.clone());
        let y = self.forward_value(&mut graph, x);
        graph.value(y).clone()
    }

    /// Translates one [C, H, W] image, handling the batch dimension.
    pub fn translate_image(&mut self, img: &ArrayD<f64>) -> ArrayD<f64> {
        let batch = img.clone().insert_axis(Axis(0));
        self.translate(&batch).index_axis(Axis(0), 0).to_owned()
    }
}

/// The shared forward implementation; public so gradient checks can drive
/// it with externally bound parameters.
pub fn forward_with(
    ctx: &mut ParamCtx,
    cfg: &GeneratorConfig,
    source: Value,
) -> (Value, ForwardTrace) {
    let mut trace = ForwardTrace::default();
    let attn = cfg.attention();
    let cbot = cfg.bottleneck_width();

    // Encoder: wide-kernel stem, then stride-2 stages doubling the width.
    let mut x = conv(
        ctx,
        "enc.stem",
        source,
        cfg.image_channels,
        cfg.base_width,
        7,
        1,
        Pad::Reflect(3),
    );
    x = ctx.graph.instance_norm(x, INSTANCE_NORM_EPS);
    x = ctx.graph.relu(x);
    let mut width = cfg.base_width;
    for i in 0..cfg.n_downsample {
        x = conv(
            ctx,
            &format!("enc.down{i}"),
            x,
            width,
            width * 2,
            3,
            2,
            Pad::Zero(1),
        );
        x = ctx.graph.instance_norm(x, INSTANCE_NORM_EPS);
        x = ctx.graph.relu(x);
        width *= 2;
    }
    trace.encoder_out = Some(x);

    // First guidance site: the encoder output.
    if cfg.igc_form != IgcForm::None {
        x = igc_forward(ctx, "igc0", source, x, cfg.igc_form, cfg.n_downsample, &attn);
    }

    // Bottleneck; the second guidance site sits halfway through it (after
    // the first SEC-CES pair in the hybrid variants).
    let kinds = cfg.bottleneck.block_kinds();
    let mid = kinds.len() / 2;
    for (i, kind) in kinds.iter().enumerate() {
        let prefix = format!("bot{i}");
        x = match kind {
            BlockKind::Sec => {
                let (out, t) = sec_forward_traced(ctx, &prefix, x, cbot, &attn);
                trace.concats.push(t.concat);
                out
            }
            BlockKind::Ces => {
                let (out, t) = ces_forward_traced(ctx, &prefix, x, cbot, &attn);
                trace.concats.push(t.concat);
                out
            }
            BlockKind::Rm => residual_module(ctx, &prefix, x, cbot),
            BlockKind::Sm => swin_module(ctx, &prefix, x, cbot, &attn),
        };
        if i + 1 == mid && cfg.igc_form != IgcForm::None {
            x = igc_forward(ctx, "igc1", source, x, cfg.igc_form, cfg.n_downsample, &attn);
        }
    }

    // Decoder: stride-2 transposed stages halving the width, then a
    // wide-kernel head squashed into [-1, 1].
    for i in 0..cfg.n_downsample {
        x = conv_transpose(ctx, &format!("dec.up{i}"), x, width, width / 2, 3, 2, 1, 1);
        x = ctx.graph.instance_norm(x, INSTANCE_NORM_EPS);
        x = ctx.graph.relu(x);
        width /= 2;
    }
    x = conv(
        ctx,
        "dec.out",
        x,
        cfg.base_width,
        cfg.image_channels,
        7,
        1,
        Pad::Reflect(3),
    );
    let out = ctx.graph.tanh(x);
    (out, trace)
}
