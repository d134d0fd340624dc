//! Network building blocks: residual modules, windowed-attention modules,
//! and the post-normalized SpaceFormer layer.
//!
//! Blocks are pure functions of (input, parameters); weights are addressed
//! by hierarchical names through a [`ParamCtx`], so the same code path runs
//! initialization, training, and inference.

use ndarray::ArrayD;

use crate::autograd::{
    head_merge_map, head_split_map, relpos_map, roll2d_map, window_merge_map,
    window_partition_map, Value,
};
use crate::params::{Init, ParamCtx};

pub const INSTANCE_NORM_EPS: f64 = 1e-5;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Windowed multi-head attention settings for one layer.
#[derive(Debug, Clone, Copy)]
pub struct AttentionConfig {
    pub window_size: usize,
    pub num_heads: usize,
    /// Cyclic shift in pixels; 0 or `window_size / 2`.
    pub shift: usize,
    /// MLP hidden width as a multiple of the channel count.
    pub mlp_ratio: usize,
}

impl AttentionConfig {
    pub fn new(window_size: usize, num_heads: usize) -> Self {
        Self {
            window_size,
            num_heads,
            shift: 0,
            mlp_ratio: 4,
        }
    }

    pub fn with_shift(mut self, shift: usize) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self, channels: usize) -> crate::Result<()> {
        if self.num_heads == 0 || channels % self.num_heads != 0 {
            return Err(crate::Error::Config(format!(
                "num_heads {} must divide channels {}",
                self.num_heads, channels
            )));
        }
        if self.shift != 0 && self.shift != self.window_size / 2 {
            return Err(crate::Error::Config(format!(
                "shift {} must be 0 or window_size/2 = {}",
                self.shift,
                self.window_size / 2
            )));
        }
        if self.window_size == 0 || self.mlp_ratio == 0 {
            return Err(crate::Error::Config(
                "window_size and mlp_ratio must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Heads for a given width: one per 32 channels, at least one.
pub fn default_heads(channels: usize) -> usize {
    (channels / 32).max(1)
}

/// `x @ W + b` on `[M, IN]` rows.
pub fn linear(ctx: &mut ParamCtx, prefix: &str, x: Value, n_in: usize, n_out: usize) -> Value {
    let w = ctx.param(&format!("{prefix}.weight"), &[n_in, n_out], Init::Normal(0.02));
    let b = ctx.param(&format!("{prefix}.bias"), &[n_out], Init::Zeros);
    let y = ctx.graph.matmul2(x, w);
    ctx.graph.add_bias_row(y, b)
}

/// Layer normalization over the trailing channel axis with learned affine.
pub fn layer_norm(ctx: &mut ParamCtx, prefix: &str, x: Value, channels: usize) -> Value {
    let gamma = ctx.param(&format!("{prefix}.gamma"), &[channels], Init::Ones);
    let beta = ctx.param(&format!("{prefix}.beta"), &[channels], Init::Zeros);
    ctx.graph.layer_norm(x, gamma, beta, LAYER_NORM_EPS)
}

/// Padding applied before a convolution.
#[derive(Debug, Clone, Copy)]
pub enum Pad {
    None,
    Zero(usize),
    Reflect(usize),
}

/// Biased 2D convolution with explicit padding.
pub fn conv(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: Pad,
) -> Value {
    let w = ctx.param(
        &format!("{prefix}.weight"),
        &[cout, cin, k, k],
        Init::Normal(0.02),
    );
    let b = ctx.param(&format!("{prefix}.bias"), &[cout], Init::Zeros);
    let xp = match pad {
        Pad::None => x,
        Pad::Zero(p) => ctx.graph.pad_zero(x, p),
        Pad::Reflect(p) => ctx.graph.pad_reflect(x, p),
    };
    let y = ctx.graph.conv2d(xp, w, stride);
    ctx.graph.add_bias_channel(y, b)
}

/// Biased transposed convolution for stride-2 upsampling (kernel 3, pad 1,
/// output padding 1 doubles the spatial extent).
pub fn conv_transpose(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Value {
    let w = ctx.param(
        &format!("{prefix}.weight"),
        &[cin, cout, k, k],
        Init::Normal(0.02),
    );
    let b = ctx.param(&format!("{prefix}.bias"), &[cout], Init::Zeros);
    let y = ctx.graph.conv_transpose2d(x, w, stride, pad, out_pad);
    ctx.graph.add_bias_channel(y, b)
}

/// conv3x3 -> instance norm -> ReLU -> conv3x3 -> instance norm, added back
/// onto the identity path. Reflection padding keeps H and W.
pub fn residual_module(ctx: &mut ParamCtx, prefix: &str, x: Value, channels: usize) -> Value {
    let c = channels;
    let h = conv(ctx, &format!("{prefix}.conv1"), x, c, c, 3, 1, Pad::Reflect(1));
    let h = ctx.graph.instance_norm(h, INSTANCE_NORM_EPS);
    let h = ctx.graph.relu(h);
    let h = conv(ctx, &format!("{prefix}.conv2"), h, c, c, 3, 1, Pad::Reflect(1));
    let h = ctx.graph.instance_norm(h, INSTANCE_NORM_EPS);
    ctx.graph.add(x, h)
}

/// Reflect-pad the trailing spatial axes up to multiples of `win`,
/// padding at the high end only. Returns the (possibly unchanged) node.
fn pad_to_multiple(ctx: &mut ParamCtx, x: Value, win: usize) -> Value {
    let s = ctx.graph.shape(x).to_vec();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let hp = h.div_ceil(win) * win;
    let wp = w.div_ceil(win) * win;
    if hp == h && wp == w {
        return x;
    }
    let mut map = Vec::with_capacity(b * c * hp * wp);
    for bc in 0..b * c {
        for y in 0..hp {
            let sy = crate::autograd::fold_index(y as isize, h);
            for xx in 0..wp {
                let sx = crate::autograd::fold_index(xx as isize, w);
                map.push(((bc * h + sy) * w + sx) as u32);
            }
        }
    }
    ctx.graph.gather(x, std::sync::Arc::new(map), &[b, c, hp, wp])
}

/// Windowed multi-head self-attention over token windows `[G, N, C]`.
/// Returns the projected output and the attention probabilities
/// `[G * heads, N, N]` for inspection.
fn window_attention(
    ctx: &mut ParamCtx,
    prefix: &str,
    tokens: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> (Value, ArrayD<f64>) {
    let s = ctx.graph.shape(tokens).to_vec();
    let (g, n, c) = (s[0], s[1], s[2]);
    assert_eq!(c, channels);
    assert_eq!(n, cfg.window_size * cfg.window_size);
    let heads = cfg.num_heads;
    let hd = c / heads;

    let flat = ctx.graph.reshape(tokens, &[g * n, c]);
    let q = linear(ctx, &format!("{prefix}.wq"), flat, c, c);
    let k = linear(ctx, &format!("{prefix}.wk"), flat, c, c);
    let v = linear(ctx, &format!("{prefix}.wv"), flat, c, c);

    let split = |ctx: &mut ParamCtx, t: Value| {
        let t3 = ctx.graph.reshape(t, &[g, n, c]);
        let (map, shape) = head_split_map(&[g, n, c], heads);
        ctx.graph.gather(t3, std::sync::Arc::new(map), &shape)
    };
    let qh = split(ctx, q);
    let kh = split(ctx, k);
    let vh = split(ctx, v);

    let qs = ctx.graph.scale(qh, 1.0 / (hd as f64).sqrt());
    let scores = ctx.graph.bmm_nt(qs, kh);

    // Learned relative position bias, one table per layer, tiled over
    // windows (leading dim of scores cycles through heads).
    let span = 2 * cfg.window_size - 1;
    let table = ctx.param(
        &format!("{prefix}.relpos"),
        &[span * span, heads],
        Init::Normal(0.02),
    );
    let (rmap, rshape) = relpos_map(cfg.window_size, heads);
    let bias = ctx.graph.gather(table, std::sync::Arc::new(rmap), &rshape);
    let scores = ctx.graph.add_cycle0(scores, bias);

    let attn = ctx.graph.softmax_rows(scores);
    let attn_val = ctx.graph.value(attn).clone();

    let mixed = ctx.graph.bmm_nn(attn, vh);
    let (mmap, mshape) = head_merge_map(&[g * heads, n, hd], heads);
    let merged = ctx.graph.gather(mixed, std::sync::Arc::new(mmap), &mshape);
    let mflat = ctx.graph.reshape(merged, &[g * n, c]);
    let out = linear(ctx, &format!("{prefix}.proj"), mflat, c, c);
    let out = ctx.graph.reshape(out, &[g, n, c]);
    (out, attn_val)
}

/// Two-layer MLP with GELU on `[M, C]` rows.
fn mlp(ctx: &mut ParamCtx, prefix: &str, x: Value, channels: usize, ratio: usize) -> Value {
    let hidden = channels * ratio;
    let h = linear(ctx, &format!("{prefix}.fc1"), x, channels, hidden);
    let h = ctx.graph.gelu(h);
    linear(ctx, &format!("{prefix}.fc2"), h, hidden, channels)
}

/// Normalization placement within a transformer layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NormOrder {
    /// `x + attn(LN(x))`: normalize the sublayer input.
    Pre,
    /// `x + LN(attn(x))`: normalize the sublayer output.
    Post,
}

/// One windowed-attention transformer layer on image layout `[B, C, H, W]`:
/// pad to window multiples, optional cyclic shift, window the tokens, run
/// attention + MLP with residuals, then undo shift and padding.
fn transformer_layer(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
    order: NormOrder,
) -> (Value, ArrayD<f64>) {
    let s0 = ctx.graph.shape(x).to_vec();
    let (h0, w0) = (s0[2], s0[3]);
    let padded = pad_to_multiple(ctx, x, cfg.window_size);
    let ps = ctx.graph.shape(padded).to_vec();

    let shifted = if cfg.shift > 0 {
        let map = roll2d_map(&ps, -(cfg.shift as isize), -(cfg.shift as isize));
        ctx.graph.gather(padded, std::sync::Arc::new(map), &ps)
    } else {
        padded
    };

    let (pmap, pshape) = window_partition_map(&ps, cfg.window_size);
    let mut tok = ctx
        .graph
        .gather(shifted, std::sync::Arc::new(pmap), &pshape);
    let (g, n, c) = (pshape[0], pshape[1], pshape[2]);

    let attn_val;
    match order {
        NormOrder::Pre => {
            let tflat = ctx.graph.reshape(tok, &[g * n, c]);
            let normed = layer_norm(ctx, &format!("{prefix}.norm1"), tflat, c);
            let normed = ctx.graph.reshape(normed, &[g, n, c]);
            let (a, av) = window_attention(ctx, &format!("{prefix}.attn"), normed, channels, cfg);
            attn_val = av;
            tok = ctx.graph.add(tok, a);

            let tflat = ctx.graph.reshape(tok, &[g * n, c]);
            let normed = layer_norm(ctx, &format!("{prefix}.norm2"), tflat, c);
            let m = mlp(ctx, &format!("{prefix}.mlp"), normed, c, cfg.mlp_ratio);
            let m = ctx.graph.reshape(m, &[g, n, c]);
            tok = ctx.graph.add(tok, m);
        }
        NormOrder::Post => {
            let (a, av) = window_attention(ctx, &format!("{prefix}.attn"), tok, channels, cfg);
            attn_val = av;
            let aflat = ctx.graph.reshape(a, &[g * n, c]);
            let normed = layer_norm(ctx, &format!("{prefix}.norm1"), aflat, c);
            let normed = ctx.graph.reshape(normed, &[g, n, c]);
            tok = ctx.graph.add(tok, normed);

            let tflat = ctx.graph.reshape(tok, &[g * n, c]);
            let m = mlp(ctx, &format!("{prefix}.mlp"), tflat, c, cfg.mlp_ratio);
            let normed = layer_norm(ctx, &format!("{prefix}.norm2"), m, c);
            let normed = ctx.graph.reshape(normed, &[g, n, c]);
            tok = ctx.graph.add(tok, normed);
        }
    }

    let (mmap, mshape) = window_merge_map(&ps, cfg.window_size);
    let img = ctx.graph.gather(tok, std::sync::Arc::new(mmap), &mshape);
    let img = if cfg.shift > 0 {
        let map = roll2d_map(&ps, cfg.shift as isize, cfg.shift as isize);
        ctx.graph.gather(img, std::sync::Arc::new(map), &ps)
    } else {
        img
    };
    let img = if ps[2] != h0 || ps[3] != w0 {
        ctx.graph.crop2d(img, 0, 0, h0, w0)
    } else {
        img
    };
    (img, attn_val)
}

/// Attention probabilities recorded during a module forward, one entry per
/// transformer layer, each shaped `[windows * heads, tokens, tokens]`.
#[derive(Debug, Default)]
pub struct AttnTrace {
    pub attn: Vec<ArrayD<f64>>,
}

/// Swin module: a pre-normalized pair of windowed-attention layers, the
/// first unshifted and the second cyclically shifted by half a window.
pub fn swin_module_traced(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> (Value, AttnTrace) {
    let mut trace = AttnTrace::default();
    let c0 = cfg.with_shift(0);
    let (x, a0) = transformer_layer(ctx, &format!("{prefix}.l0"), x, channels, &c0, NormOrder::Pre);
    trace.attn.push(a0);
    let c1 = cfg.with_shift(cfg.window_size / 2);
    let (x, a1) = transformer_layer(ctx, &format!("{prefix}.l1"), x, channels, &c1, NormOrder::Pre);
    trace.attn.push(a1);
    (x, trace)
}

pub fn swin_module(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> Value {
    swin_module_traced(ctx, prefix, x, channels, cfg).0
}

/// SpaceFormer: a single windowed-attention layer with post-normalization
/// (residual added after normalizing each sublayer's output).
pub fn space_former_traced(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> (Value, AttnTrace) {
    let (x, a) = transformer_layer(ctx, prefix, x, channels, cfg, NormOrder::Post);
    (
        x,
        AttnTrace { attn: vec![a] },
    )
}

pub fn space_former(
    ctx: &mut ParamCtx,
    prefix: &str,
    x: Value,
    channels: usize,
    cfg: &AttentionConfig,
) -> Value {
    space_former_traced(ctx, prefix, x, channels, cfg).0
}
