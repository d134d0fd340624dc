//! Helpers shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cshnet::adversarial::{discriminator_forward, lsgan_loss, Discriminator, DiscriminatorConfig};
use cshnet::aepl::{aepl_loss_with, ThresholdPolicy, GAUSSIAN_SIGMA};
use cshnet::autograd::check::{check_gradients, GradReport};
use cshnet::autograd::{Graph, Value};
use cshnet::generator::{igc_forward, IgcForm};
use cshnet::params::{ParamCtx, ParamStore};

pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-3;

pub fn rand_array(shape: &[usize], seed: u64) -> ArrayD<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

pub fn param_count(store: &ParamStore) -> usize {
    store.tensors().values().map(|t| t.len()).sum()
}

/// Replace every parameter value with a uniform draw at the given scale.
/// Finite differences misbehave at the tiny production init: post-norm
/// layers normalize near-zero activations where curvature blows up, and
/// most gradients land below measurement noise. The backward pass must be
/// correct at any point, so the check runs at a better-conditioned one.
pub fn redraw(params: &BTreeMap<String, ArrayD<f64>>, seed: u64, scale: f64) -> BTreeMap<String, ArrayD<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    params
        .iter()
        .map(|(name, t)| {
            let mut t = t.clone();
            t.mapv_inplace(|_| rng.random_range(-scale..scale));
            (name.clone(), t)
        })
        .collect()
}

/// Finite-difference check for a shape-preserving block: materialize its
/// parameters with a dry run, then compare analytic gradients of
/// `mse(block(x), anchor)` against central differences, every `stride`-th
/// coordinate. Returns the report and the parameter count.
pub fn check_block(
    input_shape: &[usize],
    seed: u64,
    stride: usize,
    forward: impl Fn(&mut ParamCtx, Value) -> Value,
) -> (GradReport, usize) {
    let x_arr = rand_array(input_shape, seed);
    let mut store = ParamStore::new();
    let out_shape = {
        let mut g = cshnet::autograd::Graph::default();
        let mut ctx = ParamCtx::new(&mut g, &mut store, seed + 1);
        let xv = ctx.graph.input(x_arr.clone());
        let out = forward(&mut ctx, xv);
        ctx.graph.shape(out).to_vec()
    };
    let anchor = rand_array(&out_shape, seed + 2);
    let params = redraw(store.tensors(), seed + 3, 0.25);

    let f = &forward;
    let report = check_gradients(
        &params,
        |g, handles: &BTreeMap<String, Value>| {
            let mut ctx = ParamCtx::with_bound(g, handles.clone());
            let xv = ctx.graph.input(x_arr.clone());
            let out = f(&mut ctx, xv);
            let av = ctx.graph.input(anchor.clone());
            ctx.graph.mse(out, av)
        },
        GRAD_STEP,
        stride,
    );
    (report, param_count(&store))
}

/// Gradient check of a guided connection: source image and bottleneck
/// target fixed, all connection parameters checked.
pub fn check_igc(attn: &cshnet::blocks::AttentionConfig) -> (GradReport, usize) {
    let source = rand_array(&[1, 3, 8, 8], 31);
    let target = rand_array(&[1, 4, 4, 4], 32);
    let anchor = rand_array(&[1, 4, 4, 4], 33);

    let mut store = ParamStore::new();
    {
        let mut g = Graph::default();
        let mut ctx = ParamCtx::new(&mut g, &mut store, 3);
        let sv = ctx.graph.input(source.clone());
        let tv = ctx.graph.input(target.clone());
        igc_forward(&mut ctx, "igc", sv, tv, IgcForm::Axb, 1, attn);
    }
    let n = param_count(&store);
    let params = redraw(store.tensors(), 34, 0.25);

    let report = check_gradients(
        &params,
        |g, handles| {
            let mut ctx = ParamCtx::with_bound(g, handles.clone());
            let sv = ctx.graph.input(source.clone());
            let tv = ctx.graph.input(target.clone());
            let out = igc_forward(&mut ctx, "igc", sv, tv, IgcForm::Axb, 1, attn);
            let av = ctx.graph.input(anchor.clone());
            ctx.graph.mse(out, av)
        },
        GRAD_STEP,
        1,
    );
    (report, n)
}

/// Gradient check of a one-scale patch discriminator against the LSGAN
/// real-side objective.
pub fn check_discriminator() -> (GradReport, usize) {
    let cfg = DiscriminatorConfig {
        ndf: 2,
        scale_count: 1,
        conv_layers: 4,
        image_channels: 3,
    };
    let disc = Discriminator::build(cfg.clone(), 41).unwrap();
    let n = param_count(&disc.store);

    let source = rand_array(&[1, 3, 32, 32], 42);
    let candidate = rand_array(&[1, 3, 32, 32], 43);
    let params = redraw(disc.store.tensors(), 44, 0.25);
    let report = check_gradients(
        &params,
        |g, handles| {
            let mut ctx = ParamCtx::with_bound(g, handles.clone());
            let sv = ctx.graph.input(source.clone());
            let cv = ctx.graph.input(candidate.clone());
            let out = discriminator_forward(&mut ctx, &cfg, sv, cv).unwrap();
            lsgan_loss(ctx.graph, &out.patch_logits, true)
        },
        GRAD_STEP,
        1,
    );
    (report, n)
}

/// Gradient check of the edge loss through the generated image. The
/// shared-threshold policy keeps the masks a function of the real image
/// only, so perturbing the fake never flips a mask bit and the loss stays
/// smooth around the checkpoint.
pub fn check_aepl() -> GradReport {
    let real = cshnet::data::synth_pair(5, 0, 32).target;
    let real = real
        .slice(ndarray::s![.., 12..20, 12..20])
        .to_owned()
        .insert_axis(ndarray::Axis(0))
        .into_dyn();
    let fake = rand_array(&[1, 3, 8, 8], 51);

    let mut params = BTreeMap::new();
    params.insert("fake".to_string(), fake);
    check_gradients(
        &params,
        |g, handles| {
            let rv = g.input(real.clone());
            aepl_loss_with(
                g,
                rv,
                handles["fake"],
                ThresholdPolicy::SharedFromReal,
                GAUSSIAN_SIGMA,
            )
            .unwrap()
        },
        GRAD_STEP,
        1,
    )
}

/// Partition entropy computed the obvious way: renormalize each side's
/// probabilities and sum -r ln r. Deliberately avoids the production
/// code's ln(P) - S/P algebra so the two implementations are independent.
pub fn naive_partition_entropy(counts: &[u64; 256], q: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let low: u64 = counts[..=q].iter().sum();
    let high = total - low;
    let mut h = 0.0;
    if low > 0 {
        let pl = low as f64 / n;
        for &c in &counts[..=q] {
            if c > 0 {
                let r = (c as f64 / n) / pl;
                h -= r * r.ln();
            }
        }
    }
    if high > 0 {
        let ph = high as f64 / n;
        for &c in &counts[q + 1..] {
            if c > 0 {
                let r = (c as f64 / n) / ph;
                h -= r * r.ln();
            }
        }
    }
    h
}

/// Smallest cut maximizing the naive entropy, mirroring the production
/// tie-break but none of its algebra.
pub fn naive_threshold(counts: &[u64; 256]) -> u8 {
    let mut best = 0usize;
    let mut best_h = f64::NEG_INFINITY;
    for q in 0..256 {
        let h = naive_partition_entropy(counts, q);
        if h > best_h {
            best_h = h;
            best = q;
        }
    }
    best as u8
}
