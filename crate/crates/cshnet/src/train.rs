//! Training loop: one discriminator update then one generator update per
//! step, Adam for both, loss-term bookkeeping, and train-state
//! checkpointing.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, Axis};
use serde::{Deserialize, Serialize};

use crate::adversarial::{
    content_loss_frozen, discriminator_forward, feature_matching_loss, load_feature_extractor,
    lsgan_loss, ContentMode, Discriminator, DiscriminatorConfig, FrozenLayer,
};
use crate::aepl::{aepl_loss_with, ThresholdPolicy};
use crate::autograd::{Graph, Value};
use crate::data::ImagePair;
use crate::generator::{forward_with, Generator, GeneratorConfig};
use crate::params::ParamCtx;
use crate::{adversarial, checkpoint, Error, Result};

pub const ADAM_EPS: f64 = 1e-8;

/// Balance of the four generator loss terms, applied in the order
/// GAN, feature matching, content, edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub gan: f64,
    pub feat: f64,
    pub cont: f64,
    pub aepl: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gan: 1.0,
            feat: 10.0,
            cont: 10.0,
            aepl: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gan", self.gan),
            ("feat", self.feat),
            ("cont", self.cont),
            ("aepl", self.aepl),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "loss weight {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 1,
            epochs: 1,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config("lr must be finite and non-negative".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.weights.validate()
    }
}

/// The four generator loss terms as graph values.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub gan: Value,
    pub feat: Value,
    pub cont: Value,
    pub aepl: Value,
}

/// Weighted sum of the loss terms. Rejects non-finite terms by name
/// before they can poison the update.
pub fn total_loss(g: &mut Graph, terms: &LossTerms, w: &LossWeights) -> Result<Value> {
    for (name, v) in [
        ("gan", terms.gan),
        ("feat", terms.feat),
        ("cont", terms.cont),
        ("aepl", terms.aepl),
    ] {
        let x = g.scalar(v);
        if !x.is_finite() {
            return Err(Error::Data(format!("non-finite {name} loss term: {x}")));
        }
    }
    let a = g.scale(terms.gan, w.gan);
    let b = g.scale(terms.feat, w.feat);
    let c = g.scale(terms.cont, w.cont);
    let d = g.scale(terms.aepl, w.aepl);
    let ab = g.add(a, b);
    let abc = g.add(ab, c);
    Ok(g.add(abc, d))
}

/// Adam moments for one parameter store. Moments are quantized to f32
/// after every update, mirroring the stores, so checkpoints stay compact
/// and bit exact.
#[derive(Debug, Default)]
pub struct AdamState {
    pub t: u64,
    pub m: BTreeMap<String, ArrayD<f64>>,
    pub v: BTreeMap<String, ArrayD<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        store: &mut crate::params::ParamStore,
        grads: &BTreeMap<String, ArrayD<f64>>,
        lr: f64,
        beta1: f64,
        beta2: f64,
    ) {
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let Some(param) = store.get(name) else {
                continue;
            };
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(grad.raw_dim()));
            m.zip_mut_with(grad, |mv, &gv| *mv = beta1 * *mv + (1.0 - beta1) * gv);
            v.zip_mut_with(grad, |vv, &gv| *vv = beta2 * *vv + (1.0 - beta2) * gv * gv);
            let mut updated = param.clone();
            ndarray::Zip::from(&mut updated)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &mv, &vv| {
                    let mhat = mv / bc1;
                    let vhat = vv / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                });
            store.set(name, updated);
        }
        store.quantize_f32();
        for t in self.m.values_mut().chain(self.v.values_mut()) {
            t.mapv_inplace(|x| x as f32 as f64);
        }
    }
}

/// Everything a training run is configured by.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub train: TrainConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub content_mode: ContentMode,
    pub threshold_policy: ThresholdPolicy,
    pub gaussian_sigma: f64,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.generator.validate()?;
        self.discriminator.validate()?;
        if !self.gaussian_sigma.is_finite() || self.gaussian_sigma <= 0.0 {
            return Err(Error::Config(format!(
                "gaussian_sigma must be finite and positive, got {}",
                self.gaussian_sigma
            )));
        }
        Ok(())
    }
}

/// One step's recorded losses. `step` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub gan: f64,
    pub feat: f64,
    pub cont: f64,
    pub aepl: f64,
    pub total: f64,
    pub disc: f64,
}

/// CSV rendering of a loss history, one row per step.
pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut out =
        String::from("step,loss_gan,loss_feat,loss_cont,loss_aepl,loss_total,loss_disc\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step, r.gan, r.feat, r.cont, r.aepl, r.total, r.disc
        ));
    }
    out
}

pub struct Trainer {
    pub setup: TrainSetup,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub adam_g: AdamState,
    pub adam_d: AdamState,
    pub step: u64,
    pub history: Vec<LossRecord>,
    frozen_content: Option<Vec<FrozenLayer>>,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self> {
        setup.validate()?;
        let seed = setup.train.seed;
        let generator = Generator::build(setup.generator.clone(), seed)?;
        let discriminator = Discriminator::build(setup.discriminator.clone(), seed.wrapping_add(1))?;
        let frozen_content = match &setup.content_mode {
            ContentMode::Pixel => None,
            ContentMode::Feature(None) => {
                return Err(Error::Config(
                    "content mode \"feature\" requires a feature-extractor checkpoint".into(),
                ))
            }
            ContentMode::Feature(Some(path)) => Some(load_feature_extractor(path)?),
        };
        Ok(Self {
            setup,
            generator,
            discriminator,
            adam_g: AdamState::new(),
            adam_d: AdamState::new(),
            step: 0,
            history: Vec::new(),
            frozen_content,
        })
    }

    fn batch(&self, pairs: &[ImagePair]) -> (ArrayD<f64>, ArrayD<f64>) {
        let b = self.setup.train.batch_size;
        let shape = pairs[0].source.shape();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let mut src = ArrayD::zeros(vec![b, c, h, w]);
        let mut tgt = ArrayD::zeros(vec![b, c, h, w]);
        for k in 0..b {
            let idx = ((self.step * b as u64 + k as u64) % pairs.len() as u64) as usize;
            src.index_axis_mut(Axis(0), k).assign(&pairs[idx].source);
            tgt.index_axis_mut(Axis(0), k).assign(&pairs[idx].target);
        }
        (src, tgt)
    }

    fn content_term(&self, g: &mut Graph, real: Value, fake: Value) -> Result<Value> {
        match &self.frozen_content {
            Some(layers) => Ok(content_loss_frozen(g, real, fake, layers)),
            None => adversarial::content_loss(g, real, fake, &ContentMode::Pixel),
        }
    }

    /// One discriminator update followed by one generator update.
    pub fn train_step(&mut self, pairs: &[ImagePair]) -> Result<LossRecord> {
        if pairs.is_empty() {
            return Err(Error::Data("cannot train on an empty dataset".into()));
        }
        let (src_batch, tgt_batch) = self.batch(pairs);
        let cfg = self.setup.train.clone();
        let gen_cfg = self.setup.generator.clone();
        let disc_cfg = self.setup.discriminator.clone();

        // Discriminator step: the candidate image is a constant here, so
        // no generator gradients are built.
        let fake_const = self.generator.translate(&src_batch);
        let disc_value = {
            let mut g = Graph::new();
            let src = g.input(src_batch.clone());
            let tgt = g.input(tgt_batch.clone());
            let fake = g.input(fake_const);
            let (real_out, fake_out) = {
                let mut ctx = ParamCtx::new(&mut g, &mut self.discriminator.store, cfg.seed);
                let real_out = discriminator_forward(&mut ctx, &disc_cfg, src, tgt)?;
                let fake_out = discriminator_forward(&mut ctx, &disc_cfg, src, fake)?;
                (real_out, fake_out)
            };
            let l_real = lsgan_loss(&mut g, &real_out.patch_logits, true);
            let l_fake = lsgan_loss(&mut g, &fake_out.patch_logits, false);
            let sum = g.add(l_real, l_fake);
            let d_loss = g.scale(sum, 0.5);
            let value = g.scalar(d_loss);
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite discriminator loss at step {}: {value}",
                    self.step + 1
                )));
            }
            let grads = g.backward(d_loss);
            let named = g.param_grads(&grads);
            self.adam_d.step(
                &mut self.discriminator.store,
                &named,
                cfg.lr,
                cfg.beta1,
                cfg.beta2,
            );
            value
        };

        // Generator step against the just-updated discriminator.
        let record = {
            let mut g = Graph::new();
            let src = g.input(src_batch);
            let tgt = g.input(tgt_batch);
            let fake = {
                let mut ctx = ParamCtx::new(&mut g, &mut self.generator.store, cfg.seed);
                forward_with(&mut ctx, &gen_cfg, src).0
            };
            let (real_out, fake_out) = {
                let mut ctx = ParamCtx::new(&mut g, &mut self.discriminator.store, cfg.seed);
                let real_out = discriminator_forward(&mut ctx, &disc_cfg, src, tgt)?;
                let fake_out = discriminator_forward(&mut ctx, &disc_cfg, src, fake)?;
                (real_out, fake_out)
            };
            let terms = LossTerms {
                gan: lsgan_loss(&mut g, &fake_out.patch_logits, true),
                feat: feature_matching_loss(&mut g, &real_out.features, &fake_out.features)?,
                cont: self.content_term(&mut g, tgt, fake)?,
                aepl: aepl_loss_with(
                    &mut g,
                    tgt,
                    fake,
                    self.setup.threshold_policy,
                    self.setup.gaussian_sigma,
                )?,
            };
            let total = total_loss(&mut g, &terms, &cfg.weights).map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!(
                    "step {}: {msg} (gan {}, feat {}, cont {}, aepl {})",
                    self.step + 1,
                    g.scalar(terms.gan),
                    g.scalar(terms.feat),
                    g.scalar(terms.cont),
                    g.scalar(terms.aepl)
                )),
                other => other,
            })?;
            let grads = g.backward(total);
            let named = g.param_grads(&grads);
            let gen_grads: BTreeMap<String, ArrayD<f64>> = named
                .into_iter()
                .filter(|(name, _)| self.generator.store.get(name).is_some())
                .collect();
            self.adam_g.step(
                &mut self.generator.store,
                &gen_grads,
                cfg.lr,
                cfg.beta1,
                cfg.beta2,
            );
            LossRecord {
                step: self.step + 1,
                gan: g.scalar(terms.gan),
                feat: g.scalar(terms.feat),
                cont: g.scalar(terms.cont),
                aepl: g.scalar(terms.aepl),
                total: g.scalar(total),
                disc: disc_value,
            }
        };

        self.step += 1;
        self.history.push(record.clone());
        Ok(record)
    }

    pub fn steps_per_epoch(&self, n_pairs: usize) -> usize {
        n_pairs.div_ceil(self.setup.train.batch_size)
    }

    /// Serialize parameters, moments, step counters, and every config.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "kind": "train_state",
            "step": self.step,
            "adam_g_t": self.adam_g.t,
            "adam_d_t": self.adam_d.t,
            "train": self.setup.train,
            "generator": self.setup.generator,
            "discriminator": self.setup.discriminator,
            "content_mode": self.setup.content_mode,
            "threshold_policy": self.setup.threshold_policy,
            "gaussian_sigma": self.setup.gaussian_sigma,
        });
        let mut tensors = BTreeMap::new();
        for (name, t) in self.generator.store.tensors() {
            tensors.insert(format!("gen/{name}"), t.clone());
        }
        for (name, t) in self.discriminator.store.tensors() {
            tensors.insert(format!("disc/{name}"), t.clone());
        }
        for (prefix, state) in [("adam_g", &self.adam_g), ("adam_d", &self.adam_d)] {
            for (name, t) in &state.m {
                tensors.insert(format!("{prefix}/m/{name}"), t.clone());
            }
            for (name, t) in &state.v {
                tensors.insert(format!("{prefix}/v/{name}"), t.clone());
            }
        }
        checkpoint::write_container(path, &meta, &tensors)
    }

    /// Restore a trainer from a checkpoint. When `expect_generator` is
    /// given, a checkpoint built from any other generator config is
    /// rejected.
    pub fn load_checkpoint(
        path: &Path,
        expect_generator: Option<&GeneratorConfig>,
    ) -> Result<Trainer> {
        let (meta, mut tensors) = checkpoint::read_container(path)?;
        if meta.get("kind").and_then(|k| k.as_str()) != Some("train_state") {
            return Err(Error::Checkpoint(format!(
                "{}: not a train-state checkpoint",
                path.display()
            )));
        }
        let field = |name: &str| -> Result<serde_json::Value> {
            meta.get(name)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("metadata field {name} missing")))
        };
        fn parse<T: serde::de::DeserializeOwned>(name: &str, v: serde_json::Value) -> Result<T> {
            serde_json::from_value(v)
                .map_err(|e| Error::Checkpoint(format!("metadata field {name}: {e}")))
        }
        let setup = TrainSetup {
            train: parse("train", field("train")?)?,
            generator: parse("generator", field("generator")?)?,
            discriminator: parse("discriminator", field("discriminator")?)?,
            content_mode: parse("content_mode", field("content_mode")?)?,
            threshold_policy: parse("threshold_policy", field("threshold_policy")?)?,
            gaussian_sigma: parse("gaussian_sigma", field("gaussian_sigma")?)?,
        };
        if let Some(expect) = expect_generator {
            if *expect != setup.generator {
                return Err(Error::Checkpoint(
                    "checkpoint was built from a different generator config".into(),
                ));
            }
        }
        let step: u64 = parse("step", field("step")?)?;
        let adam_g_t: u64 = parse("adam_g_t", field("adam_g_t")?)?;
        let adam_d_t: u64 = parse("adam_d_t", field("adam_d_t")?)?;

        let mut trainer = Trainer::new(setup)?;
        let mut split: BTreeMap<&str, BTreeMap<String, ArrayD<f64>>> = BTreeMap::new();
        for (name, t) in std::mem::take(&mut tensors) {
            let Some((prefix, rest)) = name.split_once('/') else {
                return Err(Error::Checkpoint(format!("unexpected tensor {name}")));
            };
            let bucket = match prefix {
                "gen" => "gen",
                "disc" => "disc",
                "adam_g" => "adam_g",
                "adam_d" => "adam_d",
                _ => return Err(Error::Checkpoint(format!("unexpected tensor {name}"))),
            };
            split.entry(bucket).or_default().insert(rest.to_string(), t);
        }

        let gen_tensors = split.remove("gen").unwrap_or_default();
        checkpoint::validate_tensor_set(trainer.generator.store.tensors(), &gen_tensors)?;
        for (name, t) in gen_tensors {
            trainer.generator.store.set(&name, t);
        }
        let disc_tensors = split.remove("disc").unwrap_or_default();
        checkpoint::validate_tensor_set(trainer.discriminator.store.tensors(), &disc_tensors)?;
        for (name, t) in disc_tensors {
            trainer.discriminator.store.set(&name, t);
        }
        for (bucket, state) in [
            ("adam_g", &mut trainer.adam_g),
            ("adam_d", &mut trainer.adam_d),
        ] {
            for (name, t) in split.remove(bucket).unwrap_or_default() {
                let Some(rest) = name.strip_prefix("m/") else {
                    let Some(rest) = name.strip_prefix("v/") else {
                        return Err(Error::Checkpoint(format!(
                            "unexpected tensor {bucket}/{name}"
                        )));
                    };
                    state.v.insert(rest.to_string(), t);
                    continue;
                };
                state.m.insert(rest.to_string(), t);
            }
        }
        trainer.adam_g.t = adam_g_t;
        trainer.adam_d.t = adam_d_t;
        trainer.step = step;
        Ok(trainer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aepl::GAUSSIAN_SIGMA;
    use crate::data::synth_pair;
    use crate::generator::{BottleneckVariant, IgcForm};

    fn toy_setup() -> TrainSetup {
        TrainSetup {
            train: TrainConfig {
                seed: 9,
                ..TrainConfig::default()
            },
            generator: GeneratorConfig {
                base_width: 2,
                n_downsample: 1,
                bottleneck: BottleneckVariant::Scb,
                igc_form: IgcForm::Axb,
                image_channels: 3,
                window_size: 4,
            },
            discriminator: DiscriminatorConfig {
                ndf: 2,
                scale_count: 1,
                conv_layers: 4,
                image_channels: 3,
            },
            content_mode: ContentMode::Pixel,
            threshold_policy: ThresholdPolicy::PerImage,
            gaussian_sigma: GAUSSIAN_SIGMA,
        }
    }

    fn toy_pairs() -> Vec<ImagePair> {
        (0..2).map(|i| synth_pair(3, i, 32)).collect()
    }

    #[test]
    fn total_loss_is_the_weighted_sum_in_order() {
        let mut g = Graph::new();
        let terms = LossTerms {
            gan: g.input(ndarray::arr0(0.5).into_dyn()),
            feat: g.input(ndarray::arr0(0.1).into_dyn()),
            cont: g.input(ndarray::arr0(0.2).into_dyn()),
            aepl: g.input(ndarray::arr0(0.3).into_dyn()),
        };
        let w = LossWeights::default();
        assert_eq!((w.gan, w.feat, w.cont, w.aepl), (1.0, 10.0, 10.0, 1.0));
        let total = total_loss(&mut g, &terms, &w).unwrap();
        assert!((g.scalar(total) - 3.8).abs() < 1e-12);

        let zero = LossWeights {
            gan: 0.0,
            feat: 0.0,
            cont: 0.0,
            aepl: 0.0,
        };
        let total = total_loss(&mut g, &terms, &zero).unwrap();
        assert_eq!(g.scalar(total), 0.0);

        let bad = LossTerms {
            feat: g.input(ndarray::arr0(f64::NAN).into_dyn()),
            ..terms
        };
        let err = total_loss(&mut g, &bad, &w).unwrap_err();
        assert!(err.to_string().contains("feat"), "{err}");
    }

    #[test]
    fn zero_lr_leaves_parameters_bitwise_unchanged() {
        let mut setup = toy_setup();
        setup.train.lr = 0.0;
        let mut trainer = Trainer::new(setup).unwrap();
        let pairs = toy_pairs();
        let gen_before = trainer.generator.store.tensors().clone();
        let disc_before = trainer.discriminator.store.tensors().clone();
        trainer.train_step(&pairs).unwrap();
        trainer.train_step(&pairs).unwrap();
        assert_eq!(trainer.generator.store.tensors(), &gen_before);
        assert_eq!(trainer.discriminator.store.tensors(), &disc_before);
        assert_eq!(trainer.step, 2);
        assert_eq!(trainer.history.len(), 2);
        assert_eq!(trainer.history[0].step, 1);
        assert_eq!(trainer.history[1].step, 2);
    }

    #[test]
    fn identical_seeds_give_identical_histories() {
        let pairs = toy_pairs();
        let mut a = Trainer::new(toy_setup()).unwrap();
        let mut b = Trainer::new(toy_setup()).unwrap();
        for _ in 0..3 {
            a.train_step(&pairs).unwrap();
            b.train_step(&pairs).unwrap();
        }
        assert_eq!(a.history, b.history);
        for r in &a.history {
            for v in [r.gan, r.feat, r.cont, r.aepl, r.total, r.disc] {
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn checkpoints_round_trip_and_resume_seamlessly() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let pairs = toy_pairs();

        let mut uninterrupted = Trainer::new(toy_setup()).unwrap();
        for _ in 0..4 {
            uninterrupted.train_step(&pairs).unwrap();
        }

        let mut first_half = Trainer::new(toy_setup()).unwrap();
        first_half.train_step(&pairs).unwrap();
        first_half.train_step(&pairs).unwrap();
        first_half.save_checkpoint(&p1).unwrap();

        let mut resumed = Trainer::load_checkpoint(&p1, None).unwrap();
        assert_eq!(resumed.step, 2);
        resumed.save_checkpoint(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let r3 = resumed.train_step(&pairs).unwrap();
        let r4 = resumed.train_step(&pairs).unwrap();
        assert_eq!(r3, uninterrupted.history[2]);
        assert_eq!(r4, uninterrupted.history[3]);
    }

    #[test]
    fn checkpoints_reject_a_different_generator_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        let trainer = Trainer::new(toy_setup()).unwrap();
        trainer.save_checkpoint(&p).unwrap();

        let same = toy_setup().generator;
        assert!(Trainer::load_checkpoint(&p, Some(&same)).is_ok());

        let different = GeneratorConfig {
            base_width: 4,
            ..toy_setup().generator
        };
        let err = Trainer::load_checkpoint(&p, Some(&different))
            .err()
            .expect("mismatched config must be rejected");
        assert!(matches!(err, Error::Checkpoint(_)));
    }

    #[test]
    fn config_validation_rejects_bad_training_settings() {
        let mut c = TrainConfig::default();
        c.beta1 = 1.0;
        assert!(c.validate().unwrap_err().is_usage());
        let mut c = TrainConfig::default();
        c.batch_size = 0;
        assert!(c.validate().unwrap_err().is_usage());
        let mut c = TrainConfig::default();
        c.weights.feat = -1.0;
        assert!(c.validate().unwrap_err().is_usage());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
