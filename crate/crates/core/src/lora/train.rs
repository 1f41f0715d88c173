//! Deterministic toy trainer: a two-layer dense network whose four named
//! projections (q, k, v, o) carry adapters, trained with AdamW-style
//! decoupled weight decay, gradient accumulation, and per-epoch checkpoints.
//! Base weights are frozen by construction: no gradient is ever computed
//! for them.

use super::{cosine_warmup_lr, init_adapter, LoraAdapter, LoraError, Matrix, TargetTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub accumulation_steps: usize,
    pub warmup_ratio: f64,
    pub seed: u64,
    pub checkpoint_interval: usize,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        // Mirrors the published fine-tuning configuration at toy scale.
        ToyTrainConfig {
            epochs: 8,
            batch_size: 8,
            learning_rate: 2e-2,
            weight_decay: 0.01,
            accumulation_steps: 4,
            warmup_ratio: 0.03,
            seed: 42,
            checkpoint_interval: 4,
        }
    }
}

impl ToyTrainConfig {
    pub fn validate(&self) -> Result<(), LoraError> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.accumulation_steps == 0
            || self.checkpoint_interval == 0
        {
            return Err(LoraError::Config("all counts must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(LoraError::Config("learning_rate must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(LoraError::Config("weight_decay must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(LoraError::Config("warmup_ratio outside [0,1)".into()));
        }
        Ok(())
    }
}

/// Adapter gradients keyed by target, (dA, dB) pairs.
pub type Gradients = BTreeMap<TargetTag, (Matrix, Matrix)>;

/// Two-layer dense network y = Wo relu((Wq + Wk + Wv) x) with one optional
/// adapter per projection. No attention is involved; the named projections
/// exist to exercise target-module selection structurally.
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub dim: usize,
    pub base: BTreeMap<TargetTag, Matrix>,
    pub adapters: BTreeMap<TargetTag, LoraAdapter>,
}

impl ToyModel {
    /// Frozen random base weights, deterministic per seed.
    pub fn new(dim: usize, seed: u64) -> ToyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).unwrap();
        let mut base = BTreeMap::new();
        for tag in TargetTag::all() {
            base.insert(tag, Matrix::from_fn(dim, dim, |_, _| normal.sample(&mut rng)));
        }
        ToyModel {
            dim,
            base,
            adapters: BTreeMap::new(),
        }
    }

    pub fn attach_adapters(
        &mut self,
        targets: &[TargetTag],
        rank: usize,
        alpha: f64,
        dropout_p: f64,
        seed: u64,
    ) -> Result<(), LoraError> {
        for (i, &tag) in targets.iter().enumerate() {
            let adapter = init_adapter(
                self.dim,
                self.dim,
                rank,
                alpha,
                dropout_p,
                seed.wrapping_add(i as u64),
                tag,
            )?;
            self.adapters.insert(tag, adapter);
        }
        Ok(())
    }

    pub fn trainable_parameter_count(&self) -> usize {
        self.adapters.values().map(|a| a.trainable_count()).sum()
    }

    pub fn full_finetune_parameter_count(&self) -> usize {
        self.base.values().map(|m| m.rows * m.cols).sum()
    }

    /// Byte image of the frozen weights, for bit-exact comparison.
    pub fn base_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        for m in self.base.values() {
            bytes.extend(m.le_bytes());
        }
        bytes
    }

    fn project(&self, tag: TargetTag, x: &[f64]) -> Vec<f64> {
        let mut y = self.base[&tag].matvec(x);
        if let Some(adapter) = self.adapters.get(&tag) {
            for (yi, ai) in y.iter_mut().zip(adapter.apply(x).expect("shapes fixed")) {
                *yi += ai;
            }
        }
        y
    }

    /// Base projection plus the adapter path with a dropout mask on the
    /// adapter input. Returns the masked input so backward can reuse it.
    fn project_masked(
        &self,
        tag: TargetTag,
        x: &[f64],
        mask: Option<&[f64]>,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut y = self.base[&tag].matvec(x);
        let masked: Vec<f64> = match mask {
            Some(m) => x.iter().zip(m).map(|(v, k)| v * k).collect(),
            None => x.to_vec(),
        };
        if let Some(adapter) = self.adapters.get(&tag) {
            for (yi, ai) in y
                .iter_mut()
                .zip(adapter.apply(&masked).expect("shapes fixed"))
            {
                *yi += ai;
            }
        }
        (y, masked)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let (y, _, _) = self.forward_cached(x);
        y
    }

    fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut s = vec![0.0; self.dim];
        for tag in [TargetTag::Q, TargetTag::K, TargetTag::V] {
            for (si, pi) in s.iter_mut().zip(self.project(tag, x)) {
                *si += pi;
            }
        }
        let h: Vec<f64> = s.iter().map(|&v| v.max(0.0)).collect();
        let y = self.project(TargetTag::O, &h);
        (y, s, h)
    }

    /// Mean squared error over the batch, averaged over output dimensions.
    pub fn batch_loss(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let mut total = 0.0;
        for (x, t) in batch {
            let y = self.forward(x);
            total += y
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / self.dim as f64;
        }
        total / batch.len() as f64
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.adapters
            .iter()
            .map(|(tag, ad)| {
                (
                    *tag,
                    (
                        Matrix::zeros(ad.a.rows, ad.a.cols),
                        Matrix::zeros(ad.b.rows, ad.b.cols),
                    ),
                )
            })
            .collect()
    }

    /// Loss and adapter gradients for the mean batch loss. Only A and B
    /// matrices receive gradients; the base never does.
    pub fn backward_batch(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> (f64, Gradients) {
        self.backward_impl(batch, None)
    }

    /// Training-mode backward pass with inverted dropout on each adapter's
    /// input path (the vector fed to A), drawn per sample.
    pub fn backward_batch_dropout(
        &self,
        batch: &[(Vec<f64>, Vec<f64>)],
        rng: &mut ChaCha8Rng,
    ) -> (f64, Gradients) {
        self.backward_impl(batch, Some(rng))
    }

    fn dropout_mask(&self, tag: TargetTag, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let p = self.adapters.get(&tag)?.dropout_p;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 - p;
        Some(
            (0..self.dim)
                .map(|_| if rng.gen_bool(p) { 0.0 } else { 1.0 / keep })
                .collect(),
        )
    }

    fn backward_impl(
        &self,
        batch: &[(Vec<f64>, Vec<f64>)],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (f64, Gradients) {
        let mut grads = self.zero_gradients();
        let mut loss = 0.0;
        let d = self.dim as f64;
        let bsz = batch.len() as f64;
        for (x, t) in batch {
            let mut masks: std::collections::BTreeMap<TargetTag, Option<Vec<f64>>> =
                Default::default();
            for tag in TargetTag::all() {
                let mask = match rng.as_deref_mut() {
                    Some(r) => self.dropout_mask(tag, r),
                    None => None,
                };
                masks.insert(tag, mask);
            }

            // Forward with per-adapter input masks.
            let mut s = vec![0.0; self.dim];
            let mut masked_inputs: std::collections::BTreeMap<TargetTag, Vec<f64>> =
                Default::default();
            for tag in [TargetTag::Q, TargetTag::K, TargetTag::V] {
                let (proj, masked) = self.project_masked(tag, x, masks[&tag].as_deref());
                for (si, pi) in s.iter_mut().zip(proj) {
                    *si += pi;
                }
                masked_inputs.insert(tag, masked);
            }
            let h: Vec<f64> = s.iter().map(|&v| v.max(0.0)).collect();
            let (y, h_masked) = self.project_masked(TargetTag::O, &h, masks[&TargetTag::O].as_deref());

            loss += y
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / d;
            let g_y: Vec<f64> = y
                .iter()
                .zip(t)
                .map(|(a, b)| 2.0 * (a - b) / (d * bsz))
                .collect();

            // Output projection adapter.
            if let Some(ad) = self.adapters.get(&TargetTag::O) {
                let u = ad.a.matvec(&h_masked);
                let (ga, gb) = grads.get_mut(&TargetTag::O).unwrap();
                gb.add_outer(ad.scale(), &g_y, &u);
                let bt_gy = ad.b.t_matvec(&g_y);
                ga.add_outer(ad.scale(), &bt_gy, &h_masked);
            }

            // Backprop into the hidden layer; the adapter path passes back
            // through its dropout mask.
            let mut g_h = self.base[&TargetTag::O].t_matvec(&g_y);
            if let Some(ad) = self.adapters.get(&TargetTag::O) {
                let bt_gy = ad.b.t_matvec(&g_y);
                let at = ad.a.t_matvec(&bt_gy);
                match &masks[&TargetTag::O] {
                    Some(mask) => {
                        for ((gi, ai), k) in g_h.iter_mut().zip(at).zip(mask) {
                            *gi += ad.scale() * ai * k;
                        }
                    }
                    None => {
                        for (gi, ai) in g_h.iter_mut().zip(at) {
                            *gi += ad.scale() * ai;
                        }
                    }
                }
            }
            let g_s: Vec<f64> = g_h
                .iter()
                .zip(&s)
                .map(|(g, &sv)| if sv > 0.0 { *g } else { 0.0 })
                .collect();

            for tag in [TargetTag::Q, TargetTag::K, TargetTag::V] {
                if let Some(ad) = self.adapters.get(&tag) {
                    let x_m = &masked_inputs[&tag];
                    let u = ad.a.matvec(x_m);
                    let (ga, gb) = grads.get_mut(&tag).unwrap();
                    gb.add_outer(ad.scale(), &g_s, &u);
                    let bt = ad.b.t_matvec(&g_s);
                    ga.add_outer(ad.scale(), &bt, x_m);
                }
            }
        }
        (loss / bsz, grads)
    }
}

fn scale_gradients(grads: &mut Gradients, factor: f64) {
    for (ga, gb) in grads.values_mut() {
        for v in ga.data.iter_mut().chain(gb.data.iter_mut()) {
            *v *= factor;
        }
    }
}

fn accumulate(into: &mut Gradients, from: &Gradients) {
    for (tag, (ga, gb)) in from {
        let (ia, ib) = into.get_mut(tag).unwrap();
        for (t, s) in ia.data.iter_mut().zip(&ga.data) {
            *t += s;
        }
        for (t, s) in ib.data.iter_mut().zip(&gb.data) {
            *t += s;
        }
    }
}

/// AdamW with decoupled weight decay, applied to adapter matrices only.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moment1: BTreeMap<TargetTag, (Matrix, Matrix)>,
    moment2: BTreeMap<TargetTag, (Matrix, Matrix)>,
}

impl AdamW {
    pub fn new(model: &ToyModel) -> AdamW {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moment1: model.zero_gradients(),
            moment2: model.zero_gradients(),
        }
    }

    pub fn step(&mut self, model: &mut ToyModel, grads: &Gradients, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (tag, (ga, gb)) in grads {
            let adapter = model.adapters.get_mut(tag).expect("adapter exists");
            let (m1a, m1b) = self.moment1.get_mut(tag).unwrap();
            let (m2a, m2b) = self.moment2.get_mut(tag).unwrap();
            for (((theta, g), m), v) in adapter
                .a
                .data
                .iter_mut()
                .zip(&ga.data)
                .zip(m1a.data.iter_mut())
                .zip(m2a.data.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
                *theta -= lr * (update + weight_decay * *theta);
            }
            for (((theta, g), m), v) in adapter
                .b
                .data
                .iter_mut()
                .zip(&gb.data)
                .zip(m1b.data.iter_mut())
                .zip(m2b.data.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
                *theta -= lr * (update + weight_decay * *theta);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_loss: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainLog {
    pub records: Vec<TrainLogRecord>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("log record serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn first_train_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.train_loss)
    }

    pub fn last_train_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_loss)
    }
}

/// Pluggable per-epoch evaluation metric.
pub type EvalMetric<'a> = (&'a str, &'a dyn Fn(&ToyModel, &[(Vec<f64>, Vec<f64>)]) -> f64);

/// Runs the accumulation training loop: micro-batch losses are scaled by
/// 1/G, gradients accumulate, and the optimizer and schedule advance once
/// every G micro-batches. Checkpoints are written every
/// `checkpoint_interval` epochs and at the final epoch.
pub fn train_toy(
    model: &mut ToyModel,
    train: &[(Vec<f64>, Vec<f64>)],
    eval: &[(Vec<f64>, Vec<f64>)],
    cfg: &ToyTrainConfig,
    metrics: &[EvalMetric],
    checkpoint_dir: Option<&Path>,
) -> Result<TrainLog, LoraError> {
    cfg.validate()?;
    if model.adapters.is_empty() {
        return Err(LoraError::Config("no adapters attached".into()));
    }
    if train.len() < cfg.batch_size * cfg.accumulation_steps {
        return Err(LoraError::Config(format!(
            "need at least {} samples for one optimizer step",
            cfg.batch_size * cfg.accumulation_steps
        )));
    }
    let micro_per_epoch = train.len() / cfg.batch_size;
    let steps_per_epoch = micro_per_epoch / cfg.accumulation_steps;
    let total_steps = steps_per_epoch * cfg.epochs;

    let mut optimizer = AdamW::new(model);
    let mut log = TrainLog::default();
    let mut opt_step = 0usize;
    let mut last_lr = 0.0;
    let dropout_on = model.adapters.values().any(|a| a.dropout_p > 0.0);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00d0_0d00);

    for epoch in 1..=cfg.epochs {
        let mut accumulated = model.zero_gradients();
        let mut pending = 0usize;
        let mut epoch_loss = 0.0;
        let mut steps_this_epoch = 0usize;

        for micro in 0..micro_per_epoch {
            let batch = &train[micro * cfg.batch_size..(micro + 1) * cfg.batch_size];
            let (loss, mut grads) = if dropout_on {
                model.backward_batch_dropout(batch, &mut dropout_rng)
            } else {
                model.backward_batch(batch)
            };
            // loss <- loss / G before accumulation.
            let scale = 1.0 / cfg.accumulation_steps as f64;
            scale_gradients(&mut grads, scale);
            accumulate(&mut accumulated, &grads);
            epoch_loss += loss * scale;
            pending += 1;
            if pending == cfg.accumulation_steps {
                last_lr = cosine_warmup_lr(opt_step, total_steps, cfg.warmup_ratio, cfg.learning_rate)?;
                optimizer.step(model, &accumulated, last_lr, cfg.weight_decay);
                opt_step += 1;
                steps_this_epoch += 1;
                accumulated = model.zero_gradients();
                pending = 0;
            }
        }

        let eval_loss = if eval.is_empty() {
            f64::NAN
        } else {
            model.batch_loss(eval)
        };
        let mut metric_values = BTreeMap::new();
        for (name, f) in metrics {
            metric_values.insert((*name).to_string(), f(model, eval));
        }
        log.records.push(TrainLogRecord {
            epoch,
            step: opt_step,
            lr: last_lr,
            train_loss: epoch_loss / steps_this_epoch.max(1) as f64,
            eval_loss,
            metrics: metric_values,
        });

        if let Some(dir) = checkpoint_dir {
            if epoch % cfg.checkpoint_interval == 0 || epoch == cfg.epochs {
                save_checkpoint(model, dir, epoch, opt_step)?;
            }
        }
    }
    Ok(log)
}

/// Flat little-endian f64 blobs plus a manifest describing shapes, rank,
/// alpha, and step.
pub fn save_checkpoint(
    model: &ToyModel,
    dir: &Path,
    epoch: usize,
    step: usize,
) -> Result<(), LoraError> {
    let io = |e: std::io::Error| LoraError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut targets = Vec::new();
    for (tag, adapter) in &model.adapters {
        let a_file = format!("a_{}.bin", tag.as_str());
        let b_file = format!("b_{}.bin", tag.as_str());
        std::fs::File::create(dir.join(&a_file))
            .map_err(io)?
            .write_all(&adapter.a.le_bytes())
            .map_err(io)?;
        std::fs::File::create(dir.join(&b_file))
            .map_err(io)?
            .write_all(&adapter.b.le_bytes())
            .map_err(io)?;
        targets.push(serde_json::json!({
            "target": tag.as_str(),
            "rank": adapter.rank,
            "alpha": adapter.alpha,
            "a_shape": [adapter.a.rows, adapter.a.cols],
            "b_shape": [adapter.b.rows, adapter.b.cols],
            "a_file": a_file,
            "b_file": b_file,
        }));
    }
    let manifest = serde_json::json!({
        "epoch": epoch,
        "step": step,
        "dim": model.dim,
        "byte_order": "little-endian f64",
        "targets": targets,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(io)
}

pub fn load_checkpoint(model: &mut ToyModel, dir: &Path) -> Result<(), LoraError> {
    let io = |e: std::io::Error| LoraError::Io(e.to_string());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).map_err(io)?)
            .map_err(|e| LoraError::Io(e.to_string()))?;
    for entry in manifest["targets"].as_array().into_iter().flatten() {
        let tag = match entry["target"].as_str() {
            Some("q") => TargetTag::Q,
            Some("k") => TargetTag::K,
            Some("v") => TargetTag::V,
            Some("o") => TargetTag::O,
            other => return Err(LoraError::Io(format!("unknown target {other:?}"))),
        };
        let adapter = model
            .adapters
            .get_mut(&tag)
            .ok_or_else(|| LoraError::Io(format!("no adapter attached for {tag:?}")))?;
        let a_bytes = std::fs::read(dir.join(entry["a_file"].as_str().unwrap())).map_err(io)?;
        let b_bytes = std::fs::read(dir.join(entry["b_file"].as_str().unwrap())).map_err(io)?;
        adapter.a = Matrix::from_le_bytes(adapter.a.rows, adapter.a.cols, &a_bytes)?;
        adapter.b = Matrix::from_le_bytes(adapter.b.rows, adapter.b.cols, &b_bytes)?;
    }
    Ok(())
}

/// Central finite differences over every trainable entry against the
/// analytic gradients; returns the maximum relative error.
pub fn gradient_check(
    model: &mut ToyModel,
    batch: &[(Vec<f64>, Vec<f64>)],
    epsilon: f64,
) -> Result<f64, LoraError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(LoraError::Config(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let (_, analytic) = model.backward_batch(batch);
    let numeric = finite_difference_gradients(model, batch, epsilon);
    Ok(max_relative_error(&flatten(&analytic), &flatten(&numeric)))
}

pub fn finite_difference_gradients(
    model: &mut ToyModel,
    batch: &[(Vec<f64>, Vec<f64>)],
    epsilon: f64,
) -> Gradients {
    let tags: Vec<TargetTag> = model.adapters.keys().copied().collect();
    let mut grads = model.zero_gradients();
    for tag in tags {
        for which in 0..2 {
            let len = {
                let ad = &model.adapters[&tag];
                if which == 0 {
                    ad.a.data.len()
                } else {
                    ad.b.data.len()
                }
            };
            for idx in 0..len {
                let read = |m: &mut ToyModel| -> f64 {
                    let ad = m.adapters.get_mut(&tag).unwrap();
                    if which == 0 {
                        ad.a.data[idx]
                    } else {
                        ad.b.data[idx]
                    }
                };
                let write = |m: &mut ToyModel, v: f64| {
                    let ad = m.adapters.get_mut(&tag).unwrap();
                    if which == 0 {
                        ad.a.data[idx] = v;
                    } else {
                        ad.b.data[idx] = v;
                    }
                };
                let original = read(model);
                write(model, original + epsilon);
                let plus = model.batch_loss(batch);
                write(model, original - epsilon);
                let minus = model.batch_loss(batch);
                write(model, original);
                let d = (plus - minus) / (2.0 * epsilon);
                let (ga, gb) = grads.get_mut(&tag).unwrap();
                if which == 0 {
                    ga.data[idx] = d;
                } else {
                    gb.data[idx] = d;
                }
            }
        }
    }
    grads
}

pub fn flatten(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (ga, gb) in grads.values() {
        out.extend(&ga.data);
        out.extend(&gb.data);
    }
    out
}

/// Componentwise relative error with a scale-aware floor: entries far below
/// the gradient's own magnitude cannot inflate the ratio with
/// finite-difference roundoff noise.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-8);
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let denom = x.abs().max(y.abs()).max(floor);
            (x - y).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Synthetic regression set: targets come from the base network plus a
/// secret low-rank perturbation on the q and v projections, so rank-r
/// adapters can fit the residual exactly.
pub fn make_toy_dataset(
    model: &ToyModel,
    seed: u64,
    samples: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let dim = model.dim;

    let mut teacher = model.clone();
    teacher.adapters.clear();
    for tag in [TargetTag::Q, TargetTag::V] {
        let u: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng) * 0.4).collect();
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng) * 0.4).collect();
        teacher.base.get_mut(&tag).unwrap().add_outer(1.0, &u, &v);
    }

    (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let y = teacher.forward(&x);
            (x, y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> ToyModel {
        let mut model = ToyModel::new(8, 3);
        model
            .attach_adapters(&TargetTag::all(), 2, 4.0, 0.0, 17)
            .unwrap();
        model
    }

    #[test]
    fn parameter_accounting() {
        let mut model = ToyModel::new(64, 1);
        model
            .attach_adapters(&TargetTag::all(), 16, 32.0, 0.0, 2)
            .unwrap();
        assert_eq!(model.trainable_parameter_count(), 4 * 16 * 128);
        assert_eq!(model.full_finetune_parameter_count(), 4 * 4096);
    }

    #[test]
    fn gradient_check_passes() {
        let mut model = small_model();
        // Move B off zero so every gradient path is live.
        for ad in model.adapters.values_mut() {
            for (i, v) in ad.b.data.iter_mut().enumerate() {
                *v = ((i * 7 % 13) as f64 - 6.0) * 0.05;
            }
        }
        let data = make_toy_dataset(&model, 5, 4);
        let err = gradient_check(&mut model, &data, 1e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn gradient_check_zero_loss_point() {
        let model = small_model();
        // Targets produced by the model itself: loss and gradients vanish.
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
            .map(|i| {
                let x: Vec<f64> = (0..8).map(|j| ((i * 8 + j) as f64 * 0.1).sin()).collect();
                let y = model.forward(&x);
                (x, y)
            })
            .collect();
        assert!(model.batch_loss(&data) < 1e-24);
        let (_, analytic) = model.backward_batch(&data);
        assert!(flatten(&analytic).iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn corrupted_backward_fails_the_check() {
        let mut model = small_model();
        for ad in model.adapters.values_mut() {
            for (i, v) in ad.b.data.iter_mut().enumerate() {
                *v = ((i % 5) as f64 - 2.0) * 0.07;
            }
        }
        let data = make_toy_dataset(&model, 6, 4);
        let (_, mut analytic) = model.backward_batch(&data);
        // Fault injection: scale one gradient block.
        let (ga, _) = analytic.get_mut(&TargetTag::Q).unwrap();
        for v in ga.data.iter_mut() {
            *v *= 1.5;
        }
        let numeric = finite_difference_gradients(&mut model, &data, 1e-5);
        let err = max_relative_error(&flatten(&analytic), &flatten(&numeric));
        assert!(err > 1e-2, "corrupted gradients not caught: {err}");
    }

    #[test]
    fn frozen_base_bit_identical_after_training() {
        let mut model = small_model();
        let before = model.base_bytes();
        let data = make_toy_dataset(&model, 7, 64);
        let cfg = ToyTrainConfig {
            epochs: 2,
            batch_size: 4,
            accumulation_steps: 2,
            ..Default::default()
        };
        train_toy(&mut model, &data, &data[..8], &cfg, &[], None).unwrap();
        assert_eq!(model.base_bytes(), before);
    }

    #[test]
    fn accumulation_matches_full_batch() {
        let data = {
            let probe = small_model();
            make_toy_dataset(&probe, 11, 16)
        };
        let cfg_accum = ToyTrainConfig {
            epochs: 1,
            batch_size: 4,
            accumulation_steps: 4,
            warmup_ratio: 0.0,
            ..Default::default()
        };
        let cfg_full = ToyTrainConfig {
            epochs: 1,
            batch_size: 16,
            accumulation_steps: 1,
            warmup_ratio: 0.0,
            ..Default::default()
        };
        let mut accum_model = small_model();
        let mut full_model = small_model();
        train_toy(&mut accum_model, &data, &[], &cfg_accum, &[], None).unwrap();
        train_toy(&mut full_model, &data, &[], &cfg_full, &[], None).unwrap();
        for tag in TargetTag::all() {
            let a1 = &accum_model.adapters[&tag];
            let a2 = &full_model.adapters[&tag];
            let err = max_relative_error(&a1.a.data, &a2.a.data)
                .max(max_relative_error(&a1.b.data, &a2.b.data));
            assert!(err < 1e-6, "{tag:?} diverged: {err}");
        }
    }

    #[test]
    fn optimizer_steps_every_g_micro_batches() {
        let mut model = small_model();
        let data = make_toy_dataset(&model, 13, 24);
        let cfg = ToyTrainConfig {
            epochs: 2,
            batch_size: 4,
            accumulation_steps: 3,
            ..Default::default()
        };
        let log = train_toy(&mut model, &data, &[], &cfg, &[], None).unwrap();
        // 24 samples / bsz 4 = 6 micro-batches, / G 3 = 2 steps per epoch.
        assert_eq!(log.records[0].step, 2);
        assert_eq!(log.records[1].step, 4);
    }

    #[test]
    fn training_reduces_loss_within_200_steps() {
        let mut model = small_model();
        let data = make_toy_dataset(&model, 21, 128);
        let cfg = ToyTrainConfig {
            epochs: 12,
            batch_size: 8,
            accumulation_steps: 1,
            learning_rate: 2e-2,
            warmup_ratio: 0.03,
            ..Default::default()
        };
        let log = train_toy(&mut model, &data, &data[..16], &cfg, &[], None).unwrap();
        let first = log.first_train_loss().unwrap();
        let last = log.last_train_loss().unwrap();
        // 12 epochs x 16 micro-batches = 192 optimizer steps.
        assert_eq!(log.records.last().unwrap().step, 192);
        assert!(
            last < 0.1 * first,
            "loss went {first} -> {last}, less than 10x reduction"
        );
    }

    #[test]
    fn accumulation_matches_full_batch_for_every_divisor() {
        let data = {
            let probe = small_model();
            make_toy_dataset(&probe, 11, 16)
        };
        let run = |batch_size: usize, g: usize| {
            let mut model = small_model();
            let cfg = ToyTrainConfig {
                epochs: 1,
                batch_size,
                accumulation_steps: g,
                warmup_ratio: 0.0,
                ..Default::default()
            };
            train_toy(&mut model, &data, &[], &cfg, &[], None).unwrap();
            model
        };
        let full = run(16, 1);
        for g in [2usize, 4, 8, 16] {
            let accum = run(16 / g, g);
            for tag in TargetTag::all() {
                let err = max_relative_error(
                    &accum.adapters[&tag].a.data,
                    &full.adapters[&tag].a.data,
                )
                .max(max_relative_error(
                    &accum.adapters[&tag].b.data,
                    &full.adapters[&tag].b.data,
                ));
                assert!(err < 1e-6, "G={g} {tag:?} diverged: {err}");
            }
        }
    }

    #[test]
    fn dropout_is_seed_deterministic_and_perturbs_training() {
        let data = {
            let probe = small_model();
            make_toy_dataset(&probe, 23, 32)
        };
        let run = |dropout: f64| {
            let mut model = ToyModel::new(8, 3);
            model
                .attach_adapters(&TargetTag::all(), 2, 4.0, dropout, 17)
                .unwrap();
            let cfg = ToyTrainConfig {
                epochs: 2,
                batch_size: 4,
                accumulation_steps: 2,
                ..Default::default()
            };
            train_toy(&mut model, &data, &[], &cfg, &[], None).unwrap();
            model
                .adapters
                .values()
                .flat_map(|a| a.a.data.iter().chain(a.b.data.iter()))
                .copied()
                .collect::<Vec<f64>>()
        };
        let with_dropout_a = run(0.2);
        let with_dropout_b = run(0.2);
        assert_eq!(with_dropout_a, with_dropout_b);
        let without = run(0.0);
        assert_ne!(with_dropout_a, without);
    }

    #[test]
    fn dropout_masks_only_the_adapter_path() {
        // With B at zero the adapter output is zero regardless of the mask,
        // so dropped activations cannot leak into the base path.
        let mut model = ToyModel::new(8, 3);
        model
            .attach_adapters(&TargetTag::all(), 2, 4.0, 0.5, 17)
            .unwrap();
        let data = make_toy_dataset(&model, 29, 8);
        let (plain_loss, _) = model.backward_batch(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (dropout_loss, _) = model.backward_batch_dropout(&data, &mut rng);
        assert_eq!(plain_loss, dropout_loss);
    }

    #[test]
    fn deterministic_without_dropout() {
        let run = || {
            let mut model = small_model();
            let data = make_toy_dataset(&model, 9, 32);
            let cfg = ToyTrainConfig {
                epochs: 2,
                batch_size: 4,
                accumulation_steps: 2,
                ..Default::default()
            };
            train_toy(&mut model, &data, &data[..4], &cfg, &[], None).unwrap();
            model
                .adapters
                .values()
                .flat_map(|a| a.a.data.iter().chain(a.b.data.iter()))
                .copied()
                .collect::<Vec<f64>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoints_written_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = small_model();
        let data = make_toy_dataset(&model, 15, 32);
        let cfg = ToyTrainConfig {
            epochs: 4,
            batch_size: 4,
            accumulation_steps: 2,
            checkpoint_interval: 2,
            ..Default::default()
        };
        train_toy(&mut model, &data, &[], &cfg, &[], Some(dir.path())).unwrap();
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("a_q.bin").exists());
        let mut fresh = small_model();
        load_checkpoint(&mut fresh, dir.path()).unwrap();
        for tag in TargetTag::all() {
            assert_eq!(fresh.adapters[&tag].a.data, model.adapters[&tag].a.data);
            assert_eq!(fresh.adapters[&tag].b.data, model.adapters[&tag].b.data);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ToyTrainConfig::default();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ToyTrainConfig::default();
        cfg.warmup_ratio = 1.0;
        assert!(cfg.validate().is_err());
        let model_without_adapters = ToyModel::new(8, 1);
        let mut m = model_without_adapters;
        let data = vec![(vec![0.0; 8], vec![0.0; 8]); 8];
        assert!(train_toy(&mut m, &data, &[], &ToyTrainConfig::default(), &[], None).is_err());
    }

    #[test]
    fn eval_metrics_plugged_into_log() {
        let mut model = small_model();
        let data = make_toy_dataset(&model, 19, 32);
        let cfg = ToyTrainConfig {
            epochs: 1,
            batch_size: 4,
            accumulation_steps: 2,
            ..Default::default()
        };
        let rmse = |m: &ToyModel, d: &[(Vec<f64>, Vec<f64>)]| m.batch_loss(d).sqrt();
        let log = train_toy(
            &mut model,
            &data,
            &data[..8],
            &cfg,
            &[("rmse", &rmse)],
            None,
        )
        .unwrap();
        assert!(log.records[0].metrics.contains_key("rmse"));
    }
}
