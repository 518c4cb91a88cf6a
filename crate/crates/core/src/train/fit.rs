use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bptt::{sample_step, LossSpec};
use super::optim::Adam;
use super::prune::{prune_delays, refine_delays, PruneSpec};
use super::quant::{quantize, QuantSpec};
use crate::error::{Error, Result};
use crate::network::{forward_dense, DelaySet, NetworkModel, NeuronParams, Raster};

/// Step decay of the learning rate: multiply by `factor` every `every` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub every: usize,
    pub factor: f64,
}

/// Hyperparameters of the training pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: Option<LrDecay>,
    /// Surrogate slope.
    pub beta: f64,
    /// Weight of the final membrane potential in the spike-count logits.
    pub vmem_weight: f64,
    /// Initial delay levels of the hidden connections:
    /// `{0, stride, ...}` below `delay_limit`.
    pub delay_limit: usize,
    pub delay_stride: usize,
    pub prune: PruneSpec,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    /// Second pruning round around surviving levels at unit stride.
    pub refine: bool,
    /// Uniform init half-width is `init_gain / sqrt(fan_in)`.
    pub init_gain: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_decay: None,
            beta: 10.0,
            vmem_weight: 0.1,
            delay_limit: 60,
            delay_stride: 2,
            prune: PruneSpec::default(),
            finetune_epochs: 5,
            finetune_learning_rate: 5e-4,
            refine: false,
            init_gain: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        for (name, v) in [
            ("learning rate", self.learning_rate),
            ("fine-tune learning rate", self.finetune_learning_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!(
                "surrogate slope must be positive, got {}",
                self.beta
            ));
        }
        if !self.vmem_weight.is_finite() || !self.init_gain.is_finite() || self.init_gain <= 0.0 {
            return bad("membrane weight and init gain must be finite (gain > 0)".into());
        }
        if let Some(d) = self.lr_decay {
            if d.every == 0 || !(d.factor.is_finite() && d.factor > 0.0) {
                return bad("learning-rate decay needs every > 0 and factor > 0".into());
            }
        }
        self.delay_set().map(|_| ())
    }

    pub fn delay_set(&self) -> Result<DelaySet> {
        DelaySet::strided(self.delay_limit, self.delay_stride)
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec::hard(self.beta, self.vmem_weight)
    }

    fn learning_rate_at(&self, base: f64, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => base * d.factor.powi((epoch / d.every) as i32),
            None => base,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch.
    pub loss: f64,
    /// Training accuracy of the predictions made during the epoch.
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub log: Vec<EpochRecord>,
}

/// Fresh model with `{0}` on the input connection and the configured strided
/// delay set on every other connection. Weights are uniform in
/// `+-init_gain / sqrt(levels * fan_in)`.
pub fn init_model(
    widths: &[usize],
    neuron: NeuronParams,
    timesteps: usize,
    cfg: &TrainConfig,
) -> Result<NetworkModel> {
    cfg.validate()?;
    let hidden = cfg.delay_set()?;
    let sets: Vec<DelaySet> = (0..widths.len().saturating_sub(1))
        .map(|c| {
            if c == 0 {
                DelaySet::zero()
            } else {
                hidden.clone()
            }
        })
        .collect();
    let mut model = NetworkModel::zeros(widths, &sets, neuron, timesteps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for w in model.connections_mut() {
        let fan_in = (w.num_levels() * w.pre()) as f64;
        let bound = cfg.init_gain / fan_in.sqrt();
        w.update_live(|_, _| rng.gen_range(-bound..bound));
    }
    model.set_seed(cfg.seed);
    Ok(model)
}

fn labels(data: &[Raster]) -> Result<Vec<usize>> {
    data.iter()
        .enumerate()
        .map(|(n, r)| r.label().ok_or(Error::MissingLabel(n)))
        .collect()
}

/// Surrogate-gradient BPTT with Adam. Samples of a batch are processed in
/// parallel; their gradients are summed in sample order, so the result does
/// not depend on the thread count.
pub fn bptt_train(
    model: &NetworkModel,
    data: &[Raster],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_epochs(model, data, cfg, cfg.epochs, cfg.learning_rate, 0, None)
}

/// Continues training with only the surviving synapses, using the fine-tune
/// epoch count and learning rate.
pub fn finetune(model: &NetworkModel, data: &[Raster], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_epochs(
        model,
        data,
        cfg,
        cfg.finetune_epochs,
        cfg.finetune_learning_rate,
        1,
        None,
    )
}

/// Hardware-aware fine-tune: every forward and backward pass runs on the
/// weights quantized to `spec`, while Adam updates a full-precision shadow
/// copy (straight-through estimator). Returns the quantized shadow, so the
/// result is on the `spec` grid.
pub fn quant_finetune(
    model: &NetworkModel,
    data: &[Raster],
    cfg: &TrainConfig,
    spec: QuantSpec,
) -> Result<TrainOutcome> {
    spec.validate()?;
    let mut shadow = model.clone();
    shadow.set_quantization(QuantSpec::Float64, vec![1.0; model.connections().len()]);
    let out = train_epochs(
        &shadow,
        data,
        cfg,
        cfg.finetune_epochs,
        cfg.finetune_learning_rate,
        2,
        Some(spec),
    )?;
    Ok(TrainOutcome {
        model: quantize(&out.model, spec)?,
        log: out.log,
    })
}

fn train_epochs(
    model: &NetworkModel,
    data: &[Raster],
    cfg: &TrainConfig,
    epochs: usize,
    base_lr: f64,
    stream: u64,
    quant: Option<QuantSpec>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let labels = labels(data)?;
    let mut model = model.clone();
    let mut log = Vec::with_capacity(epochs);
    if epochs == 0 || data.is_empty() {
        return Ok(TrainOutcome { model, log });
    }
    let spec = cfg.loss_spec();
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch_index = 0;
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate_at(base_lr, epoch);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let forward = match quant {
                Some(q) => quantize(&model, q)?,
                None => model.clone(),
            };
            let results = batch
                .par_iter()
                .map(|&n| sample_step(&forward, &data[n], labels[n], &spec))
                .collect::<Result<Vec<_>>>()?;
            let mut grads: Vec<Vec<f64>> = model
                .connections()
                .iter()
                .map(|w| vec![0.0; w.len()])
                .collect();
            let mut batch_loss = 0.0;
            for ((loss, g, pred), &n) in results.iter().zip(batch) {
                batch_loss += loss;
                correct += usize::from(*pred == labels[n]);
                for (acc, gc) in grads.iter_mut().zip(g) {
                    for (a, x) in acc.iter_mut().zip(gc) {
                        *a += x;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { batch: batch_index });
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grads.iter_mut().flatten() {
                *g *= inv;
            }
            adam.step(&mut model, &grads, lr);
            loss_sum += batch_loss;
            batch_index += 1;
        }
        log.push(EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(TrainOutcome { model, log })
}

/// Fraction of samples whose dense-executor prediction equals the label.
pub fn evaluate(model: &NetworkModel, data: &[Raster]) -> Result<f64> {
    let labels = labels(data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let hits = data
        .par_iter()
        .zip(&labels)
        .map(|(r, &y)| forward_dense(model, r).map(|t| usize::from(t.prediction == y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

/// Models produced along the train, prune, fine-tune pipeline.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub trained: NetworkModel,
    pub pruned: NetworkModel,
    pub finetuned: NetworkModel,
    pub train_log: Vec<EpochRecord>,
    pub finetune_log: Vec<EpochRecord>,
}

/// Trains `model`, prunes its delays per `cfg.prune`, and fine-tunes the
/// survivors. With `cfg.refine` the surviving levels are widened to their
/// unit-stride neighbours, tuned, and pruned back to the same target before
/// the final fine-tune.
pub fn run_pipeline(
    model: &NetworkModel,
    data: &[Raster],
    cfg: &TrainConfig,
) -> Result<PipelineOutcome> {
    let trained = bptt_train(model, data, cfg)?;
    let mut pruned = prune_delays(&trained.model, &cfg.prune)?;
    if cfg.refine {
        let widened = refine_delays(&pruned, 1)?;
        let tuned = finetune(&widened, data, cfg)?;
        pruned = prune_delays(&tuned.model, &cfg.prune)?;
    }
    let tuned = finetune(&pruned, data, cfg)?;
    Ok(PipelineOutcome {
        trained: trained.model,
        pruned,
        finetuned: tuned.model,
        train_log: trained.log,
        finetune_log: tuned.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Vec<Raster> {
        (0..8)
            .map(|n| {
                let ch = n % 2;
                Raster::from_events(6, 2, [(n % 3, ch)])
                    .unwrap()
                    .with_label(ch)
            })
            .collect()
    }

    fn toy_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 3,
            learning_rate: 0.05,
            delay_limit: 3,
            delay_stride: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_weights_bit_identical() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..toy_cfg()
        };
        let m = init_model(&[2, 4, 2], NeuronParams::new(2.0, 0.3).unwrap(), 6, &cfg).unwrap();
        let out = bptt_train(&m, &toy_data(), &cfg).unwrap();
        assert_eq!(out.model, m);
        assert_eq!(out.log.len(), 3);
    }

    #[test]
    fn seeded_training_is_deterministic_and_respects_masks() {
        let cfg = toy_cfg();
        let mut m = init_model(&[2, 4, 2], NeuronParams::new(2.0, 0.3).unwrap(), 6, &cfg).unwrap();
        m.connection_mut(1).prune(1, 2, 0);
        let a = bptt_train(&m, &toy_data(), &cfg).unwrap();
        let b = bptt_train(&m, &toy_data(), &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_ne!(a.model, m);
        assert_eq!(a.model.connection(1).get(1, 2, 0), 0.0);
        assert!(!a.model.connection(1).is_live(1, 2, 0));
    }

    #[test]
    fn zero_epoch_finetune_is_identity() {
        let cfg = TrainConfig {
            finetune_epochs: 0,
            ..toy_cfg()
        };
        let m = init_model(&[2, 3, 2], NeuronParams::default(), 6, &cfg).unwrap();
        assert_eq!(finetune(&m, &toy_data(), &cfg).unwrap().model, m);
    }

    #[test]
    fn unlabelled_and_diverging_data_are_errors() {
        let cfg = toy_cfg();
        let m = init_model(&[2, 3, 2], NeuronParams::default(), 6, &cfg).unwrap();
        let mut data = toy_data();
        data[2].set_label(None);
        assert!(matches!(
            bptt_train(&m, &data, &cfg),
            Err(Error::MissingLabel(2))
        ));

        let mut bad = m.clone();
        bad.connection_mut(0).update_live(|_, _| 5.0);
        bad.connection_mut(1).update_live(|_, _| f64::NAN);
        assert!(matches!(
            bptt_train(&bad, &toy_data(), &cfg),
            Err(Error::Divergence { batch: 0 })
        ));
    }

    #[test]
    fn quantized_finetune_lands_on_the_grid() {
        let cfg = TrainConfig {
            finetune_epochs: 2,
            ..toy_cfg()
        };
        let m = init_model(&[2, 4, 2], NeuronParams::new(2.0, 0.3).unwrap(), 6, &cfg).unwrap();
        let spec = QuantSpec::Int(4);
        let out = quant_finetune(&m, &toy_data(), &cfg, spec).unwrap();
        assert_eq!(out.model.quant(), spec);
        let mut requantized = out.model.clone();
        requantized.set_quantization(QuantSpec::Float64, vec![1.0; 2]);
        assert_eq!(
            quantize(&requantized, spec).unwrap().connections(),
            out.model.connections()
        );

        let frozen = TrainConfig {
            finetune_learning_rate: 0.0,
            ..cfg
        };
        let out = quant_finetune(&m, &toy_data(), &frozen, spec).unwrap();
        assert_eq!(out.model, quantize(&m, spec).unwrap());
    }
}
