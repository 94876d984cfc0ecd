//! Alternating adversarial training: each iteration updates the
//! discriminator on (detached prediction, ground truth), then updates the
//! segmenter against the freshly frozen discriminator. Freezing is
//! structural on the tape, so cross-phase gradients cannot exist.
//!
//! Every random decision is drawn from a stream derived from
//! (seed, iteration), which makes a resumed run bit-identical to an
//! uninterrupted one.

mod ablation;
mod tune;

pub use ablation::{ablation, ablation_csv, ExperimentRow, ABLATION_MODELS};
pub use tune::{pso_tune, split_holdout, TuneConfig, TuneOutcome};

use crate::data::{random_scale_crop, DataItem, Dataset};
use crate::error::{Error, Result};
use crate::losses::{
    adv_graph, bce_graph, confidence_mask, discriminator_graph, mask_fraction, seg_total_loss,
    semi_bce_graph, virtual_labels, LossBreakdown, LossWeights,
};
use crate::metrics::{self, MetricReport};
use crate::models::{
    bind, Checkpoint, Discriminator, DiscriminatorConfig, ModelParams, Segmenter,
    SegmenterConfig,
};
use crate::rng;
use crate::tensor::{Real, Shape4, Tape, Tensor4};
use rand_chacha::ChaCha8Rng;

const TAG_SEG_INIT: u64 = u64::from_le_bytes(*b"seginit_");
const TAG_DISC_INIT: u64 = u64::from_le_bytes(*b"dscinit_");
const TAG_BATCH: u64 = u64::from_le_bytes(*b"batchsel");

pub const ADAM_EPS: f64 = 1e-8;

/// One training run, fully determined by its fields plus the dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub lr_seg: f64,
    pub lr_disc: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weights: LossWeights<f64>,
    /// The warm-up rule is stated for the self-training weight only; this
    /// switch extends it to the unlabeled adversarial weight as well.
    pub gate_semi_adv_in_warmup: bool,
    /// Used by harnesses that receive an unsplit dataset.
    pub label_fraction: f64,
    /// Augmented crop edge; 0 trains on full frames without augmentation.
    pub crop_size: usize,
    /// Evaluate on the held-out set every this many iterations; 0 means
    /// only once at the end.
    pub eval_every: u64,
    pub seed: u64,
    pub segmenter: SegmenterConfig,
    pub discriminator: DiscriminatorConfig,
}

impl TrainConfig {
    /// Desk-scale defaults: 2000 iterations, batch 2, lr 1e-4 / 1e-6,
    /// betas (0.5, 0.9), reference loss weights, warm-up = a quarter of
    /// the run.
    pub fn toy(seed: u64) -> Self {
        let iterations = 2000;
        TrainConfig {
            iterations,
            batch_size: 2,
            lr_seg: 1e-4,
            lr_disc: 1e-6,
            beta1: 0.5,
            beta2: 0.9,
            weights: LossWeights::reference(iterations / 4),
            gate_semi_adv_in_warmup: false,
            label_fraction: 0.1,
            crop_size: 32,
            eval_every: 0,
            seed,
            segmenter: SegmenterConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }

    /// A 600-iteration setup under which the unlabeled terms measurably help
    /// on `SyntheticConfig::diverse` data. Two deviations from the reference
    /// weights matter at this scale: the adversarial coefficient drops to
    /// 0.01 because a discriminator fed two labeled images destabilizes the
    /// segmenter at full strength, and the discriminator learning rate stays
    /// low for the same reason. Small models keep the wall-clock down.
    pub fn ablation_demo(seed: u64) -> Self {
        let mut c = TrainConfig::toy(seed);
        c.iterations = 600;
        c.lr_seg = 1e-3;
        c.lr_disc = 1e-5;
        c.weights = LossWeights::new(0.01, 0.004, 0.1, 0.1, 150)
            .expect("demo weights are in range");
        c.segmenter = SegmenterConfig {
            in_channels: 3,
            base_channels: 4,
            depth: 2,
        };
        c.discriminator = DiscriminatorConfig {
            in_channels: 1,
            base_channels: 4,
            layers: 3,
        };
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.weights.warmup_iters > self.iterations {
            return Err(Error::InvalidArgument(format!(
                "warmup {} exceeds iterations {}",
                self.weights.warmup_iters, self.iterations
            )));
        }
        for (name, v) in [("lr_seg", self.lr_seg), ("lr_disc", self.lr_disc)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be in [0,1), got {v}"
                )));
            }
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "label fraction must be in (0,1], got {}",
                self.label_fraction
            )));
        }
        self.segmenter.validate()?;
        self.discriminator.validate()?;
        if self.crop_size > 0 && self.crop_size % self.segmenter.divisor() != 0 {
            return Err(Error::InvalidArgument(format!(
                "crop size {} is not divisible by the segmenter divisor {}",
                self.crop_size,
                self.segmenter.divisor()
            )));
        }
        Ok(())
    }

    /// Key=value pairs stored in checkpoints so a resume can verify it is
    /// continuing the same experiment.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("iterations".into(), self.iterations.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr_seg".into(), self.lr_seg.to_string()),
            ("lr_disc".into(), self.lr_disc.to_string()),
            ("beta1".into(), self.beta1.to_string()),
            ("beta2".into(), self.beta2.to_string()),
            ("lambda_adv".into(), self.weights.lambda_adv.to_string()),
            (
                "lambda_semi_adv".into(),
                self.weights.lambda_semi_adv.to_string(),
            ),
            (
                "lambda_semi_bce".into(),
                self.weights.lambda_semi_bce.to_string(),
            ),
            ("t_semi_mask".into(), self.weights.t_semi_mask.to_string()),
            ("warmup_iters".into(), self.weights.warmup_iters.to_string()),
            (
                "gate_semi_adv_in_warmup".into(),
                self.gate_semi_adv_in_warmup.to_string(),
            ),
            ("label_fraction".into(), self.label_fraction.to_string()),
            ("crop_size".into(), self.crop_size.to_string()),
            ("eval_every".into(), self.eval_every.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("seg.in_channels".into(), self.segmenter.in_channels.to_string()),
            (
                "seg.base_channels".into(),
                self.segmenter.base_channels.to_string(),
            ),
            ("seg.depth".into(), self.segmenter.depth.to_string()),
            (
                "disc.in_channels".into(),
                self.discriminator.in_channels.to_string(),
            ),
            (
                "disc.base_channels".into(),
                self.discriminator.base_channels.to_string(),
            ),
            ("disc.layers".into(), self.discriminator.layers.to_string()),
        ]
    }
}

fn weights_as<T: Real>(w: &LossWeights<f64>) -> LossWeights<T> {
    LossWeights {
        lambda_adv: T::from_f64_lossy(w.lambda_adv),
        lambda_semi_adv: T::from_f64_lossy(w.lambda_semi_adv),
        lambda_semi_bce: T::from_f64_lossy(w.lambda_semi_bce),
        t_semi_mask: T::from_f64_lossy(w.t_semi_mask),
        warmup_iters: w.warmup_iters,
    }
}

/// Stacks single-item tensors along the batch axis.
fn stack_n<T: Real>(parts: &[Tensor4<T>]) -> Result<Tensor4<T>> {
    let first = parts[0].shape;
    let mut data = Vec::with_capacity(first.len() * parts.len());
    for p in parts {
        if p.shape != first {
            return Err(Error::ShapeMismatch {
                context: "batch stacking",
                left: first.to_string(),
                right: p.shape.to_string(),
            });
        }
        data.extend_from_slice(&p.data);
    }
    Tensor4::from_vec(
        Shape4::new(first.n * parts.len(), first.c, first.h, first.w),
        data,
    )
}

/// Samples a batch with replacement, optionally scale-crop augmented.
/// Draw order per slot: item index, then the crop's (scale, oy, ox).
fn sample_batch<T: Real>(
    pool: &[&DataItem<T>],
    batch_size: usize,
    crop_size: usize,
    r: &mut ChaCha8Rng,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    use rand::Rng;
    let mut images = Vec::with_capacity(batch_size);
    let mut masks = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let item = pool[r.random_range(0..pool.len())];
        if crop_size == 0 {
            images.push(item.image.clone());
            masks.push(item.mask.clone());
        } else {
            let (img, mask) = random_scale_crop(&item.image, &item.mask, crop_size, r)?;
            images.push(img);
            masks.push(mask);
        }
    }
    Ok((stack_n(&images)?, stack_n(&masks)?))
}

/// Batches for one iteration. Unlabeled masks never enter the step; they
/// are dropped right here.
pub struct StepInputs<'a, T: Real> {
    pub labeled_images: &'a Tensor4<T>,
    pub labeled_masks: &'a Tensor4<T>,
    pub unlabeled_images: Option<&'a Tensor4<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T: Real> {
    pub breakdown: LossBreakdown<T>,
    pub d_loss: T,
}

/// One alternating iteration: discriminator phase, then segmenter phase.
///
/// The discriminator trains on labeled predictions (through a frozen
/// segmenter, hence detached) against ground truth. The segmenter then
/// minimizes the composite objective through the frozen, just-updated
/// discriminator. Terms with zero weight are omitted from the graph; the
/// omission is exact because the weighted total is a plain left-to-right
/// sum and zero contributions do not perturb it.
pub fn train_step<T: Real>(
    seg: &mut Segmenter<T>,
    disc: &mut Discriminator<T>,
    inputs: &StepInputs<'_, T>,
    config: &TrainConfig,
    iteration: u64,
) -> Result<StepOutcome<T>> {
    let w = weights_as::<T>(&config.weights);
    let warm = iteration < config.weights.warmup_iters;
    let adv_on = config.weights.lambda_adv > 0.0;
    let semi_adv_on = config.weights.lambda_semi_adv > 0.0
        && inputs.unlabeled_images.is_some()
        && !(config.gate_semi_adv_in_warmup && warm);
    let semi_bce_on =
        config.weights.lambda_semi_bce > 0.0 && inputs.unlabeled_images.is_some() && !warm;
    let disc_in_play = adv_on || semi_adv_on || semi_bce_on;

    let lr_d = T::from_f64_lossy(config.lr_disc);
    let lr_s = T::from_f64_lossy(config.lr_seg);
    let b1 = T::from_f64_lossy(config.beta1);
    let b2 = T::from_f64_lossy(config.beta2);
    let eps = T::from_f64_lossy(ADAM_EPS);

    // Phase 1: discriminator step. Skipped entirely when no objective term
    // consults the discriminator, which makes the all-zero-weights
    // configuration literally a plain supervised run.
    let mut d_loss = T::zero();
    if disc_in_play {
        let mut tape = Tape::new();
        let x_l = tape.constant(inputs.labeled_images.clone());
        let y_l = tape.constant(inputs.labeled_masks.clone());
        let seg_bound = bind(&seg.params, &mut tape, false);
        let s_l = seg.graph(&mut tape, &seg_bound, x_l)?;
        let disc_bound = bind(&disc.params, &mut tape, true);
        let d_fake = disc.graph(&mut tape, &disc_bound, s_l)?;
        let d_real = disc.graph(&mut tape, &disc_bound, y_l)?;
        let dl = discriminator_graph(&mut tape, d_fake, d_real)?;
        d_loss = tape.value(dl).scalar_value()?;
        if !d_loss.is_finite() {
            return Err(Error::Divergence {
                iteration,
                term: "d_loss",
            });
        }
        let mut grads = tape.backward(dl)?;
        let gs = disc_bound.take_gradients(&disc.params, &mut grads);
        disc.params.apply_adam(&gs, lr_d, b1, b2, eps)?;
    }

    // Phase 2: segmenter step against the frozen discriminator.
    let mut tape = Tape::new();
    let x_l = tape.constant(inputs.labeled_images.clone());
    let seg_bound = bind(&seg.params, &mut tape, true);
    let disc_bound = bind(&disc.params, &mut tape, false);

    let s_l = seg.graph(&mut tape, &seg_bound, x_l)?;
    let bce_id = bce_graph(&mut tape, s_l, inputs.labeled_masks)?;
    let mut total = bce_id;

    let mut adv_v = T::zero();
    if adv_on {
        let d_l = disc.graph(&mut tape, &disc_bound, s_l)?;
        let a = adv_graph(&mut tape, d_l)?;
        adv_v = tape.value(a).scalar_value()?;
        let weighted = tape.scalar_mul(a, w.lambda_adv);
        total = tape.add(total, weighted)?;
    }

    let mut semi_adv_v = T::zero();
    let mut semi_bce_v = T::zero();
    let mut fraction = T::zero();
    if semi_adv_on || semi_bce_on {
        let x_u = tape.constant(
            inputs
                .unlabeled_images
                .expect("guarded by semi_*_on")
                .clone(),
        );
        let s_u = seg.graph(&mut tape, &seg_bound, x_u)?;
        let d_u = disc.graph(&mut tape, &disc_bound, s_u)?;
        if semi_adv_on {
            let a = adv_graph(&mut tape, d_u)?;
            semi_adv_v = tape.value(a).scalar_value()?;
            let weighted = tape.scalar_mul(a, w.lambda_semi_adv);
            total = tape.add(total, weighted)?;
        }
        if semi_bce_on {
            let yhat = virtual_labels(tape.value(s_u));
            let mask = confidence_mask(tape.value(d_u), w.t_semi_mask)?;
            fraction = mask_fraction(&mask);
            let sb = semi_bce_graph(&mut tape, s_u, &yhat, &mask)?;
            semi_bce_v = tape.value(sb).scalar_value()?;
            let weighted = tape.scalar_mul(sb, w.lambda_semi_bce);
            total = tape.add(total, weighted)?;
        }
    }

    let bce_v = tape.value(bce_id).scalar_value()?;
    let breakdown = seg_total_loss(
        bce_v, adv_v, semi_adv_v, semi_bce_v, fraction, &w, iteration,
    );
    for (term, v) in [
        ("bce", bce_v),
        ("adv", adv_v),
        ("semi_adv", semi_adv_v),
        ("semi_bce", semi_bce_v),
    ] {
        if !v.is_finite() {
            return Err(Error::Divergence { iteration, term });
        }
    }

    let mut grads = tape.backward(total)?;
    let gs = seg_bound.take_gradients(&seg.params, &mut grads);
    debug_assert!(
        disc_bound
            .take_gradients(&disc.params, &mut grads)
            .iter()
            .all(|g| g.data.iter().all(|&v| v == T::zero())),
        "discriminator leaked gradient out of the segmenter phase"
    );
    seg.params.apply_adam(&gs, lr_s, b1, b2, eps)?;

    Ok(StepOutcome { breakdown, d_loss })
}

/// Model pair plus the next iteration to run; the unit of resumption.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T: Real> {
    pub segmenter: Segmenter<T>,
    pub discriminator: Discriminator<T>,
    pub next_iteration: u64,
}

pub const CKPT_GROUP_SEG: &str = "segmenter";
pub const CKPT_GROUP_DISC: &str = "discriminator";

/// Packages the state for the checkpoint writer, echoing the config so a
/// resume can prove it continues the same experiment.
pub fn state_checkpoint<T: Real>(config: &TrainConfig, state: &TrainState<T>) -> Checkpoint<T> {
    Checkpoint {
        config_echo: config.echo(),
        iteration: state.next_iteration,
        groups: vec![
            (CKPT_GROUP_SEG.into(), state.segmenter.params.clone()),
            (CKPT_GROUP_DISC.into(), state.discriminator.params.clone()),
        ],
    }
}

fn take_group<T: Real>(ckpt: &mut Checkpoint<T>, name: &str) -> Result<ModelParams<T>> {
    ckpt.groups
        .iter()
        .position(|(n, _)| n == name)
        .map(|i| ckpt.groups.remove(i).1)
        .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no {name} group")))
}

fn echo_value<T: Real>(ckpt: &Checkpoint<T>, key: &str) -> Result<String> {
    ckpt.config_echo
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::InvalidArgument(format!("checkpoint echo is missing {key}")))
}

/// Keys a resume may legitimately change: the loop bound (extending a run
/// is what resume is for) and the evaluation cadence (read-only reporting).
/// Everything else shapes the trajectory, so a mismatch means the state was
/// produced by different dynamics and continuing would be silently wrong.
const RESUME_EXEMPT_KEYS: [&str; 2] = ["iterations", "eval_every"];

/// Unpacks a checkpoint into a resumable state after verifying it was
/// written by a configuration with identical training dynamics.
pub fn state_from_checkpoint<T: Real>(
    config: &TrainConfig,
    mut ckpt: Checkpoint<T>,
) -> Result<TrainState<T>> {
    let strict = |echo: &[(String, String)]| -> Vec<(String, String)> {
        echo.iter()
            .filter(|(k, _)| !RESUME_EXEMPT_KEYS.contains(&k.as_str()))
            .cloned()
            .collect()
    };
    let expected = strict(&config.echo());
    let found = strict(&ckpt.config_echo);
    if found != expected {
        let diff = expected
            .iter()
            .find(|(k, v)| {
                found
                    .iter()
                    .find(|(ck, _)| ck == k)
                    .map(|(_, cv)| cv != v)
                    .unwrap_or(true)
            })
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| "extra keys".into());
        return Err(Error::InvalidArgument(format!(
            "checkpoint was written by a different configuration (first difference: {diff})"
        )));
    }
    let segmenter = Segmenter {
        config: config.segmenter,
        params: take_group(&mut ckpt, CKPT_GROUP_SEG)?,
    };
    let discriminator = Discriminator {
        config: config.discriminator,
        params: take_group(&mut ckpt, CKPT_GROUP_DISC)?,
    };
    Ok(TrainState {
        segmenter,
        discriminator,
        next_iteration: ckpt.iteration,
    })
}

/// Rebuilds just the segmenter from a checkpoint, taking its architecture
/// from the config echo. This is what scoring a saved model needs.
pub fn segmenter_from_checkpoint<T: Real>(mut ckpt: Checkpoint<T>) -> Result<Segmenter<T>> {
    let parse = |key: &str| -> Result<usize> {
        echo_value(&ckpt, key)?
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad {key} in checkpoint echo: {e}")))
    };
    let config = SegmenterConfig {
        in_channels: parse("seg.in_channels")?,
        base_channels: parse("seg.base_channels")?,
        depth: parse("seg.depth")?,
    };
    config.validate()?;
    Ok(Segmenter {
        config,
        params: take_group(&mut ckpt, CKPT_GROUP_SEG)?,
    })
}

pub fn initial_state<T: Real>(config: &TrainConfig) -> Result<TrainState<T>> {
    config.validate()?;
    Ok(TrainState {
        segmenter: Segmenter::init(
            config.segmenter,
            rng::derive(config.seed, &[TAG_SEG_INIT]),
        )?,
        discriminator: Discriminator::init(
            config.discriminator,
            rng::derive(config.seed, &[TAG_DISC_INIT]),
        )?,
        next_iteration: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow<T: Real> {
    pub iteration: u64,
    pub bce: T,
    pub adv: T,
    pub semi_adv: T,
    pub semi_bce: T,
    pub total: T,
    pub d_loss: T,
}

pub fn history_csv<T: Real>(rows: &[HistoryRow<T>]) -> String {
    let mut out = String::from("iteration,bce,adv,semi_adv,semi_bce,total,d_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration, r.bce, r.adv, r.semi_adv, r.semi_bce, r.total, r.d_loss
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T: Real> {
    pub state: TrainState<T>,
    pub history: Vec<HistoryRow<T>>,
    pub evals: Vec<(u64, MetricReport)>,
}

/// Pooled-pixel metrics of the segmenter over every item in `data`.
pub fn evaluate<T: Real>(seg: &Segmenter<T>, data: &Dataset<T>) -> Result<MetricReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set is empty"));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for item in &data.items {
        let pred = seg.predict(&item.image)?;
        metrics::pool_pixels(&pred, &item.mask, &mut scores, &mut labels)?;
    }
    metrics::evaluate_pool(&scores, &labels)
}

/// Fresh run: initialize from the config seed and train to the end.
pub fn train<T: Real>(
    config: &TrainConfig,
    data: &Dataset<T>,
    eval_data: Option<&Dataset<T>>,
) -> Result<TrainOutcome<T>> {
    let state = initial_state(config)?;
    train_from(config, data, eval_data, state)
}

/// Continues from `state`. Because each iteration draws from its own
/// (seed, iteration) stream, continuing from a checkpoint replays exactly
/// the iterations an uninterrupted run would have performed.
pub fn train_from<T: Real>(
    config: &TrainConfig,
    data: &Dataset<T>,
    eval_data: Option<&Dataset<T>>,
    mut state: TrainState<T>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    data.validate()?;
    if state.next_iteration > config.iterations {
        return Err(Error::InvalidArgument(format!(
            "resume iteration {} is beyond the configured {} iterations",
            state.next_iteration, config.iterations
        )));
    }
    let labeled: Vec<&DataItem<T>> = data.labeled_items().collect();
    if labeled.is_empty() {
        return Err(Error::EmptyDataset("no labeled items to train on"));
    }
    let unlabeled: Vec<&DataItem<T>> = data.unlabeled_items().collect();

    let mut history = Vec::new();
    let mut evals = Vec::new();
    for it in state.next_iteration..config.iterations {
        let mut r = rng::stream(config.seed, &[TAG_BATCH, it]);
        let (lx, ly) = sample_batch(&labeled, config.batch_size, config.crop_size, &mut r)?;
        let ux = if unlabeled.is_empty() {
            None
        } else {
            Some(sample_batch(&unlabeled, config.batch_size, config.crop_size, &mut r)?.0)
        };
        let out = train_step(
            &mut state.segmenter,
            &mut state.discriminator,
            &StepInputs {
                labeled_images: &lx,
                labeled_masks: &ly,
                unlabeled_images: ux.as_ref(),
            },
            config,
            it,
        )?;
        history.push(HistoryRow {
            iteration: it,
            bce: out.breakdown.bce,
            adv: out.breakdown.adv,
            semi_adv: out.breakdown.semi_adv,
            semi_bce: out.breakdown.semi_bce,
            total: out.breakdown.total,
            d_loss: out.d_loss,
        });
        state.next_iteration = it + 1;
        if let Some(ed) = eval_data {
            if config.eval_every > 0 && state.next_iteration % config.eval_every == 0 {
                evals.push((state.next_iteration, evaluate(&state.segmenter, ed)?));
            }
        }
    }
    if let Some(ed) = eval_data {
        if evals.last().map(|(i, _)| *i) != Some(config.iterations) {
            evals.push((config.iterations, evaluate(&state.segmenter, ed)?));
        }
    }
    Ok(TrainOutcome {
        state,
        history,
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split_labeled, SyntheticConfig};

    fn tiny_config(seed: u64) -> TrainConfig {
        let mut c = TrainConfig::toy(seed);
        c.iterations = 8;
        c.weights.warmup_iters = 2;
        c.crop_size = 16;
        c.segmenter = SegmenterConfig {
            base_channels: 2,
            depth: 2,
            ..SegmenterConfig::default()
        };
        c.discriminator = DiscriminatorConfig {
            base_channels: 2,
            layers: 3,
            ..DiscriminatorConfig::default()
        };
        c
    }

    fn tiny_data<T: Real>(seed: u64) -> Dataset<T> {
        let data = generate_synthetic(&SyntheticConfig {
            image_count: 6,
            image_size: 16,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        split_labeled(data, 0.5, seed).unwrap()
    }

    #[test]
    fn step_is_bit_reproducible() {
        let c = tiny_config(3);
        let run = |_: ()| {
            let mut st = initial_state::<f32>(&c).unwrap();
            let data = tiny_data(5);
            let labeled: Vec<_> = data.labeled_items().collect();
            let unlabeled: Vec<_> = data.unlabeled_items().collect();
            let mut r = rng::stream(c.seed, &[TAG_BATCH, 0]);
            let (lx, ly) = sample_batch(&labeled, 2, 16, &mut r).unwrap();
            let (ux, _) = sample_batch(&unlabeled, 2, 16, &mut r).unwrap();
            let out = train_step(
                &mut st.segmenter,
                &mut st.discriminator,
                &StepInputs {
                    labeled_images: &lx,
                    labeled_masks: &ly,
                    unlabeled_images: Some(&ux),
                },
                &c,
                2,
            )
            .unwrap();
            (out, st)
        };
        let (a_out, a_st) = run(());
        let (b_out, b_st) = run(());
        assert_eq!(a_out, b_out);
        assert_eq!(a_st, b_st);
    }

    #[test]
    fn zero_weights_reduce_to_pure_supervised_gradient() {
        // With every adversarial weight at zero the step must equal a
        // BCE-only update: same parameters afterwards, discriminator
        // untouched and unconsulted.
        let mut c = tiny_config(7);
        c.weights.lambda_adv = 0.0;
        c.weights.lambda_semi_adv = 0.0;
        c.weights.lambda_semi_bce = 0.0;
        let data = tiny_data(9);
        let labeled: Vec<_> = data.labeled_items().collect();
        let mut r = rng::stream(c.seed, &[TAG_BATCH, 0]);
        let (lx, ly) = sample_batch(&labeled, 2, 16, &mut r).unwrap();

        let mut st = initial_state::<f64>(&c).unwrap();
        let disc_before = st.discriminator.clone();
        let out = train_step(
            &mut st.segmenter,
            &mut st.discriminator,
            &StepInputs {
                labeled_images: &lx,
                labeled_masks: &ly,
                unlabeled_images: None,
            },
            &c,
            5,
        )
        .unwrap();
        assert_eq!(st.discriminator, disc_before);
        assert_eq!(out.d_loss, 0.0);
        assert_eq!(out.breakdown.total, out.breakdown.bce);

        // Reference: a hand-built BCE-only update of the same segmenter.
        let mut reference = initial_state::<f64>(&c).unwrap().segmenter;
        let mut tape = Tape::new();
        let x = tape.constant(lx.clone());
        let bound = bind(&reference.params, &mut tape, true);
        let s = reference.graph(&mut tape, &bound, x).unwrap();
        let loss = bce_graph(&mut tape, s, &ly).unwrap();
        let mut grads = tape.backward(loss).unwrap();
        let gs = bound.take_gradients(&reference.params, &mut grads);
        reference
            .params
            .apply_adam(
                &gs,
                c.lr_seg,
                c.beta1,
                c.beta2,
                ADAM_EPS,
            )
            .unwrap();
        assert_eq!(st.segmenter.params, reference.params);
    }

    #[test]
    fn warmup_gates_semi_bce_value_and_gradient() {
        let mut c = tiny_config(11);
        c.weights.warmup_iters = 4;
        let data = tiny_data(13);
        let labeled: Vec<_> = data.labeled_items().collect();
        let unlabeled: Vec<_> = data.unlabeled_items().collect();
        let mut r = rng::stream(c.seed, &[TAG_BATCH, 0]);
        let (lx, ly) = sample_batch(&labeled, 2, 16, &mut r).unwrap();
        let (ux, _) = sample_batch(&unlabeled, 2, 16, &mut r).unwrap();
        let inputs = StepInputs {
            labeled_images: &lx,
            labeled_masks: &ly,
            unlabeled_images: Some(&ux),
        };

        // Inside warm-up the semi_bce column is zero. A twin run whose
        // lambda_semi_bce is zeroed outright must take the identical step:
        // that is the gradient half of the gate.
        let mut st = initial_state::<f64>(&c).unwrap();
        let out = train_step(&mut st.segmenter, &mut st.discriminator, &inputs, &c, 3).unwrap();
        assert_eq!(out.breakdown.semi_bce, 0.0);

        let mut c2 = c;
        c2.weights.lambda_semi_bce = 0.0;
        let mut st2 = initial_state::<f64>(&c2).unwrap();
        let out2 =
            train_step(&mut st2.segmenter, &mut st2.discriminator, &inputs, &c2, 3).unwrap();
        assert_eq!(st.segmenter.params, st2.segmenter.params);
        assert_eq!(out.breakdown.total, out2.breakdown.total);

        // From the boundary on, the term engages.
        let out3 = train_step(&mut st.segmenter, &mut st.discriminator, &inputs, &c, 4).unwrap();
        assert!(out3.breakdown.semi_bce > 0.0);
    }

    #[test]
    fn missing_unlabeled_pool_is_not_an_error() {
        let c = tiny_config(17);
        let data = tiny_data(19);
        let labeled: Vec<_> = data.labeled_items().collect();
        let mut r = rng::stream(c.seed, &[TAG_BATCH, 0]);
        let (lx, ly) = sample_batch(&labeled, 2, 16, &mut r).unwrap();
        let mut st = initial_state::<f32>(&c).unwrap();
        let out = train_step(
            &mut st.segmenter,
            &mut st.discriminator,
            &StepInputs {
                labeled_images: &lx,
                labeled_masks: &ly,
                unlabeled_images: None,
            },
            &c,
            6,
        )
        .unwrap();
        assert_eq!(out.breakdown.semi_adv, 0.0);
        assert_eq!(out.breakdown.semi_bce, 0.0);
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let mut c = tiny_config(23);
        c.iterations = 0;
        c.weights.warmup_iters = 0;
        let data = tiny_data(23);
        let out = train::<f32>(&c, &data, None).unwrap();
        let init = initial_state::<f32>(&c).unwrap();
        assert_eq!(out.state.segmenter.params, init.segmenter.params);
        assert_eq!(out.state.discriminator.params, init.discriminator.params);
        assert!(out.history.is_empty());
    }

    #[test]
    fn resume_matches_uninterrupted_run_bit_exactly() {
        let c = tiny_config(29);
        let data = tiny_data(31);

        let full = train::<f32>(&c, &data, None).unwrap();

        let mut half_cfg = c;
        half_cfg.iterations = 4;
        let half = train::<f32>(&half_cfg, &data, None).unwrap();
        let resumed = train_from::<f32>(&c, &data, None, half.state).unwrap();

        assert_eq!(full.state.segmenter.params, resumed.state.segmenter.params);
        assert_eq!(
            full.state.discriminator.params,
            resumed.state.discriminator.params
        );
        // History of the resumed run covers exactly the second half.
        assert_eq!(resumed.history.first().unwrap().iteration, 4);
        assert_eq!(full.history[4..], resumed.history[..]);
    }

    #[test]
    fn checkpoint_resume_allows_extension_but_guards_dynamics() {
        let c = tiny_config(30);
        let data = tiny_data(30);
        let out = train::<f32>(&c, &data, None).unwrap();
        let ckpt = state_checkpoint(&c, &out.state);

        // Extending the run and changing the eval cadence are legitimate.
        let mut longer = c;
        longer.iterations = c.iterations * 2;
        longer.eval_every = 3;
        let st = state_from_checkpoint(&longer, ckpt.clone()).unwrap();
        assert_eq!(st.next_iteration, c.iterations);

        // Anything that shapes the trajectory is not.
        let mut other_lr = longer;
        other_lr.lr_seg *= 2.0;
        let err = state_from_checkpoint(&other_lr, ckpt).unwrap_err().to_string();
        assert!(err.contains("first difference: lr_seg"), "got: {err}");
    }

    #[test]
    fn toy_training_reduces_bce() {
        let mut c = tiny_config(37);
        c.iterations = 60;
        c.weights.warmup_iters = 15;
        c.lr_seg = 1e-3;
        let data = tiny_data(41);
        let out = train::<f32>(&c, &data, None).unwrap();
        let first: f32 = out.history[..5].iter().map(|r| r.bce).sum::<f32>() / 5.0;
        let last: f32 = out.history[55..].iter().map(|r| r.bce).sum::<f32>() / 5.0;
        assert!(
            last < first,
            "bce did not decrease: first {first}, last {last}"
        );
    }

    #[test]
    fn evaluation_hooks_and_perfect_predictor() {
        let data = tiny_data(43);
        // A segmenter is not needed to check the metric plumbing: feed the
        // masks as predictions through the pool directly.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for item in &data.items {
            crate::metrics::pool_pixels(&item.mask, &item.mask, &mut scores, &mut labels)
                .unwrap();
        }
        let report = crate::metrics::evaluate_pool(&scores, &labels).unwrap();
        assert_eq!(report.score, 1.0);

        // Periodic evaluation emits rows at the configured cadence plus the
        // final iteration.
        let mut c = tiny_config(43);
        c.eval_every = 4;
        let out = train::<f32>(&c, &data, Some(&data)).unwrap();
        assert_eq!(
            out.evals.iter().map(|(i, _)| *i).collect::<Vec<_>>(),
            vec![4, 8]
        );
    }

    #[test]
    fn history_csv_shape() {
        let rows = vec![HistoryRow {
            iteration: 0,
            bce: 0.5f64,
            adv: 0.25,
            semi_adv: 0.0,
            semi_bce: 0.0,
            total: 0.525,
            d_loss: 1.5,
        }];
        let csv = history_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,bce,adv,semi_adv,semi_bce,total,d_loss"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,0,0,0.525,1.5");
    }

    #[test]
    fn config_validation_rejects_degenerates() {
        let mut c = tiny_config(1);
        c.batch_size = 0;
        assert!(c.validate().is_err());

        let mut c = tiny_config(1);
        c.weights.warmup_iters = c.iterations + 1;
        assert!(c.validate().is_err());

        let mut c = tiny_config(1);
        c.lr_seg = 0.0;
        assert!(c.validate().is_err());

        let mut c = tiny_config(1);
        c.crop_size = 13;
        assert!(c.validate().is_err());
    }
}
