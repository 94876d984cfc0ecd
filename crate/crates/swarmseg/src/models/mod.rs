//! The two networks: a compact encoder-decoder segmenter with skip
//! connections, and a fully convolutional discriminator that scores each
//! pixel's ground-truth-likeness.
//!
//! Parameters live outside any graph in [`ModelParams`] and are bound onto a
//! tape per step, either trainable (leaves) or frozen (constants). Freezing
//! is structural: a frozen network contributes no gradient slots at all,
//! which is what keeps the alternating updates honest.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{AdamState, Gradients, Real, Shape4, Tape, Tensor4, TensorId};
use rand::Rng;
use std::collections::BTreeMap;

const TAG_PARAM: u64 = u64::from_le_bytes(*b"paramini");
const LEAKY_SLOPE: f64 = 0.2;

/// Encoder-decoder geometry. Kernels are 3x3 (1x1 head); activations are
/// leaky ReLU 0.2 inside and a sigmoid on the output map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmenterConfig {
    pub in_channels: usize,
    pub base_channels: usize,
    pub depth: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            in_channels: 3,
            base_channels: 8,
            depth: 3,
        }
    }
}

impl SegmenterConfig {
    /// Spatial divisor the input must satisfy: one halving per level.
    pub fn divisor(&self) -> usize {
        1 << self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_channels == 0 || self.depth == 0 {
            return Err(Error::InvalidArgument(format!(
                "segmenter config must be positive, got in={}, base={}, depth={}",
                self.in_channels, self.base_channels, self.depth
            )));
        }
        Ok(())
    }
}

/// Stack of stride-2 4x4 convolutions ending in a single-channel logit map,
/// bilinearly upsampled back to the input size and squashed to (0,1).
/// Channel schedule: base, 2*base, ..., then 1 on the final layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub base_channels: usize,
    pub layers: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            in_channels: 1,
            base_channels: 8,
            layers: 5,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 3 {
            return Err(Error::InvalidArgument(format!(
                "discriminator needs at least 3 layers, got {}",
                self.layers
            )));
        }
        if self.in_channels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidArgument(
                "discriminator channels must be positive".into(),
            ));
        }
        Ok(())
    }

    fn channel_schedule(&self) -> Vec<usize> {
        let mut chans = Vec::with_capacity(self.layers);
        for i in 0..self.layers - 1 {
            chans.push(self.base_channels << i);
        }
        chans.push(1);
        chans
    }
}

/// One named parameter tensor with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T: Real> {
    pub name: String,
    pub tensor: Tensor4<T>,
    pub adam: AdamState<T>,
}

/// Ordered, uniquely named parameter list. Declaration order is fixed by the
/// config, which is what makes checkpoints and gradient plumbing positional.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelParams<T: Real> {
    pub entries: Vec<ParamEntry<T>>,
}

impl<T: Real> ModelParams<T> {
    pub fn total_parameters(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor4<T>> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor4<T>> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.tensor)
    }

    /// One Adam step over every entry. `grads` is parallel to `entries`.
    pub fn apply_adam(
        &mut self,
        grads: &[Tensor4<T>],
        lr: T,
        beta1: T,
        beta2: T,
        eps: T,
    ) -> Result<()> {
        if grads.len() != self.entries.len() {
            return Err(Error::InvalidArgument(format!(
                "gradient count {} does not match parameter count {}",
                grads.len(),
                self.entries.len()
            )));
        }
        for (entry, grad) in self.entries.iter_mut().zip(grads) {
            crate::tensor::adam_step(
                &mut entry.tensor,
                grad,
                &mut entry.adam,
                lr,
                beta1,
                beta2,
                eps,
            )?;
        }
        Ok(())
    }
}

/// Tape ids of one bound parameter set, by declaration order and by name.
pub struct Bound {
    ids: Vec<TensorId>,
    by_name: BTreeMap<String, TensorId>,
}

impl Bound {
    pub fn id(&self, name: &str) -> TensorId {
        *self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Gradients in declaration order, zero-filled where the sweep produced
    /// none (a frozen or unreached parameter).
    pub fn take_gradients<T: Real>(
        &self,
        params: &ModelParams<T>,
        grads: &mut Gradients<T>,
    ) -> Vec<Tensor4<T>> {
        self.ids
            .iter()
            .zip(&params.entries)
            .map(|(&id, e)| {
                grads
                    .take(id)
                    .unwrap_or_else(|| Tensor4::zeros(e.tensor.shape))
            })
            .collect()
    }
}

/// Puts every parameter on the tape, as leaves when `trainable` (gradients
/// collected) or constants when frozen (structurally no gradients).
pub fn bind<T: Real>(params: &ModelParams<T>, tape: &mut Tape<T>, trainable: bool) -> Bound {
    let mut ids = Vec::with_capacity(params.entries.len());
    let mut by_name = BTreeMap::new();
    for e in &params.entries {
        let id = if trainable {
            tape.leaf(e.tensor.clone())
        } else {
            tape.constant(e.tensor.clone())
        };
        ids.push(id);
        by_name.insert(e.name.clone(), id);
    }
    Bound { ids, by_name }
}

/// Binds a parameter set to ids the caller already placed on a tape, one per
/// entry in declaration order. This is the hook the finite-difference harness
/// uses to treat whole models as functions of their parameter tensors.
pub fn bind_ids<T: Real>(params: &ModelParams<T>, ids: &[TensorId]) -> Result<Bound> {
    if ids.len() != params.entries.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ids bound to {} parameters",
            ids.len(),
            params.entries.len()
        )));
    }
    let by_name = params
        .entries
        .iter()
        .zip(ids)
        .map(|(e, &id)| (e.name.clone(), id))
        .collect();
    Ok(Bound {
        ids: ids.to_vec(),
        by_name,
    })
}

/// Fan-in scaled uniform init with the leaky-ReLU(0.2) gain; biases zero.
struct ParamBuilder<T: Real> {
    seed: u64,
    entries: Vec<ParamEntry<T>>,
}

impl<T: Real> ParamBuilder<T> {
    fn new(seed: u64) -> Self {
        ParamBuilder {
            seed,
            entries: Vec::new(),
        }
    }

    fn weight(&mut self, name: String, shape: Shape4, fan_in: usize) {
        let gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
        let bound = gain * (3.0 / fan_in as f64).sqrt();
        let mut r = rng::stream(self.seed, &[TAG_PARAM, self.entries.len() as u64]);
        let data = (0..shape.len())
            .map(|_| T::from_f64_lossy(bound * (2.0 * r.random::<f64>() - 1.0)))
            .collect();
        self.push(name, Tensor4 { shape, data });
    }

    fn bias(&mut self, name: String, channels: usize) {
        self.push(name, Tensor4::zeros(Shape4::new(1, channels, 1, 1)));
    }

    fn push(&mut self, name: String, tensor: Tensor4<T>) {
        debug_assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter {name}"
        );
        let adam = AdamState::new(tensor.shape);
        self.entries.push(ParamEntry { name, tensor, adam });
    }

    /// Convolution kernel [c_out, c_in, k, k] plus bias.
    fn conv(&mut self, prefix: &str, c_out: usize, c_in: usize, k: usize) {
        self.weight(
            format!("{prefix}.weight"),
            Shape4::new(c_out, c_in, k, k),
            c_in * k * k,
        );
        self.bias(format!("{prefix}.bias"), c_out);
    }

    /// Transposed-convolution kernel [c_in, c_out, k, k] plus bias.
    fn tconv(&mut self, prefix: &str, c_in: usize, c_out: usize, k: usize) {
        self.weight(
            format!("{prefix}.weight"),
            Shape4::new(c_in, c_out, k, k),
            c_in * k * k,
        );
        self.bias(format!("{prefix}.bias"), c_out);
    }

    fn finish(self) -> ModelParams<T> {
        ModelParams {
            entries: self.entries,
        }
    }
}

/// Segmenter: parameters plus the geometry that shapes its graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmenter<T: Real> {
    pub config: SegmenterConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Segmenter<T> {
    pub fn init(config: SegmenterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let base = config.base_channels;
        let mut b = ParamBuilder::new(seed);
        b.conv("enc0.conv1", base, config.in_channels, 3);
        b.conv("enc0.conv2", base, base, 3);
        for i in 1..=config.depth {
            b.conv(&format!("down{i}.conv1"), base << i, base << (i - 1), 3);
            b.conv(&format!("down{i}.conv2"), base << i, base << i, 3);
        }
        for i in (1..=config.depth).rev() {
            b.tconv(&format!("up{i}.tconv"), base << i, base << (i - 1), 2);
            b.conv(&format!("up{i}.conv1"), base << (i - 1), base << i, 3);
            b.conv(&format!("up{i}.conv2"), base << (i - 1), base << (i - 1), 3);
        }
        b.conv("head.conv", 1, base, 1);
        Ok(Segmenter {
            config,
            params: b.finish(),
        })
    }

    /// Builds the forward graph on `tape` from already bound parameters.
    /// Multiple calls against one binding share the underlying leaves, so
    /// gradients from several inputs accumulate onto the same parameters.
    pub fn graph(&self, tape: &mut Tape<T>, bound: &Bound, image: TensorId) -> Result<TensorId> {
        segmenter_graph(&self.config, tape, bound, image, true)
    }

    /// Inference on a plain tensor: constants only, no gradient bookkeeping.
    pub fn predict(&self, image: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(image.clone());
        let bound = bind(&self.params, &mut tape, false);
        let y = self.graph(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }
}

fn conv_leaky<T: Real>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    x: TensorId,
    stride: usize,
    padding: usize,
) -> Result<TensorId> {
    let w = bound.id(&format!("{prefix}.weight"));
    let b = bound.id(&format!("{prefix}.bias"));
    let y = tape.conv2d(x, w, Some(b), stride, padding)?;
    tape.leaky_relu(y, T::from_f64_lossy(LEAKY_SLOPE))
}

fn segmenter_graph<T: Real>(
    config: &SegmenterConfig,
    tape: &mut Tape<T>,
    bound: &Bound,
    image: TensorId,
    use_skips: bool,
) -> Result<TensorId> {
    config.validate()?;
    let s = tape.shape(image);
    if s.c != config.in_channels {
        return Err(Error::ShapeMismatch {
            context: "segmenter input channels",
            left: s.to_string(),
            right: format!("[n, {}, h, w]", config.in_channels),
        });
    }
    let d = config.divisor();
    if s.h % d != 0 || s.w % d != 0 || s.h == 0 || s.w == 0 {
        return Err(Error::IndivisibleInput {
            h: s.h,
            w: s.w,
            divisor: d,
            depth: config.depth,
        });
    }

    let mut x = conv_leaky(tape, bound, "enc0.conv1", image, 1, 1)?;
    x = conv_leaky(tape, bound, "enc0.conv2", x, 1, 1)?;
    let mut skips = vec![x];
    for i in 1..=config.depth {
        x = conv_leaky(tape, bound, &format!("down{i}.conv1"), x, 2, 1)?;
        x = conv_leaky(tape, bound, &format!("down{i}.conv2"), x, 1, 1)?;
        if i < config.depth {
            skips.push(x);
        }
    }
    for i in (1..=config.depth).rev() {
        let w = bound.id(&format!("up{i}.tconv.weight"));
        let b = bound.id(&format!("up{i}.tconv.bias"));
        x = tape.transposed_conv2d(x, w, Some(b), 2, 0)?;
        x = tape.leaky_relu(x, T::from_f64_lossy(LEAKY_SLOPE))?;
        let skip = skips[i - 1];
        x = if use_skips {
            tape.concat_c(x, skip)?
        } else {
            // Dead-skip variant used only to prove the live one matters:
            // keep shapes by concatenating a zero map instead.
            let zeros = tape.constant(Tensor4::zeros(tape.shape(skip)));
            tape.concat_c(x, zeros)?
        };
        x = conv_leaky(tape, bound, &format!("up{i}.conv1"), x, 1, 1)?;
        x = conv_leaky(tape, bound, &format!("up{i}.conv2"), x, 1, 1)?;
    }
    let w = bound.id("head.conv.weight");
    let b = bound.id("head.conv.bias");
    let logits = tape.conv2d(x, w, Some(b), 1, 0)?;
    Ok(tape.sigmoid(logits))
}

/// Discriminator: parameters plus layer geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T: Real> {
    pub config: DiscriminatorConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Discriminator<T> {
    pub fn init(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let chans = config.channel_schedule();
        let mut b = ParamBuilder::new(seed);
        let mut c_in = config.in_channels;
        for (i, &c_out) in chans.iter().enumerate() {
            b.conv(&format!("layer{i}"), c_out, c_in, 4);
            c_in = c_out;
        }
        Ok(Discriminator {
            config,
            params: b.finish(),
        })
    }

    pub fn graph(&self, tape: &mut Tape<T>, bound: &Bound, map: TensorId) -> Result<TensorId> {
        self.config.validate()?;
        let s = tape.shape(map);
        if s.c != self.config.in_channels {
            return Err(Error::ShapeMismatch {
                context: "discriminator input channels",
                left: s.to_string(),
                right: format!("[n, {}, h, w]", self.config.in_channels),
            });
        }
        // Every stride-2 layer needs at least a 2x2 input to produce output.
        let (mut h, mut w) = (s.h, s.w);
        for _ in 0..self.config.layers {
            if h < 2 || w < 2 {
                return Err(Error::InputTooSmall {
                    h: s.h,
                    w: s.w,
                    layers: self.config.layers,
                });
            }
            h = (h + 2 - 4) / 2 + 1;
            w = (w + 2 - 4) / 2 + 1;
        }

        let mut x = map;
        for i in 0..self.config.layers {
            let wt = bound.id(&format!("layer{i}.weight"));
            let bs = bound.id(&format!("layer{i}.bias"));
            x = tape.conv2d(x, wt, Some(bs), 2, 1)?;
            if i + 1 < self.config.layers {
                x = tape.leaky_relu(x, T::from_f64_lossy(LEAKY_SLOPE))?;
            }
        }
        let x = tape.upsample_bilinear(x, s.h, s.w)?;
        Ok(tape.sigmoid(x))
    }

    pub fn predict(&self, map: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(map.clone());
        let bound = bind(&self.params, &mut tape, false);
        let y = self.graph(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn rand_input(shape: Shape4, seed: u64) -> Tensor4<f64> {
        let mut r = rng::stream(seed, &[9]);
        Tensor4 {
            shape,
            data: (0..shape.len()).map(|_| r.random_range(0.0..1.0)).collect(),
        }
    }

    #[test]
    fn segmenter_shape_and_range_contract() {
        let seg = Segmenter::<f64>::init(SegmenterConfig::default(), 1).unwrap();
        let x = rand_input(Shape4::new(2, 3, 16, 16), 2);
        let y = seg.predict(&x).unwrap();
        assert_eq!(y.shape, Shape4::new(2, 1, 16, 16));
        assert!(y.data.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn segmenter_rejects_indivisible_input_naming_divisor() {
        let seg = Segmenter::<f64>::init(SegmenterConfig::default(), 1).unwrap();
        let x = rand_input(Shape4::new(1, 3, 12, 16), 3);
        let err = seg.predict(&x).unwrap_err();
        assert!(matches!(err, Error::IndivisibleInput { divisor: 8, .. }));
        assert!(err.to_string().contains('8'), "message: {err}");
    }

    #[test]
    fn segmenter_rejects_wrong_channel_count() {
        let seg = Segmenter::<f64>::init(SegmenterConfig::default(), 1).unwrap();
        let x = rand_input(Shape4::new(1, 1, 16, 16), 3);
        assert!(matches!(
            seg.predict(&x),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zeroed_head_outputs_exactly_half() {
        let mut seg = Segmenter::<f64>::init(SegmenterConfig::default(), 1).unwrap();
        for name in ["head.conv.weight", "head.conv.bias"] {
            let t = seg.params.get_mut(name).unwrap();
            *t = Tensor4::zeros(t.shape);
        }
        let x = rand_input(Shape4::new(1, 3, 8, 8), 4);
        let y = seg.predict(&x).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.5));

        let mut disc = Discriminator::<f64>::init(
            DiscriminatorConfig {
                layers: 3,
                ..DiscriminatorConfig::default()
            },
            1,
        )
        .unwrap();
        let i = disc.params.entries.len() - 2;
        disc.params.entries[i].tensor = Tensor4::zeros(disc.params.entries[i].tensor.shape);
        let j = disc.params.entries.len() - 1;
        disc.params.entries[j].tensor = Tensor4::zeros(disc.params.entries[j].tensor.shape);
        let m = rand_input(Shape4::new(1, 1, 16, 16), 5);
        let y = disc.predict(&m).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn skip_connections_are_live() {
        let seg = Segmenter::<f64>::init(
            SegmenterConfig {
                base_channels: 4,
                depth: 2,
                ..SegmenterConfig::default()
            },
            7,
        )
        .unwrap();
        let x = rand_input(Shape4::new(1, 3, 8, 8), 8);
        let mut tape = Tape::new();
        let xid = tape.constant(x.clone());
        let bound = bind(&seg.params, &mut tape, false);
        let with = segmenter_graph(&seg.config, &mut tape, &bound, xid, true).unwrap();
        let without = segmenter_graph(&seg.config, &mut tape, &bound, xid, false).unwrap();
        let d = crate::tensor::max_abs_diff(tape.value(with), tape.value(without));
        assert!(d > 1e-6, "skips appear dead: max diff {d}");
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Segmenter::<f32>::init(SegmenterConfig::default(), 42).unwrap();
        let b = Segmenter::<f32>::init(SegmenterConfig::default(), 42).unwrap();
        assert_eq!(a.params, b.params);
        let c = Segmenter::<f32>::init(SegmenterConfig::default(), 43).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn init_spread_matches_fan_in_target() {
        // A layer with >= 1e4 weights: discriminator base 16, layer 3 has
        // 128*64*16 weights.
        let disc = Discriminator::<f64>::init(
            DiscriminatorConfig {
                base_channels: 16,
                ..DiscriminatorConfig::default()
            },
            11,
        )
        .unwrap();
        let w = disc.params.get("layer3.weight").unwrap();
        assert!(w.len() >= 10_000);
        let fan_in = w.shape.c * w.shape.h * w.shape.w;
        let gain = (2.0f64 / (1.0 + 0.04)).sqrt();
        let target = gain / (fan_in as f64).sqrt();
        let mean: f64 = w.data.iter().sum::<f64>() / w.len() as f64;
        let var: f64 =
            w.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        let std = var.sqrt();
        assert!(
            (std - target).abs() <= 0.2 * target,
            "std {std} vs target {target}"
        );
    }

    #[test]
    fn discriminator_shape_contract_and_bottleneck() {
        let disc = Discriminator::<f64>::init(DiscriminatorConfig::default(), 2).unwrap();
        let m = rand_input(Shape4::new(1, 1, 32, 32), 6);
        let y = disc.predict(&m).unwrap();
        assert_eq!(y.shape, Shape4::new(1, 1, 32, 32));
        assert!(y.data.iter().all(|&v| v > 0.0 && v < 1.0));
        // 32 / 2^5 = 1: the logit map collapses to a single pixel, so the
        // sigmoid sees one bilinearly stretched value per item.
        let first = y.data[0];
        assert!(y.data.iter().all(|&v| (v - first).abs() < 1e-12));
    }

    #[test]
    fn discriminator_rejects_small_inputs_and_shallow_configs() {
        let disc = Discriminator::<f64>::init(DiscriminatorConfig::default(), 2).unwrap();
        let m = rand_input(Shape4::new(1, 1, 16, 16), 6);
        assert!(matches!(
            disc.predict(&m),
            Err(Error::InputTooSmall { layers: 5, .. })
        ));
        assert!(Discriminator::<f64>::init(
            DiscriminatorConfig {
                layers: 2,
                ..DiscriminatorConfig::default()
            },
            2,
        )
        .is_err());
    }

    #[test]
    fn discriminator_default_schedule_is_doubling_then_one() {
        let disc = Discriminator::<f64>::init(DiscriminatorConfig::default(), 2).unwrap();
        let out_channels: Vec<usize> = (0..5)
            .map(|i| {
                disc.params
                    .get(&format!("layer{i}.weight"))
                    .unwrap()
                    .shape
                    .n
            })
            .collect();
        assert_eq!(out_channels, vec![8, 16, 32, 64, 1]);
        for i in 0..5 {
            let w = disc.params.get(&format!("layer{i}.weight")).unwrap();
            assert_eq!((w.shape.h, w.shape.w), (4, 4));
        }
    }

    #[test]
    fn every_parameter_receives_gradient_when_trainable() {
        let seg = Segmenter::<f64>::init(
            SegmenterConfig {
                base_channels: 4,
                depth: 2,
                ..SegmenterConfig::default()
            },
            3,
        )
        .unwrap();
        let x = rand_input(Shape4::new(1, 3, 8, 8), 10);
        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let bound = bind(&seg.params, &mut tape, true);
        let y = seg.graph(&mut tape, &bound, xid).unwrap();
        let loss = tape.mean(y);
        let mut grads = tape.backward(loss).unwrap();
        let gs = bound.take_gradients(&seg.params, &mut grads);
        assert_eq!(gs.len(), seg.params.entries.len());
        for (g, e) in gs.iter().zip(&seg.params.entries) {
            let norm: f64 = g.data.iter().map(|v| v * v).sum();
            assert!(norm > 0.0, "no gradient reached {}", e.name);
        }
    }

    #[test]
    fn frozen_binding_yields_zero_gradients() {
        let disc = Discriminator::<f64>::init(
            DiscriminatorConfig {
                layers: 3,
                base_channels: 4,
                ..DiscriminatorConfig::default()
            },
            3,
        )
        .unwrap();
        let m = rand_input(Shape4::new(1, 1, 8, 8), 12);
        let mut tape = Tape::new();
        let mid = tape.constant(m);
        let bound = bind(&disc.params, &mut tape, false);
        let y = disc.graph(&mut tape, &bound, mid).unwrap();
        let loss = tape.mean(y);
        let mut grads = tape.backward(loss).unwrap();
        let gs = bound.take_gradients(&disc.params, &mut grads);
        for g in gs {
            assert!(g.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn predictions_are_bit_reproducible() {
        let seg = Segmenter::<f32>::init(SegmenterConfig::default(), 5).unwrap();
        let shape = Shape4::new(1, 3, 16, 16);
        let mut r = rng::stream(13, &[9]);
        let xf = Tensor4 {
            shape,
            data: (0..shape.len())
                .map(|_| r.random_range(0.0f32..1.0))
                .collect(),
        };
        let a = seg.predict(&xf).unwrap();
        let b = seg.predict(&xf).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adam_plumbing_updates_all_entries() {
        let mut seg = Segmenter::<f64>::init(
            SegmenterConfig {
                base_channels: 4,
                depth: 1,
                ..SegmenterConfig::default()
            },
            3,
        )
        .unwrap();
        let before = seg.params.clone();
        let grads: Vec<_> = seg
            .params
            .entries
            .iter()
            .map(|e| Tensor4::full(e.tensor.shape, 1.0))
            .collect();
        seg.params.apply_adam(&grads, 0.01, 0.5, 0.9, 1e-8).unwrap();
        for (a, b) in before.entries.iter().zip(&seg.params.entries) {
            assert_ne!(a.tensor, b.tensor, "{} unchanged", a.name);
            assert_eq!(b.adam.t, 1);
        }
    }
}
