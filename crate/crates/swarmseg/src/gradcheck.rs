//! Finite-difference verification of analytic gradients.
//!
//! Every differentiable path in the library is validated against central
//! differences at f64 precision. The harness rebuilds the graph from scratch
//! per probe so it works for any closure from leaf tensors to a scalar loss.

use crate::losses::{adv_graph, bce_graph, confidence_mask, semi_bce_graph, virtual_labels};
use crate::models::{
    bind, bind_ids, Discriminator, DiscriminatorConfig, Segmenter, SegmenterConfig,
};
use crate::rng;
use crate::tensor::{Shape4, Tape, Tensor4, TensorId};
use rand::Rng;

/// Worst relative error between analytic and central-difference gradients
/// across every element of every leaf.
///
/// The program must rebuild the same scalar-valued graph every call; only
/// the leaf values vary. rel = |analytic - numeric| / max(|analytic|,
/// |numeric|, 1); the 1 floor keeps near-zero gradients from exploding the
/// ratio. Step size is 1e-7 scaled by element magnitude: small enough that
/// a random leaky-ReLU pre-activation almost never sits inside the probe
/// window (a straddled kink corrupts the numeric slope, not the analytic
/// one), large enough that f64 cancellation noise stays near 1e-9.
pub fn max_relative_error(
    leaves: &[Tensor4<f64>],
    program: &dyn Fn(&mut Tape<f64>, &[TensorId]) -> TensorId,
) -> f64 {
    let run = |inputs: &[Tensor4<f64>]| -> (f64, Option<Vec<Option<Tensor4<f64>>>>) {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let root = program(&mut tape, &ids);
        let value = tape.value(root).scalar_value().expect("scalar program");
        let grads = tape.backward(root).expect("backward");
        let collected = ids.iter().map(|&id| grads.get(id).cloned()).collect();
        (value, Some(collected))
    };

    let (_, analytic) = run(leaves);
    let analytic = analytic.expect("gradients");

    let eval = |inputs: &[Tensor4<f64>]| -> f64 {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let root = program(&mut tape, &ids);
        tape.value(root).scalar_value().expect("scalar program")
    };

    let mut worst = 0.0f64;
    for (li, leaf) in leaves.iter().enumerate() {
        let zero = Tensor4::zeros(leaf.shape);
        let ga = analytic[li].as_ref().unwrap_or(&zero);
        for ei in 0..leaf.data.len() {
            let x = leaf.data[ei];
            let h = 1e-7 * x.abs().max(1.0);
            let mut plus = leaves.to_vec();
            plus[li].data[ei] = x + h;
            let mut minus = leaves.to_vec();
            minus[li].data[ei] = x - h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = ga.data[ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}

fn rand_tensor(shape: Shape4, seed: u64, lo: f64, hi: f64) -> Tensor4<f64> {
    let mut r = rng::stream(seed, &[shape.len() as u64]);
    Tensor4 {
        shape,
        data: (0..shape.len()).map(|_| r.random_range(lo..hi)).collect(),
    }
}

/// Worst relative gradient error of the full training objective for one
/// randomly drawn configuration: a small segmenter and frozen discriminator
/// on 8x8 inputs, composite loss bce + 0.1 adv + 0.004 semi_adv +
/// 0.1 semi_bce, differentiated with respect to every segmenter parameter.
///
/// Case geometry is weighted toward the smallest networks: every probe
/// costs two forward passes per parameter, so the deep variant is rationed.
pub fn composite_case(case: u64) -> f64 {
    let mut pick = rng::stream(case, &[11]);
    let roll: f64 = pick.random();
    let (depth, base) = if roll < 0.6 {
        (1, 2)
    } else if roll < 0.9 {
        (1, 3)
    } else {
        (2, 2)
    };
    let seg_cfg = SegmenterConfig {
        in_channels: 3,
        base_channels: base,
        depth,
    };
    let disc_cfg = DiscriminatorConfig {
        in_channels: 1,
        base_channels: pick.random_range(2..=3usize),
        layers: 3,
    };
    let seg = Segmenter::<f64>::init(seg_cfg, case * 31 + 1).expect("valid config");
    let disc = Discriminator::<f64>::init(disc_cfg, case * 37 + 2).expect("valid config");

    let xl = rand_tensor(Shape4::new(1, 3, 8, 8), case * 41 + 3, 0.0, 1.0);
    let xu = rand_tensor(Shape4::new(1, 3, 8, 8), case * 43 + 4, 0.0, 1.0);
    let mask = rand_tensor(Shape4::new(1, 1, 8, 8), case * 47 + 5, 0.0, 1.0)
        .map(|v| if v > 0.5 { 1.0 } else { 0.0 });

    // Selectors frozen from the unperturbed forward, matching their
    // gradient-stopped role in the training step.
    let su0 = seg.predict(&xu).expect("forward");
    let du0 = disc.predict(&su0).expect("forward");
    let yhat = virtual_labels(&su0);
    let sel = confidence_mask(&du0, 0.1).expect("valid threshold");

    let leaves: Vec<Tensor4<f64>> = seg
        .params
        .entries
        .iter()
        .map(|e| e.tensor.clone())
        .collect();
    max_relative_error(&leaves, &|tape, ids| {
        let bound = bind_ids(&seg.params, ids).expect("id count matches");
        let xl_id = tape.constant(xl.clone());
        let sl = seg.graph(tape, &bound, xl_id).expect("graph");
        let bce = bce_graph(tape, sl, &mask).expect("graph");
        let db = bind(&disc.params, tape, false);
        let dl = disc.graph(tape, &db, sl).expect("graph");
        let adv = adv_graph(tape, dl).expect("graph");
        let xu_id = tape.constant(xu.clone());
        let su = seg.graph(tape, &bound, xu_id).expect("graph");
        let db2 = bind(&disc.params, tape, false);
        let du = disc.graph(tape, &db2, su).expect("graph");
        let semi_adv = adv_graph(tape, du).expect("graph");
        let semi = semi_bce_graph(tape, su, &yhat, &sel).expect("graph");
        let t1 = tape.scalar_mul(adv, 0.1);
        let s1 = tape.add(bce, t1).expect("scalars");
        let t2 = tape.scalar_mul(semi_adv, 0.004);
        let s2 = tape.add(s1, t2).expect("scalars");
        let t3 = tape.scalar_mul(semi, 0.1);
        tape.add(s2, t3).expect("scalars")
    })
}
