//! Segmentation and discriminator objectives.
//!
//! Four losses drive training: supervised BCE on labeled pairs, an
//! adversarial term pushing the discriminator's confidence map up, a
//! confidence-masked self-training BCE on unlabeled data with hard virtual
//! labels, and the discriminator's own real-vs-synthesized BCE. The total is
//! their weighted sum, with the self-training weight gated to zero during
//! warm-up.
//!
//! Every loss exists once, as a tape composition; the plain-value entry
//! points run the same composition on a throwaway tape, so numbers can never
//! drift between training and reporting.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Tensor4, TensorId};

/// Floor/ceiling distance applied to every probability before a log.
pub const PROB_EPS: f64 = 1e-7;

/// Coefficients of the total segmentation objective plus the self-training
/// confidence threshold and warm-up length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights<T: Real> {
    pub lambda_adv: T,
    pub lambda_semi_adv: T,
    pub lambda_semi_bce: T,
    pub t_semi_mask: T,
    pub warmup_iters: u64,
}

impl<T: Real> LossWeights<T> {
    pub fn new(
        lambda_adv: T,
        lambda_semi_adv: T,
        lambda_semi_bce: T,
        t_semi_mask: T,
        warmup_iters: u64,
    ) -> Result<Self> {
        for (name, v) in [
            ("lambda_adv", lambda_adv),
            ("lambda_semi_adv", lambda_semi_adv),
            ("lambda_semi_bce", lambda_semi_bce),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(t_semi_mask >= T::zero() && t_semi_mask <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "t_semi_mask must be in [0,1], got {t_semi_mask}"
            )));
        }
        Ok(LossWeights {
            lambda_adv,
            lambda_semi_adv,
            lambda_semi_bce,
            t_semi_mask,
            warmup_iters,
        })
    }

    /// The published operating point: manually chosen adversarial weight,
    /// swarm-selected self-training weights and threshold.
    pub fn reference(warmup_iters: u64) -> Self {
        LossWeights {
            lambda_adv: T::from_f64_lossy(0.1),
            lambda_semi_adv: T::from_f64_lossy(0.004),
            lambda_semi_bce: T::from_f64_lossy(0.1),
            t_semi_mask: T::from_f64_lossy(0.1),
            warmup_iters,
        }
    }

    /// Self-training weight actually applied at `iteration`: zero before the
    /// warm-up boundary, the configured value from it onward.
    pub fn effective_lambda_semi_bce(&self, iteration: u64) -> T {
        if iteration < self.warmup_iters {
            T::zero()
        } else {
            self.lambda_semi_bce
        }
    }
}

/// Unweighted loss components of one segmenter update, plus their weighted
/// total and the fraction of pixels the confidence mask kept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T: Real> {
    pub bce: T,
    pub adv: T,
    pub semi_adv: T,
    pub semi_bce: T,
    pub total: T,
    pub masked_pixel_fraction: T,
}

fn require_map<T: Real>(t: &Tensor4<T>, what: &'static str) -> Result<()> {
    if t.shape.c != 1 {
        return Err(Error::InvalidArgument(format!(
            "{what} must be a single-channel map, got shape {}",
            t.shape
        )));
    }
    if t.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    Ok(())
}

fn require_binary<T: Real>(t: &Tensor4<T>) -> Result<()> {
    for &v in &t.data {
        if v != T::zero() && v != T::one() {
            return Err(Error::NonBinaryTarget(v.to_f64_lossy()));
        }
    }
    Ok(())
}

fn same_shape<T: Real>(
    context: &'static str,
    a: &Tensor4<T>,
    b: &Tensor4<T>,
) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            context,
            left: a.shape.to_string(),
            right: b.shape.to_string(),
        });
    }
    Ok(())
}

fn clamp01<T: Real>(tape: &mut Tape<T>, x: TensorId) -> TensorId {
    let eps = T::from_f64_lossy(PROB_EPS);
    tape.clamp(x, eps, T::one() - eps)
        .expect("eps corridor is ordered")
}

/// Shared core of the supervised and self-training BCE graphs.
///
/// term = y*ln(p) + (1-y)*ln(1-p), optionally gated by a 0/1 mask, then
/// -mean over all pixels. The mask multiplies by exactly 1.0 where it is on,
/// so an all-ones mask reproduces the unmasked loss bit for bit.
fn masked_bce_graph<T: Real>(
    tape: &mut Tape<T>,
    pred: TensorId,
    target: &Tensor4<T>,
    mask: Option<&Tensor4<T>>,
) -> Result<TensorId> {
    let pred_shape = tape.shape(pred);
    if pred_shape != target.shape {
        return Err(Error::ShapeMismatch {
            context: "bce pred vs target",
            left: pred_shape.to_string(),
            right: target.shape.to_string(),
        });
    }
    let one = T::one();
    let y = tape.constant(target.clone());
    let one_minus_y = tape.rsub_scalar(one, y);
    let p = clamp01(tape, pred);
    let ln_p = tape.ln(p);
    let one_minus_p = tape.rsub_scalar(one, p);
    let ln_1p = tape.ln(one_minus_p);
    let pos = tape.mul(y, ln_p)?;
    let neg = tape.mul(one_minus_y, ln_1p)?;
    let mut term = tape.add(pos, neg)?;
    if let Some(m) = mask {
        same_shape("bce mask", target, m)?;
        let m_id = tape.constant(m.clone());
        term = tape.mul(m_id, term)?;
    }
    let mean = tape.mean(term);
    Ok(tape.scalar_mul(mean, -one))
}

/// Supervised BCE graph node over a predicted probability map.
pub fn bce_graph<T: Real>(
    tape: &mut Tape<T>,
    pred: TensorId,
    target: &Tensor4<T>,
) -> Result<TensorId> {
    require_map(tape.value(pred), "bce pred")?;
    require_map(target, "bce target")?;
    require_binary(target)?;
    masked_bce_graph(tape, pred, target, None)
}

/// Supervised BCE of a probability map against a hard binary map.
pub fn bce_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<T> {
    let mut tape = Tape::new();
    let p = tape.constant(pred.clone());
    let loss = bce_graph(&mut tape, p, target)?;
    tape.value(loss).scalar_value()
}

/// Adversarial term: -mean log of a discriminator confidence map. Serves
/// both the labeled and the unlabeled branch; only the input differs.
pub fn adv_graph<T: Real>(tape: &mut Tape<T>, d_out: TensorId) -> Result<TensorId> {
    require_map(tape.value(d_out), "adv d_out")?;
    let p = clamp01(tape, d_out);
    let ln_p = tape.ln(p);
    let mean = tape.mean(ln_p);
    Ok(tape.scalar_mul(mean, -T::one()))
}

/// Adversarial loss of a confidence map.
pub fn adv_loss<T: Real>(d_out: &Tensor4<T>) -> Result<T> {
    let mut tape = Tape::new();
    let d = tape.constant(d_out.clone());
    let loss = adv_graph(&mut tape, d)?;
    tape.value(loss).scalar_value()
}

/// Hard self-training targets: 1 where the segmenter is more than half sure.
/// Strict inequality; non-differentiable by construction.
pub fn virtual_labels<T: Real>(s: &Tensor4<T>) -> Tensor4<T> {
    let half = T::from_f64_lossy(0.5);
    s.map(|v| if v > half { T::one() } else { T::zero() })
}

/// Pixels whose discriminator confidence strictly exceeds `threshold`.
pub fn confidence_mask<T: Real>(d_out: &Tensor4<T>, threshold: T) -> Result<Tensor4<T>> {
    if !(threshold >= T::zero() && threshold <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "confidence threshold must be in [0,1], got {threshold}"
        )));
    }
    Ok(d_out.map(|v| if v > threshold { T::one() } else { T::zero() }))
}

/// Fraction of mask pixels that are on.
pub fn mask_fraction<T: Real>(mask: &Tensor4<T>) -> T {
    let mut acc = T::zero();
    for &v in &mask.data {
        acc = acc + v;
    }
    acc / T::from_usize(mask.len()).expect("len fits in T")
}

/// Self-training BCE graph with precomputed selectors.
///
/// `yhat` and `mask` enter as constants: the gradient flows only through
/// `s`, and only at pixels the mask keeps. Normalization is by the total
/// pixel count, not the masked count, exactly as the objective is defined.
pub fn semi_bce_graph<T: Real>(
    tape: &mut Tape<T>,
    s: TensorId,
    yhat: &Tensor4<T>,
    mask: &Tensor4<T>,
) -> Result<TensorId> {
    require_map(tape.value(s), "semi_bce s")?;
    require_map(yhat, "semi_bce virtual labels")?;
    require_binary(yhat)?;
    require_binary(mask)?;
    masked_bce_graph(tape, s, yhat, Some(mask))
}

/// Self-training BCE of a segmenter map against its own virtual labels,
/// restricted to pixels the discriminator trusts above `threshold`.
pub fn semi_bce_loss<T: Real>(
    s: &Tensor4<T>,
    d_out: &Tensor4<T>,
    threshold: T,
) -> Result<T> {
    same_shape("semi_bce s vs d_out", s, d_out)?;
    let yhat = virtual_labels(s);
    let mask = confidence_mask(d_out, threshold)?;
    let mut tape = Tape::new();
    let s_id = tape.constant(s.clone());
    let loss = semi_bce_graph(&mut tape, s_id, &yhat, &mask)?;
    tape.value(loss).scalar_value()
}

/// Discriminator objective graph: push fake confidence down, real up.
pub fn discriminator_graph<T: Real>(
    tape: &mut Tape<T>,
    d_fake: TensorId,
    d_real: TensorId,
) -> Result<TensorId> {
    require_map(tape.value(d_fake), "discriminator d_fake")?;
    require_map(tape.value(d_real), "discriminator d_real")?;
    let (sf, sr) = (tape.shape(d_fake), tape.shape(d_real));
    if sf != sr {
        return Err(Error::ShapeMismatch {
            context: "discriminator d_fake vs d_real",
            left: sf.to_string(),
            right: sr.to_string(),
        });
    }
    let one = T::one();
    let pf = clamp01(tape, d_fake);
    let pr = clamp01(tape, d_real);
    let one_minus_pf = tape.rsub_scalar(one, pf);
    let ln_fake = tape.ln(one_minus_pf);
    let ln_real = tape.ln(pr);
    let term = tape.add(ln_fake, ln_real)?;
    let mean = tape.mean(term);
    Ok(tape.scalar_mul(mean, -one))
}

/// Discriminator BCE: confidence on synthesized maps vs on ground truth.
pub fn discriminator_loss<T: Real>(d_fake: &Tensor4<T>, d_real: &Tensor4<T>) -> Result<T> {
    let mut tape = Tape::new();
    let f = tape.constant(d_fake.clone());
    let r = tape.constant(d_real.clone());
    let loss = discriminator_graph(&mut tape, f, r)?;
    tape.value(loss).scalar_value()
}

/// Assembles the weighted total from unweighted components.
///
/// total = bce + λ_adv·adv + λ_semi_adv·semi_adv + λ'·semi_bce, evaluated
/// left to right at working precision, where λ' is the warm-up-gated
/// self-training weight. The breakdown echoes the unweighted components.
pub fn seg_total_loss<T: Real>(
    bce: T,
    adv: T,
    semi_adv: T,
    semi_bce: T,
    masked_pixel_fraction: T,
    weights: &LossWeights<T>,
    iteration: u64,
) -> LossBreakdown<T> {
    let lam_semi_bce = weights.effective_lambda_semi_bce(iteration);
    let total = bce
        + weights.lambda_adv * adv
        + weights.lambda_semi_adv * semi_adv
        + lam_semi_bce * semi_bce;
    LossBreakdown {
        bce,
        adv,
        semi_adv,
        semi_bce,
        total,
        masked_pixel_fraction,
    }
}
