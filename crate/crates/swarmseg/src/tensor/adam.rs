use super::{Real, Shape4, Tensor4};
use crate::error::{Error, Result};

/// Per-parameter Adam accumulators. One instance per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Real> {
    pub m: Tensor4<T>,
    pub v: Tensor4<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(shape: Shape4) -> Self {
        AdamState {
            m: Tensor4::zeros(shape),
            v: Tensor4::zeros(shape),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update, applied in place. `state.t` advances by one.
pub fn adam_step<T: Real>(
    param: &mut Tensor4<T>,
    grad: &Tensor4<T>,
    state: &mut AdamState<T>,
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
) -> Result<()> {
    if param.shape != grad.shape || param.shape != state.m.shape {
        return Err(Error::ShapeMismatch {
            context: "adam_step",
            left: param.shape.to_string(),
            right: grad.shape.to_string(),
        });
    }
    let one = T::one();
    if beta1 < T::zero() || beta1 >= one || beta2 < T::zero() || beta2 >= one {
        return Err(Error::InvalidArgument(format!(
            "adam betas must be in [0,1), got ({beta1}, {beta2})"
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = one - beta1.powi(t);
    let bc2 = one - beta2.powi(t);
    for i in 0..param.data.len() {
        let g = grad.data[i];
        let m = beta1 * state.m.data[i] + (one - beta1) * g;
        let v = beta2 * state.v.data[i] + (one - beta2) * g * g;
        state.m.data[i] = m;
        state.v.data[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        param.data[i] = param.data[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const B1: f64 = 0.5;
    const B2: f64 = 0.9;
    const EPS: f64 = 1e-8;

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Tensor4::from_vec(Shape4::new(1, 1, 1, 2), vec![1.5, -2.0]).unwrap();
        let g = Tensor4::zeros(p.shape);
        let mut st = AdamState::new(p.shape);
        adam_step(&mut p, &g, &mut st, 0.1, B1, B2, EPS).unwrap();
        assert_eq!(p.data, vec![1.5, -2.0]);
        assert_eq!(st.t, 1);
    }

    /// param 0, grad 1, lr 0.1: bias correction makes m_hat = v_hat = 1 at
    /// t = 1, so the step is -lr/(1 + eps) which is -0.1 to within eps.
    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut p = Tensor4::scalar(0.0_f64);
        let g = Tensor4::scalar(1.0);
        let mut st = AdamState::new(p.shape);
        adam_step(&mut p, &g, &mut st, 0.1, B1, B2, EPS).unwrap();
        assert!((p.data[0] - (-0.1)).abs() < 1e-8, "got {}", p.data[0]);
        assert!((st.m.data[0] - 0.5).abs() < 1e-15);
        assert!((st.v.data[0] - 0.1).abs() < 1e-15);
    }

    /// Constant gradient: successive step magnitudes never grow (the
    /// bias-corrected moments converge monotonically toward g and g^2).
    #[test]
    fn constant_gradient_steps_nonincreasing() {
        let mut p = Tensor4::scalar(0.0_f64);
        let g = Tensor4::scalar(0.7);
        let mut st = AdamState::new(p.shape);
        let mut prev = p.data[0];
        let mut last_step = f64::INFINITY;
        for _ in 0..20 {
            adam_step(&mut p, &g, &mut st, 0.05, B1, B2, EPS).unwrap();
            let step = (p.data[0] - prev).abs();
            assert!(step <= last_step + 1e-12, "step grew: {step} > {last_step}");
            last_step = step;
            prev = p.data[0];
        }
    }

    #[test]
    fn rejects_shape_mismatch_and_bad_betas() {
        let mut p = Tensor4::<f64>::zeros(Shape4::new(1, 1, 1, 2));
        let g = Tensor4::<f64>::zeros(Shape4::new(1, 1, 2, 1));
        let mut st = AdamState::new(p.shape);
        assert!(adam_step(&mut p, &g, &mut st, 0.1, B1, B2, EPS).is_err());
        let g = Tensor4::<f64>::zeros(p.shape);
        assert!(adam_step(&mut p, &g, &mut st, 0.1, 1.0, B2, EPS).is_err());
    }

    #[test]
    fn t_increments_once_per_step() {
        let mut p = Tensor4::scalar(0.0_f64);
        let g = Tensor4::scalar(1.0);
        let mut st = AdamState::new(p.shape);
        for want in 1..=5 {
            adam_step(&mut p, &g, &mut st, 0.01, B1, B2, EPS).unwrap();
            assert_eq!(st.t, want);
        }
    }
}
