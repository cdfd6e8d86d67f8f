use crate::{Error, Result};

/// Bias-corrected Adam with moments stored alongside the hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState { step: 0, m: vec![0.0; n], v: vec![0.0; n], lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, eps: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.eps = eps;
        self
    }
}

/// One Adam update of `params` in place. Non-finite gradients leave both the
/// parameters and the state untouched.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::invalid("Adam parameter, gradient and moment lengths differ"));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::TrainingDivergence {
            iteration: state.step as usize,
            message: format!("non-finite gradient at parameter {i}"),
            last_checkpoint: None,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 3.0];
        adam_step(&mut s, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert!(s.m.iter().chain(&s.v).all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [3.0, -0.02, 1e4] {
            let mut s = AdamState::new(1, 1e-3);
            let mut p = vec![0.5];
            adam_step(&mut s, &mut p, &[g]).unwrap();
            let delta = (p[0] - 0.5).abs();
            assert!((delta / 1e-3 - 1.0).abs() < 1e-6, "g = {g}: {delta}");
            assert_eq!((p[0] - 0.5).signum(), -g.signum());
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut s = AdamState::new(2, 1e-3);
        let mut p = vec![0.0, 0.0];
        let err = adam_step(&mut s, &mut p, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::TrainingDivergence { .. }));
        assert_eq!(s.step, 0);
    }

    // Reference trace written out longhand for f(x) = x^2, grad 2x.
    #[test]
    fn quadratic_trace_matches_reference() {
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let mut x_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=10 {
            let g = 2.0 * x_ref;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x_ref -= lr * mh / (vh.sqrt() + eps);
            reference.push(x_ref);
        }
        let mut s = AdamState::new(1, lr);
        let mut p = vec![1.0];
        for want in reference {
            let g = [2.0 * p[0]];
            adam_step(&mut s, &mut p, &g).unwrap();
            assert!((p[0] - want).abs() < 1e-10);
        }
    }
}
