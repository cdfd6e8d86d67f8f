use super::{Adjoints, NeuralField};

/// Worst relative disagreement between [`NeuralField::param_gradient`] and
/// central differences of `L = sum_i a_i u(x_i) + b_i . grad u(x_i)` over every
/// parameter. Differences below `1e-8` in absolute value count as zero.
pub fn max_fd_relative_error(f: &NeuralField, pts: &[f64], adj: &Adjoints) -> f64 {
    let d = f.dim();
    let loss = |g: &NeuralField| -> f64 {
        let e = g.eval_batch(pts);
        let mut s = 0.0;
        for i in 0..e.len() {
            s += adj.d_value[i] * e.values[i];
            for k in 0..d {
                s += adj.d_grad[i * d + k] * e.grad(i)[k];
            }
        }
        s
    };
    let analytic = f.param_gradient(pts, adj);
    let mut g = f.clone();
    let mut worst: f64 = 0.0;
    for p in 0..f.params.len() {
        let h = 1e-6 * f.params[p].abs().max(1.0);
        g.params[p] = f.params[p] + h;
        let lp = loss(&g);
        g.params[p] = f.params[p] - h;
        let lm = loss(&g);
        g.params[p] = f.params[p];
        let fd = (lp - lm) / (2.0 * h);
        let err = (fd - analytic[p]).abs();
        let rel = if err <= 1e-8 { 0.0 } else { err / analytic[p].abs().max(fd.abs()) };
        worst = worst.max(rel);
    }
    worst
}

