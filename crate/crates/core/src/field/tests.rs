use super::*;
use crate::rng;
use rand::Rng;

/// Straight-line evaluator written independently of the batched GEMM path:
/// nested loops, forward-mode tangents carried as a Jacobian matrix.
fn reference_eval(f: &NeuralField, x: &[f64]) -> (f64, Vec<f64>) {
    let d = x.len();
    let shapes = f.arch.layer_shapes();
    let mut a: Vec<f64> = x.to_vec();
    let mut jac: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect();
    let mut offset = 0;
    for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
        let w = &f.params[offset..offset + n_in * n_out];
        let b = &f.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut z = vec![0.0; n_out];
        let mut zj = vec![vec![0.0; d]; n_out];
        for o in 0..n_out {
            z[o] = b[o];
            for i in 0..n_in {
                z[o] += w[o * n_in + i] * a[i];
                for k in 0..d {
                    zj[o][k] += w[o * n_in + i] * jac[i][k];
                }
            }
        }
        if l + 1 == shapes.len() {
            return (z[0], zj[0].clone());
        }
        let (act, dact): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match f.arch.activation {
            Activation::Softplus { beta } => (
                Box::new(move |z: f64| (1.0 + (beta * z).exp()).ln() / beta),
                Box::new(move |z: f64| 1.0 / (1.0 + (-beta * z).exp())),
            ),
            Activation::Sine { omega0 } => {
                (Box::new(move |z: f64| (omega0 * z).sin()), Box::new(move |z: f64| omega0 * (omega0 * z).cos()))
            }
        };
        a = z.iter().map(|&v| act(v)).collect();
        jac = (0..n_out).map(|o| zj[o].iter().map(|&t| dact(z[o]) * t).collect()).collect();
    }
    unreachable!()
}

fn random_field(d: usize, width: usize, layers: usize, act: Activation, seed: u64) -> NeuralField {
    let arch = Architecture::new(d, width, layers, act).unwrap();
    let mut f = init_random(&arch, seed);
    // Nonzero biases so every code path is exercised.
    let mut r = rng::stream(seed, "bias", 0);
    let shapes = arch.layer_shapes();
    let mut off = 0;
    for (i, o) in shapes {
        for b in &mut f.params[off + i * o..off + i * o + o] {
            *b = r.random_range(-0.3..0.3);
        }
        off += i * o + o;
    }
    f
}

fn random_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "pts", 0);
    (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()
}

#[test]
fn zero_network_outputs_zero() {
    let f = NeuralField::zeros(Architecture::default_for(2));
    assert_eq!(f.forward(&[0.3, -0.7]), 0.0);
    assert_eq!(f.forward_with_grad(&[0.3, -0.7]).grad, vec![0.0, 0.0]);
}

#[test]
fn affine_network() {
    let arch = Architecture::new(2, 1, 0, Activation::Softplus { beta: 100.0 }).unwrap();
    let f = NeuralField::new(arch, vec![1.0, 2.0, 0.5]).unwrap();
    assert_eq!(f.forward(&[1.0, 1.0]), 3.5);
    assert_eq!(f.forward_with_grad(&[0.2, -4.0]).grad, vec![1.0, 2.0]);
}

#[test]
fn single_softplus_unit_gradient_at_origin() {
    let arch = Architecture::new(1, 1, 1, Activation::Softplus { beta: 100.0 }).unwrap();
    let f = NeuralField::new(arch, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let e = f.forward_with_grad(&[0.0]);
    assert_eq!(e.grad, vec![0.5]);
    assert!((e.value - 2f64.ln() / 100.0).abs() < 1e-15);
}

#[test]
fn rejects_wrong_parameter_length() {
    let arch = Architecture::new(2, 4, 2, Activation::Softplus { beta: 100.0 }).unwrap();
    assert_eq!(arch.param_count(), 2 * 4 + 4 + 4 * 4 + 4 + 4 + 1);
    assert!(NeuralField::new(arch.clone(), vec![0.0; 3]).is_err());
    let mut p = vec![0.0; arch.param_count()];
    p[0] = f64::NAN;
    assert!(NeuralField::new(arch, p).is_err());
}

#[test]
fn matches_reference_evaluator() {
    for (seed, act) in [(1, Activation::Softplus { beta: 100.0 }), (2, Activation::Softplus { beta: 3.0 }), (3, Activation::Sine { omega0: 30.0 })] {
        for d in 1..=3 {
            let f = random_field(d, 16, 3, act, seed + d as u64);
            let pts = random_points(300, d, seed);
            let batch = f.eval_batch(&pts);
            for (i, x) in pts.chunks_exact(d).enumerate() {
                let (u, g) = reference_eval(&f, x);
                assert!((batch.values[i] - u).abs() <= 1e-12 * u.abs().max(1.0), "{u} vs {}", batch.values[i]);
                for k in 0..d {
                    assert!((batch.grad(i)[k] - g[k]).abs() <= 1e-11 * g[k].abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let f = random_field(3, 32, 4, Activation::Softplus { beta: 10.0 }, 7);
    let h = 1e-6;
    for x in random_points(50, 3, 8).chunks_exact(3) {
        let e = f.forward_with_grad(x);
        for k in 0..3 {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.forward(&xp) - f.forward(&xm)) / (2.0 * h);
            let rel = (fd - e.grad[k]).abs() / e.grad[k].abs().max(1e-3);
            assert!(rel < 1e-5, "rel error {rel}");
        }
    }
}

#[test]
fn value_path_is_bitwise_identical_and_batch_independent() {
    let f = random_field(2, 24, 3, Activation::Softplus { beta: 100.0 }, 9);
    let pts = random_points(517, 2, 10);
    let plain = f.forward_batch(&pts);
    let joint = f.eval_batch(&pts);
    assert_eq!(plain, joint.values);
    // Same point evaluated alone, in a small batch and at a different chunk offset.
    for i in [0, 1, 130, 516] {
        let x = &pts[2 * i..2 * i + 2];
        assert_eq!(f.forward(x).to_bits(), plain[i].to_bits());
        assert_eq!(f.forward_with_grad(x).grad, joint.grad(i).to_vec());
    }
    let shifted: Vec<f64> = pts[6..].to_vec();
    assert_eq!(f.forward_batch(&shifted)[..], plain[3..]);
}

#[test]
fn parallel_and_serial_evaluation_agree_bitwise() {
    let f = random_field(3, 32, 3, Activation::Softplus { beta: 100.0 }, 12);
    let pts = random_points(1000, 3, 13);
    let mut adj = Adjoints::zeros(1000, 3);
    let mut r = rng::stream(14, "adj", 0);
    adj.d_value.iter_mut().chain(adj.d_grad.iter_mut()).for_each(|a| *a = r.random_range(-1.0..1.0));
    let one = crate::parallel::with_threads(1, || (f.eval_batch(&pts), f.param_gradient(&pts, &adj)));
    let four = crate::parallel::with_threads(4, || (f.eval_batch(&pts), f.param_gradient(&pts, &adj)));
    assert_eq!(one, four);
}

#[test]
fn zero_adjoints_give_zero_gradient() {
    let f = random_field(2, 8, 2, Activation::Softplus { beta: 100.0 }, 15);
    let pts = random_points(20, 2, 16);
    let g = f.param_gradient(&pts, &Adjoints::zeros(20, 2));
    assert!(g.iter().all(|&x| x == 0.0));
}

#[test]
fn affine_gradient_adjoint_closed_form() {
    let arch = Architecture::new(2, 1, 0, Activation::Softplus { beta: 100.0 }).unwrap();
    let f = NeuralField::new(arch, vec![0.3, -0.8, 0.1]).unwrap();
    let pts = random_points(5, 2, 17);
    let mut adj = Adjoints::zeros(5, 2);
    for i in 0..5 {
        adj.d_grad[2 * i] = 1.0;
    }
    assert_eq!(f.param_gradient(&pts, &adj), vec![5.0, 0.0, 0.0]);
}

/// Central differences of `L(theta) = sum a_i u(x_i) + b_i . grad u(x_i)`
/// over every parameter.
#[test]
fn param_gradient_matches_finite_differences() {
    for (seed, act) in [(20, Activation::Softplus { beta: 100.0 }), (21, Activation::Softplus { beta: 5.0 }), (22, Activation::Sine { omega0: 3.0 })] {
        let f = random_field(2, 10, 3, act, seed);
        let n = 12;
        let pts = random_points(n, 2, seed);
        let mut adj = Adjoints::zeros(n, 2);
        let mut r = rng::stream(seed, "adj", 0);
        adj.d_value.iter_mut().chain(adj.d_grad.iter_mut()).for_each(|a| *a = r.random_range(-1.0..1.0));
        let err = max_fd_relative_error(&f, &pts, &adj);
        assert!(err < 1e-4, "{act:?}: worst relative error {err}");
    }
}

#[test]
fn geometric_init_approximates_sphere() {
    let arch = Architecture::new(2, 32, 3, Activation::Softplus { beta: 100.0 }).unwrap();
    let f = init_geometric(&arch, 0.5, 3);
    assert!(f.forward(&[0.0, 0.0]) < 0.0);
    let pts = random_points(1000, 2, 4);
    let vals = f.forward_batch(&pts);
    let target: Vec<f64> = pts.chunks_exact(2).map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() - 0.5).collect();
    let agree = vals.iter().zip(&target).filter(|(a, b)| a.signum() == b.signum()).count();
    assert!(agree >= 900, "sign agreement {agree}");
    let corr = pearson(&vals, &target);
    assert!(corr >= 0.9, "correlation {corr}");
    let ring: Vec<f64> = (0..200)
        .flat_map(|i| {
            let t = i as f64 * std::f64::consts::TAU / 200.0;
            [0.5 * t.cos(), 0.5 * t.sin()]
        })
        .collect();
    let mean_abs = f.forward_batch(&ring).iter().map(|v| v.abs()).sum::<f64>() / 200.0;
    assert!(mean_abs < 0.1, "mean |u| on the sphere {mean_abs}");
    // Regression onto |x| - r leaves a near-unit gradient away from the origin.
    let grads = f.eval_batch(&pts);
    let (mut ok, mut total) = (0, 0);
    for (i, p) in pts.chunks_exact(2).enumerate() {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if (0.2..=1.0).contains(&r) {
            total += 1;
            let g = grads.grad_norm(i);
            if (0.9..=1.1).contains(&g) {
                ok += 1;
            }
        }
    }
    assert!(ok as f64 >= 0.95 * total as f64, "{ok}/{total} unit gradients");
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
